//! Named reference profiles, streams and witness sequences.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::lambda::{Extended, Family, FamilyReport, Formula, LambdaProfile, TailSpec};
use crate::stream::{GeometricTail, Stream};

pub fn uniform(c: f64) -> LambdaProfile {
    LambdaProfile::uniform(c).expect("share in [0, 1]")
}

pub fn example1() -> LambdaProfile {
    LambdaProfile::new(
        0,
        vec![],
        TailSpec::formula(Formula::Example1),
        TailSpec::formula(Formula::Example1),
    )
    .expect("valid")
}

pub fn venn_blocks() -> LambdaProfile {
    LambdaProfile::new(
        0,
        vec![],
        TailSpec::formula(Formula::VennBlocks),
        TailSpec::formula(Formula::VennBlocks),
    )
    .expect("valid")
}

/// `λ_{2i} = 1`, `λ_{2i+1} = 1/2`.
pub fn alternating() -> LambdaProfile {
    LambdaProfile::new(
        0,
        vec![],
        TailSpec::periodic(vec![1.0, 0.5]),
        TailSpec::periodic(vec![1.0, 0.5]),
    )
    .expect("valid")
}

/// `λ_i = past` for `i ≤ 0` and `λ_i = future` for `i > 0`.
pub fn step(past: f64, future: f64) -> LambdaProfile {
    LambdaProfile::new(1, vec![], TailSpec::constant(past), TailSpec::constant(future)).expect("valid")
}

/// `λ_i = 0` for `i < 0` and `λ_i = 1` for `i ≥ 0`.
pub fn sup_witness_profile() -> LambdaProfile {
    LambdaProfile::new(0, vec![], TailSpec::constant(0.0), TailSpec::constant(1.0)).expect("valid")
}

/// Every named profile shipped with the library.
pub fn profiles() -> Vec<(&'static str, LambdaProfile)> {
    vec![
        ("full_transfer", uniform(0.0)),
        ("uniform_quarter", uniform(0.25)),
        ("uniform_half", uniform(0.5)),
        ("no_transfer", uniform(1.0)),
        ("example1", example1()),
        ("venn_blocks", venn_blocks()),
        ("alternating", alternating()),
        ("step_unit_past", step(1.0, 0.0)),
        ("step_half_future", step(0.0, 0.5)),
        ("sup_witness", sup_witness_profile()),
    ]
}

pub fn profile(name: &str) -> Option<LambdaProfile> {
    profiles().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
}

/// `r_i = 1/2^i` for `0 ≤ i ≤ m`, zero elsewhere.
pub fn halving_prefix(m: u64) -> Stream {
    let values = (0..=m).map(|i| 0.5f64.powi(i as i32)).collect();
    Stream::from_values(0, values).expect("positive")
}

/// `r_i = 1/2^i` for `i ≥ 0`: the limit of [`halving_prefix`].
pub fn halving() -> Stream {
    Stream::from_values(0, vec![1.0])
        .expect("positive")
        .with_right_tail(GeometricTail::new(0.5, 0.5).expect("valid"))
}

/// `1/m` on `[-m, -1]`.
pub fn flat_past(m: u64) -> Stream {
    let m = m.max(1);
    Stream::from_values(-(m as i64), vec![1.0 / m as f64; m as usize]).expect("positive")
}

/// Single spike at `i - m` sized so that all of it that reaches `i` is 1:
/// `1 / ∏_{k=i-m}^{i-1} (1 - λ_k)`. `None` if nothing reaches `i`.
pub fn spike(p: &LambdaProfile, i: i64, m: u64) -> Option<Stream> {
    let reach = p.partial_product(i - m as i64, i - 1).ok()?;
    if reach == 0.0 {
        return None;
    }
    Stream::from_values(i - m as i64, vec![1.0 / reach]).ok()
}

/// Fixed streams added to every battery.
pub fn battery_streams() -> Vec<(String, Stream)> {
    let left_heavy = Stream::from_values(0, vec![1.0])
        .expect("positive")
        .with_left_tail(GeometricTail::new(1.0, 0.5).expect("valid"));
    let two_sided = Stream::from_values(-1, vec![2.0, 0.0, 1.5])
        .expect("positive")
        .with_left_tail(GeometricTail::new(0.5, 0.8).expect("valid"))
        .with_right_tail(GeometricTail::new(3.0, 0.25).expect("valid"));
    let mut out = vec![
        ("e0".to_string(), Stream::basis(0)),
        ("e-2".into(), Stream::basis(-2)),
        ("e3".into(), Stream::basis(3)),
        (
            "6e0+3e1".into(),
            Stream::from_values(0, vec![6.0, 3.0]).expect("positive"),
        ),
        (
            "2e0+e1".into(),
            Stream::from_values(0, vec![2.0, 1.0]).expect("positive"),
        ),
        (
            "e0+2e1".into(),
            Stream::from_values(0, vec![1.0, 2.0]).expect("positive"),
        ),
        ("halving".into(), halving()),
        ("halving-prefix-8".into(), halving_prefix(8)),
        ("left-tail".into(), left_heavy.clone()),
        ("two-sided".into(), two_sided),
    ];
    for m in [0, 2, 5] {
        out.push((format!("left-tail-truncated-{m}"), left_heavy.truncate_left(m)));
    }
    out
}

/// Sub-family memberships stated for a reference profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VennRow {
    pub profile: String,
    pub expected: BTreeMap<Family, bool>,
    pub report: FamilyReport,
    pub matches: bool,
}

/// A named profile and the memberships stated for it.
pub type VennExpectation = (&'static str, LambdaProfile, Vec<(Family, bool)>);

/// The reference profiles of the sub-family diagram with their stated memberships.
pub fn venn_expectations() -> Vec<VennExpectation> {
    use Family::*;
    vec![
        ("venn_blocks", venn_blocks(), vec![(P, true), (T, false)]),
        ("alternating", alternating(), vec![(P, true), (T, true)]),
        ("step_unit_past", step(1.0, 0.0), vec![(T, true), (P, true), (B, false)]),
        (
            "step_half_future",
            step(0.0, 0.5),
            vec![(B, true), (T, false), (P, false)],
        ),
        ("uniform_half", uniform(0.5), vec![(U, true), (T, true)]),
        ("full_transfer", uniform(0.0), vec![(U, true), (B, false)]),
    ]
}

pub fn membership(report: &FamilyReport, family: Family) -> bool {
    match family {
        Family::B => report.in_b,
        Family::E => report.in_e,
        Family::T => report.in_t,
        Family::P => report.in_p,
        Family::U => report.in_u,
    }
}

pub fn venn_table() -> Vec<VennRow> {
    venn_expectations()
        .into_iter()
        .map(|(name, p, expected)| {
            let report = p.classify();
            let matches = expected.iter().all(|&(f, want)| membership(&report, f) == want);
            VennRow {
                profile: name.into(),
                expected: expected.into_iter().collect(),
                report,
                matches,
            }
        })
        .collect()
}

/// `(n, n(n+1), S_{n(n+1)})` on the block profile.
pub fn venn_block_s_values(n_max: i64) -> Vec<(i64, i64, Extended)> {
    let p = venn_blocks();
    (1..=n_max).map(|n| (n, n * (n + 1), p.s_value(n * (n + 1)))).collect()
}
