//! Retention profiles `λ: ℤ → [0, 1]` and their analytic summaries.
//!
//! Generation `i` keeps the share `λ_i` of everything it holds and passes the
//! rest to `i + 1`. A [`LambdaProfile`] stores `λ` on a finite window and
//! describes each side by a [`TailSpec`] whose products, sums and suprema have
//! closed forms. Those closed forms drive the sub-family tests in
//! [`LambdaProfile::classify`]:
//!
//! * balance (`B`): every forward tail product `∏_{k≥i} (1 - λ_k)` vanishes;
//! * bounded away from zero (`E`): `inf λ > 0`;
//! * sup-continuous (`T`): the retention statistic `S_i` is bounded;
//! * point-wise continuous (`P`): a unit `λ` sits below every generation;
//! * uniform (`U`): `λ` is constant.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::stream::powu;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("retention share at generation {index} must lie in [0, 1], got {value}")]
    InvalidValue { index: i64, value: f64 },
    #[error("{side} tail: {reason}")]
    InvalidTail { side: &'static str, reason: String },
    #[error("product range [{i}, {j}] is reversed")]
    ReversedRange { i: i64, j: i64 },
}

/// A nonnegative real or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn max(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.max(b)),
            _ => Extended::Infinite,
        }
    }

    /// `share * self`, with `0 * ∞ = 0` because a zero share retains nothing.
    fn times_share(self, share: f64) -> Extended {
        match self {
            _ if share == 0.0 => Extended::Finite(0.0),
            Extended::Finite(v) => Extended::Finite(share * v),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => serializer.serialize_f64(*v),
            Extended::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// Named closed-form retention functions, defined on all of `ℤ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `λ_i = 1 - exp(-2^{-i})` for `i > 0`, `0` otherwise.
    Example1,
    /// `λ_i = 1` for `i < 0` and for `i = n(n+1)`, `n ≥ 0`; `0` otherwise.
    VennBlocks,
}

fn is_pronic(i: i64) -> bool {
    i >= 0 && next_pronic(i) == i
}

/// Smallest `n(n+1) >= i` for `i >= 0`.
fn next_pronic(i: i64) -> i64 {
    let mut n = (((4.0 * i as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as i64;
    n = n.max(0);
    while n > 0 && (n - 1) * n >= i {
        n -= 1;
    }
    while n * (n + 1) < i {
        n += 1;
    }
    n * (n + 1)
}

impl Formula {
    pub fn value(&self, i: i64) -> f64 {
        match self {
            Formula::Example1 if i > 0 => -(-(-(i as f64)).exp2()).exp_m1(),
            Formula::Example1 => 0.0,
            Formula::VennBlocks if i < 0 || is_pronic(i) => 1.0,
            Formula::VennBlocks => 0.0,
        }
    }

    /// `(b, c)` such that `λ_k = c` for every `k < b`.
    fn constant_below(&self) -> (i64, f64) {
        match self {
            Formula::Example1 => (1, 0.0),
            Formula::VennBlocks => (0, 1.0),
        }
    }

    /// `∏_{k=a}^{b} (1 - λ_k)` for `a <= b + 1`.
    fn range_product(&self, a: i64, b: i64) -> f64 {
        match self {
            Formula::Example1 => {
                let a = a.max(1);
                if b < a {
                    1.0
                } else {
                    // sum_{k=a}^{b} 2^{-k} = 2^{1-a} - 2^{-b}
                    (-((1 - a) as f64).exp2() + (-(b as f64)).exp2()).exp()
                }
            }
            Formula::VennBlocks => {
                if b < a {
                    1.0
                } else if a < 0 || next_pronic(a) <= b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    fn infinite_product_from(&self, s: i64) -> f64 {
        match self {
            Formula::Example1 => (-((1 - s.max(1)) as f64).exp2()).exp(),
            Formula::VennBlocks => 0.0,
        }
    }
}

/// How `λ` continues past one edge of the explicit window.
///
/// Periodic patterns are indexed by absolute generation: `λ_k = pattern[k mod len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailSpec {
    Constant { value: f64 },
    Periodic { pattern: Vec<f64> },
    Formula { name: Formula },
}

impl TailSpec {
    pub fn constant(value: f64) -> Self {
        TailSpec::Constant { value }
    }

    pub fn periodic(pattern: Vec<f64>) -> Self {
        TailSpec::Periodic { pattern }
    }

    pub fn formula(name: Formula) -> Self {
        TailSpec::Formula { name }
    }

    fn validate(&self, side: &'static str) -> Result<(), ProfileError> {
        let bad = |reason: String| Err(ProfileError::InvalidTail { side, reason });
        match self {
            TailSpec::Constant { value } if !in_unit(*value) => bad(format!("constant {value} outside [0, 1]")),
            TailSpec::Periodic { pattern } if pattern.is_empty() => bad("periodic pattern is empty".into()),
            TailSpec::Periodic { pattern } => match pattern.iter().find(|v| !in_unit(**v)) {
                Some(v) => bad(format!("pattern entry {v} outside [0, 1]")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn value(&self, i: i64) -> f64 {
        match self {
            TailSpec::Constant { value } => *value,
            TailSpec::Periodic { pattern } => pattern[i.rem_euclid(pattern.len() as i64) as usize],
            TailSpec::Formula { name } => name.value(i),
        }
    }

    fn range_product(&self, a: i64, b: i64) -> f64 {
        if b < a {
            return 1.0;
        }
        let n = (b - a + 1) as u64;
        match self {
            TailSpec::Constant { value } => powu(1.0 - value, n),
            TailSpec::Periodic { pattern } => {
                let len = pattern.len() as u64;
                let full = period_product(pattern);
                let rest: f64 = (0..n % len)
                    .map(|o| 1.0 - self.value(a + (n - n % len) as i64 + o as i64))
                    .product();
                powu(full, n / len) * rest
            }
            TailSpec::Formula { name } => name.range_product(a, b),
        }
    }

    fn infinite_product_from(&self, s: i64) -> f64 {
        match self {
            TailSpec::Constant { value } => f64::from(*value == 0.0),
            TailSpec::Periodic { pattern } => f64::from(pattern.iter().all(|&v| v == 0.0)),
            TailSpec::Formula { name } => name.infinite_product_from(s),
        }
    }

    fn infimum(&self) -> f64 {
        match self {
            TailSpec::Constant { value } => *value,
            TailSpec::Periodic { pattern } => pattern.iter().copied().fold(1.0, f64::min),
            TailSpec::Formula { .. } => 0.0,
        }
    }

    /// Whether units occur arbitrarily far toward `-∞`.
    fn units_unbounded_below(&self) -> bool {
        match self {
            TailSpec::Constant { value } => *value == 1.0,
            TailSpec::Periodic { pattern } => pattern.contains(&1.0),
            TailSpec::Formula { name } => *name == Formula::VennBlocks,
        }
    }

    fn describe(&self) -> String {
        match self {
            TailSpec::Constant { value } => format!("constant {value}"),
            TailSpec::Periodic { pattern } => format!("periodic {pattern:?}"),
            TailSpec::Formula { name } => format!("formula {name:?}"),
        }
    }
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

fn period_product(pattern: &[f64]) -> f64 {
    pattern.iter().map(|v| 1.0 - v).product()
}

/// The part of a profile below some index where `λ` no longer changes form.
#[derive(Debug, Clone, Copy)]
pub(crate) enum LeftModel<'a> {
    Constant(f64),
    Periodic(&'a [f64]),
}

impl LeftModel<'_> {
    pub(crate) fn value(&self, k: i64) -> f64 {
        match self {
            LeftModel::Constant(c) => *c,
            LeftModel::Periodic(p) => p[k.rem_euclid(p.len() as i64) as usize],
        }
    }

    pub(crate) fn period(&self) -> usize {
        match self {
            LeftModel::Constant(_) => 1,
            LeftModel::Periodic(p) => p.len(),
        }
    }

    /// `∏` of `(1 - λ)` over one full period.
    pub(crate) fn period_factor(&self) -> f64 {
        match self {
            LeftModel::Constant(c) => 1.0 - c,
            LeftModel::Periodic(p) => period_product(p),
        }
    }

    /// `G(x) = ∑_{m≥1} ∏_{k=x-m}^{x-1} (1 - λ_k)` for `x` inside the model region.
    fn reach_below(&self, x: i64) -> Extended {
        let rho = self.period_factor();
        let mut block = 0.0;
        let mut prod = 1.0;
        for m in 1..=self.period() as i64 {
            prod *= 1.0 - self.value(x - m);
            block += prod;
        }
        if rho >= 1.0 {
            if block > 0.0 {
                Extended::Infinite
            } else {
                Extended::Finite(0.0)
            }
        } else {
            Extended::Finite(block / (1.0 - rho))
        }
    }
}

/// Retention shares `λ_i` for every generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct LambdaProfile {
    window_lo: i64,
    values: Vec<f64>,
    left_tail: TailSpec,
    right_tail: TailSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(default)]
    window_lo: i64,
    #[serde(default)]
    values: Vec<f64>,
    left_tail: TailSpec,
    right_tail: TailSpec,
}

impl TryFrom<RawProfile> for LambdaProfile {
    type Error = ProfileError;

    fn try_from(raw: RawProfile) -> Result<Self, Self::Error> {
        LambdaProfile::new(raw.window_lo, raw.values, raw.left_tail, raw.right_tail)
    }
}

impl LambdaProfile {
    pub fn new(
        window_lo: i64,
        values: Vec<f64>,
        left_tail: TailSpec,
        right_tail: TailSpec,
    ) -> Result<Self, ProfileError> {
        for (offset, &value) in values.iter().enumerate() {
            if !in_unit(value) {
                return Err(ProfileError::InvalidValue {
                    index: window_lo + offset as i64,
                    value,
                });
            }
        }
        left_tail.validate("left")?;
        right_tail.validate("right")?;
        Ok(Self {
            window_lo,
            values,
            left_tail,
            right_tail,
        })
    }

    /// Constant `λ = c` everywhere.
    pub fn uniform(c: f64) -> Result<Self, ProfileError> {
        Self::new(0, Vec::new(), TailSpec::constant(c), TailSpec::constant(c))
    }

    pub fn full_transfer() -> Self {
        Self::uniform(0.0).expect("0 is a valid share")
    }

    pub fn no_transfer() -> Self {
        Self::uniform(1.0).expect("1 is a valid share")
    }

    pub fn window_lo(&self) -> i64 {
        self.window_lo
    }

    pub fn window_end(&self) -> i64 {
        self.window_lo + self.values.len() as i64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_tail(&self) -> &TailSpec {
        &self.left_tail
    }

    pub fn right_tail(&self) -> &TailSpec {
        &self.right_tail
    }

    pub fn lambda_at(&self, i: i64) -> f64 {
        if i < self.window_lo {
            self.left_tail.value(i)
        } else if i >= self.window_end() {
            self.right_tail.value(i)
        } else {
            self.values[(i - self.window_lo) as usize]
        }
    }

    /// `(b, model)`: every `λ_k` with `k < b` follows `model`.
    pub(crate) fn left_model(&self) -> (i64, LeftModel<'_>) {
        match &self.left_tail {
            TailSpec::Constant { value } => (self.window_lo, LeftModel::Constant(*value)),
            TailSpec::Periodic { pattern } => (self.window_lo, LeftModel::Periodic(pattern)),
            TailSpec::Formula { name } => {
                let (bound, c) = name.constant_below();
                (self.window_lo.min(bound), LeftModel::Constant(c))
            }
        }
    }

    fn range_product(&self, a: i64, b: i64) -> f64 {
        let (lo, end) = (self.window_lo, self.window_end());
        let left = self.left_tail.range_product(a, b.min(lo - 1));
        if left == 0.0 {
            return 0.0;
        }
        let window: f64 = (a.max(lo)..=b.min(end - 1))
            .map(|k| 1.0 - self.values[(k - lo) as usize])
            .product();
        left * window * self.right_tail.range_product(a.max(end), b)
    }

    /// `∏_{k=i}^{j} (1 - λ_k)`; the empty range `j = i - 1` gives 1.
    pub fn partial_product(&self, i: i64, j: i64) -> Result<f64, ProfileError> {
        if j < i - 1 {
            return Err(ProfileError::ReversedRange { i, j });
        }
        Ok(self.range_product(i, j))
    }

    /// `∏_{k=i}^{∞} (1 - λ_k)`: the share of generation `i`'s income that is
    /// passed on forever and never retained.
    pub fn tail_product_limit(&self, i: i64) -> f64 {
        let end = self.window_end();
        if i >= end {
            return self.right_tail.infinite_product_from(i);
        }
        let head = self.range_product(i, end - 1);
        if head == 0.0 {
            0.0
        } else {
            head * self.right_tail.infinite_product_from(end)
        }
    }

    /// `A_i = ∑_{j≤i} ∏_{k=j}^{i-1} (1 - λ_k)`, the share mass reaching `i`.
    pub fn reach_mass(&self, i: i64) -> Extended {
        let (bound, model) = self.left_model();
        let mut sum = 1.0;
        let mut prod = 1.0;
        let mut j = i;
        while j > bound {
            prod *= 1.0 - self.lambda_at(j - 1);
            j -= 1;
            if prod == 0.0 {
                return Extended::Finite(sum);
            }
            sum += prod;
        }
        match model.reach_below(j) {
            Extended::Finite(g) => Extended::Finite(sum + prod * g),
            Extended::Infinite => Extended::Infinite,
        }
    }

    /// `S_i = λ_i ∑_{j≤i} ∏_{k=j}^{i-1} (1 - λ_k)`.
    pub fn s_value(&self, i: i64) -> Extended {
        self.reach_mass(i).times_share(self.lambda_at(i))
    }

    /// `sup_i S_i` over all of `ℤ`.
    pub fn sup_s(&self) -> Extended {
        let (bound, model) = self.left_model();
        // left of `bound` the statistic only depends on the phase
        let mut best = (1..=model.period() as i64)
            .map(|o| self.s_value(bound - o))
            .fold(Extended::Finite(0.0), Extended::max);

        let end = self.window_end();
        let mut reach = self.reach_mass(bound);
        for i in bound..end {
            let lambda = self.lambda_at(i);
            best = best.max(reach.times_share(lambda));
            reach = advance_reach(reach, lambda);
        }
        best.max(self.right_sup_s(end, reach))
    }

    /// Supremum of `S_i` over `i >= end`, given `A_end`.
    fn right_sup_s(&self, end: i64, reach: Extended) -> Extended {
        match &self.right_tail {
            TailSpec::Constant { value } if *value == 0.0 => Extended::Finite(0.0),
            TailSpec::Constant { value } => match reach {
                // A_i moves monotonically to 1/c, so S_i moves monotonically to 1
                Extended::Finite(a) => Extended::Finite((value * a).max(1.0)),
                Extended::Infinite => Extended::Infinite,
            },
            TailSpec::Periodic { pattern } => {
                let rho = period_product(pattern);
                let len = pattern.len() as i64;
                let mut best = Extended::Finite(0.0);
                let mut reach = reach;
                for i in end..end + len {
                    let lambda = self.lambda_at(i);
                    let phase = match reach {
                        _ if lambda == 0.0 => Extended::Finite(0.0),
                        Extended::Infinite => Extended::Infinite,
                        Extended::Finite(a) => {
                            // A_{i+len} = offset + rho * A_i: monotone to offset / (1 - rho)
                            let offset = (i..i + len).fold(0.0, |acc, k| 1.0 + (1.0 - self.lambda_at(k)) * acc);
                            Extended::Finite(lambda * a.max(offset / (1.0 - rho)))
                        }
                    };
                    best = best.max(phase);
                    reach = advance_reach(reach, lambda);
                }
                best
            }
            TailSpec::Formula {
                name: Formula::VennBlocks,
            } => Extended::Infinite,
            TailSpec::Formula {
                name: Formula::Example1,
            } => {
                let Extended::Finite(mut a) = reach else {
                    return Extended::Infinite;
                };
                // λ_i <= 2^{-i} and A grows by at most one per step, so
                // 2^{-i} (A_i + 2) bounds every later S
                let mut best: f64 = 0.0;
                let mut i = end;
                loop {
                    let lambda = self.lambda_at(i);
                    best = best.max(lambda * a);
                    if i >= 1 && (-(i as f64)).exp2() * (a + 2.0) < best || lambda == 0.0 && i > 1 {
                        return Extended::Finite(best);
                    }
                    a = 1.0 + (1.0 - lambda) * a;
                    i += 1;
                }
            }
        }
    }

    /// `inf_i λ_i`.
    pub fn infimum(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(self.left_tail.infimum().min(self.right_tail.infimum()), f64::min)
    }

    /// `Some(c)` if `λ ≡ c`.
    pub fn uniform_value(&self) -> Option<f64> {
        let mut seen: Vec<f64> = self.values.clone();
        for tail in [&self.left_tail, &self.right_tail] {
            match tail {
                TailSpec::Constant { value } => seen.push(*value),
                TailSpec::Periodic { pattern } => seen.extend(pattern),
                TailSpec::Formula { .. } => return None,
            }
        }
        let first = seen[0];
        seen.iter().all(|&v| v == first).then_some(first)
    }

    pub fn classify(&self) -> FamilyReport {
        let mut witnesses = BTreeMap::new();
        let end = self.window_end();

        let forever = self.right_tail.infinite_product_from(end);
        let in_b = forever == 0.0;
        witnesses.insert(
            Family::B,
            format!(
                "right tail {} leaves forward product {forever} from generation {end}",
                self.right_tail.describe()
            ),
        );

        let infimum = self.infimum();
        let in_e = infimum > 0.0;
        witnesses.insert(Family::E, format!("inf λ = {infimum}"));

        let sup_s = self.sup_s();
        let in_t = sup_s.is_finite();
        witnesses.insert(Family::T, format!("sup S = {sup_s}"));

        let in_p = self.left_tail.units_unbounded_below();
        witnesses.insert(
            Family::P,
            format!(
                "left tail {} {} unit shares arbitrarily far back",
                self.left_tail.describe(),
                if in_p { "has" } else { "lacks" }
            ),
        );

        let uniform = self.uniform_value();
        let in_u = uniform.is_some();
        witnesses.insert(
            Family::U,
            match uniform {
                Some(c) => format!("λ ≡ {c}"),
                None => "λ is not constant".into(),
            },
        );

        FamilyReport {
            in_b,
            in_e,
            in_t,
            in_p,
            in_u,
            sup_s,
            witnesses,
        }
    }
}

/// `A_{i+1} = 1 + (1 - λ_i) A_i`.
fn advance_reach(reach: Extended, lambda: f64) -> Extended {
    match reach {
        Extended::Finite(a) => Extended::Finite(1.0 + (1.0 - lambda) * a),
        Extended::Infinite if lambda == 1.0 => Extended::Finite(1.0),
        Extended::Infinite => Extended::Infinite,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Family {
    B,
    E,
    T,
    P,
    U,
}

/// Sub-family membership of a geometric rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    #[serde(rename = "in_B")]
    pub in_b: bool,
    #[serde(rename = "in_E")]
    pub in_e: bool,
    #[serde(rename = "in_T")]
    pub in_t: bool,
    #[serde(rename = "in_P")]
    pub in_p: bool,
    #[serde(rename = "in_U")]
    pub in_u: bool,
    #[serde(rename = "sup_S")]
    pub sup_s: Extended,
    pub witnesses: BTreeMap<Family, String>,
}
