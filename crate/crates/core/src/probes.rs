//! Continuity probes in the sup, point-wise and taxicab senses.
//!
//! Finite computation cannot decide continuity, so every probe either
//! certifies its verdict (a boundedness or Lipschitz certificate for a pass,
//! a replayable sequence for a fail) or says it is inconclusive.

use serde::Serialize;

use crate::axioms::DEFAULT_TOLERANCE;
use crate::battery::Battery;
use crate::engine::{allocate, IndexRange, RuleError};
use crate::fixtures;
use crate::lambda::{Extended, LambdaProfile};
use crate::rule::{GeometricRule, Rule};
use crate::stream::Stream;

/// Longest walk toward the past when searching for witness blocks.
pub const SEARCH_HORIZON: i64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    CertifiedPass,
    CertifiedFail,
    Inconclusive,
}

/// One term `r^m` of a witness sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceTerm {
    pub m: u64,
    /// Generation whose allocation is tracked.
    pub generation: i64,
    /// First and last generation with income in `r^m`.
    pub support: (i64, i64),
    /// Size of `r^m` in the norm the probe is about.
    pub input_size: f64,
    pub allocation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeVerdict {
    pub probe: &'static str,
    pub outcome: ProbeOutcome,
    pub detail: String,
    /// Certified sup-continuity constant, when there is one.
    pub bound: Option<Extended>,
    pub sequence: Vec<SequenceTerm>,
}

fn alloc_at(p: &LambdaProfile, r: &Stream, i: i64) -> Result<f64, RuleError> {
    let lo = r.window_lo().min(i);
    Ok(allocate(p, r, IndexRange::new(lo, i))?.get(i).unwrap_or(0.0))
}

/// Sup-continuity: `|φ_i(r) - φ_i(r')| ≤ sup S · sup_j |r_j - r'_j|` when
/// `sup S` is finite; otherwise blocks `[j_m, i_m]` whose partial `S` is at
/// least `m` give inputs `1/m` on the block that vanish in sup norm while
/// `φ_{i_m}` stays at least 1.
pub fn sup_continuity_probe(p: &LambdaProfile, depth: u64, battery: &Battery) -> Result<ProbeVerdict, RuleError> {
    let report = p.classify();
    if let Extended::Finite(b) = report.sup_s {
        let rule = GeometricRule::new(p.clone());
        let mut worst = 0.0f64;
        for (r, s) in battery.pairs() {
            let gap = r.sup_dist(s);
            let d = rule.apply(r)?.sup_dist(&rule.apply(s)?);
            let scale = r.sup_norm().max(s.sup_norm()).max(1.0);
            if d > b * gap + DEFAULT_TOLERANCE * scale {
                return Ok(ProbeVerdict {
                    probe: "sup_continuity",
                    outcome: ProbeOutcome::Inconclusive,
                    detail: format!("bound {b} violated on a battery pair: {d} > {b}·{gap}"),
                    bound: Some(report.sup_s),
                    sequence: vec![],
                });
            }
            if gap > 0.0 {
                worst = worst.max(d / gap);
            }
        }
        return Ok(ProbeVerdict {
            probe: "sup_continuity",
            outcome: ProbeOutcome::CertifiedPass,
            detail: format!(
                "sup S = {b}; largest observed ratio {worst} over {} pairs",
                battery.len()
            ),
            bound: Some(report.sup_s),
            sequence: vec![],
        });
    }

    let mut sequence = Vec::new();
    let mut cursor = BlockSearch::new(p);
    for m in 1..=depth {
        let Some((lo, hi)) = cursor.block_with_mass(m as f64) else {
            return Ok(ProbeVerdict {
                probe: "sup_continuity",
                outcome: ProbeOutcome::Inconclusive,
                detail: format!("no block with partial S ≥ {m} within the search horizon"),
                bound: Some(Extended::Infinite),
                sequence,
            });
        };
        let r = Stream::from_values(lo, vec![1.0 / m as f64; (hi - lo + 1) as usize])?;
        let phi = alloc_at(p, &r, hi)?;
        if phi < 1.0 - DEFAULT_TOLERANCE {
            return Ok(ProbeVerdict {
                probe: "sup_continuity",
                outcome: ProbeOutcome::Inconclusive,
                detail: format!("block [{lo}, {hi}] gives allocation {phi} < 1 at m = {m}"),
                bound: Some(Extended::Infinite),
                sequence,
            });
        }
        sequence.push(SequenceTerm {
            m,
            generation: hi,
            support: (lo, hi),
            input_size: r.sup_norm(),
            allocation: phi,
        });
    }
    Ok(ProbeVerdict {
        probe: "sup_continuity",
        outcome: ProbeOutcome::CertifiedFail,
        detail: format!("inputs of sup norm 1/m for m ≤ {depth} keep an allocation of at least 1"),
        bound: Some(Extended::Infinite),
        sequence,
    })
}

/// Walks candidate generations upward, looking for blocks of large partial `S`.
struct BlockSearch<'a> {
    p: &'a LambdaProfile,
    i: i64,
    stop: i64,
}

impl<'a> BlockSearch<'a> {
    fn new(p: &'a LambdaProfile) -> Self {
        let start = p.window_lo().min(0) - 8;
        Self {
            p,
            i: start,
            stop: p.window_end().max(0) + SEARCH_HORIZON,
        }
    }

    fn block_with_mass(&mut self, target: f64) -> Option<(i64, i64)> {
        while self.i <= self.stop {
            if let Some(lo) = self.partial_reaching(self.i, target) {
                return Some((lo, self.i));
            }
            self.i += 1;
        }
        None
    }

    /// Largest `j` with `λ_i ∑_{l=j}^{i} ∏_{k=l}^{i-1} (1 - λ_k) ≥ target`.
    fn partial_reaching(&self, i: i64, target: f64) -> Option<i64> {
        let lambda = self.p.lambda_at(i);
        if lambda == 0.0 {
            return None;
        }
        let mut prod = 1.0;
        let mut sum = 0.0;
        let mut j = i;
        while i - j <= SEARCH_HORIZON {
            sum += prod;
            if lambda * sum >= target {
                return Some(j);
            }
            prod *= 1.0 - self.p.lambda_at(j - 1);
            if prod < 1e-12 {
                return None;
            }
            j -= 1;
        }
        None
    }
}

/// Point-wise continuity: the full-transfer rule and rules with a unit share
/// below every generation pass; otherwise a spike travelling into the past
/// keeps `φ_i = λ_i` while vanishing point-wise.
pub fn pointwise_continuity_probe(p: &LambdaProfile, depth: u64, battery: &Battery) -> Result<ProbeVerdict, RuleError> {
    if p.uniform_value() == Some(0.0) {
        return Ok(ProbeVerdict {
            probe: "pointwise_continuity",
            outcome: ProbeOutcome::CertifiedPass,
            detail: "full-transfer rule allocates nothing to anyone".into(),
            bound: None,
            sequence: vec![],
        });
    }
    let report = p.classify();
    if report.in_p {
        // φ_i only sees incomes after the last unit share below i
        for case in battery.cases().iter().take(50) {
            let r = &case.stream;
            for &i in &case.generations {
                let Some(u) = last_unit_below(p, i) else {
                    return Ok(ProbeVerdict {
                        probe: "pointwise_continuity",
                        outcome: ProbeOutcome::Inconclusive,
                        detail: format!("no unit share found below {i} within the search horizon"),
                        bound: None,
                        sequence: vec![],
                    });
                };
                let full = alloc_at(p, r, i)?;
                let local = alloc_at(p, &r.restrict(Some(u + 1), None), i)?;
                if (full - local).abs() > DEFAULT_TOLERANCE * r.taxicab_norm().max(1.0) {
                    return Ok(ProbeVerdict {
                        probe: "pointwise_continuity",
                        outcome: ProbeOutcome::Inconclusive,
                        detail: format!("φ_{i} depends on incomes below the unit share at {u}"),
                        bound: None,
                        sequence: vec![],
                    });
                }
            }
        }
        return Ok(ProbeVerdict {
            probe: "pointwise_continuity",
            outcome: ProbeOutcome::CertifiedPass,
            detail: "every allocation is a finite sum over the block since the last unit share".into(),
            bound: None,
            sequence: vec![],
        });
    }

    let Some(i) = first_reachable(p) else {
        return Ok(ProbeVerdict {
            probe: "pointwise_continuity",
            outcome: ProbeOutcome::Inconclusive,
            detail: "no generation with a positive share and no unit share below it was found".into(),
            bound: None,
            sequence: vec![],
        });
    };
    let lambda = p.lambda_at(i);
    let mut sequence = Vec::new();
    for m in 1..=depth {
        let Some(r) = fixtures::spike(p, i, m) else {
            break;
        };
        let phi = alloc_at(p, &r, i)?;
        if (phi - lambda).abs() > DEFAULT_TOLERANCE * lambda.max(1.0) {
            return Ok(ProbeVerdict {
                probe: "pointwise_continuity",
                outcome: ProbeOutcome::Inconclusive,
                detail: format!("spike at {} gives φ_{i} = {phi}, expected {lambda}", i - m as i64),
                bound: None,
                sequence,
            });
        }
        sequence.push(SequenceTerm {
            m,
            generation: i,
            support: (i - m as i64, i - m as i64),
            input_size: r.value_at(i - m as i64),
            allocation: phi,
        });
    }
    if sequence.len() as u64 != depth {
        return Ok(ProbeVerdict {
            probe: "pointwise_continuity",
            outcome: ProbeOutcome::Inconclusive,
            detail: format!("spike sequence for generation {i} stopped early"),
            bound: None,
            sequence,
        });
    }
    Ok(ProbeVerdict {
        probe: "pointwise_continuity",
        outcome: ProbeOutcome::CertifiedFail,
        detail: format!("spikes at {i} - m vanish point-wise but φ_{i} stays at λ_{i} = {lambda} for m ≤ {depth}"),
        bound: None,
        sequence,
    })
}

fn last_unit_below(p: &LambdaProfile, i: i64) -> Option<i64> {
    (1..=SEARCH_HORIZON).map(|d| i - d).find(|&k| p.lambda_at(k) == 1.0)
}

/// First generation (scanning upward) with a positive share and no unit share below it.
fn first_reachable(p: &LambdaProfile) -> Option<i64> {
    let start = p.window_lo() - 8;
    let stop = p.window_end() + SEARCH_HORIZON;
    // shares below `start` follow the left tail, which has no units here
    (start..=stop)
        .find(|&i| p.lambda_at(i) > 0.0)
        .filter(|&i| (start..i).all(|k| p.lambda_at(k) < 1.0))
}

/// Taxicab continuity along `r^m_i = 1/2^i` on `[0, m]` and the truncations
/// of battery streams. Geometric rules are certified by their Lipschitz
/// constant of 1.
pub fn taxicab_continuity_probe(rule: &dyn Rule, depth: u64, battery: &Battery) -> Result<ProbeVerdict, RuleError> {
    let limit = fixtures::halving();
    let target = rule.apply(&limit)?;
    let mut sequence = Vec::new();
    let mut last = 0.0;
    for m in (0..=depth).filter(|&m| m <= 64 || m == depth) {
        let rm = fixtures::halving_prefix(m);
        let out = rule.apply(&rm)?;
        last = out.taxicab_dist(&target);
        sequence.push(SequenceTerm {
            m,
            generation: 0,
            support: (0, m as i64),
            input_size: rm.taxicab_dist(&limit),
            allocation: out.value_at(0),
        });
    }
    if last > DEFAULT_TOLERANCE {
        return Ok(ProbeVerdict {
            probe: "taxicab_continuity",
            outcome: ProbeOutcome::CertifiedFail,
            detail: format!(
                "r^m → r but φ_0(r^m) = {} for large m while φ_0(r) = {}; allocation distance {last} at m = {depth}",
                sequence.last().map_or(f64::NAN, |t| t.allocation),
                target.value_at(0)
            ),
            bound: None,
            sequence,
        });
    }
    let verdict = crate::axioms::check_axiom_with(
        rule,
        crate::axioms::Axiom::Continuity,
        battery,
        DEFAULT_TOLERANCE,
        depth,
    );
    if let Some(w) = verdict.witness {
        return Ok(ProbeVerdict {
            probe: "taxicab_continuity",
            outcome: ProbeOutcome::CertifiedFail,
            detail: format!("battery case {}: {}", w.label, w.detail),
            bound: None,
            sequence,
        });
    }
    let (outcome, detail) = if rule.profile().is_some() {
        (
            ProbeOutcome::CertifiedPass,
            "geometric rule: 1-Lipschitz in taxicab distance".to_string(),
        )
    } else {
        (
            ProbeOutcome::Inconclusive,
            format!("no discontinuity found along truncation sequences at depth {depth}"),
        )
    };
    Ok(ProbeVerdict {
        probe: "taxicab_continuity",
        outcome,
        detail,
        bound: None,
        sequence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::BatteryConfig;
    use crate::fixtures::{alternating, uniform, venn_blocks};

    fn small() -> Battery {
        Battery::new(BatteryConfig {
            size: 20,
            ..Default::default()
        })
    }

    #[test]
    fn uniform_half_is_sup_continuous_with_bound_one() {
        let v = sup_continuity_probe(&uniform(0.5), 10, &small()).unwrap();
        assert_eq!(v.outcome, ProbeOutcome::CertifiedPass);
        assert_eq!(v.bound, Some(Extended::Finite(1.0)));
    }

    #[test]
    fn venn_blocks_fail_sup_continuity() {
        let v = sup_continuity_probe(&venn_blocks(), 30, &small()).unwrap();
        assert_eq!(v.outcome, ProbeOutcome::CertifiedFail, "{}", v.detail);
        assert!(v.sequence.iter().all(|t| t.allocation >= 1.0 - 1e-9));
    }

    #[test]
    fn pointwise_verdicts() {
        let b = small();
        assert_eq!(
            pointwise_continuity_probe(&uniform(0.0), 5, &b).unwrap().outcome,
            ProbeOutcome::CertifiedPass
        );
        assert_eq!(
            pointwise_continuity_probe(&alternating(), 5, &b).unwrap().outcome,
            ProbeOutcome::CertifiedPass
        );
        let v = pointwise_continuity_probe(&uniform(0.5), 50, &b).unwrap();
        assert_eq!(v.outcome, ProbeOutcome::CertifiedFail);
        assert!(v.sequence.iter().all(|t| t.allocation == 0.5));
    }

    #[test]
    fn geometric_rules_pass_taxicab_probe() {
        let v = taxicab_continuity_probe(&GeometricRule::new(uniform(0.25)), 128, &small()).unwrap();
        assert_eq!(v.outcome, ProbeOutcome::CertifiedPass, "{}", v.detail);
    }
}
