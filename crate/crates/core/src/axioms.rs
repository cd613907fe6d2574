//! Checking allocation axioms on batteries of streams.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::{Battery, BatteryStamp, Case};
use crate::engine::RuleError;
use crate::fixtures;
use crate::rule::{consistency_transform, Rule};
use crate::stream::{Stream, SupportStart};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Truncation depth of the convergent sequences used for continuity.
pub const DEFAULT_DEPTH: u64 = 512;

/// Taxicab distance (relative to the income) below which a truncation counts
/// as having converged for the continuity check.
pub const SEQUENCE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Feasibility,
    Balance,
    ScaleInvariance,
    IndependenceOfFutureIncome,
    IndependenceOfFutureStreams,
    ZeroIncomeInessential,
    TranslationInvariance,
    Idempotency,
    Consistency,
    Continuity,
}

impl Axiom {
    pub const ALL: [Axiom; 10] = [
        Axiom::Feasibility,
        Axiom::Balance,
        Axiom::ScaleInvariance,
        Axiom::IndependenceOfFutureIncome,
        Axiom::IndependenceOfFutureStreams,
        Axiom::ZeroIncomeInessential,
        Axiom::TranslationInvariance,
        Axiom::Idempotency,
        Axiom::Consistency,
        Axiom::Continuity,
    ];

    /// The five axioms that single out geometric rules.
    pub const CHARACTERIZING: [Axiom; 5] = [
        Axiom::Feasibility,
        Axiom::ScaleInvariance,
        Axiom::IndependenceOfFutureIncome,
        Axiom::Consistency,
        Axiom::Continuity,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Axiom::Feasibility => "feasibility",
            Axiom::Balance => "balance",
            Axiom::ScaleInvariance => "scale_invariance",
            Axiom::IndependenceOfFutureIncome => "independence_of_future_income",
            Axiom::IndependenceOfFutureStreams => "independence_of_future_streams",
            Axiom::ZeroIncomeInessential => "zero_income_inessential",
            Axiom::TranslationInvariance => "translation_invariance",
            Axiom::Idempotency => "idempotency",
            Axiom::Consistency => "consistency",
            Axiom::Continuity => "continuity",
        }
    }

    pub fn parse(s: &str) -> Option<Axiom> {
        Axiom::ALL.into_iter().find(|a| a.id() == s)
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    PreconditionUnmet,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::PreconditionUnmet => "precondition_unmet",
        })
    }
}

/// Inputs that exhibit a violation, replayable on their own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub case: usize,
    pub label: String,
    pub detail: String,
    pub inputs: Vec<Stream>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomVerdict {
    pub rule: String,
    pub axiom: Axiom,
    pub outcome: Outcome,
    pub witness: Option<Witness>,
    /// Largest discrepancy seen (the failing one, on failure).
    pub violation: f64,
    pub battery: BatteryStamp,
    pub precondition_unmet: usize,
}

/// What a single case says about an axiom.
#[derive(Debug, Clone)]
enum Finding {
    Holds {
        discrepancy: f64,
    },
    Violated {
        discrepancy: f64,
        detail: String,
        inputs: Vec<Stream>,
    },
    Skipped,
}

struct Checker<'a> {
    rule: &'a dyn Rule,
    tolerance: f64,
    depth: u64,
}

fn mass_window(s: &Stream, lo: Option<i64>, hi: Option<i64>) -> Stream {
    s.restrict(lo, hi)
}

impl Checker<'_> {
    fn apply(&self, r: &Stream) -> Result<Stream, RuleError> {
        self.rule.apply(r)
    }

    fn tol(&self, scale: f64) -> f64 {
        self.tolerance * scale.max(1.0)
    }

    /// Folds a list of (discrepancy, allowed, detail, inputs) into one finding.
    fn worst(items: impl IntoIterator<Item = (f64, f64, String, Vec<Stream>)>) -> Finding {
        let mut max = 0.0f64;
        for (d, allowed, detail, inputs) in items {
            if d.is_nan() || d > allowed {
                return Finding::Violated {
                    discrepancy: d,
                    detail,
                    inputs,
                };
            }
            max = max.max(d);
        }
        Finding::Holds { discrepancy: max }
    }

    fn check(&self, axiom: Axiom, case: &Case) -> Result<Finding, RuleError> {
        let r = &case.stream;
        let norm = r.taxicab_norm();
        Ok(match axiom {
            Axiom::Feasibility => {
                let phi = self.apply(r)?;
                let excess = phi.taxicab_norm() - norm;
                Self::worst([(
                    excess.max(0.0),
                    self.tol(norm),
                    format!("allocates {} out of income {norm}", phi.taxicab_norm()),
                    vec![r.clone()],
                )])
            }
            Axiom::Balance => {
                let phi = self.apply(r)?;
                let gap = (phi.taxicab_norm() - norm).abs();
                Self::worst([(
                    gap,
                    self.tol(norm),
                    format!("allocates {} out of income {norm}", phi.taxicab_norm()),
                    vec![r.clone()],
                )])
            }
            Axiom::ScaleInvariance => {
                let phi = self.apply(r)?;
                let mut items = Vec::new();
                for &alpha in &case.factors {
                    let scaled = self.apply(&r.scale(alpha)?)?;
                    let d = scaled.taxicab_dist(&phi.scale(alpha)?);
                    items.push((
                        d,
                        self.tol(norm * alpha),
                        format!("φ({alpha}·r) differs from {alpha}·φ(r) by {d} in taxicab distance"),
                        vec![r.clone()],
                    ));
                }
                Self::worst(items)
            }
            Axiom::IndependenceOfFutureIncome => {
                let phi = self.apply(r)?;
                let mut items = Vec::new();
                for &j in &case.generations {
                    let rj = r.value_at(j);
                    let mut changed = vec![0.0, 0.5 * rj, 2.0 * rj, rj + 1.0];
                    if rj >= 1.0 {
                        changed.push(rj - 1.0);
                    }
                    for v in changed {
                        let other = r.with_value(j, v)?;
                        let d = mass_window(&self.apply(&other)?, None, Some(j - 1)).taxicab_dist(&mass_window(
                            &phi,
                            None,
                            Some(j - 1),
                        ));
                        items.push((
                            d,
                            self.tol(norm.max(other.taxicab_norm())),
                            format!("changing r_{j} from {rj} to {v} moves allocations below {j} by {d}"),
                            vec![r.clone(), other],
                        ));
                    }
                }
                Self::worst(items)
            }
            Axiom::IndependenceOfFutureStreams => {
                let phi = self.apply(r)?;
                let mut items = Vec::new();
                for &j in &case.generations {
                    let future = case.partner.shift_by(j - case.partner.window_lo());
                    let other = r.restrict(None, Some(j - 1)).add(&future.restrict(Some(j), None))?;
                    let d = mass_window(&self.apply(&other)?, None, Some(j - 1)).taxicab_dist(&mass_window(
                        &phi,
                        None,
                        Some(j - 1),
                    ));
                    items.push((
                        d,
                        self.tol(norm.max(other.taxicab_norm())),
                        format!("replacing incomes from {j} on moves allocations below {j} by {d}"),
                        vec![r.clone(), other],
                    ));
                }
                Self::worst(items)
            }
            Axiom::ZeroIncomeInessential => {
                let mut items = Vec::new();
                let zero_out = self.apply(&Stream::zero())?.taxicab_norm();
                items.push((
                    zero_out,
                    self.tolerance,
                    format!("allocates {zero_out} from no income"),
                    vec![Stream::zero()],
                ));
                if let SupportStart::At(s) = r.support_start() {
                    let below = self.apply(r)?.mass_below(s);
                    items.push((
                        below,
                        self.tol(norm),
                        format!("generations below {s} have no income but receive {below}"),
                        vec![r.clone()],
                    ));
                }
                Self::worst(items)
            }
            Axiom::TranslationInvariance => {
                let phi = self.apply(r)?;
                let moved = self.apply(&r.shift())?;
                let d = moved.taxicab_dist(&phi.shift());
                Self::worst([(
                    d,
                    self.tol(norm),
                    format!("φ(shifted r) differs from shifted φ(r) by {d}"),
                    vec![r.clone()],
                )])
            }
            Axiom::Idempotency => {
                let phi = self.apply(r)?;
                let again = self.apply(&phi)?;
                let d = again.taxicab_dist(&phi);
                Self::worst([(
                    d,
                    self.tol(norm),
                    format!("φ(φ(r)) differs from φ(r) by {d}"),
                    vec![r.clone()],
                )])
            }
            Axiom::Consistency => {
                let phi = self.apply(r)?;
                let mut items = Vec::new();
                let mut met = false;
                for &j in &case.generations {
                    let rj = match consistency_transform(self.rule, r, j) {
                        Ok(s) => s,
                        Err(RuleError::ConsistencyPrecondition { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    met = true;
                    let d =
                        mass_window(&self.apply(&rj)?, Some(j), None).taxicab_dist(&mass_window(&phi, Some(j), None));
                    items.push((
                        d,
                        self.tol(norm.max(rj.taxicab_norm())),
                        format!(
                            "after the transform at {j} (mass {} there) allocations from {j} on move by {d}",
                            rj.value_at(j)
                        ),
                        vec![r.clone(), rj],
                    ));
                }
                if !met {
                    return Ok(Finding::Skipped);
                }
                Self::worst(items)
            }
            Axiom::Continuity => {
                let mut items = Vec::new();
                for (limit, approx, what) in self.convergent_sequences(r) {
                    let target = self.apply(&limit)?;
                    let d = self.apply(&approx)?.taxicab_dist(&target);
                    let gap = approx.taxicab_dist(&limit);
                    items.push((
                        d,
                        self.tol(norm),
                        format!(
                            "{what}: input distance {gap:e} but allocation distance {d} at depth {}",
                            self.depth
                        ),
                        vec![limit, approx],
                    ));
                }
                Self::worst(items)
            }
        })
    }

    /// `(limit, deep term, description)` for the truncation sequences of `r`.
    /// The term is taken at least `depth` generations past the window and
    /// deep enough that it is within [`SEQUENCE_GAP`] of the limit.
    fn convergent_sequences(&self, r: &Stream) -> Vec<(Stream, Stream, String)> {
        let mut out = Vec::new();
        let small = SEQUENCE_GAP * r.taxicab_norm().max(1.0);
        if r.left_tail().is_some() {
            let mut m = (self.depth as i64 - r.window_lo()).max(1);
            while r.mass_below(-m) > small && m < 1 << 24 {
                m *= 2;
            }
            out.push((r.clone(), r.truncate_left(m as u64), format!("left truncation at -{m}")));
        }
        if r.right_tail().is_some() {
            let mut reach = (self.depth as i64).max(1);
            while r.mass_from(r.window_end() + reach) > small && reach < 1 << 24 {
                reach *= 2;
            }
            let hi = r.window_end() - 1 + reach;
            out.push((
                r.clone(),
                r.restrict(None, Some(hi)),
                format!("right truncation at {hi}"),
            ));
        }
        out
    }
}

/// Checks `axiom` for `rule` on every battery case and reports the first
/// violation in case order. Continuity additionally runs the halving
/// sequence `r^m_i = 1/2^i` on `[0, m]`.
pub fn check_axiom(rule: &dyn Rule, axiom: Axiom, battery: &Battery) -> AxiomVerdict {
    check_axiom_with(rule, axiom, battery, DEFAULT_TOLERANCE, DEFAULT_DEPTH)
}

pub fn check_axiom_with(rule: &dyn Rule, axiom: Axiom, battery: &Battery, tolerance: f64, depth: u64) -> AxiomVerdict {
    let checker = Checker { rule, tolerance, depth };
    let mut cases: Vec<Case> = battery.cases().to_vec();
    if axiom == Axiom::Continuity {
        cases.insert(
            0,
            Case {
                index: usize::MAX,
                label: "halving".into(),
                stream: fixtures::halving(),
                partner: Stream::zero(),
                generations: vec![],
                factors: vec![],
            },
        );
    }
    let findings: Vec<(usize, &Case, Result<Finding, RuleError>)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| (k, case, checker.check(axiom, case)))
        .collect();

    let mut violation = 0.0f64;
    let mut unmet = 0;
    for (_, case, finding) in &findings {
        match finding {
            Ok(Finding::Holds { discrepancy }) => violation = violation.max(*discrepancy),
            Ok(Finding::Skipped) => unmet += 1,
            Ok(Finding::Violated {
                discrepancy,
                detail,
                inputs,
            }) => {
                return AxiomVerdict {
                    rule: rule.name(),
                    axiom,
                    outcome: Outcome::Fail,
                    witness: Some(Witness {
                        case: case.index,
                        label: case.label.clone(),
                        detail: detail.clone(),
                        inputs: inputs.clone(),
                    }),
                    violation: *discrepancy,
                    battery: battery.stamp(),
                    precondition_unmet: unmet,
                }
            }
            Err(e) => {
                return AxiomVerdict {
                    rule: rule.name(),
                    axiom,
                    outcome: Outcome::Fail,
                    witness: Some(Witness {
                        case: case.index,
                        label: case.label.clone(),
                        detail: format!("rule could not be evaluated: {e}"),
                        inputs: vec![case.stream.clone()],
                    }),
                    violation: f64::INFINITY,
                    battery: battery.stamp(),
                    precondition_unmet: unmet,
                }
            }
        }
    }
    let outcome = if unmet == findings.len() && !findings.is_empty() {
        Outcome::PreconditionUnmet
    } else {
        Outcome::Pass
    };
    AxiomVerdict {
        rule: rule.name(),
        axiom,
        outcome,
        witness: None,
        violation,
        battery: battery.stamp(),
        precondition_unmet: unmet,
    }
}

pub fn check_all(rule: &dyn Rule, axioms: &[Axiom], battery: &Battery) -> Vec<AxiomVerdict> {
    axioms.iter().map(|&a| check_axiom(rule, a, battery)).collect()
}

/// `max ‖φ(r) - φ(r')‖₁ / ‖r - r'‖₁` over the battery pairs.
pub fn lipschitz_certificate(rule: &dyn Rule, battery: &Battery) -> Result<f64, RuleError> {
    let ratios: Vec<Result<f64, RuleError>> = battery
        .pairs()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(r, s)| {
            let gap = r.taxicab_dist(s);
            if gap == 0.0 {
                return Ok(0.0);
            }
            Ok(rule.apply(r)?.taxicab_dist(&rule.apply(s)?) / gap)
        })
        .collect();
    ratios.into_iter().try_fold(0.0f64, |acc, x| Ok(acc.max(x?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::BatteryConfig;
    use crate::fixtures::uniform;
    use crate::rule::GeometricRule;

    fn small() -> Battery {
        Battery::new(BatteryConfig {
            size: 30,
            ..Default::default()
        })
    }

    #[test]
    fn geometric_rule_passes_characterizing_axioms() {
        let b = small();
        let rule = GeometricRule::new(uniform(0.3));
        for axiom in Axiom::CHARACTERIZING {
            let v = check_axiom(&rule, axiom, &b);
            assert_eq!(v.outcome, Outcome::Pass, "{axiom}: {:?}", v.witness);
        }
    }

    #[test]
    fn extreme_rules_certificates() {
        let b = small();
        assert!((lipschitz_certificate(&GeometricRule::new(uniform(1.0)), &b).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            lipschitz_certificate(&GeometricRule::new(uniform(0.0)), &b).unwrap(),
            0.0
        );
    }

    #[test]
    fn idempotency_and_translation() {
        let b = small();
        let half = GeometricRule::new(uniform(0.5));
        assert_eq!(check_axiom(&half, Axiom::Idempotency, &b).outcome, Outcome::Fail);
        assert_eq!(
            check_axiom(&half, Axiom::TranslationInvariance, &b).outcome,
            Outcome::Pass
        );
        let step = GeometricRule::new(fixtures::step(0.0, 0.5));
        assert_eq!(
            check_axiom(&step, Axiom::TranslationInvariance, &b).outcome,
            Outcome::Fail
        );
        assert_eq!(check_axiom(&step, Axiom::Balance, &b).outcome, Outcome::Pass);
        let ex = GeometricRule::new(fixtures::example1());
        assert_eq!(check_axiom(&ex, Axiom::Balance, &b).outcome, Outcome::Fail);
    }

    #[test]
    fn axiom_ids_round_trip() {
        for a in Axiom::ALL {
            assert_eq!(Axiom::parse(a.id()), Some(a));
        }
    }
}
