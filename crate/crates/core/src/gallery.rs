//! Five non-geometric rules, each built to break exactly one of the
//! characterizing axioms, and the rule-by-axiom matrix they produce.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::axioms::{check_axiom_with, Axiom, AxiomVerdict, Outcome, DEFAULT_DEPTH, DEFAULT_TOLERANCE};
use crate::battery::{Battery, BatteryStamp};
use crate::engine::RuleError;
use crate::fixtures;
use crate::rule::{GeometricRule, Rule};
use crate::stream::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GalleryKind {
    /// `φ_i = 2 r_i`.
    Double,
    /// Generations 0 and 1 receive their incomes in increasing order.
    Sorting,
    /// `φ_0 = r_0² / (1 + r_0)`, generation 1 gets the rest of `r_0`.
    ScaleBreaking,
    /// Identity on finite support, the uniform 1/2 rule otherwise.
    SupportSwitch,
    /// `φ_i = (r_i + r_{i-1} + r_{i-2}) / 4`.
    MovingAverage,
}

impl GalleryKind {
    pub const ALL: [GalleryKind; 5] = [
        GalleryKind::Double,
        GalleryKind::Sorting,
        GalleryKind::ScaleBreaking,
        GalleryKind::SupportSwitch,
        GalleryKind::MovingAverage,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            GalleryKind::Double => "double",
            GalleryKind::Sorting => "sorting",
            GalleryKind::ScaleBreaking => "scale_breaking",
            GalleryKind::SupportSwitch => "support_switch",
            GalleryKind::MovingAverage => "moving_average",
        }
    }

    /// The one characterizing axiom this rule is meant to violate.
    pub fn broken_axiom(&self) -> Axiom {
        match self {
            GalleryKind::Double => Axiom::Feasibility,
            GalleryKind::Sorting => Axiom::IndependenceOfFutureIncome,
            GalleryKind::ScaleBreaking => Axiom::ScaleInvariance,
            GalleryKind::SupportSwitch => Axiom::Continuity,
            GalleryKind::MovingAverage => Axiom::Consistency,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GalleryRule {
    kind: GalleryKind,
    half: GeometricRule,
}

impl GalleryRule {
    pub fn new(kind: GalleryKind) -> Self {
        Self {
            kind,
            half: GeometricRule::new(fixtures::uniform(0.5)),
        }
    }

    pub fn kind(&self) -> GalleryKind {
        self.kind
    }

    pub fn expected(&self, axiom: Axiom) -> Outcome {
        if axiom == self.kind.broken_axiom() {
            Outcome::Fail
        } else {
            Outcome::Pass
        }
    }

    pub fn expected_matrix(&self) -> BTreeMap<Axiom, Outcome> {
        Axiom::CHARACTERIZING
            .into_iter()
            .map(|a| (a, self.expected(a)))
            .collect()
    }
}

impl Rule for GalleryRule {
    fn name(&self) -> String {
        self.kind.id().into()
    }

    fn apply(&self, r: &Stream) -> Result<Stream, RuleError> {
        Ok(match self.kind {
            GalleryKind::Double => r.scale(2.0)?,
            GalleryKind::Sorting => {
                let (a, b) = (r.value_at(0), r.value_at(1));
                if a <= b {
                    r.clone()
                } else {
                    r.with_value(0, b)?.with_value(1, a)?
                }
            }
            GalleryKind::ScaleBreaking => {
                let (a, b) = (r.value_at(0), r.value_at(1));
                let kept = a * a / (1.0 + a);
                r.with_value(0, kept)?.with_value(1, b + a - kept)?
            }
            GalleryKind::SupportSwitch => {
                if r.has_finite_support() {
                    r.clone()
                } else {
                    self.half.apply(r)?
                }
            }
            GalleryKind::MovingAverage => {
                let quarter = r.scale(0.25)?;
                quarter.add(&quarter.shift())?.add(&quarter.shift_by(2))?
            }
        })
    }
}

pub fn gallery() -> Vec<GalleryRule> {
    GalleryKind::ALL.into_iter().map(GalleryRule::new).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCell {
    pub rule: String,
    pub axiom: Axiom,
    pub expected: Outcome,
    pub observed: Outcome,
    pub matches: bool,
    pub verdict: AxiomVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceMatrix {
    pub battery: BatteryStamp,
    pub cells: Vec<MatrixCell>,
}

impl IndependenceMatrix {
    pub fn mismatches(&self) -> Vec<&MatrixCell> {
        self.cells.iter().filter(|c| !c.matches).collect()
    }

    pub fn cell(&self, rule: &str, axiom: Axiom) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.rule == rule && c.axiom == axiom)
    }

    /// Rows are rules, columns the characterizing axioms; a cell reads
    /// `<observed>:match` or `<observed>:mismatch`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["rule".to_string()];
        header.extend(Axiom::CHARACTERIZING.iter().map(|a| a.id().to_string()));
        w.write_record(&header)?;
        for kind in GalleryKind::ALL {
            let mut row = vec![kind.id().to_string()];
            for axiom in Axiom::CHARACTERIZING {
                row.push(match self.cell(kind.id(), axiom) {
                    Some(c) => format!("{}:{}", c.observed, if c.matches { "match" } else { "mismatch" }),
                    None => String::new(),
                });
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn independence_matrix(battery: &Battery) -> IndependenceMatrix {
    independence_matrix_with(battery, DEFAULT_TOLERANCE)
}

pub fn independence_matrix_with(battery: &Battery, tolerance: f64) -> IndependenceMatrix {
    let mut cells = Vec::new();
    for rule in gallery() {
        for axiom in Axiom::CHARACTERIZING {
            let verdict = check_axiom_with(&rule, axiom, battery, tolerance, DEFAULT_DEPTH);
            let expected = rule.expected(axiom);
            cells.push(MatrixCell {
                rule: rule.name(),
                axiom,
                expected,
                observed: verdict.outcome,
                matches: verdict.outcome == expected,
                verdict,
            });
        }
    }
    IndependenceMatrix {
        battery: battery.stamp(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_examples() {
        let double = GalleryRule::new(GalleryKind::Double);
        assert_eq!(double.apply(&Stream::basis(0)).unwrap().taxicab_norm(), 2.0);

        let sorting = GalleryRule::new(GalleryKind::Sorting);
        let out = sorting.apply(&Stream::from_values(0, vec![2.0, 1.0]).unwrap()).unwrap();
        assert_eq!((out.value_at(0), out.value_at(1)), (1.0, 2.0));

        let scale = GalleryRule::new(GalleryKind::ScaleBreaking);
        let out = scale.apply(&Stream::basis(0)).unwrap();
        assert_eq!((out.value_at(0), out.value_at(1)), (0.5, 0.5));

        let switch = GalleryRule::new(GalleryKind::SupportSwitch);
        assert_eq!(switch.apply(&fixtures::halving_prefix(10)).unwrap().value_at(0), 1.0);
        assert_eq!(switch.apply(&fixtures::halving()).unwrap().value_at(0), 0.5);

        let avg = GalleryRule::new(GalleryKind::MovingAverage);
        let out = avg.apply(&Stream::basis(0)).unwrap();
        assert_eq!(out.materialize(-1, 3), vec![0.0, 0.25, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn scale_breaking_rule_is_balanced() {
        let rule = GalleryRule::new(GalleryKind::ScaleBreaking);
        let r = Stream::from_values(-1, vec![1.0, 3.0, 0.5]).unwrap();
        assert!((rule.apply(&r).unwrap().taxicab_norm() - r.taxicab_norm()).abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_row_per_rule() {
        let b = Battery::new(crate::battery::BatteryConfig {
            size: 5,
            ..Default::default()
        });
        let m = independence_matrix(&b);
        let csv = m.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("rule,feasibility,"));
    }
}
