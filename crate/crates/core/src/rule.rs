//! Allocation rules as maps from streams to streams.

use std::fmt;

use crate::engine::{incoming_transfer, pass_start, stationary_left_allocation, IndexRange, PassStart, RuleError};
use crate::lambda::{LambdaProfile, TailSpec};
use crate::stream::{GeometricTail, Stream, SupportStart, TRUNCATION_MASS};

/// Generations materialized past the last window edge before giving up on
/// the remaining allocation mass.
pub const MAX_OUTPUT_HORIZON: i64 = 1 << 22;

/// Mass at generation `j` of the consistency transform may dip this far below
/// zero from rounding before it counts as negative.
pub const CONSISTENCY_SLACK: f64 = 1e-9;

/// An allocation rule `φ: L¹₊ → L¹₊`.
pub trait Rule: Send + Sync {
    fn name(&self) -> String;

    fn apply(&self, r: &Stream) -> Result<Stream, RuleError>;

    /// `∑_{i<j} (r_i - φ_i(r))`, the income generations below `j` did not keep.
    fn past_residual(&self, r: &Stream, j: i64) -> Result<f64, RuleError> {
        let phi = self.apply(r)?;
        Ok(r.mass_below(j) - phi.mass_below(j))
    }

    /// The profile behind a geometric rule.
    fn profile(&self) -> Option<&LambdaProfile> {
        None
    }
}

impl fmt::Debug for dyn Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rule({})", self.name())
    }
}

/// The geometric rule `φ^λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricRule {
    profile: LambdaProfile,
    name: String,
}

impl GeometricRule {
    pub fn new(profile: LambdaProfile) -> Self {
        Self {
            profile,
            name: "geometric".into(),
        }
    }

    pub fn named(profile: LambdaProfile, name: impl Into<String>) -> Self {
        Self {
            profile,
            name: name.into(),
        }
    }

    /// Where the output starts and what lies below it.
    fn left_part(&self, r: &Stream) -> Result<Option<(PassStart, Option<GeometricTail>)>, RuleError> {
        let p = &self.profile;
        match r.support_start() {
            SupportStart::Empty => Ok(None),
            SupportStart::At(s) => Ok(Some((
                PassStart {
                    index: s,
                    transfer: 0.0,
                },
                None,
            ))),
            SupportStart::Unbounded => {
                let start = pass_start(p, r, r.window_lo())?;
                let income = r
                    .left_tail()
                    .expect("unbounded support has a left tail")
                    .shifted_out((r.window_lo() - start.index) as u64);
                if let Some(c) = self.constant_left(start.index) {
                    return Ok(Some((start, stationary_left_allocation(c, income))));
                }
                // periodic shares: push the start down until the income below
                // it is negligible, and allocate nothing there
                let mut depth = 0u64;
                while income.sum_from(depth + 1) >= TRUNCATION_MASS {
                    depth += 1;
                }
                let start = pass_start(p, r, start.index - depth as i64)?;
                Ok(Some((start, None)))
            }
        }
    }

    /// `Some(c)` if `λ ≡ c` on every generation below `s`.
    fn constant_left(&self, s: i64) -> Option<f64> {
        let (bound, model) = self.profile.left_model();
        if s > bound {
            return None;
        }
        let c = model.value(s - 1);
        (0..model.period() as i64)
            .all(|o| model.value(s - 1 - o) == c)
            .then_some(c)
    }

    /// Exact description of the output from generation `i` on, if the shares
    /// and the income are both stationary there in a way that stays geometric.
    fn exact_right(&self, r: &Stream, i: i64, transfer: f64) -> Option<Option<GeometricTail>> {
        let p = &self.profile;
        if p.tail_product_limit(i) == 1.0 {
            return Some(None);
        }
        let TailSpec::Constant { value: c } = *p.right_tail() else {
            return None;
        };
        let income = r.right_tail().map(|t| t.shifted_out((i - r.window_end()) as u64));
        match income {
            None => Some(GeometricTail::new(c * transfer, 1.0 - c).ok()),
            Some(tail) if c == 1.0 && transfer == 0.0 => Some(Some(tail)),
            Some(_) => None,
        }
    }
}

impl Rule for GeometricRule {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn apply(&self, r: &Stream) -> Result<Stream, RuleError> {
        let p = &self.profile;
        let Some((start, left_tail)) = self.left_part(r)? else {
            return Ok(Stream::zero());
        };
        let far = r.window_end().max(p.window_end()).max(start.index);
        let mut values = Vec::new();
        let mut transfer = start.transfer;
        let mut i = start.index;
        let right_tail = loop {
            if i >= far {
                if let Some(tail) = self.exact_right(r, i, transfer) {
                    break tail;
                }
                let remaining = transfer * (1.0 - p.tail_product_limit(i)) + r.mass_from(i);
                if remaining < TRUNCATION_MASS {
                    break None;
                }
                if i - far > MAX_OUTPUT_HORIZON {
                    return Err(RuleError::HorizonExceeded {
                        horizon: MAX_OUTPUT_HORIZON as usize,
                    });
                }
            }
            let lambda = p.lambda_at(i);
            let held = r.value_at(i) + transfer;
            values.push(lambda * held);
            transfer = (1.0 - lambda) * held;
            i += 1;
        };
        Ok(Stream::new(start.index, values, left_tail, right_tail)?)
    }

    fn past_residual(&self, r: &Stream, j: i64) -> Result<f64, RuleError> {
        incoming_transfer(&self.profile, r, j)
    }

    fn profile(&self) -> Option<&LambdaProfile> {
        Some(&self.profile)
    }
}

/// `r^j`: generations below `j` are emptied and `j` absorbs everything they
/// did not keep under `rule`.
pub fn consistency_transform(rule: &dyn Rule, r: &Stream, j: i64) -> Result<Stream, RuleError> {
    let mass = r.value_at(j) + rule.past_residual(r, j)?;
    if !mass.is_finite() || mass < -CONSISTENCY_SLACK {
        return Err(RuleError::ConsistencyPrecondition { j, mass });
    }
    Ok(r.restrict(Some(j), None).with_value(j, mass.max(0.0))?)
}

/// Reads `λ_i = φ_i(e^i)` off a rule on `window`; edge values are extended
/// as constant tails.
pub fn recover_lambda(rule: &dyn Rule, window: IndexRange) -> Result<LambdaProfile, RuleError> {
    if window.is_empty() {
        return Err(RuleError::InvalidWindow {
            lo: window.lo,
            hi: window.hi,
        });
    }
    let mut values = Vec::with_capacity(window.len());
    for i in window.lo..=window.hi {
        let value = rule.apply(&Stream::basis(i))?.value_at(i);
        if !(0.0..=1.0).contains(&value) {
            return Err(RuleError::Infeasible { index: i, value });
        }
        values.push(value);
    }
    let (first, last) = (values[0], values[values.len() - 1]);
    Ok(LambdaProfile::new(
        window.lo,
        values,
        TailSpec::constant(first),
        TailSpec::constant(last),
    )?)
}
