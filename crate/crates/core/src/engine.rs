//! Allocation of a stream under a geometric rule.
//!
//! The allocation is computed by one forward pass over the recurrence
//!
//! ```text
//! φ_i     = λ_i (r_i + t_i)
//! t_{i+1} = (1 - λ_i) (r_i + t_i)
//! ```
//!
//! where `t_i` is the income handed to generation `i` by all earlier
//! generations. The pass starts at an index below which both the income and
//! `λ` are stationary (a geometric income tail against a constant or periodic
//! `λ`), so the incoming transfer there has a closed form and no truncation is
//! needed on the left. [`allocate_direct`] evaluates the defining sum term by
//! term and serves as the oracle for the pass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lambda::{Formula, LambdaProfile, ProfileError, TailSpec};
use crate::stream::{GeometricTail, Stream, StreamError, SupportStart};

/// Truncation threshold of the term-by-term oracle.
pub const ORACLE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("evaluation window [{lo}, {hi}] is empty")]
    InvalidWindow { lo: i64, hi: i64 },
    #[error("evaluation window starts at {window_lo} but income starts at {support}")]
    WindowMissesSupport { window_lo: i64, support: String },
    #[error("incoming transfer at generation {index} diverges")]
    DivergentTransfer { index: i64 },
    #[error(
        "consistency transform at generation {j} leaves mass {mass} there; \
         the transformed stream is not nonnegative"
    )]
    ConsistencyPrecondition { j: i64, mass: f64 },
    #[error("rule is not feasible: recovered share {value} at generation {index} lies outside [0, 1]")]
    Infeasible { index: i64, value: f64 },
    #[error("allocation mass did not fall below the truncation threshold within {horizon} generations")]
    HorizonExceeded { horizon: usize },
}

/// Inclusive range of generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(i64, i64)", into = "(i64, i64)")]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, i: i64) -> bool {
        (self.lo..=self.hi).contains(&i)
    }
}

impl From<(i64, i64)> for IndexRange {
    fn from((lo, hi): (i64, i64)) -> Self {
        Self { lo, hi }
    }
}

impl From<IndexRange> for (i64, i64) {
    fn from(r: IndexRange) -> Self {
        (r.lo, r.hi)
    }
}

/// Allocation on an evaluation window plus closed-form summaries of what
/// happens on either side of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub window_lo: i64,
    pub allocations: Vec<f64>,
    /// Transfer handed past the last evaluated generation.
    pub residual_transfer: f64,
    /// Total allocated to generations above the window.
    pub tail_allocation_sum: f64,
    /// Income passed on forever and never retained by anyone.
    pub leaked_mass: f64,
    /// Total allocated to generations below the window.
    pub retained_left: f64,
}

impl AllocationResult {
    pub fn window(&self) -> IndexRange {
        IndexRange::new(self.window_lo, self.window_lo + self.allocations.len() as i64 - 1)
    }

    /// Allocation of generation `i`, if it lies in the window.
    pub fn get(&self, i: i64) -> Option<f64> {
        let offset = i.checked_sub(self.window_lo)?;
        usize::try_from(offset)
            .ok()
            .and_then(|o| self.allocations.get(o).copied())
    }

    pub fn window_sum(&self) -> f64 {
        self.allocations.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.retained_left + self.window_sum() + self.tail_allocation_sum
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PassStart {
    pub index: i64,
    pub transfer: f64,
}

/// Chooses a start index `<= at_most` with a closed-form incoming transfer.
pub(crate) fn pass_start(p: &LambdaProfile, r: &Stream, at_most: i64) -> Result<PassStart, RuleError> {
    let Some(tail) = r.left_tail() else {
        return Ok(PassStart {
            index: at_most.min(r.window_lo()),
            transfer: 0.0,
        });
    };
    let (bound, model) = p.left_model();
    let index = at_most.min(r.window_lo()).min(bound);
    let income = tail.shifted_out((r.window_lo() - index) as u64);
    // one period of terms, then every further period scales by q^P * rho
    let period = model.period() as i64;
    let mut prod = 1.0;
    let mut block = 0.0;
    for m in 1..=period {
        prod *= 1.0 - model.value(index - m);
        block += income.value(m as u64) * prod;
    }
    let factor = crate::stream::powu(income.ratio(), period as u64) * model.period_factor();
    let transfer = block / (1.0 - factor);
    if !transfer.is_finite() {
        return Err(RuleError::DivergentTransfer { index });
    }
    Ok(PassStart { index, transfer })
}

/// Runs the recurrence from `start` through generation `hi`, calling `visit`
/// with each allocation. Returns the transfer handed to `hi + 1`.
pub(crate) fn forward(
    p: &LambdaProfile,
    r: &Stream,
    start: PassStart,
    hi: i64,
    mut visit: impl FnMut(i64, f64),
) -> f64 {
    let mut transfer = start.transfer;
    for i in start.index..=hi {
        let lambda = p.lambda_at(i);
        let held = r.value_at(i) + transfer;
        visit(i, lambda * held);
        transfer = (1.0 - lambda) * held;
    }
    transfer
}

/// `t_i = ∑_{j<i} ∏_{k=j}^{i-1} (1 - λ_k) r_j`.
pub fn incoming_transfer(p: &LambdaProfile, r: &Stream, i: i64) -> Result<f64, RuleError> {
    let start = pass_start(p, r, i)?;
    Ok(forward(p, r, start, i - 1, |_, _| {}))
}

fn check_window(r: &Stream, window: IndexRange) -> Result<(), RuleError> {
    if window.is_empty() {
        return Err(RuleError::InvalidWindow {
            lo: window.lo,
            hi: window.hi,
        });
    }
    let miss = |support: String| {
        Err(RuleError::WindowMissesSupport {
            window_lo: window.lo,
            support,
        })
    };
    match r.support_start() {
        SupportStart::At(s) if window.lo > s => miss(s.to_string()),
        SupportStart::Unbounded if window.lo > r.window_lo() => {
            miss(format!("-inf (explicit window from {})", r.window_lo()))
        }
        _ => Ok(()),
    }
}

/// `(∑_{i≥h} r_i, t_h T(h) + ∑_{i≥h} r_i T(i))` where `T(i) = ∏_{k≥i} (1 - λ_k)`.
fn right_ledger(p: &LambdaProfile, r: &Stream, h: i64, transfer: f64) -> (f64, f64) {
    let far = h.max(r.window_end()).max(p.window_end());
    let far_limit = p.tail_product_limit(far);

    // explicit generations in [h, far), walking down from `far`
    let mut limit = far_limit;
    let mut leaked = 0.0;
    for i in (h..far).rev() {
        limit *= 1.0 - p.lambda_at(i);
        leaked += r.value_at(i) * limit;
    }
    leaked += transfer * limit;

    let income_from_far = r.mass_from(far);
    let tail_leak = match (p.right_tail(), r.right_tail()) {
        (_, None) => 0.0,
        (
            TailSpec::Formula {
                name: Formula::Example1,
            },
            Some(tail),
        ) => {
            let tail = tail.shifted_out((far - r.window_end()) as u64);
            let mut acc = 0.0;
            let mut m = 1u64;
            while tail.sum_from(m) > 1e-18 && m < 1 << 24 {
                acc += tail.value(m) * p.tail_product_limit(far + m as i64 - 1);
                m += 1;
            }
            acc
        }
        // the forward product is the same (0 or 1) at every generation past `far`
        _ => far_limit * income_from_far,
    };
    (r.mass_from(h), leaked + tail_leak)
}

/// Allocates `r` on `window` by one forward pass.
///
/// The window must start at or below the first generation with income (for
/// a stream with a left tail: at or below its explicit window).
pub fn allocate(p: &LambdaProfile, r: &Stream, window: IndexRange) -> Result<AllocationResult, RuleError> {
    check_window(r, window)?;
    let start = pass_start(p, r, window.lo)?;
    let entry = forward(p, r, start, window.lo - 1, |_, _| {});
    let mut allocations = Vec::with_capacity(window.len());
    let residual = forward(
        p,
        r,
        PassStart {
            index: window.lo,
            transfer: entry,
        },
        window.hi,
        |_, phi| allocations.push(phi),
    );
    let (income_beyond, leaked) = right_ledger(p, r, window.hi + 1, residual);
    Ok(AllocationResult {
        window_lo: window.lo,
        allocations,
        residual_transfer: residual,
        tail_allocation_sum: (residual + income_beyond - leaked).max(0.0),
        leaked_mass: leaked,
        retained_left: (r.mass_below(window.lo) - entry).max(0.0),
    })
}

/// `φ_i` by literal summation of `λ_i ∑_{j≤i} ∏_{k=j}^{i-1} (1 - λ_k) r_j`.
///
/// Terms are collected down to the explicit window and then through the left
/// income tail until the remaining mass is below [`ORACLE_THRESHOLD`], and
/// summed in decreasing order.
pub fn allocate_direct(p: &LambdaProfile, r: &Stream, i: i64) -> f64 {
    let lambda = p.lambda_at(i);
    if lambda == 0.0 {
        return 0.0;
    }
    let mut terms = Vec::new();
    let mut prod = 1.0;
    let mut j = i;
    loop {
        terms.push(prod * r.value_at(j));
        if j <= r.window_lo() && (r.left_tail().is_none() || prod * r.mass_below(j) < ORACLE_THRESHOLD) {
            break;
        }
        prod *= 1.0 - p.lambda_at(j - 1);
        if prod == 0.0 {
            break;
        }
        j -= 1;
    }
    terms.sort_by(|a, b| b.total_cmp(a));
    lambda * terms.iter().sum::<f64>()
}

/// `∑_i φ_i = ∑_i (1 - ∏_{k≥i} (1 - λ_k)) r_i`, evaluated in closed form.
pub fn total_allocated(p: &LambdaProfile, r: &Stream) -> Result<f64, RuleError> {
    let start = pass_start(p, r, r.window_lo())?;
    let left_leak = p.tail_product_limit(start.index) * start.transfer;
    let (_, right_leak) = right_ledger(p, r, start.index, 0.0);
    Ok((r.taxicab_norm() - left_leak - right_leak).max(0.0))
}

/// `∑_{i<j} φ_i = ∑_{i<j} (1 - ∏_{k=i}^{j-1} (1 - λ_k)) r_i`, evaluated by a
/// backward sweep from `j` plus the closed-form left remainder.
pub fn total_below(p: &LambdaProfile, r: &Stream, j: i64) -> Result<f64, RuleError> {
    let start = pass_start(p, r, j)?;
    let mut prod = 1.0;
    let mut passed = 0.0;
    for i in (start.index..j).rev() {
        prod *= 1.0 - p.lambda_at(i);
        if prod == 0.0 {
            break;
        }
        passed += r.value_at(i) * prod;
    }
    passed += prod * start.transfer;
    Ok((r.mass_below(j) - passed).max(0.0))
}

/// Left output tail for a stream whose left income tail meets a constant `λ = c`:
/// `φ_{s-m} = c a q^{m-1} / (1 - q (1 - c))`.
pub(crate) fn stationary_left_allocation(c: f64, income: GeometricTail) -> Option<GeometricTail> {
    let q = income.ratio();
    let coefficient = c * income.coefficient() / (1.0 - q * (1.0 - c));
    GeometricTail::new(coefficient, q).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn blocked() -> LambdaProfile {
        // λ_0 = 1/2, λ_1 = 1/3, unit shares elsewhere
        LambdaProfile::new(
            0,
            vec![0.5, 1.0 / 3.0],
            TailSpec::constant(1.0),
            TailSpec::constant(1.0),
        )
        .unwrap()
    }

    fn six_three() -> Stream {
        Stream::from_values(0, vec![6.0, 3.0]).unwrap()
    }

    #[test]
    fn incoming_transfer_examples() {
        let half = LambdaProfile::uniform(0.5).unwrap();
        let e0 = Stream::basis(0);
        assert_eq!(incoming_transfer(&half, &e0, 0).unwrap(), 0.0);
        assert_eq!(incoming_transfer(&half, &e0, 1).unwrap(), 0.5);
        assert_eq!(incoming_transfer(&half, &e0, 2).unwrap(), 0.25);
        assert_abs_diff_eq!(
            incoming_transfer(&blocked(), &six_three(), 1).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            incoming_transfer(&blocked(), &six_three(), 2).unwrap(),
            4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn blocked_profile_allocation() {
        let res = allocate(&blocked(), &six_three(), IndexRange::new(0, 4)).unwrap();
        assert_abs_diff_eq!(res.allocations[0], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(res.allocations[1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(res.allocations[2], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(res.total(), 9.0, epsilon = 1e-15);
        assert_eq!(res.leaked_mass, 0.0);
    }

    #[test]
    fn uniform_half_on_unit_income() {
        let half = LambdaProfile::uniform(0.5).unwrap();
        let res = allocate(&half, &Stream::basis(0), IndexRange::new(0, 10)).unwrap();
        for (i, phi) in res.allocations.iter().enumerate() {
            assert_eq!(*phi, 0.5f64.powi(i as i32 + 1));
            assert_eq!(*phi, allocate_direct(&half, &Stream::basis(0), i as i64));
        }
        assert_abs_diff_eq!(res.tail_allocation_sum, 0.5f64.powi(11), epsilon = 1e-16);
    }

    #[test]
    fn extreme_uniform_rules() {
        let r = Stream::from_values(-1, vec![2.0, 0.0, 5.0]).unwrap();
        let full = allocate(&LambdaProfile::full_transfer(), &r, IndexRange::new(-1, 4)).unwrap();
        assert!(full.allocations.iter().all(|&v| v == 0.0));
        assert_eq!(full.leaked_mass, 7.0);
        assert_eq!(full.tail_allocation_sum, 0.0);
        let none = allocate(&LambdaProfile::no_transfer(), &r, IndexRange::new(-1, 4)).unwrap();
        assert_eq!(none.allocations, r.materialize(-1, 4));
    }

    #[test]
    fn window_must_cover_support() {
        let half = LambdaProfile::uniform(0.5).unwrap();
        assert!(matches!(
            allocate(&half, &six_three(), IndexRange::new(1, 4)),
            Err(RuleError::WindowMissesSupport { .. })
        ));
        assert!(matches!(
            allocate(&half, &six_three(), IndexRange::new(3, 1)),
            Err(RuleError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn left_tail_seed_matches_oracle() {
        let r = Stream::from_values(0, vec![1.0, 2.0])
            .unwrap()
            .with_left_tail(GeometricTail::new(0.8, 0.6).unwrap());
        for p in [
            LambdaProfile::uniform(0.3).unwrap(),
            LambdaProfile::full_transfer(),
            LambdaProfile::new(
                -2,
                vec![0.1, 0.9],
                TailSpec::periodic(vec![0.2, 0.0, 0.5]),
                TailSpec::constant(0.4),
            )
            .unwrap(),
        ] {
            let res = allocate(&p, &r, IndexRange::new(-4, 6)).unwrap();
            for i in -4..=6 {
                assert_abs_diff_eq!(res.get(i).unwrap(), allocate_direct(&p, &r, i), epsilon = 1e-13);
            }
            let below = total_below(&p, &r, -4).unwrap();
            assert_abs_diff_eq!(res.retained_left, below, epsilon = 1e-12);
        }
    }

    #[test]
    fn example1_leaks_exp_minus_one() {
        let p = LambdaProfile::new(
            0,
            vec![],
            TailSpec::formula(Formula::Example1),
            TailSpec::formula(Formula::Example1),
        )
        .unwrap();
        let e1 = Stream::basis(1);
        let total = total_allocated(&p, &e1).unwrap();
        assert_abs_diff_eq!(1.0 - total, (-1.0f64).exp(), epsilon = 1e-12);
        let res = allocate(&p, &e1, IndexRange::new(1, 80)).unwrap();
        assert_abs_diff_eq!(res.leaked_mass, (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(res.total() + res.leaked_mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_transfer_total_below() {
        let r = Stream::from_values(-3, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for j in -5..3 {
            let expected = r.mass_below(j);
            assert_eq!(total_below(&LambdaProfile::no_transfer(), &r, j).unwrap(), expected);
        }
    }

    #[test]
    fn balanced_profile_allocates_everything() {
        let r = Stream::from_values(-2, vec![1.0, 0.0, 2.5])
            .unwrap()
            .with_right_tail(GeometricTail::new(1.0, 0.5).unwrap());
        let total = total_allocated(&LambdaProfile::uniform(0.5).unwrap(), &r).unwrap();
        assert_abs_diff_eq!(total, r.taxicab_norm(), epsilon = 1e-12);
    }
}
