//! Nonnegative income streams indexed by generation.
//!
//! A [`Stream`] holds explicit incomes on a finite window and an optional
//! geometric tail on each side, which keeps every stream summable and makes
//! norms, distances and tail masses closed-form. Values are immutable once
//! built; every operation returns a new stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Indices materialized past a window edge when two tails cannot be merged.
pub const DEFAULT_HORIZON: usize = 512;

/// Largest mass that may be dropped when a merge or rule output is cut off.
pub const TRUNCATION_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("income at generation {index} must be finite and nonnegative, got {value}")]
    InvalidValue { index: i64, value: f64 },
    #[error("tail coefficient must be finite and nonnegative, got {0}")]
    InvalidCoefficient(f64),
    #[error("tail ratio must lie in [0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("scale factor must be finite and nonnegative, got {0}")]
    InvalidScale(f64),
    #[error(
        "tails with ratios {first} and {second} leave mass {mass:e} past the horizon; \
         the sum is not representable"
    )]
    UnrepresentableSum { first: f64, second: f64, mass: f64 },
}

/// `q^n` for a nonnegative integer exponent of any size.
pub(crate) fn powu(q: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        q.powi(n as i32)
    } else {
        q.powf(n as f64)
    }
}

/// Geometric continuation of a stream past one edge of its window.
///
/// The value at offset `k >= 1` from the edge is `coefficient * ratio^(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTail")]
pub struct GeometricTail {
    coefficient: f64,
    ratio: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTail {
    coefficient: f64,
    ratio: f64,
}

impl TryFrom<RawTail> for GeometricTail {
    type Error = StreamError;

    fn try_from(raw: RawTail) -> Result<Self, Self::Error> {
        GeometricTail::new(raw.coefficient, raw.ratio)
    }
}

impl GeometricTail {
    pub fn new(coefficient: f64, ratio: f64) -> Result<Self, StreamError> {
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return Err(StreamError::InvalidCoefficient(coefficient));
        }
        if !(ratio.is_finite() && (0.0..1.0).contains(&ratio)) {
            return Err(StreamError::InvalidRatio(ratio));
        }
        Ok(Self { coefficient, ratio })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Value at offset `k >= 1` from the window edge.
    pub fn value(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        self.coefficient * powu(self.ratio, k - 1)
    }

    pub fn sum(&self) -> f64 {
        self.coefficient / (1.0 - self.ratio)
    }

    /// Sum over offsets `k, k+1, ...`.
    pub fn sum_from(&self, k: u64) -> f64 {
        self.value(k) / (1.0 - self.ratio)
    }

    /// The same tail seen from an edge moved `d` indices further out.
    pub fn shifted_out(&self, d: u64) -> Self {
        Self {
            coefficient: self.coefficient * powu(self.ratio, d),
            ratio: self.ratio,
        }
    }

    fn scaled(&self, alpha: f64) -> Self {
        Self {
            coefficient: self.coefficient * alpha,
            ratio: self.ratio,
        }
    }

    /// Only finitely many nonzero values.
    pub fn has_finite_support(&self) -> bool {
        self.coefficient == 0.0 || self.ratio == 0.0
    }
}

/// Where the nonzero part of a stream begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportStart {
    /// The null stream.
    Empty,
    /// A left tail carries mass arbitrarily far into the past.
    Unbounded,
    At(i64),
}

/// A nonnegative income stream with finite taxicab norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStream")]
pub struct Stream {
    window_lo: i64,
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left_tail: Option<GeometricTail>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right_tail: Option<GeometricTail>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStream {
    #[serde(default)]
    window_lo: i64,
    #[serde(default)]
    values: Vec<f64>,
    #[serde(default)]
    left_tail: Option<GeometricTail>,
    #[serde(default)]
    right_tail: Option<GeometricTail>,
}

impl TryFrom<RawStream> for Stream {
    type Error = StreamError;

    fn try_from(raw: RawStream) -> Result<Self, Self::Error> {
        Stream::new(raw.window_lo, raw.values, raw.left_tail, raw.right_tail)
    }
}

impl Stream {
    /// Builds a stream, dropping tails whose coefficient is zero.
    pub fn new(
        window_lo: i64,
        values: Vec<f64>,
        left_tail: Option<GeometricTail>,
        right_tail: Option<GeometricTail>,
    ) -> Result<Self, StreamError> {
        for (offset, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(StreamError::InvalidValue {
                    index: window_lo + offset as i64,
                    value,
                });
            }
        }
        Ok(Self::assemble(window_lo, values, left_tail, right_tail))
    }

    fn assemble(
        window_lo: i64,
        values: Vec<f64>,
        left_tail: Option<GeometricTail>,
        right_tail: Option<GeometricTail>,
    ) -> Self {
        Self {
            window_lo,
            values,
            left_tail: left_tail.filter(|t| t.coefficient > 0.0),
            right_tail: right_tail.filter(|t| t.coefficient > 0.0),
        }
    }

    pub fn from_values(window_lo: i64, values: Vec<f64>) -> Result<Self, StreamError> {
        Self::new(window_lo, values, None, None)
    }

    /// The null stream.
    pub fn zero() -> Self {
        Self::assemble(0, Vec::new(), None, None)
    }

    /// The unit stream concentrated on generation `i`.
    pub fn basis(i: i64) -> Self {
        Self::assemble(i, vec![1.0], None, None)
    }

    pub fn with_left_tail(mut self, tail: GeometricTail) -> Self {
        self.left_tail = Some(tail).filter(|t| t.coefficient > 0.0);
        self
    }

    pub fn with_right_tail(mut self, tail: GeometricTail) -> Self {
        self.right_tail = Some(tail).filter(|t| t.coefficient > 0.0);
        self
    }

    pub fn window_lo(&self) -> i64 {
        self.window_lo
    }

    /// One past the last explicit index.
    pub fn window_end(&self) -> i64 {
        self.window_lo + self.values.len() as i64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_tail(&self) -> Option<GeometricTail> {
        self.left_tail
    }

    pub fn right_tail(&self) -> Option<GeometricTail> {
        self.right_tail
    }

    pub fn value_at(&self, i: i64) -> f64 {
        if i < self.window_lo {
            self.left_tail.map_or(0.0, |t| t.value((self.window_lo - i) as u64))
        } else if i >= self.window_end() {
            self.right_tail
                .map_or(0.0, |t| t.value((i - self.window_end() + 1) as u64))
        } else {
            self.values[(i - self.window_lo) as usize]
        }
    }

    /// Values on the inclusive range `[lo, hi]`.
    pub fn materialize(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..=hi).map(|i| self.value_at(i)).collect()
    }

    pub fn support_start(&self) -> SupportStart {
        if self.left_tail.is_some() {
            return SupportStart::Unbounded;
        }
        if let Some(pos) = self.values.iter().position(|&v| v > 0.0) {
            return SupportStart::At(self.window_lo + pos as i64);
        }
        if self.right_tail.is_some() {
            SupportStart::At(self.window_end())
        } else {
            SupportStart::Empty
        }
    }

    /// Whether the set of generations with nonzero income is finite.
    pub fn has_finite_support(&self) -> bool {
        self.left_tail.is_none_or(|t| t.has_finite_support()) && self.right_tail.is_none_or(|t| t.has_finite_support())
    }

    pub fn is_zero(&self) -> bool {
        self.support_start() == SupportStart::Empty
    }

    pub fn taxicab_norm(&self) -> f64 {
        let window: f64 = self.values.iter().sum();
        window + self.left_tail.map_or(0.0, |t| t.sum()) + self.right_tail.map_or(0.0, |t| t.sum())
    }

    pub fn sup_norm(&self) -> f64 {
        // tails are nonincreasing away from the window, so their heads dominate
        self.values
            .iter()
            .copied()
            .chain(self.left_tail.map(|t| t.coefficient))
            .chain(self.right_tail.map(|t| t.coefficient))
            .fold(0.0, f64::max)
    }

    /// Total income of generations strictly below `j`.
    pub fn mass_below(&self, j: i64) -> f64 {
        if j <= self.window_lo {
            return self
                .left_tail
                .map_or(0.0, |t| t.sum_from((self.window_lo - j + 1) as u64));
        }
        let cut = (j.min(self.window_end()) - self.window_lo) as usize;
        let window: f64 = self.values[..cut].iter().sum();
        let right = if j > self.window_end() {
            self.right_tail
                .map_or(0.0, |t| t.sum() - t.sum_from((j - self.window_end() + 1) as u64))
        } else {
            0.0
        };
        self.left_tail.map_or(0.0, |t| t.sum()) + window + right
    }

    /// Total income of generations at or above `j`.
    pub fn mass_from(&self, j: i64) -> f64 {
        if j >= self.window_end() {
            return self
                .right_tail
                .map_or(0.0, |t| t.sum_from((j - self.window_end() + 1) as u64));
        }
        let cut = (j.max(self.window_lo) - self.window_lo) as usize;
        let window: f64 = self.values[cut..].iter().sum();
        let left = if j < self.window_lo {
            self.left_tail
                .map_or(0.0, |t| t.sum() - t.sum_from((self.window_lo - j + 1) as u64))
        } else {
            0.0
        };
        left + window + self.right_tail.map_or(0.0, |t| t.sum())
    }

    /// The same stream with an explicit window covering at least `[lo, end)`.
    pub fn expanded(&self, lo: i64, end: i64) -> Stream {
        let lo = lo.min(self.window_lo);
        let end = end.max(self.window_end()).max(lo);
        let values = (lo..end).map(|i| self.value_at(i)).collect();
        let left_tail = self.left_tail.map(|t| t.shifted_out((self.window_lo - lo) as u64));
        let right_tail = self.right_tail.map(|t| t.shifted_out((end - self.window_end()) as u64));
        Self::assemble(lo, values, left_tail, right_tail)
    }

    /// Keeps generations in `[lo, hi]` (either bound optional) and zeroes the rest.
    pub fn restrict(&self, lo: Option<i64>, hi: Option<i64>) -> Stream {
        let mut cover_lo = self.window_lo;
        let mut cover_end = self.window_end();
        if let Some(l) = lo {
            cover_lo = cover_lo.min(l);
            cover_end = cover_end.max(l);
        }
        if let Some(h) = hi {
            cover_lo = cover_lo.min(h + 1);
            cover_end = cover_end.max(h + 1);
        }
        let e = self.expanded(cover_lo, cover_end);
        let keep_lo = lo.map_or(cover_lo, |l| l.max(cover_lo));
        let keep_end = hi.map_or(cover_end, |h| (h + 1).min(cover_end)).max(keep_lo);
        let values = e.values[(keep_lo - cover_lo) as usize..(keep_end - cover_lo) as usize].to_vec();
        Self::assemble(
            keep_lo,
            values,
            if lo.is_some() { None } else { e.left_tail },
            if hi.is_some() { None } else { e.right_tail },
        )
    }

    /// Zeroes every generation below `-m`.
    pub fn truncate_left(&self, m: u64) -> Stream {
        self.restrict(Some(-(m as i64)), None)
    }

    /// Replaces the income of generation `i`.
    pub fn with_value(&self, i: i64, value: f64) -> Result<Stream, StreamError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(StreamError::InvalidValue { index: i, value });
        }
        let mut e = self.expanded(i, i + 1);
        e.values[(i - e.window_lo) as usize] = value;
        Ok(e)
    }

    pub fn scale(&self, alpha: f64) -> Result<Stream, StreamError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(StreamError::InvalidScale(alpha));
        }
        Ok(Self::assemble(
            self.window_lo,
            self.values.iter().map(|v| v * alpha).collect(),
            self.left_tail.map(|t| t.scaled(alpha)),
            self.right_tail.map(|t| t.scaled(alpha)),
        ))
    }

    /// Moves every income one generation into the future.
    pub fn shift(&self) -> Stream {
        self.shift_by(1)
    }

    pub fn shift_by(&self, n: i64) -> Stream {
        let mut s = self.clone();
        s.window_lo += n;
        s
    }

    /// Pointwise sum. Tails with different ratios are materialized for
    /// [`DEFAULT_HORIZON`] indices and dropped only if the remainder is
    /// below [`TRUNCATION_MASS`].
    pub fn add(&self, other: &Stream) -> Result<Stream, StreamError> {
        let mut lo = self.window_lo.min(other.window_lo);
        let mut end = self.window_end().max(other.window_end());
        let left_clash = matches!((self.left_tail, other.left_tail),
            (Some(a), Some(b)) if a.ratio != b.ratio);
        let right_clash = matches!((self.right_tail, other.right_tail),
            (Some(a), Some(b)) if a.ratio != b.ratio);
        if left_clash {
            lo -= DEFAULT_HORIZON as i64;
        }
        if right_clash {
            end += DEFAULT_HORIZON as i64;
        }
        let a = self.expanded(lo, end);
        let b = other.expanded(lo, end);
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
        let left_tail = merge_tails(a.left_tail, b.left_tail)?;
        let right_tail = merge_tails(a.right_tail, b.right_tail)?;
        Ok(Self::assemble(lo, values, left_tail, right_tail))
    }

    pub fn taxicab_dist(&self, other: &Stream) -> f64 {
        taxicab_dist(self, other)
    }

    pub fn sup_dist(&self, other: &Stream) -> f64 {
        sup_dist(self, other)
    }
}

fn merge_tails(a: Option<GeometricTail>, b: Option<GeometricTail>) -> Result<Option<GeometricTail>, StreamError> {
    match (a, b) {
        (None, t) | (t, None) => Ok(t),
        (Some(a), Some(b)) if a.ratio == b.ratio => Ok(Some(GeometricTail {
            coefficient: a.coefficient + b.coefficient,
            ratio: a.ratio,
        })),
        (Some(a), Some(b)) => {
            let mass = a.sum() + b.sum();
            if mass < TRUNCATION_MASS {
                Ok(None)
            } else {
                Err(StreamError::UnrepresentableSum {
                    first: a.ratio,
                    second: b.ratio,
                    mass,
                })
            }
        }
    }
}

fn common_cover(r: &Stream, s: &Stream) -> (Stream, Stream) {
    let lo = r.window_lo.min(s.window_lo);
    let end = r.window_end().max(s.window_end());
    (r.expanded(lo, end), s.expanded(lo, end))
}

/// Exact `sum_k |a_k - b_k|` over two tails aligned at the same edge.
fn tail_abs_diff_sum(a: Option<GeometricTail>, b: Option<GeometricTail>) -> f64 {
    let zero = GeometricTail {
        coefficient: 0.0,
        ratio: 0.0,
    };
    let (a, b) = (a.unwrap_or(zero), b.unwrap_or(zero));
    if a.ratio == b.ratio {
        return (a.coefficient - b.coefficient).abs() / (1.0 - a.ratio);
    }
    // Once the slower-decaying tail dominates a term it dominates every later
    // term, so the rest of the sum is a difference of two closed forms.
    let (slow, fast) = if a.ratio > b.ratio { (a, b) } else { (b, a) };
    let mut acc = 0.0;
    let mut k = 1u64;
    loop {
        let (s, f) = (slow.value(k), fast.value(k));
        if s >= f {
            return acc + slow.sum_from(k) - fast.sum_from(k);
        }
        acc += f - s;
        k += 1;
    }
}

fn tail_sup_diff(a: Option<GeometricTail>, b: Option<GeometricTail>) -> f64 {
    let value = |t: Option<GeometricTail>, k| t.map_or(0.0, |t| t.value(k));
    let mut best: f64 = 0.0;
    let mut k = 1u64;
    loop {
        let (x, y) = (value(a, k), value(b, k));
        if x.max(y) <= best || (x == 0.0 && y == 0.0) {
            return best;
        }
        best = best.max((x - y).abs());
        k += 1;
    }
}

/// `sum_i |r_i - s_i|`, exact up to floating point.
pub fn taxicab_dist(r: &Stream, s: &Stream) -> f64 {
    let (r, s) = common_cover(r, s);
    let window: f64 = r.values.iter().zip(&s.values).map(|(x, y)| (x - y).abs()).sum();
    window + tail_abs_diff_sum(r.left_tail, s.left_tail) + tail_abs_diff_sum(r.right_tail, s.right_tail)
}

/// `sup_i |r_i - s_i|`.
pub fn sup_dist(r: &Stream, s: &Stream) -> f64 {
    let (r, s) = common_cover(r, s);
    let window = r
        .values
        .iter()
        .zip(&s.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    window
        .max(tail_sup_diff(r.left_tail, s.left_tail))
        .max(tail_sup_diff(r.right_tail, s.right_tail))
}
