//! Seeded random streams and profiles, and the test batteries built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fixtures;
use crate::lambda::{Formula, LambdaProfile, TailSpec};
use crate::stream::{GeometricTail, Stream};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// Shape of randomly drawn streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamShape {
    pub max_window: usize,
    pub max_value: f64,
    pub max_ratio: f64,
    pub tail_probability: f64,
    pub zero_probability: f64,
    /// Window starts are drawn from `[-offset_range, offset_range]`.
    pub offset_range: i64,
}

impl Default for StreamShape {
    fn default() -> Self {
        Self {
            max_window: 64,
            max_value: 10.0,
            max_ratio: 0.9,
            tail_probability: 0.35,
            zero_probability: 0.15,
            offset_range: 12,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tail(rng: &mut impl Rng, shape: &StreamShape) -> GeometricTail {
    let coefficient = rng.gen_range(0.0..=shape.max_value);
    let ratio = rng.gen_range(0.0..=shape.max_ratio);
    GeometricTail::new(coefficient, ratio).expect("drawn within range")
}

pub fn random_stream(rng: &mut impl Rng, shape: &StreamShape) -> Stream {
    let lo = rng.gen_range(-shape.offset_range..=shape.offset_range);
    let len = rng.gen_range(1..=shape.max_window.max(1));
    let values = (0..len)
        .map(|_| {
            if rng.gen_bool(shape.zero_probability) {
                0.0
            } else {
                rng.gen_range(0.0..=shape.max_value)
            }
        })
        .collect();
    let left = rng.gen_bool(shape.tail_probability).then(|| random_tail(rng, shape));
    let right = rng.gen_bool(shape.tail_probability).then(|| random_tail(rng, shape));
    Stream::new(lo, values, left, right).expect("drawn values are nonnegative")
}

fn random_share(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..1.0),
    }
}

fn random_tail_spec(rng: &mut impl Rng) -> TailSpec {
    match rng.gen_range(0..20) {
        0 => TailSpec::formula(Formula::Example1),
        1 => TailSpec::formula(Formula::VennBlocks),
        2..=6 => {
            let len = rng.gen_range(1..=4);
            TailSpec::periodic((0..len).map(|_| random_share(rng)).collect())
        }
        _ => TailSpec::constant(random_share(rng)),
    }
}

pub fn random_profile(rng: &mut impl Rng, max_window: usize) -> LambdaProfile {
    let lo = rng.gen_range(-12..=12);
    let len = rng.gen_range(0..=max_window);
    let values = (0..len).map(|_| random_share(rng)).collect();
    LambdaProfile::new(lo, values, random_tail_spec(rng), random_tail_spec(rng)).expect("drawn shares lie in [0, 1]")
}

/// Profile with only constant tails and every share in `(0, 1)` or exactly 0/1.
pub fn random_simple_profile(rng: &mut impl Rng, max_window: usize) -> LambdaProfile {
    let lo = rng.gen_range(-12..=12);
    let len = rng.gen_range(0..=max_window);
    let values = (0..len).map(|_| random_share(rng)).collect();
    LambdaProfile::new(
        lo,
        values,
        TailSpec::constant(random_share(rng)),
        TailSpec::constant(random_share(rng)),
    )
    .expect("drawn shares lie in [0, 1]")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Number of random cases; fixtures come on top.
    pub size: usize,
    pub shape: StreamShape,
    pub include_fixtures: bool,
    /// Extra generations probed beside 0 and 1 per case.
    pub probe_indices: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            size: 200,
            shape: StreamShape::default(),
            include_fixtures: true,
            probe_indices: 3,
        }
    }
}

/// One battery input: a stream, a partner stream, and the generations and
/// factors used to probe it.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub index: usize,
    pub label: String,
    pub stream: Stream,
    pub partner: Stream,
    pub generations: Vec<i64>,
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    config: BatteryConfig,
    cases: Vec<Case>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryStamp {
    pub seed: u64,
    pub size: usize,
}

impl Battery {
    pub fn new(config: BatteryConfig) -> Self {
        let mut rng = rng(config.seed);
        let mut inputs: Vec<(String, Stream)> = Vec::new();
        if config.include_fixtures {
            inputs.extend(fixtures::battery_streams());
        }
        for k in 0..config.size {
            inputs.push((format!("random-{k}"), random_stream(&mut rng, &config.shape)));
        }
        let cases = inputs
            .into_iter()
            .enumerate()
            .map(|(index, (label, stream))| {
                let partner = random_stream(&mut rng, &config.shape);
                let mut generations = vec![0, 1, stream.window_lo(), stream.window_end()];
                for _ in 0..config.probe_indices {
                    let lo = stream.window_lo() - 2;
                    generations.push(rng.gen_range(lo..=stream.window_end() + 2));
                }
                generations.sort_unstable();
                generations.dedup();
                let factors = vec![0.0, 0.5, 2.0, rng.gen_range(0.01..10.0)];
                Case {
                    index,
                    label,
                    stream,
                    partner,
                    generations,
                    factors,
                }
            })
            .collect();
        Self { config, cases }
    }

    pub fn config(&self) -> &BatteryConfig {
        &self.config
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn stamp(&self) -> BatteryStamp {
        BatteryStamp {
            seed: self.config.seed,
            size: self.cases.len(),
        }
    }

    /// `(stream, partner)` for every case.
    pub fn pairs(&self) -> impl Iterator<Item = (&Stream, &Stream)> {
        self.cases.iter().map(|c| (&c.stream, &c.partner))
    }
}

impl Default for Battery {
    fn default() -> Self {
        Self::new(BatteryConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_reproducible() {
        let a = Battery::new(BatteryConfig {
            size: 20,
            ..Default::default()
        });
        let b = Battery::new(BatteryConfig {
            size: 20,
            ..Default::default()
        });
        assert_eq!(a, b);
        let c = Battery::new(BatteryConfig {
            size: 20,
            seed: 7,
            ..Default::default()
        });
        assert_ne!(a, c);
    }

    #[test]
    fn random_streams_respect_shape() {
        let shape = StreamShape::default();
        let mut rng = rng(1);
        for _ in 0..200 {
            let s = random_stream(&mut rng, &shape);
            assert!(s.values().len() <= shape.max_window);
            assert!(s.values().iter().all(|&v| (0.0..=shape.max_value).contains(&v)));
            for t in [s.left_tail(), s.right_tail()].into_iter().flatten() {
                assert!(t.ratio() <= shape.max_ratio);
            }
        }
    }
}
