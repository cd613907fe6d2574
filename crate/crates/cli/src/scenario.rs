//! Scenario files: named profiles and streams plus a list of tasks.

use std::collections::BTreeMap;
use std::fmt;

use geotransfer_core::axioms::{Axiom, Outcome};
use geotransfer_core::battery::{BatteryConfig, DEFAULT_SEED};
use geotransfer_core::fixtures;
use geotransfer_core::gallery::GalleryKind;
use geotransfer_core::{GeometricTail, IndexRange, LambdaProfile, Stream};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "1";

fn schema() -> String {
    SCHEMA.into()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_tolerance() -> f64 {
    geotransfer_core::axioms::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema")]
    pub schema: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub profiles: Vec<NamedProfile>,
    #[serde(default)]
    pub streams: Vec<NamedStream>,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedProfile {
    pub name: String,
    pub profile: LambdaProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedStream {
    pub name: String,
    pub stream: Stream,
}

/// Battery size and composition; the seed always comes from the scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_fixtures: Option<bool>,
}

impl BatteryParams {
    pub fn config(&self, seed: u64) -> BatteryConfig {
        let base = BatteryConfig::default();
        BatteryConfig {
            seed,
            size: self.size.unwrap_or(base.size),
            include_fixtures: self.include_fixtures.unwrap_or(base.include_fixtures),
            ..base
        }
    }
}

fn default_probe_depth() -> u64 {
    100
}

fn default_s_values() -> i64 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    #[serde(flatten)]
    pub action: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Allocate {
        profile: String,
        stream: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<IndexRange>,
    },
    Classify {
        /// Empty means every profile in the scenario.
        #[serde(default)]
        profiles: Vec<String>,
    },
    Axioms {
        rule: String,
        /// Empty means all ten.
        #[serde(default)]
        axioms: Vec<Axiom>,
        #[serde(default)]
        battery: BatteryParams,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        expect: BTreeMap<Axiom, Outcome>,
    },
    Probes {
        profile: String,
        #[serde(default = "default_probe_depth")]
        depth: u64,
        #[serde(default)]
        battery: BatteryParams,
    },
    Venn {
        #[serde(default = "default_s_values")]
        s_values: i64,
    },
    Independence {
        #[serde(default)]
        battery: BatteryParams,
    },
    Reconstruct {
        rule: String,
        window: IndexRange,
        #[serde(default)]
        expect_infeasible: bool,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Allocate { .. } => "allocate",
            TaskSpec::Classify { .. } => "classify",
            TaskSpec::Axioms { .. } => "axioms",
            TaskSpec::Probes { .. } => "probes",
            TaskSpec::Venn { .. } => "venn",
            TaskSpec::Independence { .. } => "independence",
            TaskSpec::Reconstruct { .. } => "reconstruct",
        }
    }
}

/// Error tied to a position in the scenario text.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ScenarioError {}

/// Line and column (1-based) of the first `"needle"` string literal in `text`.
fn locate(text: &str, needle: &str) -> (usize, usize) {
    let quoted = format!("\"{needle}\"");
    let Some(offset) = text.find(&quoted) else {
        return (1, 1);
    };
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

impl Scenario {
    /// Parses and validates a scenario, anchoring errors to the source text.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate().map_err(|(needle, message)| {
            let (line, column) = locate(text, &needle);
            ScenarioError { line, column, message }
        })?;
        Ok(scenario)
    }

    /// Checks names and parameters; on failure returns the offending name
    /// (to anchor the message) and the message.
    pub fn validate(&self) -> Result<(), (String, String)> {
        if self.schema != SCHEMA {
            return Err((
                self.schema.clone(),
                format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err((
                "tolerance".into(),
                format!("tolerance must be positive, got {}", self.tolerance),
            ));
        }
        let mut seen = BTreeMap::new();
        for p in &self.profiles {
            if seen.insert(("profile", p.name.clone()), ()).is_some() {
                return Err((p.name.clone(), format!("profile {:?} defined twice", p.name)));
            }
        }
        for s in &self.streams {
            if seen.insert(("stream", s.name.clone()), ()).is_some() {
                return Err((s.name.clone(), format!("stream {:?} defined twice", s.name)));
            }
        }
        let mut tasks = BTreeMap::new();
        for task in &self.tasks {
            let bad = |needle: &str, msg: String| Err((needle.to_string(), format!("task {:?}: {msg}", task.name)));
            if task.name.is_empty() || task.name.contains(['/', '\\']) || task.name.starts_with('.') {
                return bad(&task.name, "name must be a plain, non-empty file stem".into());
            }
            if tasks.insert(task.name.clone(), ()).is_some() {
                return bad(&task.name, "defined twice".into());
            }
            match &task.action {
                TaskSpec::Allocate {
                    profile,
                    stream,
                    window,
                } => {
                    if self.profile(profile).is_none() {
                        return bad(profile, format!("unknown profile {profile:?}"));
                    }
                    if self.stream(stream).is_none() {
                        return bad(stream, format!("unknown stream {stream:?}"));
                    }
                    if let Some(w) = window {
                        if w.is_empty() || w.len() > 1 << 20 {
                            return bad(
                                &task.name,
                                format!("window [{}, {}] must hold 1 to 2^20 generations", w.lo, w.hi),
                            );
                        }
                    }
                }
                TaskSpec::Classify { profiles } => {
                    if let Some(p) = profiles.iter().find(|p| self.profile(p).is_none()) {
                        return bad(p, format!("unknown profile {p:?}"));
                    }
                }
                TaskSpec::Axioms { rule, battery, .. } => {
                    if self.rule_target(rule).is_none() {
                        return bad(rule, format!("{rule:?} is neither a profile nor a gallery rule"));
                    }
                    check_battery(battery).or_else(|m| bad(&task.name, m))?;
                }
                TaskSpec::Reconstruct { rule, window, .. } => {
                    if self.rule_target(rule).is_none() {
                        return bad(rule, format!("{rule:?} is neither a profile nor a gallery rule"));
                    }
                    if window.is_empty() || window.len() > 4096 {
                        return bad(
                            &task.name,
                            "reconstruction window must hold 1 to 4096 generations".into(),
                        );
                    }
                }
                TaskSpec::Probes {
                    profile,
                    depth,
                    battery,
                } => {
                    if self.profile(profile).is_none() {
                        return bad(profile, format!("unknown profile {profile:?}"));
                    }
                    if !(1..=10_000).contains(depth) {
                        return bad(&task.name, format!("probe depth {depth} outside [1, 10000]"));
                    }
                    check_battery(battery).or_else(|m| bad(&task.name, m))?;
                }
                TaskSpec::Venn { s_values } => {
                    if !(1..=1000).contains(s_values) {
                        return bad(&task.name, format!("s_values {s_values} outside [1, 1000]"));
                    }
                }
                TaskSpec::Independence { battery } => {
                    check_battery(battery).or_else(|m| bad(&task.name, m))?;
                }
            }
        }
        Ok(())
    }

    /// Scenario profiles first, then the built-in reference profiles.
    pub fn profile(&self, name: &str) -> Option<LambdaProfile> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.profile.clone())
            .or_else(|| fixtures::profile(name))
    }

    pub fn stream(&self, name: &str) -> Option<Stream> {
        self.streams.iter().find(|s| s.name == name).map(|s| s.stream.clone())
    }

    pub fn rule_target(&self, name: &str) -> Option<RuleTarget> {
        if let Some(p) = self.profile(name) {
            return Some(RuleTarget::Geometric(p));
        }
        GalleryKind::ALL
            .into_iter()
            .find(|k| k.id() == name)
            .map(RuleTarget::Gallery)
    }
}

fn check_battery(b: &BatteryParams) -> Result<(), String> {
    match b.size {
        Some(n) if n > 100_000 => Err(format!("battery size {n} exceeds 100000")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleTarget {
    Geometric(LambdaProfile),
    Gallery(GalleryKind),
}

/// The shipped regression scenario covering every reference fixture.
pub fn builtin_fixtures() -> Scenario {
    let profiles = fixtures::profiles()
        .into_iter()
        .map(|(name, profile)| NamedProfile {
            name: name.into(),
            profile,
        })
        .collect();
    let half_tail = GeometricTail::new(0.5, 0.5).expect("valid");
    let streams = vec![
        ("e0", Stream::basis(0)),
        ("e1", Stream::basis(1)),
        ("six_three", Stream::from_values(0, vec![6.0, 3.0]).expect("valid")),
        ("halving", fixtures::halving()),
        (
            "left_tail",
            Stream::from_values(0, vec![1.0])
                .expect("valid")
                .with_left_tail(half_tail),
        ),
    ]
    .into_iter()
    .map(|(name, stream)| NamedStream {
        name: name.into(),
        stream,
    })
    .collect();

    let mut tasks = vec![
        task(
            "allocate_uniform_half_e0",
            TaskSpec::Allocate {
                profile: "uniform_half".into(),
                stream: "e0".into(),
                window: Some(IndexRange::new(-2, 20)),
            },
        ),
        task(
            "allocate_example1_e1",
            TaskSpec::Allocate {
                profile: "example1".into(),
                stream: "e1".into(),
                window: Some(IndexRange::new(0, 40)),
            },
        ),
        task(
            "allocate_blocked_six_three",
            TaskSpec::Allocate {
                profile: "step_unit_past".into(),
                stream: "six_three".into(),
                window: None,
            },
        ),
        task(
            "allocate_uniform_quarter_left_tail",
            TaskSpec::Allocate {
                profile: "uniform_quarter".into(),
                stream: "left_tail".into(),
                window: Some(IndexRange::new(-5, 10)),
            },
        ),
        task("classify", TaskSpec::Classify { profiles: vec![] }),
        task("venn", TaskSpec::Venn { s_values: 20 }),
        task(
            "independence",
            TaskSpec::Independence {
                battery: BatteryParams::default(),
            },
        ),
        task(
            "reconstruct_uniform_quarter",
            TaskSpec::Reconstruct {
                rule: "uniform_quarter".into(),
                window: IndexRange::new(-8, 8),
                expect_infeasible: false,
            },
        ),
        task(
            "reconstruct_double",
            TaskSpec::Reconstruct {
                rule: "double".into(),
                window: IndexRange::new(0, 3),
                expect_infeasible: true,
            },
        ),
    ];
    for (name, _) in fixtures::profiles() {
        tasks.push(task(
            &format!("axioms_{name}"),
            TaskSpec::Axioms {
                rule: name.into(),
                axioms: vec![],
                battery: BatteryParams::default(),
                expect: Axiom::CHARACTERIZING.into_iter().map(|a| (a, Outcome::Pass)).collect(),
            },
        ));
        tasks.push(task(
            &format!("probes_{name}"),
            TaskSpec::Probes {
                profile: name.into(),
                depth: default_probe_depth(),
                battery: BatteryParams::default(),
            },
        ));
    }
    Scenario {
        schema: schema(),
        seed: DEFAULT_SEED,
        tolerance: default_tolerance(),
        profiles,
        streams,
        tasks,
    }
}

fn task(name: &str, action: TaskSpec) -> Task {
    Task {
        name: name.into(),
        action,
    }
}
