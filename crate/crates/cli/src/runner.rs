//! Executes scenario tasks and writes `<task>.json` / `<task>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use geotransfer_core::axioms::{check_axiom_with, Axiom, AxiomVerdict, Outcome, DEFAULT_DEPTH};
use geotransfer_core::battery::Battery;
use geotransfer_core::fixtures::{venn_block_s_values, venn_table};
use geotransfer_core::gallery::{independence_matrix_with, GalleryRule};
use geotransfer_core::probes::{pointwise_continuity_probe, sup_continuity_probe, taxicab_continuity_probe};
use geotransfer_core::{allocate, recover_lambda, Extended, GeometricRule, IndexRange, Rule, RuleError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{RuleTarget, Scenario, Task, TaskSpec, SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Ran, but an expectation did not hold.
    Mismatch,
    /// The library refused the inputs.
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub kind: &'static str,
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Output {
    status: Status,
    summary: String,
    body: Value,
    csv: Option<String>,
}

impl Output {
    fn new(ok: bool, summary: String, body: Value, csv: Option<String>) -> Self {
        Output {
            status: if ok { Status::Ok } else { Status::Mismatch },
            summary,
            body,
            csv,
        }
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn ext(e: Extended) -> String {
    e.to_string()
}

/// Runs every task, writing results under `out`. Task failures are reported,
/// not returned; only I/O problems are errors.
pub fn run(scenario: &Scenario, out: &Path) -> Result<Vec<TaskReport>> {
    if scenario.tasks.is_empty() {
        return Ok(vec![]);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut reports = Vec::with_capacity(scenario.tasks.len());
    for task in &scenario.tasks {
        let output = match execute(scenario, task) {
            Ok(o) => o,
            Err(e) => Output {
                status: Status::Error,
                summary: e.to_string(),
                body: json!({ "error": e.to_string() }),
                csv: None,
            },
        };
        let mut files = Vec::new();
        let doc = json!({
            "schema": SCHEMA,
            "task": task.name,
            "kind": task.action.kind(),
            "seed": scenario.seed,
            "tolerance": scenario.tolerance,
            "status": output.status,
            "summary": output.summary,
            "result": output.body,
        });
        let path = out.join(format!("{}.json", task.name));
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        if let Some(csv) = output.csv {
            let path = out.join(format!("{}.csv", task.name));
            fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
        }
        reports.push(TaskReport {
            name: task.name.clone(),
            kind: task.action.kind(),
            status: output.status,
            summary: output.summary,
            files,
        });
    }
    Ok(reports)
}

fn battery(scenario: &Scenario, params: &crate::scenario::BatteryParams) -> Battery {
    Battery::new(params.config(scenario.seed))
}

fn boxed_rule(target: RuleTarget, name: &str) -> Box<dyn Rule> {
    match target {
        RuleTarget::Geometric(p) => Box::new(GeometricRule::named(p, name)),
        RuleTarget::Gallery(k) => Box::new(GalleryRule::new(k)),
    }
}

fn execute(scenario: &Scenario, task: &Task) -> Result<Output> {
    // validation already resolved every name, so lookups below cannot miss
    let missing = || anyhow::anyhow!("unresolved name in task {:?}", task.name);
    Ok(match &task.action {
        TaskSpec::Allocate {
            profile,
            stream,
            window,
        } => {
            let p = scenario.profile(profile).ok_or_else(missing)?;
            let r = scenario.stream(stream).ok_or_else(missing)?;
            let w = window.unwrap_or_else(|| {
                IndexRange::new(
                    r.window_lo().min(p.window_lo()) - 2,
                    r.window_end().max(p.window_end()) + 10,
                )
            });
            let res = allocate(&p, &r, w)?;
            let rows = (w.lo..=w.hi).map(|i| {
                vec![
                    i.to_string(),
                    r.value_at(i).to_string(),
                    res.get(i).unwrap_or(0.0).to_string(),
                ]
            });
            let csv = csv_string(&["generation", "income", "allocation"], rows)?;
            let summary = format!(
                "window [{}, {}]: allocated {} in window, {} total, {} leaked",
                w.lo,
                w.hi,
                res.window_sum(),
                res.total(),
                res.leaked_mass
            );
            Output::new(true, summary, serde_json::to_value(&res)?, Some(csv))
        }
        TaskSpec::Classify { profiles } => {
            let names: Vec<String> = if profiles.is_empty() {
                scenario.profiles.iter().map(|p| p.name.clone()).collect()
            } else {
                profiles.clone()
            };
            let mut rows = Vec::new();
            let mut body = Vec::new();
            for name in &names {
                let report = scenario.profile(name).ok_or_else(missing)?.classify();
                rows.push(vec![
                    name.clone(),
                    report.in_b.to_string(),
                    report.in_e.to_string(),
                    report.in_t.to_string(),
                    report.in_p.to_string(),
                    report.in_u.to_string(),
                    ext(report.sup_s),
                ]);
                body.push(json!({ "profile": name, "report": report }));
            }
            let csv = csv_string(&["profile", "in_B", "in_E", "in_T", "in_P", "in_U", "sup_S"], rows)?;
            Output::new(
                true,
                format!("{} profiles classified", names.len()),
                Value::Array(body),
                Some(csv),
            )
        }
        TaskSpec::Axioms {
            rule,
            axioms,
            battery: params,
            expect,
        } => {
            let target = scenario.rule_target(rule).ok_or_else(missing)?;
            let rule = boxed_rule(target, rule);
            let b = battery(scenario, params);
            let list: Vec<Axiom> = if axioms.is_empty() {
                Axiom::ALL.to_vec()
            } else {
                axioms.clone()
            };
            let verdicts: Vec<AxiomVerdict> = list
                .iter()
                .map(|&a| check_axiom_with(rule.as_ref(), a, &b, scenario.tolerance, DEFAULT_DEPTH))
                .collect();
            let mut unmet = Vec::new();
            let rows: Vec<Vec<String>> = verdicts
                .iter()
                .map(|v| {
                    let want = expect.get(&v.axiom).copied();
                    if want.is_some_and(|w| w != v.outcome) {
                        unmet.push(v.axiom.id());
                    }
                    vec![
                        v.axiom.id().to_string(),
                        v.outcome.to_string(),
                        want.map(|w| w.to_string()).unwrap_or_default(),
                        v.violation.to_string(),
                        v.precondition_unmet.to_string(),
                        v.witness.as_ref().map(|w| w.label.clone()).unwrap_or_default(),
                    ]
                })
                .collect();
            // expectations on axioms that were not checked count as unmet
            for a in expect.keys().filter(|a| !list.contains(a)) {
                unmet.push(a.id());
            }
            let csv = csv_string(
                &[
                    "axiom",
                    "outcome",
                    "expected",
                    "violation",
                    "precondition_unmet",
                    "witness",
                ],
                rows,
            )?;
            let failed = verdicts.iter().filter(|v| v.outcome == Outcome::Fail).count();
            let summary = if unmet.is_empty() {
                format!(
                    "{} axioms checked on {} cases, {failed} failed",
                    verdicts.len(),
                    b.len()
                )
            } else {
                format!("expectation not met for {}", unmet.join(", "))
            };
            Output::new(unmet.is_empty(), summary, serde_json::to_value(&verdicts)?, Some(csv))
        }
        TaskSpec::Probes {
            profile,
            depth,
            battery: params,
        } => {
            let p = scenario.profile(profile).ok_or_else(missing)?;
            let b = battery(scenario, params);
            let rule = GeometricRule::named(p.clone(), profile.as_str());
            let verdicts = vec![
                sup_continuity_probe(&p, *depth, &b)?,
                pointwise_continuity_probe(&p, *depth, &b)?,
                taxicab_continuity_probe(&rule, *depth, &b)?,
            ];
            let rows = verdicts.iter().map(|v| {
                vec![
                    v.probe.to_string(),
                    serde_json::to_value(v.outcome)
                        .map(|o| o.as_str().unwrap_or_default().to_string())
                        .unwrap_or_default(),
                    v.bound.map(ext).unwrap_or_default(),
                    v.detail.clone(),
                ]
            });
            let csv = csv_string(&["probe", "outcome", "bound", "detail"], rows)?;
            let summary = verdicts
                .iter()
                .map(|v| format!("{}={:?}", v.probe, v.outcome))
                .collect::<Vec<_>>()
                .join(", ");
            Output::new(true, summary, serde_json::to_value(&verdicts)?, Some(csv))
        }
        TaskSpec::Venn { s_values } => {
            let table = venn_table();
            let s = venn_block_s_values(*s_values);
            let bad_rows: Vec<&str> = table
                .iter()
                .filter(|r| !r.matches)
                .map(|r| r.profile.as_str())
                .collect();
            let bad_s: Vec<i64> = s
                .iter()
                .filter(|(n, _, v)| {
                    v.finite()
                        .is_none_or(|x| (x - 2.0 * *n as f64).abs() > scenario.tolerance * x.max(1.0))
                })
                .map(|(n, _, _)| *n)
                .collect();
            let rows = table.iter().map(|r| {
                vec![
                    r.profile.clone(),
                    r.report.in_b.to_string(),
                    r.report.in_e.to_string(),
                    r.report.in_t.to_string(),
                    r.report.in_p.to_string(),
                    r.report.in_u.to_string(),
                    r.matches.to_string(),
                ]
            });
            let csv = csv_string(&["profile", "in_B", "in_E", "in_T", "in_P", "in_U", "matches"], rows)?;
            let body = json!({
                "table": table,
                "block_s_values": s.iter().map(|(n, i, v)| json!({ "n": n, "generation": i, "s": v })).collect::<Vec<_>>(),
            });
            let ok = bad_rows.is_empty() && bad_s.is_empty();
            let summary = if ok {
                format!("{} rows match, S = 2n for n in 1..={s_values}", table.len())
            } else {
                format!("rows off: {bad_rows:?}; S off at n = {bad_s:?}")
            };
            Output::new(ok, summary, body, Some(csv))
        }
        TaskSpec::Independence { battery: params } => {
            let b = battery(scenario, params);
            let m = independence_matrix_with(&b, scenario.tolerance);
            let off: Vec<String> = m
                .mismatches()
                .iter()
                .map(|c| format!("{}/{}", c.rule, c.axiom.id()))
                .collect();
            let summary = if off.is_empty() {
                "every cell matches".to_string()
            } else {
                format!("{} cells differ: {}", off.len(), off.join(", "))
            };
            Output::new(off.is_empty(), summary, serde_json::to_value(&m)?, Some(m.to_csv()?))
        }
        TaskSpec::Reconstruct {
            rule,
            window,
            expect_infeasible,
        } => {
            let target = scenario.rule_target(rule).ok_or_else(missing)?;
            let r = boxed_rule(target, rule);
            match recover_lambda(r.as_ref(), *window) {
                Ok(p) => {
                    let rows = (window.lo..=window.hi).map(|i| vec![i.to_string(), p.lambda_at(i).to_string()]);
                    let csv = csv_string(&["generation", "lambda"], rows)?;
                    let summary = if *expect_infeasible {
                        "expected an infeasible share, recovered a profile".to_string()
                    } else {
                        format!("recovered {} shares", window.len())
                    };
                    Output::new(!expect_infeasible, summary, json!({ "profile": p }), Some(csv))
                }
                Err(RuleError::Infeasible { index, value }) => {
                    let summary = format!("share {value} at generation {index} lies outside [0, 1]");
                    Output::new(
                        *expect_infeasible,
                        summary,
                        json!({ "infeasible": { "index": index, "value": value } }),
                        None,
                    )
                }
                Err(e) => return Err(e.into()),
            }
        }
    })
}
