//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use geotransfer_core::axioms::{check_axiom, lipschitz_certificate, Axiom, Outcome};
use geotransfer_core::battery::{
    self, random_profile, random_simple_profile, random_stream, Battery, BatteryConfig, StreamShape,
};
use geotransfer_core::fixtures;
use geotransfer_core::gallery::{independence_matrix, GalleryKind, GalleryRule};
use geotransfer_core::{
    allocate, allocate_direct, consistency_transform, recover_lambda, total_allocated, total_below, Extended,
    GeometricRule, IndexRange, LambdaProfile, Rule, Stream, TailSpec,
};
use rand::Rng;

type Check = Result<String, String>;

const SEED: u64 = 20_240_601;

fn long_shape() -> StreamShape {
    StreamShape {
        max_window: 200,
        ..StreamShape::default()
    }
}

/// 1000 seeded `(profile, stream)` pairs with windows up to 200 generations.
fn oracle_battery() -> Vec<(LambdaProfile, Stream)> {
    let mut rng = battery::rng(SEED);
    let shape = long_shape();
    (0..1000)
        .map(|_| (random_profile(&mut rng, 200), random_stream(&mut rng, &shape)))
        .collect()
}

fn covering_window(p: &LambdaProfile, r: &Stream) -> IndexRange {
    let lo = r.window_lo().min(p.window_lo()) - 5;
    let hi = r.window_end().max(p.window_end()) + 20;
    IndexRange::new(lo, hi)
}

fn oracle_equivalence(pairs: &[(LambdaProfile, Stream)]) -> Check {
    let mut worst = 0.0f64;
    for (k, (p, r)) in pairs.iter().enumerate() {
        let window = covering_window(p, r);
        let res = allocate(p, r, window).map_err(|e| format!("case {k}: {e}"))?;
        for i in window.lo..=window.hi {
            let d = (res.get(i).unwrap() - allocate_direct(p, r, i)).abs();
            worst = worst.max(d);
            if d > 1e-10 {
                return Err(format!(
                    "case {k}, generation {i}: recurrence and direct sum differ by {d:e}"
                ));
            }
        }
    }
    Ok(format!("{} pairs, max |difference| {worst:.2e}", pairs.len()))
}

fn sequence_identity() -> Check {
    let mut rng = battery::rng(SEED + 1);
    let mut worst = 0.0f64;
    for n in 0..500 {
        let k = rng.gen_range(1..=100);
        let xs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let p = LambdaProfile::new(0, xs.clone(), TailSpec::constant(0.0), TailSpec::constant(0.0))
            .map_err(|e| e.to_string())?;
        let mut total = p.partial_product(0, k as i64 - 1).unwrap();
        for (i, x) in xs.iter().enumerate() {
            total += x * p.partial_product(0, i as i64 - 1).unwrap();
        }
        let d = (total - 1.0).abs();
        worst = worst.max(d);
        if d > 1e-12 {
            return Err(format!("sequence {n} (length {k}): identity off by {d:e}"));
        }
    }
    Ok(format!("500 sequences, max |error| {worst:.2e}"))
}

fn sum_identities(pairs: &[(LambdaProfile, Stream)]) -> Check {
    let mut worst = 0.0f64;
    for (k, (p, r)) in pairs.iter().enumerate() {
        let window = covering_window(p, r);
        let res = allocate(p, r, window).map_err(|e| format!("case {k}: {e}"))?;
        let scale = r.taxicab_norm().max(1.0);
        let total = total_allocated(p, r).map_err(|e| e.to_string())?;
        let d = (total - res.total()).abs();
        worst = worst.max(d / scale);
        if d > 1e-9 * scale {
            return Err(format!(
                "case {k}: total {total} vs summed allocations {} ",
                res.total()
            ));
        }
        let mut running = res.retained_left;
        for (o, phi) in res.allocations.iter().enumerate() {
            let j = window.lo + o as i64;
            let closed = total_below(p, r, j).map_err(|e| e.to_string())?;
            let d = (closed - running).abs();
            worst = worst.max(d / scale);
            if d > 1e-9 * scale {
                return Err(format!("case {k}, j = {j}: closed form {closed} vs summed {running}"));
            }
            running += phi;
        }
    }
    Ok(format!("{} pairs, max relative |difference| {worst:.2e}", pairs.len()))
}

fn uniform_fixture() -> Check {
    let res =
        allocate(&fixtures::uniform(0.5), &Stream::basis(0), IndexRange::new(-20, 60)).map_err(|e| e.to_string())?;
    for i in -20..=60 {
        let want = if i < 0 { 0.0 } else { 0.5f64.powi(i as i32 + 1) };
        let got = res.get(i).unwrap();
        if got != want {
            return Err(format!("φ_{i} = {got}, expected {want}"));
        }
    }
    Ok("φ_i = (1/2)^(i+1) exactly on [0, 60], zero on [-20, -1]".into())
}

fn example_one() -> Check {
    let p = fixtures::example1();
    let limit = p.tail_product_limit(1);
    if (limit - (-1.0f64).exp()).abs() > 1e-12 {
        return Err(format!("product limit at 1 is {limit}"));
    }
    let deficit = 1.0 - total_allocated(&p, &Stream::basis(1)).map_err(|e| e.to_string())?;
    if (deficit - (-1.0f64).exp()).abs() > 1e-9 {
        return Err(format!("deficit on e1 is {deficit}"));
    }
    if p.classify().in_b {
        return Err("classified as balanced".into());
    }
    Ok(format!("limit {limit:.12}, deficit {deficit:.12}, not in B"))
}

fn venn_table() -> Check {
    for row in fixtures::venn_table() {
        if !row.matches {
            return Err(format!("{} classified as {:?}", row.profile, row.report));
        }
    }
    for c in [0.1, 0.25, 0.5, 0.75, 1.0] {
        let r = fixtures::uniform(c).classify();
        if !(r.in_u && r.in_t) {
            return Err(format!("uniform {c} classified as {r:?}"));
        }
    }
    for (n, i, s) in fixtures::venn_block_s_values(20) {
        match s {
            Extended::Finite(v) if (v - 2.0 * n as f64).abs() <= 1e-9 => {}
            _ => return Err(format!("S at {i} is {s}, expected {}", 2 * n)),
        }
    }
    let full = fixtures::uniform(0.0).classify();
    if !(full.in_u && !full.in_b) {
        return Err(format!("full transfer classified as {full:?}"));
    }
    Ok("six reference rows match; block S values equal 2n for n ≤ 20".into())
}

fn lipschitz() -> Check {
    let mut rng = battery::rng(SEED + 2);
    let b = Battery::new(BatteryConfig {
        seed: SEED + 3,
        size: 500,
        include_fixtures: false,
        ..BatteryConfig::default()
    });
    let mut worst = 0.0f64;
    for k in 0..20 {
        let p = random_profile(&mut rng, 64);
        let l = lipschitz_certificate(&GeometricRule::new(p), &b).map_err(|e| e.to_string())?;
        worst = worst.max(l);
        if l > 1.0 + 1e-9 {
            return Err(format!("profile {k}: Lipschitz ratio {l}"));
        }
    }
    Ok(format!("20 profiles x 500 pairs, max ratio {worst:.12}"))
}

fn consistency() -> Check {
    let mut rng = battery::rng(SEED + 4);
    let shape = StreamShape::default();
    let mut worst = 0.0f64;
    for k in 0..200 {
        let p = random_profile(&mut rng, 64);
        let r = random_stream(&mut rng, &shape);
        let j = rng.gen_range(r.window_lo() - 3..=r.window_end() + 3);
        let rule = GeometricRule::new(p.clone());
        let rj = consistency_transform(&rule, &r, j).map_err(|e| format!("triple {k}: {e}"))?;
        let hi = r.window_end().max(p.window_end()) + 20;
        let lo = r.window_lo().min(j) - 1;
        let a = allocate(&p, &r, IndexRange::new(lo, hi)).map_err(|e| e.to_string())?;
        let b = allocate(&p, &rj, IndexRange::new(j, hi.max(j))).map_err(|e| e.to_string())?;
        for i in j..=hi.max(j) {
            let d = (a.get(i).unwrap() - b.get(i).unwrap()).abs();
            worst = worst.max(d);
            if d > 1e-10 {
                return Err(format!("triple {k}, j = {j}, i = {i}: differ by {d:e}"));
            }
        }
    }
    Ok(format!("200 triples, max |difference| {worst:.2e}"))
}

fn reconstruction() -> Check {
    let mut rng = battery::rng(SEED + 5);
    let b = Battery::new(BatteryConfig {
        seed: SEED + 6,
        size: 50,
        ..BatteryConfig::default()
    });
    let window = IndexRange::new(-20, 43);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let hidden = random_simple_profile(&mut rng, 30);
        let rule = GeometricRule::new(hidden.clone());
        let found = recover_lambda(&rule, window).map_err(|e| format!("rule {k}: {e}"))?;
        for i in window.lo..=window.hi {
            let d = (found.lambda_at(i) - hidden.lambda_at(i)).abs();
            if d > 1e-12 {
                return Err(format!(
                    "rule {k}: λ_{i} recovered as {} vs {}",
                    found.lambda_at(i),
                    hidden.lambda_at(i)
                ));
            }
        }
        let twin = GeometricRule::new(found);
        for case in b.cases() {
            let d = rule
                .apply(&case.stream)
                .map_err(|e| e.to_string())?
                .taxicab_dist(&twin.apply(&case.stream).map_err(|e| e.to_string())?);
            worst = worst.max(d);
            if d > 1e-10 {
                return Err(format!("rule {k}, case {}: allocations differ by {d:e}", case.label));
            }
        }
    }
    Ok(format!(
        "20 rules on a 64-generation window, max allocation distance {worst:.2e}"
    ))
}

fn sup_witness() -> Check {
    let p = fixtures::sup_witness_profile();
    for m in 1..=100u64 {
        let r = fixtures::flat_past(m);
        let phi = allocate(&p, &r, IndexRange::new(-(m as i64), 0))
            .map_err(|e| e.to_string())?
            .get(0)
            .unwrap();
        if (phi - 1.0).abs() > 1e-12 || r.sup_norm() != 1.0 / m as f64 {
            return Err(format!("m = {m}: φ_0 = {phi}, sup norm {}", r.sup_norm()));
        }
    }
    Ok("φ_0(r^m) = 1 with sup norm 1/m for m ≤ 100".into())
}

fn pointwise_witness() -> Check {
    let p = fixtures::uniform(0.5);
    for m in 1..=50u64 {
        let r = fixtures::spike(&p, 0, m).ok_or("no spike")?;
        let phi = allocate(&p, &r, IndexRange::new(-(m as i64), 0))
            .map_err(|e| e.to_string())?
            .get(0)
            .unwrap();
        if phi != 0.5 {
            return Err(format!("m = {m}: φ_0 = {phi}"));
        }
    }
    Ok("φ_0(r^m) = 1/2 exactly for m ≤ 50".into())
}

fn independence() -> Check {
    let b = Battery::default();
    let matrix = independence_matrix(&b);
    let switch = GalleryRule::new(GalleryKind::SupportSwitch);
    for m in 0..=64 {
        let v = switch
            .apply(&fixtures::halving_prefix(m))
            .map_err(|e| e.to_string())?
            .value_at(0);
        if v != 1.0 {
            return Err(format!("support switch: φ_0(r^{m}) = {v}"));
        }
    }
    let limit = switch
        .apply(&fixtures::halving())
        .map_err(|e| e.to_string())?
        .value_at(0);
    if limit != 0.5 {
        return Err(format!("support switch: φ_0(r) = {limit}"));
    }
    let mismatches = matrix.mismatches();
    if !mismatches.is_empty() {
        let listed: Vec<String> = mismatches
            .iter()
            .map(|c| {
                format!(
                    "{}/{} expected {} got {}{}",
                    c.rule,
                    c.axiom,
                    c.expected,
                    c.observed,
                    c.verdict
                        .witness
                        .as_ref()
                        .map(|w| format!(" [{}: {}]", w.label, w.detail))
                        .unwrap_or_default()
                )
            })
            .collect();
        return Err(format!("{} mismatches: {}", mismatches.len(), listed.join("; ")));
    }
    Ok("25 cells match; support switch φ_0(r^m) = 1 vs φ_0(r) = 1/2".into())
}

fn idempotency() -> Check {
    let b = Battery::default();
    let mut passing = Vec::new();
    for k in 0..=10 {
        let c = k as f64 / 10.0;
        let v = check_axiom(&GeometricRule::new(fixtures::uniform(c)), Axiom::Idempotency, &b);
        if v.outcome == Outcome::Pass {
            passing.push(c);
        }
    }
    if passing == [0.0, 1.0] {
        Ok("idempotent exactly at c = 0 and c = 1".into())
    } else {
        Err(format!("idempotent at {passing:?}"))
    }
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() -> ExitCode {
    let started = Instant::now();
    let pairs = oracle_battery();
    let criteria: Vec<Criterion<'_>> = vec![
        ("oracle equivalence", Box::new(|| oracle_equivalence(&pairs))),
        ("sequence identity", Box::new(sequence_identity)),
        ("sum identities", Box::new(|| sum_identities(&pairs))),
        ("uniform fixture", Box::new(uniform_fixture)),
        ("non-balanced example", Box::new(example_one)),
        ("sub-family table", Box::new(venn_table)),
        ("lipschitz certificate", Box::new(lipschitz)),
        ("consistency", Box::new(consistency)),
        ("reconstruction", Box::new(reconstruction)),
        ("sup-continuity witness", Box::new(sup_witness)),
        ("point-wise witness", Box::new(pointwise_witness)),
        ("independence matrix", Box::new(independence)),
        ("idempotency dichotomy", Box::new(idempotency)),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
