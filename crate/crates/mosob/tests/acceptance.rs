//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the table is always printed.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use mosob::conditions::{conjugate_delta2_verdict, delta2_verdict, space_verdicts, Status};
use mosob::function_rep::{Domain, PiecewiseFunction};
use mosob::mo_function::{generalized_inverse, legendre, Conjugate, MoFunction, MusielakOrlicz, Table};
use mosob::norms::{luxemburg_norm, modular_value, orlicz_norm, sobolev_norm, NormConfig};
use mosob::operators::{estimate_operator_norm, volterra_certificate, EstimateConfig, Kernel};
use mosob::probes::{
    non_delta2_witness, uc_failure_sobolev_pairs, uc_modulus_estimate, L1Embedding, LinfEmbedding, ModulusConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn unit() -> Domain {
    Domain::unit()
}

fn varexp(p: &str) -> MoFunction {
    MoFunction::variable_exponent(p, unit()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// One representative per family.
fn families() -> Vec<(&'static str, MoFunction)> {
    let xs = vec![0.0, 0.5, 1.0];
    let ts = vec![0.0, 0.5, 1.0, 2.0, 4.0];
    let values = xs
        .iter()
        .map(|x| ts.iter().map(|t: &f64| (1.0 + x) * t * t + 0.5 * t).collect())
        .collect();
    vec![
        ("orlicz t^3/3 + t^2/2", MoFunction::orlicz("t^3/3 + t^2/2", unit()).unwrap()),
        ("variable exponent 2+sin(pi x)", varexp("2 + sin(pi*x)")),
        ("double phase t^2 + x t^4", MoFunction::double_phase("2", "4", "x", unit()).unwrap()),
        ("tabulated", MoFunction::tabulated(Table { xs, ts, values }, unit()).unwrap()),
    ]
}

fn random_step(rng: &mut ChaCha8Rng, cells: usize, scale: f64) -> PiecewiseFunction {
    let bps: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    let vals: Vec<f64> = (0..cells).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    PiecewiseFunction::step(bps, &vals).unwrap()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn c1_legendre() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0, 7.0] {
        let phi = varexp(&p.to_string());
        let q = p / (p - 1.0);
        for _ in 0..100 {
            let x = rng.random_range(0.0..1.0);
            let t = log_uniform(&mut rng, 1e-2, 1e2);
            let v = legendre(&|s| phi.value(x, s), t);
            worst = worst.max(rel(v, t.powf(q) / q));
        }
    }
    let msg = format!("max relative error {worst:.2e} (tol 1e-6)");
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

fn c2_biconjugate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, phi) in families() {
        let star = Conjugate(&phi);
        let mut n = 0;
        while n < 100 {
            let x = rng.random_range(0.0..1.0);
            let t = log_uniform(&mut rng, 1e-2, 4.0);
            let v = phi.value(x, t);
            if !v.is_finite() || v == 0.0 {
                continue;
            }
            let bi = star.conjugate_value(x, t);
            worst = worst.max(rel(bi, v));
            n += 1;
            count += 1;
        }
    }
    let msg = format!("{count} points, max relative error {worst:.2e} (tol 1e-5)");
    if worst <= 1e-5 { Ok(msg) } else { Err(msg) }
}

fn c3_inverse_product() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    let fams = families();
    for i in 0..200 {
        let phi = &fams[i % fams.len()].1;
        let x = rng.random_range(0.0..1.0);
        let t = log_uniform(&mut rng, 1e-3, 1e3);
        let a = generalized_inverse(phi, x, t).unwrap();
        let b = generalized_inverse(&Conjugate(phi), x, t).unwrap();
        let prod = a * b;
        if !(t * (1.0 - 1e-9) <= prod && prod <= 2.0 * t + 1e-6) {
            bad.push((x, t, prod));
        }
    }
    if bad.is_empty() { Ok("200 points".into()) } else { Err(format!("violations: {bad:?}")) }
}

fn c4_norm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = NormConfig::default();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::INFINITY;
    for (_, phi) in families() {
        for _ in 0..50 {
            let scale = log_uniform(&mut rng, 0.1, 10.0);
            let f = random_step(&mut rng, 8, scale);
            let lux = luxemburg_norm(&phi, &f, &cfg).map_err(|e| e.to_string())?.value;
            let orl = orlicz_norm(&phi, &f, &cfg).map_err(|e| e.to_string())?.value;
            worst_low = worst_low.min(orl - lux);
            worst_high = worst_high.min(2.0 * lux + 1e-8 - orl);
        }
    }
    let msg = format!("min(‖f‖⁰ − ‖f‖) = {worst_low:.3e}, min(2‖f‖ + 1e-8 − ‖f‖⁰) = {worst_high:.3e}");
    if worst_low >= 0.0 && worst_high >= 0.0 { Ok(msg) } else { Err(msg) }
}

fn c5_luxemburg_lp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = NormConfig::default();
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let phi = varexp(&p.to_string());
        for _ in 0..50 {
            let cells = 10;
            let scale = log_uniform(&mut rng, 0.1, 10.0);
            let f = random_step(&mut rng, cells, scale);
            // exact L^p norm of a step function
            let lp = f.pieces().iter().map(|c| c[0].abs().powf(p) / cells as f64).sum::<f64>().powf(1.0 / p);
            let lux = luxemburg_norm(&phi, &f, &cfg).map_err(|e| e.to_string())?.value;
            worst = worst.max(rel(lux, p.powf(-1.0 / p) * lp));
        }
    }
    let msg = format!("max relative error {worst:.2e} (tol 1e-6)");
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

/// The four table entries: (name, function, expected Δ₂, expected Δ₂ of the conjugate).
fn table_specs() -> Vec<(&'static str, MoFunction, bool, Option<bool>)> {
    vec![
        ("2+sin(pi x)", varexp("2 + sin(pi*x)"), true, Some(true)),
        ("1/(1-x)", varexp("1/(1-x)"), false, None),
        ("1+x", varexp("1+x"), true, Some(false)),
        ("t^2 + x t^4", MoFunction::double_phase("2", "4", "x", unit()).unwrap(), true, Some(true)),
    ]
}

fn c6_delta2_table() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for (name, phi, d, c) in table_specs() {
        let dv = delta2_verdict(&phi).status;
        let cv = conjugate_delta2_verdict(&phi).status;
        let good = dv == Status::from_bool(d) && c.is_none_or(|c| cv == Status::from_bool(c));
        ok &= good;
        rows.push(format!("{name}: Δ₂ {dv}, Δ₂* {cv}"));
    }
    if ok { Ok(rows.join("; ")) } else { Err(rows.join("; ")) }
}

fn c7_equivalences() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for (name, phi, _, _) in table_specs() {
        let v = space_verdicts(&phi);
        let dc = v.delta2.status.and(v.delta2_conjugate.status);
        let du = v.delta2.status.and(v.uniformly_convex_phi.status);
        for (space, props) in [("L", &v.lebesgue), ("W", &v.sobolev)] {
            let chain = [props.reflexive.status, props.superreflexive.status, props.b_convex.status, dc];
            let good = chain.iter().all(|s| s.is_decisive() && *s == chain[0])
                && props.uniformly_convex.status.is_decisive()
                && props.uniformly_convex.status == du;
            ok &= good;
            rows.push(format!(
                "{name}/{space}: refl {} sup {} bconv {} Δ₂∧Δ₂* {dc}; UC {} Δ₂∧UC(Φ) {du}",
                props.reflexive.status, props.superreflexive.status, props.b_convex.status, props.uniformly_convex.status
            ));
        }
    }
    if ok { Ok(format!("{} rows consistent", rows.len())) } else { Err(rows.join("; ")) }
}

fn c8_volterra() -> Outcome {
    let phi = varexp("2");
    let start = Instant::now();
    let cfg = EstimateConfig { grid: 2048, ..EstimateConfig::default() };
    let est = estimate_operator_norm(&phi, &phi, &Kernel::Volterra, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cert = volterra_certificate(&phi).map_err(|e| e.to_string())?;
    let target = 2.0 / PI;
    let msg = format!(
        "estimate {:.6} vs 2/π {:.6} (rel {:.2e}), bound {}, {:.2?}",
        est.value,
        target,
        rel(est.value, target),
        cert.bound_on_norm,
        elapsed
    );
    if rel(est.value, target) <= 0.01 && elapsed <= Duration::from_secs(30) && cert.bound_on_norm >= est.value {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_non_delta2() -> Outcome {
    let phi = varexp("1/(1-x)");
    let w = non_delta2_witness(&phi, 6).map_err(|e| e.to_string())?;
    let mut worst = Vec::new();
    for (i, f) in w.members.iter().enumerate() {
        let n = i as i32 + 1;
        let i1 = modular_value(&phi, f, 1.0).map_err(|e| e.to_string())?;
        let i2 = modular_value(&phi, f, 1.05).map_err(|e| e.to_string())?;
        if !(i1 <= 0.5f64.powi(n) && i2 > 1.0) {
            worst.push(format!("n={n}: I={i1:e}, I(1.05f)={i2:e}"));
        }
        for g in &w.members[i + 1..] {
            let overlap = f.support_overlap(g).map_err(|e| e.to_string())?;
            if overlap > 0.0 {
                worst.push(format!("n={n}: overlap {overlap:e}"));
            }
        }
    }
    if worst.is_empty() && w.members.len() == 6 {
        Ok("6 disjoint members with I(f_n) ≤ 2^-n and I(1.05 f_n) > 1".into())
    } else {
        Err(worst.join("; "))
    }
}

fn c10_linf() -> Outcome {
    let phi = varexp("1/(1-x)");
    let n = 6;
    let emb = LinfEmbedding::build(&phi, n).map_err(|e| e.to_string())?;
    let l = emb.l();
    let cfg = NormConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(0..n);
        a[k] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let terms: Vec<(f64, &PiecewiseFunction)> = a.iter().copied().zip(emb.g.iter()).collect();
        let s = PiecewiseFunction::linear_combination(&terms).map_err(|e| e.to_string())?;
        let v = sobolev_norm(&phi, &s, &cfg).map_err(|e| e.to_string())?.value;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let msg = format!("‖Σ a_k g_k‖ ∈ [{lo:.10}, {hi:.6}], l = {l}");
    if lo >= 1.0 - 1e-8 && hi <= 1.0 + l { Ok(msg) } else { Err(msg) }
}

fn c11_l1() -> Outcome {
    let phi = varexp("1+x");
    let n = 4;
    let eps = 0.01;
    let emb = L1Embedding::build(&phi, n, eps).map_err(|e| e.to_string())?;
    let l = emb.l();
    let cfg = NormConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut lo_slack, mut hi_slack) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..20 {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1: f64 = a.iter().map(|v| v.abs()).sum();
        let terms: Vec<(f64, &PiecewiseFunction)> = a.iter().copied().zip(emb.h.iter()).collect();
        let s = PiecewiseFunction::linear_combination(&terms).map_err(|e| e.to_string())?;
        let v = sobolev_norm(&phi, &s, &cfg).map_err(|e| e.to_string())?.value;
        lo_slack = lo_slack.min(v - (0.5 * l1 - 0.02));
        hi_slack = hi_slack.min((1.0 + l) * l1 - v);
    }
    let msg = format!("lower slack {lo_slack:.4}, upper slack {hi_slack:.4}, l = {l}");
    if lo_slack >= 0.0 && hi_slack >= 0.0 { Ok(msg) } else { Err(msg) }
}

fn c12_uc_pairs() -> Outcome {
    let phi = varexp("1/(1-x)");
    let w = uc_failure_sobolev_pairs(&phi, 0.5, 3).map_err(|e| e.to_string())?;
    let mut problems: Vec<String> = w.failed().map(|c| format!("{}[{:?}]", c.name, c.member)).collect();
    let gamma = w.parameters["gamma"];
    if !(gamma > 0.0) {
        problems.push(format!("γ = {gamma}"));
    }
    for (k, c) in [0.2, 0.1, 0.05].iter().enumerate() {
        if w.parameters.get(&format!("c_{}", k + 1)) != Some(c) {
            problems.push(format!("c_{} ≠ {c}", k + 1));
        }
        for m in [2 * k, 2 * k + 1] {
            let sup = w.members[m].sup_abs();
            if !(sup < 0.5f64.powi(k as i32 + 1)) {
                problems.push(format!("sup of member {m} is {sup}"));
            }
        }
    }
    for name in ["norm-lower-f", "norm-upper-f", "norm-lower-g", "norm-upper-g", "midpoint-norm", "separation-norm"] {
        if w.checks_named(name).count() != 3 {
            problems.push(format!("missing {name}"));
        }
    }
    if problems.is_empty() {
        Ok(format!("3 pairs, γ = {gamma:.4}, all {} checks pass", w.checks.len()))
    } else {
        Err(problems.join("; "))
    }
}

fn c13_modulus() -> Outcome {
    let cfg = ModulusConfig::default();
    let exact = 1.0 - 3f64.sqrt() / 2.0;
    let l2 = uc_modulus_estimate(&varexp("2"), 1.0, &cfg).map_err(|e| e.to_string())?;
    let lin = uc_modulus_estimate(&MoFunction::orlicz("t", unit()).unwrap(), 1.0, &cfg).map_err(|e| e.to_string())?;
    let msg = format!("p≡2: {l2:.9} (exact {exact:.9}); φ=t: {lin:.2e}");
    if l2 >= 0.95 * exact && l2 <= exact + 1e-9 && lin <= 0.01 { Ok(msg) } else { Err(msg) }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = mosob::cli::run(args.iter().copied(), &mut out, &mut err);
    (code, out)
}

fn c14_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = dir.path().join("space.toml");
    std::fs::write(&spec, "interval = [0.0, 1.0]\nseed = 42\n[family]\nkind = \"variable-exponent\"\np = \"1/(1-x)\"\n")
        .map_err(|e| e.to_string())?;
    let l2 = dir.path().join("l2.toml");
    std::fs::write(&l2, "interval = [0.0, 1.0]\nseed = 42\n[family]\nkind = \"variable-exponent\"\np = \"2\"\n")
        .map_err(|e| e.to_string())?;
    let s = spec.to_str().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let w = dir.path().join(format!("w{run}.json"));
        let w = w.to_str().unwrap();
        let mut bytes = Vec::new();
        for args in [
            vec!["mosob", "--emit", "structured", "audit", s],
            vec!["mosob", "--emit", "rows", "audit", s],
            vec!["mosob", "--emit", "rows", "probe", s, "non-delta2", "-N", "4", "-o", w],
            vec!["mosob", "--emit", "structured", "probe", l2.to_str().unwrap(), "uc-modulus", "--seed", "7"],
        ] {
            let (code, out) = run_cli(&args);
            if code != 0 {
                return Err(format!("{args:?} exited {code}"));
            }
            bytes.extend(out);
        }
        bytes.extend(std::fs::read(w).map_err(|e| e.to_string())?);
        outputs.push(bytes);
    }
    if outputs[0] == outputs[1] {
        Ok(format!("{} bytes identical across runs", outputs[0].len()))
    } else {
        Err("machine output differs between runs".into())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("numeric Legendre transform of t^p/p", c1_legendre),
        ("biconjugation", c2_biconjugate),
        ("inverse product bounds", c3_inverse_product),
        ("Luxemburg/Orlicz norm equivalence", c4_norm_equivalence),
        ("Luxemburg norm against L^p", c5_luxemburg_lp),
        ("Δ₂ table", c6_delta2_table),
        ("geometric equivalences", c7_equivalences),
        ("Volterra norm on L²", c8_volterra),
        ("non-Δ₂ witness", c9_non_delta2),
        ("ℓ^∞ sandwich", c10_linf),
        ("ℓ¹ sandwich", c11_l1),
        ("UC failure pairs", c12_uc_pairs),
        ("UC modulus", c13_modulus),
        ("deterministic machine output", c14_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str()) || id.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{id} {tag}  {name}: {detail} ({:.1?})", start.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
