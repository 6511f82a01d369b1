//! Acceptance criteria 1–10. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.
#![allow(clippy::type_complexity)]

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use quarklet_core::error::QuarkletError;
use quarklet_core::expansion::{quarklet_norm_estimate, Analyzer, TruncationSpec};
use quarklet_core::interval::{delta_full, schoenberg_bspline, BoundaryCondition, ElementKind, IntervalSystem, QuarkletIndex, Side};
use quarklet_core::oracle::{hsr_norm_oracle_1d, hsr_norm_oracle_2d, lr_norm_oracle, registry, OracleParams};
use quarklet_core::sequence_norms::{seq_norm_1d, weight, CoefficientField, NormParams};
use quarklet_core::shift_invariant::wavelet_biorthogonality_error;
use quarklet_core::spline::{cardinal_bspline, SplineParams};
use quarklet_core::tensor::{bivariate_norm_estimate, g_r_objective, BivariateNormParams, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn system(m: usize, mt: usize, sl: u32, sr: u32) -> IntervalSystem {
    IntervalSystem::new(SplineParams::new(m, mt).unwrap(), BoundaryCondition::new(sl, sr)).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let xs: Vec<f64> = (0..257).map(|i| i as f64 / 256.0).collect();
    for m in 2..=5usize {
        let n = cardinal_bspline(m).unwrap();
        let lower = cardinal_bspline(m - 1).ok();
        for &x in &xs {
            let pu: f64 = (-(m as i64)..=1).map(|k| n.eval(x - k as f64)).sum();
            worst = worst.max((pu - 1.0).abs());
        }
        if let Some(l) = lower {
            let dl = n.derivative();
            for i in 0..=400 {
                let x = -0.5 + (m as f64 + 1.0) * i as f64 / 400.0;
                let rec = (x * l.eval(x) + (m as f64 - x) * l.eval(x - 1.0)) / (m as f64 - 1.0);
                worst = worst.max((rec - n.eval(x)).abs());
                if m >= 3 {
                    worst = worst.max((dl.eval(x) - (l.eval(x) - l.eval(x - 1.0))).abs());
                }
            }
        }
        let p = SplineParams::new(m, m).unwrap();
        for j in p.j0..=p.j0 + 2 {
            let bs: Vec<_> = delta_full(&p, j).map(|k| (k, schoenberg_bspline(&p, j, k).unwrap())).collect();
            let n_j = 1i64 << j;
            for &x in &xs {
                let s: f64 = bs.iter().map(|(_, b)| if x == 1.0 { b.eval_left(x) } else { b.eval(x) }).sum();
                worst = worst.max((s - 1.0).abs());
            }
            for (k, b) in &bs {
                let r = schoenberg_bspline(&p, j, n_j - m as i64 - k).unwrap();
                for i in 0..64 {
                    let x = (i as f64 + 0.37) / 64.0;
                    worst = worst.max((b.eval(x) - r.eval(1.0 - x)).abs());
                }
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e} ≤ 1e-12"))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut min_kernel = usize::MAX;
    let mut count = 0usize;
    for (m, mt) in [(2, 2), (2, 4), (3, 3), (3, 5)] {
        for (sl, sr) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let s = system(m, mt, sl, sr);
            for j in [s.j0(), s.j0() + 1] {
                for p in 0..=6u32 {
                    for k in s.nabla(j).unwrap() {
                        let lambda = QuarkletIndex::new(p, j, k);
                        let e = s.element(&lambda).unwrap();
                        let norm = e.l2_norm();
                        for q in 0..mt as u32 {
                            worst = worst.max(e.moment(q).abs() / norm);
                        }
                        if let ElementKind::Boundary(side) = s.kind(&lambda).unwrap() {
                            let kk = match side {
                                Side::Left => k,
                                Side::Right => (1i64 << j) - 1 - k,
                            };
                            min_kernel = min_kernel.min(s.boundary_kernel_dimension(p, j, side, kk).unwrap());
                        }
                        count += 1;
                    }
                }
            }
        }
    }
    check(
        worst <= 1e-10 && min_kernel >= 1,
        format!("{count} elements, max |moment|/‖ψ‖ = {worst:.2e} ≤ 1e-10, min kernel dimension {min_kernel} ≥ 1"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (m, mt) in [(2, 4), (3, 5)] {
        let p = SplineParams::new(m, mt).unwrap();
        match wavelet_biorthogonality_error(&p, 12, 3) {
            Ok(e) => {
                worst = worst.max(e);
                parts.push(format!("({m},{mt}) {e:.2e}"));
            }
            Err(e) => return Err(format!("({m},{mt}): {e}")),
        }
    }
    check(worst <= 1e-5, format!("{} ≤ 1e-5", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    for (m, mt) in [(2, 2), (3, 3), (2, 4), (3, 5), (4, 4)] {
        for (sl, sr) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let s = system(m, mt, sl, sr);
            for j in s.j0()..=s.j0() + 4 {
                let expect = (1i64 << j) - 1 + m as i64 - (sl > 0) as i64 - (sr > 0) as i64;
                if s.delta(j).count() as i64 != expect {
                    return Err(format!("m={m}, σ=({sl},{sr}), j={j}: {} ≠ {expect}", s.delta(j).count()));
                }
                checked += 1;
            }
        }
    }
    check(true, format!("{checked} cardinalities exact"))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for r in [1.5, 2.0, 3.0] {
        let np = NormParams::new(0.7, r, 1.5, 3).unwrap();
        for (p, j, k) in [(0, 3, 2), (2, 5, 17), (5, 7, 100)] {
            let f = CoefficientField::from_entries([(QuarkletIndex::new(p, j, k), 1.0)]);
            let expect = weight(p, j, &np).sqrt() * 2f64.powf(-j as f64 / r);
            worst = worst.max((seq_norm_1d(&f, &np) - expect).abs() / expect);
        }
    }
    let zero = NormParams::new(0.0, 2.0, 1.5, 3).unwrap();
    let exact = (0..6u32).all(|p| (1..8).all(|j| weight(p, j, &zero) == (p as f64 + 1.0).powf(3.0) * 2f64.powi(j)));
    check(worst <= 1e-12 && exact, format!("closed-form relative error {worst:.2e} ≤ 1e-12, s = 0 weight exact: {exact}"))
}

fn criterion_6() -> Outcome {
    let (m, mt) = (3, 3);
    let sigmas = [(0u32, 0u32), (1, 1)];
    let j0 = SplineParams::new(m, mt).unwrap().j0;
    let js: Vec<i32> = (j0 + 1..=j0 + 4).collect();
    let analyzers: Vec<Vec<(IntervalSystem, Analyzer)>> = sigmas
        .iter()
        .map(|&(sl, sr)| {
            js.iter()
                .map(|&j| {
                    let s = system(m, mt, sl, sr);
                    let a = Analyzer::new(&s, &TruncationSpec::new(j, 0)).unwrap();
                    (s, a)
                })
                .collect()
        })
        .collect();
    let funcs: [(&str, fn(f64) -> f64); 2] = [("sin(πx)", |x| (PI * x).sin()), ("x(1-x)", |x| x * (1.0 - x))];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (name, f) in funcs {
        for s in [0.4, 0.8, 1.2] {
            for r in [1.5, 2.0, 3.0] {
                let si = if BoundaryCondition::max_order(s, r, 1) >= 1 { 1 } else { 0 };
                let oracle = hsr_norm_oracle_1d(&f, &OracleParams::new(s, r, 1).unwrap()).map_err(|e| e.to_string())?;
                let np = NormParams::new(s, r, 1.5, m).unwrap();
                let ratios: Vec<f64> = analyzers[si]
                    .iter()
                    .map(|(_, a)| seq_norm_1d(&a.analyze(f), &np) / oracle)
                    .collect();
                let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
                let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
                worst = worst.max(max / min);
                lines.push(format!("{name} s={s} r={r} σ={:?}: ratios {min:.6}..{max:.6}", sigmas[si]));
            }
        }
    }
    // the public estimator agrees with the cached analyzers
    let (s, _) = &analyzers[1][0];
    let direct = quarklet_norm_estimate(s, funcs[0].1, &TruncationSpec::new(js[0], 0), &NormParams::new(0.8, 2.0, 1.5, m).unwrap())
        .map_err(|e| e.to_string())?;
    let cached = seq_norm_1d(&analyzers[1][0].1.analyze(funcs[0].1), &NormParams::new(0.8, 2.0, 1.5, m).unwrap());
    log_lines(&lines);
    check(
        worst <= 4.0 && (direct - cached).abs() <= 1e-12 * cached,
        format!("worst max/min ratio {worst:.6} ≤ 4 over 18 cells, J = {}..{}", js[0], js[js.len() - 1]),
    )
}

fn log_lines(lines: &[String]) {
    if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
        for l in lines {
            println!("    {l}");
        }
    }
}

fn criterion_7() -> Outcome {
    let pairs = [("sinpi", "cospi"), ("bubble", "sinpi"), ("linear", "const"), ("xalpha:0.5", "bubble"), ("cospi", "linear")];
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let tensor = registry(&format!("{a}⊗{b}")).unwrap();
        let (fa, fb) = (registry(a).unwrap(), registry(b).unwrap());
        for r in [1.5, 2.0, 3.0] {
            let lhs = lr_norm_oracle(&tensor, r, 10);
            let rhs = lr_norm_oracle(&fa, r, 10) * lr_norm_oracle(&fb, r, 10);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    check(worst <= 1e-4, format!("max |‖u⊗v‖ - ‖u‖‖v‖| = {worst:.2e} ≤ 1e-4"))
}

/// Midpoint samples on `2^level` points with the weighted `L_r` norm.
fn lr_sampled(v: &[f64], r: f64) -> f64 {
    (v.iter().map(|x| x.abs().powf(r)).sum::<f64>() / v.len() as f64).powf(1.0 / r)
}

fn criterion_8() -> Outcome {
    let n = 256;
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let sample = |f: &dyn Fn(f64) -> f64| xs.iter().map(|&x| f(x)).collect::<Vec<f64>>();
    let f = sample(&|x| (PI * x).sin());
    let g = sample(&|x| x * x - 0.3);
    let mut details = Vec::new();
    let mut ok = true;
    for r in [1.5, 2.0, 3.0] {
        let one = g_r_objective(&[(f.clone(), g.clone())], |v: &Vec<f64>| lr_sampled(v, r), |v: &Vec<f64>| lr_sampled(v, r), r).unwrap();
        let e = (one - lr_sampled(&f, r) * lr_sampled(&g, r)).abs();
        ok &= e <= 1e-10;
        details.push(format!("rank-1 r={r} {e:.1e}"));
    }
    let two = g_r_objective(
        &[(f.clone(), g.clone()), (f.clone(), g.clone())],
        |v: &Vec<f64>| lr_sampled(v, 2.0),
        |v: &Vec<f64>| lr_sampled(v, 2.0),
        2.0,
    )
    .unwrap();
    let e2 = (two - 2.0 * lr_sampled(&f, 2.0) * lr_sampled(&g, 2.0)).abs();
    ok &= e2 <= 1e-8;
    details.push(format!("two identical terms {e2:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut min_margin = f64::INFINITY;
    for trial in 0..20 {
        let rank = 1 + trial % 3;
        let r = [1.5, 2.0, 3.0][trial % 3];
        let terms: Vec<(Vec<f64>, Vec<f64>)> = (0..rank)
            .map(|_| {
                let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let u = sample(&|x| c[0] + c[1] * x + c[2] * (PI * x).sin() + c[3] * (3.0 * PI * x).cos());
                let v = sample(&|y| d[0] + d[1] * y * y + d[2] * (2.0 * PI * y).sin() + d[3] * y.sqrt());
                (u, v)
            })
            .collect();
        let obj = g_r_objective(&terms, |v: &Vec<f64>| lr_sampled(v, r), |v: &Vec<f64>| lr_sampled(v, r), r).unwrap();
        let mut sum = 0.0;
        for i in 0..n {
            for k in 0..n {
                let h: f64 = terms.iter().map(|(u, v)| u[i] * v[k]).sum();
                sum += h.abs().powf(r);
            }
        }
        let lr = (sum / (n * n) as f64).powf(1.0 / r);
        min_margin = min_margin.min(obj / lr);
    }
    ok &= min_margin >= 1.0 - 1e-9;
    details.push(format!("min g_r / ‖Σ u⊗v‖_r over 20 = {min_margin:.4} ≥ 1"));
    check(ok, details.join(", "))
}

fn criterion_9() -> Outcome {
    let (m, mt) = (3, 3);
    let s1 = system(m, mt, 0, 0);
    let j0 = s1.j0();
    let f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(|x, y| (PI * x).sin() * (PI * y).sin());
    let params = BivariateNormParams::new(0.5, 2.0, 1.5, 1.5, m).unwrap();
    let oracle = hsr_norm_oracle_2d(f.as_ref(), &OracleParams::new(0.5, 2.0, 2).unwrap()).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    let mut monotone = true;
    let mut lines = Vec::new();
    for j in j0 + 1..=j0 + 3 {
        let mut prev = f64::INFINITY;
        for rank in 1..=4 {
            let est = bivariate_norm_estimate(f.as_ref(), &s1, &s1, &TruncationSpec::new(j, 0), &params, rank, Mode::Exploratory)
                .map_err(|e| e.to_string())?;
            monotone &= est.estimate <= prev * (1.0 + 1e-12);
            prev = est.estimate;
            ratios.push(est.estimate / oracle);
            lines.push(format!("J={j} R={rank} estimate {:.6} ratio {:.4}", est.estimate, est.estimate / oracle));
        }
    }
    log_lines(&lines);
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    check(
        max / min <= 4.0 && monotone,
        format!("ratios {min:.6}..{max:.6}, max/min {:.6} ≤ 4 over J = {}..{}, R ≤ 4; nonincreasing in R: {monotone}", max / min, j0 + 1, j0 + 3),
    )
}

fn criterion_10() -> Outcome {
    let mut msgs = Vec::new();
    let e = NormParams::new(2.0, 2.0, 1.5, 3).unwrap_err().to_string();
    msgs.push(("0 < s < m - 1", e));
    let e = SplineParams::new(2, 3).unwrap_err().to_string();
    msgs.push(("m + m̃ ∈ 2N", e));
    let s = system(3, 3, 0, 0);
    let e = bivariate_norm_estimate(
        &|x, y| x * y,
        &s,
        &s,
        &TruncationSpec::new(s.j0(), 0),
        &BivariateNormParams::new(0.5, 2.0, 1.5, 1.5, 3).unwrap(),
        1,
        Mode::Strict,
    )
    .unwrap_err();
    let strict_kind = matches!(e, QuarkletError::Hypothesis(_));
    msgs.push(("m̃ > 5m + 12", e.to_string()));
    let missing: Vec<&str> = msgs.iter().filter(|(k, m)| !m.contains(k)).map(|(k, _)| *k).collect();
    check(
        missing.is_empty() && strict_kind,
        if missing.is_empty() {
            "all three refusals name their inequality".into()
        } else {
            format!("missing {missing:?}")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exact spline algebra", criterion_1),
        ("vanishing moments", criterion_2),
        ("biorthogonality", criterion_3),
        ("index bookkeeping", criterion_4),
        ("sequence-norm closed forms", criterion_5),
        ("1D norm equivalence", criterion_6),
        ("Fubini rank-1 identity", criterion_7),
        ("g_r objective", criterion_8),
        ("2D norm equivalence", criterion_9),
        ("negative controls", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let t = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {d} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
