//! The four subcommands as library functions.

use std::collections::BTreeMap;

use quarklet_core::expansion::{condition_number, gram_matrix, Analyzer, TruncationSpec, MAX_CONDITION};
use quarklet_core::interval::{delta_full, schoenberg_bspline, BoundaryCondition, ElementKind, QuarkletIndex, Side};
use quarklet_core::oracle::{hsr_norm_oracle_1d, hsr_norm_oracle_2d, registry, registry_1d, registry_vanishing, OracleParams, TestFunction};
use quarklet_core::sequence_norms::{seq_norm_1d, weight, CoefficientField, NormParams};
use quarklet_core::shift_invariant::{cdf_filters, two_scale_residual, FilterPair};
use quarklet_core::spline::cardinal_bspline;
use quarklet_core::tensor::{check_bivariate_hypotheses, check_dual_order, estimate_from_coefficients, g_r_objective, tensor_coefficients, BivariateNormParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{num, Table};
use crate::{CliError, ExperimentConfig};

/// Levels past `j0` covered by default.
pub const DEFAULT_EXTRA_1D: i32 = 4;
pub const DEFAULT_EXTRA_2D: i32 = 3;

/// System summary; the flag is false if an index-set cardinality disagrees
/// with `2^j - 1 + m - sgn σ^l - sgn σ^r`.
pub fn build(config: &ExperimentConfig, with_elements: bool) -> Result<(serde_json::Value, bool), CliError> {
    let sys = config.system(config.sigma)?;
    let m = sys.params().m as i64;
    let sig = sys.sigma();
    let jmax = config.jmax.unwrap_or(sys.j0() + 2);
    if jmax < sys.j0() - 1 {
        return Err(CliError::Config(format!("jmax = {jmax} violates jmax ≥ j0 - 1 = {}", sys.j0() - 1)));
    }
    let mut ok = true;
    let mut levels = Vec::new();
    for j in sys.j0()..=jmax.max(sys.j0()) {
        let delta = sys.delta(j).count() as i64;
        let expected = (1i64 << j) - 1 + m - sig.sgn_l() - sig.sgn_r();
        ok &= delta == expected;
        levels.push(json!({
            "j": j,
            "delta": delta,
            "delta_expected": expected,
            "nabla": sys.nabla(j)?.count(),
        }));
    }
    let indices = sys.indices(config.pmax, jmax);
    let mut per_level: BTreeMap<i32, usize> = BTreeMap::new();
    for l in &indices {
        *per_level.entry(l.j).or_default() += 1;
    }
    let mut doc = json!({
        "m": sys.params().m,
        "m_tilde": sys.params().m_tilde,
        "j0": sys.j0(),
        "sigma": [sig.sigma_l, sig.sigma_r],
        "p_max": config.pmax,
        "j_max": jmax,
        "levels": levels,
        "elements_per_level": per_level.iter().map(|(j, n)| json!({"j": j, "count": n})).collect::<Vec<_>>(),
        "total_elements": indices.len(),
        "cardinality_ok": ok,
    });
    if with_elements {
        doc["system"] = sys.to_json(config.pmax, jmax)?;
    }
    Ok((doc, ok))
}

#[derive(Clone, Debug, Serialize)]
pub struct Invariant {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `measured ≤ bound` unless stated otherwise.
    pub relation: &'static str,
    pub pass: bool,
}

impl Invariant {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Invariant {
            name: name.into(),
            measured,
            bound,
            relation: "<=",
            pass: measured <= bound,
        }
    }

    fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Invariant {
            name: name.into(),
            measured,
            bound,
            relation: ">=",
            pass: measured >= bound,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub seed: u64,
    pub corrupted_filter: bool,
    pub invariants: Vec<Invariant>,
    pub pass: bool,
}

/// Filters with one wavelet coefficient perturbed, as a negative control.
pub fn corrupt(filters: &FilterPair) -> FilterPair {
    let mut f = filters.clone();
    let i = f.wavelet.coeffs.len() / 2;
    f.wavelet.coeffs[i] += 1e-3;
    f
}

/// Invariant suite over every module, with the configured system.
pub fn verify(config: &ExperimentConfig, corrupt_filter: bool) -> Result<VerifyReport, CliError> {
    let params = config.spline_params()?;
    let mut sys = config.system(config.sigma)?;
    if corrupt_filter {
        let f = corrupt(sys.filters());
        sys = sys.with_filters(f);
    }
    let (m, mt) = (params.m, params.m_tilde);
    let j0 = sys.j0();
    let p_max = config.pmax.max(2);
    let mut inv = Vec::new();

    // splines
    let n = cardinal_bspline(m)?;
    let pu = (0..=128)
        .map(|i| i as f64 / 128.0)
        .map(|x| ((-(m as i64)..=1).map(|k| n.eval(x - k as f64)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    inv.push(Invariant::at_most("partition of unity, cardinal B-spline", pu, 1e-12));
    let bs = delta_full(&params, j0)
        .map(|k| schoenberg_bspline(&params, j0, k))
        .collect::<Result<Vec<_>, _>>()?;
    let spu = (0..=128)
        .map(|i| i as f64 / 128.0)
        .map(|x| (bs.iter().map(|b| if x == 1.0 { b.eval_left(x) } else { b.eval(x) }).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    inv.push(Invariant::at_most("partition of unity, Schoenberg B-splines at j0", spu, 1e-12));

    // filters
    let filters = sys.filters().clone();
    inv.push(Invariant::at_most("two-scale relation of the generator", two_scale_residual(&params), 1e-12));
    inv.push(Invariant::at_most("filter biorthogonality defect", filters.biorthogonality_defect(), 1e-12));
    let reference = cdf_filters(&params)?;
    let scale: f64 = reference.wavelet.coeffs.iter().map(|c| c.abs()).sum();
    let mask_moment = (0..mt as u32)
        .map(|q| filters.wavelet.discrete_moment(q).abs() / scale)
        .fold(0.0, f64::max);
    inv.push(Invariant::at_most("wavelet mask vanishing moments", mask_moment, 1e-12));

    // elements
    let mut moment = 0.0f64;
    let mut kernel = usize::MAX;
    let mut bc = 0.0f64;
    for p in 0..=p_max {
        for k in sys.nabla(j0)? {
            let lambda = QuarkletIndex::new(p, j0, k);
            let e = sys.element(&lambda)?;
            let norm = e.l2_norm();
            for q in 0..mt as u32 {
                moment = moment.max(e.moment(q).abs() / norm);
            }
            if let ElementKind::Boundary(side) = sys.kind(&lambda)? {
                let kk = match side {
                    Side::Left => k,
                    Side::Right => (1i64 << j0) - 1 - k,
                };
                kernel = kernel.min(sys.boundary_kernel_dimension(p, j0, side, kk)?);
            }
            if sys.sigma().sigma_l > 0 {
                bc = bc.max(e.eval(0.0).abs());
            }
            if sys.sigma().sigma_r > 0 {
                bc = bc.max(e.eval_left(1.0).abs());
            }
        }
    }
    inv.push(Invariant::at_most("element vanishing moments (relative)", moment, 1e-10));
    inv.push(Invariant::at_least("boundary moment-matrix kernel dimension", kernel as f64, 1.0));
    inv.push(Invariant::at_most("Dirichlet boundary values", bc, 1e-12));

    let mut card = 0.0;
    for j in j0..=j0 + 4 {
        let expected = (1i64 << j) - 1 + m as i64 - sys.sigma().sgn_l() - sys.sigma().sgn_r();
        card += (sys.delta(j).count() as i64 - expected).abs() as f64;
    }
    inv.push(Invariant::at_most("index-set cardinality mismatches", card, 0.0));

    // sequence norms
    let np = NormParams::new(0.5_f64.min(m as f64 - 1.5).max(0.1), 2.0, config.delta1, m)?;
    let mut closed = 0.0f64;
    for (p, j, k) in [(0u32, j0, 1i64), (2, j0 + 1, 3)] {
        let f = CoefficientField::from_entries([(QuarkletIndex::new(p, j, k), 1.0)]);
        let expect = weight(p, j, &np).sqrt() * 2f64.powf(-j as f64 / np.r);
        closed = closed.max((seq_norm_1d(&f, &np) - expect).abs() / expect);
    }
    inv.push(Invariant::at_most("sequence norm single-cell closed form", closed, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut homog = 0.0f64;
    for _ in 0..20 {
        let f = CoefficientField::from_entries((0..10).map(|_| {
            (
                QuarkletIndex::new(rng.gen_range(0..3), rng.gen_range(j0..j0 + 4), rng.gen_range(0..1 << j0)),
                rng.gen_range(-1.0..1.0),
            )
        }));
        let a = rng.gen_range(-5.0..5.0);
        let base = seq_norm_1d(&f, &np);
        homog = homog.max((seq_norm_1d(&f.scaled(a), &np) - a.abs() * base).abs() / base.max(1e-300));
    }
    inv.push(Invariant::at_most("sequence norm homogeneity (random)", homog, 1e-12));

    // expansion
    let spec = TruncationSpec::new(j0 + 1, 0);
    let (_, g) = gram_matrix(&sys, &spec)?;
    let cond = condition_number(&g);
    inv.push(Invariant::at_most("Gram condition number at J = j0 + 1", cond, MAX_CONDITION));
    if cond <= MAX_CONDITION {
        let an = Analyzer::new(&sys, &spec)?;
        let idx = an.indices().to_vec();
        let pick = idx[rng.gen_range(0..idx.len())];
        let e = sys.element(&pick)?;
        let c = an.analyze(|x| e.eval(x));
        let err = idx
            .iter()
            .map(|l| (c.get(l) - if *l == pick { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        inv.push(Invariant::at_most("analysis reproduces a frame element", err, 1e-9));
    }

    // crossnorm dominance on random sampled representations
    let nx = 64;
    let mut margin = f64::INFINITY;
    for _ in 0..5 {
        let r = [1.5, 2.0, 3.0][rng.gen_range(0..3)];
        let rank = rng.gen_range(1..=3);
        let terms: Vec<(Vec<f64>, Vec<f64>)> = (0..rank)
            .map(|_| {
                let u = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (u, v)
            })
            .collect();
        let lr = |v: &Vec<f64>| (v.iter().map(|x| x.abs().powf(r)).sum::<f64>() / nx as f64).powf(1.0 / r);
        let obj = g_r_objective(&terms, lr, lr, r)?;
        let mut sum = 0.0;
        for i in 0..nx {
            for k in 0..nx {
                sum += terms.iter().map(|(u, v)| u[i] * v[k]).sum::<f64>().abs().powf(r);
            }
        }
        margin = margin.min(obj / (sum / (nx * nx) as f64).powf(1.0 / r));
    }
    inv.push(Invariant::at_least("g_r crossnorm dominance ratio", margin, 1.0 - 1e-9));

    let pass = inv.iter().all(|i| i.pass);
    Ok(VerifyReport {
        config_hash: config.hash(),
        seed: config.seed,
        corrupted_filter: corrupt_filter,
        invariants: inv,
        pass,
    })
}

/// One curve of ratio against `J` per label, for the SVG chart.
pub type Series = Vec<(String, Vec<(f64, f64)>)>;

fn series_from(rows: &[(String, f64, f64)]) -> Series {
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (label, j, ratio) in rows {
        map.entry(label.clone()).or_default().push((*j, *ratio));
    }
    map.into_iter().collect()
}

fn error_cell(e: impl std::fmt::Display) -> String {
    format!("error: {e}")
}

/// Rows `(J, p_max, s, r, estimate, oracle, ratio, bc_satisfied, status)` sorted by `(J, s, r)`.
pub fn norms_1d(config: &ExperimentConfig) -> Result<(Table, Series), CliError> {
    config.validate_grids()?;
    if config.pmax != 0 {
        return Err(CliError::Config(format!(
            "P = {} violates P = 0 for the canonical wavelet representation",
            config.pmax
        )));
    }
    let name = config.function.clone().unwrap_or_else(|| "sinpi".into());
    let f = registry_1d(&name)?;
    let sys = config.system(config.sigma)?;
    let m = sys.params().m;
    if let Some(w) = check_dual_order(m, sys.params().m_tilde, config.mode)? {
        log::warn!("{w}; continuing in exploratory mode");
    }
    let (sl, sr) = config.sigma;
    let van = f.vanishes_at;
    let bc_ok = (sl == 0 || van.0) && (sr == 0 || van.1);
    let levels = config.levels(DEFAULT_EXTRA_1D)?;
    let cells: Vec<(f64, f64)> = config.s.iter().flat_map(|&s| config.r.iter().map(move |&r| (s, r))).collect();

    let fun = f.f.clone();
    let oracles: Vec<Result<f64, String>> = cells
        .par_iter()
        .map(|&(s, r)| {
            let p = OracleParams::new(s, r, 1).map_err(|e| e.to_string())?;
            hsr_norm_oracle_1d(fun.as_ref(), &p).map_err(|e| e.to_string())
        })
        .collect();
    let fields: Vec<(i32, Result<CoefficientField, String>)> = levels
        .par_iter()
        .map(|&j| {
            let c = Analyzer::new(&sys, &TruncationSpec::new(j, 0))
                .map(|a| a.analyze(|x| fun(x)))
                .map_err(|e| e.to_string());
            (j, c)
        })
        .collect();

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (j, field) in &fields {
        for (&(s, r), oracle) in cells.iter().zip(&oracles) {
            let outcome = BoundaryCondition::new(sl, sr)
                .validate_for(s, r, 1)
                .map_err(|e| e.to_string())
                .and_then(|_| NormParams::new(s, r, config.delta1, m).map_err(|e| e.to_string()))
                .and_then(|np| {
                    let c = field.as_ref().map_err(|e| e.clone())?;
                    let o = oracle.as_ref().map_err(|e| e.clone())?;
                    Ok((seq_norm_1d(c, &np), *o))
                });
            let (est, orc, ratio, status) = match outcome {
                Ok((e, o)) => (e, o, e / o, "ok".to_string()),
                Err(e) => (f64::NAN, f64::NAN, f64::NAN, error_cell(e)),
            };
            points.push((format!("s={s} r={r}"), *j as f64, ratio));
            rows.push(vec![
                j.to_string(),
                "0".into(),
                num(s),
                num(r),
                num(est),
                num(orc),
                num(ratio),
                bc_ok.to_string(),
                status,
            ]);
        }
    }
    rows.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).expect("finite keys"));
    Ok((
        Table {
            header: vec!["J", "p_max", "s", "r", "estimate", "oracle", "ratio", "bc_satisfied", "status"],
            rows,
        },
        series_from(&points),
    ))
}

fn sort_key(row: &[String]) -> Vec<f64> {
    row[..4].iter().map(|c| c.parse::<f64>().unwrap_or(f64::MAX)).collect()
}

/// Rows `(J, R, s, r, estimate, oracle, ratio, mode, status)` sorted by `(J, R, s, r)`.
pub fn norms_2d(config: &ExperimentConfig) -> Result<(Table, Series), CliError> {
    config.validate_grids()?;
    let name = config.function.clone().unwrap_or_else(|| "sinpi⊗sinpi".into());
    let TestFunction::D2(f) = registry(&name)? else {
        return Err(CliError::Config(format!("function {name:?} is univariate; use a⊗b")));
    };
    registry_vanishing(&name)?;
    let sys1 = config.system(config.sigma1)?;
    let sys2 = config.system(config.sigma2)?;
    let m = sys1.params().m;
    // refuse up front in strict mode, independent of the grids
    if let Some(w) = check_dual_order(m, sys1.params().m_tilde, config.mode)? {
        log::warn!("{w}; continuing in exploratory mode");
    }
    let levels = config.levels(DEFAULT_EXTRA_2D)?;
    let cells: Vec<(f64, f64)> = config.s.iter().flat_map(|&s| config.r.iter().map(move |&r| (s, r))).collect();

    let oracles: Vec<Result<f64, String>> = cells
        .iter()
        .map(|&(s, r)| {
            let p = OracleParams::new(s, r, 2).map_err(|e| e.to_string())?;
            hsr_norm_oracle_2d(f.as_ref(), &p).map_err(|e| e.to_string())
        })
        .collect();
    let coeffs: Vec<_> = levels
        .iter()
        .map(|&j| (j, tensor_coefficients(f.as_ref(), &sys1, &sys2, &TruncationSpec::new(j, 0))))
        .collect();

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (j, tc) in &coeffs {
        for (&(s, r), oracle) in cells.iter().zip(&oracles) {
            for rank in 1..=config.rank {
                let outcome = BivariateNormParams::new(s, r, config.delta1, config.delta2, m)
                    .and_then(|bp| {
                        let warning = check_bivariate_hypotheses(&sys1, &sys2, &bp, config.mode)?;
                        Ok((bp, warning))
                    })
                    .map_err(|e| e.to_string())
                    .and_then(|(bp, warning)| {
                        let tc = tc.as_ref().map_err(|e| e.to_string())?;
                        let o = oracle.as_ref().map_err(|e| e.clone())?;
                        let est = estimate_from_coefficients(tc, &bp, rank, config.mode, warning).map_err(|e| e.to_string())?;
                        Ok((est.estimate, *o))
                    });
                let (est, orc, ratio, status) = match outcome {
                    Ok((e, o)) => (e, o, e / o, "ok".to_string()),
                    Err(e) => (f64::NAN, f64::NAN, f64::NAN, error_cell(e)),
                };
                points.push((format!("R={rank} s={s} r={r}"), *j as f64, ratio));
                rows.push(vec![
                    j.to_string(),
                    rank.to_string(),
                    num(s),
                    num(r),
                    num(est),
                    num(orc),
                    num(ratio),
                    config.mode.to_string(),
                    status,
                ]);
            }
        }
    }
    rows.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).expect("finite keys"));
    Ok((
        Table {
            header: vec!["J", "R", "s", "r", "estimate", "oracle", "ratio", "mode", "status"],
            rows,
        },
        series_from(&points),
    ))
}
