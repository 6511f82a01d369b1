//! Reference norms on `(0,1)^d`, `d ∈ {1, 2}`: the difference characterization
//! of `H^s_r` and plain `L_r` norms, by quadrature on black-box functions.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Exponents, difference order and quadrature resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub s: f64,
    pub r: f64,
    /// Inner exponent; `f64::INFINITY` selects a maximum over the h-nodes.
    pub v: f64,
    pub n: u32,
    pub d: u32,
    /// Outer midpoint grid has `2^grid_level` points per dimension.
    pub grid_level: u32,
    /// `t` ranges over the shells `[2^{-i-1}, 2^{-i}]`, `i < t_levels`.
    pub t_levels: u32,
    pub t_nodes: u32,
    pub h_nodes: u32,
}

impl OracleParams {
    /// Defaults: `v = 1`, smallest `N > s`, resolutions depending on `d`.
    pub fn new(s: f64, r: f64, d: u32) -> Result<Self> {
        let p = OracleParams {
            s,
            r,
            v: 1.0,
            n: s.floor() as u32 + 1,
            d,
            grid_level: if d == 1 { 9 } else { 5 },
            t_levels: if d == 1 { 30 } else { 16 },
            t_nodes: if d == 1 { 4 } else { 2 },
            h_nodes: if d == 1 { 32 } else { 12 },
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `d · max(0, 1/r - 1/v, 1/2 - 1/v) < s < N`, `1 ≤ v ≤ ∞`, `d ∈ {1, 2}`.
    pub fn validate(&self) -> Result<()> {
        if self.d != 1 && self.d != 2 {
            return Err(QuarkletError::InvalidParams(format!("d = {} violates d ∈ {{1, 2}}", self.d)));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(QuarkletError::InvalidParams(format!("r = {} violates 1 < r < ∞", self.r)));
        }
        if !(self.v >= 1.0) {
            return Err(QuarkletError::InvalidParams(format!("v = {} violates 1 ≤ v ≤ ∞", self.v)));
        }
        let inv_v = if self.v.is_infinite() { 0.0 } else { 1.0 / self.v };
        let lower = self.d as f64 * (1.0 / self.r - inv_v).max(0.5 - inv_v).max(0.0);
        if !(self.s > lower) {
            return Err(QuarkletError::InvalidParams(format!(
                "s = {} violates d · max(0, 1/r - 1/v, 1/2 - 1/v) = {lower} < s",
                self.s
            )));
        }
        if !(self.s < self.n as f64) {
            return Err(QuarkletError::InvalidParams(format!(
                "s = {} violates s < N = {}",
                self.s, self.n
            )));
        }
        if self.h_nodes == 0 || self.t_nodes == 0 || self.t_levels == 0 {
            return Err(QuarkletError::InvalidParams("quadrature resolutions must be positive".into()));
        }
        Ok(())
    }
}

fn binomials(n: u32) -> Vec<f64> {
    let mut c = vec![1.0];
    for k in 0..n {
        let next = c[k as usize] * (n - k) as f64 / (k + 1) as f64;
        c.push(next);
    }
    c
}

/// `Δ^N_h f(x) = Σ_n (-1)^{N-n} C(N,n) f(x + n h)`; every `x + n h` must lie in `[0,1]^d`.
pub fn difference<F: Fn(&[f64]) -> f64>(f: F, n: u32, x: &[f64], h: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), h.len(), "point and step dimensions differ");
    let mut pt = vec![0.0; x.len()];
    for tau in 0..=n {
        for (i, p) in pt.iter_mut().enumerate() {
            *p = x[i] + tau as f64 * h[i];
        }
        if pt.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(QuarkletError::Domain(format!("{pt:?}")));
        }
    }
    let c = binomials(n);
    let mut s = 0.0;
    for tau in 0..=n {
        for (i, p) in pt.iter_mut().enumerate() {
            *p = x[i] + tau as f64 * h[i];
        }
        let sign = if (n - tau).is_multiple_of(2) { 1.0 } else { -1.0 };
        s += sign * c[tau as usize] * f(&pt);
    }
    Ok(s)
}

/// `t`-nodes and weights for `∫_0^1 … dt / t` (midpoint rule in `ln t` per shell).
fn t_rule(p: &OracleParams) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity((p.t_levels * p.t_nodes) as usize);
    for i in 0..p.t_levels {
        let a = 2f64.powi(-(i as i32) - 1);
        for q in 0..p.t_nodes {
            let t = a * 2f64.powf((q as f64 + 0.5) / p.t_nodes as f64);
            out.push((t, LN_2 / p.t_nodes as f64));
        }
    }
    out
}

fn midpoints(level: u32) -> Vec<f64> {
    let n = 1usize << level;
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn combine_inner(acc: f64, value: f64, v: f64) -> f64 {
    if v.is_infinite() {
        acc.max(value.abs())
    } else {
        acc + value.abs().powf(v)
    }
}

/// Square function `G(x)² = ∫ t^{-2s} (t^{-d} ∫_{V^N(x,t)} |Δ^N_h f(x)|^v dh)^{2/v} dt/t` in 1D.
fn square_function_1d(f: &(dyn Fn(f64) -> f64 + Sync), p: &OracleParams, coeff: &[f64], trule: &[(f64, f64)], x: f64) -> f64 {
    let nn = p.n as f64;
    let mut total = 0.0;
    for &(t, wt) in trule {
        let lo = (-t).max(-x / nn);
        let hi = t.min((1.0 - x) / nn);
        if hi <= lo {
            continue;
        }
        let dh = (hi - lo) / p.h_nodes as f64;
        let mut acc = 0.0;
        for q in 0..p.h_nodes {
            let h = lo + (q as f64 + 0.5) * dh;
            let mut diff = 0.0;
            for (tau, c) in coeff.iter().enumerate() {
                diff += c * f(x + tau as f64 * h);
            }
            acc = combine_inner(acc, diff, p.v);
        }
        let mean = if p.v.is_infinite() {
            acc
        } else {
            (acc * dh / t).powf(1.0 / p.v)
        };
        total += wt * t.powf(-2.0 * p.s) * mean * mean;
    }
    total
}

fn square_function_2d(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    p: &OracleParams,
    coeff: &[f64],
    trule: &[(f64, f64)],
    x: (f64, f64),
) -> f64 {
    let nn = p.n as f64;
    let mut total = 0.0;
    for &(t, wt) in trule {
        let (lo1, hi1) = ((-t).max(-x.0 / nn), t.min((1.0 - x.0) / nn));
        let (lo2, hi2) = ((-t).max(-x.1 / nn), t.min((1.0 - x.1) / nn));
        if hi1 <= lo1 || hi2 <= lo2 {
            continue;
        }
        let d1 = (hi1 - lo1) / p.h_nodes as f64;
        let d2 = (hi2 - lo2) / p.h_nodes as f64;
        let mut acc = 0.0;
        for a in 0..p.h_nodes {
            let h1 = lo1 + (a as f64 + 0.5) * d1;
            for b in 0..p.h_nodes {
                let h2 = lo2 + (b as f64 + 0.5) * d2;
                if h1 * h1 + h2 * h2 >= t * t {
                    continue;
                }
                let mut diff = 0.0;
                for (tau, c) in coeff.iter().enumerate() {
                    let tf = tau as f64;
                    diff += c * f(x.0 + tf * h1, x.1 + tf * h2);
                }
                acc = combine_inner(acc, diff, p.v);
            }
        }
        let mean = if p.v.is_infinite() {
            acc
        } else {
            (acc * d1 * d2 / (t * t)).powf(1.0 / p.v)
        };
        total += wt * t.powf(-2.0 * p.s) * mean * mean;
    }
    total
}

fn signed_binomials(n: u32) -> Vec<f64> {
    binomials(n)
        .into_iter()
        .enumerate()
        .map(|(tau, c)| if (n as usize - tau).is_multiple_of(2) { c } else { -c })
        .collect()
}

/// `‖f | L_r‖ + ‖G | L_r‖` for a univariate black box.
pub fn hsr_norm_oracle_1d(f: &(dyn Fn(f64) -> f64 + Sync), p: &OracleParams) -> Result<f64> {
    p.validate()?;
    if p.d != 1 {
        return Err(QuarkletError::InvalidParams(format!("d = {} violates d = 1 for a univariate function", p.d)));
    }
    let coeff = signed_binomials(p.n);
    let trule = t_rule(p);
    let xs = midpoints(p.grid_level);
    let w = 1.0 / xs.len() as f64;
    // collected before summing so the result does not depend on scheduling
    let (lr, g): (f64, f64) = xs
        .par_iter()
        .map(|&x| {
            let g2 = square_function_1d(f, p, &coeff, &trule, x);
            (w * f(x).abs().powf(p.r), w * g2.powf(p.r / 2.0))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(lr.powf(1.0 / p.r) + g.powf(1.0 / p.r))
}

/// Bivariate counterpart of [`hsr_norm_oracle_1d`] with `V^N(x,t)` a disc cut to the square.
pub fn hsr_norm_oracle_2d(f: &(dyn Fn(f64, f64) -> f64 + Sync), p: &OracleParams) -> Result<f64> {
    p.validate()?;
    if p.d != 2 {
        return Err(QuarkletError::InvalidParams(format!("d = {} violates d = 2 for a bivariate function", p.d)));
    }
    let coeff = signed_binomials(p.n);
    let trule = t_rule(p);
    let xs = midpoints(p.grid_level);
    let w = 1.0 / (xs.len() * xs.len()) as f64;
    let pts: Vec<(f64, f64)> = xs.iter().flat_map(|&a| xs.iter().map(move |&b| (a, b))).collect();
    let (lr, g): (f64, f64) = pts
        .par_iter()
        .map(|&x| {
            let g2 = square_function_2d(f, p, &coeff, &trule, x);
            (w * f(x.0, x.1).abs().powf(p.r), w * g2.powf(p.r / 2.0))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(lr.powf(1.0 / p.r) + g.powf(1.0 / p.r))
}

/// A registry function of one or two variables.
#[derive(Clone)]
pub enum TestFunction {
    D1(Fn1),
    D2(Fn2),
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestFunction::D1(_) => write!(f, "TestFunction::D1"),
            TestFunction::D2(_) => write!(f, "TestFunction::D2"),
        }
    }
}

impl TestFunction {
    pub fn dim(&self) -> u32 {
        match self {
            TestFunction::D1(_) => 1,
            TestFunction::D2(_) => 2,
        }
    }
}

/// `‖f | H^s_r‖` by the difference characterization, dispatching on dimension.
pub fn hsr_norm_oracle(f: &TestFunction, p: &OracleParams) -> Result<f64> {
    match f {
        TestFunction::D1(g) => hsr_norm_oracle_1d(g.as_ref(), p),
        TestFunction::D2(g) => hsr_norm_oracle_2d(g.as_ref(), p),
    }
}

/// `‖f | L_r((0,1)^d)‖` by the tensor midpoint rule on `2^grid_level` points per dimension.
pub fn lr_norm_oracle(f: &TestFunction, r: f64, grid_level: u32) -> f64 {
    let xs = midpoints(grid_level);
    let n = xs.len() as f64;
    let s: f64 = match f {
        TestFunction::D1(g) => xs.iter().map(|&x| g(x).abs().powf(r)).sum::<f64>() / n,
        TestFunction::D2(g) => xs
            .par_iter()
            .map(|&x| xs.iter().map(|&y| g(x, y).abs().powf(r)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            / (n * n),
    };
    s.powf(1.0 / r)
}

/// Univariate registry entry with its boundary behaviour.
#[derive(Clone)]
pub struct NamedFunction {
    pub name: String,
    pub f: Fn1,
    /// `f(0) = 0` and `f(1) = 0`.
    pub vanishes_at: (bool, bool),
}

/// Univariate registry: `sinpi`, `cospi`, `bubble`, `xalpha:α`, `const`, `linear`.
pub fn registry_1d(name: &str) -> Result<NamedFunction> {
    let name = name.trim();
    let (f, van): (Fn1, (bool, bool)) = match name {
        "sinpi" => (Arc::new(|x: f64| (PI * x).sin()), (true, true)),
        "cospi" => (Arc::new(|x: f64| (PI * x).cos()), (false, false)),
        "bubble" => (Arc::new(|x: f64| x * (1.0 - x)), (true, true)),
        "const" => (Arc::new(|_x: f64| 1.0), (false, false)),
        "linear" => (Arc::new(|x: f64| x), (true, false)),
        _ => {
            if let Some(a) = name.strip_prefix("xalpha:") {
                let alpha: f64 = a
                    .parse()
                    .map_err(|_| QuarkletError::UnknownFunction(name.to_string()))?;
                if !(alpha > 0.0) {
                    return Err(QuarkletError::InvalidParams(format!("α = {alpha} violates α > 0")));
                }
                (Arc::new(move |x: f64| x.max(0.0).powf(alpha) * (1.0 - x)), (true, true))
            } else {
                return Err(QuarkletError::UnknownFunction(name.to_string()));
            }
        }
    };
    Ok(NamedFunction {
        name: name.to_string(),
        f,
        vanishes_at: van,
    })
}

/// Registry lookup: a univariate name, or `a⊗b` / `a*b` for the tensor product `a(x) b(y)`.
pub fn registry(name: &str) -> Result<TestFunction> {
    let parts: Vec<&str> = name.split(['⊗', '*']).collect();
    match parts.as_slice() {
        [one] => Ok(TestFunction::D1(registry_1d(one)?.f)),
        [a, b] => {
            let (fa, fb) = (registry_1d(a)?.f, registry_1d(b)?.f);
            Ok(TestFunction::D2(Arc::new(move |x, y| fa(x) * fb(y))))
        }
        _ => Err(QuarkletError::UnknownFunction(name.to_string())),
    }
}

/// Boundary behaviour `((f(0)=0, f(1)=0) in x, (…) in y)`; the second pair is
/// `None` for univariate names.
pub fn registry_vanishing(name: &str) -> Result<((bool, bool), Option<(bool, bool)>)> {
    let parts: Vec<&str> = name.split(['⊗', '*']).collect();
    match parts.as_slice() {
        [one] => Ok((registry_1d(one)?.vanishes_at, None)),
        [a, b] => Ok((registry_1d(a)?.vanishes_at, Some(registry_1d(b)?.vanishes_at))),
        _ => Err(QuarkletError::UnknownFunction(name.to_string())),
    }
}
