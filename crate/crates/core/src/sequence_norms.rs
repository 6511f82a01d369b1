//! Weighted quarklet sequence norms and clamped dyadic indicators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::interval::QuarkletIndex;

/// `χ̃_{j,k}(x)`: indicator of `[k 2^{-j}, (k+1) 2^{-j})` with `k` clamped to `{0, …, 2^j - 1}`.
pub fn chi_tilde(j: i32, k: i64, x: f64) -> u8 {
    let (a, b) = chi_cell(j, k);
    let n = 2f64.powi(j);
    let (lo, hi) = (a as f64 / n, b as f64 / n);
    (x >= lo && x < hi) as u8
}

/// Clamped cell `[k', k'+1)` at level `j`, as integer endpoints.
fn chi_cell(j: i32, k: i64) -> (i64, i64) {
    let last = (1i64 << j.max(0)) - 1;
    let kk = k.clamp(0, last);
    (kk, kk + 1)
}

/// Smoothness `s`, integrability `r`, weight exponent `δ` and spline order `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: f64,
    pub r: f64,
    pub delta: f64,
    pub m: usize,
}

impl NormParams {
    /// Validates `0 ≤ s < m - 1`, `1 < r < ∞` and `δ > 1`.
    pub fn new(s: f64, r: f64, delta: f64, m: usize) -> Result<Self> {
        if !(s >= 0.0 && s < m as f64 - 1.0) {
            return Err(QuarkletError::InvalidParams(format!(
                "s = {s} violates 0 < s < m - 1 = {} (s = 0 selects L_r)",
                m as f64 - 1.0
            )));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(QuarkletError::InvalidParams(format!("r = {r} violates 1 < r < ∞")));
        }
        if !(delta > 1.0) {
            return Err(QuarkletError::InvalidParams(format!("δ = {delta} violates δ > 1")));
        }
        Ok(NormParams { s, r, delta, m })
    }

    /// Copy with a different smoothness, bypassing the `s < m - 1` check for `s = 0`.
    pub fn with_s(&self, s: f64) -> Self {
        NormParams { s, ..*self }
    }
}

/// `(p+1)^{sgn(s)·4m + 2δ} · 2^{2js} · 2^j`.
pub fn weight(p: u32, j: i32, params: &NormParams) -> f64 {
    let sgn = if params.s > 0.0 { 1.0 } else { 0.0 };
    let exponent = sgn * 4.0 * params.m as f64 + 2.0 * params.delta;
    (p as f64 + 1.0).powf(exponent) * 2f64.powf(2.0 * j as f64 * params.s) * 2f64.powi(j)
}

/// Sparse map `λ ↦ c_λ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    entries: BTreeMap<QuarkletIndex, f64>,
}

impl CoefficientField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = (QuarkletIndex, f64)>>(it: I) -> Self {
        let mut f = Self::new();
        for (k, v) in it {
            f.add(k, v);
        }
        f
    }

    pub fn insert(&mut self, lambda: QuarkletIndex, c: f64) {
        self.entries.insert(lambda, c);
    }

    pub fn add(&mut self, lambda: QuarkletIndex, c: f64) {
        *self.entries.entry(lambda).or_insert(0.0) += c;
    }

    pub fn get(&self, lambda: &QuarkletIndex) -> f64 {
        self.entries.get(lambda).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QuarkletIndex, &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        CoefficientField {
            entries: self.entries.iter().map(|(k, v)| (*k, alpha * v)).collect(),
        }
    }

    pub fn p_max(&self) -> Option<u32> {
        self.entries.keys().map(|l| l.p).max()
    }

    pub fn j_max(&self) -> Option<i32> {
        self.entries.keys().map(|l| l.j).max()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// `‖ [Σ_λ w(p,j) |c_λ|² χ̃_{j,k}]^{1/2} | L_r(0,1) ‖`, exact on the dyadic grid
/// of the finest level present.
pub fn seq_norm_1d(coeffs: &CoefficientField, params: &NormParams) -> f64 {
    let Some(jmax) = coeffs.j_max() else {
        return 0.0;
    };
    let level = jmax.max(0);
    let jmin = coeffs.iter().map(|(l, _)| l.j.max(0)).min().unwrap_or(0);
    // per-level cell sums, pushed down to the finest level without cancellation
    let mut sums = vec![0.0; 1usize << jmin];
    let mut current = jmin;
    let mut by_level: BTreeMap<i32, Vec<(i64, f64)>> = BTreeMap::new();
    for (lambda, c) in coeffs.iter() {
        if *c == 0.0 {
            continue;
        }
        let w = weight(lambda.p, lambda.j, params) * c * c;
        by_level.entry(lambda.j.max(0)).or_default().push((chi_cell(lambda.j, lambda.k).0, w));
    }
    loop {
        if let Some(items) = by_level.get(&current) {
            for (cell, w) in items {
                sums[*cell as usize] += w;
            }
        }
        if current == level {
            break;
        }
        sums = sums.iter().flat_map(|v| [*v, *v]).collect();
        current += 1;
    }
    let h = 2f64.powi(-level);
    let total: f64 = sums.iter().map(|v| h * v.powf(params.r / 2.0)).sum();
    total.powf(1.0 / params.r)
}

/// [`seq_norm_1d`] precomputed for a fixed index list, evaluated on dense
/// coefficient vectors aligned with that list.
#[derive(Clone, Debug)]
pub struct SeqNormPlan {
    r: f64,
    jmin: i32,
    level: i32,
    /// `(level, [(position, cell, weight)])`, ascending in level.
    levels: Vec<(i32, Vec<(usize, usize, f64)>)>,
}

impl SeqNormPlan {
    pub fn new(indices: &[QuarkletIndex], params: &NormParams) -> Self {
        let mut by_level: BTreeMap<i32, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for (pos, l) in indices.iter().enumerate() {
            let cell = chi_cell(l.j, l.k).0 as usize;
            by_level.entry(l.j.max(0)).or_default().push((pos, cell, weight(l.p, l.j, params)));
        }
        let jmin = by_level.keys().next().copied().unwrap_or(0);
        let level = by_level.keys().last().copied().unwrap_or(0);
        SeqNormPlan {
            r: params.r,
            jmin,
            level,
            levels: by_level.into_iter().collect(),
        }
    }

    pub fn eval(&self, c: &[f64]) -> f64 {
        if self.levels.is_empty() {
            return 0.0;
        }
        let mut sums = vec![0.0; 1usize << self.jmin];
        let mut items = self.levels.iter().peekable();
        let mut current = self.jmin;
        loop {
            if let Some((_, entries)) = items.next_if(|(l, _)| *l == current) {
                for &(pos, cell, w) in entries {
                    sums[cell] += w * c[pos] * c[pos];
                }
            }
            if current == self.level {
                break;
            }
            sums = sums.iter().flat_map(|v| [*v, *v]).collect();
            current += 1;
        }
        let h = 2f64.powi(-self.level);
        let total: f64 = sums.iter().map(|v| h * v.powf(self.r / 2.0)).sum();
        total.powf(1.0 / self.r)
    }
}
