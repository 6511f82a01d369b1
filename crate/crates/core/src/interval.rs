//! Boundary-adapted quarklet systems on the unit interval.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::shift_invariant::{cdf_filters, FilterPair};
use crate::spline::{Dyadic, PiecewisePolynomial, SplineParams};

/// Slack used when validating boundary-condition orders against smoothness.
pub const SIGMA_EPS: f64 = 1e-9;

/// Default cap on the polynomial degree of quarks.
pub const DEFAULT_P_CAP: u32 = 16;

/// Orders of homogeneous Dirichlet conditions at 0 and 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub sigma_l: u32,
    pub sigma_r: u32,
}

impl BoundaryCondition {
    pub fn new(sigma_l: u32, sigma_r: u32) -> Self {
        BoundaryCondition { sigma_l, sigma_r }
    }

    pub fn sgn_l(&self) -> i64 {
        (self.sigma_l > 0) as i64
    }

    pub fn sgn_r(&self) -> i64 {
        (self.sigma_r > 0) as i64
    }

    /// Largest admissible order `⌊s + 1 - d/r - ε⌋` (`d` = 1 or 2).
    pub fn max_order(s: f64, r: f64, d: u32) -> i64 {
        (s + 1.0 - d as f64 / r - SIGMA_EPS).floor() as i64
    }

    /// Checks each component against `⌊s + 1 - d/r - ε⌋`.
    pub fn validate_for(&self, s: f64, r: f64, d: u32) -> Result<()> {
        let bound = Self::max_order(s, r, d);
        for (name, v) in [("σ^l", self.sigma_l), ("σ^r", self.sigma_r)] {
            if v as i64 > bound {
                return Err(QuarkletError::InvalidParams(format!(
                    "{name} = {v} violates {name} ≤ ⌊s + 1 - {d}/r - ε⌋ = {bound} (s = {s}, r = {r})"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.sigma_l, self.sigma_r)
    }
}

/// `λ = (p, j, k)`; `j = j0 - 1` addresses the quark level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuarkletIndex {
    pub p: u32,
    pub j: i32,
    pub k: i64,
}

impl QuarkletIndex {
    pub fn new(p: u32, j: i32, k: i64) -> Self {
        QuarkletIndex { p, j, k }
    }
}

impl fmt::Display for QuarkletIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, j={}, k={})", self.p, self.j, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// How an index of the system is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Quark,
    Inner,
    Boundary(Side),
}

/// Knots `t^j_k`, `k = -m+1, …, 2^j + m - 1`, boundary multiplicity `m`.
pub fn knots(params: &SplineParams, j: i32) -> Result<Vec<f64>> {
    check_level(params, j)?;
    Ok(knot_range(params, j).map(|k| knot(j, k).to_f64()).collect())
}

fn knot_range(params: &SplineParams, j: i32) -> RangeInclusive<i64> {
    let m = params.m as i64;
    (-m + 1)..=((1i64 << j) + m - 1)
}

fn knot(j: i32, k: i64) -> Dyadic {
    let n = 1i64 << j;
    Dyadic::new(k.clamp(0, n), j as u32)
}

fn check_level(params: &SplineParams, j: i32) -> Result<()> {
    if j < params.j0 {
        return Err(QuarkletError::Level {
            level: j,
            min: params.j0,
        });
    }
    Ok(())
}

/// `Δ_j = {-m+1, …, 2^j - 1}`.
pub fn delta_full(params: &SplineParams, j: i32) -> RangeInclusive<i64> {
    (-(params.m as i64) + 1)..=((1i64 << j) - 1)
}

/// Schoenberg B-spline `B^m_{j,k}` by Cox–de Boor on the multiple-knot sequence.
pub fn schoenberg_bspline(params: &SplineParams, j: i32, k: i64) -> Result<PiecewisePolynomial> {
    check_level(params, j)?;
    if !delta_full(params, j).contains(&k) {
        return Err(index_error(QuarkletIndex::new(0, j, k), "Δ_j"));
    }
    Ok(cox_de_boor(params.m, j, k))
}

fn cox_de_boor(m: usize, j: i32, k: i64) -> PiecewisePolynomial {
    // order-1 splines on the knots t_k .. t_{k+m}
    let mut level: Vec<PiecewisePolynomial> = (0..m as i64)
        .map(|i| PiecewisePolynomial::indicator(knot(j, k + i), knot(j, k + i + 1)))
        .collect();
    for order in 2..=m as i64 {
        let mut next = Vec::with_capacity(level.len() - 1);
        for i in 0..level.len() - 1 {
            let ii = k + i as i64;
            let (ti, tio1) = (knot(j, ii), knot(j, ii + order - 1));
            let (ti1, tio) = (knot(j, ii + 1), knot(j, ii + order));
            let mut terms = Vec::new();
            let left;
            let right;
            if tio1 > ti && !level[i].is_zero() {
                let d = tio1.sub(ti).to_f64();
                left = level[i].monomial_multiply(1, ti.to_f64(), d);
                terms.push((1.0, &left));
            }
            if tio > ti1 && !level[i + 1].is_zero() {
                let d = tio.sub(ti1).to_f64();
                right = level[i + 1].monomial_multiply(1, tio.to_f64(), -d);
                terms.push((1.0, &right));
            }
            next.push(PiecewisePolynomial::linear_combination(&terms));
        }
        level = next;
    }
    level.pop().expect("one spline remains")
}

fn index_error(lambda: QuarkletIndex, set: &str) -> QuarkletError {
    QuarkletError::Index {
        index: lambda.to_string(),
        set: set.to_string(),
    }
}

/// Boundary-adapted quarklet system `Ψ_σ` with lazily built, cached elements.
pub struct IntervalSystem {
    params: SplineParams,
    sigma: BoundaryCondition,
    filters: FilterPair,
    p_cap: u32,
    quarks: RwLock<HashMap<(u32, i32, i64), Arc<PiecewisePolynomial>>>,
    elements: RwLock<HashMap<QuarkletIndex, Arc<PiecewisePolynomial>>>,
}

impl fmt::Debug for IntervalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalSystem")
            .field("params", &self.params)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl IntervalSystem {
    pub fn new(params: SplineParams, sigma: BoundaryCondition) -> Result<Self> {
        if sigma.sigma_l > 1 || sigma.sigma_r > 1 {
            return Err(QuarkletError::InvalidParams(format!(
                "σ = {sigma} violates σ^l, σ^r ≤ 1 (higher orders are not supported)"
            )));
        }
        let filters = cdf_filters(&params)?;
        Ok(IntervalSystem {
            params,
            sigma,
            filters,
            p_cap: DEFAULT_P_CAP,
            quarks: RwLock::new(HashMap::new()),
            elements: RwLock::new(HashMap::new()),
        })
    }

    /// Replaces the wavelet mask used by inner quarklets (verification hook).
    pub fn with_filters(mut self, filters: FilterPair) -> Self {
        self.filters = filters;
        self
    }

    pub fn with_p_cap(mut self, cap: u32) -> Self {
        self.p_cap = cap;
        self
    }

    pub fn params(&self) -> &SplineParams {
        &self.params
    }

    pub fn sigma(&self) -> BoundaryCondition {
        self.sigma
    }

    pub fn filters(&self) -> &FilterPair {
        &self.filters
    }

    pub fn j0(&self) -> i32 {
        self.params.j0
    }

    fn check_p(&self, p: u32) -> Result<()> {
        if p > self.p_cap {
            return Err(QuarkletError::InvalidParams(format!(
                "p = {p} violates p ≤ {} (configurable cap)",
                self.p_cap
            )));
        }
        Ok(())
    }

    /// `Δ_{j,σ} = {-m+1+sgn σ^l, …, 2^j - 1 - sgn σ^r}`.
    pub fn delta(&self, j: i32) -> RangeInclusive<i64> {
        let m = self.params.m as i64;
        (-m + 1 + self.sigma.sgn_l())..=((1i64 << j) - 1 - self.sigma.sgn_r())
    }

    /// `∇_{j,σ}`: `Δ_{j0,σ}` on the quark level `j0 - 1`, `{0, …, 2^j - 1}` above.
    pub fn nabla(&self, j: i32) -> Result<RangeInclusive<i64>> {
        if j == self.j0() - 1 {
            Ok(self.delta(self.j0()))
        } else if j >= self.j0() {
            Ok(0..=((1i64 << j) - 1))
        } else {
            Err(QuarkletError::Level {
                level: j,
                min: self.j0() - 1,
            })
        }
    }

    /// All indices with `p ≤ p_max` and `j0 - 1 ≤ j ≤ j_max`, ordered by `(p, j, k)`.
    pub fn indices(&self, p_max: u32, j_max: i32) -> Vec<QuarkletIndex> {
        let mut out = Vec::new();
        for p in 0..=p_max {
            for j in (self.j0() - 1)..=j_max {
                for k in self.nabla(j).expect("valid level") {
                    out.push(QuarkletIndex::new(p, j, k));
                }
            }
        }
        out
    }

    pub fn contains(&self, lambda: &QuarkletIndex) -> bool {
        self.nabla(lambda.j).is_ok_and(|r| r.contains(&lambda.k))
    }

    /// Quark `φ_{p,j,k}` (three-case definition with `2^{j/2} B^m_{j,k}` as generator).
    pub fn boundary_quark(&self, p: u32, j: i32, k: i64) -> Result<Arc<PiecewisePolynomial>> {
        check_level(&self.params, j)?;
        self.check_p(p)?;
        if !delta_full(&self.params, j).contains(&k) {
            return Err(index_error(QuarkletIndex::new(p, j, k), "Δ_j"));
        }
        if let Some(q) = self.quarks.read().unwrap().get(&(p, j, k)) {
            return Ok(q.clone());
        }
        let q = Arc::new(self.build_quark(p, j, k));
        self.quarks.write().unwrap().insert((p, j, k), q.clone());
        Ok(q)
    }

    fn build_quark(&self, p: u32, j: i32, k: i64) -> PiecewisePolynomial {
        let m = self.params.m as i64;
        let n = 1i64 << j;
        let scale = 2f64.powf(j as f64 / 2.0);
        let nj = n as f64;
        if k < 0 {
            let b = cox_de_boor(self.params.m, j, k).scale(scale);
            b.monomial_multiply(p, 0.0, (k + m) as f64 / nj)
        } else if k <= n - m {
            let f = self.params.floor_half() as f64;
            let c = self.params.ceil_half() as f64;
            let b = cox_de_boor(self.params.m, j, k).scale(scale);
            b.monomial_multiply(p, (k as f64 + f) / nj, c / nj)
        } else {
            let b = cox_de_boor(self.params.m, j, n - m - k).scale(scale);
            b.monomial_multiply(p, 0.0, (n - k) as f64 / nj).reflect()
        }
    }

    /// Quark indices `l = 2k + n - ⌊m/2⌋` touched by the wavelet mask.
    fn inner_window(&self, k: i64) -> (i64, i64) {
        let f = self.params.floor_half() as i64;
        let w = &self.filters.wavelet;
        (2 * k + w.offset - f, 2 * k + w.last() - f)
    }

    /// Whether `(p, j, k)` with `j ≥ j0` is realized by a translated shift-invariant quarklet.
    pub fn is_inner(&self, j: i32, k: i64) -> bool {
        let (lo, hi) = self.inner_window(k);
        let n = 1i64 << (j + 1);
        lo >= 0 && hi <= n - self.params.m as i64
    }

    /// Constructor used for `λ`.
    pub fn kind(&self, lambda: &QuarkletIndex) -> Result<ElementKind> {
        if !self.contains(lambda) {
            return Err(self.not_in_nabla(lambda));
        }
        if lambda.j == self.j0() - 1 {
            return Ok(ElementKind::Quark);
        }
        if self.is_inner(lambda.j, lambda.k) {
            return Ok(ElementKind::Inner);
        }
        let half = 1i64 << (lambda.j - 1);
        Ok(ElementKind::Boundary(if lambda.k < half { Side::Left } else { Side::Right }))
    }

    fn not_in_nabla(&self, lambda: &QuarkletIndex) -> QuarkletError {
        match self.nabla(lambda.j) {
            Err(e) => e,
            Ok(r) => index_error(
                *lambda,
                &format!("∇_{{{},σ}} = {{{}, …, {}}}", lambda.j, r.start(), r.end()),
            ),
        }
    }

    /// `Σ_n (b_n / √2) φ_{p,j+1,2k+n-⌊m/2⌋} = 2^{j/2} ψ_p(2^j · - k)`.
    pub fn inner_quarklet(&self, p: u32, j: i32, k: i64) -> Result<PiecewisePolynomial> {
        check_level(&self.params, j)?;
        let lambda = QuarkletIndex::new(p, j, k);
        if !self.contains(&lambda) {
            return Err(self.not_in_nabla(&lambda));
        }
        if !self.is_inner(j, k) {
            return Err(QuarkletError::WrongConstructor {
                index: lambda.to_string(),
                expected: "boundary",
            });
        }
        let f = self.params.floor_half() as i64;
        let w = self.filters.wavelet.clone();
        let quarks: Vec<(f64, Arc<PiecewisePolynomial>)> = w
            .indices()
            .map(|n| {
                let c = w.get(n) / std::f64::consts::SQRT_2;
                self.boundary_quark(p, j + 1, 2 * k + n - f).map(|q| (c, q))
            })
            .collect::<Result<_>>()?;
        let terms: Vec<(f64, &PiecewisePolynomial)> = quarks.iter().map(|(c, q)| (*c, q.as_ref())).collect();
        Ok(PiecewisePolynomial::linear_combination(&terms))
    }

    /// First quark index of the `m̃ + 1` consecutive level-`j+1` quarks used
    /// for the boundary quarklet at distance `k` from `side`.
    fn boundary_window(&self, j: i32, side: Side, k: i64) -> i64 {
        let m = self.params.m as i64;
        let mt = self.params.m_tilde as i64;
        match side {
            Side::Left => -m + 1 + self.sigma.sgn_l() + k,
            Side::Right => (1i64 << (j + 1)) - 1 - self.sigma.sgn_r() - k - mt,
        }
    }

    fn global_k(&self, j: i32, side: Side, k: i64) -> i64 {
        match side {
            Side::Left => k,
            Side::Right => (1i64 << j) - 1 - k,
        }
    }

    fn check_boundary_index(&self, p: u32, j: i32, side: Side, k: i64) -> Result<()> {
        check_level(&self.params, j)?;
        self.check_p(p)?;
        let gk = self.global_k(j, side, k);
        let lambda = QuarkletIndex::new(p, j, gk);
        if k < 0 || k >= (1i64 << (j - 1)) {
            return Err(index_error(lambda, &format!("{side:?} boundary range")));
        }
        if self.is_inner(j, gk) {
            return Err(QuarkletError::WrongConstructor {
                index: lambda.to_string(),
                expected: "inner",
            });
        }
        Ok(())
    }

    fn window_quarks(&self, p: u32, j: i32, side: Side, k: i64) -> Result<(i64, Vec<Arc<PiecewisePolynomial>>)> {
        self.check_boundary_index(p, j, side, k)?;
        let first = self.boundary_window(j, side, k);
        let quarks = (first..=first + self.params.m_tilde as i64)
            .map(|l| self.boundary_quark(p, j + 1, l))
            .collect::<Result<Vec<_>>>()?;
        Ok((first, quarks))
    }

    /// `m̃ × (m̃+1)` matrix of raw moments `∫ x^q φ_{p,j+1,l}`, `l` over the window.
    ///
    /// `k` counts from the boundary on the given side.
    pub fn boundary_moment_matrix(&self, p: u32, j: i32, side: Side, k: i64) -> Result<DMatrix<f64>> {
        let (_, quarks) = self.window_quarks(p, j, side, k)?;
        let mt = self.params.m_tilde;
        Ok(DMatrix::from_fn(mt, mt + 1, |q, l| quarks[l].moment(q as u32)))
    }

    /// Coefficients of the boundary quarklet: unit-norm kernel vector of the
    /// moment system, first nonzero entry positive.
    fn boundary_coefficients(&self, p: u32, j: i32, side: Side, k: i64) -> Result<(i64, Vec<f64>, Vec<Arc<PiecewisePolynomial>>)> {
        let (first, quarks) = self.window_quarks(p, j, side, k)?;
        let mt = self.params.m_tilde;
        let (lo, hi) = quarks
            .iter()
            .filter_map(|q| q.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.min(x), b.max(y)));
        let centre = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        // centred moments share the kernel of the raw ones and are far better scaled
        let mut a = DMatrix::<f64>::zeros(mt + 1, mt + 1);
        for q in 0..mt {
            for (l, quark) in quarks.iter().enumerate() {
                a[(q, l)] = quark.moment_about(q as u32, centre, half);
            }
        }
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let sv = &svd.singular_values;
        let (imin, smin) = sv
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bs), (i, &s)| if s < bs { (i, s) } else { (bi, bs) });
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if ratio > 1e-8 {
            return Err(QuarkletError::ConstructionFailed {
                index: QuarkletIndex::new(p, j, self.global_k(j, side, k)).to_string(),
                ratio,
            });
        }
        let mut v: Vec<f64> = v_t.row(imin).iter().cloned().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lead = v.iter().find(|x| x.abs() > 1e-14).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|x| *x *= sign / norm);
        Ok((first, v, quarks))
    }

    /// Boundary quarklet at distance `k` from `side`.
    pub fn boundary_quarklet(&self, p: u32, j: i32, side: Side, k: i64) -> Result<PiecewisePolynomial> {
        let (_, coeffs, quarks) = self.boundary_coefficients(p, j, side, k)?;
        let terms: Vec<(f64, &PiecewisePolynomial)> =
            coeffs.iter().zip(&quarks).map(|(c, q)| (*c, q.as_ref())).collect();
        Ok(PiecewisePolynomial::linear_combination(&terms))
    }

    /// Numerical kernel dimension of the boundary moment system (singular
    /// values below `1e-8 σ_max`, counting the missing row).
    pub fn boundary_kernel_dimension(&self, p: u32, j: i32, side: Side, k: i64) -> Result<usize> {
        let (_, quarks) = self.window_quarks(p, j, side, k)?;
        let mt = self.params.m_tilde;
        let (lo, hi) = quarks
            .iter()
            .filter_map(|q| q.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (x, y)| (a.min(x), b.max(y)));
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let a = DMatrix::from_fn(mt, mt + 1, |q, l| quarks[l].moment_about(q as u32, c, h));
        let sv = a.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > 1e-8 * smax).count();
        Ok(mt + 1 - rank)
    }

    /// The frame element `ψ^σ_λ`; cached.
    pub fn element(&self, lambda: &QuarkletIndex) -> Result<Arc<PiecewisePolynomial>> {
        if let Some(e) = self.elements.read().unwrap().get(lambda) {
            return Ok(e.clone());
        }
        self.check_p(lambda.p)?;
        let e = match self.kind(lambda)? {
            ElementKind::Quark => self.boundary_quark(lambda.p, self.j0(), lambda.k)?,
            ElementKind::Inner => Arc::new(self.inner_quarklet(lambda.p, lambda.j, lambda.k)?),
            ElementKind::Boundary(side) => {
                let k = match side {
                    Side::Left => lambda.k,
                    Side::Right => (1i64 << lambda.j) - 1 - lambda.k,
                };
                Arc::new(self.boundary_quarklet(lambda.p, lambda.j, side, k)?)
            }
        };
        self.elements.write().unwrap().insert(*lambda, e.clone());
        Ok(e)
    }

    pub fn cached_elements(&self) -> usize {
        self.elements.read().unwrap().len()
    }

    /// JSON document with parameters, σ and every element up to `(p_max, j_max)`.
    pub fn to_json(&self, p_max: u32, j_max: i32) -> Result<serde_json::Value> {
        let elements = self
            .indices(p_max, j_max)
            .into_iter()
            .map(|lambda| {
                let e = self.element(&lambda)?;
                Ok(SerializedElement {
                    index: lambda,
                    kind: self.kind(&lambda)?,
                    breakpoints: e.breakpoints().iter().map(|b| b.to_f64()).collect(),
                    pieces: e.pieces().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let doc = SerializedSystem {
            m: self.params.m,
            m_tilde: self.params.m_tilde,
            j0: self.params.j0,
            sigma: self.sigma,
            piece_variable: "t = (x - a) / (b - a) on each piece [a, b)",
            elements,
        };
        Ok(serde_json::to_value(doc).expect("serializable"))
    }
}

#[derive(Serialize)]
struct SerializedSystem {
    m: usize,
    m_tilde: usize,
    j0: i32,
    sigma: BoundaryCondition,
    piece_variable: &'static str,
    elements: Vec<SerializedElement>,
}

#[derive(Serialize)]
struct SerializedElement {
    index: QuarkletIndex,
    kind: ElementKind,
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}
