//! Bivariate tensor quarklets, g_r crossnorm objectives and the bivariate
//! sequence-norm objective with low-rank representations of coefficient arrays.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::expansion::{Analyzer, TruncationSpec};
use crate::interval::{BoundaryCondition, IntervalSystem, QuarkletIndex};
use crate::sequence_norms::{seq_norm_1d, CoefficientField, NormParams, SeqNormPlan};
use crate::spline::PiecewisePolynomial;

/// Random starts of the r-ball ascent.
pub const GR_STARTS: usize = 32;
const GR_SEED: u64 = 0x6772_5f6f_626a;
/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;
pub const SWEEPS: usize = 20;

/// `Σ_ℓ u_ℓ ⊗ v_ℓ` with `u_ℓ` living on direction 1 and `v_ℓ` on direction 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRepresentation {
    terms: Vec<(CoefficientField, CoefficientField)>,
}

impl TensorRepresentation {
    pub fn new(terms: Vec<(CoefficientField, CoefficientField)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(QuarkletError::InvalidParams("rank a = 0 violates a ≥ 1".into()));
        }
        Ok(TensorRepresentation { terms })
    }

    pub fn terms(&self) -> &[(CoefficientField, CoefficientField)] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn push(&mut self, u: CoefficientField, v: CoefficientField) {
        self.terms.push((u, v));
    }

    /// Dense array `Σ_ℓ u_ℓ v_ℓᵀ` over `rows × cols`.
    pub fn to_matrix(&self, rows: &[QuarkletIndex], cols: &[QuarkletIndex]) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(rows.len(), cols.len());
        for (u, v) in &self.terms {
            let uu = DVector::from_iterator(rows.len(), rows.iter().map(|l| u.get(l)));
            let vv = DVector::from_iterator(cols.len(), cols.iter().map(|l| v.get(l)));
            c += uu * vv.transpose();
        }
        c
    }
}

/// `σ = (σ_1, σ_2)`, one boundary condition per direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryConditions2D {
    pub sigma1: BoundaryCondition,
    pub sigma2: BoundaryCondition,
}

impl BoundaryConditions2D {
    pub fn new(sigma1: BoundaryCondition, sigma2: BoundaryCondition) -> Self {
        BoundaryConditions2D { sigma1, sigma2 }
    }

    /// Componentwise `σ ≤ ⌊s + 1 - 2/r - ε⌋`.
    pub fn validate_for(&self, s: f64, r: f64) -> Result<()> {
        self.sigma1.validate_for(s, r, 2)?;
        self.sigma2.validate_for(s, r, 2)
    }
}

/// `ψ_{λ1} ⊗ ψ_{λ2}`.
#[derive(Clone, Debug)]
pub struct TensorElement {
    pub x: Arc<PiecewisePolynomial>,
    pub y: Arc<PiecewisePolynomial>,
}

impl TensorElement {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let a = self.x.eval(x);
        if a == 0.0 {
            return 0.0;
        }
        a * self.y.eval(y)
    }

    pub fn l2_norm(&self) -> f64 {
        self.x.l2_norm() * self.y.l2_norm()
    }

    pub fn support(&self) -> Option<((f64, f64), (f64, f64))> {
        Some((self.x.support()?, self.y.support()?))
    }
}

pub fn tensor_element(
    sys1: &IntervalSystem,
    sys2: &IntervalSystem,
    l1: &QuarkletIndex,
    l2: &QuarkletIndex,
) -> Result<TensorElement> {
    Ok(TensorElement {
        x: sys1.element(l1)?,
        y: sys2.element(l2)?,
    })
}

/// Factors that can be linearly combined, for the r-ball supremum.
pub trait LinearFactor: Sized {
    fn combination(terms: &[(f64, &Self)]) -> Self;
}

impl LinearFactor for Vec<f64> {
    fn combination(terms: &[(f64, &Self)]) -> Self {
        let n = terms.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        let mut out = vec![0.0; n];
        for (a, v) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += a * x;
            }
        }
        out
    }
}

impl LinearFactor for CoefficientField {
    fn combination(terms: &[(f64, &Self)]) -> Self {
        let mut out = CoefficientField::new();
        for (a, f) in terms {
            for (l, c) in f.iter() {
                out.add(*l, a * c);
            }
        }
        out
    }
}

impl LinearFactor for PiecewisePolynomial {
    fn combination(terms: &[(f64, &Self)]) -> Self {
        PiecewisePolynomial::linear_combination(terms)
    }
}

fn lr_norm_vec(v: &[f64], r: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuarkletError::Domain(format!("{what} is not finite ({v})")))
    }
}

/// `sup { F(λ) : ‖λ‖_r ≤ 1 }` for a convex, positively homogeneous `F`.
///
/// Ascent by the conditional-gradient step `λ ← J_{r'}(∇F(λ))`, which never
/// decreases a convex `F`; gradients by central differences. Starts: the unit
/// coordinate vectors and [`GR_STARTS`] seeded random points.
pub fn r_ball_sup<F: Fn(&[f64]) -> f64 + Sync>(a: usize, r: f64, objective: F) -> Result<f64> {
    if a == 0 {
        return Ok(0.0);
    }
    let rp = r / (r - 1.0);
    let normalize = |mut l: Vec<f64>| -> Option<Vec<f64>> {
        let n = lr_norm_vec(&l, r);
        if !(n > 0.0) {
            return None;
        }
        l.iter_mut().for_each(|x| *x /= n);
        Some(l)
    };
    let mut starts: Vec<Vec<f64>> = (0..a)
        .map(|i| (0..a).map(|k| (k == i) as u8 as f64).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(GR_SEED);
    for _ in 0..GR_STARTS {
        let l: Vec<f64> = (0..a).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(l) = normalize(l) {
            starts.push(l);
        }
    }
    let results: Vec<Result<f64>> = starts
        .into_par_iter()
        .map(|mut lam| {
            let mut val = finite(objective(&lam), "‖Σ λ g‖")?;
            for _ in 0..1000 {
                let h = 1e-6;
                let grad: Vec<f64> = (0..a)
                    .map(|i| {
                        let mut p = lam.clone();
                        let mut m = lam.clone();
                        p[i] += h;
                        m[i] -= h;
                        (objective(&p) - objective(&m)) / (2.0 * h)
                    })
                    .collect();
                let dual: Vec<f64> = grad.iter().map(|g| g.signum() * g.abs().powf(rp - 1.0)).collect();
                let Some(next) = normalize(dual) else { break };
                let nv = finite(objective(&next), "‖Σ λ g‖")?;
                let step: f64 = next.iter().zip(&lam).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if nv <= val {
                    break;
                }
                let gain = nv - val;
                lam = next;
                val = nv;
                if step <= 1e-8 && gain <= 1e-14 * val {
                    break;
                }
            }
            Ok(val)
        })
        .collect();
    let mut best = 0.0f64;
    for r in results {
        best = best.max(r?);
    }
    Ok(best)
}

/// `(Σ_ℓ ‖f_ℓ‖_X^r)^{1/r} · sup{‖Σ λ_ℓ g_ℓ‖_Y : ‖λ‖_r ≤ 1}` for one representation.
pub fn g_r_objective<X, Y, NX, NY>(terms: &[(X, Y)], norm_x: NX, norm_y: NY, r: f64) -> Result<f64>
where
    Y: LinearFactor + Sync,
    NX: Fn(&X) -> f64,
    NY: Fn(&Y) -> f64 + Sync,
{
    if terms.is_empty() {
        return Err(QuarkletError::InvalidParams("rank a = 0 violates a ≥ 1".into()));
    }
    if !(r > 1.0 && r.is_finite()) {
        return Err(QuarkletError::InvalidParams(format!("r = {r} violates 1 < r < ∞")));
    }
    let mut first = 0.0;
    for (f, _) in terms {
        first += finite(norm_x(f), "‖f_ℓ‖_X")?.powf(r);
    }
    let first = first.powf(1.0 / r);
    let second = if terms.len() == 1 {
        finite(norm_y(&terms[0].1), "‖g_1‖_Y")?
    } else {
        let gs: Vec<&Y> = terms.iter().map(|(_, g)| g).collect();
        r_ball_sup(terms.len(), r, |lam| {
            let combo: Vec<(f64, &Y)> = lam.iter().copied().zip(gs.iter().copied()).collect();
            norm_y(&Y::combination(&combo))
        })?
    };
    Ok(first * second)
}

/// Exact `g_2` value when `Y` is a Hilbert space: `(Σ‖f_ℓ‖²)^{1/2} · λ_max(Gram)^{1/2}`.
pub fn g2_objective_exact<X, Y, NX, IY>(terms: &[(X, Y)], norm_x: NX, inner_y: IY) -> Result<f64>
where
    NX: Fn(&X) -> f64,
    IY: Fn(&Y, &Y) -> f64,
{
    let a = terms.len();
    let first: f64 = terms.iter().map(|(f, _)| norm_x(f).powi(2)).sum::<f64>().sqrt();
    let gram = DMatrix::from_fn(a, a, |i, k| inner_y(&terms[i].1, &terms[k].1));
    let top = SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max);
    finite(first * top.sqrt(), "g_2")
}

/// Sum of component norms.
pub fn intersection_norm(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Exponents of the bivariate sequence norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateNormParams {
    pub s: f64,
    pub r: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub m: usize,
}

impl BivariateNormParams {
    pub fn new(s: f64, r: f64, delta1: f64, delta2: f64, m: usize) -> Result<Self> {
        if !(s > 0.0) {
            return Err(QuarkletError::InvalidParams(format!(
                "s = {s} violates 0 < s < m - 1 = {}",
                m as f64 - 1.0
            )));
        }
        NormParams::new(s, r, delta1, m)?;
        NormParams::new(s, r, delta2, m)?;
        Ok(BivariateNormParams { s, r, delta1, delta2, m })
    }

    /// `(h^s in direction 1, h^0 in direction 1, h^s in direction 2, h^0 in direction 2)`.
    fn factor_params(&self) -> [NormParams; 4] {
        let mk = |s, d| NormParams { s, r: self.r, delta: d, m: self.m };
        [mk(self.s, self.delta1), mk(0.0, self.delta1), mk(self.s, self.delta2), mk(0.0, self.delta2)]
    }
}

/// Direction 1: `(Σ_ℓ ‖u_ℓ‖_{h^s}) (Σ_ℓ ‖v_ℓ‖_{h^0})`; direction 2 swaps the smoothness.
pub fn bivariate_seq_objective(rep: &TensorRepresentation, params: &BivariateNormParams, direction: u8) -> Result<f64> {
    let [s1, z1, s2, z2] = params.factor_params();
    let (pu, pv) = match direction {
        1 => (s1, z2),
        2 => (z1, s2),
        d => return Err(QuarkletError::InvalidParams(format!("direction {d} violates direction ∈ {{1, 2}}"))),
    };
    let a: f64 = rep.terms.iter().map(|(u, _)| seq_norm_1d(u, &pu)).sum();
    let b: f64 = rep.terms.iter().map(|(_, v)| seq_norm_1d(v, &pv)).sum();
    finite(a * b, "bivariate objective")
}

/// Direction-1 plus direction-2 objective.
pub fn bivariate_full_objective(rep: &TensorRepresentation, params: &BivariateNormParams) -> Result<f64> {
    Ok(intersection_norm(&[
        bivariate_seq_objective(rep, params, 1)?,
        bivariate_seq_objective(rep, params, 2)?,
    ]))
}

/// Norm plans for the four factor norms on fixed index sets.
struct Plans {
    us: SeqNormPlan,
    u0: SeqNormPlan,
    vs: SeqNormPlan,
    v0: SeqNormPlan,
}

impl Plans {
    fn new(rows: &[QuarkletIndex], cols: &[QuarkletIndex], params: &BivariateNormParams) -> Self {
        let [s1, z1, s2, z2] = params.factor_params();
        Plans {
            us: SeqNormPlan::new(rows, &s1),
            u0: SeqNormPlan::new(rows, &z1),
            vs: SeqNormPlan::new(cols, &s2),
            v0: SeqNormPlan::new(cols, &z2),
        }
    }

    fn norms(&self, u: &[f64], v: &[f64]) -> [f64; 4] {
        [self.us.eval(u), self.u0.eval(u), self.vs.eval(v), self.v0.eval(v)]
    }
}

/// Objective `(A_s B_0 + A_0 B_s)` from per-term norms `[u_s, u_0, v_s, v_0]`.
fn objective_from(norms: &[[f64; 4]]) -> f64 {
    let sum = |i: usize| norms.iter().map(|n| n[i]).sum::<f64>();
    sum(0) * sum(3) + sum(1) * sum(2)
}

/// Output of [`factorize_grid`].
#[derive(Clone, Debug)]
pub struct Factorization {
    /// Rank-`R` part, equal to the truncated singular value decomposition.
    pub rep: TensorRepresentation,
    /// Remaining singular triplets, so that `rep + tail` reproduces `c`.
    pub tail: Option<TensorRepresentation>,
    /// Numerical rank of `c`.
    pub numerical_rank: usize,
    /// Full objective (`rep` and `tail`) after each sweep, first entry before any sweep.
    pub history: Vec<f64>,
}

impl Factorization {
    pub fn objective(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }

    /// `rep` followed by `tail`.
    pub fn full(&self) -> TensorRepresentation {
        let mut all = self.rep.clone();
        if let Some(t) = &self.tail {
            all.terms.extend(t.terms.iter().cloned());
        }
        all
    }
}

fn to_field(idx: &[QuarkletIndex], v: &[f64]) -> CoefficientField {
    CoefficientField::from_entries(idx.iter().copied().zip(v.iter().copied()).filter(|(_, c)| *c != 0.0))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Low-rank representation of a coefficient array `c` over `rows × cols`.
///
/// The truncated SVD (split `√σ`) seeds the terms; rank `R` is reached
/// stage by stage, each stage adding the next singular triplet to the optimized
/// terms of the previous stage and running [`SWEEPS`] sweeps of per-term
/// rescaling and pairwise rotations. Both moves keep `Σ u_ℓ v_ℓᵀ` fixed and
/// are only accepted if they lower the full objective of `rep + tail`, so the
/// objective is nonincreasing over sweeps and in `R`.
pub fn factorize_grid(
    c: &DMatrix<f64>,
    rows: &[QuarkletIndex],
    cols: &[QuarkletIndex],
    rank: usize,
    params: &BivariateNormParams,
) -> Result<Factorization> {
    if rank == 0 {
        return Err(QuarkletError::InvalidParams("R = 0 violates R ≥ 1".into()));
    }
    if c.nrows() != rows.len() || c.ncols() != cols.len() {
        return Err(QuarkletError::InvalidParams(format!(
            "coefficient array is {}×{} but the index sets have {} and {} entries",
            c.nrows(),
            c.ncols(),
            rows.len(),
            cols.len()
        )));
    }
    let svd = c.clone().svd(true, true);
    let (Some(uu), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(QuarkletError::ConstructionFailed {
            index: "SVD".into(),
            ratio: f64::NAN,
        });
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let smax = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > RANK_CUTOFF * smax)
        .collect();
    let numerical_rank = kept.len();
    let triplets: Vec<(Vec<f64>, Vec<f64>)> = kept
        .iter()
        .map(|&i| {
            let s = svd.singular_values[i].sqrt();
            (
                uu.column(i).iter().map(|x| x * s).collect(),
                vt.row(i).iter().map(|x| x * s).collect(),
            )
        })
        .collect();

    let plans = Plans::new(rows, cols, params);
    let tail_norms: Vec<[f64; 4]> = triplets.iter().map(|(u, v)| plans.norms(u, v)).collect();
    let r_eff = rank.min(numerical_rank);
    let mut free: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut free_norms: Vec<[f64; 4]> = Vec::new();
    let tail_sum = |from: usize| -> [f64; 4] {
        let mut t = [0.0; 4];
        for n in &tail_norms[from..] {
            for i in 0..4 {
                t[i] += n[i];
            }
        }
        t
    };
    let mut history = Vec::new();
    if r_eff == 0 {
        history.push(0.0);
    }
    for stage in 0..r_eff {
        free.push(triplets[stage].clone());
        free_norms.push(tail_norms[stage]);
        let rest = tail_sum(stage + 1);
        let total = |fnorms: &[[f64; 4]]| {
            let mut all = fnorms.to_vec();
            all.push(rest);
            objective_from(&all)
        };
        let mut current = total(&free_norms);
        if stage + 1 == r_eff {
            history.push(current);
        }
        for _ in 0..SWEEPS {
            // rescale each term: u → t u, v → v / t, closed-form optimum of C + αt + β/t
            for l in 0..free.len() {
                let mut others = free_norms.clone();
                others.remove(l);
                others.push(rest);
                let o = |i: usize| others.iter().map(|n| n[i]).sum::<f64>();
                let n = free_norms[l];
                let alpha = n[0] * o(3) + n[1] * o(2);
                let beta = o(0) * n[3] + o(1) * n[2];
                if alpha > 0.0 && beta > 0.0 {
                    let t = (beta / alpha).sqrt();
                    let cand = [n[0] * t, n[1] * t, n[2] / t, n[3] / t];
                    let mut trial = free_norms.clone();
                    trial[l] = cand;
                    let v = total(&trial);
                    if v < current {
                        free[l].0.iter_mut().for_each(|x| *x *= t);
                        free[l].1.iter_mut().for_each(|x| *x /= t);
                        free_norms = trial;
                        current = v;
                    }
                }
            }
            // rotate pairs of terms
            for a in 0..free.len() {
                for b in a + 1..free.len() {
                    let rotate = |th: f64| {
                        let (cs, sn) = (th.cos(), th.sin());
                        let mix = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
                            (
                                x.iter().zip(y).map(|(p, q)| cs * p + sn * q).collect(),
                                x.iter().zip(y).map(|(p, q)| -sn * p + cs * q).collect(),
                            )
                        };
                        let (ua, ub) = mix(&free[a].0, &free[b].0);
                        let (va, vb) = mix(&free[a].1, &free[b].1);
                        (ua, ub, va, vb)
                    };
                    let eval = |th: f64| {
                        let (ua, ub, va, vb) = rotate(th);
                        let mut trial = free_norms.clone();
                        trial[a] = plans.norms(&ua, &va);
                        trial[b] = plans.norms(&ub, &vb);
                        total(&trial)
                    };
                    let grid: Vec<f64> = (1..16).map(|i| -std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 16.0).collect();
                    let vals: Vec<f64> = grid.par_iter().map(|&t| eval(t)).collect();
                    let (gi, _) = vals
                        .iter()
                        .enumerate()
                        .min_by(|x, y| x.1.total_cmp(y.1))
                        .expect("nonempty grid");
                    let h = std::f64::consts::PI / 16.0;
                    let (th, v) = golden_min(eval, grid[gi] - h, grid[gi] + h, 30);
                    if v < current && th != 0.0 {
                        let (ua, ub, va, vb) = rotate(th);
                        free_norms[a] = plans.norms(&ua, &va);
                        free_norms[b] = plans.norms(&ub, &vb);
                        free[a] = (ua, va);
                        free[b] = (ub, vb);
                        current = v;
                    }
                }
            }
            if stage + 1 == r_eff {
                history.push(current);
            }
        }
    }

    let rep = if free.is_empty() {
        TensorRepresentation::new(vec![(CoefficientField::new(), CoefficientField::new())])?
    } else {
        TensorRepresentation::new(free.iter().map(|(u, v)| (to_field(rows, u), to_field(cols, v))).collect())?
    };
    let tail = if r_eff < numerical_rank {
        Some(TensorRepresentation::new(
            triplets[r_eff..]
                .iter()
                .map(|(u, v)| (to_field(rows, u), to_field(cols, v)))
                .collect(),
        )?)
    } else {
        None
    };
    Ok(Factorization {
        rep,
        tail,
        numerical_rank,
        history,
    })
}

/// Handling of the `m̃ > 5m + 12` hypothesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Refuse runs violating the hypothesis.
    Strict,
    /// Proceed with a warning.
    #[default]
    Exploratory,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Exploratory => "exploratory",
        })
    }
}

impl FromStr for Mode {
    type Err = QuarkletError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Mode::Strict),
            "exploratory" => Ok(Mode::Exploratory),
            _ => Err(QuarkletError::InvalidParams(format!("mode {s:?} violates mode ∈ {{strict, exploratory}}"))),
        }
    }
}

/// Checks `m̃ > 5m + 12`; `Ok(Some(warning))` when violated in exploratory mode.
pub fn check_dual_order(m: usize, m_tilde: usize, mode: Mode) -> Result<Option<String>> {
    if m_tilde > 5 * m + 12 {
        return Ok(None);
    }
    let msg = format!("m̃ = {m_tilde} violates m̃ > 5m + 12 = {} (m = {m})", 5 * m + 12);
    match mode {
        Mode::Strict => Err(QuarkletError::Hypothesis(msg)),
        Mode::Exploratory => Ok(Some(msg)),
    }
}

/// Which direction is analyzed first in [`tensor_analyze`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisOrder {
    XThenY,
    YThenX,
}

/// `p = 0` coefficients `C = G_1^{-1} ⟨ψ_{λ1} ⊗ ψ_{λ2}, f⟩ G_2^{-1}` of a bivariate `f`,
/// computed by analyzing one direction slice by slice and then the other.
pub fn tensor_analyze(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    a1: &Analyzer,
    a2: &Analyzer,
    order: AnalysisOrder,
) -> DMatrix<f64> {
    let slices = |first: &Analyzer, second: &Analyzer, swap: bool| -> DMatrix<f64> {
        // one first-direction coefficient vector per node of the second direction
        let cols: Vec<DVector<f64>> = second
            .nodes()
            .par_iter()
            .map(|&t| {
                let vals: Vec<f64> = first
                    .nodes()
                    .iter()
                    .map(|&x| if swap { f(t, x) } else { f(x, t) })
                    .collect();
                first.solve(&first.load_vector(&vals))
            })
            .collect();
        let n1 = first.len();
        let rows: Vec<DVector<f64>> = (0..n1)
            .into_par_iter()
            .map(|i| {
                let vals: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                second.solve(&second.load_vector(&vals))
            })
            .collect();
        DMatrix::from_fn(n1, second.len(), |i, k| rows[i][k])
    };
    match order {
        AnalysisOrder::XThenY => slices(a1, a2, false),
        AnalysisOrder::YThenX => slices(a2, a1, true).transpose(),
    }
}

/// Result of [`bivariate_norm_estimate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BivariateEstimate {
    pub estimate: f64,
    pub rank: usize,
    pub numerical_rank: usize,
    pub mode: Mode,
    pub warning: Option<String>,
    pub history: Vec<f64>,
}

/// `p = 0` tensor coefficients of `f` with their index sets.
#[derive(Clone, Debug)]
pub struct TensorCoefficients {
    pub rows: Vec<QuarkletIndex>,
    pub cols: Vec<QuarkletIndex>,
    pub c: DMatrix<f64>,
}

/// Tensor analysis at level `J` (`P = 0`), direction 1 first.
pub fn tensor_coefficients(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    sys1: &IntervalSystem,
    sys2: &IntervalSystem,
    spec: &TruncationSpec,
) -> Result<TensorCoefficients> {
    let spec = TruncationSpec::new(spec.j_max, 0);
    let a1 = Analyzer::new(sys1, &spec)?;
    let a2 = Analyzer::new(sys2, &spec)?;
    let c = tensor_analyze(f, &a1, &a2, AnalysisOrder::XThenY);
    Ok(TensorCoefficients {
        rows: a1.indices().to_vec(),
        cols: a2.indices().to_vec(),
        c,
    })
}

/// Checks the hypotheses of the bivariate estimate; returns the exploratory-mode warning, if any.
pub fn check_bivariate_hypotheses(
    sys1: &IntervalSystem,
    sys2: &IntervalSystem,
    params: &BivariateNormParams,
    mode: Mode,
) -> Result<Option<String>> {
    let mut warning = None;
    for sys in [sys1, sys2] {
        let p = sys.params();
        if let Some(w) = check_dual_order(p.m, p.m_tilde, mode)? {
            warning = Some(w);
        }
    }
    BoundaryConditions2D::new(sys1.sigma(), sys2.sigma()).validate_for(params.s, params.r)?;
    Ok(warning)
}

/// Rank-`R` estimate from precomputed tensor coefficients: half the full
/// objective, i.e. `f = f/2 + f/2` with one half charged to each direction.
pub fn estimate_from_coefficients(
    tc: &TensorCoefficients,
    params: &BivariateNormParams,
    rank: usize,
    mode: Mode,
    warning: Option<String>,
) -> Result<BivariateEstimate> {
    let fac = factorize_grid(&tc.c, &tc.rows, &tc.cols, rank, params)?;
    Ok(BivariateEstimate {
        estimate: finite(0.5 * fac.objective(), "estimate")?,
        rank,
        numerical_rank: fac.numerical_rank,
        mode,
        warning,
        history: fac.history,
    })
}

/// Upper-bound estimate of `‖f | H^s_r(I²)‖` from a rank-`R` representation.
pub fn bivariate_norm_estimate(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    sys1: &IntervalSystem,
    sys2: &IntervalSystem,
    spec: &TruncationSpec,
    params: &BivariateNormParams,
    rank: usize,
    mode: Mode,
) -> Result<BivariateEstimate> {
    let warning = check_bivariate_hypotheses(sys1, sys2, params, mode)?;
    let tc = tensor_coefficients(f, sys1, sys2, spec)?;
    estimate_from_coefficients(&tc, params, rank, mode, warning)
}
