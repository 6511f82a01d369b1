//! Analysis and synthesis against an interval system via exact Gram matrices.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::interval::{IntervalSystem, QuarkletIndex};
use crate::quadrature::gauss_legendre;
use crate::sequence_norms::{seq_norm_1d, CoefficientField, NormParams};
use crate::spline::PiecewisePolynomial;

/// Gram matrices with a larger condition number are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Finest level `J` and maximal polynomial degree `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub j_max: i32,
    pub p_max: u32,
}

impl TruncationSpec {
    pub fn new(j_max: i32, p_max: u32) -> Self {
        TruncationSpec { j_max, p_max }
    }

    fn validate(&self, system: &IntervalSystem) -> Result<()> {
        if self.j_max < system.j0() - 1 {
            return Err(QuarkletError::Level {
                level: self.j_max,
                min: system.j0() - 1,
            });
        }
        Ok(())
    }
}

fn overlaps(a: &PiecewisePolynomial, b: &PiecewisePolynomial) -> bool {
    match (a.support(), b.support()) {
        (Some((a0, a1)), Some((b0, b1))) => a0 < b1 && b0 < a1,
        _ => false,
    }
}

fn elements(system: &IntervalSystem, spec: &TruncationSpec) -> Result<(Vec<QuarkletIndex>, Vec<Arc<PiecewisePolynomial>>)> {
    spec.validate(system)?;
    let idx = system.indices(spec.p_max, spec.j_max);
    let els = idx
        .par_iter()
        .map(|l| system.element(l))
        .collect::<Result<Vec<_>>>()?;
    Ok((idx, els))
}

fn assemble_gram(els: &[Arc<PiecewisePolynomial>]) -> DMatrix<f64> {
    let n = els.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .filter(|&k| overlaps(&els[i], &els[k]))
                .map(|k| (k, els[i].inner_product(&els[k])))
                .collect()
        })
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row {
            g[(i, k)] = v;
            g[(k, i)] = v;
        }
    }
    g
}

/// Exact Gram matrix `⟨ψ_λ, ψ_μ⟩` over all `λ, μ` with `p ≤ P`, `j ≤ J`,
/// ordered as [`IntervalSystem::indices`].
pub fn gram_matrix(system: &IntervalSystem, spec: &TruncationSpec) -> Result<(Vec<QuarkletIndex>, DMatrix<f64>)> {
    let (idx, els) = elements(system, spec)?;
    Ok((idx, assemble_gram(&els)))
}

/// Spectral condition number of a symmetric matrix (`∞` if not positive definite).
pub fn condition_number(g: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Factorized Gram system plus quadrature data for right-hand sides.
///
/// Right-hand sides use Gauss–Legendre with `2(m+P)+8` nodes on every cell of
/// the level-`J+1` grid, on which every element is polynomial.
pub struct Analyzer {
    indices: Vec<QuarkletIndex>,
    elements: Vec<Arc<PiecewisePolynomial>>,
    cholesky: Cholesky<f64, Dyn>,
    condition: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per element: `(node, w · ψ(node))`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer")
            .field("size", &self.indices.len())
            .field("condition", &self.condition)
            .finish()
    }
}

impl Analyzer {
    pub fn new(system: &IntervalSystem, spec: &TruncationSpec) -> Result<Self> {
        let (indices, els) = elements(system, spec)?;
        let gram = assemble_gram(&els);
        let condition = condition_number(&gram);
        if !(condition <= MAX_CONDITION) {
            return Err(QuarkletError::IllConditioned(condition));
        }
        let cholesky = Cholesky::new(gram).ok_or(QuarkletError::IllConditioned(condition))?;

        let nq = 2 * (system.params().m + spec.p_max as usize) + 8;
        let level = spec.j_max + 1;
        let cells = 1usize << level;
        let (gx, gw) = gauss_legendre(nq);
        let h = 1.0 / cells as f64;
        let mut nodes = Vec::with_capacity(cells * nq);
        let mut weights = Vec::with_capacity(cells * nq);
        for c in 0..cells {
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push((c as f64 + x) * h);
                weights.push(w * h);
            }
        }
        let rows = els
            .par_iter()
            .map(|e| {
                let Some((a, b)) = e.support() else {
                    return Vec::new();
                };
                let c0 = ((a * cells as f64).floor().max(0.0)) as usize;
                let c1 = ((b * cells as f64).ceil() as usize).min(cells);
                let mut row = Vec::with_capacity((c1 - c0) * nq);
                for c in c0..c1 {
                    for q in 0..nq {
                        let i = c * nq + q;
                        let v = e.eval(nodes[i]);
                        if v != 0.0 {
                            row.push((i, weights[i] * v));
                        }
                    }
                }
                row
            })
            .collect();
        Ok(Analyzer {
            indices,
            elements: els,
            cholesky,
            condition,
            nodes,
            weights,
            rows,
        })
    }

    pub fn indices(&self) -> &[QuarkletIndex] {
        &self.indices
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Quadrature nodes of the right-hand-side rule.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `Ψ`: per element, sparse `(node, w · ψ(node))` entries.
    pub fn quadrature_rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `⟨ψ_λ, f⟩` from values of `f` at [`Analyzer::nodes`].
    pub fn load_vector(&self, values: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| row.iter().map(|(i, w)| w * values[*i]).sum::<f64>()),
        )
    }

    /// Solves `G c = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(b)
    }

    /// Solves `G X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.cholesky.solve(b)
    }

    pub fn to_field(&self, c: &DVector<f64>) -> CoefficientField {
        CoefficientField::from_entries(self.indices.iter().copied().zip(c.iter().copied()))
    }

    /// Coefficients of the `L_2` projection of `f` onto the truncated span.
    pub fn analyze<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> CoefficientField {
        let values: Vec<f64> = self.nodes.par_iter().map(|&x| f(x)).collect();
        self.to_field(&self.solve(&self.load_vector(&values)))
    }

    /// `Σ c_λ ψ_λ(x)` using the cached elements.
    pub fn synthesize(&self, coeffs: &CoefficientField, points: &[f64]) -> Vec<f64> {
        let active: Vec<(f64, &PiecewisePolynomial)> = self
            .indices
            .iter()
            .zip(&self.elements)
            .map(|(l, e)| (coeffs.get(l), e.as_ref()))
            .filter(|(c, _)| *c != 0.0)
            .collect();
        points
            .iter()
            .map(|&x| active.iter().map(|(c, e)| c * e.eval(x)).sum())
            .collect()
    }

    /// `‖f - Σ c_λ ψ_λ‖_{L_2}` by the right-hand-side quadrature.
    pub fn residual_l2<F: Fn(f64) -> f64 + Sync>(&self, f: F, coeffs: &CoefficientField) -> f64 {
        let synth = self.synthesize(coeffs, &self.nodes);
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&synth)
            .map(|((&x, w), s)| w * (f(x) - s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Canonical `p = 0` coefficients of `f`.
pub fn analyze_p0<F: Fn(f64) -> f64 + Sync>(system: &IntervalSystem, f: F, spec: &TruncationSpec) -> Result<CoefficientField> {
    if spec.p_max != 0 {
        return Err(QuarkletError::InvalidParams(format!(
            "P = {} violates P = 0 for the canonical wavelet representation",
            spec.p_max
        )));
    }
    Ok(Analyzer::new(system, spec)?.analyze(f))
}

/// `Σ c_λ ψ_λ(x)` at the given points.
pub fn synthesize(system: &IntervalSystem, coeffs: &CoefficientField, points: &[f64]) -> Result<Vec<f64>> {
    let terms = coeffs
        .iter()
        .filter(|(_, c)| **c != 0.0)
        .map(|(l, c)| system.element(l).map(|e| (*c, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(points
        .iter()
        .map(|&x| terms.iter().map(|(c, e)| c * e.eval(x)).sum())
        .collect())
}

/// Sequence-norm objective at the canonical `p = 0` representation of `f`.
pub fn quarklet_norm_estimate<F: Fn(f64) -> f64 + Sync>(
    system: &IntervalSystem,
    f: F,
    spec: &TruncationSpec,
    params: &NormParams,
) -> Result<f64> {
    let c = analyze_p0(system, f, &TruncationSpec::new(spec.j_max, 0))?;
    Ok(seq_norm_1d(&c, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::BoundaryCondition;
    use crate::spline::SplineParams;
    use std::f64::consts::PI;

    fn sys(m: usize, mt: usize, sl: u32, sr: u32) -> IntervalSystem {
        IntervalSystem::new(SplineParams::new(m, mt).unwrap(), BoundaryCondition::new(sl, sr)).unwrap()
    }

    #[test]
    fn gram_structure() {
        let s = sys(2, 2, 0, 0);
        let (idx, g) = gram_matrix(&s, &TruncationSpec::new(s.j0() + 1, 0)).unwrap();
        assert_eq!(idx.len(), g.nrows());
        for i in 0..g.nrows() {
            assert!(g[(i, i)] > 0.0);
        }
        // a coarse-left and a fine-right wavelet do not overlap
        let a = idx.iter().position(|l| l.j == s.j0() && l.k == 0).unwrap();
        let b = idx.iter().position(|l| l.j == s.j0() + 1 && l.k == (1 << (s.j0() + 1)) - 1).unwrap();
        assert_eq!(g[(a, b)], 0.0);
    }

    #[test]
    fn condition_numbers_stay_bounded() {
        for (m, mt) in [(2, 2), (3, 3), (2, 4), (3, 5)] {
            for (sl, sr) in [(0, 0), (1, 1)] {
                let s = sys(m, mt, sl, sr);
                let mut conds = Vec::new();
                for j in s.j0()..=s.j0() + 3 {
                    let a = Analyzer::new(&s, &TruncationSpec::new(j, 0)).unwrap();
                    conds.push(a.condition());
                }
                println!("({m},{mt}) σ=({sl},{sr}) cond {conds:?}");
                assert!(conds.iter().all(|c| *c < 1e6));
            }
        }
    }

    #[test]
    fn unit_vector_reproduction() {
        let s = sys(3, 3, 0, 0);
        let spec = TruncationSpec::new(s.j0() + 1, 0);
        let an = Analyzer::new(&s, &spec).unwrap();
        let lambda = QuarkletIndex::new(0, s.j0(), 3);
        let e = s.element(&lambda).unwrap();
        let c = an.analyze(|x| e.eval(x));
        for (l, v) in c.iter() {
            let target = if *l == lambda { 1.0 } else { 0.0 };
            assert!((v - target).abs() <= 1e-9, "{l}: {v}");
        }
    }

    #[test]
    fn linear_recovery_and_roundtrip() {
        let s = sys(2, 4, 1, 1);
        let spec = TruncationSpec::new(s.j0() + 1, 0);
        let an = Analyzer::new(&s, &spec).unwrap();
        let l1 = QuarkletIndex::new(0, s.j0(), 0);
        let l2 = QuarkletIndex::new(0, s.j0() + 1, 7);
        let (e1, e2) = (s.element(&l1).unwrap(), s.element(&l2).unwrap());
        let f = |x: f64| 2.0 * e1.eval(x) - 3.0 * e2.eval(x);
        let c = an.analyze(f);
        assert!((c.get(&l1) - 2.0).abs() < 1e-8);
        assert!((c.get(&l2) + 3.0).abs() < 1e-8);
        let pts: Vec<f64> = (0..97).map(|i| (i as f64 + 0.31) / 97.0).collect();
        let back = synthesize(&s, &c, &pts).unwrap();
        for (x, v) in pts.iter().zip(back) {
            assert!((f(*x) - v).abs() <= 1e-8);
        }
    }

    #[test]
    fn empty_synthesis() {
        let s = sys(2, 2, 0, 0);
        assert_eq!(synthesize(&s, &CoefficientField::new(), &[0.1, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn bubble_in_span_and_sine_residual_decreases() {
        let s = sys(3, 3, 1, 1);
        let mut prev = f64::INFINITY;
        for j in s.j0()..=s.j0() + 3 {
            let an = Analyzer::new(&s, &TruncationSpec::new(j, 0)).unwrap();
            let bubble = |x: f64| x * (1.0 - x);
            let c = an.analyze(bubble);
            assert!(an.residual_l2(bubble, &c) <= 1e-10);
            let sine = |x: f64| (PI * x).sin();
            let r = an.residual_l2(sine, &an.analyze(sine));
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn boundary_values_vanish_for_dirichlet_system() {
        let s = sys(3, 3, 1, 1);
        let spec = TruncationSpec::new(s.j0() + 1, 0);
        let c = analyze_p0(&s, |x: f64| (PI * x).sin(), &spec).unwrap();
        let v = synthesize(&s, &c, &[0.0]).unwrap();
        assert_eq!(v[0], 0.0);
        let right: f64 = c.iter().map(|(l, c)| c * s.element(l).unwrap().eval_left(1.0)).sum();
        assert!(right.abs() < 1e-14);
    }

    #[test]
    fn estimate_of_single_element_and_zero() {
        let s = sys(3, 3, 0, 0);
        let np = NormParams::new(0.5, 2.0, 1.5, 3).unwrap();
        let spec = TruncationSpec::new(s.j0() + 1, 0);
        let lambda = QuarkletIndex::new(0, s.j0() + 1, 9);
        let e = s.element(&lambda).unwrap();
        let est = quarklet_norm_estimate(&s, |x| e.eval(x), &spec, &np).unwrap();
        let j = lambda.j;
        let expect = crate::sequence_norms::weight(0, j, &np).sqrt() * 2f64.powf(-j as f64 / 2.0);
        assert!((est - expect).abs() <= 1e-8 * expect);
        assert_eq!(quarklet_norm_estimate(&s, |_| 0.0, &spec, &np).unwrap(), 0.0);
    }

    #[test]
    fn sine_estimate_self_converges() {
        let s = sys(3, 3, 0, 0);
        let np = NormParams::new(0.5, 2.0, 1.5, 3).unwrap();
        let f = |x: f64| (PI * x).sin();
        let a = quarklet_norm_estimate(&s, f, &TruncationSpec::new(s.j0() + 2, 0), &np).unwrap();
        let b = quarklet_norm_estimate(&s, f, &TruncationSpec::new(s.j0() + 3, 0), &np).unwrap();
        assert!(((a - b) / b).abs() < 0.1);
    }
}
