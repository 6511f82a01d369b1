//! CDF biorthogonal filters, shift-invariant quarklets on the real line and
//! cascade sampling of the (non-spline) dual functions.

use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::spline::{cardinal_quark, symmetrized_generator, Dyadic, PiecewisePolynomial, SplineParams};

/// A finitely supported sequence `c_k`, `k = offset, …, offset + len - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub offset: i64,
    pub coeffs: Vec<f64>,
}

impl Mask {
    pub fn new(offset: i64, coeffs: Vec<f64>) -> Self {
        Mask { offset, coeffs }
    }

    pub fn get(&self, k: i64) -> f64 {
        let i = k - self.offset;
        if i < 0 || i as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Last index carrying a coefficient.
    pub fn last(&self) -> i64 {
        self.offset + self.coeffs.len() as i64 - 1
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.coeffs.len() as i64).map(move |i| self.offset + i)
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `Σ_k k^q c_k`.
    pub fn discrete_moment(&self, q: u32) -> f64 {
        self.indices()
            .map(|k| (k as f64).powi(q as i32) * self.get(k))
            .sum()
    }

    /// `k ↦ (-1)^k c_{1-k}`.
    pub fn alternating_flip(&self) -> Mask {
        let lo = 1 - self.last();
        let coeffs = (0..self.coeffs.len() as i64)
            .map(|i| {
                let k = lo + i;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * self.get(1 - k)
            })
            .collect();
        Mask::new(lo, coeffs)
    }
}

/// Primal, dual, wavelet and dual-wavelet masks of one CDF pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPair {
    pub primal: Mask,
    pub dual: Mask,
    pub wavelet: Mask,
    pub dual_wavelet: Mask,
}

impl FilterPair {
    /// `max_n |Σ_k a_k ã_{k+2n} - 2 δ_{0,n}|` over all shifts with overlap.
    pub fn biorthogonality_defect(&self) -> f64 {
        let span = (self.primal.len() + self.dual.len()) as i64;
        let mut worst: f64 = 0.0;
        for n in -span..=span {
            let s: f64 = self
                .primal
                .indices()
                .map(|k| self.primal.get(k) * self.dual.get(k + 2 * n))
                .sum();
            let target = if n == 0 { 2.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
        worst
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn laurent_mul(a: &(i64, Vec<f64>), b: &(i64, Vec<f64>)) -> (i64, Vec<f64>) {
    let mut out = vec![0.0; a.1.len() + b.1.len() - 1];
    for (i, x) in a.1.iter().enumerate() {
        for (k, y) in b.1.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    (a.0 + b.0, out)
}

/// CDF(m, m̃) filters. The primal mask is the binomial mask of the
/// symmetrized generator; the dual is the minimal-length CDF dual.
pub fn cdf_filters(params: &SplineParams) -> Result<FilterPair> {
    let (m, mt) = (params.m, params.m_tilde);
    if (m + mt) % 2 != 0 {
        return Err(QuarkletError::InvalidParams(format!(
            "m + m̃ = {} violates m + m̃ ∈ 2N",
            m + mt
        )));
    }
    let f = params.floor_half() as i64;
    let primal = Mask::new(
        -f,
        (0..=m as u64)
            .map(|k| binomial(m as u64, k) * 2f64.powi(1 - m as i32))
            .collect(),
    );

    // 2 ((1+z)/2)^m̃ Σ_{n<K} C(K-1+n, n) ((2 - z - 1/z)/4)^n
    let kk = (m + mt) / 2;
    let half = (0i64, vec![0.5, 0.5]);
    let mut dual = (0i64, vec![2.0]);
    for _ in 0..mt {
        dual = laurent_mul(&dual, &half);
    }
    let sin2 = (-1i64, vec![-0.25, 0.5, -0.25]);
    let mut sum = (0i64, vec![0.0]);
    let mut power = (0i64, vec![1.0]);
    for n in 0..kk {
        let c = binomial((kk - 1 + n) as u64, n as u64);
        // sum += c * power, aligned on a common offset
        let lo = sum.0.min(power.0);
        let hi = (sum.0 + sum.1.len() as i64).max(power.0 + power.1.len() as i64);
        let mut acc = vec![0.0; (hi - lo) as usize];
        for (i, v) in sum.1.iter().enumerate() {
            acc[(sum.0 - lo) as usize + i] += v;
        }
        for (i, v) in power.1.iter().enumerate() {
            acc[(power.0 - lo) as usize + i] += c * v;
        }
        sum = (lo, acc);
        power = laurent_mul(&power, &sin2);
    }
    let dual_poly = laurent_mul(&dual, &sum);

    // choose the integer shift that makes the pair biorthogonal
    let len = dual_poly.1.len() as i64;
    let mut best: Option<(f64, FilterPair)> = None;
    for shift in -len..=len {
        let dual = Mask::new(dual_poly.0 + shift, dual_poly.1.clone());
        let pair = FilterPair {
            wavelet: dual.alternating_flip(),
            dual_wavelet: primal.alternating_flip(),
            primal: primal.clone(),
            dual,
        };
        let defect = pair.biorthogonality_defect();
        if best.as_ref().is_none_or(|(d, _)| defect < *d) {
            best = Some((defect, pair));
        }
    }
    let (defect, pair) = best.expect("non-empty shift range");
    debug_assert!(defect < 1e-12, "no biorthogonal shift found: {defect}");
    Ok(pair)
}

/// `ψ_p = Σ_k b_k φ_p(2 · - k)`.
pub fn shift_quarklet(params: &SplineParams, p: u32) -> PiecewisePolynomial {
    let filters = cdf_filters(params).expect("validated params");
    shift_quarklet_with(params, &filters, p)
}

/// Same as [`shift_quarklet`] with explicitly supplied filters.
pub fn shift_quarklet_with(params: &SplineParams, filters: &FilterPair, p: u32) -> PiecewisePolynomial {
    let quark = cardinal_quark(params, p);
    let parts: Vec<(f64, PiecewisePolynomial)> = filters
        .wavelet
        .indices()
        .map(|k| (filters.wavelet.get(k), quark.dilate_translate(1, Dyadic::from_int(k))))
        .collect();
    let terms: Vec<(f64, &PiecewisePolynomial)> = parts.iter().map(|(c, f)| (*c, f)).collect();
    PiecewisePolynomial::linear_combination(&terms)
}

/// `2^{j/2} f(2^j · - k)` for `j ≥ 0`; `f(· - k)` for `j = -1`.
pub fn scaled_element(f: &PiecewisePolynomial, j: i32, k: i64) -> PiecewisePolynomial {
    assert!(j >= -1, "level must be at least -1");
    if j == -1 {
        return f.translate(Dyadic::from_int(k));
    }
    f.scale_shift(j, k, 2f64.powf(j as f64 / 2.0))
}

/// Max over a fine grid of `|φ(x) - Σ a_k φ(2x - k)|`.
pub fn two_scale_residual(params: &SplineParams) -> f64 {
    let filters = cdf_filters(params).expect("validated params");
    let phi = symmetrized_generator(params);
    let parts: Vec<(f64, PiecewisePolynomial)> = filters
        .primal
        .indices()
        .map(|k| (filters.primal.get(k), phi.dilate_translate(1, Dyadic::from_int(k))))
        .collect();
    let terms: Vec<(f64, &PiecewisePolynomial)> = parts.iter().map(|(c, f)| (*c, f)).collect();
    let refined = PiecewisePolynomial::linear_combination(&terms);
    let diff = phi.sub(&refined);
    diff.pieces()
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |acc, c| acc.max(c.abs()))
}

// ---------------------------------------------------------------------------
// cascade sampling

/// Samples of a compactly supported function on the grid `2^{-L} Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub level: u32,
    /// Grid index of the first sample, i.e. the first sample sits at `offset / 2^L`.
    pub offset: i64,
    pub samples: Vec<f64>,
}

impl SampledFunction {
    pub fn step(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    /// Value at grid index `i` (zero outside the stored range).
    pub fn at_index(&self, i: i64) -> f64 {
        let r = i - self.offset;
        if r < 0 || r as usize >= self.samples.len() {
            0.0
        } else {
            self.samples[r as usize]
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.step()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x(0), self.x(self.samples.len().saturating_sub(1)))
    }

    /// Trapezoid integral; endpoint samples vanish for continuous functions.
    pub fn integral(&self) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let inner: f64 = self.samples.iter().sum();
        (inner - 0.5 * (self.samples[0] + self.samples[n - 1])) * self.step()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `Σ_k c_k F(2 · - k)` on the same grid, used for dual wavelets.
    pub fn refine_combination(&self, mask: &Mask) -> SampledFunction {
        let last = self.offset + self.samples.len() as i64 - 1;
        // F(2x - k) nonzero for 2i - k 2^L ∈ [offset, last]
        let scale = 1i64 << self.level;
        let lo = (self.offset + mask.offset * scale).div_euclid(2);
        let hi = (last + mask.last() * scale + 1).div_euclid(2);
        let samples = (lo..=hi)
            .map(|i| {
                mask.indices()
                    .map(|k| mask.get(k) * self.at_index(2 * i - k * scale))
                    .sum()
            })
            .collect();
        SampledFunction {
            level: self.level,
            offset: lo,
            samples,
        }
    }
}

const CASCADE_MAX_ITER: usize = 5000;
const DIVERGENCE_WINDOW: usize = 50;

/// Samples of the refinable function `φ = Σ a_k φ(2 · - k)` on `2^{-L} Z`.
///
/// Integer values come from power iteration of `T_{ij} = a_{2i-j}`; finer
/// levels follow from the refinement equation exactly.
pub fn cascade(mask: &Mask, level: u32) -> Result<SampledFunction> {
    if mask.len() < 2 {
        return Err(QuarkletError::DegenerateMask(format!(
            "support length {} < 1 admits no refinable function",
            mask.len().saturating_sub(1)
        )));
    }
    if (mask.sum() - 2.0).abs() > 1e-10 {
        return Err(QuarkletError::DegenerateMask(format!(
            "mask sums to {} instead of 2",
            mask.sum()
        )));
    }
    let (n0, n1) = (mask.offset, mask.last());
    let n = (n1 - n0 + 1) as usize;
    let t = |i: i64, j: i64| mask.get(2 * i - j);

    // start from the hat-like profile, keep Σ v = 1
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            (1.0 - (2.0 * x - 1.0).abs()).max(0.0)
        })
        .collect();
    let s0: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s0);
    let sup0 = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut converged = false;
    for it in 0..CASCADE_MAX_ITER {
        let next: Vec<f64> = (0..n as i64)
            .map(|i| (0..n as i64).map(|j| t(n0 + i, n0 + j) * v[j as usize]).sum())
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        v = next;
        let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !sup.is_finite() || (it < DIVERGENCE_WINDOW && sup > 1e3 * sup0) {
            return Err(QuarkletError::Divergence {
                growth: sup / sup0,
                iterations: it + 1,
            });
        }
        if delta < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        return Err(QuarkletError::Divergence {
            growth: sup / sup0,
            iterations: CASCADE_MAX_ITER,
        });
    }

    // values on 2^{-l} Z from those on 2^{-(l-1)} Z
    let mut samples = v;
    for l in 1..=level {
        let coarse_scale = 1i64 << (l - 1);
        let len = ((n1 - n0) << l) as usize + 1;
        let coarse = &samples;
        let get = |idx: i64| -> f64 {
            // idx is relative to n0·2^{l-1}
            if idx < 0 || idx as usize >= coarse.len() {
                0.0
            } else {
                coarse[idx as usize]
            }
        };
        let fine: Vec<f64> = (0..len as i64)
            .map(|i| {
                // x = gi/2^l, so 2x - k sits at coarse index gi - k 2^{l-1}
                let gi = n0 * (1 << l) + i;
                mask.indices()
                    .map(|k| {
                        let c = gi - k * coarse_scale;
                        mask.get(k) * get(c - n0 * coarse_scale)
                    })
                    .sum()
            })
            .collect();
        samples = fine;
    }
    Ok(SampledFunction {
        level,
        offset: n0 << level,
        samples,
    })
}

/// `⟨c F(2^a · - k), c' F̃(2^{a'} · - k')⟩` with `F` exact and `F̃` sampled,
/// via `c c' 2^{-a'} ∫ F(2^{a-a'}(y + k') - k) F̃(y) dy` on the grid of `F̃`.
pub fn mixed_inner_product(
    f: &PiecewisePolynomial,
    a: i32,
    k: i64,
    c: f64,
    g: &SampledFunction,
    a2: i32,
    k2: i64,
    c2: f64,
) -> f64 {
    let Some((lo, hi)) = f.support() else {
        return 0.0;
    };
    let h = g.step();
    let ratio = 2f64.powi(a - a2);
    let mut s = 0.0;
    for (i, gv) in g.samples.iter().enumerate() {
        if *gv == 0.0 {
            continue;
        }
        let y = g.x(i);
        let arg = ratio * (y + k2 as f64) - k as f64;
        if arg < lo || arg > hi {
            continue;
        }
        // average of one-sided values keeps the rule symmetric at breakpoints
        let fv = 0.5 * (f.eval(arg) + f.eval_left(arg));
        s += fv * gv;
    }
    c * c2 * 2f64.powi(-a2) * s * h
}

/// Dual generator and dual wavelet sampled at level `L`.
pub fn dual_functions(params: &SplineParams, level: u32) -> Result<(SampledFunction, SampledFunction)> {
    let filters = cdf_filters(params)?;
    let phi_dual = cascade(&filters.dual, level)?;
    let psi_dual = phi_dual.refine_combination(&filters.dual_wavelet);
    Ok((phi_dual, psi_dual))
}

/// `max |⟨ψ_{j,k}, ψ̃_{j',k'}⟩ - δ δ|` over `0 ≤ j, j' ≤ j_max` and all
/// overlapping `k, k'` with `ψ_{j,k}` meeting `[0, 1]`.
pub fn wavelet_biorthogonality_error(params: &SplineParams, level: u32, j_max: i32) -> Result<f64> {
    let (_, psi_dual) = dual_functions(params, level)?;
    let psi = shift_quarklet(params, 0);
    let (plo, phi_) = psi.support().expect("nonzero wavelet");
    let (dlo, dhi) = psi_dual.support();
    let mut worst: f64 = 0.0;
    for j in 0..=j_max {
        let kmax = 1i64 << j;
        for k in (-(phi_.ceil() as i64))..=(kmax - plo.floor() as i64) {
            let (alo, ahi) = ((plo + k as f64) / kmax as f64, (phi_ + k as f64) / kmax as f64);
            for j2 in 0..=j_max {
                let s2 = 2f64.powi(j2);
                let k2lo = (alo * s2 - dhi).floor() as i64;
                let k2hi = (ahi * s2 - dlo).ceil() as i64;
                for k2 in k2lo..=k2hi {
                    let v = mixed_inner_product(
                        &psi,
                        j,
                        k,
                        2f64.powf(j as f64 / 2.0),
                        &psi_dual,
                        j2,
                        k2,
                        2f64.powf(j2 as f64 / 2.0),
                    );
                    let target = if j == j2 && k == k2 { 1.0 } else { 0.0 };
                    worst = worst.max((v - target).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `max_k |⟨φ, φ̃(· - k)⟩ - δ_{0,k}|`.
pub fn generator_biorthogonality_error(params: &SplineParams, level: u32) -> Result<f64> {
    let (phi_dual, _) = dual_functions(params, level)?;
    let phi = symmetrized_generator(params);
    let (lo, hi) = phi_dual.support();
    let (plo, phi_) = phi.support().expect("nonzero generator");
    let mut worst: f64 = 0.0;
    for k in ((plo - hi).floor() as i64)..=((phi_ - lo).ceil() as i64) {
        let v = mixed_inner_product(&phi, 0, 0, 1.0, &phi_dual, 0, k, 1.0);
        let target = if k == 0 { 1.0 } else { 0.0 };
        worst = worst.max((v - target).abs());
    }
    Ok(worst)
}
