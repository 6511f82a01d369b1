//! Exact piecewise-polynomial arithmetic on dyadic breakpoints, cardinal
//! B-splines and cardinal B-spline quarks.
//!
//! Every piece is stored as a polynomial in the normalized local variable
//! `t = (x - a) / (b - a) ∈ [0, 1)` of its interval `[a, b)`. Dilations and
//! translations therefore only touch the breakpoints, and all integrals are
//! evaluated in closed form.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QuarkletError, Result};
use crate::quadrature::gauss_legendre;

/// An exact dyadic rational `num / 2^exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i64, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic { num: n, exp: 0 }
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        while self.exp > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.exp -= 1;
        }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }

    fn aligned(self, other: Dyadic) -> (i128, i128, u32) {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        (a, b, e)
    }

    fn from_i128(num: i128, exp: u32) -> Self {
        let mut num = num;
        let mut exp = exp;
        while exp > 0 && num % 2 == 0 && num != 0 {
            num /= 2;
            exp -= 1;
        }
        if num == 0 {
            exp = 0;
        }
        Dyadic {
            num: i64::try_from(num).expect("dyadic numerator overflow"),
            exp,
        }
    }

    pub fn add(self, other: Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(other);
        Dyadic::from_i128(a + b, e)
    }

    pub fn sub(self, other: Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(other);
        Dyadic::from_i128(a - b, e)
    }

    pub fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }

    /// `self * 2^e`.
    pub fn mul_pow2(self, e: i32) -> Dyadic {
        if e >= 0 {
            Dyadic::from_i128((self.num as i128) << e, self.exp)
        } else {
            Dyadic::new(self.num, self.exp + (-e) as u32)
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

// ---------------------------------------------------------------------------
// polynomials on [0, 1]

pub(crate) fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

/// Coefficients of `q(t) = p(alpha + beta t)`.
pub(crate) fn poly_restrict(c: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    let n = out.len();
    if alpha != 0.0 {
        for i in 0..n {
            for k in (i..n.saturating_sub(1)).rev() {
                out[k] += alpha * out[k + 1];
            }
        }
    }
    if beta != 1.0 {
        let mut bp = 1.0;
        for ck in out.iter_mut() {
            *ck *= bp;
            bp *= beta;
        }
    }
    out
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (k, &bk) in b.iter().enumerate() {
            out[i + k] += ai * bk;
        }
    }
    out
}

fn poly_integral_01(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, ci)| ci / (i as f64 + 1.0)).sum()
}

/// `∫_0^1 p(t) q(t) dt` without forming the product.
fn poly_product_integral_01(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, pi) in p.iter().enumerate() {
        if *pi == 0.0 {
            continue;
        }
        for (k, qk) in q.iter().enumerate() {
            s += pi * qk / ((i + k) as f64 + 1.0);
        }
    }
    s
}

fn poly_antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    for (i, ci) in c.iter().enumerate() {
        out.push(ci / (i as f64 + 1.0));
    }
    out
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, ci)| ci * i as f64)
        .collect()
}

fn poly_pow(c: &[f64], p: u32) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..p {
        out = poly_mul(&out, c);
    }
    out
}

fn trimmed_degree(c: &[f64]) -> usize {
    c.iter().rposition(|&v| v != 0.0).unwrap_or(0)
}

/// Real roots of `p` strictly inside `(0, 1)`, located by sign changes.
fn roots_in_unit_interval(c: &[f64]) -> Vec<f64> {
    let deg = trimmed_degree(c);
    if deg == 0 {
        return Vec::new();
    }
    let samples = 8 * (deg + 1);
    let mut roots = Vec::new();
    let mut t0 = 0.0;
    let mut f0 = poly_eval(c, t0);
    for i in 1..=samples {
        let t1 = i as f64 / samples as f64;
        let f1 = poly_eval(c, t1);
        if f0 != 0.0 && f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            let (mut lo, mut hi, mut flo) = (t0, t1, f0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = poly_eval(c, mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        } else if f1 == 0.0 && i < samples {
            roots.push(t1);
        }
        t0 = t1;
        f0 = f1;
    }
    roots
}

/// `∫ |p|^r` over the segment between `end` and `other`; when `p(end) = 0` the
/// substitution `t = end + (other - end) w^4` removes the endpoint singularity.
fn graded_gauss(p: &[f64], r: f64, end: f64, other: f64, root: bool, nodes: &[f64], weights: &[f64]) -> f64 {
    let len = (other - end).abs();
    let dir = (other - end).signum();
    nodes
        .iter()
        .zip(weights)
        .map(|(&w, &wt)| {
            let (u, jac) = if root { (w.powi(4), 4.0 * w.powi(3)) } else { (w, 1.0) };
            wt * jac * poly_eval(p, end + dir * len * u).abs().powf(r)
        })
        .sum::<f64>()
        * len
}

// ---------------------------------------------------------------------------

/// A compactly supported piecewise polynomial with half-open pieces `[a, b)`.
///
/// Vanishes outside `[first breakpoint, last breakpoint)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    breaks: Vec<Dyadic>,
    pieces: Vec<Vec<f64>>,
}

impl Default for PiecewisePolynomial {
    fn default() -> Self {
        Self::zero()
    }
}

impl PiecewisePolynomial {
    pub fn zero() -> Self {
        PiecewisePolynomial {
            breaks: Vec::new(),
            pieces: Vec::new(),
        }
    }

    /// Validating constructor: breakpoints strictly increasing, one piece per interval.
    pub fn new(breaks: Vec<Dyadic>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.is_empty() && pieces.is_empty() {
            return Ok(Self::zero());
        }
        if breaks.len() != pieces.len() + 1 {
            return Err(QuarkletError::InvalidParams(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QuarkletError::InvalidParams(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self::from_parts(breaks, pieces))
    }

    fn from_parts(breaks: Vec<Dyadic>, pieces: Vec<Vec<f64>>) -> Self {
        let mut f = PiecewisePolynomial { breaks, pieces };
        f.trim();
        f
    }

    /// Indicator of `[a, b)`.
    pub fn indicator(a: Dyadic, b: Dyadic) -> Self {
        if a >= b {
            return Self::zero();
        }
        PiecewisePolynomial {
            breaks: vec![a, b],
            pieces: vec![vec![1.0]],
        }
    }

    fn trim(&mut self) {
        for p in self.pieces.iter_mut() {
            let keep = p.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
            p.truncate(keep);
        }
        let first = self.pieces.iter().position(|p| !p.is_empty());
        match first {
            None => {
                self.breaks.clear();
                self.pieces.clear();
            }
            Some(lo) => {
                let hi = self.pieces.iter().rposition(|p| !p.is_empty()).unwrap();
                self.pieces = self.pieces[lo..=hi].to_vec();
                self.breaks = self.breaks[lo..=hi + 1].to_vec();
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn breakpoints(&self) -> &[Dyadic] {
        &self.breaks
    }

    /// Per-piece coefficients in the normalized local variable `t ∈ [0, 1)`.
    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// `[first, last]` breakpoint, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        self.support_exact()
            .map(|(a, b)| (a.to_f64(), b.to_f64()))
    }

    pub fn support_exact(&self) -> Option<(Dyadic, Dyadic)> {
        match (self.breaks.first(), self.breaks.last()) {
            (Some(a), Some(b)) => Some((*a, *b)),
            _ => None,
        }
    }

    /// Maximal polynomial degree over all pieces.
    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| trimmed_degree(p)).max().unwrap_or(0)
    }

    fn interval(&self, i: usize) -> (f64, f64) {
        (self.breaks[i].to_f64(), self.breaks[i + 1].to_f64())
    }

    /// Value at `x` using the right-continuous (half-open) convention.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.pieces.len();
        let a0 = self.breaks[0].to_f64();
        let bn = self.breaks[n].to_f64();
        if x < a0 || x >= bn {
            return 0.0;
        }
        // last breakpoint <= x
        let i = self
            .breaks
            .partition_point(|b| b.to_f64() <= x)
            .saturating_sub(1)
            .min(n - 1);
        let (a, b) = self.interval(i);
        poly_eval(&self.pieces[i], (x - a) / (b - a))
    }

    /// Left limit at `x`; used for traces at right endpoints.
    pub fn eval_left(&self, x: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.pieces.len();
        let a0 = self.breaks[0].to_f64();
        let bn = self.breaks[n].to_f64();
        if x <= a0 || x > bn {
            return 0.0;
        }
        let i = self
            .breaks
            .partition_point(|b| b.to_f64() < x)
            .saturating_sub(1)
            .min(n - 1);
        let (a, b) = self.interval(i);
        poly_eval(&self.pieces[i], (x - a) / (b - a))
    }

    pub fn derivative(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (a, b) = self.interval(i);
                let h = b - a;
                poly_derivative(p).into_iter().map(|c| c / h).collect()
            })
            .collect();
        Self::from_parts(self.breaks.clone(), pieces)
    }

    /// `x ↦ c · f(x)`.
    pub fn scale(&self, c: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.iter().map(|v| v * c).collect())
            .collect();
        Self::from_parts(self.breaks.clone(), pieces)
    }

    /// `x ↦ f(x - shift)`.
    pub fn translate(&self, shift: Dyadic) -> Self {
        PiecewisePolynomial {
            breaks: self.breaks.iter().map(|b| b.add(shift)).collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// `x ↦ f(2^e x - k)`.
    pub fn dilate_translate(&self, e: i32, k: Dyadic) -> Self {
        PiecewisePolynomial {
            breaks: self
                .breaks
                .iter()
                .map(|b| b.add(k).mul_pow2(-e))
                .collect(),
            pieces: self.pieces.clone(),
        }
    }

    /// `x ↦ normalization · f(2^j x - k)`.
    pub fn scale_shift(&self, j: i32, k: i64, normalization: f64) -> Self {
        self.dilate_translate(j, Dyadic::from_int(k)).scale(normalization)
    }

    /// `x ↦ f(1 - x)`.
    pub fn reflect(&self) -> Self {
        let breaks = self
            .breaks
            .iter()
            .rev()
            .map(|b| Dyadic::ONE.sub(*b))
            .collect();
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| poly_restrict(p, 1.0, -1.0))
            .collect();
        Self::from_parts(breaks, pieces)
    }

    /// `x ↦ ((x - center) / scale)^p · f(x)`.
    pub fn monomial_multiply(&self, p: u32, center: f64, scale: f64) -> Self {
        if p == 0 {
            return self.clone();
        }
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, piece)| {
                let (a, b) = self.interval(i);
                let lin = [(a - center) / scale, (b - a) / scale];
                poly_mul(piece, &poly_pow(&lin, p))
            })
            .collect();
        Self::from_parts(self.breaks.clone(), pieces)
    }

    /// Coefficients of piece `i` restricted to the sub-interval `[lo, hi] ⊂ [a_i, a_{i+1}]`,
    /// in the local variable of the sub-interval.
    fn restricted(&self, i: usize, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b) = self.interval(i);
        let h = b - a;
        poly_restrict(&self.pieces[i], (lo - a) / h, (hi - lo) / h)
    }

    /// Index of the piece containing the interval `[lo, hi]`, if any.
    fn piece_covering(&self, lo: Dyadic, hi: Dyadic) -> Option<usize> {
        if self.is_zero() || lo < self.breaks[0] || hi > *self.breaks.last().unwrap() {
            return None;
        }
        let i = self.breaks.partition_point(|b| *b <= lo).saturating_sub(1);
        (i < self.pieces.len() && self.breaks[i + 1] >= hi).then_some(i)
    }

    /// Sum `Σ c_i f_i` on the common refinement of all breakpoints.
    pub fn linear_combination(terms: &[(f64, &PiecewisePolynomial)]) -> Self {
        let mut breaks: Vec<Dyadic> = terms
            .iter()
            .filter(|(c, f)| *c != 0.0 && !f.is_zero())
            .flat_map(|(_, f)| f.breaks.iter().copied())
            .collect();
        breaks.sort();
        breaks.dedup();
        if breaks.len() < 2 {
            return Self::zero();
        }
        let mut pieces = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (lof, hif) = (lo.to_f64(), hi.to_f64());
            let mut acc: Vec<f64> = Vec::new();
            for (c, f) in terms {
                if *c == 0.0 {
                    continue;
                }
                if let Some(i) = f.piece_covering(lo, hi) {
                    let q = f.restricted(i, lof, hif);
                    if acc.len() < q.len() {
                        acc.resize(q.len(), 0.0);
                    }
                    for (a, v) in acc.iter_mut().zip(q) {
                        *a += c * v;
                    }
                }
            }
            pieces.push(acc);
        }
        Self::from_parts(breaks, pieces)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// Product of two piecewise polynomials.
    pub fn multiply(&self, other: &Self) -> Self {
        let mut pieces = Vec::new();
        let mut breaks = Vec::new();
        self.for_each_common_interval(other, |lo, hi, p, q| {
            if breaks.last() != Some(&lo) {
                if !breaks.is_empty() {
                    // gap between overlapping stretches
                    pieces.push(Vec::new());
                }
                breaks.push(lo);
            }
            breaks.push(hi);
            pieces.push(poly_mul(&p, &q));
        });
        if breaks.is_empty() {
            return Self::zero();
        }
        Self::from_parts(breaks, pieces)
    }

    fn for_each_common_interval<F>(&self, other: &Self, mut visit: F)
    where
        F: FnMut(Dyadic, Dyadic, Vec<f64>, Vec<f64>),
    {
        let (Some((a0, a1)), Some((b0, b1))) = (self.support_exact(), other.support_exact()) else {
            return;
        };
        let lo = a0.max(b0);
        let hi = a1.min(b1);
        if lo >= hi {
            return;
        }
        let mut breaks: Vec<Dyadic> = self
            .breaks
            .iter()
            .chain(other.breaks.iter())
            .copied()
            .filter(|b| *b >= lo && *b <= hi)
            .collect();
        breaks.sort();
        breaks.dedup();
        for w in breaks.windows(2) {
            let (l, h) = (w[0], w[1]);
            let (Some(i), Some(k)) = (self.piece_covering(l, h), other.piece_covering(l, h)) else {
                continue;
            };
            let (lf, hf) = (l.to_f64(), h.to_f64());
            visit(l, h, self.restricted(i, lf, hf), other.restricted(k, lf, hf));
        }
    }

    /// `∫ f g dx`, exact up to rounding.
    pub fn inner_product(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        self.for_each_common_interval(other, |lo, hi, p, q| {
            s += (hi.to_f64() - lo.to_f64()) * poly_product_integral_01(&p, &q);
        });
        s
    }

    pub fn integral(&self) -> f64 {
        self.moment(0)
    }

    /// `∫ x^q f(x) dx`.
    pub fn moment(&self, q: u32) -> f64 {
        self.moment_about(q, 0.0, 1.0)
    }

    /// `∫ ((x - center) / scale)^q f(x) dx`.
    pub fn moment_about(&self, q: u32, center: f64, scale: f64) -> f64 {
        let mut s = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = self.interval(i);
            let lin = [(a - center) / scale, (b - a) / scale];
            s += (b - a) * poly_product_integral_01(p, &poly_pow(&lin, q));
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner_product(self).max(0.0).sqrt()
    }

    /// `(∫ |f|^r)^{1/r}`; exact for even integer `r`, otherwise Gauss–Legendre
    /// on sub-pieces split at the real roots of `f`.
    pub fn lr_norm(&self, r: f64) -> f64 {
        assert!(r > 0.0, "exponent must be positive");
        let even = r.fract() == 0.0 && (r as i64) % 2 == 0;
        let mut s = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = self.interval(i);
            let h = b - a;
            if even {
                s += h * poly_integral_01(&poly_pow(p, r as u32));
                continue;
            }
            let deg = trimmed_degree(p) as f64;
            let n = ((deg * r + 8.0) / 2.0).ceil() as usize;
            let (nodes, weights) = gauss_legendre(n.max(1));
            // graded segments see degree about 4·deg·r + 3 in the new variable
            let (gnodes, gweights) = gauss_legendre(((4.0 * deg * r + 4.0) / 2.0).ceil() as usize + 4);
            let mut cuts = vec![0.0];
            cuts.extend(roots_in_unit_interval(p));
            cuts.push(1.0);
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi <= lo {
                    continue;
                }
                let scale = p.iter().map(|c| c.abs()).sum::<f64>();
                let is_root = |t: f64| poly_eval(p, t).abs() <= 1e-13 * scale;
                let mid = 0.5 * (lo + hi);
                for (end, other) in [(lo, mid), (hi, mid)] {
                    let root = is_root(end);
                    let (nd, wt) = if root { (&gnodes, &gweights) } else { (&nodes, &weights) };
                    s += h * graded_gauss(p, r, end, other, root, nd, wt);
                }
            }
        }
        s.powf(1.0 / r)
    }

    /// Sampled sup norm (endpoints plus `per_piece` interior points of every piece).
    pub fn sup_norm_sampled(&self, per_piece: usize) -> f64 {
        let mut m: f64 = 0.0;
        for p in &self.pieces {
            for i in 0..=per_piece {
                let t = i as f64 / per_piece as f64;
                m = m.max(poly_eval(p, t).abs());
            }
        }
        m
    }
}

// free-function aliases mirroring the operation names

pub fn pp_eval(f: &PiecewisePolynomial, x: f64) -> f64 {
    f.eval(x)
}

pub fn pp_derivative(f: &PiecewisePolynomial) -> PiecewisePolynomial {
    f.derivative()
}

pub fn pp_scale_shift(f: &PiecewisePolynomial, j: i32, k: i64, normalization: f64) -> PiecewisePolynomial {
    f.scale_shift(j, k, normalization)
}

pub fn pp_monomial_multiply(f: &PiecewisePolynomial, p: u32, center: f64, scale: f64) -> PiecewisePolynomial {
    f.monomial_multiply(p, center, scale)
}

pub fn pp_inner_product(f: &PiecewisePolynomial, g: &PiecewisePolynomial) -> f64 {
    f.inner_product(g)
}

pub fn pp_moment(f: &PiecewisePolynomial, q: u32) -> f64 {
    f.moment(q)
}

pub fn pp_lr_norm(f: &PiecewisePolynomial, r: f64) -> f64 {
    f.lr_norm(r)
}

// ---------------------------------------------------------------------------

/// Spline order `m`, dual order `m̃` and coarsest level `j0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplineParams {
    pub m: usize,
    pub m_tilde: usize,
    pub j0: i32,
}

impl SplineParams {
    /// Validates `m ≥ 2`, `m̃ ≥ m`, `m + m̃` even and picks the smallest `j0`
    /// with `2^j0 ≥ 2 (m + m̃)`.
    pub fn new(m: usize, m_tilde: usize) -> Result<Self> {
        Self::validate(m, m_tilde)?;
        let j0 = Self::min_j0(m, m_tilde);
        Ok(SplineParams { m, m_tilde, j0 })
    }

    pub fn with_j0(m: usize, m_tilde: usize, j0: i32) -> Result<Self> {
        Self::validate(m, m_tilde)?;
        let bound = 2 * (m + m_tilde);
        if j0 < 1 || (1u64 << j0.clamp(0, 62)) < bound as u64 {
            return Err(QuarkletError::InvalidParams(format!(
                "j0 = {j0} violates 2^j0 ≥ 2(m + m̃) = {bound}"
            )));
        }
        Ok(SplineParams { m, m_tilde, j0 })
    }

    fn validate(m: usize, m_tilde: usize) -> Result<()> {
        if m < 2 {
            return Err(QuarkletError::InvalidParams(format!("m = {m} violates m ≥ 2")));
        }
        if m_tilde < m {
            return Err(QuarkletError::InvalidParams(format!(
                "m̃ = {m_tilde} violates m̃ ≥ m (m = {m})"
            )));
        }
        if !(m + m_tilde).is_multiple_of(2) {
            return Err(QuarkletError::InvalidParams(format!(
                "m + m̃ = {} violates m + m̃ ∈ 2N",
                m + m_tilde
            )));
        }
        Ok(())
    }

    fn min_j0(m: usize, m_tilde: usize) -> i32 {
        let bound = 2 * (m + m_tilde);
        let mut j0 = 1;
        while (1usize << j0) < bound {
            j0 += 1;
        }
        j0
    }

    pub fn floor_half(&self) -> usize {
        self.m / 2
    }

    pub fn ceil_half(&self) -> usize {
        self.m.div_ceil(2)
    }
}

/// Cardinal B-spline `N_m`, built by the convolution recursion `N_m = N_{m-1} * N_1`.
pub fn cardinal_bspline(m: usize) -> Result<PiecewisePolynomial> {
    if m == 0 {
        return Err(QuarkletError::InvalidOrder(0));
    }
    let mut pieces: Vec<Vec<f64>> = vec![vec![1.0]];
    for _ in 1..m {
        // (f * N_1)(i + t) = Q_i(t) - Q_{i-1}(t) + Q_{i-1}(1) with Q_i(0) = 0.
        let anti: Vec<Vec<f64>> = pieces.iter().map(|p| poly_antiderivative(p)).collect();
        let n = pieces.len() + 1;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = vec![0.0; anti[0].len()];
            if i < anti.len() {
                for (a, v) in c.iter_mut().zip(&anti[i]) {
                    *a += v;
                }
            }
            if i >= 1 {
                let prev = &anti[i - 1];
                for (a, v) in c.iter_mut().zip(prev) {
                    *a -= v;
                }
                c[0] += poly_eval(prev, 1.0);
            }
            next.push(c);
        }
        pieces = next;
    }
    let breaks = (0..=m as i64).map(Dyadic::from_int).collect();
    Ok(PiecewisePolynomial::from_parts(breaks, pieces))
}

/// `φ(x) = N_m(x + ⌊m/2⌋)`, supported on `[-⌊m/2⌋, ⌈m/2⌉]`.
pub fn symmetrized_generator(params: &SplineParams) -> PiecewisePolynomial {
    cardinal_bspline(params.m)
        .expect("validated order")
        .translate(Dyadic::from_int(-(params.floor_half() as i64)))
}

/// `φ_p(x) = (x / ⌈m/2⌉)^p · N_m(x + ⌊m/2⌋)`.
pub fn cardinal_quark(params: &SplineParams, p: u32) -> PiecewisePolynomial {
    symmetrized_generator(params).monomial_multiply(p, 0.0, params.ceil_half() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Truncated-power closed form of `N_m`, independent of the recursion.
    fn bspline_closed_form(m: usize, x: f64) -> f64 {
        let mut fact = 1.0;
        for i in 1..m {
            fact *= i as f64;
        }
        let mut s = 0.0;
        let mut binom = 1.0;
        for k in 0..=m {
            let tp = (x - k as f64).max(0.0);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * tp.powi(m as i32 - 1);
            binom = binom * (m - k) as f64 / (k + 1) as f64;
        }
        if m == 1 {
            return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
        }
        s / fact
    }

    #[test]
    fn dyadic_arithmetic() {
        let a = Dyadic::new(3, 2);
        let b = Dyadic::new(1, 1);
        assert_eq!(a.add(b), Dyadic::new(5, 2));
        assert_eq!(a.sub(b), Dyadic::new(1, 2));
        assert_eq!(Dyadic::new(4, 2), Dyadic::ONE);
        assert!(b < a);
        assert_eq!(a.mul_pow2(2), Dyadic::from_int(3));
        assert_eq!(Dyadic::ONE.mul_pow2(-3).to_f64(), 0.125);
    }

    #[test]
    fn order_zero_rejected() {
        assert_eq!(cardinal_bspline(0), Err(QuarkletError::InvalidOrder(0)));
    }

    #[test]
    fn n1_is_unit_indicator() {
        let n1 = cardinal_bspline(1).unwrap();
        assert_eq!(n1.eval(0.0), 1.0);
        assert_eq!(n1.eval(0.999), 1.0);
        assert_eq!(n1.eval(1.0), 0.0);
        assert_eq!(n1.eval(-1e-12), 0.0);
        assert_eq!(n1.moment(0), 1.0);
        assert_eq!(n1.inner_product(&n1), 1.0);
    }

    #[test]
    fn n3_support_and_degree() {
        let n3 = cardinal_bspline(3).unwrap();
        assert_eq!(n3.support(), Some((0.0, 3.0)));
        assert_eq!(n3.degree(), 2);
        assert_eq!(n3.num_pieces(), 3);
    }

    #[test]
    fn n2_hat_values() {
        let n2 = cardinal_bspline(2).unwrap();
        assert!((n2.eval(1.0) - 1.0).abs() < 1e-15);
        assert!((n2.moment(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_truncated_power_formula() {
        for m in 1..=6 {
            let nm = cardinal_bspline(m).unwrap();
            for i in 0..400 {
                let x = -0.5 + (m as f64 + 1.0) * (i as f64 + 0.37) / 400.0;
                let d = (nm.eval(x) - bspline_closed_form(m, x)).abs();
                assert!(d < 1e-12, "m={m} x={x} diff={d}");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for m in 2..=5 {
            let nm = cardinal_bspline(m).unwrap();
            for i in 0..1000 {
                let x = i as f64 / 1000.0;
                let s: f64 = (-(m as i64)..=1).map(|k| nm.eval(x - k as f64)).sum();
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn derivative_identity_coefficientwise() {
        for m in 3..=6 {
            let nm = cardinal_bspline(m).unwrap();
            let lower = cardinal_bspline(m - 1).unwrap();
            let rhs = lower.sub(&lower.translate(Dyadic::ONE));
            let lhs = nm.derivative();
            assert_eq!(lhs.breakpoints(), rhs.breakpoints());
            for (p, q) in lhs.pieces().iter().zip(rhs.pieces()) {
                for i in 0..p.len().max(q.len()) {
                    let a = p.get(i).copied().unwrap_or(0.0);
                    let b = q.get(i).copied().unwrap_or(0.0);
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetrized_supports() {
        let p2 = SplineParams::new(2, 2).unwrap();
        assert_eq!(symmetrized_generator(&p2).support(), Some((-1.0, 1.0)));
        assert!((symmetrized_generator(&p2).eval(0.0) - 1.0).abs() < 1e-15);
        let p3 = SplineParams::new(3, 3).unwrap();
        assert_eq!(symmetrized_generator(&p3).support(), Some((-1.0, 2.0)));
    }

    #[test]
    fn quark_values() {
        let p2 = SplineParams::new(2, 2).unwrap();
        assert_eq!(cardinal_quark(&p2, 0), symmetrized_generator(&p2));
        assert!(cardinal_quark(&p2, 1).eval(1.0).abs() < 1e-15);
        assert!(cardinal_quark(&p2, 2).eval(0.0).abs() < 1e-15);
        assert_eq!(cardinal_quark(&p2, 3).degree(), 1 + 3);
    }

    #[test]
    fn params_validation() {
        assert!(SplineParams::new(2, 3).unwrap_err().to_string().contains("m + m̃ ∈ 2N"));
        assert!(SplineParams::new(3, 1).is_err());
        assert_eq!(SplineParams::new(2, 2).unwrap().j0, 3);
        assert_eq!(SplineParams::new(3, 3).unwrap().j0, 4);
        assert!(SplineParams::with_j0(3, 3, 3).is_err());
        assert_eq!(SplineParams::with_j0(3, 3, 6).unwrap().j0, 6);
    }

    #[test]
    fn reflection_roundtrip() {
        let n3 = cardinal_bspline(3).unwrap().dilate_translate(3, Dyadic::ZERO);
        let r = n3.reflect();
        for i in 0..50 {
            let x = 0.013 + i as f64 * 0.0071;
            assert!((r.eval(1.0 - x) - n3.eval(x)).abs() < 1e-14);
        }
        assert_eq!(r.reflect(), n3);
    }

    #[test]
    fn lr_norm_even_and_general() {
        // f(x) = x on [0, 1)
        let f = PiecewisePolynomial::new(vec![Dyadic::ZERO, Dyadic::ONE], vec![vec![0.0, 1.0]]).unwrap();
        assert!((f.lr_norm(2.0) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((f.lr_norm(3.0) - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-14);
        // sign change: g(x) = x - 1/2, ∫|g|^1.5 = 2 ∫_0^{1/2} u^1.5 du
        let g = PiecewisePolynomial::new(vec![Dyadic::ZERO, Dyadic::ONE], vec![vec![-0.5, 1.0]]).unwrap();
        let exact = (2.0 * 0.5f64.powf(2.5) / 2.5).powf(1.0 / 1.5);
        let d = (g.lr_norm(1.5) - exact).abs();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn multiply_matches_pointwise() {
        let a = cardinal_bspline(3).unwrap();
        let b = cardinal_bspline(2).unwrap().translate(Dyadic::new(1, 1));
        let prod = a.multiply(&b);
        for i in 0..100 {
            let x = -0.2 + i as f64 * 0.037;
            assert!((prod.eval(x) - a.eval(x) * b.eval(x)).abs() < 1e-14);
        }
        assert!((prod.integral() - a.inner_product(&b)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn recursion_consistency(m in 2usize..7, x in -1.0f64..8.0) {
            let nm = cardinal_bspline(m).unwrap();
            let lower = cardinal_bspline(m - 1).unwrap();
            let mf = m as f64;
            let rhs = x / (mf - 1.0) * lower.eval(x) + (mf - x) / (mf - 1.0) * lower.eval(x - 1.0);
            prop_assert!((nm.eval(x) - rhs).abs() <= 1e-12);
        }

        #[test]
        fn linear_combination_is_pointwise(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, x in -2.0f64..4.0) {
            let a = cardinal_bspline(3).unwrap().dilate_translate(1, Dyadic::from_int(1));
            let b = cardinal_bspline(4).unwrap().translate(Dyadic::new(-3, 2));
            let s = PiecewisePolynomial::linear_combination(&[(c1, &a), (c2, &b)]);
            prop_assert!((s.eval(x) - (c1 * a.eval(x) + c2 * b.eval(x))).abs() < 1e-12);
        }
    }
}
