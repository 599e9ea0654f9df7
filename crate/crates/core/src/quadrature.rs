//! Tensor-product quadrature on the unit sphere `S^{d-1}`, `1 <= d <= 5`.
//!
//! A point of `S^{d-1}` is written `x = (cos φ · y, sin φ)` with `y ∈ S^{d-2}`,
//! so the last coordinate is the polar one. The polar factor is a Gauss rule
//! in `s = sin φ` for the weight `(1-s²)^{(d-3)/2}`; the innermost circle is a
//! periodic trapezoid ring. Rules are kept as factors and expanded on the fly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest supported sphere dimension.
pub const MAX_DIM: usize = 5;
/// Smallest admissible level.
pub const MIN_LEVEL: usize = 4;

/// `W_m = ∫_{-π/2}^{π/2} cos^m(s) ds` by the two-step recursion.
pub fn wallis(m: i64) -> Result<f64> {
    if m < 0 {
        return Err(Error::Negative(format!("wallis index m = {m}")));
    }
    let mut w = if m % 2 == 0 { PI } else { 2.0 };
    let mut k = if m % 2 == 0 { 2 } else { 3 };
    while k <= m {
        w *= (k - 1) as f64 / k as f64;
        k += 2;
    }
    Ok(w)
}

/// Surface measure of `S^{d-1}`, built from `|S^{d-1}| = |S^{d-2}| · W_{d-2}`.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere dimension must be positive");
    let mut area = 2.0;
    for m in 2..=d {
        area *= wallis(m as i64 - 2).expect("non-negative index");
    }
    area
}

/// Sum with a fixed binary tree, independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn pairwise_sum_many<const K: usize>(xs: &[([f64; K], [f64; K])]) -> ([f64; K], [f64; K]) {
    if xs.len() <= 8 {
        let mut acc = ([0.0; K], [0.0; K]);
        for v in xs {
            for k in 0..K {
                acc.0[k] += v.0[k];
                acc.1[k] += v.1[k];
            }
        }
        return acc;
    }
    let mid = xs.len() / 2;
    let mut a = pairwise_sum_many(&xs[..mid]);
    let b = pairwise_sum_many(&xs[mid..]);
    for k in 0..K {
        a.0[k] += b.0[k];
        a.1[k] += b.1[k];
    }
    a
}

/// How the circle factor distributes its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Equispaced offset trapezoid, exact for trigonometric degree `< 4·level`.
    Uniform,
    /// Trapezoid after the periodic map `θ = π/2 + v - sin(2v)/2`, which packs
    /// points around `±e_2`; spectrally accurate but only exact for constants.
    Graded,
}

#[derive(Debug, Clone)]
struct RingNode {
    cos: f64,
    sin: f64,
    weight: f64,
}

#[derive(Debug, Clone)]
struct PolarNode {
    sin: f64,
    cos: f64,
    weight: f64,
}

/// A quadrature rule on `S^{d-1}`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    level: usize,
    kind: RuleKind,
    exactness_degree: usize,
    pair_weights: [f64; 2],
    ring: Vec<RingNode>,
    /// `polar[m - 3]` is the polar factor for `S^{m-1}`, `3 <= m <= dim`.
    polar: Vec<Vec<PolarNode>>,
}

impl SphereRule {
    /// Uniform-ring rule of resolution `level`.
    pub fn build(d: usize, level: usize) -> Result<Self> {
        Self::with_kind(d, level, RuleKind::Uniform)
    }

    /// Rule whose circle factor is graded toward `±e_2`.
    pub fn build_graded(d: usize, level: usize) -> Result<Self> {
        Self::with_kind(d, level, RuleKind::Graded)
    }

    pub fn with_kind(d: usize, level: usize, kind: RuleKind) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedSphere { d });
        }
        if level < MIN_LEVEL {
            return Err(Error::InvalidLevel { level });
        }
        let ring = if d >= 2 { ring_nodes(4 * level, kind) } else { Vec::new() };
        let polar = (3..=d).map(|m| polar_nodes(m, level)).collect();
        let exactness_degree = match (d, kind) {
            (2, RuleKind::Graded) => 1,
            _ => 2 * level - 1,
        };
        Ok(Self {
            dim: d,
            level,
            kind,
            exactness_degree,
            pair_weights: [1.0, 1.0],
            ring,
            polar,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    /// Total polynomial degree integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn len(&self) -> usize {
        match self.dim {
            1 => 2,
            _ => self.ring.len() * self.polar.iter().map(Vec::len).product::<usize>(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The rule on `S^{d-2}` that this rule is built over.
    pub fn sub_rule(&self) -> Option<SphereRule> {
        if self.dim < 2 {
            return None;
        }
        Self::with_kind(self.dim - 1, self.level, self.kind).ok()
    }

    /// Copy with the first stored weight multiplied by `factor`; exists so
    /// self-tests can prove they detect a corrupted rule.
    pub fn with_perturbed_weight(&self, factor: f64) -> SphereRule {
        let mut out = self.clone();
        match self.dim {
            1 => out.pair_weights[0] *= factor,
            2 => out.ring[0].weight *= factor,
            _ => out.polar.last_mut().expect("d >= 3")[0].weight *= factor,
        }
        out
    }

    /// Materialized `(node, weight)` list in integration order.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(self.len());
        let _ = self.core::<1, std::convert::Infallible>(&mut |x, w| {
            out.push((x.to_vec(), w));
            Ok([0.0])
        });
        out
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.integrate_many::<1>(|x| [f(x)])[0]
    }

    /// Integrates `K` functions sharing one pass over the nodes.
    pub fn integrate_many<const K: usize>(&self, f: impl FnMut(&[f64]) -> [f64; K]) -> [f64; K] {
        self.integrate_with_mass(f).0
    }

    /// `(Σ w f, Σ w |f|)` per component.
    pub fn integrate_with_mass<const K: usize>(
        &self,
        mut f: impl FnMut(&[f64]) -> [f64; K],
    ) -> ([f64; K], [f64; K]) {
        match self.core::<K, std::convert::Infallible>(&mut |x, _| Ok(f(x))) {
            Ok(v) => v,
            Err((_, e)) => match e {},
        }
    }

    /// Fallible variant of [`SphereRule::integrate`]; failures carry the node index.
    pub fn try_integrate<E: std::fmt::Display>(
        &self,
        mut f: impl FnMut(&[f64]) -> std::result::Result<f64, E>,
    ) -> Result<f64> {
        self.core::<1, E>(&mut |x, _| f(x).map(|v| [v]))
            .map(|v| v.0[0])
            .map_err(|(index, e)| Error::NodeEvaluation {
                index,
                message: e.to_string(),
            })
    }

    fn core<const K: usize, E>(
        &self,
        f: &mut impl FnMut(&[f64], f64) -> std::result::Result<[f64; K], E>,
    ) -> std::result::Result<([f64; K], [f64; K]), (usize, E)> {
        let mut x = vec![0.0; self.dim];
        let mut index = 0usize;
        if self.dim == 1 {
            let mut vals = Vec::with_capacity(2);
            for (slot, sign) in [-1.0f64, 1.0].into_iter().enumerate() {
                x[0] = sign;
                let w = self.pair_weights[slot];
                let v = f(&x, w).map_err(|e| (slot, e))?;
                vals.push(weighted(w, v));
            }
            return Ok(pairwise_sum_many(&vals));
        }
        self.recurse(self.dim, 1.0, 1.0, &mut x, &mut index, f)
    }

    fn recurse<const K: usize, E>(
        &self,
        m: usize,
        scale: f64,
        weight: f64,
        x: &mut [f64],
        index: &mut usize,
        f: &mut impl FnMut(&[f64], f64) -> std::result::Result<[f64; K], E>,
    ) -> std::result::Result<([f64; K], [f64; K]), (usize, E)> {
        if m == 2 {
            let mut vals = Vec::with_capacity(self.ring.len());
            for node in &self.ring {
                x[0] = scale * node.cos;
                x[1] = scale * node.sin;
                let w = weight * node.weight;
                let v = f(x, w).map_err(|e| (*index, e))?;
                *index += 1;
                vals.push(weighted(w, v));
            }
            return Ok(pairwise_sum_many(&vals));
        }
        let factor = &self.polar[m - 3];
        let mut vals = Vec::with_capacity(factor.len());
        for node in factor {
            x[m - 1] = scale * node.sin;
            vals.push(self.recurse(m - 1, scale * node.cos, weight * node.weight, x, index, f)?);
        }
        Ok(pairwise_sum_many(&vals))
    }
}

fn weighted<const K: usize>(w: f64, v: [f64; K]) -> ([f64; K], [f64; K]) {
    let mut a = [0.0; K];
    let mut b = [0.0; K];
    for k in 0..K {
        a[k] = w * v[k];
        b[k] = a[k].abs();
    }
    (a, b)
}

fn ring_nodes(n: usize, kind: RuleKind) -> Vec<RingNode> {
    let step = 2.0 * PI / n as f64;
    (0..n)
        .map(|j| {
            let v = step * (j as f64 + 0.5);
            let (theta, weight) = match kind {
                RuleKind::Uniform => (v, step),
                RuleKind::Graded => {
                    let s = v.sin();
                    (0.5 * PI + v - (2.0 * v).sin() / 2.0, step * 2.0 * s * s)
                }
            };
            RingNode {
                cos: theta.cos(),
                sin: theta.sin(),
                weight,
            }
        })
        .collect()
}

/// Gauss rule on `(-1, 1)` for the weight `(1-s²)^{(m-3)/2}`, made exactly
/// symmetric under `s ↦ -s`.
fn polar_nodes(m: usize, n: usize) -> Vec<PolarNode> {
    let (s, w) = gauss_gegenbauer((m as f64 - 3.0) / 2.0, n, wallis(m as i64 - 2).expect("m >= 3"));
    s.into_iter()
        .zip(w)
        .map(|(s, weight)| PolarNode {
            sin: s,
            cos: ((1.0 - s) * (1.0 + s)).sqrt(),
            weight,
        })
        .collect()
}

/// Nodes and weights of the `n`-point Gauss rule for `(1-s²)^a` with total
/// mass `mu0`: Golub–Welsch for the start, Newton on the orthonormal
/// recurrence to polish, Christoffel numbers for the weights.
pub(crate) fn gauss_gegenbauer(a: f64, n: usize, mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let beta = |k: usize| -> f64 {
        let k = k as f64;
        k * (k + 2.0 * a) / ((2.0 * k + 2.0 * a + 1.0) * (2.0 * k + 2.0 * a - 1.0))
    };
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            beta(i.max(j)).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let sqrt_beta: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { beta(k).sqrt() }).collect();
    // Returns (p̂_n, p̂_n', Σ_{k<n} p̂_k²).
    let eval = |s: f64| -> (f64, f64, f64) {
        let mut p_prev = 0.0;
        let mut p = 1.0 / mu0.sqrt();
        let mut dp_prev = 0.0;
        let mut dp = 0.0;
        let mut christoffel = p * p;
        for k in 0..n {
            let p_next = (s * p - sqrt_beta[k] * p_prev) / sqrt_beta[k + 1];
            let dp_next = (p + s * dp - sqrt_beta[k] * dp_prev) / sqrt_beta[k + 1];
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
            if k + 1 < n {
                christoffel += p * p;
            }
        }
        (p, dp, christoffel)
    };

    let mut weights = vec![0.0; n];
    for (i, s) in nodes.iter_mut().enumerate() {
        for _ in 0..3 {
            let (p, dp, _) = eval(*s);
            if dp == 0.0 {
                break;
            }
            *s -= p / dp;
        }
        weights[i] = 1.0 / eval(*s).2;
    }

    for i in 0..n / 2 {
        let j = n - 1 - i;
        let s = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -s;
        nodes[j] = s;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `|I_hi - I_lo|`.
pub fn richardson_error(
    rule_lo: &SphereRule,
    rule_hi: &SphereRule,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let lo = rule_lo.integrate(&mut f);
    let hi = rule_hi.integrate(&mut f);
    (hi - lo).abs()
}

/// An integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

/// Roundoff allowance per unit of `Σ w|f|`.
pub const ROUNDOFF_FACTOR: f64 = 64.0 * f64::EPSILON;

/// Two rules at levels `(level, 2·level)`; the fine one supplies the value and
/// the difference of the two supplies the error.
#[derive(Debug, Clone)]
pub struct RulePair {
    lo: SphereRule,
    hi: SphereRule,
}

impl RulePair {
    pub fn new(d: usize, level: usize, kind: RuleKind) -> Result<Self> {
        Ok(Self {
            lo: SphereRule::with_kind(d, level, kind)?,
            hi: SphereRule::with_kind(d, 2 * level, kind)?,
        })
    }

    pub fn from_rules(lo: SphereRule, hi: SphereRule) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                got: hi.dim(),
            });
        }
        if hi.level() < 2 * lo.level() {
            return Err(Error::InvalidLevel { level: hi.level() });
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn lo(&self) -> &SphereRule {
        &self.lo
    }

    pub fn hi(&self) -> &SphereRule {
        &self.hi
    }

    /// Raw `(I_lo, I_hi)` for `K` integrands sharing one pass per level.
    pub fn integrate_both<const K: usize>(
        &self,
        mut f: impl FnMut(&[f64]) -> [f64; K],
    ) -> ([f64; K], [f64; K]) {
        (self.lo.integrate_many::<K>(&mut f), self.hi.integrate_many::<K>(&mut f))
    }

    /// Fine-rule value; error `|I_hi - I_lo|` plus a roundoff floor
    /// proportional to `Σ w|f|` on the fine rule.
    pub fn estimate(&self, mut f: impl FnMut(&[f64]) -> f64) -> QuadEstimate {
        let [v] = self.estimate_many::<1>(|x| [f(x)]);
        v
    }

    pub fn estimate_many<const K: usize>(
        &self,
        mut f: impl FnMut(&[f64]) -> [f64; K],
    ) -> [QuadEstimate; K] {
        let lo = self.lo.integrate_many::<K>(&mut f);
        let (hi, mass) = self.hi.integrate_with_mass::<K>(&mut f);
        std::array::from_fn(|k| QuadEstimate {
            value: hi[k],
            error: (hi[k] - lo[k]).abs() + ROUNDOFF_FACTOR * mass[k],
        })
    }
}
