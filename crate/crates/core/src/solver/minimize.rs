use crate::cone::Exponent;
use crate::error::{Error, Result};

use super::grid::{Grid, GridField, NodeKind};

/// Over-relaxation factor of the sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    /// `2 / (1 + sqrt(1 - ρ²))` with `ρ` the Jacobi radius of the ball Laplacian.
    Auto,
    Fixed(f64),
}

/// First Dirichlet eigenvalue of `-Δ` on the unit ball in `d = 1, 2, 3`.
const BALL_EIGENVALUE: [f64; 3] = [2.467_401_100_272_339_7, 5.783_185_962_946_784, 9.869_604_401_089_358];

impl Relaxation {
    pub fn factor(&self, grid: &Grid) -> f64 {
        match *self {
            Relaxation::Fixed(w) => w,
            Relaxation::Auto => {
                let d = grid.dim();
                let h = grid.h();
                let rho = 1.0 - h * h * BALL_EIGENVALUE[d - 1] / (2.0 * d as f64);
                2.0 / (1.0 + (1.0 - rho * rho).max(0.0).sqrt())
            }
        }
    }
}

/// Parameters of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub exponent: Exponent,
    /// Regularization floors, strictly decreasing and positive.
    pub delta_schedule: Vec<f64>,
    /// Sweep budget per continuation stage.
    pub sweep_limit: usize,
    /// Target for the scaled residual on the last stage.
    pub residual_tol: f64,
    pub relaxation: Relaxation,
}

impl SolverConfig {
    pub fn new(exponent: Exponent) -> Self {
        Self {
            exponent,
            delta_schedule: vec![1e-2, 1e-3, 1e-4, 1e-6],
            sweep_limit: 50_000,
            residual_tol: 1e-8,
            relaxation: Relaxation::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_schedule.is_empty() {
            return Err(Error::InvalidConfig("empty delta schedule".into()));
        }
        if self.delta_schedule.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidConfig("delta values must be positive".into()));
        }
        if self.delta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("delta schedule must be strictly decreasing".into()));
        }
        if self.sweep_limit == 0 {
            return Err(Error::InvalidConfig("sweep limit must be positive".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidConfig("residual tolerance must be positive".into()));
        }
        if let Relaxation::Fixed(w) = self.relaxation {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::InvalidConfig(format!("relaxation {w} outside (0, 2)")));
            }
        }
        Ok(())
    }
}

/// `Σ_edges ½ ((u_a - u_b)/h)² h^d + Σ_interior u^γ h^d`, where the edges are
/// the lattice edges with at least one interior endpoint. Its gradient in the
/// interior values is `h^d (-Δ_h u + γ u^{γ-1})`.
pub fn discrete_energy(field: &GridField, exp: &Exponent) -> f64 {
    let grid = field.grid();
    let u = field.values();
    let h = grid.h();
    let vol = h.powi(grid.dim() as i32);
    let mut grad = 0.0;
    let mut pot = 0.0;
    for &i in grid.interior() {
        for axis in 0..grid.dim() {
            let s = grid.stride(axis);
            let fwd = u[i + s] - u[i];
            grad += fwd * fwd;
            if grid.kind(i - s) != NodeKind::Interior {
                let back = u[i] - u[i - s];
                grad += back * back;
            }
        }
        if u[i] > 0.0 {
            pot += u[i].powf(exp.gamma());
        }
    }
    (0.5 * grad / (h * h) + pot) * vol
}

/// Per-node regularized reaction term and its potential.
#[derive(Debug, Clone, Copy)]
struct Reaction {
    gamma: f64,
    delta: f64,
    /// Slope on the linear branch `u <= delta` (only used for `gamma < 1`).
    slope: f64,
}

impl Reaction {
    fn new(gamma: f64, delta: f64) -> Self {
        Self {
            gamma,
            delta,
            slope: gamma * delta.powf(gamma - 1.0),
        }
    }

    fn singular(&self) -> bool {
        self.gamma < 1.0
    }

    /// `f_δ(u)`: `γ max(u, δ)^{γ-1}` for `γ < 1`, `γ u^{γ-1}` otherwise.
    fn force(&self, u: f64) -> f64 {
        if self.singular() {
            if u <= self.delta {
                self.slope
            } else {
                self.gamma * u.powf(self.gamma - 1.0)
            }
        } else if self.gamma == 1.0 {
            1.0
        } else if u <= 0.0 {
            0.0
        } else {
            self.gamma * u.powf(self.gamma - 1.0)
        }
    }

    /// Antiderivative of [`Reaction::force`] vanishing at zero.
    fn potential(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if self.singular() && u <= self.delta {
            return self.slope * u;
        }
        if self.singular() {
            return u.powf(self.gamma) - self.delta.powf(self.gamma) + self.slope * self.delta;
        }
        u.powf(self.gamma)
    }

    /// `F_δ(a) - F_δ(b)` without cancellation when `a ≈ b` on a power branch.
    fn potential_diff(&self, a: f64, b: f64) -> f64 {
        let floor = if self.singular() { self.delta } else { 0.0 };
        if self.gamma != 1.0 && a > floor && b > floor {
            return b.powf(self.gamma) * (self.gamma * ((a - b) / b).ln_1p()).exp_m1();
        }
        if self.gamma == 1.0 || (self.singular() && a <= self.delta && b <= self.delta) {
            return self.force(0.0) * (a.max(0.0) - b.max(0.0));
        }
        self.potential(a) - self.potential(b)
    }
}

/// Minimizer over `u >= 0` of `φ(u) = (d u² - S u)/h² + F_δ(u)`, the energy
/// restricted to one node whose neighbours sum to `S`.
#[derive(Debug, Clone, Copy)]
struct LocalProblem {
    reaction: Reaction,
    /// `d / h²`
    quad: f64,
    /// `1 / h²`
    inv_h2: f64,
    /// Inflection point of `φ` on the smooth branch when `γ < 1`.
    inflection: f64,
}

impl LocalProblem {
    fn new(reaction: Reaction, d: usize, h: f64) -> Self {
        let g = reaction.gamma;
        let inflection = if g < 1.0 {
            (g * (1.0 - g) * h * h / (2.0 * d as f64)).powf(1.0 / (2.0 - g))
        } else {
            0.0
        };
        Self {
            reaction,
            quad: d as f64 / (h * h),
            inv_h2: 1.0 / (h * h),
            inflection,
        }
    }

    fn phi(&self, s: f64, u: f64) -> f64 {
        self.quad * u * u - s * self.inv_h2 * u + self.reaction.potential(u)
    }

    /// `φ(a) - φ(b)`.
    fn phi_diff(&self, s: f64, a: f64, b: f64) -> f64 {
        (a - b) * (self.quad * (a + b) - s * self.inv_h2) + self.reaction.potential_diff(a, b)
    }

    fn dphi(&self, s: f64, u: f64) -> f64 {
        2.0 * self.quad * u - s * self.inv_h2 + self.reaction.force(u)
    }

    /// `(φ'(u), φ''(u))` with a single power evaluation.
    fn slope_and_curvature(&self, s: f64, u: f64) -> (f64, f64) {
        let r = &self.reaction;
        let linear = 2.0 * self.quad * u - s * self.inv_h2;
        if r.gamma == 1.0 || u <= 0.0 || (r.singular() && u <= r.delta) {
            return (linear + r.force(u), 2.0 * self.quad);
        }
        let p = u.powf(r.gamma - 2.0);
        (linear + r.gamma * p * u, 2.0 * self.quad + r.gamma * (r.gamma - 1.0) * p)
    }

    /// Root of `φ'` in `[lo, hi]` where `φ'` is increasing, `φ'(lo) < 0 <= φ'(hi)`.
    fn root(&self, s: f64, mut lo: f64, mut hi: f64, start: f64) -> f64 {
        let mut u = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
        for _ in 0..100 {
            let (g, dg) = self.slope_and_curvature(s, u);
            if g == 0.0 {
                return u;
            }
            if g < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let step = g / dg;
            if step.abs() <= 4.0 * f64::EPSILON * u.abs() {
                return u;
            }
            let mut next = u - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return next;
            }
            u = next;
        }
        u
    }

    fn solve(&self, s: f64, current: f64) -> f64 {
        let r = &self.reaction;
        if r.gamma == 1.0 {
            return ((s - 1.0 / self.inv_h2) / (2.0 * self.quad / self.inv_h2)).max(0.0);
        }
        let upper = s / (2.0 * self.quad / self.inv_h2);
        if !r.singular() {
            if s <= 0.0 {
                return 0.0;
            }
            return self.root(s, 0.0, upper, current);
        }
        let mut best = 0.0;
        let mut best_phi = 0.0;
        let linear = ((s * self.inv_h2 - r.slope) / (2.0 * self.quad)).clamp(0.0, r.delta);
        let phi_linear = self.phi(s, linear);
        if phi_linear < best_phi {
            best = linear;
            best_phi = phi_linear;
        }
        let lower = r.delta.max(self.inflection);
        if upper > lower && self.dphi(s, lower) < 0.0 {
            let u = self.root(s, lower, upper, current);
            if self.phi(s, u) < best_phi {
                best = u;
            }
        }
        best
    }
}

/// Per-run solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Unregularized energy at the end of each stage.
    pub energy_history: Vec<f64>,
    /// Sweeps spent in each stage.
    pub sweeps: Vec<usize>,
    /// Scaled residual at the end of each stage.
    pub stage_residuals: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    /// Largest energy increase of any single sweep (should be at roundoff level).
    pub max_sweep_increase: f64,
    pub relaxation: f64,
}

impl SolveDiagnostics {
    /// Stage energies never increase by more than `slack`.
    pub fn energy_monotone(&self, slack: f64) -> bool {
        self.energy_history.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Output of [`minimize`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridField,
    pub diagnostics: SolveDiagnostics,
}

/// Scaled residual `(2d/h²) |u* - u| / max(1, f_δ)` of a field without updating it.
fn static_residual(u: &[f64], interior: &[usize], strides: &[usize], local: &LocalProblem) -> f64 {
    let mut residual: f64 = 0.0;
    for &i in interior {
        let s: f64 = strides.iter().map(|&st| u[i + st] + u[i - st]).sum();
        let target = local.solve(s, u[i]);
        let scale = local.reaction.force(u[i].max(target)).max(1.0);
        residual = residual.max(2.0 * local.quad * (target - u[i]).abs() / scale);
    }
    residual
}

/// Projected nonlinear over-relaxation for the regularized Euler–Lagrange
/// equation, continued over the `delta` schedule. Dirichlet nodes take
/// `boundary(x)`; interior nodes start at zero.
pub fn minimize(
    grid: &Grid,
    boundary: impl Fn(&[f64]) -> f64,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    let d = grid.dim();
    let mut field = GridField::zeros(grid.clone());
    for i in 0..grid.len() {
        if grid.kind(i) == NodeKind::Dirichlet {
            let x = grid.point(i);
            let v = boundary(&x[..d]);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Negative(format!(
                    "boundary data {v} at {:?}",
                    &x[..d]
                )));
            }
            field.values_mut()[i] = v;
        }
    }
    let omega = config.relaxation.factor(grid);
    let h = grid.h();
    let vol = h.powi(d as i32);
    let gamma = config.exponent.gamma();
    let interior = grid.interior().to_vec();
    let strides: Vec<usize> = (0..d).map(|a| grid.stride(a)).collect();

    let mut diag = SolveDiagnostics {
        energy_history: Vec::new(),
        sweeps: Vec::new(),
        stage_residuals: Vec::new(),
        final_residual: f64::INFINITY,
        converged: false,
        max_sweep_increase: 0.0,
        relaxation: omega,
    };
    let stages = config.delta_schedule.len();
    for (stage, &delta) in config.delta_schedule.iter().enumerate() {
        let last = stage + 1 == stages;
        let tol = if last { config.residual_tol } else { config.residual_tol.max(delta) };
        let local = LocalProblem::new(Reaction::new(gamma, delta), d, h);
        let mut residual = f64::INFINITY;
        let mut sweeps = 0;
        let u = field.values_mut();
        while sweeps < config.sweep_limit {
            sweeps += 1;
            residual = 0.0;
            let mut change = 0.0;
            for &i in &interior {
                let mut s = 0.0;
                for &st in &strides {
                    s += u[i + st] + u[i - st];
                }
                let old = u[i];
                let target = local.solve(s, old);
                let scale = local.reaction.force(old.max(target)).max(1.0);
                let r = 2.0 * local.quad * (target - old).abs() / scale;
                if r > residual {
                    residual = r;
                }
                let relaxed = (old + omega * (target - old)).max(0.0);
                let gain = local.phi_diff(s, relaxed, old);
                let (next, gain) = if gain <= 0.0 {
                    (relaxed, gain)
                } else {
                    (target, local.phi_diff(s, target, old))
                };
                u[i] = next;
                change += gain;
            }
            diag.max_sweep_increase = diag.max_sweep_increase.max(change * vol);
            if residual <= tol {
                residual = static_residual(u, &interior, &strides, &local);
                if residual <= tol {
                    break;
                }
            }
        }
        diag.sweeps.push(sweeps);
        diag.stage_residuals.push(residual);
        diag.energy_history.push(discrete_energy(&field, &config.exponent));
        if last {
            diag.final_residual = residual;
            diag.converged = residual <= tol;
        }
    }
    Ok(Solution { field, diagnostics: diag })
}
