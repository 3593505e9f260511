//! Closed-form solution of the linear heat equation on the half-line with a
//! Dirichlet boundary value, by odd reflection of the initial datum:
//!
//! `θ₂(x, t) = c + ∫₀^∞ (f(h) − c) [K(h − x) − K(h + x)] dh`,
//! `K(y) = (4πat)^{-1/2} exp(−y²/4at)`,
//!
//! where `f` is the initial datum and `c` the boundary value. The gradient is
//! `θ₂ₓ = 2 (f(0) − c) K(x) + ∫₀^∞ f'(h) [K(h − x) + K(h + x)] dh`.

use rayon::prelude::*;

use crate::diagnostics::{fit_decay, FitOutcome};
use crate::error::{Error, Result};
use crate::model::{norm_sq, Field, GasParams, Grid1D, WaveParams};
use crate::quadrature::GaussLegendre;
use crate::wave::{solve_tridiagonal, InitialProfile, WaveTrajectory};

/// Quadrature settings for kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub nodes_per_panel: usize,
    /// Half-width of the integration window in units of `√(4at)`.
    pub m_tail: f64,
    /// Below this time the kernel is treated as a delta and the datum returned.
    pub t_min: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            nodes_per_panel: 8,
            m_tail: 8.0,
            t_min: 1e-8,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_panel == 0 || !(self.m_tail >= 6.0) || !(self.t_min > 0.0) {
            return Err(Error::Parameter(format!(
                "kernel config needs nodes_per_panel >= 1, m_tail >= 6, t_min > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Initial datum for the reflected heat problem.
pub trait InitialDatum: Sync {
    fn value(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;
    /// Dirichlet value at `x = 0` for `t > 0`.
    fn boundary_value(&self) -> f64;
    /// Length over which the datum varies appreciably near `x`.
    fn feature_length(&self, x: f64) -> f64;
}

impl InitialDatum for InitialProfile {
    fn value(&self, x: f64) -> f64 {
        InitialProfile::value(self, x)
    }
    fn slope(&self, x: f64) -> f64 {
        self.d1(x)
    }
    fn boundary_value(&self) -> f64 {
        self.theta_minus
    }
    fn feature_length(&self, x: f64) -> f64 {
        (1.0 + self.alpha * x) / self.alpha
    }
}

/// `θ₂` for a given datum and diffusivity.
#[derive(Debug, Clone)]
pub struct HeatKernelSolution<D> {
    datum: D,
    a: f64,
    cfg: KernelConfig,
    rule: GaussLegendre,
}

impl<D: InitialDatum> HeatKernelSolution<D> {
    pub fn new(datum: D, a: f64, cfg: KernelConfig) -> Result<Self> {
        cfg.validate()?;
        if !(a > 0.0) {
            return Err(Error::Parameter(format!("diffusivity must be positive, got {a}")));
        }
        Ok(Self {
            datum,
            a,
            rule: GaussLegendre::new(cfg.nodes_per_panel),
            cfg,
        })
    }

    pub fn datum(&self) -> &D {
        &self.datum
    }

    /// Panel edges over `[max(0, x − mσ), x + mσ]`, each panel at most half the
    /// smaller of `σ` and the datum's local feature length.
    fn edges(&self, x: f64, sigma: f64) -> Vec<f64> {
        let lo = (x - self.cfg.m_tail * sigma).max(0.0);
        let hi = x + self.cfg.m_tail * sigma;
        let mut edges = vec![lo];
        let mut h = lo;
        while h < hi {
            let w = 0.5 * sigma.min(self.datum.feature_length(h));
            h = (h + w).min(hi);
            edges.push(h);
        }
        edges
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        if t < self.cfg.t_min {
            return self.datum.value(x);
        }
        let c = self.datum.boundary_value();
        if x == 0.0 {
            return c;
        }
        let s2 = 4.0 * self.a * t;
        let sigma = s2.sqrt();
        let norm = 1.0 / (std::f64::consts::PI.sqrt() * sigma);
        let integral = self.rule.integrate_panels(&self.edges(x, sigma), |h| {
            let k = (-(h - x) * (h - x) / s2).exp() - (-(h + x) * (h + x) / s2).exp();
            (self.datum.value(h) - c) * k
        });
        c + norm * integral
    }

    pub fn gradient(&self, x: f64, t: f64) -> f64 {
        if t < self.cfg.t_min {
            return self.datum.slope(x);
        }
        let s2 = 4.0 * self.a * t;
        let sigma = s2.sqrt();
        let norm = 1.0 / (std::f64::consts::PI.sqrt() * sigma);
        let jump = self.datum.value(0.0) - self.datum.boundary_value();
        let integral = self.rule.integrate_panels(&self.edges(x, sigma), |h| {
            let k = (-(h - x) * (h - x) / s2).exp() + (-(h + x) * (h + x) / s2).exp();
            self.datum.slope(h) * k
        });
        norm * (integral + 2.0 * jump * (-x * x / s2).exp())
    }

    /// Nodal values at time `t`; nodes are evaluated in parallel.
    pub fn field(&self, grid: &Grid1D, t: f64) -> Field {
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.value(grid.x(i), t))
            .collect();
        Field::from_vec(*grid, values)
    }

    pub fn gradient_field(&self, grid: &Grid1D, t: f64) -> Field {
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.gradient(grid.x(i), t))
            .collect();
        Field::from_vec(*grid, values)
    }
}

/// The comparison solution for the wave's initial temperature and `a`.
pub fn theta2_solution(
    params: &GasParams,
    wave: &WaveParams,
    cfg: KernelConfig,
) -> Result<HeatKernelSolution<InitialProfile>> {
    HeatKernelSolution::new(InitialProfile::new(params, wave), params.a(), cfg)
}

/// Pointwise `θ₂(x, t)`.
pub fn theta2_exact(
    x: f64,
    t: f64,
    params: &GasParams,
    wave: &WaveParams,
    cfg: KernelConfig,
) -> Result<f64> {
    if x < 0.0 || t < 0.0 {
        return Err(Error::Parameter(format!("need x, t >= 0, got ({x}, {t})")));
    }
    Ok(theta2_solution(params, wave, cfg)?.value(x, t))
}

/// Max over interior nodes of `θ_t − a θ_xx`, both by centered differences
/// with time offset `tau`.
pub fn discrete_residual<D: InitialDatum>(
    sol: &HeatKernelSolution<D>,
    grid: &Grid1D,
    t: f64,
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0 && t - tau >= sol.cfg.t_min) {
        return Err(Error::Parameter(format!(
            "residual needs t - tau >= t_min, got t = {t}, tau = {tau}"
        )));
    }
    let now = sol.field(grid, t);
    let before = sol.field(grid, t - tau);
    let after = sol.field(grid, t + tau);
    let (v, b, f) = (now.values(), before.values(), after.values());
    let dx2 = grid.dx() * grid.dx();
    Ok((1..grid.len() - 1)
        .map(|i| {
            let dt = (f[i] - b[i]) / (2.0 * tau);
            let dxx = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / dx2;
            (dt - sol.a * dxx).abs()
        })
        .fold(0.0, f64::max))
}

/// Max discrete residual of `θ₂` over `times`, with time offset equal to `dx`.
pub fn theta2_residual_check(
    grid: &Grid1D,
    times: &[f64],
    params: &GasParams,
    wave: &WaveParams,
    cfg: KernelConfig,
) -> Result<f64> {
    let sol = theta2_solution(params, wave, cfg)?;
    times.iter().try_fold(0.0f64, |m, &t| {
        Ok(m.max(discrete_residual(&sol, grid, t, grid.dx())?))
    })
}

/// Slack added to the claimed growth exponent 1/2.
pub const GROWTH_TOL: f64 = 0.1;

/// Growth exponent of a cumulative quantity against `(1 + t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub claimed_exponent: f64,
    pub tolerance: f64,
    pub series: Vec<(f64, f64)>,
    pub outcome: FitOutcome,
}

impl GrowthFit {
    fn new(series: Vec<(f64, f64)>, window: (f64, f64)) -> Result<Self> {
        let outcome = fit_decay(&series, window)?;
        Ok(Self {
            claimed_exponent: 0.5,
            tolerance: GROWTH_TOL,
            series,
            outcome,
        })
    }

    pub fn exponent(&self) -> Option<f64> {
        self.outcome.fit().map(|f| f.slope)
    }

    pub fn passed(&self) -> bool {
        self.exponent()
            .is_none_or(|e| e <= self.claimed_exponent + self.tolerance)
    }
}

/// Accumulate `∫₀^t ‖θ₂ₓ‖² dτ` at `times` (trapezoid in time, starting from
/// `t = 0`) and fit its growth over `window`.
pub fn check_gradient_energy_growth(
    grid: &Grid1D,
    times: &[f64],
    params: &GasParams,
    wave: &WaveParams,
    cfg: KernelConfig,
    window: (f64, f64),
) -> Result<GrowthFit> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| t <= 0.0) {
        return Err(Error::Parameter("times must be positive and increasing".into()));
    }
    let sol = theta2_solution(params, wave, cfg)?;
    let mut prev = (0.0, norm_sq(&sol.gradient_field(grid, 0.0)));
    let mut acc = 0.0;
    let mut series = Vec::with_capacity(times.len());
    for &t in times {
        let rate = norm_sq(&sol.gradient_field(grid, t));
        acc += 0.5 * (t - prev.0) * (prev.1 + rate);
        series.push((t, acc));
        prev = (t, rate);
    }
    GrowthFit::new(series, window)
}

/// Fit the growth of `‖Θ − θ₂‖² + ∫₀^t ‖(ln Θ)_x‖² dτ` along the stored
/// snapshots of a wave trajectory.
pub fn compare_theta_theta2(
    traj: &WaveTrajectory,
    cfg: KernelConfig,
    window: (f64, f64),
) -> Result<GrowthFit> {
    let sol = theta2_solution(&traj.params, &traj.wave, cfg)?;
    let mut series = Vec::new();
    for snap in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        let exact = sol.field(&traj.grid, snap.t);
        let gap = norm_sq(&snap.theta.zip_map(&exact, |a, b| a - b));
        let rec = traj
            .records
            .iter()
            .find(|r| r.t == snap.t)
            .ok_or_else(|| Error::Diagnostic(format!("no record at snapshot t = {}", snap.t)))?;
        series.push((snap.t, gap + rec.cum_ln_x_sq));
    }
    GrowthFit::new(series, window)
}

/// Crank–Nicolson integration of `θ_t = a θ_xx` with Dirichlet values `left`
/// and `right(t)`; the first four steps are backward-Euler half steps
/// (Rannacher start-up) to damp the incompatible initial corner.
pub fn crank_nicolson_diffusion(
    theta0: &Field,
    a: f64,
    t_end: f64,
    steps: usize,
    left: f64,
    right: impl Fn(f64) -> f64,
) -> Result<Field> {
    if steps < 2 || !(t_end > 0.0) || !(a > 0.0) {
        return Err(Error::Parameter(format!(
            "need steps >= 2, t_end > 0, a > 0; got {steps}, {t_end}, {a}"
        )));
    }
    let grid = *theta0.grid();
    let n = grid.len();
    let m = n - 2;
    let dt = t_end / steps as f64;
    let r = a / (grid.dx() * grid.dx());
    let mut u = theta0.values().to_vec();
    u[0] = left;
    let mut t = 0.0;
    // (step length, implicit weight)
    let mut plan: Vec<(f64, f64)> = vec![(0.5 * dt, 1.0); 4];
    plan.extend(std::iter::repeat_n((dt, 0.5), steps - 2));
    let mut rhs = vec![0.0; m];
    for (h, w) in plan {
        let t_next = t + h;
        let (lo, di, up) = (vec![-w * h * r; m], vec![1.0 + 2.0 * w * h * r; m], vec![-w * h * r; m]);
        let ex = (1.0 - w) * h * r;
        for k in 0..m {
            let i = k + 1;
            rhs[k] = u[i] + ex * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
        }
        let right_next = right(t_next);
        rhs[0] += w * h * r * left;
        rhs[m - 1] += w * h * r * right_next;
        let sol = solve_tridiagonal(&lo, &di, &up, &rhs);
        u[1..n - 1].copy_from_slice(&sol);
        u[n - 1] = right_next;
        t = t_next;
    }
    Field::new(grid, u)
}
