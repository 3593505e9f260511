//! Time integration of the Lagrangian Navier–Stokes system
//!
//! `v_t = u_x`, `u_t + (Rθ/v)_x = μ (u_x/v)_x`,
//! `c_v θ_t + R(θ/v) u_x = κ (θ_x/v)_x + μ u_x²/v`
//!
//! with `θ(0, t) = θ₋` and the stress condition `(Rθ₋/v − μu_x/v)(0, t) = p₊`,
//! rearranged as `u_x(0, t) = p₊ (v₋ − v(0, t)) / μ`. The far node keeps its
//! initial value.
//!
//! Semi-discretization: collocated nodes, central differences for `u_x` and
//! `p_x`, compact flux differences with face-averaged `v` for the viscous and
//! conductive terms. At `x = 0` the momentum equation is `u_t = σ_x` with the
//! stress `σ = −p + μu_x/v` taken at nodes `0`, `½`, `3⁄2`.
//!
//! Unknowns are interleaved as `y[3i + c]` with `c = 0, 1, 2` for `v, u, θ`,
//! which keeps the Jacobian banded with 5 sub- and 7 super-diagonals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::{BandedLu, BandedMatrix};
use crate::diagnostics::{
    energy_functional, oscillation, perturbation, PerturbationFields, PoincareMonitor,
};
use crate::error::{Error, Result};
use crate::model::{norm, Field, GasParams, GasState, Grid1D, NormKind};
use crate::wave::{WaveEvolution, WaveProfile};

/// Largest CFL factor accepted by the explicit step.
pub const MAX_CFL: f64 = 0.5;

const KL: usize = 5;
const KU: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Two-stage explicit midpoint rule under the parabolic step limit.
    ExplicitMidpoint,
    /// Two-stage L-stable singly diagonally implicit Runge–Kutta rule.
    ImplicitSdirk2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub cfl_factor: f64,
    pub dt_max: f64,
    /// Contamination threshold at the 90%-of-L station.
    pub eps_bnd: f64,
    pub scheme: Scheme,
    /// First implicit step; `None` means `dx`.
    pub dt_initial: Option<f64>,
    /// Implicit step growth factor after each accepted step.
    pub growth: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl_factor: 0.2,
            dt_max: 0.1,
            eps_bnd: 1e-8,
            scheme: Scheme::ImplicitSdirk2,
            dt_initial: None,
            growth: 1.2,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= MAX_CFL) {
            return Err(Error::Parameter(format!(
                "cfl_factor must lie in (0, {MAX_CFL}], got {}",
                self.cfl_factor
            )));
        }
        if !(self.dt_max > 0.0 && self.eps_bnd > 0.0 && self.growth >= 1.0) {
            return Err(Error::Parameter(
                "dt_max and eps_bnd must be positive and growth >= 1".into(),
            ));
        }
        if let Some(dt) = self.dt_initial {
            if !(dt > 0.0) {
                return Err(Error::Parameter(format!("dt_initial must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Explicit step limit: the parabolic bound `cfl dx² min v / max(μ, κ/c_v)`
/// capped by the acoustic bound `cfl dx / max(|u| + √(γRθ/v))`.
pub fn stable_dt(state: &GasState, params: &GasParams, cfl_factor: f64) -> f64 {
    let dx = state.grid().dx();
    let diff = params.mu().max(params.kappa() / params.c_v());
    let parabolic = cfl_factor * dx * dx * state.v.min() / diff;
    let gr = params.gamma() * params.r();
    let speed = (0..state.grid().len())
        .map(|i| {
            let (v, u, th) = (state.v.values()[i], state.u.values()[i], state.theta.values()[i]);
            u.abs() + (gr * th / v).sqrt()
        })
        .fold(0.0, f64::max);
    let acoustic = if speed > 0.0 {
        cfl_factor * dx / speed
    } else {
        f64::INFINITY
    };
    parabolic.min(acoustic)
}

fn pack(state: &GasState) -> Vec<f64> {
    let n = state.grid().len();
    let mut y = vec![0.0; 3 * n];
    for i in 0..n {
        y[3 * i] = state.v.values()[i];
        y[3 * i + 1] = state.u.values()[i];
        y[3 * i + 2] = state.theta.values()[i];
    }
    y
}

fn unpack(y: &[f64], grid: Grid1D, t: f64) -> Result<GasState> {
    let n = grid.len();
    let comp = |c: usize| Field::new(grid, (0..n).map(|i| y[3 * i + c]).collect());
    GasState::new(t, comp(0)?, comp(1)?, comp(2)?)
}

fn positive(y: &[f64]) -> bool {
    y.chunks_exact(3).all(|s| s[0] > 0.0 && s[2] > 0.0)
}

/// `u_x(0)` from the stress condition.
fn boundary_ux(params: &GasParams, v0: f64) -> f64 {
    params.p_plus() * (params.v_minus() - v0) / params.mu()
}

/// Semi-discrete right-hand side; the pinned `θ(0)` and the far node get 0.
fn rhs(y: &[f64], out: &mut [f64], params: &GasParams, h: f64) {
    let n = y.len() / 3;
    let (r, mu, kappa, cv) = (params.r(), params.mu(), params.kappa(), params.c_v());
    let v = |i: usize| y[3 * i];
    let u = |i: usize| y[3 * i + 1];
    let th = |i: usize| y[3 * i + 2];
    let p = |i: usize| r * th(i) / v(i);
    let h2 = h * h;

    // node 0
    let ux0 = boundary_ux(params, v(0));
    let sigma0 = -p(0) + mu * ux0 / v(0);
    let sigma_face = |k: usize| {
        let vbar = 0.5 * (v(k) + v(k + 1));
        -0.5 * (p(k) + p(k + 1)) + mu * (u(k + 1) - u(k)) / (h * vbar)
    };
    out[0] = ux0;
    out[1] = (9.0 * (sigma_face(0) - sigma0) - (sigma_face(1) - sigma0)) / (3.0 * h);
    out[2] = 0.0;

    for i in 1..n - 1 {
        let vr = 0.5 * (v(i) + v(i + 1));
        let vl = 0.5 * (v(i - 1) + v(i));
        let ux = (u(i + 1) - u(i - 1)) / (2.0 * h);
        out[3 * i] = ux;
        out[3 * i + 1] = -(p(i + 1) - p(i - 1)) / (2.0 * h)
            + mu * ((u(i + 1) - u(i)) / vr - (u(i) - u(i - 1)) / vl) / h2;
        out[3 * i + 2] = (-p(i) * ux
            + kappa * ((th(i + 1) - th(i)) / vr - (th(i) - th(i - 1)) / vl) / h2
            + mu * ux * ux / v(i))
            / cv;
    }
    let last = 3 * (n - 1);
    out[last..].iter_mut().for_each(|x| *x = 0.0);
}

/// One explicit midpoint step. Rejects `dt` above the `MAX_CFL` limit.
pub fn step_ns(state: &GasState, dt: f64, params: &GasParams) -> Result<GasState> {
    let limit = stable_dt(state, params, MAX_CFL);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let h = state.grid().dx();
    let y = pack(state);
    let mut k = vec![0.0; y.len()];
    rhs(&y, &mut k, params, h);
    let mid: Vec<f64> = y.iter().zip(&k).map(|(a, b)| a + 0.5 * dt * b).collect();
    if !positive(&mid) {
        return Err(positivity(state.t + 0.5 * dt, &mid, state.grid()));
    }
    rhs(&mid, &mut k, params, h);
    let next: Vec<f64> = y.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
    if !positive(&next) {
        return Err(positivity(state.t + dt, &next, state.grid()));
    }
    unpack(&next, *state.grid(), state.t + dt)
}

fn positivity(t: f64, y: &[f64], grid: &Grid1D) -> Error {
    let (i, s) = y
        .chunks_exact(3)
        .enumerate()
        .find(|(_, s)| !(s[0] > 0.0 && s[2] > 0.0))
        .expect("called only on non-positive states");
    Error::Positivity {
        t,
        detail: format!("v = {}, theta = {} at x = {}", s[0], s[2], grid.x(i)),
    }
}

/// Diagonal coefficient of the two-stage L-stable SDIRK rule.
const SDIRK_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 25;

/// `I − c J(y)` with `J` from colored forward differences.
fn iteration_matrix(y: &[f64], f0: &[f64], c: f64, params: &GasParams, h: f64) -> BandedMatrix {
    let m = y.len();
    let mut mat = BandedMatrix::zeros(m, KL, KU);
    let colors = KL + KU + 1;
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; m];
    let eps: Vec<f64> = y.iter().map(|x| 1e-7 * x.abs().max(1.0)).collect();
    for color in 0..colors {
        for j in (color..m).step_by(colors) {
            yp[j] = y[j] + eps[j];
        }
        rhs(&yp, &mut fp, params, h);
        for j in (color..m).step_by(colors) {
            yp[j] = y[j];
            let lo = j.saturating_sub(KU);
            let hi = (j + KL).min(m - 1);
            for i in lo..=hi {
                let d = (fp[i] - f0[i]) / eps[j];
                if d != 0.0 {
                    mat.add(i, j, -c * d);
                }
            }
        }
    }
    for i in 0..m {
        mat.add(i, i, 1.0);
    }
    mat
}

/// One step of the two-stage SDIRK rule with a freshly built iteration matrix.
pub fn step_ns_implicit(state: &GasState, dt: f64, params: &GasParams) -> Result<GasState> {
    ImplicitStepper::new(*params).step(state, dt)
}

/// Number of steps an iteration matrix may be reused at a fixed `dt`.
const MAX_MATRIX_REUSE: usize = 50;

/// SDIRK stepper that keeps the factored iteration matrix between steps of
/// equal length and rebuilds it when the simplified Newton iteration stalls.
#[derive(Debug, Clone)]
pub struct ImplicitStepper {
    params: GasParams,
    cache: Option<(f64, BandedLu, usize)>,
}

impl ImplicitStepper {
    pub fn new(params: GasParams) -> Self {
        Self { params, cache: None }
    }

    pub fn step(&mut self, state: &GasState, dt: f64) -> Result<GasState> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        if let Some((cached_dt, lu, uses)) = &mut self.cache {
            if *cached_dt == dt && *uses < MAX_MATRIX_REUSE {
                *uses += 1;
                match sdirk_step(state, dt, &self.params, lu) {
                    Err(Error::NewtonFailed { .. }) => {}
                    other => return other,
                }
            }
        }
        self.cache = None;
        let h = state.grid().dx();
        let y = pack(state);
        let mut f0 = vec![0.0; y.len()];
        rhs(&y, &mut f0, &self.params, h);
        let lu = iteration_matrix(&y, &f0, SDIRK_GAMMA * dt, &self.params, h).factor()?;
        let out = sdirk_step(state, dt, &self.params, &lu);
        if out.is_ok() {
            self.cache = Some((dt, lu, 0));
        }
        out
    }
}

/// Stages `Y₁ = y + γ dt f(Y₁)`, `Y₂ = y + (1−γ) dt f(Y₁) + γ dt f(Y₂)`, each
/// solved by simplified Newton with the given factored `I − γ dt J`.
fn sdirk_step(state: &GasState, dt: f64, params: &GasParams, lu: &BandedLu) -> Result<GasState> {
    let h = state.grid().dx();
    let t = state.t;
    let y = pack(state);
    let m = y.len();
    let gdt = SDIRK_GAMMA * dt;
    let mut f0 = vec![0.0; m];
    rhs(&y, &mut f0, params, h);

    let solve_stage = |base: &[f64], guess: Vec<f64>| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut z = guess;
        let mut fz = vec![0.0; m];
        let mut g = vec![0.0; m];
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            rhs(&z, &mut fz, params, h);
            let mut res = 0.0f64;
            for i in 0..m {
                g[i] = base[i] + gdt * fz[i] - z[i];
                res = res.max(g[i].abs());
            }
            if !res.is_finite() || res >= residual {
                break;
            }
            residual = res;
            if residual < NEWTON_TOL {
                return Ok((z, fz));
            }
            lu.solve(&mut g);
            for (zi, di) in z.iter_mut().zip(&g) {
                *zi += di;
            }
            if !positive(&z) {
                break;
            }
        }
        Err(Error::NewtonFailed { t, dt, residual })
    };

    let guess1: Vec<f64> = y.iter().zip(&f0).map(|(a, b)| a + gdt * b).collect();
    let guess1 = if positive(&guess1) { guess1 } else { y.clone() };
    let (y1, f1) = solve_stage(&y, guess1)?;
    let base2: Vec<f64> = (0..m).map(|i| y[i] + (1.0 - SDIRK_GAMMA) * dt * f1[i]).collect();
    let guess2: Vec<f64> = (0..m).map(|i| y[i] + dt * f1[i]).collect();
    let guess2 = if positive(&guess2) { guess2 } else { y1 };
    let (y2, _) = solve_stage(&base2, guess2)?;
    if !positive(&y2) {
        return Err(positivity(t + dt, &y2, state.grid()));
    }
    unpack(&y2, *state.grid(), t + dt)
}

/// Profile of one perturbation component before amplitude scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `e^{−((x−c)/w)²} − e^{−((x+c)/w)²}`.
    GaussianBump,
    /// `(1 − r²)³` on `|r| < 1`, `r = (x − c)/w`.
    CompactBump,
    /// `sin(k (x − c)) (1 − r²)³`.
    DerivativeHeavy { wavenumber: f64 },
    /// Seeded sum of `modes` sine modes times `(1 − r²)³`.
    RandomModes { seed: u64, modes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub shape: Shape,
    /// Multipliers for `(φ₀, ψ₀, ζ₀)`.
    pub amplitude: [f64; 3],
    pub center: f64,
    pub width: f64,
    /// If set, the triple is rescaled so that `‖(φ₀, ψ₀, ζ₀)‖_{L²}` equals it.
    pub l2_target: Option<f64>,
    /// `φ₀(0)`, added as `φ₀(0) e^{−(x/w)²}`.
    pub phi_boundary: f64,
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        Self {
            shape: Shape::CompactBump,
            amplitude: [0.0; 3],
            center: 10.0,
            width: 5.0,
            l2_target: None,
            phi_boundary: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.amplitude.iter().all(|a| a.is_finite())
            && self.phi_boundary.is_finite()
            && self.center.is_finite();
        if !finite || !(self.width > 0.0) {
            return Err(Error::Spec(format!("non-finite amplitude or bad width in {self:?}")));
        }
        let compact = !matches!(self.shape, Shape::GaussianBump);
        if compact && self.center < self.width {
            return Err(Error::Spec(format!(
                "compact shape centred at {} with half-width {} reaches x = 0",
                self.center, self.width
            )));
        }
        if let Some(t) = self.l2_target {
            if !(t >= 0.0) {
                return Err(Error::Spec(format!("l2_target must be non-negative, got {t}")));
            }
        }
        Ok(())
    }

    /// Unit shape sampled on the grid.
    fn profile(&self, grid: &Grid1D) -> Field {
        let (c, w) = (self.center, self.width);
        let window = move |x: f64| {
            let r = (x - c) / w;
            if r.abs() < 1.0 {
                (1.0 - r * r).powi(3)
            } else {
                0.0
            }
        };
        match self.shape {
            Shape::GaussianBump => Field::from_fn(*grid, |x| {
                (-((x - c) / w).powi(2)).exp() - (-((x + c) / w).powi(2)).exp()
            }),
            Shape::CompactBump => Field::from_fn(*grid, window),
            Shape::DerivativeHeavy { wavenumber } => {
                Field::from_fn(*grid, |x| (wavenumber * (x - c)).sin() * window(x))
            }
            Shape::RandomModes { seed, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coef: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
                Field::from_fn(*grid, |x| {
                    let s = (x - c + w) / (2.0 * w) * std::f64::consts::PI;
                    let sum: f64 = coef
                        .iter()
                        .enumerate()
                        .map(|(j, a)| a * ((j + 1) as f64 * s).sin())
                        .sum();
                    sum * window(x)
                })
            }
        }
    }

    /// The perturbation fields at `t` on `grid`.
    pub fn fields(&self, grid: &Grid1D, t: f64) -> Result<PerturbationFields> {
        self.validate()?;
        let unit = self.profile(grid);
        let mut comps: Vec<Field> = self.amplitude.iter().map(|&a| unit.map(|b| a * b)).collect();
        if let Some(target) = self.l2_target {
            let current = comps.iter().map(|f| norm(f, NormKind::L2).powi(2)).sum::<f64>().sqrt();
            if current == 0.0 && target > 0.0 {
                return Err(Error::Spec("cannot rescale a zero perturbation".into()));
            }
            let k = if current == 0.0 { 0.0 } else { target / current };
            comps = comps.iter().map(|f| f.map(|v| k * v)).collect();
        }
        let w = self.width;
        let pb = self.phi_boundary;
        if pb != 0.0 {
            comps[0] = comps[0].zip_map(&Field::from_fn(*grid, |x| (-(x / w).powi(2)).exp()), |a, b| {
                a + pb * b
            });
        }
        let zeta = comps.pop().expect("three components");
        let psi = comps.pop().expect("three components");
        let phi = comps.pop().expect("three components");
        Ok(PerturbationFields { t, phi, psi, zeta })
    }
}

/// `(V, U, Θ) + (φ₀, ψ₀, ζ₀)`; errors if positivity is lost.
pub fn initial_perturbed_state(profile: &WaveProfile, spec: &PerturbationSpec) -> Result<GasState> {
    let pert = spec.fields(profile.grid(), profile.t)?;
    crate::diagnostics::superpose(profile, &pert).map_err(|e| match e {
        Error::Positivity { detail, .. } => Error::Spec(format!("perturbation destroys positivity: {detail}")),
        other => other,
    })
}

/// `φ₀(0) e^{−p₊ t / μ}`.
pub fn boundary_ode_reference(t: f64, phi0_at_0: f64, params: &GasParams) -> f64 {
    phi0_at_0 * (-params.p_plus() * t / params.mu()).exp()
}

/// `(Rθ₋/v − μ u_x/v)(0) − p₊` with the boundary `u_x` used by the scheme.
pub fn stress_residual(state: &GasState, params: &GasParams) -> f64 {
    let v0 = state.v.first();
    let ux0 = boundary_ux(params, v0);
    params.r() * params.theta_minus() / v0 - params.mu() * ux0 / v0 - params.p_plus()
}

/// Monitored scalars at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoupledRecord {
    pub t: f64,
    /// `max(|φ|, |ψ|, |ζ|)`
    pub sup_pert: f64,
    pub l2_pert: f64,
    pub h1_seminorm_pert: f64,
    pub energy: f64,
    pub osc_theta: f64,
    pub osc_rho: f64,
    /// `v(0, t) − v₋`
    pub boundary_phi: f64,
    pub boundary_ode_ref: f64,
    pub stress_residual: f64,
    pub poincare_lhs: f64,
    pub poincare_ratio: f64,
    /// Drift of the perturbation at the 90%-of-L station since `t = 0`.
    pub contamination: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub steps: usize,
}

/// Extremes of `v` and `θ` over every accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub v_min: f64,
    pub v_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Extremes {
    fn of(state: &GasState) -> Self {
        Self {
            v_min: state.v.min(),
            v_max: state.v.max(),
            theta_min: state.theta.min(),
            theta_max: state.theta.max(),
        }
    }

    fn merge(&mut self, state: &GasState) {
        let o = Self::of(state);
        self.v_min = self.v_min.min(o.v_min);
        self.v_max = self.v_max.max(o.v_max);
        self.theta_min = self.theta_min.min(o.theta_min);
        self.theta_max = self.theta_max.max(o.theta_max);
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: GasParams,
    /// Gas states at the snapshot times, `t = 0` first.
    pub states: Vec<GasState>,
    pub records: Vec<CoupledRecord>,
    pub final_wave: WaveProfile,
    pub extremes: Extremes,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &GasState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn series(&self, pick: impl Fn(&CoupledRecord) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, pick(r))).collect()
    }
}

/// Station index for the contamination monitor.
fn station(grid: &Grid1D) -> usize {
    grid.nearest(0.9 * grid.length())
}

fn station_level(p: &PerturbationFields, i: usize) -> f64 {
    p.components().iter().fold(0.0, |m, f| m.max(f.values()[i].abs()))
}

/// Advance gas and wave together to `horizon`, evaluating diagnostics and
/// calling `hook` at each snapshot time (and at `t = 0` and `horizon`).
///
/// The monitor aborts with [`Error::Contamination`] once the perturbation at
/// the 90%-of-L station has moved by more than `ctl.eps_bnd` from its initial
/// value.
pub fn run_coupled(
    mut wave: WaveEvolution,
    initial: GasState,
    horizon: f64,
    snapshot_times: &[f64],
    ctl: &StepControl,
    mut hook: impl FnMut(&GasState, &WaveProfile, &CoupledRecord) -> Result<()>,
) -> Result<Trajectory> {
    ctl.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    if wave.t() != initial.t || wave.theta().grid() != initial.grid() {
        return Err(Error::Parameter("wave and gas must share grid and start time".into()));
    }
    let params = *wave.params();
    let grid = *initial.grid();
    let k_station = station(&grid);
    let mut stops: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > initial.t && t <= horizon)
        .collect();
    stops.push(horizon);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let profile0 = wave.profile()?;
    let pert0 = perturbation(&initial, &profile0)?;
    let station0 = station_level(&pert0, k_station);
    let mut poincare = PoincareMonitor::new(pert0.phi.first());
    let phi0_at_0 = initial.v.first() - params.v_minus();

    let mut extremes = Extremes::of(&initial);
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut total_steps = 0usize;

    let mut observe = |state: &GasState,
                       profile: &WaveProfile,
                       steps: usize,
                       records: &mut Vec<CoupledRecord>,
                       states: &mut Vec<GasState>|
     -> Result<()> {
        let pert = perturbation(state, profile)?;
        poincare.record(&pert, profile)?;
        let pr = poincare.report();
        let (osc_theta, osc_rho) = oscillation(state);
        let drift = (station_level(&pert, k_station) - station0).abs();
        let rec = CoupledRecord {
            t: state.t,
            sup_pert: pert.sup(),
            l2_pert: pert.l2(),
            h1_seminorm_pert: pert.h1_seminorm()?,
            energy: energy_functional(state, profile, &params)?,
            osc_theta,
            osc_rho,
            boundary_phi: state.v.first() - params.v_minus(),
            boundary_ode_ref: boundary_ode_reference(state.t, phi0_at_0, &params),
            stress_residual: stress_residual(state, &params),
            poincare_lhs: pr.lhs,
            poincare_ratio: pr.ratio,
            contamination: drift,
            v_min: state.v.min(),
            v_max: state.v.max(),
            theta_min: state.theta.min(),
            theta_max: state.theta.max(),
            steps,
        };
        hook(state, profile, &rec)?;
        records.push(rec);
        states.push(state.clone());
        if drift > ctl.eps_bnd {
            return Err(Error::Contamination {
                t: state.t,
                station: grid.x(k_station),
                level: drift,
                threshold: ctl.eps_bnd,
                suggested_length: (1.5 * grid.length()).ceil(),
            });
        }
        Ok(())
    };

    observe(&initial, &profile0, 0, &mut records, &mut states)?;
    let mut state = initial;
    let mut dt_implicit = ctl.dt_initial.unwrap_or(grid.dx()).min(ctl.dt_max);
    let mut stepper = ImplicitStepper::new(params);

    for stop in stops {
        while state.t < stop {
            let remaining = stop - state.t;
            let proposal = match ctl.scheme {
                Scheme::ExplicitMidpoint => stable_dt(&state, &params, ctl.cfl_factor).min(ctl.dt_max),
                Scheme::ImplicitSdirk2 => dt_implicit,
            };
            let landing = proposal >= remaining * (1.0 - 1e-12);
            let dt = if landing { remaining } else { proposal };
            let result = match ctl.scheme {
                Scheme::ExplicitMidpoint => step_ns(&state, dt, &params),
                Scheme::ImplicitSdirk2 => stepper.step(&state, dt),
            };
            match result {
                Ok(mut next) => {
                    if landing {
                        next.t = stop;
                    }
                    extremes.merge(&next);
                    state = next;
                    total_steps += 1;
                    if !landing {
                        dt_implicit = (dt_implicit * ctl.growth).min(ctl.dt_max);
                    }
                }
                Err(Error::NewtonFailed { .. }) if ctl.scheme == Scheme::ImplicitSdirk2 => {
                    dt_implicit = 0.5 * dt;
                    if dt_implicit < 1e-12 {
                        return Err(Error::StepUnderflow { t: state.t, dt: dt_implicit });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        wave.advance_to(stop, |_, _| Ok(()))?;
        let profile = wave.profile()?;
        observe(&state, &profile, total_steps, &mut records, &mut states)?;
    }

    Ok(Trajectory {
        params,
        states,
        records,
        final_wave: wave.profile()?,
        extremes,
        steps: total_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WaveParams;
    use crate::wave::{build_profile, initial_theta, WaveControl};
    use approx::assert_relative_eq;

    fn gas() -> GasParams {
        GasParams::new(1.0, 5.0 / 3.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap()
    }

    fn flat() -> GasParams {
        GasParams::new(1.0, 1.4, 1.0, 1.0, 2.0, 2.0, 1.0).unwrap()
    }

    fn equilibrium(params: &GasParams, grid: Grid1D) -> GasState {
        GasState::new(
            0.0,
            Field::constant(grid, params.v_plus()),
            Field::constant(grid, 0.0),
            Field::constant(grid, params.theta_plus()),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = flat();
        let s = equilibrium(&p, Grid1D::new(10.0, 101).unwrap());
        let dt = stable_dt(&s, &p, 0.2);
        let next = step_ns(&s, dt, &p).unwrap();
        assert_eq!(next.v, s.v);
        assert_eq!(next.u, s.u);
        assert_eq!(next.theta, s.theta);
        let next = step_ns_implicit(&s, 0.5, &p).unwrap();
        assert_eq!(next.theta, s.theta);
        assert_eq!(next.v, s.v);
    }

    #[test]
    fn stable_dt_formula() {
        let p = flat();
        let grid = Grid1D::new(10.0, 101).unwrap();
        let s = equilibrium(&p, grid);
        let dx = grid.dx();
        let diff = p.mu().max(p.kappa() / p.c_v());
        let parabolic = 0.2 * dx * dx * 1.0 / diff;
        let acoustic = 0.2 * dx / (1.4f64 * 2.0).sqrt();
        assert_eq!(stable_dt(&s, &p, 0.2), parabolic.min(acoustic));

        let p2 = p.with_mu(2.0 * diff).unwrap();
        let p3 = p.with_mu(4.0 * diff).unwrap();
        assert_relative_eq!(stable_dt(&s, &p2, 0.2) / stable_dt(&s, &p3, 0.2), 2.0, epsilon = 1e-12);

        let fine = equilibrium(&p3, Grid1D::new(10.0, 201).unwrap());
        assert_relative_eq!(stable_dt(&s, &p3, 0.2) / stable_dt(&fine, &p3, 0.2), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = gas();
        let s = equilibrium(&flat(), Grid1D::new(10.0, 101).unwrap());
        let limit = stable_dt(&s, &p, MAX_CFL);
        assert!(matches!(step_ns(&s, 2.0 * limit, &p), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn degenerate_wave_is_stationary() {
        let p = flat();
        let grid = Grid1D::new(10.0, 101).unwrap();
        let w = WaveParams::new(1.0, 0.5, 2.0).unwrap();
        let prof = build_profile(&initial_theta(&grid, &p, &w), 0.0, &p).unwrap();
        let s = initial_perturbed_state(&prof, &PerturbationSpec::zero()).unwrap();
        let next = step_ns_implicit(&s, 0.3, &p).unwrap();
        assert_eq!(next.v, s.v);
        assert_eq!(next.u, s.u);
        assert_eq!(next.theta, s.theta);
    }

    #[test]
    fn boundary_pins_and_stress_condition() {
        let p = gas();
        let grid = Grid1D::new(20.0, 401).unwrap();
        let w = WaveParams::new(1.0, 0.5, 2.0).unwrap();
        let prof = build_profile(&initial_theta(&grid, &p, &w), 0.0, &p).unwrap();
        let spec = PerturbationSpec {
            phi_boundary: 0.05,
            ..PerturbationSpec::zero()
        };
        let s = initial_perturbed_state(&prof, &spec).unwrap();
        let next = step_ns_implicit(&s, 0.01, &p).unwrap();
        assert_eq!(next.theta.first(), p.theta_minus());
        assert_eq!(next.v.last(), s.v.last());
        assert_eq!(next.u.last(), s.u.last());
        assert_eq!(next.theta.last(), s.theta.last());
        assert!(stress_residual(&next, &p).abs() < 1e-14);
    }

    #[test]
    fn explicit_and_implicit_routes_agree() {
        let p = gas();
        let grid = Grid1D::new(10.0, 201).unwrap();
        let w = WaveParams::new(1.0, 0.5, 2.0).unwrap();
        let prof = build_profile(&initial_theta(&grid, &p, &w), 0.0, &p).unwrap();
        let spec = PerturbationSpec {
            amplitude: [0.01, 0.01, 0.01],
            center: 5.0,
            width: 2.0,
            phi_boundary: 0.01,
            ..PerturbationSpec::zero()
        };
        let s0 = initial_perturbed_state(&prof, &spec).unwrap();
        let horizon = 0.1;
        let mut ex = s0.clone();
        while ex.t < horizon - 1e-14 {
            let dt = stable_dt(&ex, &p, 0.2).min(horizon - ex.t);
            ex = step_ns(&ex, dt, &p).unwrap();
        }
        let mut errs = Vec::new();
        for steps in [20, 40] {
            let mut im = s0.clone();
            for _ in 0..steps {
                im = step_ns_implicit(&im, horizon / steps as f64, &p).unwrap();
            }
            let d = im.v.zip_map(&ex.v, |a, b| a - b).max_abs()
                + im.u.zip_map(&ex.u, |a, b| a - b).max_abs()
                + im.theta.zip_map(&ex.theta, |a, b| a - b).max_abs();
            errs.push(d);
        }
        assert!(errs[1] < 1e-5, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn perturbation_shapes() {
        let grid = Grid1D::new(20.0, 2001).unwrap();
        let prof = build_profile(&Field::constant(grid, 2.0), 0.0, &flat()).unwrap();
        let zero = initial_perturbed_state(&prof, &PerturbationSpec::zero()).unwrap();
        assert_eq!(zero.v, prof.v);
        assert_eq!(zero.u, prof.u);
        assert_eq!(zero.theta, prof.theta);

        let bump = PerturbationSpec {
            amplitude: [0.0, 0.0, 0.1],
            center: 5.0,
            width: 1.0,
            ..PerturbationSpec::zero()
        };
        let p = bump.fields(&grid, 0.0).unwrap();
        assert!(p.zeta.first().abs() < 1e-10);
        for shape in [Shape::GaussianBump, Shape::RandomModes { seed: 3, modes: 6 }] {
            let f = PerturbationSpec { shape, ..bump }.fields(&grid, 0.0).unwrap();
            assert!(f.zeta.first().abs() < 1e-10);
        }

        let eta = 0.02;
        let heavy = PerturbationSpec {
            shape: Shape::DerivativeHeavy { wavenumber: 25.0 },
            amplitude: [1.0, 1.0, 1.0],
            center: 10.0,
            width: 5.0,
            l2_target: Some(eta),
            phi_boundary: 0.0,
        };
        let f = heavy.fields(&grid, 0.0).unwrap();
        assert_relative_eq!(f.l2(), eta, max_relative = 1e-12);
        let h1 = f.h1_seminorm().unwrap();
        assert!(h1 > 0.4 && h1 < 0.6, "{h1}");
    }

    #[test]
    fn random_modes_are_seeded() {
        let grid = Grid1D::new(20.0, 201).unwrap();
        let spec = |seed| PerturbationSpec {
            shape: Shape::RandomModes { seed, modes: 5 },
            amplitude: [0.1, 0.1, 0.1],
            center: 10.0,
            width: 5.0,
            l2_target: None,
            phi_boundary: 0.0,
        };
        let a = spec(1).fields(&grid, 0.0).unwrap();
        let b = spec(1).fields(&grid, 0.0).unwrap();
        let c = spec(2).fields(&grid, 0.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.phi, c.phi);
    }

    #[test]
    fn destructive_perturbation_is_a_spec_error() {
        let grid = Grid1D::new(20.0, 201).unwrap();
        let prof = build_profile(&Field::constant(grid, 2.0), 0.0, &flat()).unwrap();
        let spec = PerturbationSpec {
            amplitude: [0.0, 0.0, -5.0],
            ..PerturbationSpec::zero()
        };
        assert!(matches!(initial_perturbed_state(&prof, &spec), Err(Error::Spec(_))));
    }

    #[test]
    fn boundary_ode_examples() {
        let p = gas();
        assert_eq!(boundary_ode_reference(0.0, 0.1, &p), 0.1);
        assert_relative_eq!(boundary_ode_reference(2f64.ln(), 0.1, &p), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_run_is_stationary() {
        let p = flat();
        let grid = Grid1D::new(10.0, 101).unwrap();
        let w = WaveParams::new(1.0, 0.5, 2.0).unwrap();
        let theta0 = initial_theta(&grid, &p, &w);
        let prof = build_profile(&theta0, 0.0, &p).unwrap();
        let s = initial_perturbed_state(&prof, &PerturbationSpec::zero()).unwrap();
        let evo = WaveEvolution::new(theta0, p, WaveControl::default());
        let traj = run_coupled(evo, s, 2.0, &[0.5, 1.0], &StepControl::default(), |_, _, _| Ok(())).unwrap();
        assert_eq!(traj.records.len(), 4);
        for r in &traj.records {
            assert_eq!(r.sup_pert, 0.0);
            assert_eq!(r.energy, 0.0);
        }
    }

    #[test]
    fn mass_budget_closes_at_second_order() {
        // flat wave: u(L) and u_x(L) stay zero, so only the boundary at 0 feeds the budget
        let p = flat();
        let w = WaveParams::new(1.0, 0.5, 2.0).unwrap();
        let spec = PerturbationSpec {
            amplitude: [0.02, 0.02, 0.02],
            phi_boundary: 0.02,
            ..PerturbationSpec::zero()
        };
        let gap = |n: usize| {
            let grid = Grid1D::new(20.0, n).unwrap();
            let prof = build_profile(&initial_theta(&grid, &p, &w), 0.0, &p).unwrap();
            let mut s = initial_perturbed_state(&prof, &spec).unwrap();
            let mass0 = crate::model::integrate(&s.v);
            let mut flux = 0.0;
            let dt = 0.0005;
            for _ in 0..400 {
                let next = step_ns_implicit(&s, dt, &p).unwrap();
                // ∫v changes by u(L) − u(0)
                flux += 0.5 * dt * ((next.u.last() - next.u.first()) + (s.u.last() - s.u.first()));
                s = next;
            }
            (crate::model::integrate(&s.v) - mass0 - flux).abs()
        };
        let (coarse, fine) = (gap(401), gap(801));
        assert!(coarse < 1e-3, "{coarse}");
        assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
    }
}
