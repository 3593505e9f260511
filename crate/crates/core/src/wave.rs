//! The viscous contact wave `(V, U, Θ)`.
//!
//! `Θ` solves the nonlinear diffusion `Θ_t = a (ln Θ)_xx` with `Θ(0, t) = θ₋`;
//! `V = RΘ/p₊` and `U = κ(γ−1)Θ_x / (γRΘ)` follow algebraically. The wave solves
//! the Lagrangian system only up to the residuals `F` (momentum) and `G`
//! (energy), which are computed from their closed forms.

use crate::diagnostics::{fit_decay, FitOutcome};
use crate::error::{Error, Result};
use crate::model::{
    derivative, integrate, norm, norm_sq, weighted_integral, Field, GasParams, Grid1D, NormKind,
    WaveParams, Weight,
};
use crate::quadrature::{uniform_edges, GaussLegendre};

/// Newton tolerance on the max nodal residual of a backward-Euler step.
pub const NEWTON_TOL: f64 = 1e-10;
/// Newton iteration cap per step.
pub const NEWTON_MAX_ITER: usize = 25;
/// Slack allowed by the discrete maximum principle.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-10;

/// Closed form of the initial temperature
/// `Θ₀(x) = θ₊ − (θ₊ − θ₋) exp{1 − (1 + αx)^δ₀}` and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialProfile {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub alpha: f64,
    pub delta0: f64,
}

impl InitialProfile {
    pub fn new(params: &GasParams, wave: &WaveParams) -> Self {
        Self {
            theta_minus: params.theta_minus(),
            theta_plus: params.theta_plus(),
            alpha: wave.alpha,
            delta0: wave.delta0,
        }
    }

    fn jump(&self) -> f64 {
        self.theta_plus - self.theta_minus
    }

    /// `s = (1 + αx)^δ₀` and its first three x-derivatives, plus `g = e^{1−s}`.
    fn pieces(&self, x: f64) -> (f64, f64, f64, f64, f64) {
        let (a, d) = (self.alpha, self.delta0);
        let w = 1.0 + a * x;
        let s = w.powf(d);
        let s1 = a * d * s / w;
        let s2 = s1 * a * (d - 1.0) / w;
        let s3 = s2 * a * (d - 2.0) / w;
        (s, s1, s2, s3, (1.0 - s).exp())
    }

    pub fn value(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.theta_minus;
        }
        let (_, _, _, _, g) = self.pieces(x);
        self.theta_plus - self.jump() * g
    }

    pub fn d1(&self, x: f64) -> f64 {
        let (_, s1, _, _, g) = self.pieces(x);
        self.jump() * s1 * g
    }

    pub fn d2(&self, x: f64) -> f64 {
        let (_, s1, s2, _, g) = self.pieces(x);
        self.jump() * (s2 - s1 * s1) * g
    }

    pub fn d3(&self, x: f64) -> f64 {
        let (_, s1, s2, s3, g) = self.pieces(x);
        self.jump() * (s3 - 3.0 * s1 * s2 + s1 * s1 * s1) * g
    }

    /// Position corresponding to the substitution variable `s = (1 + αx)^δ₀`.
    fn x_of_s(&self, s: f64) -> f64 {
        (s.powf(1.0 / self.delta0) - 1.0) / self.alpha
    }

    fn dx_ds(&self, s: f64) -> f64 {
        s.powf(1.0 / self.delta0 - 1.0) / (self.alpha * self.delta0)
    }

    /// `∫₀^∞ h(x) dx` through the substitution `s = (1 + αx)^δ₀`, which maps the
    /// stretched-exponential tail onto a plain exponential one.
    pub fn half_line_integral(&self, h: impl Fn(f64) -> f64) -> f64 {
        let gl = GaussLegendre::new(10);
        let edges = uniform_edges(1.0, 1.0 + HALF_LINE_S_SPAN, 0.25);
        gl.integrate_panels(&edges, |s| h(self.x_of_s(s)) * self.dx_ds(s))
    }
}

/// Span of the substitution variable; `e^{-80}` is far below round-off.
const HALF_LINE_S_SPAN: f64 = 80.0;

/// Nodal samples of `Θ₀`.
pub fn initial_theta(grid: &Grid1D, params: &GasParams, wave: &WaveParams) -> Field {
    let prof = InitialProfile::new(params, wave);
    Field::from_fn(*grid, |x| prof.value(x))
}

/// One backward-Euler step of `Θ_t = a (ln Θ)_xx`, solved by Newton iteration.
///
/// The node at `x = 0` is pinned to `θ₋`; the far node keeps its incoming value
/// (for profiles built by [`initial_theta`] that is `Θ₀(L)`, the truncated
/// stand-in for `θ₊`).
pub fn step_nonlinear_heat(theta: &Field, dt: f64, params: &GasParams) -> Result<Field> {
    step_nonlinear_heat_at(theta, dt, params, f64::NAN)
}

fn step_nonlinear_heat_at(theta: &Field, dt: f64, params: &GasParams, t: f64) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    if theta.min() <= 0.0 {
        return Err(Error::Positivity {
            t,
            detail: "input temperature not positive".into(),
        });
    }
    let n = theta.len();
    let h = theta.grid().dx();
    let c = dt * params.a() / (h * h);
    let old = theta.values();
    let mut z = old.to_vec();
    z[0] = params.theta_minus();

    let m = n - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut ln = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for _ in 0..NEWTON_MAX_ITER {
        for (l, zi) in ln.iter_mut().zip(&z) {
            *l = zi.ln();
        }
        residual = 0.0;
        for k in 0..m {
            let i = k + 1;
            let r = z[i] - old[i] - c * (ln[i + 1] - 2.0 * ln[i] + ln[i - 1]);
            residual = f64::max(residual, r.abs());
            rhs[k] = -r;
            diag[k] = 1.0 + 2.0 * c / z[i];
            lower[k] = -c / z[i - 1];
            upper[k] = -c / z[i + 1];
        }
        if residual < NEWTON_TOL {
            return Ok(Field::from_vec(*theta.grid(), z));
        }
        // pinned neighbours do not enter the correction
        lower[0] = 0.0;
        upper[m - 1] = 0.0;
        let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut scale = 1.0;
        while (0..m).any(|k| z[k + 1] + scale * delta[k] <= 0.0) {
            scale *= 0.5;
            if scale < 1e-6 {
                return Err(Error::NewtonFailed { t, dt, residual });
            }
        }
        for k in 0..m {
            z[k + 1] += scale * delta[k];
        }
    }
    Err(Error::NewtonFailed { t, dt, residual })
}

/// Thomas algorithm; `lower[0]` and `upper[m-1]` are ignored.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for k in 1..m {
        let denom = diag[k] - lower[k] * c[k - 1];
        c[k] = if k + 1 < m { upper[k] / denom } else { 0.0 };
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

/// The wave and its derived quantities at one time.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub t: f64,
    pub theta: Field,
    pub v: Field,
    pub u: Field,
    pub theta_x: Field,
    pub ln_theta_x: Field,
    pub ln_theta_xx: Field,
    pub ln_theta_xxx: Field,
    /// Momentum residual.
    pub f: Field,
    /// Energy residual `−μ U_x² / V`.
    pub g: Field,
}

impl WaveProfile {
    pub fn grid(&self) -> &Grid1D {
        self.theta.grid()
    }
}

/// Assemble `(V, U, Θ)` and the residuals `F`, `G` from a temperature field.
pub fn build_profile(theta: &Field, t: f64, params: &GasParams) -> Result<WaveProfile> {
    if theta.min() <= 0.0 {
        return Err(Error::Positivity {
            t,
            detail: "wave temperature not positive".into(),
        });
    }
    let (r, gamma, mu, kappa) = (params.r(), params.gamma(), params.mu(), params.kappa());
    let p_plus = params.p_plus();
    let ln_theta = theta.map(f64::ln);
    let theta_x = derivative(theta, 1)?;
    let ln_theta_x = derivative(&ln_theta, 1)?;
    let ln_theta_xx = derivative(&ln_theta, 2)?;
    let ln_theta_xxx = derivative(&ln_theta_xx, 1)?;

    let v = theta.map(|th| r * th / p_plus);
    let u_coef = kappa * (gamma - 1.0) / (gamma * r);
    let u = theta_x.zip_map(theta, |tx, th| u_coef * tx / th);

    let f_coef = (kappa * params.a() * (gamma - 1.0) - mu * p_plus * gamma) / (r * gamma);
    let f = if f_coef == 0.0 {
        Field::constant(*theta.grid(), 0.0)
    } else {
        let ratio = ln_theta_xx.zip_map(theta, |l, th| l / th);
        derivative(&ratio, 1)?.map(|d| f_coef * d)
    };
    let u_x = derivative(&u, 1)?;
    let g = u_x.zip_map(&v, |ux, vv| -mu * ux * ux / vv);

    Ok(WaveProfile {
        t,
        theta: theta.clone(),
        v,
        u,
        theta_x,
        ln_theta_x,
        ln_theta_xx,
        ln_theta_xxx,
        f,
        g,
    })
}

/// One initial-data bound: the measured quantity, the scaling it is claimed to
/// obey, and their ratio (an empirical stand-in for the unknown constant).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub name: &'static str,
    pub measured: f64,
    pub scale: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// True iff every ratio is below `cap`.
    pub fn within(&self, cap: f64) -> bool {
        self.entries.iter().all(|e| e.ratio <= cap)
    }
}

pub const BOUND_SUP_D1: &str = "sup|Theta0_x| / (alpha delta0)";
pub const BOUND_SUP_D2: &str = "sup|Theta0_xx| / (alpha^2 delta0)";
pub const BOUND_L2_D1: &str = "||Theta0_x||^2 / (alpha delta0)";
pub const BOUND_L1_D1: &str = "||Theta0_x||_L1";
pub const BOUND_L2_D2: &str = "(||Theta0_xx||^2 + ||(ln Theta0)_xx||^2) / (alpha^3 delta0^2)";
pub const BOUND_L2_D3: &str = "(||Theta0_xxx||^2 + ||(ln Theta0)_xxx||^2) / alpha^5";
pub const BOUND_WEIGHTED: &str = "int Theta0_x^2 (1 + alpha x) / (alpha delta0)";
pub const BOUND_L1_TAIL: &str = "||Theta0 - theta_plus||_L1 * alpha";

fn entry(name: &'static str, measured: f64, scale: f64) -> BoundEntry {
    BoundEntry {
        name,
        measured,
        scale,
        ratio: measured / scale,
    }
}

/// Initial-data bounds measured on the whole half-line, using the closed-form
/// derivatives of `Θ₀` and quadrature in the substitution variable.
pub fn verify_initial_bounds(params: &GasParams, wave: &WaveParams) -> BoundReport {
    let p = InitialProfile::new(params, wave);
    let (a, d) = (wave.alpha, wave.delta0);
    let ln_d2 = |x: f64| {
        let th = p.value(x);
        p.d2(x) / th - (p.d1(x) / th).powi(2)
    };
    let ln_d3 = |x: f64| {
        let th = p.value(x);
        let q = p.d1(x) / th;
        p.d3(x) / th - 3.0 * q * p.d2(x) / th + 2.0 * q * q * q
    };
    // the derivatives are monotone in s beyond a few e-folds; sample densely in s
    let samples: Vec<f64> = (0..=8000).map(|k| p.x_of_s(1.0 + k as f64 * 0.005)).collect();
    let sup = |h: &dyn Fn(f64) -> f64| samples.iter().fold(0.0f64, |m, &x| m.max(h(x).abs()));

    BoundReport {
        entries: vec![
            entry(BOUND_SUP_D1, sup(&|x| p.d1(x)), a * d),
            entry(BOUND_SUP_D2, sup(&|x| p.d2(x)), a * a * d),
            entry(BOUND_L2_D1, p.half_line_integral(|x| p.d1(x).powi(2)), a * d),
            entry(BOUND_L1_D1, p.half_line_integral(|x| p.d1(x).abs()), 1.0),
            entry(
                BOUND_L2_D2,
                p.half_line_integral(|x| p.d2(x).powi(2) + ln_d2(x).powi(2)),
                a.powi(3) * d * d,
            ),
            entry(
                BOUND_L2_D3,
                p.half_line_integral(|x| p.d3(x).powi(2) + ln_d3(x).powi(2)),
                a.powi(5),
            ),
            entry(
                BOUND_WEIGHTED,
                p.half_line_integral(|x| p.d1(x).powi(2) * (1.0 + a * x)),
                a * d,
            ),
            entry(
                BOUND_L1_TAIL,
                p.half_line_integral(|x| (p.value(x) - p.theta_plus).abs()),
                1.0 / a,
            ),
        ],
    }
}

/// The same bounds measured from a nodal `Θ₀` with finite differences and the
/// trapezoid rule (truncated to the mesh).
pub fn measured_initial_bounds(
    theta0: &Field,
    theta_plus: f64,
    wave: &WaveParams,
) -> Result<BoundReport> {
    let (a, d) = (wave.alpha, wave.delta0);
    let d1 = derivative(theta0, 1)?;
    let d2 = derivative(theta0, 2)?;
    let d3 = derivative(theta0, 3)?;
    let ln = theta0.map(f64::ln);
    let ln2 = derivative(&ln, 2)?;
    let ln3 = derivative(&ln, 3)?;
    Ok(BoundReport {
        entries: vec![
            entry(BOUND_SUP_D1, d1.max_abs(), a * d),
            entry(BOUND_SUP_D2, d2.max_abs(), a * a * d),
            entry(BOUND_L2_D1, norm_sq(&d1), a * d),
            entry(BOUND_L1_D1, norm(&d1, NormKind::Lp(1.0)), 1.0),
            entry(BOUND_L2_D2, norm_sq(&d2) + norm_sq(&ln2), a.powi(3) * d * d),
            entry(BOUND_L2_D3, norm_sq(&d3) + norm_sq(&ln3), a.powi(5)),
            entry(BOUND_WEIGHTED, weighted_integral(&d1, Weight::OnePlusAlphaX(a)), a * d),
            entry(
                BOUND_L1_TAIL,
                integrate(&theta0.map(|th| (th - theta_plus).abs())),
                1.0 / a,
            ),
        ],
    })
}

/// Scalars recorded after every accepted wave step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaveRecord {
    pub t: f64,
    /// `‖(ln Θ)_x‖²`
    pub ln_x_sq: f64,
    /// `‖(ln Θ)_xx‖²`
    pub ln_xx_sq: f64,
    /// `‖∂_x³ ln Θ‖²`
    pub ln_xxx_sq: f64,
    /// `∫ Θ_x² dx`
    pub theta_x_sq: f64,
    /// `∫ (ln Θ)_x² x dx`
    pub ln_x_moment: f64,
    /// `∫₀^t ‖(ln Θ)_xx‖² dτ`
    pub cum_ln_xx_sq: f64,
    /// `∫₀^t ‖(ln Θ)_x‖² dτ`
    pub cum_ln_x_sq: f64,
    /// `sup |Θ_x|² / (‖(ln Θ)_x‖ ‖(ln Θ)_xx‖)`
    pub interp_theta_x: f64,
    /// `sup |U_x|² / (‖(ln Θ)_xx‖ ‖(ln Θ)_xxx‖)`
    pub interp_u_x: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl WaveRecord {
    fn measure(profile: &WaveProfile) -> Result<Self> {
        let ln_x_sq = norm_sq(&profile.ln_theta_x);
        let ln_xx_sq = norm_sq(&profile.ln_theta_xx);
        let ln_xxx_sq = norm_sq(&profile.ln_theta_xxx);
        let u_x = derivative(&profile.u, 1)?;
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        Ok(Self {
            t: profile.t,
            ln_x_sq,
            ln_xx_sq,
            ln_xxx_sq,
            theta_x_sq: norm_sq(&profile.theta_x),
            ln_x_moment: weighted_integral(&profile.ln_theta_x, Weight::X),
            cum_ln_xx_sq: 0.0,
            cum_ln_x_sq: 0.0,
            interp_theta_x: ratio(profile.theta_x.max_abs().powi(2), (ln_x_sq * ln_xx_sq).sqrt()),
            interp_u_x: ratio(u_x.max_abs().powi(2), (ln_xx_sq * ln_xxx_sq).sqrt()),
            theta_min: profile.theta.min(),
            theta_max: profile.theta.max(),
        })
    }
}

/// Time-step policy for the wave integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveControl {
    /// First step; `None` means `dx`.
    pub dt_initial: Option<f64>,
    pub dt_max: f64,
    /// Growth factor applied after each accepted step.
    pub growth: f64,
    pub dt_min: f64,
}

impl Default for WaveControl {
    fn default() -> Self {
        Self {
            dt_initial: None,
            dt_max: 0.1,
            growth: 1.2,
            dt_min: 1e-12,
        }
    }
}

/// Stateful integrator for `Θ`, shared by [`run_wave`] and the coupled solver.
#[derive(Debug, Clone)]
pub struct WaveEvolution {
    theta: Field,
    t: f64,
    dt: f64,
    params: GasParams,
    control: WaveControl,
    steps: usize,
}

impl WaveEvolution {
    pub fn new(theta0: Field, params: GasParams, control: WaveControl) -> Self {
        let dt = control.dt_initial.unwrap_or(theta0.grid().dx()).min(control.dt_max);
        Self {
            theta: theta0,
            t: 0.0,
            dt,
            params,
            control,
            steps: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn theta(&self) -> &Field {
        &self.theta
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn params(&self) -> &GasParams {
        &self.params
    }

    pub fn profile(&self) -> Result<WaveProfile> {
        build_profile(&self.theta, self.t, &self.params)
    }

    /// Advance to `target`, landing on it exactly, calling `on_step` after each
    /// accepted step. Newton failures halve the step.
    pub fn advance_to(
        &mut self,
        target: f64,
        mut on_step: impl FnMut(&Field, f64) -> Result<()>,
    ) -> Result<()> {
        while self.t < target {
            let remaining = target - self.t;
            let h = if self.dt >= remaining * (1.0 - 1e-12) {
                remaining
            } else {
                self.dt
            };
            match step_nonlinear_heat_at(&self.theta, h, &self.params, self.t) {
                Ok(next) => {
                    self.theta = next;
                    self.t = if h == remaining { target } else { self.t + h };
                    self.steps += 1;
                    if h == self.dt {
                        self.dt = (self.dt * self.control.growth).min(self.control.dt_max);
                    }
                    on_step(&self.theta, self.t)?;
                }
                Err(Error::NewtonFailed { .. }) => {
                    self.dt = 0.5 * h;
                    if self.dt < self.control.dt_min {
                        return Err(Error::StepUnderflow { t: self.t, dt: self.dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Recorded wave history.
#[derive(Debug, Clone)]
pub struct WaveTrajectory {
    pub params: GasParams,
    pub wave: WaveParams,
    pub grid: Grid1D,
    /// One record per accepted step, preceded by the initial record at `t = 0`.
    pub records: Vec<WaveRecord>,
    /// Profiles at the requested snapshot times (plus `t = 0` and `T`).
    pub snapshots: Vec<WaveProfile>,
}

impl WaveTrajectory {
    pub fn final_profile(&self) -> &WaveProfile {
        self.snapshots.last().expect("trajectory always holds the initial snapshot")
    }

    /// `(t, value)` series for one record field.
    pub fn series(&self, pick: impl Fn(&WaveRecord) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, pick(r))).collect()
    }
}

/// Integrate the wave to `horizon`, recording scalars at every accepted step
/// and storing full profiles at `snapshot_times`.
pub fn run_wave(
    grid: &Grid1D,
    params: &GasParams,
    wave: &WaveParams,
    horizon: f64,
    snapshot_times: &[f64],
    control: WaveControl,
) -> Result<WaveTrajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let mut stops: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= horizon)
        .collect();
    stops.push(horizon);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let theta0 = initial_theta(grid, params, wave);
    let mut evo = WaveEvolution::new(theta0, *params, control);
    let first = evo.profile()?;
    let mut records = vec![WaveRecord::measure(&first)?];
    let mut snapshots = vec![first];

    for stop in stops {
        evo.advance_to(stop, |theta, t| {
            let profile = build_profile(theta, t, params)?;
            let mut rec = WaveRecord::measure(&profile)?;
            let prev = records.last().expect("initial record present");
            let dt = t - prev.t;
            rec.cum_ln_xx_sq = prev.cum_ln_xx_sq + 0.5 * dt * (prev.ln_xx_sq + rec.ln_xx_sq);
            rec.cum_ln_x_sq = prev.cum_ln_x_sq + 0.5 * dt * (prev.ln_x_sq + rec.ln_x_sq);
            records.push(rec);
            Ok(())
        })?;
        snapshots.push(evo.profile()?);
    }
    Ok(WaveTrajectory {
        params: *params,
        wave: *wave,
        grid: *grid,
        records,
        snapshots,
    })
}

/// Slack added to each claimed exponent when judging a fitted slope.
pub const DECAY_SLOPE_TOL: f64 = 0.1;

/// Fitted decay of one recorded quantity against its claimed exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheck {
    pub quantity: &'static str,
    pub claimed_exponent: f64,
    pub tolerance: f64,
    pub outcome: FitOutcome,
}

impl DecayCheck {
    pub fn passed(&self) -> bool {
        match &self.outcome {
            FitOutcome::Fitted(fit) => fit.slope <= self.claimed_exponent + self.tolerance,
            FitOutcome::Vacuous => true,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match &self.outcome {
            FitOutcome::Fitted(fit) => Some(fit.slope),
            FitOutcome::Vacuous => None,
        }
    }
}

/// Log-log decay fits of `‖(ln Θ)_x‖²`, `‖(ln Θ)_xx‖²` and `‖∂_x³ ln Θ‖²`
/// against the exponents −1/2, −3/2, −5/2.
pub fn decay_report(traj: &WaveTrajectory, window: (f64, f64)) -> Result<Vec<DecayCheck>> {
    let specs: [(&'static str, f64, fn(&WaveRecord) -> f64); 3] = [
        ("||(ln Theta)_x||^2", -0.5, |r| r.ln_x_sq),
        ("||(ln Theta)_xx||^2", -1.5, |r| r.ln_xx_sq),
        ("||(ln Theta)_xxx||^2", -2.5, |r| r.ln_xxx_sq),
    ];
    specs
        .into_iter()
        .map(|(quantity, claimed, pick)| {
            Ok(DecayCheck {
                quantity,
                claimed_exponent: claimed,
                tolerance: DECAY_SLOPE_TOL,
                outcome: fit_decay(&traj.series(pick), window)?,
            })
        })
        .collect()
}

/// `L^p` distances of `(V, U, Θ)` to the far-field state `(v₊, 0, θ₊)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InviscidDistance {
    pub v: f64,
    pub u: f64,
    pub theta: f64,
}

pub fn inviscid_distance(profile: &WaveProfile, params: &GasParams, p: f64) -> InviscidDistance {
    let kind = NormKind::Lp(p);
    InviscidDistance {
        v: norm(&profile.v.map(|v| v - params.v_plus()), kind),
        u: norm(&profile.u, kind),
        theta: norm(&profile.theta.map(|t| t - params.theta_plus()), kind),
    }
}

/// Domain length that keeps the initial transition zone and the diffusion
/// front inside the mesh: the larger of `x_tail` (where `Θ₀` is within
/// `tail_tol` of `θ₊`, capped at `100/α`) and twelve diffusion lengths.
pub fn suggested_length(params: &GasParams, wave: &WaveParams, horizon: f64) -> f64 {
    let tail = (100.0 / wave.alpha).min(tail_position(wave, 1e-10));
    let diffusion = 12.0 * (params.a() * horizon / params.theta_minus().min(params.theta_plus())).sqrt();
    tail.max(diffusion)
}

/// `x` at which `exp{1 − (1 + αx)^δ₀}` drops to `tol`.
pub fn tail_position(wave: &WaveParams, tol: f64) -> f64 {
    let s = 1.0 - tol.ln();
    (s.powf(1.0 / wave.delta0) - 1.0) / wave.alpha
}
