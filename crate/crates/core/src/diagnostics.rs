//! Perturbation fields, the entropy-type energy, the weighted Poincaré and
//! oscillation monitors, and log-log decay fitting.

use crate::error::{Error, Result};
use crate::model::{derivative, integrate, norm_sq, trapezoid, Field, GasParams, GasState};
use crate::wave::WaveProfile;

/// Floor added to ratio denominators so degenerate runs give 0 rather than 0/0.
pub const RATIO_FLOOR: f64 = 1e-14;

/// Values at or below this are treated as numerically zero by [`fit_decay`].
pub const ZERO_FLOOR: f64 = 1e-30;

/// `(φ, ψ, ζ) = (v − V, u − U, θ − Θ)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFields {
    pub t: f64,
    pub phi: Field,
    pub psi: Field,
    pub zeta: Field,
}

impl PerturbationFields {
    pub fn components(&self) -> [&Field; 3] {
        [&self.phi, &self.psi, &self.zeta]
    }

    /// `max(|φ|, |ψ|, |ζ|)` over the mesh.
    pub fn sup(&self) -> f64 {
        self.components().iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    /// `‖(φ, ψ, ζ)‖_{L²}`.
    pub fn l2(&self) -> f64 {
        self.components().iter().map(|f| norm_sq(f)).sum::<f64>().sqrt()
    }

    /// `‖(φ_x, ψ_x, ζ_x)‖_{L²}`.
    pub fn h1_seminorm(&self) -> Result<f64> {
        let mut acc = 0.0;
        for f in self.components() {
            acc += norm_sq(&derivative(f, 1)?);
        }
        Ok(acc.sqrt())
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Componentwise difference between a gas state and the wave at the same time.
pub fn perturbation(state: &GasState, profile: &WaveProfile) -> Result<PerturbationFields> {
    if !same_time(state.t, profile.t) {
        return Err(Error::Diagnostic(format!(
            "state at t = {} compared with wave at t = {}",
            state.t, profile.t
        )));
    }
    if state.grid() != profile.grid() {
        return Err(Error::Diagnostic("state and wave live on different grids".into()));
    }
    Ok(PerturbationFields {
        t: state.t,
        phi: state.v.zip_map(&profile.v, |a, b| a - b),
        psi: state.u.zip_map(&profile.u, |a, b| a - b),
        zeta: state.theta.zip_map(&profile.theta, |a, b| a - b),
    })
}

/// `(V + φ, U + ψ, Θ + ζ)`; fails if the sum is not a positive state.
pub fn superpose(profile: &WaveProfile, pert: &PerturbationFields) -> Result<GasState> {
    if profile.grid() != pert.phi.grid() {
        return Err(Error::Diagnostic("wave and perturbation live on different grids".into()));
    }
    GasState::new(
        profile.t,
        profile.v.zip_map(&pert.phi, |a, b| a + b),
        profile.u.zip_map(&pert.psi, |a, b| a + b),
        profile.theta.zip_map(&pert.zeta, |a, b| a + b),
    )
}

fn require_positive(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Diagnostic(format!("argument must be positive, got {z}")))
    }
}

/// `Φ(z) = z − ln z − 1`, evaluated as `d − ln(1 + d)` with `d = z − 1`.
pub fn phi_func(z: f64) -> Result<f64> {
    require_positive(z)?;
    let d = z - 1.0;
    Ok(d - d.ln_1p())
}

/// `Ψ(z) = 1/z + ln z − 1`.
pub fn psi_func(z: f64) -> Result<f64> {
    require_positive(z)?;
    Ok(1.0 / z + z.ln() - 1.0)
}

/// `∫ ψ²/2 + RΘ Φ(v/V) + c_v Θ Φ(θ/Θ) dx`.
pub fn energy_functional(state: &GasState, profile: &WaveProfile, params: &GasParams) -> Result<f64> {
    let pert = perturbation(state, profile)?;
    let (r, cv) = (params.r(), params.c_v());
    let n = state.grid().len();
    let mut density = Vec::with_capacity(n);
    for i in 0..n {
        let (v, th) = (state.v.values()[i], state.theta.values()[i]);
        let (vw, tw) = (profile.v.values()[i], profile.theta.values()[i]);
        require_positive(vw)?;
        require_positive(tw)?;
        let psi = pert.psi.values()[i];
        density.push(0.5 * psi * psi + r * tw * phi_func(v / vw)? + cv * tw * phi_func(th / tw)?);
    }
    Ok(trapezoid(&density, state.grid().dx()))
}

/// Second-order expansion of [`energy_functional`] about the wave:
/// `∫ ψ²/2 + RΘφ²/(2V²) + c_v ζ²/(2Θ) dx`.
pub fn quadratic_energy(state: &GasState, profile: &WaveProfile, params: &GasParams) -> Result<f64> {
    let pert = perturbation(state, profile)?;
    let (r, cv) = (params.r(), params.c_v());
    let density: Vec<f64> = (0..state.grid().len())
        .map(|i| {
            let (vw, tw) = (profile.v.values()[i], profile.theta.values()[i]);
            let (phi, psi, zeta) = (pert.phi.values()[i], pert.psi.values()[i], pert.zeta.values()[i]);
            0.5 * psi * psi + r * tw * phi * phi / (2.0 * vw * vw) + cv * zeta * zeta / (2.0 * tw)
        })
        .collect();
    Ok(trapezoid(&density, state.grid().dx()))
}

/// `(sup θ − inf θ, sup ρ − inf ρ)` with `ρ = 1/v`.
pub fn oscillation(state: &GasState) -> (f64, f64) {
    let rho = state.v.map(|v| 1.0 / v);
    (state.theta.max() - state.theta.min(), rho.max() - rho.min())
}

/// Running accumulation of the weighted Poincaré pieces
/// `∫∫ Θ_x² (φ² + ζ²)` and `∫ ‖(φ_x, ζ_x)‖² dτ`, trapezoid in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareMonitor {
    phi0_at_0: f64,
    last: Option<(f64, f64, f64)>,
    lhs: f64,
    dissipation: f64,
}

/// Accumulated pieces and `lhs / (dissipation + |φ₀(0)| + floor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareReport {
    pub lhs: f64,
    pub dissipation: f64,
    pub phi0_at_0: f64,
    pub ratio: f64,
}

impl PoincareMonitor {
    pub fn new(phi0_at_0: f64) -> Self {
        Self {
            phi0_at_0,
            last: None,
            lhs: 0.0,
            dissipation: 0.0,
        }
    }

    /// Add one time level; times must increase.
    pub fn record(&mut self, pert: &PerturbationFields, profile: &WaveProfile) -> Result<()> {
        if !same_time(pert.t, profile.t) {
            return Err(Error::Diagnostic(format!(
                "perturbation at t = {} paired with wave at t = {}",
                pert.t, profile.t
            )));
        }
        let weight = profile.theta_x.map(|d| d * d);
        let mass = pert.phi.zip_map(&pert.zeta, |p, z| p * p + z * z);
        let lhs_rate = integrate(&weight.zip_map(&mass, |w, m| w * m));
        let diss_rate = norm_sq(&derivative(&pert.phi, 1)?) + norm_sq(&derivative(&pert.zeta, 1)?);
        if let Some((t0, l0, d0)) = self.last {
            if pert.t <= t0 {
                return Err(Error::Diagnostic(format!(
                    "Poincaré samples out of order: {} after {t0}",
                    pert.t
                )));
            }
            let h = pert.t - t0;
            self.lhs += 0.5 * h * (l0 + lhs_rate);
            self.dissipation += 0.5 * h * (d0 + diss_rate);
        }
        self.last = Some((pert.t, lhs_rate, diss_rate));
        Ok(())
    }

    pub fn report(&self) -> PoincareReport {
        PoincareReport {
            lhs: self.lhs,
            dissipation: self.dissipation,
            phi0_at_0: self.phi0_at_0,
            ratio: self.lhs / (self.dissipation + self.phi0_at_0.abs() + RATIO_FLOOR),
        }
    }
}

/// Weighted Poincaré ratio over an aligned series of perturbations and waves.
pub fn weighted_poincare_check(
    perts: &[PerturbationFields],
    waves: &[WaveProfile],
    phi0_at_0: f64,
) -> Result<PoincareReport> {
    if perts.len() != waves.len() {
        return Err(Error::Diagnostic(format!(
            "{} perturbation samples but {} wave samples",
            perts.len(),
            waves.len()
        )));
    }
    let mut mon = PoincareMonitor::new(phi0_at_0);
    for (p, w) in perts.iter().zip(waves) {
        mon.record(p, w)?;
    }
    Ok(mon.report())
}

/// Ordinary least-squares line through `(ln(1 + t), ln value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual in log space.
    pub rms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Fitted(DecayFit),
    /// Some sample in the window is zero to working precision.
    Vacuous,
}

impl FitOutcome {
    pub fn fit(&self) -> Option<&DecayFit> {
        match self {
            FitOutcome::Fitted(f) => Some(f),
            FitOutcome::Vacuous => None,
        }
    }
}

/// Minimum samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Fit `value ≈ e^c (1 + t)^s` over the samples with `t` in `window`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<FitOutcome> {
    let (lo, hi) = window;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Diagnostic(format!("invalid fit window [{lo}, {hi}]")));
    }
    let inside: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo && t <= hi)
        .collect();
    if inside.len() < MIN_FIT_SAMPLES {
        return Err(Error::Diagnostic(format!(
            "{} samples in [{lo}, {hi}], need {MIN_FIT_SAMPLES}",
            inside.len()
        )));
    }
    if inside.iter().any(|&(_, y)| !(y > ZERO_FLOOR)) {
        return Ok(FitOutcome::Vacuous);
    }
    let pts: Vec<(f64, f64)> = inside.iter().map(|&(t, y)| (t.ln_1p(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Diagnostic("all fit samples share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(FitOutcome::Fitted(DecayFit {
        slope,
        intercept,
        window,
        rms,
        samples: pts.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid1D;
    use crate::wave::build_profile;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn setup() -> (GasParams, WaveProfile) {
        let params = GasParams::new(1.0, 1.4, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        let grid = Grid1D::new(20.0, 201).unwrap();
        let theta = Field::from_fn(grid, |x| 2.0 - (-x).exp());
        (params, build_profile(&theta, 0.5, &params).unwrap())
    }

    fn state_of(p: &WaveProfile) -> GasState {
        GasState::new(p.t, p.v.clone(), p.u.clone(), p.theta.clone()).unwrap()
    }

    #[test]
    fn phi_and_psi_examples() {
        assert_eq!(phi_func(1.0).unwrap(), 0.0);
        assert_relative_eq!(phi_func(E).unwrap(), E - 2.0, epsilon = 1e-15);
        assert_relative_eq!(phi_func(0.5).unwrap(), 0.5 + 2f64.ln() - 1.0, epsilon = 1e-15);
        assert_eq!(psi_func(1.0).unwrap(), 0.0);
        assert_relative_eq!(psi_func(2.0).unwrap(), 0.5 + 2f64.ln() - 1.0, epsilon = 1e-15);
        assert!(phi_func(0.0).is_err());
        assert!(phi_func(-1.0).is_err());
        assert!(psi_func(0.0).is_err());
    }

    #[test]
    fn phi_has_a_double_zero_at_one() {
        let h = 1e-5;
        let slope = (phi_func(1.0 + h).unwrap() - phi_func(1.0 - h).unwrap()) / (2.0 * h);
        assert!(slope.abs() < 1e-9);
    }

    #[test]
    fn perturbation_of_profile_is_zero() {
        let (_, prof) = setup();
        let p = perturbation(&state_of(&prof), &prof).unwrap();
        assert_eq!(p.sup(), 0.0);
    }

    #[test]
    fn perturbation_of_shifted_velocity() {
        let (_, prof) = setup();
        let mut s = state_of(&prof);
        s.u = s.u.map(|u| u + 0.25);
        let p = perturbation(&s, &prof).unwrap();
        assert!(p.psi.values().iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(p.phi.max_abs() + p.zeta.max_abs(), 0.0);
    }

    #[test]
    fn perturbation_rejects_time_mismatch() {
        let (_, prof) = setup();
        let mut s = state_of(&prof);
        s.t += 0.1;
        assert!(matches!(perturbation(&s, &prof), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn energy_examples() {
        let (params, prof) = setup();
        let s = state_of(&prof);
        assert_eq!(energy_functional(&s, &prof, &params).unwrap(), 0.0);
        let mut s2 = s.clone();
        s2.u = s2.u.zip_map(&Field::from_fn(*prof.grid(), |x| (-x).exp() * 0.1), |a, b| a + b);
        let psi = perturbation(&s2, &prof).unwrap().psi;
        assert_relative_eq!(
            energy_functional(&s2, &prof, &params).unwrap(),
            0.5 * norm_sq(&psi),
            max_relative = 1e-12
        );
    }

    #[test]
    fn energy_approaches_its_quadratic_part() {
        let (params, prof) = setup();
        let bump = Field::from_fn(*prof.grid(), |x| (-(x - 5.0) * (x - 5.0)).exp());
        let mut prev_gap = f64::INFINITY;
        for amp in [1e-1, 1e-2, 1e-3] {
            let pert = PerturbationFields {
                t: prof.t,
                phi: bump.map(|b| amp * b),
                psi: bump.map(|b| -amp * b),
                zeta: bump.map(|b| 2.0 * amp * b),
            };
            let s = superpose(&prof, &pert).unwrap();
            let e = energy_functional(&s, &prof, &params).unwrap();
            let q = quadratic_energy(&s, &prof, &params).unwrap();
            let gap = (e / q - 1.0).abs();
            assert!(gap < prev_gap);
            assert!(gap < 2.0 * amp, "amp {amp}: gap {gap}");
            prev_gap = gap;
        }
    }

    #[test]
    fn oscillation_examples() {
        let grid = Grid1D::new(1.0, 11).unwrap();
        let c = GasState::new(0.0, Field::constant(grid, 2.0), Field::constant(grid, 0.0), Field::constant(grid, 1.0)).unwrap();
        assert_eq!(oscillation(&c), (0.0, 0.0));
        let step = |x: f64, l: f64, r: f64| if x < 0.5 { l } else { r };
        let s = GasState::new(
            0.0,
            Field::from_fn(grid, |x| step(x, 1.0, 2.0)),
            Field::constant(grid, 0.0),
            Field::from_fn(grid, |x| step(x, 1.0, 2.0)),
        )
        .unwrap();
        assert_eq!(oscillation(&s), (1.0, 0.5));
    }

    #[test]
    fn poincare_zero_perturbation() {
        let (_, prof) = setup();
        let s = state_of(&prof);
        let p = perturbation(&s, &prof).unwrap();
        let mut later = prof.clone();
        later.t = 1.0;
        let mut p2 = p.clone();
        p2.t = 1.0;
        let rep = weighted_poincare_check(&[p, p2], &[prof, later], 0.0).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.ratio, 0.0);
    }

    #[test]
    fn poincare_flat_wave_has_zero_lhs() {
        let params = GasParams::new(1.0, 1.4, 1.0, 1.0, 2.0, 2.0, 1.0).unwrap();
        let grid = Grid1D::new(10.0, 101).unwrap();
        let bump = Field::from_fn(grid, |x| 0.1 * (-(x - 5.0) * (x - 5.0)).exp());
        let mut waves = Vec::new();
        let mut perts = Vec::new();
        for t in [0.0, 0.5, 1.0] {
            waves.push(build_profile(&Field::constant(grid, 2.0), t, &params).unwrap());
            perts.push(PerturbationFields {
                t,
                phi: bump.clone(),
                psi: bump.clone(),
                zeta: bump.clone(),
            });
        }
        let rep = weighted_poincare_check(&perts, &waves, 0.1).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert!(rep.dissipation > 0.0);
    }

    #[test]
    fn fit_power_law_exactly() {
        let series: Vec<(f64, f64)> = (0..50)
            .map(|k| {
                let t = k as f64;
                (t, 4.0 * (1.0 + t).powf(-1.5))
            })
            .collect();
        let fit = fit_decay(&series, (0.0, 49.0)).unwrap();
        let f = fit.fit().unwrap();
        assert_relative_eq!(f.slope, -1.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 4f64.ln(), epsilon = 1e-12);
        assert!(f.rms < 1e-12);
    }

    #[test]
    fn fit_constant_and_vacuous() {
        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 3.0)).collect();
        assert!(fit_decay(&flat, (0.0, 20.0)).unwrap().fit().unwrap().slope.abs() < 1e-14);
        let zero: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.0)).collect();
        assert_eq!(fit_decay(&zero, (0.0, 20.0)).unwrap(), FitOutcome::Vacuous);
        assert!(fit_decay(&flat, (0.0, 5.0)).is_err());
        assert!(fit_decay(&flat, (5.0, 5.0)).is_err());
    }
}
