//! Physical parameters, the truncated half-line mesh, nodal fields and the
//! finite-difference and quadrature calculus shared by every other module.

use crate::error::{Error, Result};

/// Perfect-gas constants and end states.
///
/// `p_plus`, `v_minus`, `a` and `c_v` are derived at construction so that the
/// pressure-matching condition `R θ₋ / v₋ = R θ₊ / v₊` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasParams {
    r: f64,
    gamma: f64,
    mu: f64,
    kappa: f64,
    theta_minus: f64,
    theta_plus: f64,
    v_plus: f64,
    p_plus: f64,
    v_minus: f64,
    a: f64,
    c_v: f64,
}

impl GasParams {
    pub fn new(
        r: f64,
        gamma: f64,
        mu: f64,
        kappa: f64,
        theta_minus: f64,
        theta_plus: f64,
        v_plus: f64,
    ) -> Result<Self> {
        for (name, value) in [
            ("R", r),
            ("mu", mu),
            ("kappa", kappa),
            ("theta_minus", theta_minus),
            ("theta_plus", theta_plus),
            ("v_plus", v_plus),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::Parameter(format!("gamma must exceed 1, got {gamma}")));
        }
        let p_plus = r * theta_plus / v_plus;
        let v_minus = r * theta_minus / p_plus;
        let a = kappa * p_plus * (gamma - 1.0) / (gamma * r * r);
        let c_v = r / (gamma - 1.0);
        Ok(Self {
            r,
            gamma,
            mu,
            kappa,
            theta_minus,
            theta_plus,
            v_plus,
            p_plus,
            v_minus,
            a,
            c_v,
        })
    }

    /// Same gas with a different heat conductivity (used by the inviscid-limit sweep).
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(
            self.r,
            self.gamma,
            self.mu,
            kappa,
            self.theta_minus,
            self.theta_plus,
            self.v_plus,
        )
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(
            self.r,
            self.gamma,
            mu,
            self.kappa,
            self.theta_minus,
            self.theta_plus,
            self.v_plus,
        )
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn theta_minus(&self) -> f64 {
        self.theta_minus
    }
    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }
    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }
    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }
    pub fn v_minus(&self) -> f64 {
        self.v_minus
    }
    /// Diffusion coefficient of the temperature profile, `κ p₊ (γ−1) / (γ R²)`.
    pub fn a(&self) -> f64 {
        self.a
    }
    /// Specific heat at constant volume, `R / (γ−1)`.
    pub fn c_v(&self) -> f64 {
        self.c_v
    }

    /// Perfect-gas pressure `R θ / v`.
    pub fn pressure(&self, v: f64, theta: f64) -> f64 {
        self.r * theta / v
    }
}

/// Shape parameters of the initial temperature profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    pub alpha: f64,
    pub delta0: f64,
    /// Exponent `q` in the inviscid-limit coupling `α = κ^(−q)`.
    pub coupling_exponent: f64,
}

impl WaveParams {
    pub fn new(alpha: f64, delta0: f64, coupling_exponent: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(Error::Parameter(format!("delta0 must lie in (0, 1), got {delta0}")));
        }
        if !coupling_exponent.is_finite() {
            return Err(Error::Parameter("coupling exponent must be finite".into()));
        }
        Ok(Self {
            alpha,
            delta0,
            coupling_exponent,
        })
    }

    /// Steepness tied to the heat conductivity: `α = κ^(−q)`.
    pub fn coupled_to_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(kappa.powf(-self.coupling_exponent), self.delta0, self.coupling_exponent)
    }
}

/// Uniform mesh `x_i = i·dx` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::Grid(format!("at least 3 nodes required, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dx(&self) -> f64 {
        self.length / (self.n - 1) as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.dx()
        }
    }
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }
    /// Index of the node closest to `x` (clamped to the mesh).
    pub fn nearest(&self, x: f64) -> usize {
        ((x / self.dx()).round().max(0.0) as usize).min(self.n - 1)
    }
    /// Same domain with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            length: self.length,
            n: 2 * self.n - 1,
        }
    }
}

/// One scalar per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to match the grid.
    pub(crate) fn from_vec(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn first(&self) -> f64 {
        self.values[0]
    }
    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Specific volume, velocity and temperature at one time.
///
/// Invariant: all three fields share one grid and `v`, `θ` are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    pub t: f64,
    pub v: Field,
    pub u: Field,
    pub theta: Field,
}

impl GasState {
    pub fn new(t: f64, v: Field, u: Field, theta: Field) -> Result<Self> {
        if v.grid != u.grid || v.grid != theta.grid {
            return Err(Error::Grid("state components live on different grids".into()));
        }
        let state = Self { t, v, u, theta };
        state.check_positive()?;
        Ok(state)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.v.grid
    }

    pub fn check_positive(&self) -> Result<()> {
        for (name, f) in [("v", &self.v), ("theta", &self.theta)] {
            if let Some(i) = f.values.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Positivity {
                    t: self.t,
                    detail: format!("{name} = {} at x = {}", f.values[i], f.grid.x(i)),
                });
            }
        }
        Ok(())
    }
}

/// Minimum node count for a derivative stencil of the given order.
fn min_nodes(order: usize) -> usize {
    order + 2
}

/// Finite-difference derivative of order 1, 2 or 3.
///
/// Interior nodes use central differences and the end nodes one-sided
/// stencils; every stencil is second-order accurate.
pub fn derivative(f: &Field, order: usize) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::Grid(format!("derivative order must be 1, 2 or 3, got {order}")));
    }
    let n = f.len();
    if n < min_nodes(order) {
        return Err(Error::Grid(format!(
            "order-{order} stencil needs {} nodes, grid has {n}",
            min_nodes(order)
        )));
    }
    let h = f.grid.dx();
    let y = &f.values;
    let mut out = vec![0.0; n];
    match order {
        1 => {
            let s = 1.0 / (2.0 * h);
            out[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) * s;
            for i in 1..n - 1 {
                out[i] = (y[i + 1] - y[i - 1]) * s;
            }
            out[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) * s;
        }
        2 => {
            let s = 1.0 / (h * h);
            out[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) * s;
            for i in 1..n - 1 {
                out[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) * s;
            }
            out[n - 1] = (2.0 * y[n - 1] - 5.0 * y[n - 2] + 4.0 * y[n - 3] - y[n - 4]) * s;
        }
        _ => {
            let s = 1.0 / (2.0 * h * h * h);
            let left0 = |k: usize| -> f64 {
                -5.0 * y[k] + 18.0 * y[k + 1] - 24.0 * y[k + 2] + 14.0 * y[k + 3] - 3.0 * y[k + 4]
            };
            let left1 = |k: usize| -> f64 {
                -3.0 * y[k] + 10.0 * y[k + 1] - 12.0 * y[k + 2] + 6.0 * y[k + 3] - y[k + 4]
            };
            out[0] = left0(0) * s;
            out[1] = left1(0) * s;
            for i in 2..n - 2 {
                out[i] = (-y[i - 2] + 2.0 * y[i - 1] - 2.0 * y[i + 1] + y[i + 2]) * s;
            }
            // mirrored stencils change sign for odd order
            let right0 = -5.0 * y[n - 1] + 18.0 * y[n - 2] - 24.0 * y[n - 3] + 14.0 * y[n - 4]
                - 3.0 * y[n - 5];
            let right1 = -3.0 * y[n - 1] + 10.0 * y[n - 2] - 12.0 * y[n - 3] + 6.0 * y[n - 4]
                - y[n - 5];
            out[n - 1] = -right0 * s;
            out[n - 2] = -right1 * s;
        }
    }
    Ok(Field::from_vec(f.grid, out))
}

/// Composite trapezoid rule for nodal samples with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid integral of a field over the mesh.
pub fn integrate(f: &Field) -> f64 {
    trapezoid(&f.values, f.grid.dx())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Lp(f64),
    Sup,
    H1,
}

/// Norm of a field; integrals use the trapezoid rule.
pub fn norm(f: &Field, kind: NormKind) -> f64 {
    let dx = f.grid.dx();
    match kind {
        NormKind::L2 => {
            let sq: Vec<f64> = f.values.iter().map(|v| v * v).collect();
            trapezoid(&sq, dx).sqrt()
        }
        NormKind::Lp(p) => {
            assert!(p >= 1.0, "Lp norm requires p >= 1");
            let powered: Vec<f64> = f.values.iter().map(|v| v.abs().powf(p)).collect();
            trapezoid(&powered, dx).powf(1.0 / p)
        }
        NormKind::Sup => f.max_abs(),
        NormKind::H1 => {
            let fx = derivative(f, 1).expect("grid invariant guarantees 3 nodes");
            let l2 = norm(f, NormKind::L2);
            let d = norm(&fx, NormKind::L2);
            (l2 * l2 + d * d).sqrt()
        }
    }
}

/// Squared L² norm, the quantity most estimates are phrased in.
pub fn norm_sq(f: &Field) -> f64 {
    let sq: Vec<f64> = f.values.iter().map(|v| v * v).collect();
    trapezoid(&sq, f.grid.dx())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    OnePlusX,
    OnePlusAlphaX(f64),
    /// Plain `x`, used for the first-moment bound on `(ln Θ)_x²`.
    X,
}

impl Weight {
    fn at(&self, x: f64) -> f64 {
        match *self {
            Weight::OnePlusX => 1.0 + x,
            Weight::OnePlusAlphaX(alpha) => 1.0 + alpha * x,
            Weight::X => x,
        }
    }
}

/// `∫ f² w dx` by the trapezoid rule.
pub fn weighted_integral(f: &Field, weight: Weight) -> f64 {
    let g = f.grid;
    let vals: Vec<f64> = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * v * weight.at(g.x(i)))
        .collect();
    trapezoid(&vals, g.dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn params_example_values() {
        let p = GasParams::new(1.0, 2.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(p.p_plus(), 1.0);
        assert_eq!(p.v_minus(), 1.0);
        assert_eq!(p.a(), 0.5);
        assert_eq!(p.c_v(), 1.0);
    }

    #[test]
    fn params_degenerate_constant_state() {
        let p = GasParams::new(1.0, 1.4, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.v_minus(), 1.0);
    }

    #[test]
    fn diffusion_coefficient_vanishes_as_gamma_tends_to_one() {
        let mut last = f64::INFINITY;
        for gamma in [2.0, 1.5, 1.1, 1.01, 1.001] {
            let a = GasParams::new(1.0, gamma, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap().a();
            assert!(a < last);
            last = a;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn params_reject_bad_input() {
        assert!(GasParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(GasParams::new(1.0, 0.9, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(GasParams::new(0.0, 1.4, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(GasParams::new(1.0, 1.4, -1.0, 1.0, 1.0, 2.0, 2.0).is_err());
        assert!(GasParams::new(1.0, 1.4, 1.0, 1.0, 1.0, 2.0, f64::NAN).is_err());
        assert!(WaveParams::new(1.0, 1.0, 2.0).is_err());
        assert!(WaveParams::new(0.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn grid_basics() {
        let g = Grid1D::new(2.0, 5).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.x(0), 0.0);
        assert_eq!(g.x(4), 2.0);
        assert!(Grid1D::new(1.0, 2).is_err());
        assert!(Grid1D::new(0.0, 10).is_err());
        assert_eq!(g.refined().len(), 9);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid1D::new(3.0, 31).unwrap();
        let f = Field::constant(g, 4.2);
        for order in 1..=3 {
            assert!(derivative(&f, order).unwrap().max_abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let g = Grid1D::new(2.0, 21).unwrap();
        let f = Field::from_fn(g, |x| 3.0 * x * x - 2.0 * x + 1.0);
        let d1 = derivative(&f, 1).unwrap();
        let d2 = derivative(&f, 2).unwrap();
        let d3 = derivative(&f, 3).unwrap();
        for (i, x) in g.nodes().enumerate() {
            assert_relative_eq!(d1.values()[i], 6.0 * x - 2.0, epsilon = 1e-10);
            assert_relative_eq!(d2.values()[i], 6.0, epsilon = 1e-8);
            assert!(d3.values()[i].abs() < 1e-6);
        }
    }

    #[test]
    fn third_derivative_exact_on_cubics() {
        let g = Grid1D::new(1.0, 11).unwrap();
        let f = Field::from_fn(g, |x| x * x * x);
        for v in derivative(&f, 3).unwrap().values() {
            assert_relative_eq!(*v, 6.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn second_derivative_converges_at_second_order() {
        let err = |n| {
            let g = Grid1D::new(3.0, n).unwrap();
            let f = Field::from_fn(g, f64::sin);
            let d2 = derivative(&f, 2).unwrap();
            (1..n - 1)
                .map(|i| (d2.values()[i] + g.x(i).sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 3.8 && ratio < 4.2, "ratio {ratio}");
    }

    #[test]
    fn all_orders_converge_at_boundaries() {
        let err = |n, order| {
            let g = Grid1D::new(1.0, n).unwrap();
            let f = Field::from_fn(g, |x| (2.0 * x).exp());
            let d = derivative(&f, order).unwrap();
            let exact = |x: f64| 2f64.powi(order as i32) * (2.0 * x).exp();
            g.nodes()
                .enumerate()
                .map(|(i, x)| (d.values()[i] - exact(x)).abs())
                .fold(0.0, f64::max)
        };
        for order in 1..=3 {
            let ratio = err(41, order) / err(81, order);
            assert!(ratio > 3.5, "order {order}: ratio {ratio}");
        }
    }

    #[test]
    fn derivative_rejects_small_grids() {
        let g = Grid1D::new(1.0, 4).unwrap();
        let f = Field::constant(g, 1.0);
        assert!(derivative(&f, 2).is_ok());
        assert!(derivative(&f, 3).is_err());
        assert!(derivative(&f, 4).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = Grid1D::new(4.0, 11).unwrap();
        let c = Field::constant(g, -3.0);
        assert_relative_eq!(norm(&c, NormKind::L2), 3.0 * 2.0, epsilon = 1e-12);
        assert_eq!(norm(&c, NormKind::Sup), 3.0);
        let z = Field::constant(g, 0.0);
        for kind in [NormKind::L2, NormKind::Lp(3.0), NormKind::Sup, NormKind::H1] {
            assert_eq!(norm(&z, kind), 0.0);
        }
    }

    #[test]
    fn exponential_l2_norm() {
        let g = Grid1D::new(40.0, 4001).unwrap();
        let f = Field::from_fn(g, |x| (-x).exp());
        let l2 = norm(&f, NormKind::L2);
        // the trapezoid sum of e^{-2x} with step h is (h/2) coth(h) up to e^{-80}
        let h = g.dx();
        assert!((l2 * l2 - 0.5 * h / h.tanh()).abs() < 1e-14);
        assert!((l2 - 0.5f64.sqrt()).abs() < 2e-5);
    }

    #[test]
    fn quadrature_error_shrinks_under_refinement() {
        let err = |n| {
            let g = Grid1D::new(40.0, n).unwrap();
            let f = Field::from_fn(g, |x| (-x).exp());
            (norm_sq(&f) - 0.5).abs()
        };
        assert!(err(401) / err(801) >= 3.5);
    }

    #[test]
    fn weighted_integral_examples() {
        let g = Grid1D::new(1.0, 101).unwrap();
        assert_eq!(weighted_integral(&Field::constant(g, 0.0), Weight::OnePlusX), 0.0);
        assert_relative_eq!(
            weighted_integral(&Field::constant(g, 1.0), Weight::OnePlusX),
            1.5,
            epsilon = 1e-12
        );
    }
}
