//! Exponentially growing/decaying solutions of geometric-optics type:
//! v = e^{+phi}(B + R) or e^{-phi}(B + R) with phi the Carleman weight,
//! B an explicit amplitude built from a ray integral of the convection
//! coefficient, and R a remainder solved for in conjugated variables so the
//! exponential factor never has to be evaluated.

use crate::error::{CdError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{dot, SpaceTimeGrid};
use crate::ops::{directional_derivative, gradient, laplacian, time_derivative};
use crate::ray::{ray_quadrature, RayRange};
use crate::solver::{
    solve_parabolic_complex, time_reverse, BoundaryTrace, CoefficientPair,
};
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoKind {
    Growing,
    Decaying,
}

/// The weight phi(t,x) = lambda^2 t + lambda omega.x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanWeight {
    lambda: f64,
    omega: Vec<f64>,
}

impl CarlemanWeight {
    pub fn new(lambda: f64, omega: &[f64]) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(CdError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let norm: f64 = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return Err(CdError::InvalidArgument(format!(
                "omega must be unit length to 1e-14, |omega| = {norm}"
            )));
        }
        Ok(CarlemanWeight { lambda, omega: omega.to_vec() })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn phi(&self, t: f64, x: &[f64]) -> f64 {
        self.lambda * self.lambda * t + self.lambda * dot(&self.omega, x)
    }

    /// d/dt phi - |grad phi|^2 = 0: the eikonal-type identity that removes the
    /// zeroth-order terms from the conjugated principal part.
    pub fn eikonal_defect(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        let g2: f64 = self.omega.iter().map(|w| (self.lambda * w).powi(2)).sum();
        (l2 - g2).abs()
    }
}

/// Smooth time cutoff supported on [T/10, 9T/10], vanishing to all orders at
/// the support edges.
pub fn chi(t: f64, t_horizon: f64) -> f64 {
    let delta = t_horizon / 10.0;
    let s = (2.0 * t - t_horizon) / (t_horizon - 2.0 * delta);
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

pub fn chi_prime(t: f64, t_horizon: f64) -> f64 {
    let delta = t_horizon / 10.0;
    let scale = 2.0 / (t_horizon - 2.0 * delta);
    let s = (2.0 * t - t_horizon) / (t_horizon - 2.0 * delta);
    if s.abs() < 1.0 {
        let d = 1.0 - s * s;
        (1.0 - 1.0 / d).exp() * (-2.0 * s / (d * d)) * scale
    } else {
        0.0
    }
}

/// Ray-integral exponent int_0^infty omega.A(t, x+s omega) ds at every node.
pub fn amplitude_exponent(a: &VectorField<f64>, weight: &CarlemanWeight) -> ScalarField<f64> {
    let g = a.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for m in 0..=g.m_steps() {
        let mut sl = out.time_slice_mut(m);
        for (idx, v) in sl.indexed_iter_mut() {
            let x = g.coords(idx.slice());
            *v = ray_quadrature(a, m, &x, weight.omega(), RayRange::HalfLine);
        }
        if a.time_independent() && m == 0 {
            // copy the first slice instead of re-integrating
            let first = out.time_slice(0).to_owned();
            for mm in 1..=g.m_steps() {
                out.time_slice_mut(mm).assign(&first);
            }
            break;
        }
    }
    out
}

/// Amplitude together with its analytic time derivative. For a
/// time-independent convection coefficient the time dependence is entirely in
/// the cutoff and the tau-oscillation, so d/dt B is exact.
#[derive(Debug, Clone)]
pub struct Amplitude {
    pub field: ScalarField<Complex64>,
    pub dt: ScalarField<Complex64>,
}

/// Amplitude of the growing solution, chi(t) e^{-i(t tau + x.xi)} e^{+exponent},
/// or of the decaying one, chi(t) e^{-exponent} (no oscillation).
pub fn build_amplitude(
    kind: GoKind,
    a: &VectorField<f64>,
    weight: &CarlemanWeight,
    tau: f64,
    xi: &[f64],
) -> Result<Amplitude> {
    let g = a.grid().clone();
    if !a.is_admissible() {
        return Err(CdError::Precondition("convection coefficient is not admissible".into()));
    }
    if !a.time_independent() {
        return Err(CdError::Precondition(
            "amplitude construction needs a time-independent convection coefficient".into(),
        ));
    }
    if kind == GoKind::Growing {
        let prod = dot(xi, weight.omega());
        if prod.abs() > 1e-12 {
            return Err(CdError::Precondition(format!("xi.omega = {prod:e} must vanish to 1e-12")));
        }
    }
    let exponent = amplitude_exponent(a, weight);
    let t_hor = g.t_horizon();
    let mut field = ScalarField::zeros(&g);
    let mut dt = ScalarField::zeros(&g);
    for m in 0..=g.m_steps() {
        let t = g.t(m);
        let cut = chi(t, t_hor);
        let dcut = chi_prime(t, t_hor);
        let exp_slice = exponent.time_slice(m).to_owned();
        let mut fsl = field.time_slice_mut(m);
        let mut dsl = dt.time_slice_mut(m);
        for ((idx, v), dv) in fsl.indexed_iter_mut().zip(dsl.iter_mut()) {
            let e = exp_slice[IxDyn(idx.slice())];
            match kind {
                GoKind::Growing => {
                    let x = g.coords(idx.slice());
                    let phase = -(t * tau + dot(&x, xi));
                    let osc = Complex64::from_polar(e.exp(), phase);
                    *v = osc * cut;
                    // d/dt [chi e^{-i t tau}] = (chi' - i tau chi) e^{-i t tau}
                    *dv = osc * Complex64::new(dcut, -tau * cut);
                }
                GoKind::Decaying => {
                    let damp = (-e).exp();
                    *v = Complex64::new(cut * damp, 0.0);
                    *dv = Complex64::new(dcut * damp, 0.0);
                }
            }
        }
    }
    Ok(Amplitude { field, dt })
}

/// Discrete defect of the transport identity omega.grad E = -(omega.A) E for
/// E = exp(+exponent): sup over nodes of |omega.grad E + (omega.A) E| divided
/// by sup |E|. Vanishes at second order in h for smooth A.
pub fn transport_cancellation_residual(a: &VectorField<f64>, weight: &CarlemanWeight) -> f64 {
    let e = amplitude_exponent(a, weight).map(f64::exp);
    let de = directional_derivative(&e, weight.omega());
    let mut omega_a = ScalarField::zeros(a.grid());
    for (j, c) in a.components().iter().enumerate() {
        omega_a = omega_a.add(&c.scale(weight.omega()[j]));
    }
    let defect = de.add(&omega_a.zip_with(&e, |x, y| x * y));
    defect.max_abs() / e.max_abs()
}

fn mul_real(cf: &ScalarField<Complex64>, rf: &ScalarField<f64>) -> ScalarField<Complex64> {
    let mut out = cf.clone();
    ndarray::Zip::from(out.values_mut()).and(rf.values()).for_each(|a, &b| *a *= b);
    out
}

/// Forward operator L u = du - Laplace u - 2A.grad u + q_tilde u, with `du`
/// supplied by the caller (analytic when available, discrete otherwise).
pub fn apply_operator(
    c: &CoefficientPair,
    u: &ScalarField<Complex64>,
    du: Option<&ScalarField<Complex64>>,
) -> ScalarField<Complex64> {
    let du = du.cloned().unwrap_or_else(|| time_derivative(u));
    let lap = laplacian(u);
    let grad = gradient(u);
    let mut conv = ScalarField::zeros(u.grid());
    for (j, comp) in grad.components().iter().enumerate() {
        conv = conv.add(&mul_real(comp, c.a().component(j)));
    }
    du.sub(&lap).sub(&conv.scale(2.0)).add(&mul_real(u, &c.q_tilde()))
}

/// Adjoint operator L* u = -du - Laplace u + 2A.grad u + q_tilde_star u.
pub fn apply_adjoint_operator(
    c: &CoefficientPair,
    u: &ScalarField<Complex64>,
    du: Option<&ScalarField<Complex64>>,
) -> ScalarField<Complex64> {
    let du = du.cloned().unwrap_or_else(|| time_derivative(u));
    let lap = laplacian(u);
    let grad = gradient(u);
    let mut conv = ScalarField::zeros(u.grid());
    for (j, comp) in grad.components().iter().enumerate() {
        conv = conv.add(&mul_real(comp, c.a().component(j)));
    }
    du.scale(-1.0).sub(&lap).add(&conv.scale(2.0)).add(&mul_real(u, &c.q_tilde_star()))
}

fn omega_dot_a(c: &CoefficientPair, weight: &CarlemanWeight) -> ScalarField<f64> {
    let mut out = ScalarField::zeros(c.grid());
    for (j, comp) in c.a().components().iter().enumerate() {
        out = out.add(&comp.scale(weight.omega()[j]));
    }
    out
}

/// Conjugated operator applied with discrete stencils:
/// growing: L_phi w = dw/dt - Lap w - (2 lambda omega + 2A).grad w
///                    - 2 lambda (omega.A) w + q_tilde w;
/// decaying: the adjoint analogue with q_tilde_star.
pub fn apply_conjugated(
    kind: GoKind,
    c: &CoefficientPair,
    weight: &CarlemanWeight,
    w: &ScalarField<Complex64>,
) -> ScalarField<Complex64> {
    let l = weight.lambda();
    let lap = laplacian(w);
    let grad = gradient(w);
    let mut drift_term = ScalarField::zeros(w.grid());
    for (j, comp) in grad.components().iter().enumerate() {
        let coef = c.a().component(j).map(|v| 2.0 * v + 2.0 * l * weight.omega()[j]);
        drift_term = drift_term.add(&mul_real(comp, &coef));
    }
    let oa = omega_dot_a(c, weight).scale(2.0 * l);
    let du = time_derivative(w);
    match kind {
        GoKind::Growing => du
            .sub(&lap)
            .sub(&drift_term)
            .sub(&mul_real(w, &oa))
            .add(&mul_real(w, &c.q_tilde())),
        GoKind::Decaying => du
            .scale(-1.0)
            .sub(&lap)
            .add(&drift_term)
            .sub(&mul_real(w, &oa))
            .add(&mul_real(w, &c.q_tilde_star())),
    }
}

/// Remainder of the geometric-optics solution, solved in conjugated variables:
/// growing: dR/dt = Lap R + (2 lambda omega + 2A).grad R
///                  + (2 lambda omega.A - q_tilde) R - L_{A,q} B, R(0) = 0;
/// decaying: the time-reversed adjoint analogue with R(T) = 0.
/// Both carry zero Dirichlet data.
pub fn solve_remainder(
    kind: GoKind,
    c: &CoefficientPair,
    weight: &CarlemanWeight,
    b: &Amplitude,
    linear_tol: f64,
) -> Result<ScalarField<Complex64>> {
    let g = c.grid().clone();
    let l = weight.lambda();
    let boundary = BoundaryTrace::zeros(&g);
    let initial = ArrayD::zeros(IxDyn(&g.spatial_shape()));
    let oa = omega_dot_a(c, weight);
    match kind {
        GoKind::Growing => {
            let drift = VectorField::new(
                (0..g.dim())
                    .map(|j| c.a().component(j).map(|v| 2.0 * v + 2.0 * l * weight.omega()[j]))
                    .collect(),
            )?;
            let zeroth = oa.scale(2.0 * l).sub(&c.q_tilde());
            let source = apply_operator(c, &b.field, Some(&b.dt)).scale(-1.0);
            solve_parabolic_complex(&drift, &zeroth, &source, &boundary, &initial, linear_tol)
        }
        GoKind::Decaying => {
            // w(t') = R(T - t') solves dw/dt' = Lap w - (2 lambda omega + 2A).grad w
            //         + (2 lambda omega.A - q_tilde_star) w + s(T - t'),
            // s = -L* B, with w(0) = 0.
            let drift = VectorField::new(
                (0..g.dim())
                    .map(|j| c.a().component(j).map(|v| -2.0 * v - 2.0 * l * weight.omega()[j]))
                    .collect(),
            )?;
            let zeroth = oa.scale(2.0 * l).sub(&c.q_tilde_star());
            let source = time_reverse(&apply_adjoint_operator(c, &b.field, Some(&b.dt)).scale(-1.0));
            let w =
                solve_parabolic_complex(&drift, &zeroth, &source, &boundary, &initial, linear_tol)?;
            Ok(time_reverse(&w))
        }
    }
}

/// A growing or decaying solution kept in conjugated variables: the actual
/// solution is e^{+phi}(B+R) or e^{-phi}(B+R), never materialized.
#[derive(Debug, Clone)]
pub struct GoSolution {
    pub kind: GoKind,
    pub weight: CarlemanWeight,
    pub tau: f64,
    pub xi: Vec<f64>,
    pub amplitude: Amplitude,
    pub remainder: ScalarField<Complex64>,
}

impl GoSolution {
    pub fn build(
        kind: GoKind,
        c: &CoefficientPair,
        weight: &CarlemanWeight,
        tau: f64,
        xi: &[f64],
        linear_tol: f64,
    ) -> Result<Self> {
        let amplitude = build_amplitude(kind, c.a(), weight, tau, xi)?;
        let remainder = solve_remainder(kind, c, weight, &amplitude, linear_tol)?;
        Ok(GoSolution {
            kind,
            weight: weight.clone(),
            tau,
            xi: xi.to_vec(),
            amplitude,
            remainder,
        })
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        self.amplitude.field.grid()
    }

    /// B + R, the conjugated profile.
    pub fn profile(&self) -> ScalarField<Complex64> {
        self.amplitude.field.add(&self.remainder)
    }

    pub fn residual(&self, c: &CoefficientPair) -> f64 {
        go_residual(self.kind, c, &self.weight, &self.amplitude.field, &self.remainder)
    }
}

/// Spatial part of the conjugated operator, so that L_phi w = dw/dt - D w
/// (growing) or L*_phi w = -dw/dt - D* w (decaying).
fn apply_conjugated_spatial(
    kind: GoKind,
    c: &CoefficientPair,
    weight: &CarlemanWeight,
    w: &ScalarField<Complex64>,
) -> ScalarField<Complex64> {
    let l = weight.lambda();
    let lap = laplacian(w);
    let grad = gradient(w);
    let mut drift_term = ScalarField::zeros(w.grid());
    for (j, comp) in grad.components().iter().enumerate() {
        let coef = c.a().component(j).map(|v| 2.0 * v + 2.0 * l * weight.omega()[j]);
        drift_term = drift_term.add(&mul_real(comp, &coef));
    }
    let oa = omega_dot_a(c, weight).scale(2.0 * l);
    match kind {
        GoKind::Growing => lap
            .add(&drift_term)
            .add(&mul_real(w, &oa))
            .sub(&mul_real(w, &c.q_tilde())),
        GoKind::Decaying => lap
            .sub(&drift_term)
            .add(&mul_real(w, &oa))
            .sub(&mul_real(w, &c.q_tilde_star())),
    }
}

/// Residual of the homogeneous conjugated equation on the assembled profile
/// W = B + R, measured with the same Crank-Nicolson discretization the
/// remainder solver uses: per time step,
/// (W^{m+1}-W^m)/k -/+ (D W^{m+1} + D W^m)/2, accumulated in L2 over the
/// interior nodes (the equation is not posed on the Dirichlet boundary) and
/// reported relative to || B ||_{L2(Q)}. By the transport identity the
/// continuum limit is || L_{phi}(B+R) || = 0.
pub fn go_residual(
    kind: GoKind,
    c: &CoefficientPair,
    weight: &CarlemanWeight,
    b: &ScalarField<Complex64>,
    r: &ScalarField<Complex64>,
) -> f64 {
    let g = b.grid().clone();
    let w = b.add(r);
    let d = apply_conjugated_spatial(kind, c, weight, &w);
    let k = g.k();
    let sign = match kind {
        GoKind::Growing => 1.0,
        GoKind::Decaying => -1.0,
    };
    let mut total = 0.0;
    for m in 0..g.m_steps() {
        let cur = w.time_slice(m);
        let next = w.time_slice(m + 1);
        let dcur = d.time_slice(m);
        let dnext = d.time_slice(m + 1);
        let mut s = 0.0;
        for (idx, &a0) in cur.indexed_iter() {
            if g.is_boundary(idx.slice()) {
                continue;
            }
            let i = IxDyn(idx.slice());
            let res = (next[&i] - a0) * (sign / k) - (dcur[&i] + dnext[&i]) * 0.5;
            s += g.space_weight(idx.slice()) * res.norm_sqr();
        }
        total += k * s;
    }
    total.sqrt() / b.l2_q().max(f64::MIN_POSITIVE)
}
