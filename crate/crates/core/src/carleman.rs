//! Falsification harness for the weighted boundary energy estimate of the
//! conjugated operator: the L^2(Q)-weighted lower bound
//!
//!   lambda^2 |u|^2 + |grad u|^2 + |u(T)|^2 + lambda * outflow flux
//!     <= C ( |L u|^2 + lambda * inflow flux )
//!
//! with weight e^{-2 phi}, phi = lambda^2 t + lambda omega.x, checked over a
//! deterministic bump suite and a lambda sweep. Also provides the operator
//! splitting P1 + P2 + P3 used to derive the estimate and direct checks of
//! the two auxiliary inequalities.

use crate::error::{CdError, Result};
use crate::field::ScalarField;
use crate::go::CarlemanWeight;
use crate::grid::{dot, BoxFace, SpaceTimeGrid};
use crate::ops::{directional_derivative, gradient, laplacian, partial, time_derivative};
use crate::solver::{face_len, face_node, normal_derivative_trace, BoundaryTrace, CoefficientPair};
use ndarray::Dimension;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// L u = du/dt - Lap u - 2 A.grad u + q_tilde u on real fields.
pub fn forward_operator(c: &CoefficientPair, u: &ScalarField<f64>) -> ScalarField<f64> {
    let mut conv = ScalarField::zeros(u.grid());
    for (j, comp) in c.a().components().iter().enumerate() {
        conv = conv.add(&partial(u, j).zip_with(comp, |d, a| d * a));
    }
    time_derivative(u)
        .sub(&laplacian(u))
        .sub(&conv.scale(2.0))
        .add(&u.zip_with(&c.q_tilde(), |v, q| v * q))
}

/// Splitting of the conjugated operator:
/// P1 = -Lap, P2 = d/dt - 2 lambda omega.grad,
/// P3 = -2 A.grad - 2 lambda omega.A + q_tilde.
pub fn split_operator(
    c: &CoefficientPair,
    weight: &CarlemanWeight,
    v: &ScalarField<f64>,
) -> (ScalarField<f64>, ScalarField<f64>, ScalarField<f64>) {
    let l = weight.lambda();
    let p1 = laplacian(v).scale(-1.0);
    let p2 = time_derivative(v).sub(&directional_derivative(v, weight.omega()).scale(2.0 * l));
    let mut conv = ScalarField::zeros(v.grid());
    let mut omega_a = ScalarField::zeros(v.grid());
    for (j, comp) in c.a().components().iter().enumerate() {
        conv = conv.add(&partial(v, j).zip_with(comp, |d, a| d * a));
        omega_a = omega_a.add(&comp.scale(weight.omega()[j]));
    }
    let p3 = conv
        .scale(-2.0)
        .sub(&v.zip_with(&omega_a, |a, b| 2.0 * l * a * b))
        .add(&v.zip_with(&c.q_tilde(), |a, b| a * b));
    (p1, p2, p3)
}

/// Ratio of int |P2 v|^2 over Q to its quadratic lower bound
/// (1 + 4 lambda^2) / (16 R^2) int |v|^2, R the enclosing radius of Q.
/// Passes when >= 1 - 10h; returns 1 for v identically zero.
pub fn check_p2_lower_bound(weight: &CarlemanWeight, v: &ScalarField<f64>) -> f64 {
    let g = v.grid();
    let l = weight.lambda();
    let p2 = time_derivative(v).sub(&directional_derivative(v, weight.omega()).scale(2.0 * l));
    let r = g.enclosing_radius();
    let denom = (1.0 + 4.0 * l * l) / (16.0 * r * r) * v.l2_q().powi(2);
    if denom == 0.0 {
        return 1.0;
    }
    p2.l2_q().powi(2) / denom
}

/// ln of the trapezoid integral of e^{-2 phi} * integrand over Q, computed
/// with a max-shift so the weight's dynamic range never underflows the sum.
/// Returns -infinity when the integrand vanishes. Requires integrand >= 0.
fn log_weighted_integral_q(weight: &CarlemanWeight, integrand: &ScalarField<f64>) -> f64 {
    let g = integrand.grid().clone();
    let mut lmax = f64::NEG_INFINITY;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for m in 0..=g.m_steps() {
        let t = g.t(m);
        let wt = g.time_weight(m);
        for (idx, &v) in integrand.time_slice(m).indexed_iter() {
            debug_assert!(v >= 0.0);
            if v == 0.0 {
                continue;
            }
            let idx = idx.slice();
            let x = g.coords(idx);
            let l = -2.0 * weight.phi(t, &x) + v.ln();
            lmax = lmax.max(l);
            terms.push((l, wt * g.space_weight(idx)));
        }
    }
    if terms.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&(l, w)| w * (l - lmax).exp()).sum();
    lmax + sum.ln()
}

/// Same as above restricted to one time slice (spatial integral only).
fn log_weighted_integral_slice(
    weight: &CarlemanWeight,
    integrand: &ScalarField<f64>,
    m: usize,
) -> f64 {
    let g = integrand.grid().clone();
    let t = g.t(m);
    let mut lmax = f64::NEG_INFINITY;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for (idx, &v) in integrand.time_slice(m).indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let idx = idx.slice();
        let x = g.coords(idx);
        let l = -2.0 * weight.phi(t, &x) + v.ln();
        lmax = lmax.max(l);
        terms.push((l, g.space_weight(idx)));
    }
    if terms.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&(l, w)| w * (l - lmax).exp()).sum();
    lmax + sum.ln()
}

/// ln of int over (0,T) x {faces with sign(omega.nu) = sign} of
/// e^{-2 phi} |d_nu u|^2 |omega.nu| dS dt.
fn log_weighted_flux(weight: &CarlemanWeight, dnu: &BoundaryTrace<f64>, positive: bool) -> f64 {
    let g = dnu.grid().clone();
    let mut lmax = f64::NEG_INFINITY;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for face in BoxFace::all(g.dim()) {
        let on = dot(&face.normal(g.dim()), weight.omega());
        if (positive && on <= 0.0) || (!positive && on >= 0.0) {
            continue;
        }
        for m in 0..=g.m_steps() {
            let t = g.t(m);
            let wt = g.time_weight(m);
            for flat in 0..face_len(&g) {
                let v = dnu.get(m, face, flat);
                if v == 0.0 {
                    continue;
                }
                let x = g.coords(&face_node(&g, face, flat));
                let l = -2.0 * weight.phi(t, &x) + (v * v * on.abs()).ln();
                lmax = lmax.max(l);
                terms.push((l, wt * dnu.face_weight(face, flat)));
            }
        }
    }
    if terms.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&(l, w)| w * (l - lmax).exp()).sum();
    lmax + sum.ln()
}

/// log(sum of exp) with the usual max-shift; -infinity in == -infinity out.
fn logsumexp(ls: &[f64]) -> f64 {
    let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Sweep result for one coefficient pair and direction over a test suite.
///
/// Terms are aggregated over the suite and reported relative to the weight
/// mass int_Q e^{-2 phi} (the raw integrals underflow printable range for
/// lambda >= 32; dividing by the common mass keeps every column finite and
/// leaves all ratios unchanged).
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanReport {
    pub lambdas: Vec<f64>,
    /// Per lambda: [lambda^2 |u|^2, |grad u|^2, |u(T)|^2, lambda*outflux,
    /// |L u|^2, lambda*influx], weighted and mass-normalized.
    pub terms: Vec<[f64; 6]>,
    /// LHS / RHS per lambda; the estimate holds iff these stay bounded.
    pub ratios: Vec<f64>,
    /// Smallest sweep lambda from which the ratios are nonincreasing.
    pub onset_lambda: f64,
    /// Empirical constant: max ratio over lambda >= onset.
    pub c_hat: f64,
}

impl CarlemanReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .lambdas
            .iter()
            .zip(&self.terms)
            .zip(&self.ratios)
            .map(|((&l, t), &r)| {
                let mut row = vec![l];
                row.extend_from_slice(t);
                row.push(r);
                row
            })
            .collect();
        crate::io::write_csv(
            path,
            &["lambda", "term1", "term2", "term3", "term4", "term5", "term6", "ratio"],
            &rows,
        )
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "onset_lambda": self.onset_lambda, "c_hat": self.c_hat })
    }
}

fn require_test_function(u: &ScalarField<f64>) -> Result<()> {
    let scale = 1.0 + u.max_abs();
    if u.l2_slice(0) > 1e-12 * scale {
        return Err(CdError::Precondition(
            "carleman test function must vanish at t = 0".into(),
        ));
    }
    if BoundaryTrace::from_field(u).max_abs() > 1e-12 * scale {
        return Err(CdError::Precondition(
            "carleman test function must vanish on the lateral boundary".into(),
        ));
    }
    Ok(())
}

/// Evaluate both sides of the boundary estimate for every test function and
/// every lambda in the sweep; all weighted integrals are done in log space.
pub fn check_boundary_estimate(
    c: &CoefficientPair,
    omega: &[f64],
    lambdas: &[f64],
    suite: &[ScalarField<f64>],
) -> Result<CarlemanReport> {
    if lambdas.is_empty() {
        return Err(CdError::InvalidArgument("empty lambda sweep".into()));
    }
    for u in suite {
        require_test_function(u)?;
    }
    let g = c.grid().clone();
    let ones = ScalarField::from_fn(&g, |_, _| 1.0);
    let mut terms = Vec::with_capacity(lambdas.len());
    let mut ratios = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let weight = CarlemanWeight::new(lambda, omega)?;
        let log_mass = log_weighted_integral_q(&weight, &ones);
        // per-term log values, one entry per test function
        let mut logs: [Vec<f64>; 6] = Default::default();
        for u in suite {
            let grad = gradient(u);
            let mut grad_sq = ScalarField::zeros(&g);
            for comp in grad.components() {
                grad_sq = grad_sq.add(&comp.zip_with(comp, |a, b| a * b));
            }
            let dnu = normal_derivative_trace(u);
            let u_sq = u.zip_with(u, |a, b| a * b);
            let lu = forward_operator(c, u);
            logs[0].push(log_weighted_integral_q(&weight, &u_sq) + (lambda * lambda).ln());
            logs[1].push(log_weighted_integral_q(&weight, &grad_sq));
            logs[2].push(log_weighted_integral_slice(&weight, &u_sq, g.m_steps()));
            logs[3].push(log_weighted_flux(&weight, &dnu, true) + lambda.ln());
            logs[4].push(log_weighted_integral_q(&weight, &lu.zip_with(&lu, |a, b| a * b)));
            logs[5].push(log_weighted_flux(&weight, &dnu, false) + lambda.ln());
        }
        let agg: Vec<f64> = logs.iter().map(|l| logsumexp(l)).collect();
        let lhs = logsumexp(&agg[0..4]);
        let rhs = logsumexp(&agg[4..6]);
        let ratio = if lhs == f64::NEG_INFINITY {
            0.0
        } else {
            (lhs - rhs).exp()
        };
        let mut row = [0.0; 6];
        for (slot, &l) in row.iter_mut().zip(&agg) {
            *slot = (l - log_mass).exp();
        }
        terms.push(row);
        ratios.push(ratio);
    }
    // onset: earliest sweep point from which the ratio sequence never rises
    let mut onset_idx = lambdas.len() - 1;
    while onset_idx > 0 && ratios[onset_idx - 1] >= ratios[onset_idx] {
        onset_idx -= 1;
    }
    let c_hat = ratios[onset_idx..].iter().cloned().fold(0.0, f64::max);
    Ok(CarlemanReport {
        lambdas: lambdas.to_vec(),
        terms,
        ratios,
        onset_lambda: lambdas[onset_idx],
        c_hat,
    })
}

/// Defect of the integration-by-parts identity
/// 2 int_Q P1 v P2 v = int_Omega |grad v(T)|^2
///                     + 2 lambda int_Sigma (omega.nu) |d_nu v|^2,
/// relative to the largest participating magnitude. Exact for v vanishing at
/// t = 0 and on the lateral boundary; discretely O(h^2 + k^2). The transport
/// part of P2 contributes the boundary flux twice: integrating
/// Delta v (omega.grad v) by parts gives (1/2) int (omega.nu)|d_nu v|^2 and
/// P2 carries the factor -2 lambda.
pub fn p1p2_identity_residual(weight: &CarlemanWeight, v: &ScalarField<f64>) -> Result<f64> {
    require_test_function(v)?;
    let g = v.grid().clone();
    let l = weight.lambda();
    let p1 = laplacian(v).scale(-1.0);
    let p2 = time_derivative(v).sub(&directional_derivative(v, weight.omega()).scale(2.0 * l));
    let cross = 2.0 * p1.inner_q(&p2);
    let grad = gradient(v);
    let final_energy: f64 =
        grad.components().iter().map(|c| c.l2_slice(g.m_steps()).powi(2)).sum();
    let dnu = normal_derivative_trace(v);
    let mut flux = 0.0;
    for face in BoxFace::all(g.dim()) {
        let on = dot(&face.normal(g.dim()), weight.omega());
        if on == 0.0 {
            continue;
        }
        for m in 0..=g.m_steps() {
            let wt = g.time_weight(m);
            for flat in 0..face_len(&g) {
                let d = dnu.get(m, face, flat);
                flux += wt * dnu.face_weight(face, flat) * on * d * d;
            }
        }
    }
    flux *= 2.0 * l;
    let scale = cross.abs().max(final_energy).max(flux.abs()).max(f64::MIN_POSITIVE);
    Ok((cross - final_energy - flux).abs() / scale)
}

fn bump1(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// The deterministic 12-function suite: tensor space bumps at three centers
/// and two widths, crossed with two time profiles (a compactly supported
/// bump and a smoothstep ramp that is active at t = T).
pub fn standard_test_suite(grid: &Arc<SpaceTimeGrid>) -> Vec<ScalarField<f64>> {
    let t_h = grid.t_horizon();
    let mut suite = Vec::with_capacity(12);
    for &center in &[0.35, 0.5, 0.65] {
        for &width in &[0.18, 0.3] {
            for ramp in [false, true] {
                let u = ScalarField::from_fn(grid, move |t, x| {
                    let space: f64 = x.iter().map(|&xi| bump1((xi - center) / width)).product();
                    let s = t / t_h;
                    let time = if ramp {
                        s * s * (3.0 - 2.0 * s)
                    } else {
                        crate::go::chi(t, t_h)
                    };
                    space * time
                });
                suite.push(u);
            }
        }
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::go::{apply_conjugated, GoKind};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn grid(n: usize, m: usize) -> Arc<SpaceTimeGrid> {
        SpaceTimeGrid::new(2, n, m, 1.0).unwrap()
    }

    fn gentle_pair(g: &Arc<SpaceTimeGrid>) -> CoefficientPair {
        let bound = VectorField::<f64>::zeros(g).admissible_bound();
        let a = VectorField::from_fns(g, move |_, x, j| {
            let amp = if j == 0 { 0.5 } else { 0.25 };
            bound * amp * (PI * x[0]).sin() * (PI * x[1]).sin()
        });
        let q = ScalarField::from_spatial_fn(g, |x| 0.3 * (PI * x[0]).sin() * (PI * x[1]).sin());
        CoefficientPair::new(a, q).unwrap()
    }

    fn smooth_test(g: &Arc<SpaceTimeGrid>) -> ScalarField<f64> {
        let t_h = g.t_horizon();
        ScalarField::from_fn(g, move |t, x| {
            let s = t / t_h;
            (PI * x[0]).sin() * (PI * x[1]).sin() * s * s * (3.0 - 2.0 * s)
        })
    }

    #[test]
    fn splitting_of_zero_is_zero_and_p3_vanishes_without_coefficients() {
        let g = grid(17, 8);
        let c0 = CoefficientPair::new(VectorField::zeros(&g), ScalarField::zeros(&g)).unwrap();
        let w = CarlemanWeight::new(8.0, &[1.0, 0.0]).unwrap();
        let (p1, p2, p3) = split_operator(&c0, &w, &ScalarField::zeros(&g));
        assert_eq!(p1.max_abs(), 0.0);
        assert_eq!(p2.max_abs(), 0.0);
        assert_eq!(p3.max_abs(), 0.0);
        let (_, _, p3) = split_operator(&c0, &w, &smooth_test(&g));
        assert_eq!(p3.max_abs(), 0.0);
    }

    #[test]
    fn splitting_sums_to_the_conjugated_operator() {
        let g = grid(17, 8);
        let c = gentle_pair(&g);
        let w = CarlemanWeight::new(8.0, &[0.6, 0.8]).unwrap();
        let v = smooth_test(&g);
        let (p1, p2, p3) = split_operator(&c, &w, &v);
        let sum = p1.add(&p2).add(&p3);
        let vc = v.map(|r| Complex64::new(r, 0.0));
        let conj = apply_conjugated(GoKind::Growing, &c, &w, &vc);
        let defect = conj.sub(&sum.map(|r| Complex64::new(r, 0.0)));
        assert!(
            defect.max_abs() <= 1e-10 * (1.0 + conj.max_abs()),
            "splitting defect {}",
            defect.max_abs()
        );
    }

    #[test]
    fn p2_lower_bound_holds_and_grows_with_lambda() {
        let g = grid(33, 16);
        let v = ScalarField::from_fn(&g, |t, x| {
            bump1((x[0] - 0.5) / 0.3) * bump1((x[1] - 0.5) / 0.3) * t * t * (3.0 - 2.0 * t)
        });
        let zero = check_p2_lower_bound(
            &CarlemanWeight::new(16.0, &[1.0, 0.0]).unwrap(),
            &ScalarField::zeros(&g),
        );
        assert_eq!(zero, 1.0);
        let ratio = |l: f64| {
            check_p2_lower_bound(&CarlemanWeight::new(l, &[1.0, 0.0]).unwrap(), &v)
        };
        let r16 = ratio(16.0);
        assert!(r16 >= 1.0 - 10.0 * g.h(), "P2 ratio {r16}");
        let r32 = ratio(32.0);
        let r64 = ratio(64.0);
        assert!(r16 < r32 && r32 < r64, "P2 ratios not growing: {r16} {r32} {r64}");
    }

    #[test]
    fn boundary_estimate_sweep_stays_bounded() {
        let g = grid(33, 16);
        let c0 = CoefficientPair::new(VectorField::zeros(&g), ScalarField::zeros(&g)).unwrap();
        let suite = standard_test_suite(&g);
        assert_eq!(suite.len(), 12);
        let lambdas = [8.0, 16.0, 32.0, 64.0];
        let report = check_boundary_estimate(&c0, &[1.0, 0.0], &lambdas, &suite).unwrap();
        assert!(report.c_hat.is_finite() && report.c_hat > 0.0);
        assert!(report.onset_lambda <= 64.0);
        let onset_pos = lambdas.iter().position(|&l| l == report.onset_lambda).unwrap();
        for w in report.ratios[onset_pos..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "ratios rise after onset: {:?}", report.ratios);
        }
        for row in &report.terms {
            for &t in row {
                assert!(t.is_finite() && t >= 0.0, "bad term {t}");
            }
        }
        // coefficients at the admissible bound: the estimate survives with a
        // possibly larger empirical constant
        let bound = VectorField::<f64>::zeros(&g).admissible_bound() * 0.999;
        let a = VectorField::from_fns(&g, move |_, x, j| {
            let dir = if j == 0 { 0.6 } else { 0.8 };
            bound * dir * (PI * x[0]).sin() * (PI * x[1]).sin()
        });
        let q = ScalarField::from_spatial_fn(&g, |x| 0.5 * (PI * x[0]).sin());
        let ca = CoefficientPair::new(a, q).unwrap();
        let report_a = check_boundary_estimate(&ca, &[1.0, 0.0], &lambdas, &suite).unwrap();
        assert!(report_a.c_hat.is_finite() && report_a.c_hat > 0.0);
        assert!(report_a.c_hat > 0.5 * report.c_hat);
    }

    #[test]
    fn zero_suite_reports_zero_ratios() {
        let g = grid(17, 8);
        let c0 = CoefficientPair::new(VectorField::zeros(&g), ScalarField::zeros(&g)).unwrap();
        let report =
            check_boundary_estimate(&c0, &[1.0, 0.0], &[8.0, 16.0], &[ScalarField::zeros(&g)])
                .unwrap();
        assert_eq!(report.ratios, vec![0.0, 0.0]);
        assert_eq!(report.c_hat, 0.0);
    }

    #[test]
    fn rejects_test_functions_violating_preconditions() {
        let g = grid(17, 8);
        let c0 = CoefficientPair::new(VectorField::zeros(&g), ScalarField::zeros(&g)).unwrap();
        let bad_initial = ScalarField::from_fn(&g, |_, x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let err = check_boundary_estimate(&c0, &[1.0, 0.0], &[8.0], &[bad_initial]).unwrap_err();
        assert!(err.to_string().contains("t = 0"), "{err}");
        let bad_trace = ScalarField::from_fn(&g, |t, _| t);
        let err = check_boundary_estimate(&c0, &[1.0, 0.0], &[8.0], &[bad_trace]).unwrap_err();
        assert!(err.to_string().contains("lateral boundary"), "{err}");
    }

    #[test]
    fn p1p2_identity_defect_shrinks_at_second_order() {
        // asymmetric in space so the signed boundary flux is active
        let res = |n: usize, m: usize| {
            let g = grid(n, m);
            let w = CarlemanWeight::new(4.0, &[0.6, 0.8]).unwrap();
            let v = ScalarField::from_fn(&g, |t, x| {
                (PI * x[0]).sin()
                    * (PI * x[1]).sin()
                    * (0.4 * x[0] + 0.3 * x[1]).exp()
                    * t
                    * t
                    * (3.0 - 2.0 * t)
            });
            p1p2_identity_residual(&w, &v).unwrap()
        };
        let coarse = res(17, 32);
        let mid = res(33, 128);
        let fine = res(65, 512);
        assert!(fine < 2.5e-3, "identity residual {fine}");
        assert!(
            mid < 0.55 * coarse && fine < 0.55 * mid,
            "no second-order decay: {coarse} -> {mid} -> {fine}"
        );
    }

    #[test]
    fn report_round_trips_through_csv_and_json() {
        let g = grid(17, 8);
        let c0 = CoefficientPair::new(VectorField::zeros(&g), ScalarField::zeros(&g)).unwrap();
        let suite = standard_test_suite(&g);
        let report = check_boundary_estimate(&c0, &[1.0, 0.0], &[8.0, 16.0], &suite).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("carleman.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,term1,term2,term3,term4,term5,term6,ratio"
        );
        assert_eq!(lines.count(), 2);
        let summary = report.summary_json();
        assert!(summary["onset_lambda"].is_number());
        assert!(summary["c_hat"].is_number());
    }
}
