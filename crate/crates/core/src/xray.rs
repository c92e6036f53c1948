//! Limited-angle ray transform of vector fields: direction cones around a
//! reference direction, deterministic hyperplane sampling of omega-perp, and
//! the attenuated per-ray moments that the boundary data expose.

use crate::error::{CdError, Result};
use crate::field::VectorField;
use crate::grid::{dot, SpaceTimeGrid};
use crate::ray::{ray_quadrature, RayRange};
use ndarray::Array3;
use std::path::Path;
use std::sync::Arc;

/// Directions within geodesic distance ~eps of a reference direction.
#[derive(Debug, Clone)]
pub struct DirectionCone {
    pub omega0: Vec<f64>,
    pub eps: f64,
    pub directions: Vec<Vec<f64>>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        for c in v.iter_mut() {
            *c /= n;
        }
    }
    n
}

/// Orthonormal basis of the hyperplane omega-perp, built by Gram-Schmidt over
/// the standard basis seeded with omega; fully deterministic.
pub fn hyperplane_frame(omega: &[f64]) -> Vec<Vec<f64>> {
    let dim = omega.len();
    let mut basis: Vec<Vec<f64>> = vec![omega.to_vec()];
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        for b in &basis {
            let p = dot(&e, b);
            for (c, &bc) in e.iter_mut().zip(b) {
                *c -= p * bc;
            }
        }
        if normalize(&mut e) > 1e-8 {
            basis.push(e);
        }
    }
    basis.remove(0);
    basis
}

/// Deterministic sampling of the cap |omega - omega0| <= eps: omega0 itself,
/// then the one-parameter families omega(a) = cos(a) omega0 + sin(a) u over
/// every frame vector u of omega0-perp, with the tilt halved each round.
pub fn sample_cone(omega0: &[f64], eps: f64, count: usize) -> Result<DirectionCone> {
    let dim = omega0.len();
    if !(0.0 < eps && eps < 0.5) {
        return Err(CdError::InvalidArgument(format!(
            "cone half-width must lie in (0, 1/2), got {eps}"
        )));
    }
    if count < dim {
        return Err(CdError::InvalidArgument(format!(
            "need at least n = {dim} directions, got {count}"
        )));
    }
    let mut w0 = omega0.to_vec();
    if (normalize(&mut w0) - 1.0).abs() > 1e-6 {
        return Err(CdError::InvalidArgument("reference direction must be a unit vector".into()));
    }
    let frame = hyperplane_frame(&w0);
    let mut directions = vec![w0.clone()];
    // chord |omega(a) - omega0| = 2 sin(a/2); keep it within eps
    let a_max = 2.0 * (eps / 2.0).asin();
    let mut round = 0;
    'fill: loop {
        let a = a_max / (1 << round) as f64;
        for u in &frame {
            for sign in [1.0, -1.0] {
                if directions.len() == count {
                    break 'fill;
                }
                let s = sign * a;
                let w: Vec<f64> =
                    w0.iter().zip(u).map(|(&w0c, &uc)| s.cos() * w0c + s.sin() * uc).collect();
                directions.push(w);
            }
        }
        round += 1;
        if round > 60 {
            break;
        }
    }
    Ok(DirectionCone { omega0: w0, eps, directions })
}

impl DirectionCone {
    /// The perturbation omega(a) = cos(a) omega0 + sin(a) u_k along the k-th
    /// frame vector of omega0-perp.
    pub fn perturbed(&self, a: f64, k: usize) -> Vec<f64> {
        let frame = hyperplane_frame(&self.omega0);
        self.omega0
            .iter()
            .zip(&frame[k])
            .map(|(&w, &u)| a.cos() * w + a.sin() * u)
            .collect()
    }
}

/// Full-line integrals omega . F over a (t, plane node, direction) grid.
///
/// For each direction the plane omega-perp is sampled on a tensor grid of
/// `plane_nodes` points per frame axis spanning [-half_width, half_width],
/// offset from the box center; that covers the shadow of the unit box for
/// half_width >= sqrt(n)/2.
#[derive(Debug, Clone)]
pub struct RayData {
    grid: Arc<SpaceTimeGrid>,
    pub cone: DirectionCone,
    pub plane_nodes: usize,
    pub half_width: f64,
    /// shape (M+1, directions, plane_nodes^(n-1))
    values: Array3<f64>,
}

impl RayData {
    fn empty(grid: &Arc<SpaceTimeGrid>, cone: &DirectionCone, plane_nodes: usize) -> Self {
        let flats = plane_nodes.pow(grid.dim() as u32 - 1);
        RayData {
            grid: grid.clone(),
            cone: cone.clone(),
            plane_nodes,
            half_width: (grid.dim() as f64).sqrt() / 2.0 + grid.h(),
            values: Array3::zeros((grid.m_steps() + 1, cone.directions.len(), flats)),
        }
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn flats(&self) -> usize {
        self.values.dim().2
    }

    /// Base point of the ray with plane index `flat` for direction `w`.
    pub fn base_point(&self, w: usize, flat: usize) -> Vec<f64> {
        let g = &self.grid;
        let frame = hyperplane_frame(&self.cone.directions[w]);
        let mut x = vec![0.5; g.dim()];
        let mut rem = flat;
        for u in frame.iter().rev() {
            let i = rem % self.plane_nodes;
            rem /= self.plane_nodes;
            let c = if self.plane_nodes == 1 {
                0.0
            } else {
                -self.half_width
                    + 2.0 * self.half_width * i as f64 / (self.plane_nodes - 1) as f64
            };
            for (xc, &uc) in x.iter_mut().zip(u) {
                *xc += c * uc;
            }
        }
        x
    }

    pub fn get(&self, m: usize, w: usize, flat: usize) -> f64 {
        self.values[(m, w, flat)]
    }

    pub fn set(&mut self, m: usize, w: usize, flat: usize, v: f64) {
        self.values[(m, w, flat)] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(f);
        out
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.dim(), other.values.dim());
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values).and(&other.values).for_each(|a, &b| *a = f(*a, b));
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// CSV rows (t, direction index, plane index, value) plus a JSON table
    /// of the sampled directions next to it.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for m in 0..=self.grid.m_steps() {
            for w in 0..self.cone.directions.len() {
                for flat in 0..self.flats() {
                    rows.push(vec![
                        self.grid.t(m),
                        w as f64,
                        flat as f64,
                        self.values[(m, w, flat)],
                    ]);
                }
            }
        }
        crate::io::write_csv(path, &["t", "omega_index", "k_index", "value"], &rows)?;
        let table = serde_json::json!({
            "omega0": self.cone.omega0,
            "eps": self.cone.eps,
            "directions": self.cone.directions,
            "plane_nodes": self.plane_nodes,
            "half_width": self.half_width,
        });
        let json_path = path.with_extension("directions.json");
        std::fs::write(json_path, serde_json::to_string_pretty(&table)?)?;
        Ok(())
    }
}

/// Ray transform I F(t, k, omega) over every direction of the cone.
pub fn transform(f: &VectorField<f64>, cone: &DirectionCone, plane_nodes: usize) -> RayData {
    let mut out = RayData::empty(f.grid(), cone, plane_nodes);
    for m in 0..=f.grid().m_steps() {
        for (w, omega) in cone.directions.iter().enumerate() {
            for flat in 0..out.flats() {
                let x = out.base_point(w, flat);
                let v = ray_quadrature(f, m, &x, omega, RayRange::FullLine);
                out.set(m, w, flat, v);
            }
        }
    }
    out
}

/// The nonlinear per-ray moment 1 - exp(-I A) seen by the data.
pub fn apply_attenuation(line_integral: f64) -> f64 {
    1.0 - (-line_integral).exp()
}

/// Inverse of `apply_attenuation`; rejects saturated moments.
pub fn invert_attenuation(moment: f64) -> Result<f64> {
    if moment.abs() >= 1.0 {
        return Err(CdError::InvalidArgument(format!(
            "attenuated moment {moment} is saturated; no finite line integral maps to it"
        )));
    }
    Ok(-(1.0 - moment).ln())
}

/// Attenuated moments with the (unreachable for admissible fields) saturated
/// rays flagged as (t index, direction index, plane index).
#[derive(Debug, Clone)]
pub struct AttenuatedData {
    pub moments: RayData,
    pub flagged: Vec<[usize; 3]>,
}

pub fn attenuated_moment(
    a: &VectorField<f64>,
    cone: &DirectionCone,
    plane_nodes: usize,
) -> Result<AttenuatedData> {
    if !a.is_admissible() {
        return Err(CdError::Precondition(format!(
            "convection coefficient exceeds the admissible bound 1/(9R) = {:.6e}",
            a.admissible_bound()
        )));
    }
    let linear = transform(a, cone, plane_nodes);
    let mut flagged = Vec::new();
    let mut moments = linear.clone();
    for m in 0..=a.grid().m_steps() {
        for w in 0..cone.directions.len() {
            for flat in 0..linear.flats() {
                let v = apply_attenuation(linear.get(m, w, flat));
                if v.abs() >= 1.0 {
                    flagged.push([m, w, flat]);
                }
                moments.set(m, w, flat, v);
            }
        }
    }
    Ok(AttenuatedData { moments, flagged })
}

/// Recover the linear ray transform from attenuated moments.
pub fn recover_ray_transform(moments: &RayData) -> Result<RayData> {
    let mut out = moments.clone();
    for v in out.values.iter_mut() {
        *v = invert_attenuation(*v)?;
    }
    Ok(out)
}
