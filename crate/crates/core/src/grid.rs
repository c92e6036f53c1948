//! Space-time grids on Q = (0,T) x [0,1]^n and boundary bookkeeping.

use crate::error::{CdError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Uniform tensor grid on [0,T] x [0,1]^n.
///
/// Spatial nodes are x_i = i*h with h = 1/(N-1); time slices t_m = m*k with
/// k = T/M, m = 0..=M. `enclosing_radius` is the radius of the smallest ball
/// centred at the origin of R^{1+n} containing the closure of Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    dim: usize,
    n_nodes: usize,
    m_steps: usize,
    t_horizon: f64,
    h: f64,
    k: f64,
    enclosing_radius: f64,
}

impl SpaceTimeGrid {
    pub fn new(dim: usize, n_nodes: usize, m_steps: usize, t_horizon: f64) -> Result<Arc<Self>> {
        if !(2..=3).contains(&dim) {
            return Err(CdError::InvalidArgument(format!("dim must be 2 or 3, got {dim}")));
        }
        if n_nodes < 8 || m_steps < 8 {
            return Err(CdError::InvalidArgument(format!(
                "need N >= 8 and M >= 8, got N={n_nodes}, M={m_steps}"
            )));
        }
        if !(t_horizon > 0.0) {
            return Err(CdError::InvalidArgument(format!("T must be positive, got {t_horizon}")));
        }
        let h = 1.0 / (n_nodes as f64 - 1.0);
        let k = t_horizon / m_steps as f64;
        let grid = SpaceTimeGrid {
            dim,
            n_nodes,
            m_steps,
            t_horizon,
            h,
            k,
            enclosing_radius: enclosing_radius(dim, t_horizon),
        };
        Ok(Arc::new(grid))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Nodes per spatial axis.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    /// Time steps; there are M+1 time slices.
    pub fn m_steps(&self) -> usize {
        self.m_steps
    }
    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn enclosing_radius(&self) -> f64 {
        self.enclosing_radius
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }
    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.k
    }

    /// Shape of the full space-time value array: [M+1, N, .., N].
    pub fn field_shape(&self) -> Vec<usize> {
        let mut s = vec![self.m_steps + 1];
        s.extend(std::iter::repeat(self.n_nodes).take(self.dim));
        s
    }

    pub fn spatial_shape(&self) -> Vec<usize> {
        vec![self.n_nodes; self.dim]
    }

    /// Coordinates of a spatial multi-index.
    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.x(i)).collect()
    }

    /// Trapezoid quadrature weight of a spatial node (product rule).
    pub fn space_weight(&self, idx: &[usize]) -> f64 {
        let mut w = self.h.powi(self.dim as i32);
        for &i in idx {
            if i == 0 || i == self.n_nodes - 1 {
                w *= 0.5;
            }
        }
        w
    }

    /// Trapezoid quadrature weight of a time slice.
    pub fn time_weight(&self, m: usize) -> f64 {
        if m == 0 || m == self.m_steps {
            0.5 * self.k
        } else {
            self.k
        }
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| i == 0 || i == self.n_nodes - 1)
    }

    /// Recompute the enclosing radius from the corner set of [0,T] x [0,1]^n.
    pub fn radius_from_corners(&self) -> f64 {
        let mut best = 0.0f64;
        for mask in 0..(1usize << (self.dim + 1)) {
            let mut s = 0.0;
            for j in 0..=self.dim {
                let c = if mask >> j & 1 == 1 {
                    if j == 0 {
                        self.t_horizon
                    } else {
                        1.0
                    }
                } else {
                    0.0
                };
                s += c * c;
            }
            best = best.max(s.sqrt());
        }
        best
    }
}

fn enclosing_radius(dim: usize, t_horizon: f64) -> f64 {
    // Farthest corner of [0,T] x [0,1]^n from the origin is (T, 1, .., 1).
    (t_horizon * t_horizon + dim as f64).sqrt()
}

/// One of the 2n flat faces of the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxFace {
    pub axis: usize,
    pub upper: bool,
}

impl BoxFace {
    pub fn all(dim: usize) -> Vec<BoxFace> {
        let mut v = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            v.push(BoxFace { axis, upper: false });
            v.push(BoxFace { axis, upper: true });
        }
        v
    }

    /// Linear index in the canonical face ordering used by boundary traces.
    pub fn index(&self) -> usize {
        2 * self.axis + self.upper as usize
    }

    pub fn from_index(dim: usize, i: usize) -> BoxFace {
        assert!(i < 2 * dim);
        BoxFace { axis: i / 2, upper: i % 2 == 1 }
    }

    /// Outward unit normal.
    pub fn normal(&self, dim: usize) -> Vec<f64> {
        let mut nu = vec![0.0; dim];
        nu[self.axis] = if self.upper { 1.0 } else { -1.0 };
        nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionKind {
    /// Faces with nu . omega0 >= 0.
    Shadowed,
    /// Faces with nu . omega0 <= 0.
    Illuminated,
    /// Neighborhood of the shadowed part.
    NeighborhoodF,
    /// Neighborhood of the illuminated part; measurements live here.
    NeighborhoodG,
    /// Faces with nu . omega strictly above the aperture margin.
    StrictlyPositive,
    /// The whole lateral boundary.
    Full,
}

/// A set of box faces singled out by a direction, with the outward normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRegion {
    pub direction: Vec<f64>,
    pub kind: RegionKind,
    pub eps: f64,
    pub faces: Vec<BoxFace>,
}

impl BoundaryRegion {
    /// Classify the box faces for `kind` relative to `direction`.
    ///
    /// The neighborhoods F and G are taken with a margin of 3*eps so that the
    /// complement of G stays inside {nu . omega > eps} for every omega within
    /// eps of the reference direction.
    pub fn resolve(dim: usize, direction: &[f64], kind: RegionKind, eps: f64) -> Result<Self> {
        if direction.len() != dim {
            return Err(CdError::InvalidArgument("direction dimension mismatch".into()));
        }
        let norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(CdError::InvalidArgument("direction must be a unit vector".into()));
        }
        if eps < 0.0 {
            return Err(CdError::InvalidArgument("eps must be nonnegative".into()));
        }
        let faces = BoxFace::all(dim)
            .into_iter()
            .filter(|f| {
                let d = dot(&f.normal(dim), direction);
                match kind {
                    RegionKind::Shadowed => d >= 0.0,
                    RegionKind::Illuminated => d <= 0.0,
                    RegionKind::NeighborhoodF => d > -3.0 * eps,
                    RegionKind::NeighborhoodG => d < 3.0 * eps,
                    RegionKind::StrictlyPositive => d > eps,
                    RegionKind::Full => true,
                }
            })
            .collect();
        Ok(BoundaryRegion { direction: direction.to_vec(), kind, eps, faces })
    }

    pub fn contains(&self, face: BoxFace) -> bool {
        self.faces.contains(&face)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_matches_corner_enumeration() {
        for (dim, t) in [(2, 1.0), (3, 0.5), (2, 2.25)] {
            let g = SpaceTimeGrid::new(dim, 17, 16, t).unwrap();
            assert_eq!(g.enclosing_radius(), g.radius_from_corners());
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(SpaceTimeGrid::new(2, 4, 16, 1.0).is_err());
        assert!(SpaceTimeGrid::new(2, 16, 4, 1.0).is_err());
        assert!(SpaceTimeGrid::new(4, 16, 16, 1.0).is_err());
        assert!(SpaceTimeGrid::new(2, 16, 16, 0.0).is_err());
    }

    #[test]
    fn shadowed_and_illuminated_cover_boundary() {
        let dir = [1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()];
        let shadowed = BoundaryRegion::resolve(2, &dir, RegionKind::Shadowed, 0.0).unwrap();
        let illuminated = BoundaryRegion::resolve(2, &dir, RegionKind::Illuminated, 0.0).unwrap();
        for f in BoxFace::all(2) {
            assert!(shadowed.contains(f) || illuminated.contains(f));
        }
    }

    #[test]
    fn complement_of_g_sits_in_strictly_positive_cone() {
        let eps = 0.1;
        let dir = [1.0, 0.0];
        let g = BoundaryRegion::resolve(2, &dir, RegionKind::NeighborhoodG, eps).unwrap();
        // Perturb the direction within the cone and check the containment.
        for a in [-eps, -eps / 2.0, 0.0, eps / 2.0, eps] {
            let w = [(1.0f64 - a * a).sqrt(), a];
            let sp = BoundaryRegion::resolve(2, &w, RegionKind::StrictlyPositive, eps).unwrap();
            for f in BoxFace::all(2) {
                if !g.contains(f) {
                    assert!(sp.contains(f), "face {f:?} escaped the strictly positive cone");
                }
            }
        }
    }
}
