//! Line integrals of omega . F along rays, with the field extended by zero
//! outside the unit box.

use crate::field::VectorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayRange {
    /// s in [0, infinity)
    HalfLine,
    /// s in (-infinity, infinity)
    FullLine,
}

/// Intersection of the line x + s*omega with the closed unit box, as an
/// s-interval. Returns None when the ray misses the box.
pub fn box_interval(x: &[f64], omega: &[f64]) -> Option<(f64, f64)> {
    let mut s0 = f64::NEG_INFINITY;
    let mut s1 = f64::INFINITY;
    for j in 0..x.len() {
        if omega[j].abs() < 1e-15 {
            if !(0.0..=1.0).contains(&x[j]) {
                return None;
            }
        } else {
            let a = (0.0 - x[j]) / omega[j];
            let b = (1.0 - x[j]) / omega[j];
            s0 = s0.max(a.min(b));
            s1 = s1.min(a.max(b));
        }
    }
    if s0 > s1 {
        None
    } else {
        Some((s0, s1))
    }
}

/// Composite trapezoid quadrature of omega . F(t, x + s*omega) with step at
/// most h/2, using multilinear interpolation of F.
pub fn ray_quadrature(
    field: &VectorField<f64>,
    t_index: usize,
    x: &[f64],
    omega: &[f64],
    range: RayRange,
) -> f64 {
    let g = field.grid();
    let (mut s0, s1) = match box_interval(x, omega) {
        Some(iv) => iv,
        None => return 0.0,
    };
    if range == RayRange::HalfLine {
        s0 = s0.max(0.0);
        if s0 > s1 {
            return 0.0;
        }
    }
    let len = s1 - s0;
    if len <= 0.0 {
        return 0.0;
    }
    let steps = ((len / (g.h() / 2.0)).ceil() as usize).max(1);
    let ds = len / steps as f64;
    let eval = |s: f64| {
        let p: Vec<f64> = x.iter().zip(omega).map(|(xi, wi)| xi + s * wi).collect();
        field.directional_interp(t_index, &p, omega)
    };
    let mut acc = 0.5 * (eval(s0) + eval(s1));
    for i in 1..steps {
        acc += eval(s0 + i as f64 * ds);
    }
    acc * ds
}
