//! Second-order finite-difference operators: gradient, divergence, laplacian
//! and the time derivative. Centered stencils in the interior, one-sided
//! second-order stencils at the box faces, so polynomials of degree two are
//! reproduced exactly.

use crate::field::{FieldValue, ScalarField, VectorField};
use ndarray::{Dimension, IxDyn};

/// d/dx_axis of one time slice, written into `out`.
fn partial_axis<T: FieldValue>(f: &ScalarField<T>, m: usize, axis: usize, out: &mut ScalarField<T>) {
    let g = f.grid().clone();
    let n = g.n_nodes();
    let h = g.h();
    let slice = f.time_slice(m).to_owned();
    let mut o = out.time_slice_mut(m);
    for (idx, v) in o.indexed_iter_mut() {
        let idx = idx.slice();
        let i = idx[axis];
        let at = |ia: usize| {
            let mut j = idx.to_vec();
            j[axis] = ia;
            slice[IxDyn(&j)]
        };
        *v = if i == 0 {
            (at(0) * -3.0 + at(1) * 4.0 - at(2)) * (0.5 / h)
        } else if i == n - 1 {
            (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h)
        } else {
            (at(i + 1) - at(i - 1)) * (0.5 / h)
        };
    }
}

/// Second derivative along one axis of a slice, added into `out`.
fn second_partial_axis<T: FieldValue>(
    f: &ScalarField<T>,
    m: usize,
    axis: usize,
    out: &mut ScalarField<T>,
) {
    let g = f.grid().clone();
    let n = g.n_nodes();
    let h2 = g.h() * g.h();
    let slice = f.time_slice(m).to_owned();
    let mut o = out.time_slice_mut(m);
    for (idx, v) in o.indexed_iter_mut() {
        let idx = idx.slice();
        let i = idx[axis];
        let at = |ia: usize| {
            let mut j = idx.to_vec();
            j[axis] = ia;
            slice[IxDyn(&j)]
        };
        let d2 = if i == 0 {
            at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)
        } else if i == n - 1 {
            at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)
        } else {
            at(i - 1) - at(i) * 2.0 + at(i + 1)
        };
        *v = *v + d2 * (1.0 / h2);
    }
}

/// Spatial gradient, slice by slice.
pub fn gradient<T: FieldValue>(f: &ScalarField<T>) -> VectorField<T> {
    let g = f.grid();
    let mut comps = Vec::with_capacity(g.dim());
    for axis in 0..g.dim() {
        let mut c = ScalarField::zeros(g);
        for m in 0..=g.m_steps() {
            partial_axis(f, m, axis, &mut c);
        }
        comps.push(c);
    }
    VectorField::new(comps).expect("gradient components are consistent")
}

/// One spatial partial derivative of the whole space-time field.
pub fn partial<T: FieldValue>(f: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    let g = f.grid();
    let mut c = ScalarField::zeros(g);
    for m in 0..=g.m_steps() {
        partial_axis(f, m, axis, &mut c);
    }
    c
}

/// Divergence of a vector field with the same stencils as `gradient`.
pub fn divergence<T: FieldValue>(field: &VectorField<T>) -> ScalarField<T> {
    let g = field.grid();
    let mut out = ScalarField::zeros(g);
    for axis in 0..g.dim() {
        let d = partial(field.component(axis), axis);
        out = out.add(&d);
    }
    out
}

/// Laplacian: 5-point (n=2) / 7-point (n=3) in the interior, one-sided
/// second-order second differences at the faces.
pub fn laplacian<T: FieldValue>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid();
    let mut out = ScalarField::zeros(g);
    for m in 0..=g.m_steps() {
        for axis in 0..g.dim() {
            second_partial_axis(f, m, axis, &mut out);
        }
    }
    out
}

/// Time derivative: centered in the interior slices, one-sided second order
/// at t=0 and t=T.
pub fn time_derivative<T: FieldValue>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid().clone();
    let msteps = g.m_steps();
    let k = g.k();
    let mut out = ScalarField::zeros(&g);
    for m in 0..=msteps {
        let v = if m == 0 {
            f.time_slice(0)
                .to_owned()
                .mapv(|a: T| a * -3.0)
                + f.time_slice(1).to_owned().mapv(|a: T| a * 4.0)
                - f.time_slice(2).to_owned()
        } else if m == msteps {
            f.time_slice(msteps).to_owned().mapv(|a: T| a * 3.0)
                - f.time_slice(msteps - 1).to_owned().mapv(|a: T| a * 4.0)
                + f.time_slice(msteps - 2).to_owned()
        } else {
            f.time_slice(m + 1).to_owned() - f.time_slice(m - 1).to_owned()
        };
        out.time_slice_mut(m).assign(&v.mapv(|a| a * (0.5 / k)));
    }
    out
}

/// a . grad f with the gradient stencils.
pub fn directional_derivative<T: FieldValue>(
    f: &ScalarField<T>,
    direction: &[f64],
) -> ScalarField<T> {
    let g = f.grid();
    let mut out = ScalarField::zeros(g);
    for axis in 0..g.dim() {
        let d = partial(f, axis).scale(direction[axis]);
        out = out.add(&d);
    }
    out
}
