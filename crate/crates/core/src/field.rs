//! Sampled scalar and vector fields on a space-time grid.

use crate::error::{CdError, Result};
use crate::grid::SpaceTimeGrid;
use ndarray::{ArrayD, ArrayViewD, ArrayViewMutD, Dimension, IxDyn};
use num_complex::Complex64;
use std::sync::Arc;

/// Value types a field can hold.
pub trait FieldValue:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + num_traits::Zero
    + Send
    + Sync
    + 'static
{
    fn from_real(x: f64) -> Self;
    fn abs2(self) -> f64;
    fn is_finite_value(self) -> bool;
    fn conj_value(self) -> Self;
    fn real_part(self) -> f64;
}

impl FieldValue for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    fn conj_value(self) -> Self {
        self
    }
    fn real_part(self) -> f64 {
        self
    }
}

impl FieldValue for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn conj_value(self) -> Self {
        self.conj()
    }
    fn real_part(self) -> f64 {
        self.re
    }
}

/// Time-dependent scalar field sampled on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T: FieldValue = f64> {
    grid: Arc<SpaceTimeGrid>,
    values: ArrayD<T>,
}

impl<T: FieldValue> ScalarField<T> {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        ScalarField { grid: grid.clone(), values: ArrayD::zeros(IxDyn(&grid.field_shape())) }
    }

    pub fn from_values(grid: &Arc<SpaceTimeGrid>, values: ArrayD<T>) -> Result<Self> {
        if values.shape() != grid.field_shape().as_slice() {
            return Err(CdError::InvalidArgument(format!(
                "value array shape {:?} does not match grid shape {:?}",
                values.shape(),
                grid.field_shape()
            )));
        }
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(CdError::InvalidArgument("field contains non-finite entries".into()));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Sample `f(t, x)` at every node.
    pub fn from_fn(grid: &Arc<SpaceTimeGrid>, f: impl Fn(f64, &[f64]) -> T) -> Self {
        let mut out = Self::zeros(grid);
        let dim = grid.dim();
        let mut coords = vec![0.0; dim];
        for (idx, v) in out.values.indexed_iter_mut() {
            let idx = idx.slice();
            let t = grid.t(idx[0]);
            for j in 0..dim {
                coords[j] = grid.x(idx[1 + j]);
            }
            *v = f(t, &coords);
        }
        out
    }

    /// Sample a time-independent profile at every slice.
    pub fn from_spatial_fn(grid: &Arc<SpaceTimeGrid>, f: impl Fn(&[f64]) -> T) -> Self {
        Self::from_fn(grid, |_, x| f(x))
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }
    pub fn values(&self) -> &ArrayD<T> {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut ArrayD<T> {
        &mut self.values
    }

    pub fn time_slice(&self, m: usize) -> ArrayViewD<'_, T> {
        self.values.index_axis(ndarray::Axis(0), m)
    }
    pub fn time_slice_mut(&mut self, m: usize) -> ArrayViewMutD<'_, T> {
        self.values.index_axis_mut(ndarray::Axis(0), m)
    }

    pub fn get(&self, m: usize, idx: &[usize]) -> T {
        let mut full = Vec::with_capacity(idx.len() + 1);
        full.push(m);
        full.extend_from_slice(idx);
        self.values[IxDyn(&full)]
    }

    pub fn set(&mut self, m: usize, idx: &[usize], v: T) {
        let mut full = Vec::with_capacity(idx.len() + 1);
        full.push(m);
        full.extend_from_slice(idx);
        self.values[IxDyn(&full)] = v;
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> ScalarField<U> {
        ScalarField { grid: self.grid.clone(), values: self.values.mapv(|v| f(v)) }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.values.shape(), other.values.shape());
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

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs2().sqrt()).fold(0.0, f64::max)
    }

    /// Trapezoid L^2(Q) norm.
    pub fn l2_q(&self) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for m in 0..=g.m_steps() {
            let wt = g.time_weight(m);
            let slice = self.time_slice(m);
            let mut s = 0.0;
            for (idx, v) in slice.indexed_iter() {
                s += g.space_weight(idx.slice()) * v.abs2();
            }
            total += wt * s;
        }
        total.sqrt()
    }

    /// Trapezoid L^2(Omega) norm of one time slice.
    pub fn l2_slice(&self, m: usize) -> f64 {
        let g = &self.grid;
        let slice = self.time_slice(m);
        let mut s = 0.0;
        for (idx, v) in slice.indexed_iter() {
            s += g.space_weight(idx.slice()) * v.abs2();
        }
        s.sqrt()
    }

    /// L^2(Q) inner product <self, conj(other)>.
    pub fn inner_q(&self, other: &Self) -> T {
        let g = &self.grid;
        let mut total = T::zero();
        for m in 0..=g.m_steps() {
            let wt = g.time_weight(m);
            let a = self.time_slice(m);
            let b = other.time_slice(m);
            let mut s = T::zero();
            for ((idx, &x), &y) in a.indexed_iter().zip(b.iter()) {
                s = s + x * y.conj_value() * g.space_weight(idx.slice());
            }
            total = total + s * wt;
        }
        total
    }

    /// Multilinear interpolation of a time slice at an arbitrary point; zero
    /// outside the closed unit box.
    pub fn interp_slice(&self, m: usize, x: &[f64]) -> T {
        let g = &self.grid;
        let dim = g.dim();
        let h = g.h();
        let n = g.n_nodes();
        // tolerate round-off at the box faces
        for &c in x {
            if !(-1e-12..=1.0 + 1e-12).contains(&c) {
                return T::zero();
            }
        }
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0f64; dim];
        for j in 0..dim {
            let s = (x[j].clamp(0.0, 1.0)) / h;
            let mut i = s.floor() as usize;
            if i >= n - 1 {
                i = n - 2;
            }
            base[j] = i;
            frac[j] = s - i as f64;
        }
        let slice = self.time_slice(m);
        let mut acc = T::zero();
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for j in 0..dim {
                if corner >> j & 1 == 1 {
                    idx[j] += 1;
                    w *= frac[j];
                } else {
                    w *= 1.0 - frac[j];
                }
            }
            acc = acc + slice[IxDyn(&idx)] * w;
        }
        acc
    }
}

impl ScalarField<f64> {
    pub fn into_complex(&self) -> ScalarField<Complex64> {
        self.map(Complex64::from_real)
    }
}

impl ScalarField<Complex64> {
    pub fn real(&self) -> ScalarField<f64> {
        self.map(|v| v.re)
    }
    pub fn imag(&self) -> ScalarField<f64> {
        self.map(|v| v.im)
    }
    pub fn from_parts(re: &ScalarField<f64>, im: &ScalarField<f64>) -> Self {
        let mut out = re.map(|v| Complex64::new(v, 0.0));
        ndarray::Zip::from(out.values_mut()).and(im.values()).for_each(|a, &b| a.im = b);
        out
    }
}

/// Vector field with n scalar components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T: FieldValue = f64> {
    components: Vec<ScalarField<T>>,
    time_independent: bool,
}

impl<T: FieldValue> VectorField<T> {
    pub fn new(components: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = components
            .first()
            .ok_or_else(|| CdError::InvalidArgument("vector field needs components".into()))?
            .grid()
            .clone();
        if components.len() != grid.dim() {
            return Err(CdError::InvalidArgument(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            if c.grid() != &grid {
                return Err(CdError::InvalidArgument("components live on different grids".into()));
            }
        }
        let time_independent = components.iter().all(|c| {
            let first = c.time_slice(0);
            (1..=grid.m_steps()).all(|m| c.time_slice(m) == first)
        });
        Ok(VectorField { components, time_independent })
    }

    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        VectorField {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
            time_independent: true,
        }
    }

    pub fn from_fns(grid: &Arc<SpaceTimeGrid>, f: impl Fn(f64, &[f64], usize) -> T) -> Self {
        let components = (0..grid.dim())
            .map(|j| ScalarField::from_fn(grid, |t, x| f(t, x, j)))
            .collect();
        Self::new(components).expect("component construction is consistent")
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        self.components[0].grid()
    }
    pub fn dim(&self) -> usize {
        self.components.len()
    }
    pub fn component(&self, j: usize) -> &ScalarField<T> {
        &self.components[j]
    }
    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }
    pub fn time_independent(&self) -> bool {
        self.time_independent
    }

    /// Pointwise Euclidean sup norm over all nodes.
    pub fn sup_norm(&self) -> f64 {
        let g = self.grid();
        let mut best = 0.0f64;
        for m in 0..=g.m_steps() {
            let slices: Vec<_> = self.components.iter().map(|c| c.time_slice(m)).collect();
            for (idx, _) in slices[0].indexed_iter() {
                let s: f64 = slices.iter().map(|sl| sl[&idx].abs2()).sum();
                best = best.max(s.sqrt());
            }
        }
        best
    }

    /// Largest magnitude allowed for a convection coefficient on this grid.
    pub fn admissible_bound(&self) -> f64 {
        1.0 / (9.0 * self.grid().enclosing_radius())
    }

    /// Membership in the admissible set: sup-norm at most 1/(9R).
    pub fn is_admissible(&self) -> bool {
        self.sup_norm() <= self.admissible_bound() + 1e-14
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorField {
            components: self.components.iter().map(|c| c.scale(s)).collect(),
            time_independent: self.time_independent,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect();
        VectorField {
            components,
            time_independent: self.time_independent && other.time_independent,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.sub(b))
            .collect();
        VectorField {
            components,
            time_independent: self.time_independent && other.time_independent,
        }
    }

    pub fn l2_q(&self) -> f64 {
        self.components.iter().map(|c| c.l2_q().powi(2)).sum::<f64>().sqrt()
    }

    /// omega . F interpolated at (slice m, point x).
    pub fn directional_interp(&self, m: usize, x: &[f64], omega: &[f64]) -> T {
        let mut acc = T::zero();
        for (c, &w) in self.components.iter().zip(omega) {
            acc = acc + c.interp_slice(m, x) * w;
        }
        acc
    }
}
