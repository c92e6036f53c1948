//! Spatial Fourier transforms on a zero-padded periodic box and the
//! lambda-weighted Sobolev norms built on them.

use crate::error::{CdError, Result};
use crate::field::{FieldValue, ScalarField};
use crate::grid::SpaceTimeGrid;
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

pub const DEFAULT_PAD_FACTOR: usize = 2;

/// Unitary spatial spectrum of one time slice on the padded periodic box.
#[derive(Debug, Clone)]
pub struct SpatialSpectrum {
    /// Unitary DFT coefficients, shape [Npad; n].
    pub values: ArrayD<Complex64>,
    /// Physical angular frequency along each axis, indexed like `values`.
    pub freq_axis: Vec<f64>,
    pub padded_len: usize,
    pub h: f64,
    pub dim: usize,
}

impl SpatialSpectrum {
    /// Frequency vector of a bin.
    pub fn xi(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.freq_axis[i]).collect()
    }

    /// |xi|^2 of a bin.
    pub fn xi_norm2(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.freq_axis[i] * self.freq_axis[i]).sum()
    }

    /// Weighted spectral mass h^n * sum (lambda^2+|xi|^2)^m |u_hat|^2.
    pub fn weighted_mass(&self, m_exp: f64, lambda: f64) -> f64 {
        let hn = self.h.powi(self.dim as i32);
        let mut s = 0.0;
        for (idx, v) in self.values.indexed_iter() {
            let w = (lambda * lambda + self.xi_norm2(idx.slice())).powf(m_exp);
            s += w * v.norm_sqr();
        }
        hn * s
    }
}

fn fft_axis(data: &mut ArrayD<Complex64>, axis: usize, inverse: bool) {
    let len = data.shape()[axis];
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) };
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for mut lane in data.lanes_mut(ndarray::Axis(axis)) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Unitary forward DFT of a padded cube.
pub fn fft_padded(mut data: ArrayD<Complex64>) -> ArrayD<Complex64> {
    let dims = data.ndim();
    let total: usize = data.shape().iter().product();
    for axis in 0..dims {
        fft_axis(&mut data, axis, false);
    }
    let scale = 1.0 / (total as f64).sqrt();
    data.mapv_inplace(|v| v * scale);
    data
}

/// Unitary inverse DFT of a padded cube.
pub fn ifft_padded(mut data: ArrayD<Complex64>) -> ArrayD<Complex64> {
    let dims = data.ndim();
    let total: usize = data.shape().iter().product();
    for axis in 0..dims {
        fft_axis(&mut data, axis, true);
    }
    let scale = 1.0 / (total as f64).sqrt();
    data.mapv_inplace(|v| v * scale);
    data
}

/// Signed frequency of DFT bin `i` on a padded axis: 2*pi*k / (Npad*h).
pub fn frequency_axis(padded_len: usize, h: f64) -> Vec<f64> {
    let l = padded_len as f64 * h;
    (0..padded_len)
        .map(|i| {
            let k = if i <= padded_len / 2 { i as isize } else { i as isize - padded_len as isize };
            2.0 * std::f64::consts::PI * k as f64 / l
        })
        .collect()
}

/// Zero-extend one time slice onto the padded periodic box.
pub fn pad_slice<T: FieldValue>(
    f: &ScalarField<T>,
    m: usize,
    pad_factor: usize,
) -> ArrayD<Complex64> {
    let g = f.grid();
    let n = g.n_nodes();
    let npad = pad_factor * (n - 1);
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&vec![npad; g.dim()]));
    for (idx, v) in f.time_slice(m).indexed_iter() {
        out[IxDyn(idx.slice())] = to_c64(*v);
    }
    out
}

fn to_c64<T: FieldValue>(v: T) -> Complex64 {
    // FieldValue is only implemented for f64 and Complex64.
    use std::any::Any;
    let any: &dyn Any = &v;
    if let Some(c) = any.downcast_ref::<Complex64>() {
        *c
    } else if let Some(r) = any.downcast_ref::<f64>() {
        Complex64::new(*r, 0.0)
    } else {
        unreachable!("unsupported field value type")
    }
}

/// Unitary spatial spectrum of slice `m`, zero-extended with `pad_factor`.
pub fn space_fourier<T: FieldValue>(
    f: &ScalarField<T>,
    m: usize,
    pad_factor: usize,
) -> SpatialSpectrum {
    let g = f.grid();
    let n = g.n_nodes();
    let npad = pad_factor.max(2) * (n - 1);
    let padded = pad_slice(f, m, pad_factor.max(2));
    let values = fft_padded(padded);
    SpatialSpectrum {
        values,
        freq_axis: frequency_axis(npad, g.h()),
        padded_len: npad,
        h: g.h(),
        dim: g.dim(),
    }
}

/// Naive DFT of a padded cube, for use as an independent oracle.
pub fn dft_reference(data: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    let shape = data.shape().to_vec();
    let total: usize = shape.iter().product();
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&shape));
    for (kidx, o) in out.indexed_iter_mut() {
        let kidx = kidx.slice().to_vec();
        let mut acc = Complex64::new(0.0, 0.0);
        for (jidx, v) in data.indexed_iter() {
            let jidx = jidx.slice();
            let mut phase = 0.0;
            for (d, (&kk, &jj)) in kidx.iter().zip(jidx).enumerate() {
                phase += kk as f64 * jj as f64 / shape[d] as f64;
            }
            acc += v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
        }
        *o = acc / (total as f64).sqrt();
    }
    out
}

/// lambda-weighted Sobolev norm over (0,T):
/// || f ||^2 = int_0^T h^n sum_k (lambda^2+|xi_k|^2)^m |f_hat|^2 dt.
pub fn sobolev_lambda_norm<T: FieldValue>(
    f: &ScalarField<T>,
    m_exp: f64,
    lambda: f64,
    pad_factor: usize,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(CdError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let g = f.grid();
    let mut total = 0.0;
    for m in 0..=g.m_steps() {
        let spec = space_fourier(f, m, pad_factor);
        total += g.time_weight(m) * spec.weighted_mass(m_exp, lambda);
    }
    Ok(total.sqrt())
}

/// Continuum-normalized Fourier transform of one slice at an arbitrary
/// frequency: h^n sum_j f_j exp(-i xi . x_j), with trapezoid end weights.
pub fn direct_ft_at<T: FieldValue>(f: &ScalarField<T>, m: usize, xi: &[f64]) -> Complex64 {
    let g = f.grid();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, v) in f.time_slice(m).indexed_iter() {
        let idx = idx.slice();
        let x = g.coords(idx);
        let phase: f64 = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
        acc += to_c64(*v) * Complex64::from_polar(1.0, -phase) * g.space_weight(idx);
    }
    acc
}

pub fn grid_of<T: FieldValue>(f: &ScalarField<T>) -> Arc<SpaceTimeGrid> {
    f.grid().clone()
}
