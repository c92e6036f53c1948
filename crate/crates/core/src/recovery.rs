//! Recovery pipeline for the convection term and the zeroth-order
//! coefficient: discrete curl of a vector field, per-frequency least-squares
//! inversion of the ray data for the curl spectrum, Poincaré integration of a
//! curl-free field into a potential, the Dirichlet-harmonic certificate that
//! forces a divergence-free gradient difference to vanish, and Fourier
//! recovery of q on the frequencies covered by the direction cone.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CdError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::dot;
use crate::grid::SpaceTimeGrid;
use crate::ops;
use crate::spectral;
use crate::tol::Tolerances;
use crate::xray::{hyperplane_frame, DirectionCone, RayData};

/// Orthogonality threshold for attaching a sampled direction to a frequency:
/// equations are only assembled for directions that are orthogonal to xi up
/// to round-off, never for merely "nearly orthogonal" ones.
const DIRECTION_ORTHOGONALITY: f64 = 1e-10;

/// Upper-triangle index pairs (i, j) with i < j, row-major.
pub fn pair_list(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Antisymmetric matrix field h_ij = d_j F_i - d_i F_j, stored as the upper
/// triangle only so the antisymmetry is structural.
#[derive(Debug, Clone)]
pub struct CurlField {
    grid: Arc<SpaceTimeGrid>,
    pairs: Vec<(usize, usize)>,
    comps: Vec<ScalarField<f64>>,
}

impl CurlField {
    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Stored component for the p-th upper-triangle pair.
    pub fn comp(&self, p: usize) -> &ScalarField<f64> {
        &self.comps[p]
    }

    /// Logical entry h_ij at a node; the lower triangle is the negated upper
    /// triangle and the diagonal is identically zero.
    pub fn entry(&self, i: usize, j: usize, m: usize, idx: &[usize]) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => {
                let p = self.pairs.iter().position(|&q| q == (i, j)).unwrap();
                self.comps[p].get(m, idx)
            }
            std::cmp::Ordering::Greater => -self.entry(j, i, m, idx),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// L2(Q) norm over all n^2 entries (each stored pair counts twice).
    pub fn l2_q(&self) -> f64 {
        let s: f64 = self.comps.iter().map(|c| c.l2_q().powi(2)).sum();
        (2.0 * s).sqrt()
    }
}

/// Finite-difference curl matrix of a vector field.
pub fn curl_matrix(f: &VectorField<f64>) -> CurlField {
    let grid = f.grid().clone();
    let pairs = pair_list(grid.dim());
    let comps = pairs
        .iter()
        .map(|&(i, j)| ops::partial(f.component(i), j).sub(&ops::partial(f.component(j), i)))
        .collect();
    CurlField { grid, pairs, comps }
}

/// Coefficient row of Sum_{i,j} omega^i eta_j h_ij over the upper-triangle
/// unknowns, for eta equal to the basis vector e_{eta_axis}.
pub fn equation_row(omega: &[f64], eta_axis: usize, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let mut c = 0.0;
            if j == eta_axis {
                c += omega[i];
            }
            if i == eta_axis {
                c -= omega[j];
            }
            c
        })
        .collect()
}

/// The orthogonal change of frame attached to one frequency: A maps xi/|xi|
/// to e_2, and B is A with its second row removed. The rows of B span the
/// hyperplane orthogonal to xi, so B applied to the unknown column has full
/// rank n-1 -- the injectivity certificate behind the per-frequency solves.
#[derive(Debug, Clone)]
pub struct FrequencySystem {
    pub xi: Vec<f64>,
    pub a_matrix: DMatrix<f64>,
    pub b_matrix: DMatrix<f64>,
    /// Cone direction indices orthogonal to xi (up to round-off).
    pub directions: Vec<usize>,
}

pub fn build_frequency_system(xi: &[f64], cone: &DirectionCone) -> Result<FrequencySystem> {
    let dim = xi.len();
    let norm = dot(xi, xi).sqrt();
    if norm == 0.0 {
        return Err(CdError::InvalidArgument(
            "frequency system requires xi != 0".into(),
        ));
    }
    let hat: Vec<f64> = xi.iter().map(|c| c / norm).collect();
    let a_matrix = match dim {
        2 => {
            // xi_hat = (sin p1, cos p1)
            let p1 = hat[0].atan2(hat[1]);
            DMatrix::from_row_slice(2, 2, &[p1.cos(), -p1.sin(), p1.sin(), p1.cos()])
        }
        3 => {
            // xi_hat = (sin p1 cos th, cos p1, sin p1 sin th)
            let p1 = hat[1].clamp(-1.0, 1.0).acos();
            let th = if p1.sin().abs() < 1e-14 {
                0.0
            } else {
                hat[2].atan2(hat[0])
            };
            #[rustfmt::skip]
            let rows = [
                p1.cos() * th.cos(), -p1.sin(), p1.cos() * th.sin(),
                p1.sin() * th.cos(),  p1.cos(), p1.sin() * th.sin(),
                -th.sin(),            0.0,      th.cos(),
            ];
            DMatrix::from_row_slice(3, 3, &rows)
        }
        d => {
            return Err(CdError::InvalidArgument(format!(
                "frequency systems are implemented for dimensions 2 and 3, got {d}"
            )));
        }
    };
    let tol = DIRECTION_ORTHOGONALITY * norm.max(1.0);
    let directions: Vec<usize> = cone
        .directions
        .iter()
        .enumerate()
        .filter(|(_, w)| dot(w, xi).abs() <= tol)
        .map(|(k, _)| k)
        .collect();
    if directions.is_empty() {
        return Err(CdError::OutsideAperture(format!(
            "frequency ({}) outside aperture: no cone direction is orthogonal to it",
            xi.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(", ")
        )));
    }
    let b_matrix = DMatrix::from_fn(dim - 1, dim, |r, c| {
        let row = if r == 0 { 0 } else { r + 1 };
        a_matrix[(row, c)]
    });
    Ok(FrequencySystem { xi: xi.to_vec(), a_matrix, b_matrix, directions })
}

/// Recovered curl spectrum at one frequency: the upper-triangle values per
/// time slice, plus the rank of the assembled system. Cells whose system does
/// not determine every unknown are kept (minimum-norm solution) but flagged.
#[derive(Debug, Clone)]
pub struct SpectrumCell {
    pub xi: Vec<f64>,
    pub directions: Vec<usize>,
    pub rank: usize,
    pub resolved: bool,
    /// values[m][p] for the p-th upper-triangle pair
    pub values: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct CurlSpectrum {
    pub pairs: Vec<(usize, usize)>,
    pub cells: Vec<SpectrumCell>,
}

impl CurlSpectrum {
    /// Plain l2 norm over every stored value.
    pub fn l2(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|c| c.values.iter().flatten())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Logical entry h_hat_ij for a cell, with structural antisymmetry.
    pub fn entry(&self, cell: usize, m: usize, i: usize, j: usize) -> Complex64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Complex64::new(0.0, 0.0),
            std::cmp::Ordering::Less => {
                let p = self.pairs.iter().position(|&q| q == (i, j)).unwrap();
                self.cells[cell].values[m][p]
            }
            std::cmp::Ordering::Greater => -self.entry(cell, m, j, i),
        }
    }
}

/// Fourier transform of the ray data over the sampling plane of direction
/// `w`, with the absolute phase exp(-i xi . x); by the slice theorem this
/// approximates the n-dimensional transform of the line-integrated field at
/// xi in the plane of that direction.
fn plane_fourier(data: &RayData, m: usize, w: usize, xi: &[f64]) -> Complex64 {
    let dim = data.grid().dim();
    let delta = 2.0 * data.half_width / (data.plane_nodes - 1) as f64;
    let weight = delta.powi(dim as i32 - 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for flat in 0..data.flats() {
        let v = data.get(m, w, flat);
        if v == 0.0 {
            continue;
        }
        let x = data.base_point(w, flat);
        let phase = -dot(xi, &x);
        acc += Complex64::from_polar(v * weight, phase);
    }
    acc
}

/// Invert the ray data for the curl spectrum.
///
/// Candidate frequencies are multiples of the frame vectors of every sampled
/// direction (the frequencies actually reachable from the data: xi must be
/// orthogonal to a direction for the slice relation to apply), with
/// `freq_per_axis` harmonics of the plane's fundamental frequency on each
/// side of zero. For each frequency all orthogonal directions contribute one
/// equation per basis vector eta, and the upper-triangle unknowns are solved
/// by minimum-norm least squares with an SVD rank cut.
pub fn recover_curl_spectrum(
    data: &RayData,
    freq_per_axis: usize,
    tol: &Tolerances,
) -> Result<CurlSpectrum> {
    let g = data.grid();
    let dim = g.dim();
    let pairs = pair_list(dim);
    let fundamental = std::f64::consts::PI / data.half_width;

    // candidate frequencies, deduplicated by rounded coordinates
    let mut xis: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for omega in &data.cone.directions {
        let frame = hyperplane_frame(omega);
        for u in &frame {
            for k in -(freq_per_axis as i64)..=freq_per_axis as i64 {
                if k == 0 {
                    continue;
                }
                let c = fundamental * k as f64;
                let xi: Vec<f64> = u.iter().map(|uc| c * uc).collect();
                let key: Vec<i64> = xi.iter().map(|v| (v * 1e9).round() as i64).collect();
                if seen.insert(key) {
                    xis.push(xi);
                }
            }
        }
    }

    let mut cells = Vec::new();
    for xi in xis {
        let scale = dot(&xi, &xi).sqrt().max(1.0);
        let directions: Vec<usize> = data
            .cone
            .directions
            .iter()
            .enumerate()
            .filter(|(_, w)| dot(w, &xi).abs() <= DIRECTION_ORTHOGONALITY * scale)
            .map(|(k, _)| k)
            .collect();
        if directions.is_empty() {
            continue;
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for &w in &directions {
            for eta in 0..dim {
                rows.push(equation_row(&data.cone.directions[w], eta, &pairs));
            }
        }
        let matrix = DMatrix::from_fn(rows.len(), pairs.len(), |r, c| rows[r][c]);
        let svd = matrix.clone().svd(true, true);
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cut = tol.least_squares_rank * sigma_max.max(1.0);
        let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();

        let mut values = Vec::with_capacity(g.m_steps() + 1);
        for m in 0..=g.m_steps() {
            let mut re = DVector::zeros(rows.len());
            let mut im = DVector::zeros(rows.len());
            let mut r = 0;
            for &w in &directions {
                let ft = plane_fourier(data, m, w, &xi);
                for eta in 0..dim {
                    // i (eta . xi) * plane transform
                    let rhs = Complex64::new(0.0, xi[eta]) * ft;
                    re[r] = rhs.re;
                    im[r] = rhs.im;
                    r += 1;
                }
            }
            let sol_re = svd.solve(&re, cut).map_err(|e| CdError::Solver(e.into()))?;
            let sol_im = svd.solve(&im, cut).map_err(|e| CdError::Solver(e.into()))?;
            values.push(
                (0..pairs.len())
                    .map(|p| Complex64::new(sol_re[p], sol_im[p]))
                    .collect(),
            );
        }
        cells.push(SpectrumCell {
            xi,
            directions,
            rank,
            resolved: rank == pairs.len(),
            values,
        });
    }
    Ok(CurlSpectrum { pairs, cells })
}

/// Potential from Poincaré integration of a curl-free field.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub phi: ScalarField<f64>,
    /// max |phi| over the spatial boundary, all slices
    pub boundary_max: f64,
    /// max disagreement between the two canonical integration path orders
    pub path_residual: f64,
    /// measured curl norm of the source field
    pub curl_residual: f64,
}

/// Cumulative trapezoid of `vals` along one axis, anchored at index 0.
fn cumtrapz_axis(vals: &ArrayD<f64>, axis: usize, h: f64) -> ArrayD<f64> {
    let mut out = ArrayD::<f64>::zeros(vals.raw_dim());
    for (idx, &v) in vals.indexed_iter() {
        let idx = idx.slice().to_vec();
        if idx[axis] == 0 {
            continue;
        }
        let mut prev = idx.clone();
        prev[axis] -= 1;
        out[IxDyn(&idx)] =
            out[IxDyn(&prev)] + 0.5 * h * (vals[IxDyn(&prev)] + v);
    }
    out
}

/// Line-integrate F from the origin node along the given axis order:
/// phi(x) = sum_k int_0^{x_{a_k}} F_{a_k} with the axes later in the order
/// frozen at zero. Returns one spatial slice.
fn integrate_slice(f: &VectorField<f64>, m: usize, order: &[usize]) -> ArrayD<f64> {
    let g = f.grid();
    let h = g.h();
    let cums: Vec<ArrayD<f64>> = (0..g.dim())
        .map(|a| cumtrapz_axis(&f.component(a).time_slice(m).to_owned(), a, h))
        .collect();
    let shape: Vec<usize> = vec![g.n_nodes(); g.dim()];
    let mut phi = ArrayD::<f64>::zeros(IxDyn(&shape));
    for (idx, v) in phi.indexed_iter_mut() {
        let idx = idx.slice().to_vec();
        let mut acc = 0.0;
        for (k, &a) in order.iter().enumerate() {
            let mut jdx = idx.clone();
            for &b in &order[k + 1..] {
                jdx[b] = 0;
            }
            acc += cums[a][IxDyn(&jdx)];
        }
        *v = acc;
    }
    phi
}

pub fn poincare_potential(f: &VectorField<f64>, tol: &Tolerances) -> Result<PotentialField> {
    let g = f.grid().clone();
    let curl = curl_matrix(f);
    let curl_residual = curl.max_abs();
    let scale = f.sup_norm();
    if scale > 0.0 && curl_residual > tol.curl_free_relative * scale {
        return Err(CdError::Precondition(format!(
            "field is not curl-free: curl sup {curl_residual:.3e} exceeds {:.1e} of the field sup {scale:.3e}",
            tol.curl_free_relative
        )));
    }
    let forward: Vec<usize> = (0..g.dim()).collect();
    let backward: Vec<usize> = (0..g.dim()).rev().collect();
    let mut phi = ScalarField::zeros(&g);
    let mut path_residual: f64 = 0.0;
    let mut boundary_max: f64 = 0.0;
    for m in 0..=g.m_steps() {
        let fwd = integrate_slice(f, m, &forward);
        let bwd = integrate_slice(f, m, &backward);
        for (idx, &v) in fwd.indexed_iter() {
            let idx = idx.slice().to_vec();
            path_residual = path_residual.max((v - bwd[IxDyn(&idx)]).abs());
            if g.is_boundary(&idx) {
                boundary_max = boundary_max.max(v.abs());
            }
        }
        phi.time_slice_mut(m).assign(&fwd);
    }
    Ok(PotentialField { phi, boundary_max, path_residual, curl_residual })
}

/// Conjugate gradient for the (negated, SPD) interior Dirichlet Laplacian.
fn dirichlet_poisson_slice(g: &SpaceTimeGrid, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let ni = g.n_nodes() - 2;
    let dim = g.dim();
    let count = ni.pow(dim as u32);
    let h2 = g.h() * g.h();
    let multi = |flat: usize| -> Vec<usize> {
        let mut idx = vec![0usize; dim];
        let mut rem = flat;
        for a in 0..dim {
            let stride = ni.pow((dim - 1 - a) as u32);
            idx[a] = rem / stride;
            rem %= stride;
        }
        idx
    };
    // -Laplace with zero boundary, interior flat ordering
    let apply = |v: &[f64], out: &mut [f64]| {
        for (flat, o) in out.iter_mut().enumerate() {
            let idx = multi(flat);
            let mut acc = 2.0 * dim as f64 * v[flat];
            for a in 0..dim {
                let stride = ni.pow((dim - 1 - a) as u32);
                if idx[a] > 0 {
                    acc -= v[flat - stride];
                }
                if idx[a] + 1 < ni {
                    acc -= v[flat + stride];
                }
            }
            *o = acc / h2;
        }
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dotv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; count];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; count];
    let mut rs = dotv(&r, &r);
    for _ in 0..10 * count + 200 {
        if rs.sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rs / dotv(&p, &ap);
        for i in 0..count {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dotv(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..count {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rs.sqrt() <= rel_tol * bnorm {
        Ok(x)
    } else {
        Err(CdError::Solver(format!(
            "CG stalled on the Dirichlet Poisson solve: relative residual {:.3e}",
            rs.sqrt() / bnorm
        )))
    }
}

/// Solve Laplace(phi) = div(a_diff) with phi = 0 on the spatial boundary,
/// slice by slice. When a_diff is a gradient with divergence-free data this
/// phi is the potential forced to vanish by the Dirichlet problem.
pub fn dirichlet_harmonic_defect(a_diff: &VectorField<f64>, tol: &Tolerances) -> Result<ScalarField<f64>> {
    let g = a_diff.grid().clone();
    let div = ops::divergence(a_diff);
    let ni = g.n_nodes() - 2;
    let dim = g.dim();
    let count = ni.pow(dim as u32);
    let mut phi = ScalarField::zeros(&g);
    for m in 0..=g.m_steps() {
        // rhs of -Laplace(phi) = -div
        let mut rhs = vec![0.0; count];
        for (flat, r) in rhs.iter_mut().enumerate() {
            let mut idx = vec![0usize; dim];
            let mut rem = flat;
            for a in 0..dim {
                let stride = ni.pow((dim - 1 - a) as u32);
                idx[a] = rem / stride + 1;
                rem %= stride;
            }
            *r = -div.get(m, &idx);
        }
        let sol = dirichlet_poisson_slice(&g, &rhs, tol.linear_solver)?;
        for (flat, v) in sol.iter().enumerate() {
            let mut idx = vec![0usize; dim];
            let mut rem = flat;
            for a in 0..dim {
                let stride = ni.pow((dim - 1 - a) as u32);
                idx[a] = rem / stride + 1;
                rem %= stride;
            }
            phi.set(m, &idx, *v);
        }
    }
    Ok(phi)
}

/// Certify that a gradient candidate with divergence-free data is zero: the
/// potential solves the homogeneous Dirichlet problem, so it must vanish up
/// to discretization. Returns the certified difference (the gradient of the
/// solved potential) or reports the violation.
pub fn corollary_full_recovery(
    a_diff: &VectorField<f64>,
    tol: &Tolerances,
) -> Result<VectorField<f64>> {
    let g = a_diff.grid();
    let phi = dirichlet_harmonic_defect(a_diff, tol)?;
    let defect = phi.max_abs();
    let scale = a_diff.sup_norm().max(1e-12);
    let threshold = tol.harmonic_certificate_scale * g.h() * g.h() * scale;
    if defect > threshold {
        return Err(CdError::Precondition(format!(
            "divergence-free hypothesis violated: harmonic defect sup {defect:.3e} exceeds the h^2 certificate {threshold:.3e}"
        )));
    }
    Ok(ops::gradient(&phi))
}

/// Which unpadded spatial frequency bins lie in the aperture swept by the
/// cone: xi is covered when some unit vector within chord distance eps of
/// omega0 is orthogonal to it, i.e. |omega0 . xi_hat| <= eps sqrt(1-eps^2/4).
#[derive(Debug, Clone, Serialize)]
pub struct CoverageMap {
    pub shape: Vec<usize>,
    pub covered: Vec<bool>,
    pub aperture_fraction: f64,
    pub uncovered_bins: usize,
}

fn signed_bin(k: usize, len: usize) -> i64 {
    if k <= len / 2 {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

pub fn coverage_map(grid: &SpaceTimeGrid, cone: &DirectionCone, tol: &Tolerances) -> CoverageMap {
    let len = grid.n_nodes() - 1;
    let dim = grid.dim();
    let eps = cone.eps;
    let band = (eps * (1.0 - eps * eps / 4.0).sqrt()).max(tol.aperture_orthogonality);
    let total = len.pow(dim as u32);
    let mut covered = Vec::with_capacity(total);
    let mut hits = 0usize;
    for flat in 0..total {
        let mut xi = vec![0.0; dim];
        let mut rem = flat;
        for a in 0..dim {
            let stride = len.pow((dim - 1 - a) as u32);
            xi[a] = signed_bin(rem / stride, len) as f64;
            rem %= stride;
        }
        let norm = dot(&xi, &xi).sqrt();
        let ok = norm == 0.0 || dot(&cone.omega0, &xi).abs() <= band * norm;
        hits += ok as usize;
        covered.push(ok);
    }
    CoverageMap {
        shape: vec![len; dim],
        covered,
        aperture_fraction: hits as f64 / total as f64,
        uncovered_bins: total - hits,
    }
}

/// Unpadded space-time DFT samples of q on the covered bins; everything
/// outside the aperture is masked to zero. The tensor drops the duplicated
/// t = T slice and the far spatial faces (periodic identification).
pub fn q_fourier_samples(
    q: &ScalarField<f64>,
    cone: &DirectionCone,
    tol: &Tolerances,
) -> (ArrayD<Complex64>, CoverageMap) {
    let g = q.grid();
    let len = g.n_nodes() - 1;
    let dim = g.dim();
    let mut shape = vec![g.m_steps()];
    shape.extend(std::iter::repeat(len).take(dim));
    let mut tensor = ArrayD::<Complex64>::zeros(IxDyn(&shape));
    for (idx, v) in tensor.indexed_iter_mut() {
        let idx = idx.slice().to_vec();
        *v = Complex64::new(q.get(idx[0], &idx[1..]), 0.0);
    }
    let mut spectrum = spectral::fft_padded(tensor);
    let coverage = coverage_map(g, cone, tol);
    let strides: Vec<usize> = (0..dim).map(|a| len.pow((dim - 1 - a) as u32)).collect();
    for (idx, v) in spectrum.indexed_iter_mut() {
        let idx = idx.slice().to_vec();
        let flat: usize = idx[1..].iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        if !coverage.covered[flat] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    (spectrum, coverage)
}

#[derive(Debug, Clone)]
pub struct QRecovery {
    pub q: ScalarField<f64>,
    pub coverage: CoverageMap,
}

/// Inverse DFT of the aperture-masked samples. Out-of-aperture content is
/// unrecoverable here (the analytic-continuation step is out of scope); the
/// coverage map documents the gap.
pub fn recover_q(
    samples: &ArrayD<Complex64>,
    coverage: &CoverageMap,
    grid: &Arc<SpaceTimeGrid>,
) -> Result<QRecovery> {
    let len = grid.n_nodes() - 1;
    let dim = grid.dim();
    let mut shape = vec![grid.m_steps()];
    shape.extend(std::iter::repeat(len).take(dim));
    if samples.shape() != shape.as_slice() {
        return Err(CdError::InvalidArgument(format!(
            "sample tensor shape {:?} does not match the grid tensor {:?}",
            samples.shape(),
            shape
        )));
    }
    let back = spectral::ifft_padded(samples.clone());
    let mut q = ScalarField::zeros(grid);
    for (idx, v) in back.indexed_iter() {
        let idx = idx.slice().to_vec();
        q.set(idx[0], &idx[1..], v.re);
    }
    // periodic wrap for the duplicated t = T slice
    let first = q.time_slice(0).to_owned();
    q.time_slice_mut(grid.m_steps()).assign(&first);
    Ok(QRecovery { q, coverage: coverage.clone() })
}

/// Summary of one full recovery run, serialized by the experiment driver.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub aperture_fraction: f64,
    pub curl_residual: f64,
    pub potential_residual: f64,
    pub q_error: f64,
    pub rank_flags: Vec<RankFlag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankFlag {
    pub xi: Vec<f64>,
    pub rank: usize,
    pub resolved: bool,
}

impl RecoveryReport {
    pub fn rank_flags_of(spectrum: &CurlSpectrum) -> Vec<RankFlag> {
        spectrum
            .cells
            .iter()
            .map(|c| RankFlag { xi: c.xi.clone(), rank: c.rank, resolved: c.resolved })
            .collect()
    }
}
