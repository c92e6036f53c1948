//! Initial-boundary-value solver for parabolic equations of the form
//! du/dt = Laplace(u) + b . grad(u) + c u + s on the unit box with Dirichlet
//! data, plus boundary traces and the two-coefficient output map
//! (normal derivative corrected by the convection term).

use crate::error::{CdError, Result};
use crate::field::{FieldValue, ScalarField, VectorField};
use crate::grid::{BoundaryRegion, BoxFace, SpaceTimeGrid};
use crate::ops::divergence;
use ndarray::{Array3, ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use std::sync::Arc;

/// Convection coefficient A and density coefficient q, validated together.
///
/// The effective zeroth-order coefficients of the expanded equation are
/// q_tilde = q - div A - |A|^2 (forward) and
/// q_tilde_star = q + div A - |A|^2 (adjoint).
#[derive(Debug, Clone)]
pub struct CoefficientPair {
    a: VectorField<f64>,
    q: ScalarField<f64>,
    div_a: ScalarField<f64>,
    abs2_a: ScalarField<f64>,
}

impl CoefficientPair {
    pub fn new(a: VectorField<f64>, q: ScalarField<f64>) -> Result<Self> {
        if a.grid() != q.grid() {
            return Err(CdError::InvalidArgument("A and q live on different grids".into()));
        }
        if !a.time_independent() {
            return Err(CdError::Precondition("convection coefficient must be time-independent".into()));
        }
        if !a.is_admissible() {
            return Err(CdError::Precondition(format!(
                "convection coefficient exceeds the admissible bound 1/(9R) = {:.6e} (sup norm {:.6e})",
                a.admissible_bound(),
                a.sup_norm()
            )));
        }
        let div_a = divergence(&a);
        let mut abs2_a = ScalarField::zeros(a.grid());
        for c in a.components() {
            abs2_a = abs2_a.add(&c.zip_with(c, |x, y| x * y));
        }
        Ok(CoefficientPair { a, q, div_a, abs2_a })
    }

    pub fn a(&self) -> &VectorField<f64> {
        &self.a
    }
    pub fn q(&self) -> &ScalarField<f64> {
        &self.q
    }
    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        self.a.grid()
    }

    pub fn q_tilde(&self) -> ScalarField<f64> {
        self.q.sub(&self.div_a).sub(&self.abs2_a)
    }

    pub fn q_tilde_star(&self) -> ScalarField<f64> {
        self.q.add(&self.div_a).sub(&self.abs2_a)
    }

    /// q_tilde + q_tilde_star - 2(q - |A|^2) vanishes identically; the residual
    /// measures only floating-point cancellation.
    pub fn tilde_consistency(&self) -> f64 {
        let lhs = self.q_tilde().add(&self.q_tilde_star());
        let rhs = self.q.sub(&self.abs2_a).scale(2.0);
        lhs.sub(&rhs).max_abs()
    }

    /// Drift of the expanded forward equation.
    pub fn drift(&self) -> VectorField<f64> {
        self.a.scale(2.0)
    }

    /// Zeroth-order coefficient of the expanded forward equation, -q_tilde.
    pub fn zeroth(&self) -> ScalarField<f64> {
        self.q_tilde().scale(-1.0)
    }
}

/// Values on the lateral boundary Sigma = (0,T) x boundary, stored per face.
///
/// Shape [M+1, 2n, N^(n-1)]; the face-local index runs row-major over the
/// remaining axes in increasing order, covering the full closed face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace<T: FieldValue = f64> {
    grid: Arc<SpaceTimeGrid>,
    values: Array3<T>,
}

/// Nodes per face, including face edges.
pub fn face_len(grid: &SpaceTimeGrid) -> usize {
    grid.n_nodes().pow(grid.dim() as u32 - 1)
}

/// Full spatial multi-index of a face-local flat index.
pub fn face_node(grid: &SpaceTimeGrid, face: BoxFace, flat: usize) -> Vec<usize> {
    let n = grid.n_nodes();
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    idx[face.axis] = if face.upper { n - 1 } else { 0 };
    let mut rem = flat;
    let others: Vec<usize> = (0..dim).filter(|&a| a != face.axis).collect();
    for (pos, &a) in others.iter().enumerate() {
        let stride = n.pow((others.len() - 1 - pos) as u32);
        idx[a] = rem / stride;
        rem %= stride;
    }
    idx
}

/// Face-local flat index of a boundary node lying on `face`.
pub fn face_flat(grid: &SpaceTimeGrid, face: BoxFace, idx: &[usize]) -> usize {
    let n = grid.n_nodes();
    let mut flat = 0;
    for a in 0..grid.dim() {
        if a != face.axis {
            flat = flat * n + idx[a];
        }
    }
    flat
}

impl<T: FieldValue> BoundaryTrace<T> {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        let shape = (grid.m_steps() + 1, 2 * grid.dim(), face_len(grid));
        BoundaryTrace { grid: grid.clone(), values: Array3::zeros(shape) }
    }

    /// Dirichlet trace of a space-time field.
    pub fn from_field(field: &ScalarField<T>) -> Self {
        let grid = field.grid().clone();
        let mut out = Self::zeros(&grid);
        for m in 0..=grid.m_steps() {
            for face in BoxFace::all(grid.dim()) {
                for flat in 0..face_len(&grid) {
                    let idx = face_node(&grid, face, flat);
                    out.values[(m, face.index(), flat)] = field.get(m, &idx);
                }
            }
        }
        out
    }

    /// Sample f(t, x) on every face node.
    pub fn from_fn(grid: &Arc<SpaceTimeGrid>, f: impl Fn(f64, &[f64]) -> T) -> Self {
        let mut out = Self::zeros(grid);
        for m in 0..=grid.m_steps() {
            let t = grid.t(m);
            for face in BoxFace::all(grid.dim()) {
                for flat in 0..face_len(grid) {
                    let idx = face_node(grid, face, flat);
                    let x = grid.coords(&idx);
                    out.values[(m, face.index(), flat)] = f(t, &x);
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn get(&self, m: usize, face: BoxFace, flat: usize) -> T {
        self.values[(m, face.index(), flat)]
    }

    pub fn set(&mut self, m: usize, face: BoxFace, flat: usize, v: T) {
        self.values[(m, face.index(), flat)] = v;
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> BoundaryTrace<U> {
        BoundaryTrace { grid: self.grid.clone(), values: self.values.mapv(|v| f(v)) }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.values.dim(), other.values.dim());
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values).and(&other.values).for_each(|a, &b| *a = f(*a, b));
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }
    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| v * s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs2().sqrt()).fold(0.0, f64::max)
    }

    /// Zero everywhere outside the faces of `region`.
    pub fn restricted(&self, region: &BoundaryRegion) -> Self {
        let mut out = self.clone();
        for face in BoxFace::all(self.grid.dim()) {
            if !region.contains(face) {
                out.values
                    .index_axis_mut(ndarray::Axis(1), face.index())
                    .mapv_inplace(|_| T::zero());
            }
        }
        out
    }

    /// Quadrature weight of a face node: h^(n-1), halved at face edges.
    pub fn face_weight(&self, face: BoxFace, flat: usize) -> f64 {
        let g = &self.grid;
        let n = g.n_nodes();
        let idx = face_node(g, face, flat);
        let mut w = g.h().powi(g.dim() as i32 - 1);
        for (a, &i) in idx.iter().enumerate() {
            if a != face.axis && (i == 0 || i == n - 1) {
                w *= 0.5;
            }
        }
        w
    }

    /// Trapezoid L^2 norm over (0,T) x (faces of `region`).
    pub fn l2_region(&self, region: &BoundaryRegion) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for m in 0..=g.m_steps() {
            let wt = g.time_weight(m);
            for face in &region.faces {
                for flat in 0..face_len(g) {
                    total += wt
                        * self.face_weight(*face, flat)
                        * self.values[(m, face.index(), flat)].abs2();
                }
            }
        }
        total.sqrt()
    }

    /// Trapezoid L^2 norm over the whole lateral boundary.
    pub fn l2_sigma(&self) -> f64 {
        let g = &self.grid;
        let full = BoundaryRegion {
            direction: {
                let mut d = vec![0.0; g.dim()];
                d[0] = 1.0;
                d
            },
            kind: crate::grid::RegionKind::Full,
            eps: 0.0,
            faces: BoxFace::all(g.dim()),
        };
        self.l2_region(&full)
    }
}

impl BoundaryTrace<Complex64> {
    pub fn real(&self) -> BoundaryTrace<f64> {
        self.map(|v| v.re)
    }
    pub fn imag(&self) -> BoundaryTrace<f64> {
        self.map(|v| v.im)
    }
    pub fn from_parts(re: &BoundaryTrace<f64>, im: &BoundaryTrace<f64>) -> Self {
        let mut out = re.map(|v| Complex64::new(v, 0.0));
        ndarray::Zip::from(&mut out.values).and(&im.values).for_each(|a, &b| a.im = b);
        out
    }
}

/// Flat interior indexing: interior nodes have every coordinate in 1..N-1,
/// flattened row-major over [N-2]^n.
fn interior_count(grid: &SpaceTimeGrid) -> usize {
    (grid.n_nodes() - 2).pow(grid.dim() as u32)
}

fn interior_multi(grid: &SpaceTimeGrid, flat: usize) -> Vec<usize> {
    let ni = grid.n_nodes() - 2;
    let dim = grid.dim();
    let mut idx = vec![0usize; dim];
    let mut rem = flat;
    for a in 0..dim {
        let stride = ni.pow((dim - 1 - a) as u32);
        idx[a] = rem / stride + 1;
        rem %= stride;
    }
    idx
}

fn interior_flat(grid: &SpaceTimeGrid, idx: &[usize]) -> usize {
    let ni = grid.n_nodes() - 2;
    let mut flat = 0;
    for &i in idx {
        flat = flat * ni + (i - 1);
    }
    flat
}

/// Spatial operator L u = Laplace(u) + b . grad(u) + c u applied to one time
/// slice, centered second-order stencils, interior nodes only. Boundary
/// neighbor values are read through `bdry`; pass a zero closure for the
/// homogeneous part used inside the Krylov iteration.
struct SliceOperator<'a> {
    grid: &'a SpaceTimeGrid,
    b: Vec<ndarray::ArrayViewD<'a, f64>>,
    c: ndarray::ArrayViewD<'a, f64>,
}

impl<'a> SliceOperator<'a> {
    fn apply(&self, v: &[f64], bdry: &dyn Fn(BoxFace, usize) -> f64, out: &mut [f64]) {
        let g = self.grid;
        let n = g.n_nodes();
        let h = g.h();
        let dim = g.dim();
        for (flat, o) in out.iter_mut().enumerate() {
            let idx = interior_multi(g, flat);
            let center = v[flat];
            let mut acc = 0.0;
            for a in 0..dim {
                let neighbor = |i: usize| -> f64 {
                    if i == 0 || i == n - 1 {
                        let face = BoxFace { axis: a, upper: i == n - 1 };
                        let mut j = idx.clone();
                        j[a] = i;
                        bdry(face, face_flat(g, face, &j))
                    } else {
                        let mut j = idx.clone();
                        j[a] = i;
                        v[interior_flat(g, &j)]
                    }
                };
                let lo = neighbor(idx[a] - 1);
                let hi = neighbor(idx[a] + 1);
                acc += (lo - 2.0 * center + hi) / (h * h);
                acc += self.b[a][IxDyn(&idx)] * (hi - lo) / (2.0 * h);
            }
            acc += self.c[IxDyn(&idx)] * center;
            *o = acc;
        }
    }
}

fn bicgstab(
    apply: &dyn Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    rel_tol: f64,
) -> Result<()> {
    let n = rhs.len();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dotv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let max_iter = 20 * n + 200;
    for _ in 0..max_iter {
        if norm(&r) <= rel_tol * bnorm {
            return Ok(());
        }
        let rho_new = dotv(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        alpha = rho / dotv(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= rel_tol * bnorm {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(());
        }
        apply(&s, &mut t);
        omega = dotv(&t, &s) / dotv(&t, &t);
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    if norm(&r) <= rel_tol * bnorm {
        Ok(())
    } else {
        Err(CdError::Solver(format!(
            "BiCGStab stalled: relative residual {:.3e} above {rel_tol:.1e}",
            norm(&r) / bnorm
        )))
    }
}

/// Crank-Nicolson time stepping for du/dt = Laplace(u) + b . grad(u) + c u + s
/// with Dirichlet data `boundary` and initial slice `initial`. The linear
/// system of each step is solved matrix-free to a relative residual of
/// `linear_tol`.
pub fn solve_parabolic(
    drift: &VectorField<f64>,
    zeroth: &ScalarField<f64>,
    source: &ScalarField<f64>,
    boundary: &BoundaryTrace<f64>,
    initial: &ArrayD<f64>,
    linear_tol: f64,
) -> Result<ScalarField<f64>> {
    let grid = drift.grid().clone();
    if zeroth.grid() != &grid || source.grid() != &grid || boundary.grid() != &grid {
        return Err(CdError::InvalidArgument("solver inputs live on different grids".into()));
    }
    if initial.shape() != grid.spatial_shape().as_slice() {
        return Err(CdError::InvalidArgument("initial slice has the wrong shape".into()));
    }
    let msteps = grid.m_steps();
    let k = grid.k();
    let nint = interior_count(&grid);
    let mut u = ScalarField::zeros(&grid);

    // install the boundary values on every slice and the initial slice
    for m in 0..=msteps {
        let mut sl = u.time_slice_mut(m);
        for face in BoxFace::all(grid.dim()) {
            for flat in 0..face_len(&grid) {
                let idx = face_node(&grid, face, flat);
                sl[IxDyn(&idx)] = boundary.get(m, face, flat);
            }
        }
    }
    {
        let mut sl = u.time_slice_mut(0);
        for (idx, v) in initial.indexed_iter() {
            if !grid.is_boundary(idx.slice()) {
                sl[IxDyn(idx.slice())] = *v;
            }
        }
    }

    let mut cur: Vec<f64> = (0..nint)
        .map(|f| {
            let idx = interior_multi(&grid, f);
            u.time_slice(0)[IxDyn(&idx)]
        })
        .collect();

    let zero_bdry = |_: BoxFace, _: usize| 0.0f64;

    for m in 0..msteps {
        let op_m = SliceOperator {
            grid: &grid,
            b: (0..grid.dim()).map(|a| drift.component(a).time_slice(m)).collect(),
            c: zeroth.time_slice(m),
        };
        let op_next = SliceOperator {
            grid: &grid,
            b: (0..grid.dim()).map(|a| drift.component(a).time_slice(m + 1)).collect(),
            c: zeroth.time_slice(m + 1),
        };
        // rhs = u^m + (k/2)(L_m u^m + s^m + s^{m+1}) + (k/2) * boundary lift at m+1
        let mut lm = vec![0.0; nint];
        op_m.apply(&cur, &(|f, i| boundary.get(m, f, i)), &mut lm);
        let zero_int = vec![0.0; nint];
        let mut lift = vec![0.0; nint];
        op_next.apply(&zero_int, &(|f, i| boundary.get(m + 1, f, i)), &mut lift);
        let mut rhs = vec![0.0; nint];
        for f in 0..nint {
            let idx = interior_multi(&grid, f);
            let s0 = source.get(m, &idx);
            let s1 = source.get(m + 1, &idx);
            rhs[f] = cur[f] + 0.5 * k * (lm[f] + lift[f] + s0 + s1);
        }
        // matrix: v -> v - (k/2) L_{m+1} v with zero boundary
        let apply = |v: &[f64], out: &mut [f64]| {
            op_next.apply(v, &zero_bdry, out);
            for i in 0..v.len() {
                out[i] = v[i] - 0.5 * k * out[i];
            }
        };
        let mut next = cur.clone();
        bicgstab(&apply, &rhs, &mut next, linear_tol)?;
        let mut sl = u.time_slice_mut(m + 1);
        for (f, &val) in next.iter().enumerate() {
            let idx = interior_multi(&grid, f);
            sl[IxDyn(&idx)] = val;
        }
        cur = next;
    }
    // validate finiteness through the public constructor
    let values = u.values().clone();
    ScalarField::from_values(&grid, values)
}

/// Complex version of `solve_parabolic`: the operator is real, so the real
/// and imaginary parts decouple.
pub fn solve_parabolic_complex(
    drift: &VectorField<f64>,
    zeroth: &ScalarField<f64>,
    source: &ScalarField<Complex64>,
    boundary: &BoundaryTrace<Complex64>,
    initial: &ArrayD<Complex64>,
    linear_tol: f64,
) -> Result<ScalarField<Complex64>> {
    let re = solve_parabolic(
        drift,
        zeroth,
        &source.real(),
        &boundary.real(),
        &initial.mapv(|v| v.re),
        linear_tol,
    )?;
    let im = solve_parabolic(
        drift,
        zeroth,
        &source.imag(),
        &boundary.imag(),
        &initial.mapv(|v| v.im),
        linear_tol,
    )?;
    Ok(ScalarField::from_parts(&re, &im))
}

/// Forward problem for a coefficient pair: du/dt = Laplace(u) + 2A.grad(u)
/// - q_tilde u + s, zero initial state.
pub fn solve_ibvp(
    coeffs: &CoefficientPair,
    boundary: &BoundaryTrace<f64>,
    source: &ScalarField<f64>,
    linear_tol: f64,
) -> Result<ScalarField<f64>> {
    let grid = coeffs.grid();
    let initial = ArrayD::zeros(IxDyn(&grid.spatial_shape()));
    solve_parabolic(&coeffs.drift(), &coeffs.zeroth(), source, boundary, &initial, linear_tol)
}

/// Reverse the time axis of a field, t -> T - t.
pub fn time_reverse<T: FieldValue>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid().clone();
    let mut out = ScalarField::zeros(&g);
    for m in 0..=g.m_steps() {
        out.time_slice_mut(m).assign(&f.time_slice(g.m_steps() - m));
    }
    out
}

/// Boundary output of the two-coefficient map: normal derivative plus
/// 2 (nu . A) u on every face node. The normal derivative uses one-sided
/// second-order differences.
pub fn dn_output<T: FieldValue>(a: &VectorField<f64>, u: &ScalarField<T>) -> BoundaryTrace<T> {
    let grid = u.grid().clone();
    let n = grid.n_nodes();
    let h = grid.h();
    let mut out = BoundaryTrace::zeros(&grid);
    for m in 0..=grid.m_steps() {
        for face in BoxFace::all(grid.dim()) {
            let nu = face.normal(grid.dim());
            for flat in 0..face_len(&grid) {
                let idx = face_node(&grid, face, flat);
                let at = |i: usize| {
                    let mut j = idx.clone();
                    j[face.axis] = i;
                    u.get(m, &j)
                };
                // one-sided second-order difference toward the interior,
                // signed by the outward normal
                let dn = if face.upper {
                    (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * (0.5 / h)
                } else {
                    (at(0) * 3.0 - at(1) * 4.0 + at(2)) * (0.5 / h)
                };
                let nu_a: f64 = (0..grid.dim())
                    .map(|j| nu[j] * a.component(j).get(m, &idx))
                    .sum();
                let val = dn + at(idx[face.axis]) * (2.0 * nu_a);
                out.set(m, face, flat, val);
            }
        }
    }
    out
}

/// Difference of two boundary outputs restricted to the measurement region G.
pub fn dn_difference_on_g<T: FieldValue>(
    n1: &BoundaryTrace<T>,
    n2: &BoundaryTrace<T>,
    region: &BoundaryRegion,
) -> BoundaryTrace<T> {
    n1.sub(n2).restricted(region)
}

/// d/dx_axis restricted to a face, used by weighted boundary integrals.
pub fn normal_derivative_trace<T: FieldValue>(u: &ScalarField<T>) -> BoundaryTrace<T> {
    let grid = u.grid().clone();
    let zero = VectorField::zeros(&grid);
    dn_output(&zero, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RegionKind;

    fn grid(n: usize, m: usize) -> Arc<SpaceTimeGrid> {
        SpaceTimeGrid::new(2, n, m, 0.5).unwrap()
    }

    #[test]
    fn coefficient_pair_validation() {
        let g = grid(9, 8);
        let bound = 1.0 / (9.0 * g.enclosing_radius());
        let a_ok = VectorField::from_fns(&g, |_, x, j| {
            if j == 0 {
                bound * 0.5 * (std::f64::consts::PI * x[1]).sin()
            } else {
                0.0
            }
        });
        let q = ScalarField::from_spatial_fn(&g, |x| x[0] * x[1]);
        let pair = CoefficientPair::new(a_ok.clone(), q.clone()).unwrap();
        assert!(pair.tilde_consistency() < 1e-12);
        // q_tilde and q_tilde_star differ exactly by 2 div A
        let diff = pair.q_tilde_star().sub(&pair.q_tilde());
        let two_div = divergence(&a_ok).scale(2.0);
        assert!(diff.sub(&two_div).max_abs() < 1e-12);

        let a_big = a_ok.scale(10.0);
        assert!(CoefficientPair::new(a_big, q.clone()).is_err());
        let a_moving = VectorField::from_fns(&g, |t, _, _| bound * 0.1 * t);
        assert!(CoefficientPair::new(a_moving, q).is_err());
    }

    #[test]
    fn face_indexing_round_trips() {
        let g = grid(9, 8);
        for face in BoxFace::all(2) {
            for flat in 0..face_len(&g) {
                let idx = face_node(&g, face, flat);
                assert!(g.is_boundary(&idx));
                assert_eq!(face_flat(&g, face, &idx), flat);
            }
        }
    }

    #[test]
    fn trace_norm_matches_analytic_value() {
        // f = 1 on the whole lateral boundary: |Sigma| = T * perimeter = 0.5*4
        let g = grid(17, 8);
        let tr = BoundaryTrace::from_fn(&g, |_, _| 1.0);
        assert!((tr.l2_sigma() - (0.5f64 * 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn restriction_zeroes_the_complement() {
        let g = grid(9, 8);
        let tr = BoundaryTrace::from_fn(&g, |_, x| 1.0 + x[0] + x[1]);
        let region =
            BoundaryRegion::resolve(2, &[1.0, 0.0], RegionKind::Shadowed, 0.0).unwrap();
        let r = tr.restricted(&region);
        for face in BoxFace::all(2) {
            for flat in 0..face_len(&g) {
                if region.contains(face) {
                    assert_eq!(r.get(0, face, flat), tr.get(0, face, flat));
                } else {
                    assert_eq!(r.get(0, face, flat), 0.0);
                }
            }
        }
    }

    #[test]
    fn manufactured_polynomial_solution_is_exact() {
        // u = (1+t)(x^2 + xy + 2y): quadratic in space, linear in t, so both
        // the centered stencils and the trapezoid step are exact.
        let g = grid(9, 8);
        let b = [0.02, -0.01];
        let c0 = 0.3;
        let exact = |t: f64, x: &[f64]| (1.0 + t) * (x[0] * x[0] + x[0] * x[1] + 2.0 * x[1]);
        let drift = VectorField::from_fns(&g, |_, _, j| b[j]);
        let zeroth = ScalarField::from_spatial_fn(&g, |_| c0);
        let source = ScalarField::from_fn(&g, |t, x| {
            let u = exact(t, x);
            let du_dt = x[0] * x[0] + x[0] * x[1] + 2.0 * x[1];
            let lap = (1.0 + t) * 2.0;
            let grad = [(1.0 + t) * (2.0 * x[0] + x[1]), (1.0 + t) * (x[0] + 2.0)];
            du_dt - lap - (b[0] * grad[0] + b[1] * grad[1]) - c0 * u
        });
        let boundary = BoundaryTrace::from_fn(&g, exact);
        let mut initial = ArrayD::zeros(IxDyn(&g.spatial_shape()));
        for (idx, v) in initial.indexed_iter_mut() {
            *v = exact(0.0, &g.coords(idx.slice()));
        }
        let u = solve_parabolic(&drift, &zeroth, &source, &boundary, &initial, 1e-12).unwrap();
        let want = ScalarField::from_fn(&g, exact);
        let err = u.sub(&want).max_abs();
        assert!(err < 1e-8, "manufactured error {err}");
    }

    #[test]
    fn pure_heat_solution_stays_bounded() {
        // no source, boundary in [0,1], zero initial state: discrete solution
        // must stay within the data range up to solver tolerance
        let g = grid(9, 16);
        let drift = VectorField::zeros(&g);
        let zeroth = ScalarField::zeros(&g);
        let source = ScalarField::zeros(&g);
        let boundary = BoundaryTrace::from_fn(&g, |t, x| {
            0.5 + 0.5 * (3.0 * t + x[0]).sin() * (2.0 * x[1]).cos()
        });
        let initial = ArrayD::zeros(IxDyn(&g.spatial_shape()));
        let u = solve_parabolic(&drift, &zeroth, &source, &boundary, &initial, 1e-10).unwrap();
        let lo = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo > -0.05 && hi < 1.05, "range [{lo}, {hi}]");
    }

    #[test]
    fn complex_solve_agrees_with_split_real_solves() {
        let g = grid(9, 8);
        let drift = VectorField::from_fns(&g, |_, _, j| if j == 0 { 0.03 } else { -0.02 });
        let zeroth = ScalarField::from_spatial_fn(&g, |x| -x[0]);
        let sre = ScalarField::from_fn(&g, |t, x| t * x[0]);
        let sim = ScalarField::from_fn(&g, |_, x| x[1] - 0.5);
        let source = ScalarField::from_parts(&sre, &sim);
        let boundary = BoundaryTrace::from_fn(&g, |t, x| Complex64::new(t * x[1], x[0]));
        let initial = ArrayD::zeros(IxDyn(&g.spatial_shape()));
        let u =
            solve_parabolic_complex(&drift, &zeroth, &source, &boundary, &initial, 1e-11).unwrap();
        let init_re = ArrayD::zeros(IxDyn(&g.spatial_shape()));
        let ure =
            solve_parabolic(&drift, &zeroth, &sre, &boundary.real(), &init_re, 1e-11).unwrap();
        assert!(u.real().sub(&ure).max_abs() < 1e-12);
    }

    #[test]
    fn dn_output_is_exact_on_linear_fields() {
        let g = grid(9, 8);
        let u = ScalarField::from_spatial_fn(&g, |x| 2.0 * x[0] - x[1]);
        let a = VectorField::zeros(&g);
        let out = dn_output(&a, &u);
        let expect = |face: BoxFace| match (face.axis, face.upper) {
            (0, true) => 2.0,
            (0, false) => -2.0,
            (1, true) => -1.0,
            (1, false) => 1.0,
            _ => unreachable!(),
        };
        for face in BoxFace::all(2) {
            for flat in 0..face_len(&g) {
                assert!((out.get(3, face, flat) - expect(face)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn dn_output_includes_the_convection_correction() {
        let g = grid(9, 8);
        let u = ScalarField::from_spatial_fn(&g, |_| 1.0);
        let bound = 1.0 / (9.0 * g.enclosing_radius());
        let a = VectorField::from_fns(&g, |_, _, j| if j == 0 { bound * 0.5 } else { 0.0 });
        let out = dn_output(&a, &u);
        let face = BoxFace { axis: 0, upper: true };
        // constant field: pure 2 nu.A contribution
        assert!((out.get(0, face, 0) - 2.0 * bound * 0.5).abs() < 1e-12);
    }

    #[test]
    fn time_reverse_is_an_involution() {
        let g = grid(9, 8);
        let f = ScalarField::from_fn(&g, |t, x| (t - 0.2) * x[0] + t * t);
        assert_eq!(time_reverse(&time_reverse(&f)), f);
        assert_eq!(time_reverse(&f).time_slice(0), f.time_slice(g.m_steps()));
    }

    #[test]
    fn gauge_change_leaves_the_boundary_output_invariant_for_trace_zero_gauges() {
        // A2 = A1 + grad(phi), q2 = q1 with phi vanishing to second order at
        // the boundary: the boundary outputs of solutions with the same
        // Dirichlet data agree on the boundary up to discretization error.
        let g = SpaceTimeGrid::new(2, 17, 16, 0.5).unwrap();
        let bound = 1.0 / (9.0 * g.enclosing_radius());
        let phi = ScalarField::from_spatial_fn(&g, |x| {
            let b = |s: f64| (s * (1.0 - s)).powi(3);
            0.02 * b(x[0]) * b(x[1])
        });
        let grad_phi = crate::ops::gradient(&phi);
        let a1 = VectorField::from_fns(&g, |_, x, j| {
            if j == 0 {
                bound * 0.3 * (std::f64::consts::PI * x[1]).sin()
            } else {
                0.0
            }
        });
        let a2 = a1.add(&grad_phi);
        assert!(a2.is_admissible());
        let q = ScalarField::from_spatial_fn(&g, |x| 0.5 * x[0]);
        let p1 = CoefficientPair::new(a1, q.clone()).unwrap();
        let p2 = CoefficientPair::new(a2, q).unwrap();
        let f = BoundaryTrace::from_fn(&g, |t, x| t * (1.0 + x[0] - x[1]));
        let src = ScalarField::zeros(&g);
        let u1 = solve_ibvp(&p1, &f, &src, 1e-11).unwrap();
        let u2 = solve_ibvp(&p2, &f, &src, 1e-11).unwrap();
        let n1 = dn_output(p1.a(), &u1);
        let n2 = dn_output(p2.a(), &u2);
        let diff = n1.sub(&n2).l2_sigma();
        let scale = n1.l2_sigma().max(1e-12);
        assert!(diff / scale < 5e-2, "gauge residual {}", diff / scale);
    }

    #[test]
    fn dn_difference_vanishes_for_identical_pairs() {
        let g = grid(9, 8);
        let u = ScalarField::from_fn(&g, |t, x| t + x[0] * x[1]);
        let a = VectorField::zeros(&g);
        let n1 = dn_output(&a, &u);
        let region =
            BoundaryRegion::resolve(2, &[1.0, 0.0], RegionKind::NeighborhoodG, 0.1).unwrap();
        let d = dn_difference_on_g(&n1, &n1, &region);
        assert_eq!(d.max_abs(), 0.0);
    }
}
