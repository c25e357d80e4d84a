//! One-dimensional Legendre machinery and the tensor-product Shen basis.
//!
//! The basis `φ_i = L_i - L_{i+2}`, `i = 0..N-2`, vanishes at `±1`. On the
//! reference interval its mass matrix is pentadiagonal with nonzeros on
//! offsets `0, ±2` and its stiffness matrix is diagonal:
//!
//! ```text
//! M_ii = 2/(2i+1) + 2/(2i+5),   M_{i,i+2} = -2/(2i+5),   S_ii = 4i + 6
//! ```
//!
//! All matrices here are reference-interval quantities. The affine map
//! `x = offset + J ξ` is only used to place quadrature and evaluation points;
//! Jacobian factors for the weak form are applied by the solver.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Extra quadrature points used for non-polynomial integrands.
pub const DEFAULT_EXTRA_QUADRATURE: usize = 8;

/// `L_n(x)` by the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> f64 {
    legendre_with_derivative(n, x).0
}

/// `(L_n(x), L_n'(x))`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        // L'_{k+1} = L'_{k-1} + (2k+1) L_k
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// All of `L_0(x)..L_n(x)`.
fn legendre_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Gauss-Legendre nodes (ascending) and weights on (-1, 1).
///
/// Newton iteration on `L_n` from Chebyshev-Gauss initial guesses; the step is
/// halved whenever it would leave (-1, 1).
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::invalid("n", "quadrature needs at least one point"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let mut dx = p / dp;
            while (x - dx).abs() >= 1.0 {
                dx *= 0.5;
            }
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            // one more check: a root hit exactly leaves dx tiny but nonzero
            let (p, _) = legendre_with_derivative(n, x);
            if p.abs() > 1e-14 {
                return Err(Error::NonConvergence(format!(
                    "Gauss-Legendre root {i} of {n} after 100 Newton steps"
                )));
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Shen basis function `φ_i(ξ) = L_i(ξ) - L_{i+2}(ξ)` and its derivative.
pub fn shen_eval(i: usize, xi: f64) -> (f64, f64) {
    let (a, da) = legendre_with_derivative(i, xi);
    let (b, db) = legendre_with_derivative(i + 2, xi);
    (a - b, da - db)
}

/// Closed-form reference mass matrix entry `(φ_i, φ_j)`.
pub fn mass_entry(i: usize, j: usize) -> f64 {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    let l = lo as f64;
    if lo == hi {
        2.0 / (2.0 * l + 1.0) + 2.0 / (2.0 * l + 5.0)
    } else if hi == lo + 2 {
        -2.0 / (2.0 * l + 5.0)
    } else {
        0.0
    }
}

/// Closed-form reference stiffness entry `(φ_i', φ_j')`.
pub fn stiffness_entry(i: usize, j: usize) -> f64 {
    if i == j {
        4.0 * i as f64 + 6.0
    } else {
        0.0
    }
}

/// The Shen basis for one direction, mapped onto a physical interval.
#[derive(Debug, Clone)]
pub struct SpectralBasis1D {
    degree: usize,
    interval: (f64, f64),
    /// Main diagonal of the mass matrix.
    mass_diag: Vec<f64>,
    /// Offset +2 (and, by symmetry, -2) of the mass matrix.
    mass_off2: Vec<f64>,
    stiffness_diag: Vec<f64>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// Basis values `φ_i(ξ_q)`, shape `(N_q, dim)`.
    quad_values: DMatrix<f64>,
}

impl SpectralBasis1D {
    /// Basis of degree `N` on `(a, b)` with `N_q` quadrature points.
    pub fn new(degree: usize, interval: (f64, f64), quad_count: usize) -> Result<Self> {
        if degree < 4 {
            return Err(Error::invalid("N", format!("degree {degree} < 4")));
        }
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(
                "domain",
                format!("interval ({a}, {b}) must satisfy a < b"),
            ));
        }
        if quad_count < degree + 1 {
            return Err(Error::invalid(
                "quad_count",
                format!("need at least N + 1 = {} points", degree + 1),
            ));
        }
        let dim = degree - 1;
        let mass_diag = (0..dim).map(|i| mass_entry(i, i)).collect();
        let mass_off2 = (0..dim.saturating_sub(2))
            .map(|i| mass_entry(i, i + 2))
            .collect();
        let stiffness_diag = (0..dim).map(|i| stiffness_entry(i, i)).collect();
        let (quad_nodes, quad_weights) = gauss_legendre(quad_count)?;
        let quad_values = Self::tabulate(dim, &quad_nodes);
        Ok(Self {
            degree,
            interval,
            mass_diag,
            mass_off2,
            stiffness_diag,
            quad_nodes,
            quad_weights,
            quad_values,
        })
    }

    /// Basis with the default over-integration `N_q = N + 8`.
    pub fn with_default_quadrature(degree: usize, interval: (f64, f64)) -> Result<Self> {
        Self::new(degree, interval, degree + DEFAULT_EXTRA_QUADRATURE)
    }

    fn tabulate(dim: usize, xi: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(xi.len(), dim);
        for (q, &x) in xi.iter().enumerate() {
            let l = legendre_table(dim + 1, x);
            for i in 0..dim {
                out[(q, i)] = l[i] - l[i + 2];
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions, `N - 1`.
    pub fn dim(&self) -> usize {
        self.degree - 1
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Half-length `J = (b - a)/2` of the physical interval.
    pub fn jacobian(&self) -> f64 {
        0.5 * (self.interval.1 - self.interval.0)
    }

    pub fn offset(&self) -> f64 {
        0.5 * (self.interval.1 + self.interval.0)
    }

    pub fn to_physical(&self, xi: f64) -> f64 {
        self.offset() + self.jacobian() * xi
    }

    pub fn to_reference(&self, x: f64) -> f64 {
        (x - self.offset()) / self.jacobian()
    }

    pub fn mass_diag(&self) -> &[f64] {
        &self.mass_diag
    }

    pub fn mass_off2(&self) -> &[f64] {
        &self.mass_off2
    }

    pub fn stiffness_diag(&self) -> &[f64] {
        &self.stiffness_diag
    }

    /// Dense reference mass matrix.
    pub fn mass(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, mass_entry)
    }

    /// Dense reference stiffness matrix.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, stiffness_entry)
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Quadrature nodes mapped to the physical interval.
    pub fn physical_nodes(&self) -> Vec<f64> {
        self.quad_nodes.iter().map(|&x| self.to_physical(x)).collect()
    }

    /// `φ_i` at the quadrature nodes, shape `(N_q, dim)`.
    pub fn quad_values(&self) -> &DMatrix<f64> {
        &self.quad_values
    }

    /// `φ_i` at arbitrary physical points, shape `(points, dim)`.
    pub fn values_at(&self, points: &[f64]) -> DMatrix<f64> {
        let xi: Vec<f64> = points.iter().map(|&x| self.to_reference(x)).collect();
        Self::tabulate(self.dim(), &xi)
    }

    /// `y = M x` along one vector using the banded structure.
    pub fn apply_mass(&self, x: &[f64], y: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = self.mass_diag[i] * x[i];
            if i >= 2 {
                acc += self.mass_off2[i - 2] * x[i - 2];
            }
            if i + 2 < d {
                acc += self.mass_off2[i] * x[i + 2];
            }
            y[i] = acc;
        }
    }
}

/// Coefficients `û_ij` of `u_N = Σ û_ij φ_i(x) ψ_j(y)` on the physical rectangle.
#[derive(Debug, Clone)]
pub struct ModalField2D {
    pub coeffs: DMatrix<f64>,
    pub basis_x: Arc<SpectralBasis1D>,
    pub basis_y: Arc<SpectralBasis1D>,
}

impl ModalField2D {
    pub fn new(
        coeffs: DMatrix<f64>,
        basis_x: Arc<SpectralBasis1D>,
        basis_y: Arc<SpectralBasis1D>,
    ) -> Self {
        assert_eq!(coeffs.nrows(), basis_x.dim());
        assert_eq!(coeffs.ncols(), basis_y.dim());
        Self {
            coeffs,
            basis_x,
            basis_y,
        }
    }

    pub fn zeros(basis_x: Arc<SpectralBasis1D>, basis_y: Arc<SpectralBasis1D>) -> Self {
        let coeffs = DMatrix::zeros(basis_x.dim(), basis_y.dim());
        Self::new(coeffs, basis_x, basis_y)
    }

    /// `u_N` at the quadrature grid, shape `(N_qx, N_qy)`.
    pub fn values_at_quadrature(&self) -> DMatrix<f64> {
        self.basis_x.quad_values() * &self.coeffs * self.basis_y.quad_values().transpose()
    }

    /// Squared physical L² norm via the mass matrices.
    pub fn norm_squared(&self) -> f64 {
        let scale = self.basis_x.jacobian() * self.basis_y.jacobian();
        let mu = mass_form(&self.basis_x, &self.basis_y, &self.coeffs);
        scale * mu.dot(&self.coeffs)
    }
}

/// In-place `self += c · x` for dense matrices.
pub trait AddScaled {
    fn add_scaled(&mut self, c: f64, x: &DMatrix<f64>);
}

impl AddScaled for DMatrix<f64> {
    fn add_scaled(&mut self, c: f64, x: &DMatrix<f64>) {
        self.zip_apply(x, |a, b| *a += c * b);
    }
}

/// `M_x U M_y` using the banded mass matrices.
pub fn mass_form(bx: &SpectralBasis1D, by: &SpectralBasis1D, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (dx, dy) = u.shape();
    let mut tmp = DMatrix::zeros(dx, dy);
    let mut col_out = vec![0.0; dx];
    for j in 0..dy {
        let col: Vec<f64> = u.column(j).iter().copied().collect();
        bx.apply_mass(&col, &mut col_out);
        tmp.column_mut(j).copy_from_slice(&col_out);
    }
    let mut out = DMatrix::zeros(dx, dy);
    let mut row_out = vec![0.0; dy];
    for i in 0..dx {
        let row: Vec<f64> = tmp.row(i).iter().copied().collect();
        by.apply_mass(&row, &mut row_out);
        for j in 0..dy {
            out[(i, j)] = row_out[j];
        }
    }
    out
}

/// Scales row `i` by `d_x[i]` and column `j` by `d_y[j]`.
pub(crate) fn scale_rows_cols(u: &DMatrix<f64>, dx: Option<&[f64]>, dy: Option<&[f64]>) -> DMatrix<f64> {
    let mut out = u.clone();
    for ((i, j), v) in out
        .iter_mut()
        .enumerate()
        .map(|(idx, v)| ((idx % u.nrows(), idx / u.nrows()), v))
    {
        if let Some(dx) = dx {
            *v *= dx[i];
        }
        if let Some(dy) = dy {
            *v *= dy[j];
        }
    }
    out
}

/// `S_x U M_y`.
pub fn stiffness_mass_form(bx: &SpectralBasis1D, by: &SpectralBasis1D, u: &DMatrix<f64>) -> DMatrix<f64> {
    let su = scale_rows_cols(u, Some(bx.stiffness_diag()), None);
    let (dx, dy) = u.shape();
    let mut out = DMatrix::zeros(dx, dy);
    let mut row_out = vec![0.0; dy];
    for i in 0..dx {
        let row: Vec<f64> = su.row(i).iter().copied().collect();
        by.apply_mass(&row, &mut row_out);
        for j in 0..dy {
            out[(i, j)] = row_out[j];
        }
    }
    out
}

/// `M_x U S_y`.
pub fn mass_stiffness_form(bx: &SpectralBasis1D, by: &SpectralBasis1D, u: &DMatrix<f64>) -> DMatrix<f64> {
    let us = scale_rows_cols(u, None, Some(by.stiffness_diag()));
    let (dx, dy) = u.shape();
    let mut out = DMatrix::zeros(dx, dy);
    let mut col_out = vec![0.0; dx];
    for j in 0..dy {
        let col: Vec<f64> = us.column(j).iter().copied().collect();
        bx.apply_mass(&col, &mut col_out);
        out.column_mut(j).copy_from_slice(&col_out);
    }
    out
}

/// `S_x U S_y`.
pub fn stiffness_stiffness_form(bx: &SpectralBasis1D, by: &SpectralBasis1D, u: &DMatrix<f64>) -> DMatrix<f64> {
    scale_rows_cols(u, Some(bx.stiffness_diag()), Some(by.stiffness_diag()))
}

/// Load matrix `(f, φ_l ψ_s)` over the physical rectangle by tensor Gauss quadrature.
pub fn project_source<F>(f: F, bx: &SpectralBasis1D, by: &SpectralBasis1D) -> DMatrix<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let grid = sample_on_quadrature(&f, bx, by);
    project_samples(&grid, bx, by)
}

/// `f` sampled on the mapped quadrature grid, shape `(N_qx, N_qy)`.
pub fn sample_on_quadrature<F>(f: &F, bx: &SpectralBasis1D, by: &SpectralBasis1D) -> DMatrix<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let xs = bx.physical_nodes();
    let ys = by.physical_nodes();
    DMatrix::from_fn(xs.len(), ys.len(), |a, b| f(xs[a], ys[b]))
}

/// Load matrix from values already sampled on the quadrature grid.
pub fn project_samples(grid: &DMatrix<f64>, bx: &SpectralBasis1D, by: &SpectralBasis1D) -> DMatrix<f64> {
    let weighted = scale_rows_cols(grid, Some(bx.quad_weights()), Some(by.quad_weights()));
    let jac = bx.jacobian() * by.jacobian();
    (bx.quad_values().transpose() * weighted * by.quad_values()) * jac
}

/// `∫∫ grid` over the physical rectangle (values on the quadrature grid).
pub fn integrate_samples(grid: &DMatrix<f64>, bx: &SpectralBasis1D, by: &SpectralBasis1D) -> f64 {
    let mut acc = 0.0;
    for (a, wa) in bx.quad_weights().iter().enumerate() {
        for (b, wb) in by.quad_weights().iter().enumerate() {
            acc += wa * wb * grid[(a, b)];
        }
    }
    acc * bx.jacobian() * by.jacobian()
}

/// `u_N` on the tensor grid `points_x × points_y`, shape `(len x, len y)`.
pub fn evaluate_field(field: &ModalField2D, points_x: &[f64], points_y: &[f64]) -> DMatrix<f64> {
    let vx = field.basis_x.values_at(points_x);
    let vy = field.basis_y.values_at(points_y);
    vx * &field.coeffs * vy.transpose()
}

/// `‖u_N - exact‖_{L²(Ω)}` by tensor Gauss quadrature on the field's bases.
pub fn l2_error<F>(field: &ModalField2D, exact: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let exact_grid = sample_on_quadrature(&exact, &field.basis_x, &field.basis_y);
    l2_error_on_grid(field, &exact_grid)
}

/// As [`l2_error`] with the exact values pre-sampled on the quadrature grid.
pub fn l2_error_on_grid(field: &ModalField2D, exact_grid: &DMatrix<f64>) -> f64 {
    let diff = field.values_at_quadrature() - exact_grid;
    let sq = diff.map(|v| v * v);
    integrate_samples(&sq, &field.basis_x, &field.basis_y).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn quad_inner<F: Fn(f64) -> f64>(n: usize, f: F) -> f64 {
        let (x, w) = gauss_legendre(n).unwrap();
        x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
    }

    #[test]
    fn legendre_values() {
        for &x in &[-1.0, -0.3, 0.2, 1.0] {
            assert_eq!(legendre_eval(0, x), 1.0);
        }
        for n in 0..=64 {
            assert_relative_eq!(legendre_eval(n, 1.0), 1.0, epsilon = 1e-13);
        }
        assert_relative_eq!(legendre_eval(2, 0.5), -0.125, epsilon = 1e-15);
    }

    #[test]
    fn legendre_derivative_matches_closed_form() {
        // L_3 = (5x^3 - 3x)/2
        let (p, dp) = legendre_with_derivative(3, 0.4);
        assert_relative_eq!(p, 0.5 * (5.0 * 0.064 - 1.2), epsilon = 1e-15);
        assert_relative_eq!(dp, 0.5 * (15.0 * 0.16 - 3.0), epsilon = 1e-15);
    }

    #[test]
    fn gauss_small_rules() {
        let (x, w) = gauss_legendre(1).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_relative_eq!(w[0], 2.0);
        let (x, w) = gauss_legendre(2).unwrap();
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 1.0, epsilon = 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn gauss_exactness_degree() {
        for n in 1..=32usize {
            let (_, w) = gauss_legendre(n).unwrap();
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let odd = quad_inner(n, |x| x.powi(2 * n as i32 - 1));
            assert!(odd.abs() < 1e-13, "n={n} odd {odd}");
            let even = quad_inner(n, |x| x.powi(2 * n as i32 - 2));
            assert_relative_eq!(even, 2.0 / (2 * n - 1) as f64, epsilon = 1e-13);
        }
    }

    #[test]
    fn basis_vanishes_at_endpoints() {
        for i in 0..30 {
            assert!(shen_eval(i, 1.0).0.abs() < 1e-14);
            assert!(shen_eval(i, -1.0).0.abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_entries() {
        let b = SpectralBasis1D::new(8, (-1.0, 1.0), 16).unwrap();
        assert_eq!(b.stiffness()[(0, 0)], 6.0);
        assert_relative_eq!(b.mass()[(0, 0)], 2.4, epsilon = 1e-15);
        assert_relative_eq!(b.mass()[(1, 3)], -2.0 / 7.0, epsilon = 1e-15);
        let nq = 16;
        let m00 = quad_inner(nq, |x| shen_eval(0, x).0.powi(2));
        let s00 = quad_inner(nq, |x| shen_eval(0, x).1.powi(2));
        let m13 = quad_inner(nq, |x| shen_eval(1, x).0 * shen_eval(3, x).0);
        assert_relative_eq!(m00, 2.4, epsilon = 1e-13);
        assert_relative_eq!(s00, 6.0, epsilon = 1e-13);
        assert_relative_eq!(m13, -2.0 / 7.0, epsilon = 1e-13);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(SpectralBasis1D::new(3, (0.0, 1.0), 8).is_err());
        assert!(SpectralBasis1D::new(8, (1.0, 0.0), 16).is_err());
        assert!(SpectralBasis1D::new(8, (0.0, 1.0), 8).is_err());
    }

    #[test]
    fn mass_parity_and_definiteness() {
        let b = SpectralBasis1D::with_default_quadrature(20, (-1.0, 1.0)).unwrap();
        let m = b.mass();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                assert_eq!(m[(i, j)], m[(j, i)]);
                if (i + j) % 2 == 1 {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
        assert!(m.cholesky().is_some());
        assert!(b.stiffness_diag().iter().all(|&s| s > 0.0));
    }

    fn reference_bases(n: usize) -> (Arc<SpectralBasis1D>, Arc<SpectralBasis1D>) {
        let b = Arc::new(SpectralBasis1D::with_default_quadrature(n, (-1.0, 1.0)).unwrap());
        (b.clone(), b)
    }

    #[test]
    fn project_zero_and_basis_function() {
        let (bx, by) = reference_bases(6);
        let p = project_source(|_, _| 0.0, &bx, &by);
        assert!(p.iter().all(|&v| v == 0.0));
        let p = project_source(|x, y| shen_eval(0, x).0 * shen_eval(0, y).0, &bx, &by);
        let m = bx.mass();
        for l in 0..bx.dim() {
            for s in 0..by.dim() {
                assert_relative_eq!(p[(l, s)], m[(0, l)] * m[(0, s)], epsilon = 1e-13);
            }
        }
        assert_relative_eq!(p[(0, 0)], 2.4 * 2.4, epsilon = 1e-13);
    }

    #[test]
    fn project_legendre_one() {
        // (L_1, φ_l) = 2/3 δ_{l1}; (1, ψ_s) = 2 δ_{s0}
        let (bx, by) = reference_bases(8);
        let p = project_source(|x, _| x, &bx, &by);
        for l in 0..bx.dim() {
            for s in 0..by.dim() {
                let expected = if l == 1 && s == 0 { 4.0 / 3.0 } else { 0.0 };
                assert_relative_eq!(p[(l, s)], expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn evaluate_and_boundary() {
        let (bx, by) = reference_bases(6);
        let mut f = ModalField2D::zeros(bx.clone(), by.clone());
        let pts = [-0.7, 0.1, 0.9];
        assert!(evaluate_field(&f, &pts, &pts).iter().all(|&v| v == 0.0));
        f.coeffs[(0, 0)] = 1.0;
        let v = evaluate_field(&f, &pts, &pts);
        for (a, &x) in pts.iter().enumerate() {
            for (b, &y) in pts.iter().enumerate() {
                let e = (1.0 - legendre_eval(2, x)) * (1.0 - legendre_eval(2, y));
                assert_relative_eq!(v[(a, b)], e, epsilon = 1e-14);
            }
        }
        f.coeffs = DMatrix::from_fn(5, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.5));
        let edge = [-1.0, 1.0];
        let v = evaluate_field(&f, &edge, &pts);
        assert!(v.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn l2_error_reference_values() {
        let (bx, by) = reference_bases(8);
        let zero = ModalField2D::zeros(bx.clone(), by.clone());
        assert_relative_eq!(l2_error(&zero, |_, _| 1.0), 2.0, epsilon = 1e-13);
        assert_relative_eq!(
            l2_error(&zero, |x, y| (PI * x).sin() * (PI * y).sin()),
            1.0,
            epsilon = 1e-10
        );
        let mut f = zero.clone();
        f.coeffs[(2, 1)] = 0.7;
        f.coeffs[(0, 3)] = -1.3;
        let fc = f.clone();
        let exact = move |x: f64, y: f64| evaluate_field(&fc, &[x], &[y])[(0, 0)];
        assert!(l2_error(&f, exact) < 1e-13);
    }

    #[test]
    fn l2_error_uses_jacobian() {
        let b = Arc::new(SpectralBasis1D::with_default_quadrature(6, (-2.0, 1.0)).unwrap());
        let c = Arc::new(SpectralBasis1D::with_default_quadrature(6, (-1.0, 2.0)).unwrap());
        let zero = ModalField2D::zeros(b, c);
        assert_relative_eq!(l2_error(&zero, |_, _| 1.0), 3.0, epsilon = 1e-13);
    }

    #[test]
    fn norm_matches_quadrature() {
        let b = Arc::new(SpectralBasis1D::with_default_quadrature(9, (0.0, 3.0)).unwrap());
        let mut f = ModalField2D::zeros(b.clone(), b.clone());
        f.coeffs = DMatrix::from_fn(8, 8, |i, j| ((i * 3 + j) as f64).sin());
        let by_quad = l2_error(&f, |_, _| 0.0).powi(2);
        assert_relative_eq!(f.norm_squared(), by_quad, max_relative = 1e-12);
    }

    #[test]
    fn banded_forms_match_dense() {
        let (bx, by) = reference_bases(9);
        let u = DMatrix::from_fn(8, 8, |i, j| ((2 * i + 5 * j) as f64).cos());
        let (m, s) = (bx.mass(), bx.stiffness());
        assert!((mass_form(&bx, &by, &u) - &m * &u * &m).abs().max() < 1e-13);
        assert!((stiffness_mass_form(&bx, &by, &u) - &s * &u * &m).abs().max() < 1e-12);
        assert!((mass_stiffness_form(&bx, &by, &u) - &m * &u * &s).abs().max() < 1e-12);
        assert!((stiffness_stiffness_form(&bx, &by, &u) - &s * &u * &s).abs().max() < 1e-11);
    }

    #[test]
    fn projection_error_decays_spectrally() {
        // mass-matrix projection of (1 - x^2) e^x onto the Shen space
        let f = |x: f64| (1.0 - x * x) * x.exp();
        let mut errors = Vec::new();
        for n in [4usize, 8, 12, 16, 20] {
            let b = SpectralBasis1D::with_default_quadrature(n, (-1.0, 1.0)).unwrap();
            let v = b.quad_values();
            let w = b.quad_weights();
            let rhs = nalgebra::DVector::from_fn(b.dim(), |i, _| {
                (0..w.len()).map(|q| w[q] * f(b.quad_nodes()[q]) * v[(q, i)]).sum()
            });
            let c = b.mass().lu().solve(&rhs).unwrap();
            let err2: f64 = (0..w.len())
                .map(|q| {
                    let approx: f64 = (0..b.dim()).map(|i| c[i] * v[(q, i)]).sum();
                    w[q] * (approx - f(b.quad_nodes()[q])).powi(2)
                })
                .sum();
            errors.push(err2.sqrt());
        }
        // log-error decreases with increasing slope (concave), until round-off
        let logs: Vec<f64> = errors.iter().map(|e| e.max(1e-15).ln()).collect();
        for w in logs.windows(3) {
            if w[2] > -30.0 {
                assert!(w[2] - w[1] < w[1] - w[0], "{errors:?}");
            }
        }
        assert!(errors[4] < 1e-13, "{errors:?}");
    }
}
