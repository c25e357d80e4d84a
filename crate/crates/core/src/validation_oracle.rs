//! Brute-force reference computations.
//!
//! Everything here deliberately avoids the structure the production path
//! relies on: systems are assembled as full Kronecker products and factored by
//! pivoted LU, the time-discrete operators are applied as plain Grünwald sums,
//! fractional derivatives use the Γ formula or quadrature of the defining
//! integral, and spectral matrices are recomputed by Gauss quadrature.

use nalgebra::{DMatrix, DVector};

use crate::adi_solver::{DiscretizationParams, SourceTime, TransformedProblem};
use crate::error::{Error, Result};
use crate::frac_weights::{binomial_weights, gamma};
use crate::problems::{ProblemSpec, SpatialFactor};
use crate::spectral_basis::{gauss_legendre, project_samples, sample_on_quadrature, shen_eval, SpectralBasis1D};

/// Largest system the dense oracle accepts.
pub const MAX_DENSE_DIM: usize = 2500;

/// Flattens `U` row by row: entry `(i, j)` goes to `i·dim_y + j`.
pub fn vectorize(u: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(u.transpose().as_slice())
}

pub fn unvectorize(v: &DVector<f64>, dim_x: usize, dim_y: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim_x, dim_y, v.as_slice())
}

/// The four Kronecker blocks of the 2D weak form, Jacobians included.
#[derive(Debug, Clone)]
pub struct KroneckerBlocks {
    /// `J_x J_y M_x⊗M_y`
    pub mass: DMatrix<f64>,
    /// `(J_y/J_x) S_x⊗M_y + (J_x/J_y) M_x⊗S_y`
    pub stiffness: DMatrix<f64>,
    /// `S_x⊗S_y / (J_x J_y)`
    pub cross: DMatrix<f64>,
}

impl KroneckerBlocks {
    pub fn new(bx: &SpectralBasis1D, by: &SpectralBasis1D) -> Result<Self> {
        let n = bx.dim() * by.dim();
        if n > MAX_DENSE_DIM {
            return Err(Error::invalid(
                "N",
                format!("dense oracle limited to {MAX_DENSE_DIM} unknowns, got {n}"),
            ));
        }
        let (jx, jy) = (bx.jacobian(), by.jacobian());
        let (mx, my, sx, sy) = (bx.mass(), by.mass(), bx.stiffness(), by.stiffness());
        Ok(Self {
            mass: mx.kronecker(&my) * (jx * jy),
            stiffness: sx.kronecker(&my) * (jy / jx) + mx.kronecker(&sy) * (jx / jy),
            cross: sx.kronecker(&sy) / (jx * jy),
        })
    }
}

/// A dense linear system `matrix · vec(U) = rhs`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl DenseSystem {
    /// Left operator of the ADI step,
    /// `p²J_xJ_y M⊗M + q(J_y/J_x S⊗M + J_x/J_y M⊗S) + (q²/p²)/(J_xJ_y) S⊗S`.
    pub fn adi_operator(
        params: &DiscretizationParams,
        bx: &SpectralBasis1D,
        by: &SpectralBasis1D,
    ) -> Result<DMatrix<f64>> {
        let k = KroneckerBlocks::new(bx, by)?;
        Ok(k.mass * params.p_squared + k.stiffness * params.q + k.cross * params.perturbation())
    }

    pub fn solve(&self) -> Result<DVector<f64>> {
        self.matrix
            .clone()
            .lu()
            .solve(&self.rhs)
            .ok_or_else(|| Error::Factorization("dense oracle matrix is singular".into()))
    }
}

/// Solves the full Kronecker system of one ADI step for a given right-hand side.
pub fn dense_kronecker_solve(
    params: &DiscretizationParams,
    bx: &SpectralBasis1D,
    by: &SpectralBasis1D,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let system = DenseSystem {
        matrix: DenseSystem::adi_operator(params, bx, by)?,
        rhs: vectorize(rhs),
    };
    Ok(unvectorize(&system.solve()?, bx.dim(), by.dim()))
}

/// Shifted Grünwald weights `λ_0..λ_{count-1}` straight from their definition.
fn shifted(order: f64, count: usize) -> Result<Vec<f64>> {
    let g = binomial_weights(order, count)?;
    let h = 0.5 * order;
    Ok((0..count)
        .map(|j| (1.0 + h) * g[j] - if j > 0 { h * g[j - 1] } else { 0.0 })
        .collect())
}

/// `τ^{-order} Σ_{j=1}^{n} λ_j U^{n-j}` (the part of `D_τ^{order,n}` without `U^n`).
fn lagged_sum(history: &[DMatrix<f64>], weights: &[f64], n: usize, tau: f64, order: f64) -> DVector<f64> {
    let mut acc = DVector::zeros(history[0].len());
    for j in 1..=n {
        acc.axpy(weights[j], &vectorize(&history[n - j]), 1.0);
    }
    acc * tau.powf(-order)
}

/// One step of the time-discrete scheme, assembled as
///
/// ```text
/// δ_t U + Σ a_i D^{β_i,k+1/2} U = -μ D^{-β,k+1/2} S-form(U) + g^{k+1/2}
/// ```
///
/// with `D^{k+1/2} = ½(D^{k+1} + D^k)` applied term by term. With `adi` the
/// perturbation `(q²/p²)(U^{k+1} - U^k)` in the `S⊗S` form is added.
pub fn dense_step(
    params: &DiscretizationParams,
    bx: &SpectralBasis1D,
    by: &SpectralBasis1D,
    history: &[DMatrix<f64>],
    load: &DMatrix<f64>,
    adi: bool,
) -> Result<DMatrix<f64>> {
    let blocks = KroneckerBlocks::new(bx, by)?;
    let tau = params.tau;
    let k = history.len() - 1;
    let count = k + 2;

    // multiply the scheme through by τ
    let mut mass_lhs = 1.0;
    let mut mass_rhs = vectorize(&history[k]);
    for (&b, &a) in params.betas.iter().zip(&params.coeffs) {
        let w = shifted(b, count)?;
        let s = 0.5 * a * tau;
        mass_lhs += s * w[0] * tau.powf(-b);
        let now = lagged_sum(history, &w, k + 1, tau, b);
        let mut prev = lagged_sum(history, &w, k, tau, b);
        prev.axpy(w[0] * tau.powf(-b), &vectorize(&history[k]), 1.0);
        mass_rhs.axpy(-s, &(now + prev), 1.0);
    }
    let w = shifted(-params.beta, count)?;
    let s = 0.5 * params.mu * tau;
    let stiff_lhs = s * w[0] * tau.powf(params.beta);
    let now = lagged_sum(history, &w, k + 1, tau, -params.beta);
    let mut prev = lagged_sum(history, &w, k, tau, -params.beta);
    prev.axpy(w[0] * tau.powf(params.beta), &vectorize(&history[k]), 1.0);
    let stiff_rhs = (now + prev) * (-s);

    let mut matrix = &blocks.mass * mass_lhs + &blocks.stiffness * stiff_lhs;
    let mut rhs = &blocks.mass * mass_rhs + &blocks.stiffness * stiff_rhs + vectorize(load) * tau;
    if adi {
        let c = params.perturbation();
        matrix += &blocks.cross * c;
        rhs += &blocks.cross * vectorize(&history[k]) * c;
    }
    let u = DenseSystem { matrix, rhs }.solve()?;
    Ok(unvectorize(&u, bx.dim(), by.dim()))
}

/// One step of the non-ADI scheme (no perturbation term).
pub fn non_adi_step(
    params: &DiscretizationParams,
    bx: &SpectralBasis1D,
    by: &SpectralBasis1D,
    history: &[DMatrix<f64>],
    load: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    dense_step(params, bx, by, history, load, false)
}

/// Half-step loads `(g^{k+1/2}, φ_l ψ_s)` for `k = 0..steps`, projected independently of the solver.
pub fn half_step_loads(
    problem: &TransformedProblem,
    bx: &SpectralBasis1D,
    by: &SpectralBasis1D,
    tau: f64,
    steps: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let mut out = vec![DMatrix::zeros(bx.dim(), by.dim()); steps];
    for term in &problem.source {
        let space = term.space.clone();
        let proj = project_samples(&sample_on_quadrature(&|x, y| space.eval(x, y), bx, by), bx, by);
        let times = match &term.time {
            SourceTime::Power(p) => (0..=steps).map(|n| p.eval(n as f64 * tau)).collect(),
            other => other.grid_values(tau, steps)?,
        };
        for (k, load) in out.iter_mut().enumerate() {
            *load += &proj * (0.5 * (times[k] + times[k + 1]));
        }
    }
    Ok(out)
}

/// Full march of the (non-ADI or ADI) scheme by dense solves; returns `U^0..U^M`.
pub fn dense_march(
    problem: &TransformedProblem,
    bx: &SpectralBasis1D,
    by: &SpectralBasis1D,
    tau: f64,
    steps: usize,
    adi: bool,
) -> Result<Vec<DMatrix<f64>>> {
    let params = DiscretizationParams::new(problem, tau, steps)?;
    let loads = half_step_loads(problem, bx, by, tau, steps)?;
    let mut history = vec![DMatrix::zeros(bx.dim(), by.dim())];
    for load in &loads {
        let next = dense_step(&params, bx, by, &history, load, adi)?;
        history.push(next);
    }
    Ok(history)
}

/// Caputo derivative of `t^σ` by the Γ formula.
///
/// Powers that are annihilated (non-negative integers below `⌈order⌉`) give 0;
/// other powers with `σ ≤ ⌈order⌉ - 1` are rejected because the defining
/// integral diverges.
pub fn direct_caputo(sigma: f64, order: f64, t: f64) -> Result<f64> {
    if order <= 0.0 {
        return Err(Error::invalid("order", format!("{order} must be positive")));
    }
    let n = order.ceil();
    if sigma >= 0.0 && sigma.fract() == 0.0 && sigma < n {
        return Ok(0.0);
    }
    if sigma <= n - 1.0 {
        return Err(Error::invalid(
            "sigma",
            format!("Caputo derivative of order {order} undefined for t^{sigma}"),
        ));
    }
    Ok(gamma(sigma + 1.0) / gamma(sigma + 1.0 - order) * t.powf(sigma - order))
}

/// Caputo derivative of order `order` at `t` by double-exponential quadrature of
///
/// ```text
/// 1/Γ(n-α) ∫_0^t u^{n-α-1} f^{(n)}(t-u) du = 1/Γ(n-α+1) ∫_0^{t^{n-α}} f^{(n)}(t - r^{1/(n-α)}) dr,
/// ```
///
/// `n = ⌈α⌉`, where `nth_derivative` is `f^{(n)}`. The substitution removes the
/// kernel singularity.
pub fn caputo_quadrature<F>(nth_derivative: F, order: f64, t: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(order > 0.0) || order.fract() == 0.0 {
        return Err(Error::invalid("order", format!("{order} must be positive and non-integer")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let n = order.ceil();
    let e = n - order;
    let out = quadrature::double_exponential::integrate(
        |r| nth_derivative(t - r.powf(1.0 / e)),
        0.0,
        t.powf(e),
        tol,
    );
    if !(out.error_estimate <= tol * 10.0) || !out.integral.is_finite() {
        return Err(Error::NonConvergence(format!(
            "Caputo quadrature error estimate {:e} above {tol:e}",
            out.error_estimate
        )));
    }
    Ok(out.integral / gamma(e + 1.0))
}

/// Largest deviation between closed-form and quadrature-recomputed mass and stiffness matrices.
pub fn quadrature_matrix_check(basis: &SpectralBasis1D) -> Result<f64> {
    let dim = basis.dim();
    let (nodes, weights) = gauss_legendre(2 * basis.degree())?;
    let table: Vec<Vec<(f64, f64)>> = nodes
        .iter()
        .map(|&x| (0..dim).map(|i| shen_eval(i, x)).collect())
        .collect();
    let (mass, stiff) = (basis.mass(), basis.stiffness());
    let mut dev = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let (mut m, mut s) = (0.0, 0.0);
            for (q, w) in weights.iter().enumerate() {
                let (a, b) = (table[q][i], table[q][j]);
                m += w * a.0 * b.0;
                s += w * a.1 * b.1;
            }
            dev = dev.max((m - mass[(i, j)]).abs()).max((s - stiff[(i, j)]).abs());
        }
    }
    Ok(dev)
}

/// `C D^α u + Σ a_i C D^{α_i} u - μ Δu - f` at one point, for problems whose
/// exact solution has power-law time factors and analytic Laplacians.
pub fn pde_residual(problem: &ProblemSpec, x: f64, y: f64, t: f64) -> Result<f64> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::invalid("exact", "problem has no exact solution"))?;
    let mut lhs = 0.0;
    for term in exact {
        let series = term
            .time
            .as_power()
            .ok_or_else(|| Error::invalid("exact", "time factor must be a power series"))?;
        let caputo = |order: f64| -> Result<f64> {
            series
                .terms()
                .iter()
                .map(|&(c, e)| direct_caputo(e, order, t).map(|v| c * v))
                .sum()
        };
        let mut time_part = caputo(problem.alpha)?;
        for (&a, &c) in problem.alphas.iter().zip(&problem.coeffs) {
            time_part += c * if a == 1.0 {
                series.terms().iter().map(|&(k, e)| if e == 0.0 { 0.0 } else { k * e * t.powf(e - 1.0) }).sum()
            } else {
                caputo(a)?
            };
        }
        let (scale, lap) = term
            .space
            .laplacian()
            .ok_or_else(|| Error::invalid("exact", "spatial factor has no analytic Laplacian"))?;
        lhs += time_part * term.space.eval(x, y) - problem.mu * series.eval(t) * scale * lap.eval(x, y);
    }
    Ok(lhs - problem.f(x, y, t))
}

/// `Σ_{n=1}^{k} (Σ_{j=0}^{n-1} λ_j v_{n-j}) v_n` for `v = (v_1..v_k)`.
pub fn grunwald_quadratic_form(order: f64, v: &[f64]) -> Result<f64> {
    let w = shifted(order, v.len().max(1))?;
    let mut total = 0.0;
    for n in 0..v.len() {
        let inner: f64 = (0..=n).map(|j| w[j] * v[n - j]).sum();
        total += inner * v[n];
    }
    Ok(total)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Deterministic oracle sweep exposed through the `verify` subcommand.
pub fn verify_all() -> Result<Vec<CheckOutcome>> {
    use crate::problems::{compatible_nonsmooth, compatible_smooth, example_6_2};
    let mut out = Vec::new();

    for n in [8usize, 16, 24] {
        let b = SpectralBasis1D::with_default_quadrature(n, (-1.0, 1.0))?;
        out.push(CheckOutcome {
            name: format!("matrix_closed_forms_N{n}"),
            value: quadrature_matrix_check(&b)?,
            tolerance: 1e-11,
        });
    }

    for (n, beta) in [(6usize, 0.5), (8, -0.3), (10, 0.2), (12, 0.7)] {
        out.push(CheckOutcome {
            name: format!("adi_vs_kronecker_N{n}"),
            value: adi_kronecker_deviation(n, beta, 1.0 / 20.0, 5)?,
            tolerance: 1e-10,
        });
    }

    for problem in [example_6_2(), compatible_smooth(), compatible_nonsmooth()] {
        let mut worst = 0.0f64;
        for i in 0..10 {
            let s = i as f64 / 10.0;
            let (ax, bx) = problem.domain.x;
            let (ay, by) = problem.domain.y;
            let x = ax + (bx - ax) * (0.05 + 0.9 * s);
            let y = ay + (by - ay) * (0.95 - 0.9 * s);
            worst = worst.max(pde_residual(&problem, x, y, 0.1 + 0.09 * i as f64)?.abs());
        }
        out.push(CheckOutcome {
            name: format!("pde_residual_{}", problem.name),
            value: worst,
            tolerance: 1e-9,
        });
    }

    let caputo_dev = [(1.0, 0.5), (2.5, 0.7), (2.2, 1.5)]
        .iter()
        .map(|&(s, a): &(f64, f64)| -> Result<f64> {
            let n = a.ceil() as i32;
            let mut c = 1.0;
            for i in 0..n {
                c *= s - i as f64;
            }
            let q = caputo_quadrature(|u| c * u.powf(s - n as f64), a, 0.8, 1e-12)?;
            Ok((q - direct_caputo(s, a, 0.8)?).abs())
        })
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))?;
    out.push(CheckOutcome {
        name: "caputo_gamma_vs_quadrature".into(),
        value: caputo_dev,
        tolerance: 1e-10,
    });
    Ok(out)
}

/// Relative deviation between the two-sweep step and the dense ADI step after
/// `steps` steps of a deterministic pseudo-random problem.
pub fn adi_kronecker_deviation(degree: usize, beta: f64, tau: f64, steps: usize) -> Result<f64> {
    use crate::adi_solver::{Solver, SourceTerm};
    use crate::problems::{Domain, PowerSeries};
    use std::sync::Arc;

    let domain = Domain::new((-2.0, 1.0), (-1.0, 2.0))?;
    let problem = TransformedProblem {
        beta,
        betas: vec![(0.5 + 0.5 * beta).min(1.0), -0.2],
        coeffs: vec![1.0, 0.5],
        mu: 1.5,
        domain,
        source: vec![SourceTerm {
            time: SourceTime::Power(PowerSeries::new(vec![(1.0, 0.5), (2.0, 2.0)])),
            space: SpatialFactor::gaussian(),
        }],
        lift: Vec::new(),
        exact: None,
    };
    let bx = Arc::new(SpectralBasis1D::with_default_quadrature(degree, domain.x)?);
    let by = Arc::new(SpectralBasis1D::with_default_quadrature(degree, domain.y)?);
    let solver = Solver::new(&problem, bx.clone(), by.clone(), tau, steps, None)?;
    let loads = half_step_loads(&problem, &bx, &by, tau, steps)?;
    let mut state = solver.new_state();
    let mut worst = 0.0f64;
    for load in loads.iter() {
        let dense = dense_step(solver.params(), &bx, &by, &state.history, load, true)?;
        solver.step(&mut state)?;
        let scale = dense.norm().max(f64::MIN_POSITIVE);
        worst = worst.max((state.current() - &dense).norm() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn caputo_spot_values() {
        assert_relative_eq!(direct_caputo(1.0, 0.5, 1.0).unwrap(), 2.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(direct_caputo(2.0, 1.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(direct_caputo(1.1, 1.1, 1.0).unwrap(), gamma(2.1), max_relative = 1e-14);
        assert_eq!(direct_caputo(1.0, 1.5, 0.7).unwrap(), 0.0);
        assert!(direct_caputo(0.5, 1.5, 1.0).is_err());
    }

    #[test]
    fn caputo_quadrature_of_exponential() {
        // C D^α e^t = t^{1-α} E_{1,2-α}(t) = Σ_k t^{k+1-α}/Γ(k+2-α)
        let (a, t): (f64, f64) = (0.4, 0.9);
        let series: f64 = (0..60).map(|k| t.powf(k as f64 + 1.0 - a) / gamma(k as f64 + 2.0 - a)).sum();
        let q = caputo_quadrature(|s| s.exp(), a, t, 1e-13).unwrap();
        assert_relative_eq!(q, series, max_relative = 1e-10);
    }

    #[test]
    fn matrix_check_small_and_large() {
        for n in [8usize, 24] {
            let b = SpectralBasis1D::with_default_quadrature(n, (-1.0, 1.0)).unwrap();
            let tol = if n == 8 { 1e-12 } else { 1e-11 };
            assert!(quadrature_matrix_check(&b).unwrap() <= tol);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let b = SpectralBasis1D::with_default_quadrature(6, (-1.0, 1.0)).unwrap();
        let problem = TransformedProblem {
            beta: 0.5,
            betas: vec![0.5],
            coeffs: vec![1.0],
            mu: 1.0,
            domain: crate::problems::Domain::REFERENCE,
            source: Vec::new(),
            lift: Vec::new(),
            exact: None,
        };
        let params = DiscretizationParams::new(&problem, 0.1, 4).unwrap();
        let u = dense_kronecker_solve(&params, &b, &b, &DMatrix::zeros(5, 5)).unwrap();
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn degenerate_coefficients_give_mass_projection() {
        let b = SpectralBasis1D::with_default_quadrature(8, (0.0, 3.0)).unwrap();
        let problem = TransformedProblem {
            beta: 0.5,
            betas: Vec::new(),
            coeffs: Vec::new(),
            mu: 0.0,
            domain: crate::problems::Domain::new((0.0, 3.0), (0.0, 3.0)).unwrap(),
            source: Vec::new(),
            lift: Vec::new(),
            exact: None,
        };
        let params = DiscretizationParams::new(&problem, 0.1, 4).unwrap();
        assert_eq!((params.p_squared, params.q), (1.0, 0.0));
        let f = DMatrix::from_fn(7, 7, |i, j| (i as f64 - j as f64).cos());
        let u = dense_kronecker_solve(&params, &b, &b, &f).unwrap();
        let back = b.mass() * &u * b.mass() * (b.jacobian() * b.jacobian());
        assert!((back - f).abs().max() < 1e-12);
    }

    #[test]
    fn grunwald_quadratic_form_nonnegative() {
        for beta in [-0.9, -0.5, -0.1, 0.3, 0.5, 0.9, 1.0] {
            for k in [1usize, 5, 64] {
                let v: Vec<f64> = (0..k).map(|i| ((i * 7 + 3) as f64).sin()).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum();
                assert!(grunwald_quadratic_form(beta, &v).unwrap() >= -1e-12 * norm);
            }
        }
    }

    #[test]
    fn verify_all_passes() {
        for c in verify_all().unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }
}
