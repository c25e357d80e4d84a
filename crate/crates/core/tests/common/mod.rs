#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use fracadi::adi_solver::{SourceTerm, SourceTime, TransformedProblem};
use fracadi::problems::{Domain, PowerSeries, ProblemSpec, SeparableTerm, SpatialFactor};
use fracadi::spectral_basis::{project_samples, sample_on_quadrature, SpectralBasis1D};
use fracadi::validation_oracle::direct_caputo;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reduced problem with random orders, coefficients, rectangle and a smooth
/// source built from sines/Gaussians times polynomials in `t`.
pub fn random_problem(rng: &mut ChaCha8Rng) -> TransformedProblem {
    let beta = rng.random_range(0.05..0.95);
    let n_orders = rng.random_range(0..=2);
    let betas = (0..n_orders).map(|_| rng.random_range(-0.9..1.0)).collect();
    let coeffs = (0..n_orders).map(|_| rng.random_range(0.1..2.0)).collect();
    let ax = rng.random_range(-2.0..0.0);
    let ay = rng.random_range(-2.0..0.0);
    let domain = Domain::new(
        (ax, ax + rng.random_range(0.5..3.0)),
        (ay, ay + rng.random_range(0.5..3.0)),
    )
    .unwrap();
    let source = (0..rng.random_range(1..=3))
        .map(|_| {
            let time = PowerSeries::new(
                (0..=3)
                    .map(|e| (rng.random_range(-2.0..2.0), e as f64))
                    .collect(),
            );
            let space = if rng.random_bool(0.7) {
                SpatialFactor::Sines {
                    wx: rng.random_range(0.5..3.0),
                    wy: rng.random_range(0.5..3.0),
                }
            } else {
                SpatialFactor::gaussian()
            };
            SourceTerm {
                time: SourceTime::Power(time),
                space,
            }
        })
        .collect();
    TransformedProblem {
        beta,
        betas,
        coeffs,
        mu: rng.random_range(0.1..3.0),
        domain,
        source,
        lift: Vec::new(),
        exact: None,
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn bases(domain: Domain, degree: usize) -> (Arc<SpectralBasis1D>, Arc<SpectralBasis1D>) {
    (
        Arc::new(SpectralBasis1D::with_default_quadrature(degree, domain.x).unwrap()),
        Arc::new(SpectralBasis1D::with_default_quadrature(degree, domain.y).unwrap()),
    )
}

/// `u = t^σ sin(πx) sin(πy)` on (-1,1)² for the given orders, with its forcing.
pub fn single_power_problem(sigma: f64, alpha: f64, alphas: &[f64], coeffs: &[f64], mu: f64) -> ProblemSpec {
    let s = SpatialFactor::Sines { wx: PI, wy: PI };
    let mut forcing = vec![(2.0 * mu * PI * PI, sigma)];
    let caputo = |order: f64| direct_caputo(sigma, order, 1.0).unwrap();
    forcing.push((caputo(alpha), sigma - alpha));
    for (&a, &c) in alphas.iter().zip(coeffs) {
        forcing.push((c * caputo(a), sigma - a));
    }
    ProblemSpec {
        name: format!("power_{sigma}"),
        alpha,
        alphas: alphas.to_vec(),
        coeffs: coeffs.to_vec(),
        mu,
        domain: Domain::REFERENCE,
        g1: Vec::new(),
        g2: Vec::new(),
        forcing: vec![SeparableTerm::power(forcing, s.clone())],
        exact: Some(vec![SeparableTerm::power(vec![(1.0, sigma)], s)]),
        laplacian_g1: None,
        qualitative_only: false,
    }
}

/// Coefficients of the L² projection of `f` onto the tensor Shen space.
pub fn l2_projection<F: Fn(f64, f64) -> f64>(f: &F, bx: &SpectralBasis1D, by: &SpectralBasis1D) -> DMatrix<f64> {
    let load = project_samples(&sample_on_quadrature(f, bx, by), bx, by);
    let lx = (bx.mass() * bx.jacobian()).lu();
    let ly = (by.mass() * by.jacobian()).lu();
    let tmp = lx.solve(&load).unwrap();
    ly.solve(&tmp.transpose()).unwrap().transpose()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
