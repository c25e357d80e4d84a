//! Governing-equation data and the manufactured-solution library.
//!
//! Every problem has the form
//!
//! ```text
//! C D^α u + Σ_j a_j C D^{α_j} u = μ Δu + f   on (a,b)×(c,d),  u = 0 on the boundary,
//! u(·,0) = g1,  ∂_t u(·,0) = g2
//! ```
//!
//! with `2 > α > α_1 > … > α_Q > 0`. Data are kept in separable form
//! (time profile × spatial factor) so that fractional operators in time can be
//! applied analytically to power-law profiles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frac_weights::gamma;

/// Physical rectangle `(x.0, x.1) × (y.0, y.1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Domain {
    pub const REFERENCE: Domain = Domain {
        x: (-1.0, 1.0),
        y: (-1.0, 1.0),
    };

    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        for (name, (a, b)) in [("domain.x", x), ("domain.y", y)] {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::invalid(name, format!("({a}, {b}) is not an interval")));
            }
        }
        Ok(Self { x, y })
    }

    /// Transposed rectangle.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y,
            y: self.x,
        }
    }
}

/// `Σ c_i t^{e_i}` with `e_i ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerSeries(pub Vec<(f64, f64)>);

impl PowerSeries {
    pub fn new(terms: Vec<(f64, f64)>) -> Self {
        Self(terms)
    }

    pub fn constant(c: f64) -> Self {
        Self(vec![(c, 0.0)])
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().map(|&(c, e)| c * pow0(t, e)).sum()
    }

    /// Value at `t = 0` (sum of the constant terms).
    pub fn at_zero(&self) -> f64 {
        self.0.iter().filter(|(_, e)| *e == 0.0).map(|(c, _)| c).sum()
    }

    /// First derivative at `t = 0`; `None` if some exponent in (0, 1) makes it infinite.
    pub fn derivative_at_zero(&self) -> Option<f64> {
        let mut acc = 0.0;
        for &(c, e) in &self.0 {
            if c != 0.0 && e > 0.0 && e < 1.0 {
                return None;
            }
            if e == 1.0 {
                acc += c;
            }
        }
        Some(acc)
    }

    /// Series without its constant terms.
    pub fn without_constant(&self) -> Self {
        Self(self.0.iter().copied().filter(|(_, e)| *e != 0.0).collect())
    }

    /// Exact Riemann-Liouville fractional integral of order `order > 0`.
    pub fn rl_integral(&self, order: f64) -> Self {
        Self(
            self.0
                .iter()
                .map(|&(c, e)| (c * gamma(e + 1.0) / gamma(e + 1.0 + order), e + order))
                .collect(),
        )
    }
}

/// `t^e` with `0^0 = 1`.
pub(crate) fn pow0(t: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        t.powf(e)
    }
}

pub type ScalarFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ScalarFn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time dependence of one separable term.
#[derive(Clone)]
pub enum TimeProfile {
    Power(PowerSeries),
    /// Arbitrary function; fractional operators fall back to Grünwald sums on samples.
    Sampled(ScalarFn1),
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Power(p) => p.eval(t),
            TimeProfile::Sampled(f) => f(t),
        }
    }

    pub fn as_power(&self) -> Option<&PowerSeries> {
        match self {
            TimeProfile::Power(p) => Some(p),
            TimeProfile::Sampled(_) => None,
        }
    }
}

impl fmt::Debug for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Power(p) => f.debug_tuple("Power").field(p).finish(),
            TimeProfile::Sampled(_) => f.write_str("Sampled(..)"),
        }
    }
}

/// Spatial factor of a separable term.
#[derive(Clone)]
pub enum SpatialFactor {
    /// `sin(wx·x)·sin(wy·y)`.
    Sines { wx: f64, wy: f64 },
    /// `P(s)·exp(-s)` with `s = x² + y²` and `P(s) = Σ coeffs[k]·s^k`.
    GaussianPoly { coeffs: Vec<f64> },
    /// Opaque function; has no analytic Laplacian.
    Custom(ScalarFn2),
}

impl SpatialFactor {
    pub fn gaussian() -> Self {
        SpatialFactor::GaussianPoly { coeffs: vec![1.0] }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            SpatialFactor::Sines { wx, wy } => (wx * x).sin() * (wy * y).sin(),
            SpatialFactor::GaussianPoly { coeffs } => {
                let s = x * x + y * y;
                horner(coeffs, s) * (-s).exp()
            }
            SpatialFactor::Custom(f) => f(x, y),
        }
    }

    /// `Δ` of this factor as `scale · factor`, when known analytically.
    pub fn laplacian(&self) -> Option<(f64, SpatialFactor)> {
        match self {
            SpatialFactor::Sines { wx, wy } => Some((-(wx * wx + wy * wy), self.clone())),
            SpatialFactor::GaussianPoly { coeffs } => {
                // radial in s = r²: Δ[P e^{-s}] = e^{-s} [4s(P'' - 2P' + P) + 4(P' - P)]
                let p = coeffs.clone();
                let dp = poly_derivative(&p);
                let ddp = poly_derivative(&dp);
                let mut inner = poly_add(&poly_add(&ddp, &poly_scale(&dp, -2.0)), &p);
                inner.insert(0, 0.0); // multiply by s
                let outer = poly_add(&poly_scale(&inner, 4.0), &poly_scale(&poly_add(&dp, &poly_scale(&p, -1.0)), 4.0));
                Some((1.0, SpatialFactor::GaussianPoly { coeffs: outer }))
            }
            SpatialFactor::Custom(_) => None,
        }
    }

    /// Same function of the transposed coordinates.
    pub fn swapped(&self) -> Self {
        match self {
            SpatialFactor::Sines { wx, wy } => SpatialFactor::Sines { wx: *wy, wy: *wx },
            SpatialFactor::GaussianPoly { .. } => self.clone(),
            SpatialFactor::Custom(f) => {
                let f = f.clone();
                SpatialFactor::Custom(Arc::new(move |x, y| f(y, x)))
            }
        }
    }
}

impl fmt::Debug for SpatialFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialFactor::Sines { wx, wy } => write!(f, "Sines {{ wx: {wx}, wy: {wy} }}"),
            SpatialFactor::GaussianPoly { coeffs } => write!(f, "GaussianPoly {{ coeffs: {coeffs:?} }}"),
            SpatialFactor::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
        .collect()
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|c| c * s).collect()
}

/// `time(t) · space(x, y)`.
#[derive(Debug, Clone)]
pub struct SeparableTerm {
    pub time: TimeProfile,
    pub space: SpatialFactor,
}

impl SeparableTerm {
    pub fn power(terms: Vec<(f64, f64)>, space: SpatialFactor) -> Self {
        Self {
            time: TimeProfile::Power(PowerSeries::new(terms)),
            space,
        }
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.time.eval(t) * self.space.eval(x, y)
    }
}

/// Time-independent field `Σ c_r · factor_r`.
pub type StaticField = Vec<(f64, SpatialFactor)>;

pub fn eval_static(field: &StaticField, x: f64, y: f64) -> f64 {
    field.iter().map(|(c, s)| c * s.eval(x, y)).sum()
}

pub fn eval_terms(terms: &[SeparableTerm], x: f64, y: f64, t: f64) -> f64 {
    terms.iter().map(|term| term.eval(x, y, t)).sum()
}

/// Data of one initial-boundary value problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub mu: f64,
    pub domain: Domain,
    /// Initial value `u(·, 0)`.
    pub g1: StaticField,
    /// Initial velocity `∂_t u(·, 0)`.
    pub g2: StaticField,
    pub forcing: Vec<SeparableTerm>,
    pub exact: Option<Vec<SeparableTerm>>,
    /// Analytic `Δ g1`; derived from the factors when absent.
    pub laplacian_g1: Option<StaticField>,
    /// The exact solution does not satisfy the homogeneous boundary condition,
    /// so errors against it are only qualitative.
    pub qualitative_only: bool,
}

impl ProblemSpec {
    /// Checks `2 > α > α_1 > … > α_Q > 0`, `a_j > 0` and `μ > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::invalid("alpha", format!("{} is not in (1, 2)", self.alpha)));
        }
        if self.alphas.len() != self.coeffs.len() {
            return Err(Error::invalid(
                "coeffs",
                format!("{} coefficients for {} orders", self.coeffs.len(), self.alphas.len()),
            ));
        }
        let mut prev = self.alpha;
        for (j, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0 && a < prev) {
                return Err(Error::invalid(
                    format!("alphas[{j}]"),
                    format!("{a} breaks the order chain 2 > alpha > alphas[0] > ... > 0"),
                ));
            }
            prev = a;
        }
        if let Some(j) = self.coeffs.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::invalid(format!("coeffs[{j}]"), "must be positive"));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu", "must be positive"));
        }
        Domain::new(self.domain.x, self.domain.y)?;
        Ok(())
    }

    pub fn f(&self, x: f64, y: f64, t: f64) -> f64 {
        eval_terms(&self.forcing, x, y, t)
    }

    pub fn exact_value(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        self.exact.as_ref().map(|e| eval_terms(e, x, y, t))
    }

    pub fn g1_value(&self, x: f64, y: f64) -> f64 {
        eval_static(&self.g1, x, y)
    }

    pub fn g2_value(&self, x: f64, y: f64) -> f64 {
        eval_static(&self.g2, x, y)
    }

    /// Maximum `|exact|` over `samples` points per boundary edge at time `t`.
    pub fn boundary_mismatch(&self, t: f64, samples: usize) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let Domain { x: (a, b), y: (c, d) } = self.domain;
        let n = samples.max(2);
        let mut worst = 0.0f64;
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let x = a + s * (b - a);
            let y = c + s * (d - c);
            for (px, py) in [(x, c), (x, d), (a, y), (b, y)] {
                worst = worst.max(eval_terms(exact, px, py, t).abs());
            }
        }
        Some(worst)
    }

    /// Number of orders strictly above 1 (an order equal to 1 counts as a plain
    /// first derivative and is excluded).
    pub fn count_wave_orders(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > 1.0).count()
    }

    /// Same problem with `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        let swap_terms = |terms: &[SeparableTerm]| -> Vec<SeparableTerm> {
            terms
                .iter()
                .map(|t| SeparableTerm {
                    time: t.time.clone(),
                    space: t.space.swapped(),
                })
                .collect()
        };
        let swap_static = |f: &StaticField| -> StaticField {
            f.iter().map(|(c, s)| (*c, s.swapped())).collect()
        };
        Self {
            name: format!("{}_swapped", self.name),
            domain: self.domain.swapped(),
            g1: swap_static(&self.g1),
            g2: swap_static(&self.g2),
            forcing: swap_terms(&self.forcing),
            exact: self.exact.as_ref().map(|e| swap_terms(e)),
            laplacian_g1: self.laplacian_g1.as_ref().map(swap_static),
            ..self.clone()
        }
    }
}

/// Identifiers accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 5] = [
    "example_6_1",
    "example_6_2",
    "compatible_smooth",
    "compatible_nonsmooth",
    "nonsmooth_low_frequency",
];

pub fn by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "example_6_1" => Ok(example_6_1()),
        "example_6_2" => Ok(example_6_2()),
        "compatible_smooth" => Ok(compatible_smooth()),
        "compatible_nonsmooth" => Ok(compatible_nonsmooth()),
        "nonsmooth_low_frequency" => Ok(nonsmooth_low_frequency()),
        other => Err(Error::invalid(
            "problem",
            format!("unknown problem `{other}` (known: {})", PROBLEM_NAMES.join(", ")),
        )),
    }
}

/// `u = t³ exp(-(x² + y²))` on (-2,1)×(-1,2), forcing as published.
///
/// The published forcing carries the exponents `t^{1.3}` and `t^{2.2}` where
/// the Caputo derivatives of `t³` give `t^{1.5}` and `t^{2.6}`, and the exact
/// solution does not vanish on the boundary; both make this problem
/// qualitative only.
pub fn example_6_1() -> ProblemSpec {
    let g4 = gamma(4.0);
    ProblemSpec {
        name: "example_6_1".into(),
        alpha: 1.5,
        alphas: vec![1.0, 0.4],
        coeffs: vec![1.0, 1.0],
        mu: 2.0,
        domain: Domain {
            x: (-2.0, 1.0),
            y: (-1.0, 2.0),
        },
        g1: Vec::new(),
        g2: Vec::new(),
        forcing: vec![
            SeparableTerm::power(
                vec![
                    (g4 / gamma(2.5), 1.3),
                    (g4 / gamma(3.6), 2.2),
                    (3.0, 2.0),
                ],
                SpatialFactor::gaussian(),
            ),
            SeparableTerm::power(
                vec![(8.0, 3.0)],
                SpatialFactor::GaussianPoly {
                    coeffs: vec![1.0, -1.0],
                },
            ),
        ],
        exact: Some(vec![SeparableTerm::power(
            vec![(1.0, 3.0)],
            SpatialFactor::gaussian(),
        )]),
        laplacian_g1: None,
        qualitative_only: true,
    }
}

fn power_sum_profile() -> Vec<(f64, f64)> {
    let mut terms: Vec<(f64, f64)> = (1..=6)
        .map(|k| (1.0 / (k as f64 + 1.0), 1.0 + 0.1 * k as f64))
        .collect();
    terms.push((2.0, 0.0));
    terms
}

/// Forcing time profile of the power-sum solution for the equation
/// `C D^{1.1} u + ∂_t u + C D^{0.1} u = 2Δu + f` and a spatial factor with
/// `Δ s = -lap · s`.
fn power_sum_forcing(lap: f64) -> Vec<(f64, f64)> {
    let mut terms = Vec::new();
    for k in 1..=6 {
        let kf = k as f64;
        let w = kf + 1.0;
        terms.push((gamma(2.0 + 0.1 * kf) / (w * gamma(0.9 + 0.1 * kf)), 0.1 * kf - 0.1));
        terms.push(((1.0 + 0.1 * kf) / w, 0.1 * kf));
        terms.push((gamma(2.0 + 0.1 * kf) / (w * gamma(1.9 + 0.1 * kf)), 0.1 * kf + 0.9));
    }
    let mu = 2.0;
    for (c, e) in power_sum_profile() {
        terms.push((mu * lap * c, e));
    }
    terms
}

/// Non-smooth power-sum solution `(Σ_{k=1}^6 t^{1+0.1k}/(k+1) + 2) sin x sin y`
/// on (-2,1)×(-1,2).
pub fn example_6_2() -> ProblemSpec {
    let s = SpatialFactor::Sines { wx: 1.0, wy: 1.0 };
    ProblemSpec {
        name: "example_6_2".into(),
        alpha: 1.1,
        alphas: vec![1.0, 0.1],
        coeffs: vec![1.0, 1.0],
        mu: 2.0,
        domain: Domain {
            x: (-2.0, 1.0),
            y: (-1.0, 2.0),
        },
        g1: vec![(2.0, s.clone())],
        g2: Vec::new(),
        forcing: vec![SeparableTerm::power(power_sum_forcing(2.0), s.clone())],
        exact: Some(vec![SeparableTerm::power(power_sum_profile(), s.clone())]),
        laplacian_g1: Some(vec![(-4.0, s)]),
        qualitative_only: true,
    }
}

/// `u = t³ sin(πx) sin(πy)` on (-1,1)² with the orders of the smooth example.
pub fn compatible_smooth() -> ProblemSpec {
    let s = SpatialFactor::Sines { wx: PI, wy: PI };
    let g4 = gamma(4.0);
    let (alpha, mu) = (1.5, 2.0);
    ProblemSpec {
        name: "compatible_smooth".into(),
        alpha,
        alphas: vec![1.0, 0.4],
        coeffs: vec![1.0, 1.0],
        mu,
        domain: Domain::REFERENCE,
        g1: Vec::new(),
        g2: Vec::new(),
        forcing: vec![SeparableTerm::power(
            vec![
                (g4 / gamma(2.5), 1.5),
                (g4 / gamma(3.0), 2.0),
                (g4 / gamma(3.6), 2.6),
                (2.0 * mu * PI * PI, 3.0),
            ],
            s.clone(),
        )],
        exact: Some(vec![SeparableTerm::power(vec![(1.0, 3.0)], s)]),
        laplacian_g1: None,
        qualitative_only: false,
    }
}

/// Power-sum solution of the non-smooth example times `sin(πx) sin(πy)` on (-1,1)².
pub fn compatible_nonsmooth() -> ProblemSpec {
    let s = SpatialFactor::Sines { wx: PI, wy: PI };
    let lap = 2.0 * PI * PI;
    ProblemSpec {
        name: "compatible_nonsmooth".into(),
        alpha: 1.1,
        alphas: vec![1.0, 0.1],
        coeffs: vec![1.0, 1.0],
        mu: 2.0,
        domain: Domain::REFERENCE,
        g1: vec![(2.0, s.clone())],
        g2: Vec::new(),
        forcing: vec![SeparableTerm::power(power_sum_forcing(lap), s.clone())],
        exact: Some(vec![SeparableTerm::power(power_sum_profile(), s.clone())]),
        laplacian_g1: Some(vec![(-2.0 * lap, s)]),
        qualitative_only: false,
    }
}

/// The power-sum solution times `sin x sin y` on (0,π)², where the Laplacian
/// eigenvalue is 2 instead of 2π², so the ADI perturbation stays small next
/// to the non-smooth time error.
pub fn nonsmooth_low_frequency() -> ProblemSpec {
    let s = SpatialFactor::Sines { wx: 1.0, wy: 1.0 };
    let lap = 2.0;
    ProblemSpec {
        name: "nonsmooth_low_frequency".into(),
        domain: Domain {
            x: (0.0, PI),
            y: (0.0, PI),
        },
        g1: vec![(2.0, s.clone())],
        forcing: vec![SeparableTerm::power(power_sum_forcing(lap), s.clone())],
        exact: Some(vec![SeparableTerm::power(power_sum_profile(), s.clone())]),
        laplacian_g1: Some(vec![(-2.0 * lap, s)]),
        ..compatible_nonsmooth()
    }
}

/// Temporal exponents of the non-smooth solutions.
pub fn nonsmooth_exponents() -> Vec<f64> {
    (1..=6).map(|k| 1.0 + 0.1 * k as f64).collect()
}
