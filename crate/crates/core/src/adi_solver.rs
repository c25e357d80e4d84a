//! Time stepping for the order-reduced equation
//!
//! ```text
//! ∂_t u + Σ_i a_i RL D^{β_i} u = μ RL D^{-β} Δu + g,   u(·,0) = 0,
//! ```
//!
//! with `β = α - 1` and `β_i = α_i - α + 1`. Each step solves
//!
//! ```text
//! (p J_x M + q/(p J_x) S) U^{k+1} (p J_y M + q/(p J_y) S) = F^k
//! ```
//!
//! by one column sweep and one row sweep. `F^k` collects the previous level,
//! the Grünwald history sums, the half-step source and the ADI perturbation.
//! With correction exponents the starting-weight terms are folded into `F^k`;
//! the sweep operators never change.

use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frac_weights::{CorrectionSet, Exponents, WeightSequence};
use crate::problems::{
    eval_static, Domain, PowerSeries, ProblemSpec, ScalarFn1, SeparableTerm, SpatialFactor,
    StaticField, TimeProfile,
};
use crate::spectral_basis::{
    mass_form, mass_stiffness_form, project_samples, sample_on_quadrature,
    stiffness_mass_form, stiffness_stiffness_form, ModalField2D, SpectralBasis1D,
    DEFAULT_EXTRA_QUADRATURE,
};
use crate::spectral_basis::AddScaled;
use crate::tridiag::SweepSystem;

/// Default refinement of the bootstrap run that produces `U^1..U^m`.
pub const DEFAULT_BOOTSTRAP_RATIO: usize = 100;

/// Time factor of one source term of the reduced equation.
#[derive(Clone)]
pub enum SourceTime {
    Power(PowerSeries),
    /// `RL D^{-order} f` evaluated by the Grünwald sum of order `-order` on grid samples of `f`.
    GlIntegral { f: ScalarFn1, order: f64 },
}

impl std::fmt::Debug for SourceTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceTime::Power(p) => f.debug_tuple("Power").field(p).finish(),
            SourceTime::GlIntegral { order, .. } => write!(f, "GlIntegral {{ order: {order} }}"),
        }
    }
}

impl SourceTime {
    /// Values at `t_n = nτ`, `n = 0..=steps`.
    pub fn grid_values(&self, tau: f64, steps: usize) -> Result<Vec<f64>> {
        match self {
            SourceTime::Power(p) => Ok((0..=steps).map(|n| p.eval(n as f64 * tau)).collect()),
            SourceTime::GlIntegral { f, order } => {
                let samples: Vec<f64> = (0..=steps).map(|n| f(n as f64 * tau)).collect();
                let weights = WeightSequence::new(-order, steps.max(1))?;
                Ok((0..=steps)
                    .map(|n| weights.apply(tau, &samples[..=n]))
                    .collect())
            }
        }
    }
}

/// One separable term `time(t) · space(x, y)` of the reduced source `g`.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    pub time: SourceTime,
    pub space: SpatialFactor,
}

/// The order-reduced problem for `ũ = u - g1`.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub beta: f64,
    pub betas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub mu: f64,
    pub domain: Domain,
    pub source: Vec<SourceTerm>,
    /// `g1`, added back when comparing with the untransformed solution.
    pub lift: StaticField,
    /// Exact solution of the original problem, if known.
    pub exact: Option<Vec<SeparableTerm>>,
}

/// Applies `RL D^{-β}` to the forcing and builds the reduced source
/// `g = g2 + Σ_{α_j > 1} a_j g2 t^{α-α_j}/Γ(α-α_j+1) + RL D^{-β}(f + μ Δg1)`.
pub fn reduce_order(problem: &ProblemSpec) -> Result<TransformedProblem> {
    problem.validate()?;
    let alpha = problem.alpha;
    let beta = alpha - 1.0;
    let betas: Vec<f64> = problem.alphas.iter().map(|a| a - alpha + 1.0).collect();

    let mut source = Vec::new();

    if !problem.g2.is_empty() {
        let mut profile = vec![(1.0, 0.0)];
        for (&a_j, &c) in problem.alphas.iter().zip(&problem.coeffs) {
            if a_j > 1.0 {
                let e = alpha - a_j;
                profile.push((c / crate::frac_weights::gamma(e + 1.0), e));
            }
        }
        for (c, factor) in &problem.g2 {
            let scaled = profile.iter().map(|&(k, e)| (c * k, e)).collect();
            source.push(SourceTerm {
                time: SourceTime::Power(PowerSeries::new(scaled)),
                space: factor.clone(),
            });
        }
    }

    for term in &problem.forcing {
        let time = match &term.time {
            TimeProfile::Power(p) => {
                if let Some(&(_, e)) = p.terms().iter().find(|(_, e)| *e < 0.0) {
                    return Err(Error::invalid(
                        "forcing",
                        format!("negative time exponent {e} is not supported"),
                    ));
                }
                SourceTime::Power(p.rl_integral(beta))
            }
            TimeProfile::Sampled(f) => SourceTime::GlIntegral {
                f: f.clone(),
                order: beta,
            },
        };
        source.push(SourceTerm {
            time,
            space: term.space.clone(),
        });
    }

    if !problem.g1.is_empty() {
        let lap: StaticField = match &problem.laplacian_g1 {
            Some(l) => l.clone(),
            None => problem
                .g1
                .iter()
                .map(|(c, f)| {
                    f.laplacian()
                        .map(|(s, g)| (c * s, g))
                        .ok_or_else(|| Error::invalid("laplacian_g1", "required when g1 has no analytic Laplacian"))
                })
                .collect::<Result<_>>()?,
        };
        let integral = PowerSeries::constant(problem.mu).rl_integral(beta);
        for (c, factor) in lap {
            let scaled = integral.terms().iter().map(|&(k, e)| (c * k, e)).collect();
            source.push(SourceTerm {
                time: SourceTime::Power(PowerSeries::new(scaled)),
                space: factor,
            });
        }
    }

    Ok(TransformedProblem {
        beta,
        betas,
        coeffs: problem.coeffs.clone(),
        mu: problem.mu,
        domain: problem.domain,
        source,
        lift: problem.g1.clone(),
        exact: problem.exact.clone(),
    })
}

/// `RL D^{-β} f (t_n)` from samples `f(t_0)..f(t_n)` by the Grünwald sum of order `-β`.
pub fn fractional_integral_of_f(samples: &[f64], beta: f64, tau: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", format!("{beta} is not in (0, 1)")));
    }
    crate::frac_weights::apply_gl(-beta, tau, samples)
}

/// Step-independent scalars of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationParams {
    pub beta: f64,
    pub betas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub mu: f64,
    pub tau: f64,
    pub steps: usize,
    /// `p² = 1 + ½ Σ a_i λ_0^{(β_i)} τ^{1-β_i}`.
    pub p_squared: f64,
    /// `q = (μ/2) λ_0^{(-β)} τ^{1+β}`.
    pub q: f64,
    pub jx: f64,
    pub jy: f64,
}

impl DiscretizationParams {
    pub fn new(problem: &TransformedProblem, tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid("tau", "time step must be positive"));
        }
        if !(problem.beta > -1.0 && problem.beta < 1.0) {
            return Err(Error::OrderOutOfRange(problem.beta));
        }
        if let Some(&b) = problem.betas.iter().find(|b| !(**b > -1.0 && **b <= 1.0)) {
            return Err(Error::OrderOutOfRange(b));
        }
        if problem.coeffs.len() != problem.betas.len() {
            return Err(Error::invalid("coeffs", "one coefficient per order required"));
        }
        if tau >= 1.0 {
            warn!("time step {tau} >= 1: outside the unconditional stability hypothesis");
        }
        let p_squared = 1.0
            + 0.5
                * problem
                    .betas
                    .iter()
                    .zip(&problem.coeffs)
                    .map(|(b, a)| a * (1.0 + b / 2.0) * tau.powf(1.0 - b))
                    .sum::<f64>();
        let q = 0.5 * problem.mu * (1.0 - problem.beta / 2.0) * tau.powf(1.0 + problem.beta);
        let (ax, bx) = problem.domain.x;
        let (ay, by) = problem.domain.y;
        Ok(Self {
            beta: problem.beta,
            betas: problem.betas.clone(),
            coeffs: problem.coeffs.clone(),
            mu: problem.mu,
            tau,
            steps,
            p_squared,
            q,
            jx: 0.5 * (bx - ax),
            jy: 0.5 * (by - ay),
        })
    }

    pub fn p(&self) -> f64 {
        self.p_squared.sqrt()
    }

    /// `q²/p²`, the ADI perturbation coefficient.
    pub fn perturbation(&self) -> f64 {
        self.q * self.q / self.p_squared
    }
}

/// Coefficient history `U^0..U^k` of the reduced solution.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub history: Vec<DMatrix<f64>>,
}

impl SolverState {
    /// `U^0 = 0`.
    pub fn new(dim_x: usize, dim_y: usize) -> Self {
        Self {
            history: vec![DMatrix::zeros(dim_x, dim_y)],
        }
    }

    pub fn time_index(&self) -> usize {
        self.history.len() - 1
    }

    pub fn current(&self) -> &DMatrix<f64> {
        self.history.last().expect("history always holds U^0")
    }
}

/// All step-independent data of one run: weights, factorizations and projected sources.
#[derive(Debug, Clone)]
pub struct Solver {
    params: DiscretizationParams,
    basis_x: Arc<SpectralBasis1D>,
    basis_y: Arc<SpectralBasis1D>,
    frac_weights: Vec<WeightSequence>,
    diffusion_weights: WeightSequence,
    /// `c_j = ½ Σ_i a_i τ^{1-β_i} (λ_{j+1}^{(β_i)} + λ_j^{(β_i)})`.
    mass_history: Vec<f64>,
    /// `d_j = (μ/2) τ^{1+β} (λ_{j+1}^{(-β)} + λ_j^{(-β)})`.
    stiffness_history: Vec<f64>,
    sweep_x: SweepSystem,
    sweep_y: SweepSystem,
    loads: Vec<DMatrix<f64>>,
    source_times: Vec<Vec<f64>>,
    source_gram: DMatrix<f64>,
    corrections: CorrectionSet,
}

impl Solver {
    /// Sets up a run of `steps` steps of size `tau`. A non-empty `exponents`
    /// list enables the corrected scheme for steps `k ≥ m`.
    pub fn new(
        problem: &TransformedProblem,
        basis_x: Arc<SpectralBasis1D>,
        basis_y: Arc<SpectralBasis1D>,
        tau: f64,
        steps: usize,
        exponents: Option<&Exponents>,
    ) -> Result<Self> {
        let params = DiscretizationParams::new(problem, tau, steps)?;
        check_basis_domain(&basis_x, problem.domain.x, "x")?;
        check_basis_domain(&basis_y, problem.domain.y, "y")?;
        let count = steps + 1;
        let frac_weights = params
            .betas
            .iter()
            .map(|&b| WeightSequence::new(b, count))
            .collect::<Result<Vec<_>>>()?;
        let diffusion_weights = WeightSequence::new(-params.beta, count)?;

        let mass_history = (0..=steps)
            .map(|j| {
                0.5 * frac_weights
                    .iter()
                    .zip(&params.coeffs)
                    .map(|(w, a)| {
                        let l = w.weights();
                        a * tau.powf(1.0 - w.order()) * (l[j + 1] + l[j])
                    })
                    .sum::<f64>()
            })
            .collect();
        let stiff_scale = 0.5 * params.mu * tau.powf(1.0 + params.beta);
        let stiffness_history = (0..=steps)
            .map(|j| {
                let l = diffusion_weights.weights();
                stiff_scale * (l[j + 1] + l[j])
            })
            .collect();

        let p = params.p();
        let sweep_x = SweepSystem::new(&basis_x, p * params.jx, params.q / (p * params.jx))?;
        let sweep_y = SweepSystem::new(&basis_y, p * params.jy, params.q / (p * params.jy))?;

        let grids: Vec<DMatrix<f64>> = problem
            .source
            .iter()
            .map(|s| sample_on_quadrature(&|x, y| s.space.eval(x, y), &basis_x, &basis_y))
            .collect();
        let loads = grids
            .iter()
            .map(|g| project_samples(g, &basis_x, &basis_y))
            .collect();
        let r = grids.len();
        let source_gram = DMatrix::from_fn(r, r, |a, b| {
            crate::spectral_basis::integrate_samples(&grids[a].component_mul(&grids[b]), &basis_x, &basis_y)
        });
        let source_times = problem
            .source
            .iter()
            .map(|s| s.time.grid_values(tau, steps))
            .collect::<Result<Vec<_>>>()?;

        let corrections = match exponents {
            Some(e) if !e.is_empty() => {
                let mut families: Vec<&WeightSequence> = frac_weights.iter().collect();
                families.push(&diffusion_weights);
                CorrectionSet::build(e, &families, steps.max(1))?
            }
            _ => CorrectionSet::empty(),
        };

        Ok(Self {
            params,
            basis_x,
            basis_y,
            frac_weights,
            diffusion_weights,
            mass_history,
            stiffness_history,
            sweep_x,
            sweep_y,
            loads,
            source_times,
            source_gram,
            corrections,
        })
    }

    pub fn params(&self) -> &DiscretizationParams {
        &self.params
    }

    pub fn basis_x(&self) -> &Arc<SpectralBasis1D> {
        &self.basis_x
    }

    pub fn basis_y(&self) -> &Arc<SpectralBasis1D> {
        &self.basis_y
    }

    pub fn frac_weights(&self) -> &[WeightSequence] {
        &self.frac_weights
    }

    pub fn diffusion_weights(&self) -> &WeightSequence {
        &self.diffusion_weights
    }

    pub fn corrections(&self) -> &CorrectionSet {
        &self.corrections
    }

    pub fn sweeps(&self) -> (&SweepSystem, &SweepSystem) {
        (&self.sweep_x, &self.sweep_y)
    }

    pub fn new_state(&self) -> SolverState {
        SolverState::new(self.basis_x.dim(), self.basis_y.dim())
    }

    /// Load matrix `(g^{k+1/2}, φ_l ψ_s)` with `g^{k+1/2} = ½(g(t_k) + g(t_{k+1}))`.
    pub fn source_load(&self, k: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.basis_x.dim(), self.basis_y.dim());
        for (load, times) in self.loads.iter().zip(&self.source_times) {
            let c = 0.5 * (times[k] + times[k + 1]);
            if c != 0.0 {
                out.add_scaled(c, load);
            }
        }
        out
    }

    /// `‖g^{k+1/2}‖_{L²}`.
    pub fn source_norm(&self, k: usize) -> f64 {
        let v = nalgebra::DVector::from_iterator(
            self.source_times.len(),
            self.source_times.iter().map(|t| 0.5 * (t[k] + t[k + 1])),
        );
        (v.dot(&(&self.source_gram * &v))).max(0.0).sqrt()
    }

    /// `J_xJ_y M A M + (J_y/J_x) S B M + (J_x/J_y) M B S + (q²/p²)/(J_xJ_y) S C S`.
    pub fn apply_forms(
        &self,
        mass_part: &DMatrix<f64>,
        stiffness_part: &DMatrix<f64>,
        cross_part: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let (bx, by) = (&*self.basis_x, &*self.basis_y);
        let DiscretizationParams { jx, jy, .. } = self.params;
        let mut out = mass_form(bx, by, mass_part) * (jx * jy);
        out.add_scaled(jy / jx, &stiffness_mass_form(bx, by, stiffness_part));
        out.add_scaled(jx / jy, &mass_stiffness_form(bx, by, stiffness_part));
        let cross = self.params.perturbation() / (jx * jy);
        if cross != 0.0 {
            out.add_scaled(cross, &stiffness_stiffness_form(bx, by, cross_part));
        }
        out
    }

    /// `Σ_{j=0}^{k} coeffs[j] U^{k-j}`.
    fn history_sum(history: &[DMatrix<f64>], coeffs: &[f64]) -> DMatrix<f64> {
        let k = history.len() - 1;
        let mut acc = DMatrix::zeros(history[0].nrows(), history[0].ncols());
        for j in 0..=k {
            let c = coeffs[j];
            if c != 0.0 {
                acc.add_scaled(c, &history[k - j]);
            }
        }
        acc
    }

    /// Right-hand side `F^k` of the uncorrected scheme for the step `k → k+1`.
    pub fn assemble_rhs(&self, state: &SolverState, load: &DMatrix<f64>) -> DMatrix<f64> {
        let (mass_part, stiffness_part, cross_part) = self.history_parts(state);
        let mut rhs = self.apply_forms(&mass_part, &stiffness_part, &cross_part);
        rhs.add_scaled(self.params.tau, load);
        rhs
    }

    fn history_parts(&self, state: &SolverState) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let current = state.current();
        let mut mass_part = current.clone();
        mass_part -= Self::history_sum(&state.history, &self.mass_history);
        let stiffness_part = -Self::history_sum(&state.history, &self.stiffness_history);
        (mass_part, stiffness_part, current.clone())
    }

    /// Starting-weight contributions to `F^k` for `k ≥ m` (zero when `m = 0`).
    pub fn correction_rhs(&self, state: &SolverState) -> Result<DMatrix<f64>> {
        let (mass_part, stiffness_part, cross_part) = self.correction_parts(state)?;
        Ok(self.apply_forms(&mass_part, &stiffness_part, &cross_part))
    }

    fn correction_parts(
        &self,
        state: &SolverState,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let m = self.corrections.m();
        let k = state.time_index();
        let (dx, dy) = (self.basis_x.dim(), self.basis_y.dim());
        let mut mass_part = DMatrix::zeros(dx, dy);
        let mut stiffness_part = DMatrix::zeros(dx, dy);
        let mut cross_part = DMatrix::zeros(dx, dy);
        if m == 0 {
            return Ok((mass_part, stiffness_part, cross_part));
        }
        if k < m {
            return Err(Error::MissingStartingValues {
                index: k,
                needed: m,
                available: state.history.len(),
            });
        }
        let tau = self.params.tau;
        let corr = &self.corrections;
        let n_frac = self.frac_weights.len();
        let delta = corr.delta(k);
        let perturb = corr.perturb(k);
        let diff_now = corr.frac(n_frac, k);
        let diff_prev = corr.frac(n_frac, k - 1);
        let stiff_scale = 0.5 * self.params.mu * tau.powf(1.0 + self.params.beta);
        let u0 = &state.history[0];
        for j in 0..m {
            let mut c_mass = delta[j];
            for (i, w) in self.frac_weights.iter().enumerate() {
                let a = self.params.coeffs[i];
                c_mass += 0.5
                    * a
                    * tau.powf(1.0 - w.order())
                    * (corr.frac(i, k)[j] + corr.frac(i, k - 1)[j]);
            }
            let c_stiff = stiff_scale * (diff_now[j] + diff_prev[j]);
            let diff = &state.history[j + 1] - u0;
            mass_part.add_scaled(-c_mass, &diff);
            stiffness_part.add_scaled(-c_stiff, &diff);
            cross_part.add_scaled(-perturb[j], &diff);
        }
        Ok((mass_part, stiffness_part, cross_part))
    }

    /// Solves the two sweeps for `F^k` and appends `U^{k+1}`.
    pub fn adi_step<'s>(&self, state: &'s mut SolverState, mut rhs: DMatrix<f64>) -> &'s DMatrix<f64> {
        self.sweep_x.solve_columns(&mut rhs);
        self.sweep_y.solve_rows(&mut rhs);
        state.history.push(rhs);
        state.current()
    }

    /// [`Solver::adi_step`] with the starting-weight terms added to `F^k`.
    pub fn corrected_step<'s>(
        &self,
        state: &'s mut SolverState,
        rhs: DMatrix<f64>,
    ) -> Result<&'s DMatrix<f64>> {
        if self.corrections.m() == 0 {
            return Ok(self.adi_step(state, rhs));
        }
        let (mass_part, stiffness_part, cross_part) = self.correction_parts(state)?;
        let rhs = rhs + self.apply_forms(&mass_part, &stiffness_part, &cross_part);
        Ok(self.adi_step(state, rhs))
    }

    /// Advances one step, corrected once `k ≥ m`.
    pub fn step(&self, state: &mut SolverState) -> Result<()> {
        let k = state.time_index();
        if k >= self.params.steps {
            return Err(Error::invalid("steps", format!("run already reached step {k}")));
        }
        let load = self.source_load(k);
        if self.corrections.m() == 0 {
            let (mass_part, stiffness_part, cross_part) = self.history_parts(state);
            let mut rhs = self.apply_forms(&mass_part, &stiffness_part, &cross_part);
            rhs.add_scaled(self.params.tau, &load);
            self.adi_step(state, rhs);
            return Ok(());
        }
        let (mut mass_part, mut stiffness_part, mut cross_part) = self.history_parts(state);
        let (cm, cs, cc) = self.correction_parts(state)?;
        mass_part += cm;
        stiffness_part += cs;
        cross_part += cc;
        let mut rhs = self.apply_forms(&mass_part, &stiffness_part, &cross_part);
        rhs.add_scaled(self.params.tau, &load);
        self.adi_step(state, rhs);
        Ok(())
    }
}

fn check_basis_domain(basis: &SpectralBasis1D, interval: (f64, f64), axis: &str) -> Result<()> {
    let (a, b) = basis.interval();
    if (a - interval.0).abs() > 1e-14 * (1.0 + a.abs()) || (b - interval.1).abs() > 1e-14 * (1.0 + b.abs()) {
        return Err(Error::invalid(
            format!("basis_{axis}"),
            format!("basis interval ({a}, {b}) differs from domain ({}, {})", interval.0, interval.1),
        ));
    }
    Ok(())
}

/// Starting values `U^1..U^m` from the uncorrected scheme with step `tau / ratio`.
pub fn bootstrap_starting_values(
    problem: &TransformedProblem,
    basis_x: Arc<SpectralBasis1D>,
    basis_y: Arc<SpectralBasis1D>,
    tau: f64,
    m: usize,
    ratio: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    if ratio == 0 {
        return Err(Error::invalid("bootstrap_ratio", "must be at least 1"));
    }
    let fine_steps = m * ratio;
    let fine = Solver::new(problem, basis_x, basis_y, tau / ratio as f64, fine_steps, None)?;
    let mut state = fine.new_state();
    for _ in 0..fine_steps {
        fine.step(&mut state)?;
    }
    Ok((1..=m).map(|j| state.history[j * ratio].clone()).collect())
}

/// Settings of one time march.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Polynomial degree `N` in both directions.
    pub degree: usize,
    pub steps: usize,
    pub t_final: f64,
    /// Correction exponents; empty for the plain scheme.
    pub exponents: Vec<f64>,
    pub bootstrap_ratio: usize,
    /// Quadrature points beyond `N` for projections and error norms.
    pub extra_quadrature: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            degree: 32,
            steps: 80,
            t_final: 1.0,
            exponents: Vec::new(),
            bootstrap_ratio: DEFAULT_BOOTSTRAP_RATIO,
            extra_quadrature: DEFAULT_EXTRA_QUADRATURE,
        }
    }
}

/// Per-level record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub time: f64,
    /// `‖ũ_N^n‖` of the reduced solution.
    pub l2_norm: f64,
    /// `exp(2T) · 2τ Σ_{k<n} ‖g^{k+1/2}‖²`.
    pub stability_bound: f64,
    /// `‖u_N^n + g1 - u(t_n)‖` when the exact solution is known.
    pub l2_error: Option<f64>,
}

/// Trajectory and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub params: Option<DiscretizationParams>,
    pub basis_x: Arc<SpectralBasis1D>,
    pub basis_y: Arc<SpectralBasis1D>,
    /// `U^0..U^M` of the reduced solution.
    pub history: Vec<DMatrix<f64>>,
    pub lift: StaticField,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl RunResult {
    pub fn times(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.time).collect()
    }

    pub fn final_field(&self) -> ModalField2D {
        ModalField2D::new(
            self.history.last().expect("non-empty history").clone(),
            self.basis_x.clone(),
            self.basis_y.clone(),
        )
    }

    pub fn final_error(&self) -> Option<f64> {
        self.diagnostics.last().and_then(|d| d.l2_error)
    }

    /// Largest L² error over all time levels.
    pub fn max_error(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .map(|d| d.l2_error)
            .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)))
    }

    /// Whether `‖ũ_N^n‖² ≤` bound holds at every level (relative slack 1e-12).
    pub fn stability_holds(&self) -> bool {
        self.diagnostics
            .iter()
            .all(|d| d.l2_norm * d.l2_norm <= d.stability_bound * (1.0 + 1e-12) + 1e-300)
    }

    /// `u_N = ũ_N + g1` on the tensor grid `xs × ys`.
    pub fn sample_solution(&self, xs: &[f64], ys: &[f64]) -> DMatrix<f64> {
        let field = self.final_field();
        let mut values = crate::spectral_basis::evaluate_field(&field, xs, ys);
        if !self.lift.is_empty() {
            for (a, &x) in xs.iter().enumerate() {
                for (b, &y) in ys.iter().enumerate() {
                    values[(a, b)] += eval_static(&self.lift, x, y);
                }
            }
        }
        values
    }
}

/// Reduces `problem`, builds the bases and marches to `t_final`.
pub fn run(problem: &ProblemSpec, options: &RunOptions) -> Result<RunResult> {
    let reduced = reduce_order(problem)?;
    let nq = options.degree + options.extra_quadrature;
    let bx = Arc::new(SpectralBasis1D::new(options.degree, problem.domain.x, nq)?);
    let by = Arc::new(SpectralBasis1D::new(options.degree, problem.domain.y, nq)?);
    run_transformed(&reduced, bx, by, options)
}

/// Time march of an already reduced problem.
pub fn run_transformed(
    problem: &TransformedProblem,
    basis_x: Arc<SpectralBasis1D>,
    basis_y: Arc<SpectralBasis1D>,
    options: &RunOptions,
) -> Result<RunResult> {
    if !(options.t_final > 0.0) {
        return Err(Error::invalid("T", "final time must be positive"));
    }
    let exponents = Exponents::new(options.exponents.clone())?;
    let tracker = ErrorTracker::new(problem, &basis_x, &basis_y);
    let zero = DMatrix::zeros(basis_x.dim(), basis_y.dim());

    if options.steps == 0 {
        let field = ModalField2D::new(zero.clone(), basis_x.clone(), basis_y.clone());
        return Ok(RunResult {
            params: None,
            basis_x,
            basis_y,
            history: vec![zero],
            lift: problem.lift.clone(),
            diagnostics: vec![StepDiagnostics {
                time: 0.0,
                l2_norm: 0.0,
                stability_bound: 0.0,
                l2_error: tracker.as_ref().map(|t| t.error(&field, 0.0)),
            }],
        });
    }

    let m = exponents.len();
    if m > 0 && m > options.steps {
        return Err(Error::invalid(
            "m",
            format!("{m} corrections need at least {m} steps"),
        ));
    }
    let tau = options.t_final / options.steps as f64;
    let solver = Solver::new(
        problem,
        basis_x.clone(),
        basis_y.clone(),
        tau,
        options.steps,
        Some(&exponents),
    )?;
    let mut state = solver.new_state();
    if m > 0 {
        let starts = bootstrap_starting_values(
            problem,
            basis_x.clone(),
            basis_y.clone(),
            tau,
            m,
            options.bootstrap_ratio,
        )?;
        state.history.extend(starts);
    }
    while state.time_index() < options.steps {
        solver.step(&mut state)?;
    }

    let growth = (2.0 * options.t_final).exp() * 2.0 * tau;
    let mut source_acc = Vec::with_capacity(options.steps + 1);
    source_acc.push(0.0);
    for k in 0..options.steps {
        let g = solver.source_norm(k);
        source_acc.push(g * g);
    }
    let mut diagnostics = Vec::with_capacity(options.steps + 1);
    let mut running = 0.0;
    for (n, coeffs) in state.history.iter().enumerate() {
        running = if n == 0 { 0.0 } else { running + source_acc[n] };
        let field = ModalField2D::new(coeffs.clone(), basis_x.clone(), basis_y.clone());
        let time = n as f64 * tau;
        diagnostics.push(StepDiagnostics {
            time,
            l2_norm: field.norm_squared().max(0.0).sqrt(),
            stability_bound: growth * running,
            l2_error: tracker.as_ref().map(|t| t.error(&field, time)),
        });
    }

    Ok(RunResult {
        params: Some(solver.params().clone()),
        basis_x,
        basis_y,
        history: state.history,
        lift: problem.lift.clone(),
        diagnostics,
    })
}

/// Exact solution and lift pre-sampled on the quadrature grid.
struct ErrorTracker {
    lift_grid: DMatrix<f64>,
    exact_grids: Vec<(TimeProfile, DMatrix<f64>)>,
}

impl ErrorTracker {
    fn new(
        problem: &TransformedProblem,
        bx: &SpectralBasis1D,
        by: &SpectralBasis1D,
    ) -> Option<Self> {
        let exact = problem.exact.as_ref()?;
        let lift = &problem.lift;
        let lift_grid = sample_on_quadrature(&|x, y| eval_static(lift, x, y), bx, by);
        let exact_grids = exact
            .iter()
            .map(|term| {
                let s = term.space.clone();
                (term.time.clone(), sample_on_quadrature(&move |x, y| s.eval(x, y), bx, by))
            })
            .collect();
        Some(Self {
            lift_grid,
            exact_grids,
        })
    }

    fn error(&self, field: &ModalField2D, t: f64) -> f64 {
        let mut diff = field.values_at_quadrature() + &self.lift_grid;
        for (time, grid) in &self.exact_grids {
            diff.add_scaled(-time.eval(t), grid);
        }
        let sq = diff.map(|v| v * v);
        crate::spectral_basis::integrate_samples(&sq, &field.basis_x, &field.basis_y).sqrt()
    }
}
