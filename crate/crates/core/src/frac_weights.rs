//! Discrete fractional operators on a uniform time grid.
//!
//! The Riemann-Liouville operator of order `β ∈ [-1, 1]` is approximated by the
//! weighted and shifted Grünwald formula
//!
//! ```text
//! D_τ^{β,n} u = τ^{-β} Σ_{j=0}^{n} λ_j^{(β)} u^{n-j}
//! ```
//!
//! with `λ_0 = (1 + β/2) g_0`, `λ_j = (1 + β/2) g_j - (β/2) g_{j-1}` and
//! `g_j = (-1)^j binom(β, j)`. For solutions that behave like `t^σ` near the
//! origin the second-order accuracy is lost; [`CorrectionSet`] holds the
//! starting weights that restore exactness on a chosen list of powers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest number of correction terms accepted by [`StartingSystem`].
pub const MAX_CORRECTIONS: usize = 6;

/// Condition estimates above this are reported as [`Error::IllConditioned`].
const MAX_CONDITION: f64 = 1e13;

pub use statrs::function::gamma::gamma;

fn check_order(order: f64) -> Result<()> {
    if order.is_finite() && (-1.0..=1.0).contains(&order) {
        Ok(())
    } else {
        Err(Error::OrderOutOfRange(order))
    }
}

/// Coefficient `c` in `RL D^{order} t^σ = c · t^{σ - order}`, i.e.
/// `Γ(σ+1) / Γ(σ+1-order)`.
///
/// Returns 0 when `σ + 1 - order` is a pole of Γ (e.g. the first derivative of a
/// constant).
pub fn rl_power_coefficient(exponent: f64, order: f64) -> f64 {
    let denom_arg = exponent + 1.0 - order;
    if denom_arg <= 0.0 && (denom_arg - denom_arg.round()).abs() < 1e-14 {
        return 0.0;
    }
    gamma(exponent + 1.0) / gamma(denom_arg)
}

/// Exact Riemann-Liouville derivative (or integral, for negative order) of `t^σ`.
pub fn rl_power(exponent: f64, order: f64, t: f64) -> f64 {
    let c = rl_power_coefficient(exponent, order);
    if c == 0.0 {
        0.0
    } else {
        c * t.powf(exponent - order)
    }
}

/// Caputo derivative of `t^σ` of positive order.
///
/// Differs from [`rl_power`] only for integer exponents below `ceil(order)`,
/// whose Caputo derivative vanishes.
pub fn caputo_power(exponent: f64, order: f64, t: f64) -> f64 {
    if order <= 0.0 {
        return rl_power(exponent, order, t);
    }
    let is_integer = (exponent - exponent.round()).abs() < 1e-14;
    if is_integer && exponent < order.ceil() {
        return 0.0;
    }
    rl_power(exponent, order, t)
}

/// Grünwald coefficients `g_0..g_count` of `(1 - z)^order`.
pub fn binomial_weights(order: f64, count: usize) -> Result<Vec<f64>> {
    check_order(order)?;
    if count == 0 {
        return Err(Error::invalid("count", "must be at least 1"));
    }
    let mut raw = Vec::with_capacity(count + 1);
    raw.push(1.0);
    for j in 1..=count {
        let prev = raw[j - 1];
        raw.push((1.0 - (order + 1.0) / j as f64) * prev);
    }
    Ok(raw)
}

/// Shifted Grünwald weights for one fractional order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    order: f64,
    weights: Vec<f64>,
    raw: Vec<f64>,
}

impl WeightSequence {
    pub fn new(order: f64, count: usize) -> Result<Self> {
        let raw = binomial_weights(order, count)?;
        let scale = 1.0 + order / 2.0;
        let shift = order / 2.0;
        let weights = raw
            .iter()
            .enumerate()
            .map(|(j, &g)| {
                if j == 0 {
                    scale * g
                } else {
                    scale * g - shift * raw[j - 1]
                }
            })
            .collect();
        Ok(Self {
            order,
            weights,
            raw,
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// `λ_0..λ_n`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `g_0..g_n`.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Index of the last stored weight.
    pub fn count(&self) -> usize {
        self.weights.len() - 1
    }

    /// `D_τ^{β,n} u` for `history = u^0..u^n`.
    ///
    /// # Panics
    /// If the history is longer than the stored weights.
    pub fn apply(&self, step: f64, history: &[f64]) -> f64 {
        assert!(
            history.len() <= self.weights.len(),
            "history of length {} exceeds {} stored weights",
            history.len(),
            self.weights.len()
        );
        let n = history.len() - 1;
        let sum = compensated_sum(
            self.weights[..=n]
                .iter()
                .zip(history.iter().rev())
                .map(|(w, u)| w * u),
        );
        step.powf(-self.order) * sum
    }
}

/// `λ_0..λ_count` for the given order.
pub fn shifted_weights(order: f64, count: usize) -> Result<WeightSequence> {
    WeightSequence::new(order, count)
}

/// `D_τ^{order,n} u` where `history = u^0..u^n`.
pub fn apply_gl(order: f64, step: f64, history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::invalid("history", "must hold at least u^0"));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("step", "time step must be positive"));
    }
    let seq = WeightSequence::new(order, history.len().max(2) - 1)?;
    Ok(seq.apply(step, history))
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Validated list of correction exponents `0 < σ_1 < … < σ_m`, `m ≤ 6`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exponents(Vec<f64>);

impl Exponents {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() > MAX_CORRECTIONS {
            return Err(Error::invalid(
                "sigma",
                format!("at most {MAX_CORRECTIONS} correction exponents are supported"),
            ));
        }
        if values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("sigma", "exponents must be positive"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sigma", "exponents must be strictly increasing"));
        }
        Ok(Self(values))
    }

    /// `1.1, 1.2, …` (the power set of the non-smooth test solutions).
    pub fn default_for(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| 1.1 + 0.1 * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The factored scaled Vandermonde system `A_{p,j} = j^{σ_p}` (`j = 1..m`)
/// shared by all three starting-weight families.
///
/// Right-hand sides are scaled by `τ^{-σ_p}`, after which they depend on the
/// row index only, so the weights themselves are independent of `τ`.
#[derive(Debug, Clone)]
pub struct StartingSystem {
    exponents: Exponents,
    matrix: DMatrix<f64>,
    lu: Option<nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    condition: f64,
}

impl StartingSystem {
    pub fn new(exponents: &Exponents) -> Result<Self> {
        let m = exponents.len();
        let matrix = DMatrix::from_fn(m, m, |p, j| ((j + 1) as f64).powf(exponents.0[p]));
        if m == 0 {
            return Ok(Self {
                exponents: exponents.clone(),
                matrix,
                lu: None,
                condition: 1.0,
            });
        }
        let lu = matrix.clone().full_piv_lu();
        let condition = match lu.try_inverse() {
            Some(inv) => one_norm(&matrix) * one_norm(&inv),
            None => f64::INFINITY,
        };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        Ok(Self {
            exponents: exponents.clone(),
            matrix,
            lu: Some(lu),
            condition,
        })
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    /// 1-norm condition estimate of the scaled system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn m(&self) -> usize {
        self.exponents.len()
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        match &self.lu {
            None => Vec::new(),
            Some(lu) => {
                let b = DVector::from_vec(rhs);
                // Invertibility was established in `new`.
                lu.solve(&b)
                    .expect("starting-weight system verified nonsingular")
                    .iter()
                    .copied()
                    .collect()
            }
        }
    }

    /// Scaled right-hand side of the fractional family at `row` (exactness at `t_{row+1}`).
    pub fn frac_rhs(&self, weights: &WeightSequence, row: usize) -> Vec<f64> {
        let n = row + 1;
        assert!(weights.count() >= n, "weights too short for row {row}");
        let beta = weights.order();
        self.exponents
            .0
            .iter()
            .map(|&s| {
                let exact = rl_power_coefficient(s, beta) * (n as f64).powf(s - beta);
                let discrete = compensated_sum(
                    weights.weights()[..=n]
                        .iter()
                        .enumerate()
                        .map(|(i, l)| l * ((n - i) as f64).powf(s)),
                );
                exact - discrete
            })
            .collect()
    }

    /// Scaled right-hand side of the central-difference family at `row`.
    pub fn delta_rhs(&self, row: usize) -> Vec<f64> {
        let k = row as f64;
        self.exponents
            .0
            .iter()
            .map(|&s| {
                // d/dt t^s at t = 0: 1 for s = 1, else taken as 0
                let left = match row {
                    0 if s == 1.0 => 1.0,
                    0 => 0.0,
                    _ => s * k.powf(s - 1.0),
                };
                let right = s * (k + 1.0).powf(s - 1.0);
                0.5 * (left + right) - ((k + 1.0).powf(s) - k.powf(s))
            })
            .collect()
    }

    /// Scaled right-hand side of the perturbation family at `row`.
    pub fn perturb_rhs(&self, row: usize) -> Vec<f64> {
        let k = row as f64;
        self.exponents
            .0
            .iter()
            .map(|&s| -((k + 1.0).powf(s) - k.powf(s)))
            .collect()
    }

    pub fn frac_row(&self, weights: &WeightSequence, row: usize) -> Vec<f64> {
        self.solve(self.frac_rhs(weights, row))
    }

    pub fn delta_row(&self, row: usize) -> Vec<f64> {
        self.solve(self.delta_rhs(row))
    }

    pub fn perturb_row(&self, row: usize) -> Vec<f64> {
        self.solve(self.perturb_rhs(row))
    }

    /// Scaled backward error `max_p |A w - b|_p / max(1, |b_p|, Σ_j |w_j| j^{σ_p})`.
    pub fn residual(&self, weights: &[f64], rhs: &[f64]) -> f64 {
        let m = self.m();
        (0..m)
            .map(|p| {
                let mut acc = 0.0;
                let mut scale = rhs[p].abs().max(1.0);
                let mut abs_sum = 0.0;
                for j in 0..m {
                    let term = self.matrix[(p, j)] * weights[j];
                    acc += term;
                    abs_sum += term.abs();
                }
                scale = scale.max(abs_sum);
                (acc - rhs[p]).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn checked_system(exponents: &[f64], step: f64) -> Result<StartingSystem> {
    if !(step > 0.0) {
        return Err(Error::invalid("step", "time step must be positive"));
    }
    StartingSystem::new(&Exponents::new(exponents.to_vec())?)
}

/// Starting weights `w_{row,1..m}^{(order)}` making the corrected operator exact
/// on `t^{σ_p}` at `t_{row+1}`.
pub fn starting_weights_frac(
    order: f64,
    exponents: &[f64],
    row: usize,
    step: f64,
) -> Result<Vec<f64>> {
    let system = checked_system(exponents, step)?;
    let weights = WeightSequence::new(order, row + 1)?;
    Ok(system.frac_row(&weights, row))
}

/// Starting weights `w_{row,1..m}` of the corrected central difference.
pub fn starting_weights_delta(exponents: &[f64], row: usize, step: f64) -> Result<Vec<f64>> {
    Ok(checked_system(exponents, step)?.delta_row(row))
}

/// Starting weights `W_{row,1..m}` of the corrected perturbation term.
pub fn starting_weights_perturb(exponents: &[f64], row: usize, step: f64) -> Result<Vec<f64>> {
    Ok(checked_system(exponents, step)?.perturb_row(row))
}

/// All starting weights needed by a corrected run, tabulated for rows `0..rows`.
#[derive(Debug, Clone)]
pub struct CorrectionSet {
    exponents: Exponents,
    orders: Vec<f64>,
    frac_weights_by_row: Vec<Vec<Vec<f64>>>,
    delta_weights_by_row: Vec<Vec<f64>>,
    perturb_weights_by_row: Vec<Vec<f64>>,
}

impl CorrectionSet {
    /// An empty set (`m = 0`): every corrected operator reduces to the plain one.
    pub fn empty() -> Self {
        Self {
            exponents: Exponents(Vec::new()),
            orders: Vec::new(),
            frac_weights_by_row: Vec::new(),
            delta_weights_by_row: Vec::new(),
            perturb_weights_by_row: Vec::new(),
        }
    }

    /// Tabulates rows `0..rows` for every order in `weights` (one fractional
    /// family per order, in the given sequence).
    pub fn build(exponents: &Exponents, weights: &[&WeightSequence], rows: usize) -> Result<Self> {
        if exponents.is_empty() {
            return Ok(Self::empty());
        }
        let system = StartingSystem::new(exponents)?;
        let frac_weights_by_row = weights
            .iter()
            .map(|seq| (0..rows).map(|row| system.frac_row(seq, row)).collect())
            .collect();
        Ok(Self {
            exponents: exponents.clone(),
            orders: weights.iter().map(|w| w.order()).collect(),
            frac_weights_by_row,
            delta_weights_by_row: (0..rows).map(|r| system.delta_row(r)).collect(),
            perturb_weights_by_row: (0..rows).map(|r| system.perturb_row(r)).collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn rows(&self) -> usize {
        self.delta_weights_by_row.len()
    }

    pub fn frac(&self, family: usize, row: usize) -> &[f64] {
        &self.frac_weights_by_row[family][row]
    }

    pub fn delta(&self, row: usize) -> &[f64] {
        &self.delta_weights_by_row[row]
    }

    pub fn perturb(&self, row: usize) -> &[f64] {
        &self.perturb_weights_by_row[row]
    }
}
