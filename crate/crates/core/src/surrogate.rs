//! Gaussian-process regression with an isotropic Matérn covariance.
//!
//! Outputs are standardised before fitting; the prior has zero mean and unit
//! variance in standardised units.

use log::{debug, warn};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_search::{nelder_mead, NelderMeadSettings};
use crate::sampling::sobol_points;

/// Smallest admissible noise standard deviation.
pub const SIGMA_EPS_MIN: f64 = 1e-8;
pub const SIGMA_EPS_MAX: f64 = 1.0;
pub const ETA_MIN: f64 = 1e-3;
pub const ETA_MAX: f64 = 1e3;
/// Diagonal jitter tried in turn when the kernel matrix does not factorise.
const JITTER: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub const ALL: [Smoothness; 3] = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves];

    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub nu: Smoothness,
    pub eta: f64,
    pub sigma_eps: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self { nu: Smoothness::FiveHalves, eta: 0.2, sigma_eps: SIGMA_EPS_MIN }
    }
}

/// Matérn covariance at distance `r`; unit variance.
pub fn matern(r: f64, nu: Smoothness, eta: f64) -> f64 {
    let r = r.abs();
    match nu {
        Smoothness::Half => (-r / eta).exp(),
        Smoothness::ThreeHalves => {
            let s = 3.0_f64.sqrt() * r / eta;
            (1.0 + s) * (-s).exp()
        }
        Smoothness::FiveHalves => {
            let s = 5.0_f64.sqrt() * r / eta;
            (1.0 + s + s * s / 3.0) * (-s).exp()
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn matern_cov(a: &[f64], b: &[f64], nu: Smoothness, eta: f64) -> f64 {
    matern(distance(a, b), nu, eta)
}

fn kernel_matrix(inputs: &[Vec<f64>], theta: &Hyperparameters) -> DMatrix<f64> {
    let n = inputs.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = matern_cov(&inputs[i], &inputs[j], theta.nu, theta.eta);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Cholesky factor of `C + sigma_eps^2 I`, adding jitter up to `1e-8` if
/// needed. Returns the factor and the jitter used.
fn factorize_kernel(inputs: &[Vec<f64>], theta: &Hyperparameters) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let base = kernel_matrix(inputs, theta);
    let noise = theta.sigma_eps * theta.sigma_eps;
    for jitter in JITTER {
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += noise + jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
    }
    Err(Error::IllConditionedKernel { jitter: JITTER[JITTER.len() - 1] })
}

fn lml_from_factor(ch: &Cholesky<f64, Dyn>, g: &DVector<f64>) -> f64 {
    let n = g.len() as f64;
    let alpha = ch.solve(g);
    let log_det = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * g.dot(&alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// `-1/2 g^T (C + sigma_eps^2 I)^-1 g - 1/2 log|C + sigma_eps^2 I| - n/2 log 2 pi`
/// for the outputs exactly as given.
pub fn log_marginal_likelihood(inputs: &[Vec<f64>], g: &[f64], theta: &Hyperparameters) -> Result<f64> {
    if inputs.len() != g.len() || g.is_empty() {
        return Err(Error::DimensionMismatch { what: "training outputs", expected: inputs.len(), actual: g.len() });
    }
    let (ch, _) = factorize_kernel(inputs, theta)?;
    Ok(lml_from_factor(&ch, &DVector::from_column_slice(g)))
}

/// Fitted Gaussian process.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    standardized: DVector<f64>,
    offset: f64,
    scale: f64,
    theta: Hyperparameters,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

impl GpModel {
    /// Conditions the process on data at fixed hyperparameters.
    pub fn new(inputs: Vec<Vec<f64>>, outputs: &[f64], theta: Hyperparameters) -> Result<Self> {
        let (offset, scale) = standardization(outputs)?;
        Self::with_standardization(inputs, outputs, theta, offset, scale)
    }

    /// As [`GpModel::new`] with an explicit output shift and scale.
    pub fn with_standardization(
        inputs: Vec<Vec<f64>>,
        outputs: &[f64],
        theta: Hyperparameters,
        offset: f64,
        scale: f64,
    ) -> Result<Self> {
        check_data(&inputs, outputs)?;
        if !(theta.eta > 0.0) || !(theta.sigma_eps >= 0.0) || !(scale > 0.0) {
            return Err(Error::Config(format!("invalid hyperparameters {theta:?} or scale {scale}")));
        }
        let standardized = DVector::from_iterator(outputs.len(), outputs.iter().map(|g| (g - offset) / scale));
        let (chol, jitter) = factorize_kernel(&inputs, &theta)?;
        let alpha = chol.solve(&standardized);
        let lml = lml_from_factor(&chol, &standardized);
        Ok(Self { inputs, standardized, offset, scale, theta, chol, alpha, jitter, lml })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.theta
    }

    /// Log marginal likelihood of the standardised outputs.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_train(&self) -> usize {
        self.inputs.len()
    }

    pub fn dimension(&self) -> usize {
        self.inputs[0].len()
    }

    /// `(offset, scale)` with `g = offset + scale * g_standardised`.
    pub fn standardization(&self) -> (f64, f64) {
        (self.offset, self.scale)
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|a| matern_cov(a, x, self.theta.nu, self.theta.eta)))
    }

    /// Standardised mean and variance at one point (no clamping).
    pub fn predict_point_standardized(&self, x: &[f64]) -> (f64, f64) {
        let k = self.cross(x);
        let mean = k.dot(&self.alpha);
        let v = self.chol.l_dirty().solve_lower_triangular(&k).expect("Cholesky factor is nonsingular");
        let var = (1.0 - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// Mean and standard deviation in output units at one point.
    pub fn predict_point(&self, x: &[f64]) -> (f64, f64) {
        let (m, v) = self.predict_point_standardized(x);
        (self.offset + self.scale * m, self.scale * v.sqrt())
    }

    /// Standardised predictive mean and covariance at the test inputs.
    pub fn predict_standardized(&self, test: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let test: Vec<Vec<f64>> = test.iter().map(|x| clamp_unit(x)).collect();
        let n = self.inputs.len();
        let mut k_star = DMatrix::zeros(n, test.len());
        for (j, x) in test.iter().enumerate() {
            k_star.set_column(j, &self.cross(x));
        }
        let mean = k_star.transpose() * &self.alpha;
        let v = self.chol.l_dirty().solve_lower_triangular(&k_star).expect("Cholesky factor is nonsingular");
        let mut cov = kernel_matrix(&test, &self.theta) - v.transpose() * v;
        for i in 0..cov.nrows() {
            if cov[(i, i)] < 0.0 {
                if cov[(i, i)] < -1e-10 {
                    warn!("predictive variance {} clipped to zero", cov[(i, i)]);
                }
                cov[(i, i)] = 0.0;
            }
        }
        (mean, cov)
    }

    pub fn standardized_outputs(&self) -> &DVector<f64> {
        &self.standardized
    }
}

fn clamp_unit(x: &[f64]) -> Vec<f64> {
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        warn!("test input {x:?} outside the unit box; clamped");
    }
    x.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

fn check_data(inputs: &[Vec<f64>], outputs: &[f64]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Config("no training data".into()));
    }
    if inputs.len() != outputs.len() {
        return Err(Error::DimensionMismatch { what: "training outputs", expected: inputs.len(), actual: outputs.len() });
    }
    let d = inputs[0].len();
    if let Some(x) = inputs.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { what: "training input", expected: d, actual: x.len() });
    }
    if outputs.iter().any(|g| !g.is_finite()) {
        return Err(Error::Config("non-finite training output".into()));
    }
    Ok(())
}

/// Output mean and standard deviation (divisor `n - 1`), with a unit scale
/// for constant or single outputs.
fn standardization(outputs: &[f64]) -> Result<(f64, f64)> {
    if outputs.is_empty() {
        return Err(Error::Config("no training data".into()));
    }
    let (mean, std) = crate::sampling::moments(outputs)?;
    Ok((mean, if std > 0.0 && std.is_finite() { std } else { 1.0 }))
}

/// Posterior mean and covariance in output units.
pub fn gp_predict(model: &GpModel, test: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let (m, c) = model.predict_standardized(test);
    let (offset, scale) = model.standardization();
    (m.map(|v| offset + scale * v), c * (scale * scale))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpFitSettings {
    pub starts: usize,
    pub smoothness: Vec<Smoothness>,
    pub local: NelderMeadSettings,
}

impl Default for GpFitSettings {
    fn default() -> Self {
        Self {
            starts: 8,
            smoothness: Smoothness::ALL.to_vec(),
            local: NelderMeadSettings { max_iterations: 150, initial_step: 0.1, f_tol: 1e-9, x_tol: 1e-6 },
        }
    }
}

/// Maximises the log marginal likelihood over `log eta` and `log sigma_eps`
/// from Sobol-spread starts, separately for each smoothness, and keeps the
/// best. With a single training point the default hyperparameters are used.
pub fn gp_fit(inputs: Vec<Vec<f64>>, outputs: &[f64], settings: &GpFitSettings) -> Result<GpModel> {
    check_data(&inputs, outputs)?;
    let (offset, scale) = standardization(outputs)?;
    if inputs.len() == 1 {
        return GpModel::with_standardization(inputs, outputs, Hyperparameters::default(), offset, scale);
    }
    let g: Vec<f64> = outputs.iter().map(|v| (v - offset) / scale).collect();
    let lower = [ETA_MIN.ln(), SIGMA_EPS_MIN.ln()];
    let upper = [ETA_MAX.ln(), SIGMA_EPS_MAX.ln()];
    let starts = sobol_points(2, settings.starts.max(1), 0)?;
    let mut best: Option<(f64, Hyperparameters)> = None;
    for &nu in &settings.smoothness {
        let objective = |p: &[f64]| {
            let theta = Hyperparameters { nu, eta: p[0].exp(), sigma_eps: p[1].exp() };
            log_marginal_likelihood(&inputs, &g, &theta).map(|l| -l).unwrap_or(f64::INFINITY)
        };
        for u in &starts {
            let x0: Vec<f64> = (0..2).map(|k| lower[k] + u[k] * (upper[k] - lower[k])).collect();
            let m = nelder_mead(objective, &x0, &lower, &upper, &settings.local);
            if !m.value.is_finite() {
                continue;
            }
            let theta = Hyperparameters { nu, eta: m.x[0].exp(), sigma_eps: m.x[1].exp() };
            if best.is_none_or(|(v, _)| -m.value > v) {
                best = Some((-m.value, theta));
            }
        }
    }
    let (lml, theta) = best.ok_or(Error::IllConditionedKernel { jitter: JITTER[JITTER.len() - 1] })?;
    debug!("GP fit: {theta:?}, log marginal likelihood {lml:.6e}");
    GpModel::with_standardization(inputs, outputs, theta, offset, scale)
}

#[cfg(test)]
mod tests;
