use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::normal::to_gaussian;
use super::sobol::sobol_points;
use crate::error::{Error, Result};
use crate::model::{apply_imperfection, DesignVector, TrussModel};
use crate::stability::{critical_load, ModeBasis, Predictor, StabilityPoint, StabilitySettings};

/// Gaussian law of the imperfection amplitudes, uncorrelated across modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImperfectionDistribution {
    pub modes: ModeBasis,
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ImperfectionDistribution {
    /// Zero-mean amplitudes with standard deviations `sigma`.
    pub fn new(modes: ModeBasis, sigma: Vec<f64>) -> Result<Self> {
        let mean = vec![0.0; sigma.len()];
        Self::with_mean(modes, mean, sigma)
    }

    pub fn with_mean(modes: ModeBasis, mean: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != modes.len() || mean.len() != modes.len() {
            return Err(Error::DimensionMismatch { what: "amplitude law", expected: modes.len(), actual: sigma.len() });
        }
        if modes.is_empty() {
            return Err(Error::Config("imperfection law needs at least one mode".into()));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("amplitude standard deviation {s} must be positive")));
        }
        Ok(Self { modes, mean, sigma })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Amplitudes from a point of the unit cube.
    pub fn transform(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter().zip(self.mean.iter().zip(&self.sigma)).map(|(&u, (&m, &s))| to_gaussian(u, m, s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSettings {
    /// Extra Sobol points dropped after the zero point.
    pub skip: u64,
    /// Largest tolerated fraction of failed samples.
    pub max_flag_rate: f64,
    /// Run the two sign branches on separate threads.
    pub parallel: bool,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        Self { skip: 0, max_flag_rate: 0.01, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucklingSample {
    pub beta: Vec<f64>,
    pub lambda_c: f64,
    /// Converged from the warm-start predictor (otherwise from a cold start).
    pub warm: bool,
}

/// Critical loads of the imperfect structures, in draw order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucklingSampleSet {
    /// Critical load of the as-designed structure.
    pub lambda_c0: f64,
    pub samples: Vec<BucklingSample>,
    /// Amplitudes whose critical load could not be computed.
    pub flagged: Vec<Vec<f64>>,
    pub skip: u64,
}

impl BucklingSampleSet {
    pub fn lambdas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lambda_c).collect()
    }

    pub fn n_draws(&self) -> usize {
        self.samples.len() + self.flagged.len()
    }
}

/// Sample mean and standard deviation (divisor `n - 1`; zero for `n = 1`).
pub fn moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("no samples".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Mean and standard deviation over the imperfect samples; the as-designed
/// critical load is not included.
pub fn empirical_moments(set: &BucklingSampleSet) -> Result<(f64, f64)> {
    moments(&set.lambdas())
}

/// Buckling-load samples for `2m` Sobol draws of the amplitudes.
pub fn buckling_statistics(
    model: &TrussModel,
    a: &DesignVector,
    dist: &ImperfectionDistribution,
    m: usize,
    stability: &StabilitySettings,
    sampling: &SamplingSettings,
) -> Result<BucklingSampleSet> {
    if m == 0 {
        return Err(Error::Config("sample set size must be at least 1".into()));
    }
    let points = sobol_points(dist.n_modes(), 2 * m, sampling.skip)?;
    let betas = points.iter().map(|u| dist.transform(u)).collect::<Result<Vec<_>>>()?;
    buckling_statistics_for(model, a, dist, &betas, stability, sampling)
}

struct Outcome {
    index: usize,
    result: Option<(f64, bool)>,
}

fn walk_branch(
    model: &TrussModel,
    a: &DesignVector,
    modes: &ModeBasis,
    base: &StabilityPoint,
    betas: &[Vec<f64>],
    order: &[usize],
    settings: &StabilitySettings,
) -> Result<Vec<Outcome>> {
    let x0 = model.reference_coords();
    let mut prev_coords = x0.to_vec();
    let mut prev = base.predictor();
    let mut out = Vec::with_capacity(order.len());
    for &i in order {
        let coords = apply_imperfection(x0, &modes.modes, &betas[i])?;
        let imperfect = match model.with_reference_coords(coords.clone()) {
            Ok(m) => m,
            Err(e) => {
                warn!("sample {i}: invalid imperfect geometry ({e})");
                out.push(Outcome { index: i, result: None });
                continue;
            }
        };
        let delta: Vec<f64> = coords.iter().zip(&prev_coords).map(|(c, p)| c - p).collect();
        let predictor = Predictor { x: &prev.x + model.restrict(&delta), phi: prev.phi.clone(), lambda: prev.lambda };
        let solved = match critical_load(&imperfect, a, Some(&predictor), settings) {
            Ok(p) if p.lambda > 0.0 => Some((p, true)),
            warm => {
                debug!("sample {i}: warm start failed ({:?}); cold retry", warm.map(|p| p.lambda));
                match critical_load(&imperfect, a, None, settings) {
                    Ok(p) if p.lambda > 0.0 => Some((p, false)),
                    cold => {
                        warn!("sample {i}: cold retry failed ({:?})", cold.map(|p| p.lambda));
                        None
                    }
                }
            }
        };
        match solved {
            Some((p, warm)) => {
                out.push(Outcome { index: i, result: Some((p.lambda, warm)) });
                prev = p.predictor();
                prev_coords = coords;
            }
            None => out.push(Outcome { index: i, result: None }),
        }
    }
    Ok(out)
}

/// Splits draws by the sign of the first amplitude and orders each branch
/// by increasing amplitude norm.
pub fn branch_orders(betas: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>) {
    let norm = |b: &Vec<f64>| b.iter().map(|v| v * v).sum::<f64>();
    let (mut plus, mut minus): (Vec<usize>, Vec<usize>) = (0..betas.len()).partition(|&i| betas[i][0] >= 0.0);
    plus.sort_by(|&i, &j| norm(&betas[i]).total_cmp(&norm(&betas[j])));
    minus.sort_by(|&i, &j| norm(&betas[i]).total_cmp(&norm(&betas[j])));
    (plus, minus)
}

/// Buckling-load samples for given amplitude vectors.
///
/// The as-designed critical point is computed by path following and the
/// extended system; each sign branch is then walked outwards from it with
/// every solve warm-started from the previous converged point.
pub fn buckling_statistics_for(
    model: &TrussModel,
    a: &DesignVector,
    dist: &ImperfectionDistribution,
    betas: &[Vec<f64>],
    stability: &StabilitySettings,
    sampling: &SamplingSettings,
) -> Result<BucklingSampleSet> {
    if let Some(b) = betas.iter().find(|b| b.len() != dist.n_modes()) {
        return Err(Error::DimensionMismatch { what: "amplitudes", expected: dist.n_modes(), actual: b.len() });
    }
    if betas.is_empty() {
        return Err(Error::Config("no amplitude draws".into()));
    }
    let base = critical_load(model, a, None, stability)?;
    let (plus, minus) = branch_orders(betas);
    let walk = |order: &[usize]| walk_branch(model, a, &dist.modes, &base, betas, order, stability);
    let (out_plus, out_minus) = if sampling.parallel {
        std::thread::scope(|s| {
            let h = s.spawn(|| walk(&minus));
            let p = walk(&plus);
            (p, h.join().expect("branch walk panicked"))
        })
    } else {
        (walk(&plus), walk(&minus))
    };
    let mut results: Vec<Option<Option<(f64, bool)>>> = vec![None; betas.len()];
    for o in out_plus?.into_iter().chain(out_minus?) {
        results[o.index] = Some(o.result);
    }
    let mut samples = Vec::with_capacity(betas.len());
    let mut flagged = Vec::new();
    for (beta, r) in betas.iter().zip(results) {
        match r.flatten() {
            Some((lambda_c, warm)) => samples.push(BucklingSample { beta: beta.clone(), lambda_c, warm }),
            None => flagged.push(beta.clone()),
        }
    }
    let total = betas.len();
    if flagged.len() as f64 > sampling.max_flag_rate * total as f64 {
        return Err(Error::TooManyFlagged { flagged: flagged.len(), total });
    }
    if !flagged.is_empty() {
        warn!("{} of {total} samples flagged", flagged.len());
    }
    Ok(BucklingSampleSet { lambda_c0: base.lambda, samples, flagged, skip: sampling.skip })
}
