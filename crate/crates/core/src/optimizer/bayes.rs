use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::local_search::{nelder_mead, NelderMeadSettings};
use crate::sampling::sobol_points;
use crate::surrogate::{gp_fit, GpFitSettings, GpModel};

/// Exploration offset of the expected improvement.
pub const EI_XI: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Infeasible,
    Failed,
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub g: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Full design for structural problems.
    pub design: Option<Vec<f64>>,
    pub status: EvalStatus,
}

impl Evaluation {
    /// A plain objective value.
    pub fn value(g: f64) -> Self {
        Self { g, mean: None, std: None, design: None, status: EvalStatus::Ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Point in the unit box of the design variables.
    pub u: Vec<f64>,
    pub eval: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizationHistory {
    pub records: Vec<Record>,
    /// Index of the best record; ties keep the earliest.
    pub incumbent: usize,
    /// Search window after each update, as `(lower, upper)` per variable.
    pub bounds: Vec<Vec<(f64, f64)>>,
    pub evaluations: usize,
}

impl OptimizationHistory {
    fn push(&mut self, record: Record) {
        if self.records.is_empty() || record.eval.g > self.records[self.incumbent].eval.g {
            self.incumbent = self.records.len();
        }
        self.records.push(record);
        self.evaluations = self.records.len();
    }

    pub fn best(&self) -> &Record {
        &self.records[self.incumbent]
    }

    /// Running maximum of `g` after each evaluation.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.max(r.eval.g);
                best
            })
            .collect()
    }
}

/// `E[max(g - g_best - xi, 0)]` for a Gaussian prediction `N(mu, sigma^2)`.
pub fn expected_improvement(mu: f64, sigma: f64, g_best: f64, xi: f64) -> f64 {
    let delta = mu - g_best - xi;
    if !(sigma > 0.0) {
        return delta.max(0.0);
    }
    let n = Normal::standard();
    let z = delta / sigma;
    (delta * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSettings {
    pub candidates: usize,
    /// Number of best candidates polished by local search.
    pub refine: usize,
    pub local: NelderMeadSettings,
    pub xi: f64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            candidates: 1024,
            refine: 16,
            local: NelderMeadSettings { max_iterations: 64, initial_step: 0.02, f_tol: 0.0, x_tol: 1e-9 },
            xi: EI_XI,
        }
    }
}

/// Maximises the expected improvement over the box `[lower, upper]` in the
/// GP input space: Sobol candidates, then local refinement of the best ones.
/// When the improvement underflows everywhere the predictive deviation is
/// maximised instead.
pub fn maximize_acquisition(
    gp: &GpModel,
    lower: &[f64],
    upper: &[f64],
    g_best: f64,
    settings: &AcquisitionSettings,
    skip: u64,
) -> Result<Vec<f64>> {
    let d = lower.len();
    let to_box = |u: &[f64]| -> Vec<f64> { (0..d).map(|k| lower[k] + u[k] * (upper[k] - lower[k])).collect() };
    let (offset, scale) = gp.standardization();
    let best = (g_best - offset) / scale;
    let ei = |x: &[f64]| {
        let (mu, v) = gp.predict_point_standardized(x);
        expected_improvement(mu, v.sqrt(), best, settings.xi)
    };
    let spread = |x: &[f64]| gp.predict_point(x).1;
    let candidates: Vec<Vec<f64>> = sobol_points(d, settings.candidates.max(1), skip)?.iter().map(|u| to_box(u)).collect();

    let mut scored: Vec<(f64, usize)> = candidates.iter().enumerate().map(|(i, x)| (ei(x), i)).collect();
    let explore = scored.iter().all(|(v, _)| *v <= 0.0);
    if explore {
        debug!("expected improvement vanishes on all candidates; maximising predictive deviation");
        scored = candidates.iter().enumerate().map(|(i, x)| (spread(x), i)).collect();
    }
    let score = |x: &[f64]| if explore { spread(x) } else { ei(x) };
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let (mut best_x, mut best_v) = (candidates[scored[0].1].clone(), scored[0].0);
    for &(_, i) in scored.iter().take(settings.refine) {
        let m = nelder_mead(|x| -score(x), &candidates[i], lower, upper, &settings.local);
        if -m.value > best_v {
            best_v = -m.value;
            best_x = m.x;
        }
    }
    Ok(best_x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainReductionSettings {
    /// Width factor when the incumbent moves back and forth.
    pub contraction: f64,
    /// Width factor after `patience` rounds without improvement.
    pub zoom: f64,
    pub patience: usize,
    pub min_width: f64,
}

impl Default for DomainReductionSettings {
    fn default() -> Self {
        Self { contraction: 0.9, zoom: 0.7, patience: 5, min_width: 0.05 }
    }
}

/// Per-variable search window inside the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainReduction {
    pub settings: DomainReductionSettings,
    centre: Vec<f64>,
    width: Vec<f64>,
    last_move: Vec<f64>,
    stall: usize,
}

impl DomainReduction {
    pub fn new(centre: &[f64], settings: DomainReductionSettings) -> Self {
        let d = centre.len();
        Self { settings, centre: centre.to_vec(), width: vec![1.0; d], last_move: vec![0.0; d], stall: 0 }
    }

    pub fn width(&self) -> &[f64] {
        &self.width
    }

    /// `(lower, upper)` of each variable.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.centre
            .iter()
            .zip(&self.width)
            .map(|(&c, &w)| {
                if w >= 1.0 {
                    return (0.0, 1.0);
                }
                let lo = (c - 0.5 * w).clamp(0.0, 1.0 - w);
                (lo, lo + w)
            })
            .collect()
    }

    /// Re-centres on the incumbent. Shrinks variables whose incumbent moved
    /// opposite to its previous move, and zooms all after a stall.
    pub fn update(&mut self, incumbent: &[f64], improved: bool) {
        let s = self.settings;
        for k in 0..self.centre.len() {
            let step = incumbent[k] - self.centre[k];
            if step != 0.0 {
                if step * self.last_move[k] < 0.0 {
                    self.width[k] = (self.width[k] * s.contraction).max(s.min_width.min(self.width[k]));
                }
                self.last_move[k] = step;
            }
            self.centre[k] = incumbent[k];
        }
        self.stall = if improved { 0 } else { self.stall + 1 };
        if self.stall >= s.patience {
            self.stall = 0;
            for w in &mut self.width {
                *w = (*w * s.zoom).max(s.min_width.min(*w));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesSettings {
    pub budget: usize,
    /// Initial design size; `min(5 d, 20)` (at least 2) when unset.
    pub n_init: Option<usize>,
    pub seed: u64,
    pub gp: GpFitSettings,
    pub acquisition: AcquisitionSettings,
    pub reduction: DomainReductionSettings,
    /// Evaluate the initial design on worker threads.
    pub parallel_init: bool,
}

impl Default for BayesSettings {
    fn default() -> Self {
        Self {
            budget: 100,
            n_init: None,
            seed: 0,
            gp: GpFitSettings::default(),
            acquisition: AcquisitionSettings::default(),
            reduction: DomainReductionSettings::default(),
            parallel_init: true,
        }
    }
}

impl BayesSettings {
    pub fn initial_size(&self, d: usize) -> usize {
        self.n_init.unwrap_or((5 * d).clamp(2, 20))
    }
}

fn evaluate_all<F>(f: &F, points: &[Vec<f64>], parallel: bool) -> Vec<Evaluation>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    if !parallel || points.len() < 2 {
        return points.iter().map(|u| f(u)).collect();
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(points.len());
    let mut out: Vec<Option<Evaluation>> = vec![None; points.len()];
    std::thread::scope(|s| {
        let chunks: Vec<_> = out
            .chunks_mut(points.len().div_ceil(workers))
            .zip(points.chunks(points.len().div_ceil(workers)))
            .map(|(slot, pts)| {
                s.spawn(move || {
                    for (o, u) in slot.iter_mut().zip(pts) {
                        *o = Some(f(u));
                    }
                })
            })
            .collect();
        for c in chunks {
            c.join().expect("objective evaluation panicked");
        }
    });
    out.into_iter().map(|e| e.expect("every point evaluated")).collect()
}

/// Maximises `f` over the unit box `[0, 1]^d`.
///
/// The initial design is `start` (if given) followed by Sobol points; each
/// further point maximises the expected improvement of a GP fitted to all
/// data, with inputs scaled to the current domain-reduction window.
pub fn bayes_optimize<F>(f: F, d: usize, start: Option<&[f64]>, settings: &BayesSettings) -> Result<OptimizationHistory>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let n_init = settings.initial_size(d);
    if settings.budget < n_init || n_init < 1 {
        return Err(Error::Config(format!("budget {} below initial design size {n_init}", settings.budget)));
    }
    if let Some(s) = start {
        if s.len() != d {
            return Err(Error::DimensionMismatch { what: "start point", expected: d, actual: s.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut history = OptimizationHistory::default();

    if d == 0 {
        history.push(Record { u: vec![], eval: f(&[]) });
        return finish(history);
    }

    let mut init: Vec<Vec<f64>> = start.map(|s| vec![s.to_vec()]).unwrap_or_default();
    let skip = rng.random_range(0..1u64 << 16);
    init.extend(sobol_points(d, n_init - init.len(), skip)?);
    for (u, eval) in init.iter().zip(evaluate_all(&f, &init, settings.parallel_init)) {
        history.push(Record { u: u.clone(), eval });
    }

    let mut window = DomainReduction::new(&history.best().u, settings.reduction);
    history.bounds.push(window.bounds());
    while history.evaluations < settings.budget {
        let bounds = window.bounds();
        let scale = |u: &[f64]| -> Vec<f64> {
            u.iter().zip(&bounds).map(|(v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
        };
        let inputs: Vec<Vec<f64>> = history.records.iter().map(|r| scale(&r.u)).collect();
        let outputs: Vec<f64> = history.records.iter().map(|r| r.eval.g).collect();
        let g_best = history.best().eval.g;
        let skip = rng.random_range(0..1u64 << 16);
        let s = match gp_fit(inputs, &outputs, &settings.gp) {
            Ok(gp) => maximize_acquisition(&gp, &vec![0.0; d], &vec![1.0; d], g_best, &settings.acquisition, skip)?,
            Err(e) => {
                warn!("surrogate fit failed ({e}); sampling the window instead");
                sobol_points(d, 1, skip)?.remove(0)
            }
        };
        let u: Vec<f64> = s.iter().zip(&bounds).map(|(v, (lo, hi))| (lo + v * (hi - lo)).clamp(0.0, 1.0)).collect();
        let eval = f(&u);
        debug!("evaluation {}: g = {:.6e} at {u:?}", history.evaluations + 1, eval.g);
        let before = history.incumbent;
        history.push(Record { u, eval });
        window.update(&history.best().u.clone(), history.incumbent != before);
        history.bounds.push(window.bounds());
    }
    finish(history)
}

fn finish(history: OptimizationHistory) -> Result<OptimizationHistory> {
    if history.records.iter().all(|r| r.eval.status == EvalStatus::Infeasible) {
        return Err(Error::Config("every evaluated design violates the bounds".into()));
    }
    info!("best g = {:.9e} after {} evaluations", history.best().eval.g, history.evaluations);
    Ok(history)
}
