use std::io::Write;

use log::{error, info, warn};
use serde::{Deserialize, Serialize};

use super::bayes::{bayes_optimize, BayesSettings, EvalStatus, Evaluation, OptimizationHistory};
use crate::error::{Error, Result};
use crate::model::{DesignVector, Group, TrussModel};
use crate::sampling::{buckling_statistics, empirical_moments, ImperfectionDistribution, SamplingSettings};
use crate::stability::{linear_buckling_modes, StabilitySettings};

/// Objective value assigned to designs outside the area bounds.
pub const PENALTY: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// `alpha mean / mean* - (1 - alpha) std / std*`.
    Weighted,
    /// `mean / mean*`.
    Mean,
    /// `std / std*`, maximised.
    Std,
}

/// Robust sizing problem at fixed material volume.
#[derive(Debug, Clone)]
pub struct RobustProblem {
    pub model: TrussModel,
    /// Imperfection law with modes of the as-designed structure.
    pub dist: ImperfectionDistribution,
    pub alpha: f64,
    pub mean_star: f64,
    pub std_star: f64,
    pub objective: Objective,
    /// Half the number of imperfection samples per evaluation.
    pub m: usize,
    pub v0: f64,
    /// Group whose area follows from the volume constraint.
    pub eliminated: usize,
    pub stability: StabilitySettings,
    pub sampling: SamplingSettings,
}

impl RobustProblem {
    /// Buckling modes are computed once at the initial design.
    pub fn new(model: TrussModel, sigma_beta: Vec<f64>, alpha: f64, m: usize) -> Result<Self> {
        let stability = StabilitySettings::default();
        let a0 = model.initial_design();
        let modes = linear_buckling_modes(&model, &a0, sigma_beta.len(), &stability.continuation)?;
        let dist = ImperfectionDistribution::new(modes, sigma_beta)?;
        let v0 = model.volume(a0.as_slice())?;
        let eliminated = model.n_groups() - 1;
        let p = Self {
            model,
            dist,
            alpha,
            mean_star: 1.0,
            std_star: 1.0,
            objective: Objective::Weighted,
            m,
            v0,
            eliminated,
            stability,
            sampling: SamplingSettings::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_normalizers(mut self, mean_star: f64, std_star: f64) -> Result<Self> {
        self.mean_star = mean_star;
        self.std_star = std_star;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("weight {} outside [0, 1]", self.alpha)));
        }
        if !(self.mean_star > 0.0 && self.std_star > 0.0) {
            return Err(Error::Config(format!("normalisers must be positive ({}, {})", self.mean_star, self.std_star)));
        }
        if self.m == 0 {
            return Err(Error::Config("sample set size must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of free design variables.
    pub fn dimension(&self) -> usize {
        self.model.n_groups() - 1
    }

    fn free_groups(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.model.n_groups()).filter(move |&g| g != self.eliminated)
    }

    /// Areas of the free groups for a point of the unit box.
    pub fn areas_from_unit(&self, u: &[f64]) -> Vec<f64> {
        let groups = self.model.groups();
        self.free_groups().zip(u).map(|(g, &u)| groups[g].a_min + u * (groups[g].a_max - groups[g].a_min)).collect()
    }

    /// Unit-box coordinates of the initial design.
    pub fn initial_unit(&self) -> Vec<f64> {
        let groups = self.model.groups();
        self.free_groups()
            .map(|g| {
                let gr = &groups[g];
                if gr.a_max > gr.a_min {
                    (gr.a_init - gr.a_min) / (gr.a_max - gr.a_min)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Value of the objective for given moments.
    pub fn objective_value(&self, mean: f64, std: f64) -> f64 {
        match self.objective {
            Objective::Mean => mean / self.mean_star,
            Objective::Std => std / self.std_star,
            Objective::Weighted if self.alpha == 1.0 => mean / self.mean_star,
            Objective::Weighted if self.alpha == 0.0 => -std / self.std_star,
            Objective::Weighted => self.alpha * mean / self.mean_star - (1.0 - self.alpha) * std / self.std_star,
        }
    }

    /// Robust objective of the free-group areas.
    pub fn robust_objective(&self, a_reduced: &[f64]) -> Evaluation {
        let Some(full) = eliminate_volume_constraint(a_reduced, self.model.groups(), self.eliminated, self.v0) else {
            return Evaluation { g: PENALTY, mean: None, std: None, design: None, status: EvalStatus::Infeasible };
        };
        let moments = DesignVector::new(full.clone()).and_then(|a| {
            let set = buckling_statistics(&self.model, &a, &self.dist, self.m, &self.stability, &self.sampling)?;
            empirical_moments(&set)
        });
        match moments {
            Ok((mean, std)) => Evaluation {
                g: self.objective_value(mean, std),
                mean: Some(mean),
                std: Some(std),
                design: Some(full),
                status: EvalStatus::Ok,
            },
            Err(e) => {
                error!("statistics failed for design {full:?}: {e}");
                Evaluation { g: PENALTY, mean: None, std: None, design: Some(full), status: EvalStatus::Failed }
            }
        }
    }
}

/// Full design with the eliminated area fixed by the volume, or `None` when
/// that area falls outside its bounds.
pub fn eliminate_volume_constraint(a_reduced: &[f64], groups: &[Group], eliminated: usize, v0: f64) -> Option<Vec<f64>> {
    if a_reduced.len() + 1 != groups.len() || eliminated >= groups.len() {
        return None;
    }
    let e = eliminated;
    let mut full = Vec::with_capacity(groups.len());
    let mut it = a_reduced.iter();
    for g in 0..groups.len() {
        full.push(if g == e { 0.0 } else { *it.next()? });
    }
    let used: f64 = full.iter().zip(groups).map(|(a, g)| a * g.length).sum();
    let a_e = (v0 - used) / groups[e].length;
    let slack = 1e-12 * groups[e].a_max.abs();
    if !(a_e >= groups[e].a_min - slack && a_e <= groups[e].a_max + slack) {
        return None;
    }
    full[e] = a_e.clamp(groups[e].a_min, groups[e].a_max);
    Some(full)
}

/// Optimum of one Bayesian optimisation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub alpha: f64,
    pub a_opt: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub g: f64,
    pub evaluations: usize,
    #[serde(skip)]
    pub history: OptimizationHistory,
}

/// Bayesian optimisation of the problem's objective; the initial design is
/// always evaluated first.
pub fn optimize(problem: &RobustProblem, settings: &BayesSettings) -> Result<OptimizationResult> {
    let start = problem.initial_unit();
    let history =
        bayes_optimize(|u| problem.robust_objective(&problem.areas_from_unit(u)), problem.dimension(), Some(&start), settings)?;
    let best = history.best().clone();
    if best.eval.status != EvalStatus::Ok {
        return Err(Error::Config("no design could be evaluated".into()));
    }
    Ok(OptimizationResult {
        alpha: problem.alpha,
        a_opt: best.eval.design.clone().unwrap_or_default(),
        mean: best.eval.mean.unwrap_or(f64::NAN),
        std: best.eval.std.unwrap_or(f64::NAN),
        g: best.eval.g,
        evaluations: history.evaluations,
        history,
    })
}

/// Largest attainable mean and standard deviation of the buckling load.
pub fn compute_normalizers(template: &RobustProblem, settings: &BayesSettings) -> Result<(f64, f64)> {
    let run = |objective| {
        let mut p = template.clone();
        p.objective = objective;
        p.mean_star = 1.0;
        p.std_star = 1.0;
        optimize(&p, settings)
    };
    let mean = run(Objective::Mean)?.mean;
    let std = run(Objective::Std)?.std;
    info!("normalisers: mean* = {mean:.9e}, std* = {std:.9e}");
    if !(mean > 0.0 && std > 0.0) {
        return Err(Error::Config(format!("non-positive normalisers ({mean}, {std})")));
    }
    Ok((mean, std))
}

#[derive(Debug, Clone)]
pub struct ParetoRow {
    pub alpha: f64,
    pub result: std::result::Result<OptimizationResult, String>,
}

/// One weighted optimisation per `alpha`, sorted by `alpha`. Failed runs are
/// reported in their row.
pub fn pareto_sweep(template: &RobustProblem, alphas: &[f64], settings: &BayesSettings, threads: usize) -> Vec<ParetoRow> {
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let run = |alpha: f64| {
        let mut p = template.clone();
        p.alpha = alpha;
        p.objective = Objective::Weighted;
        let result = p.validate().and_then(|_| optimize(&p, settings)).map_err(|e| {
            warn!("alpha = {alpha}: {e}");
            e.to_string()
        });
        ParetoRow { alpha, result }
    };
    let threads = threads.max(1).min(alphas.len().max(1));
    if threads == 1 {
        return alphas.iter().map(|&a| run(a)).collect();
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for chunk in alphas.chunks(threads) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&a| s.spawn(move || run(a))).collect();
            rows.extend(handles.into_iter().map(|h| h.join().expect("pareto worker panicked")));
        });
    }
    rows
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes one row per evaluation: index, status, g, mean, std, then areas.
pub fn write_history_csv<W: Write>(history: &OptimizationHistory, mut out: W) -> std::io::Result<()> {
    let n = history.records.iter().find_map(|r| r.eval.design.as_ref().map(Vec::len)).unwrap_or(0);
    let mut header = vec!["index".to_string(), "status".into(), "g".into(), "mean".into(), "std".into()];
    header.extend((0..n).map(|g| format!("a{g}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, r) in history.records.iter().enumerate() {
        let status = match r.eval.status {
            EvalStatus::Ok => "ok",
            EvalStatus::Infeasible => "infeasible",
            EvalStatus::Failed => "failed",
        };
        let mut row = vec![i.to_string(), status.into(), format!("{:?}", r.eval.g), csv_opt(r.eval.mean), csv_opt(r.eval.std)];
        match &r.eval.design {
            Some(a) => row.extend(a.iter().map(|v| format!("{v:?}"))),
            None => row.extend(std::iter::repeat_n(String::new(), n)),
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
