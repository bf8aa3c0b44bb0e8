//! Newton equilibrium solves and path following (load control and spherical
//! arc length) with stability monitoring through the factorisation inertia.

use std::io::Write;

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{factorize_symmetric, DesignVector, FactorizationReport, TrussModel};

/// Absolute residual floor as a multiple of the largest `E a`; round-off in
/// the axial forces makes smaller residuals unreachable.
pub const FORCE_ROUNDOFF: f64 = 1e-13;

/// Converged equilibrium state on a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub x: DVector<f64>,
    pub lambda: f64,
    pub negative_pivots: usize,
    pub log_abs_det: f64,
    pub min_abs_pivot: f64,
    pub step_index: usize,
    /// Residual norms seen by the corrector, last entry converged.
    pub residual_norms: Vec<f64>,
}

impl PathPoint {
    pub fn iterations(&self) -> usize {
        self.residual_norms.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    LoadControl,
    ArcLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSettings {
    pub constraint: Constraint,
    /// Load increment of the first (load-controlled) step. `None` picks the
    /// increment whose linear response moves a node by
    /// `initial_displacement_fraction` of the mean strut length.
    pub initial_load_step: Option<f64>,
    pub initial_displacement_fraction: f64,
    /// Step size bounds relative to the first step.
    pub min_step_ratio: f64,
    pub max_step_ratio: f64,
    /// Residual tolerance relative to `|f| max(|lambda|, 1)`.
    pub newton_tol: f64,
    pub max_newton_iterations: usize,
    pub max_steps: usize,
    pub target_iterations: usize,
    pub max_halvings: usize,
    /// Smallest-pivot ratio that triggers the switch to the extended system.
    pub switch_ratio: f64,
    /// Tracing stops once the load parameter exceeds this value.
    pub lambda_max: Option<f64>,
    /// Retake a step that crosses into instability so that it ends near the
    /// crossing.
    pub refine_crossing: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            constraint: Constraint::ArcLength,
            initial_load_step: None,
            initial_displacement_fraction: 2e-3,
            min_step_ratio: 1e-4,
            max_step_ratio: 20.0,
            newton_tol: 1e-10,
            max_newton_iterations: 20,
            max_steps: 500,
            target_iterations: 5,
            max_halvings: 8,
            switch_ratio: 0.2,
            lambda_max: None,
            refine_crossing: true,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.initial_displacement_fraction > 0.0
            && self.min_step_ratio > 0.0
            && self.min_step_ratio <= 1.0
            && self.max_step_ratio >= 1.0
            && self.max_newton_iterations > 0
            && self.target_iterations > 0
            && self.switch_ratio > 0.0
            && self.initial_load_step.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid continuation settings {self:?}")))
        }
    }
}

/// Residual tolerance at load level `lambda`.
pub fn residual_tolerance(model: &TrussModel, a: &DesignVector, lambda: f64, rel_tol: f64) -> f64 {
    rel_tol * model.load().norm() * lambda.abs().max(1.0) + FORCE_ROUNDOFF * model.axial_force_scale(a)
}

fn point_at(
    model: &TrussModel,
    a: &DesignVector,
    x: DVector<f64>,
    lambda: f64,
    residual_norms: Vec<f64>,
    step_index: usize,
) -> Result<PathPoint> {
    let k = model.tangent_stiffness(&x, a)?;
    let report = factorize_symmetric(&k)?;
    Ok(PathPoint {
        x,
        lambda,
        negative_pivots: report.inertia.negative,
        log_abs_det: report.log_abs_det,
        min_abs_pivot: report.min_abs_pivot,
        step_index,
        residual_norms,
    })
}

fn factorize_nonsingular(k: &DMatrix<f64>) -> Result<FactorizationReport> {
    let report = factorize_symmetric(k)?;
    if report.is_singular() {
        return Err(Error::SingularMatrix { zero_pivots: report.inertia.zero });
    }
    Ok(report)
}

/// Load-controlled Newton–Raphson solve of `t(x) = lambda f`.
pub fn newton_equilibrium(
    model: &TrussModel,
    a: &DesignVector,
    lambda: f64,
    x_guess: &DVector<f64>,
    settings: &ContinuationSettings,
) -> Result<PathPoint> {
    let tol = residual_tolerance(model, a, lambda, settings.newton_tol);
    let mut x = x_guess.clone();
    let mut norms = Vec::new();
    for it in 0..=settings.max_newton_iterations {
        let r = model.residual(&x, lambda, a)?;
        let rn = r.norm();
        norms.push(rn);
        trace!("newton it {it}: |r| = {rn:e}");
        if rn <= tol {
            return point_at(model, a, x, lambda, norms, 0);
        }
        if it == settings.max_newton_iterations || !rn.is_finite() {
            break;
        }
        let report = factorize_nonsingular(&model.tangent_stiffness(&x, a)?)?;
        x -= report.solve(&r)?;
    }
    Err(Error::NonConvergence {
        phase: "equilibrium",
        iterations: settings.max_newton_iterations,
        residual: *norms.last().unwrap_or(&f64::NAN),
    })
}

/// Stateful path follower starting from the unloaded reference state.
#[derive(Debug, Clone)]
pub struct PathFollower<'a> {
    model: &'a TrussModel,
    a: &'a DesignVector,
    settings: ContinuationSettings,
    points: Vec<PathPoint>,
    /// Displacement per unit load of the linear response; balances the load
    /// term of the arc-length constraint.
    load_scale: f64,
    step: f64,
    first_step: f64,
    increment: Option<(DVector<f64>, f64)>,
}

impl<'a> PathFollower<'a> {
    pub fn new(model: &'a TrussModel, a: &'a DesignVector, settings: ContinuationSettings) -> Result<Self> {
        settings.validate()?;
        let x0 = model.reference_free();
        let start = newton_equilibrium(model, a, 0.0, &x0, &settings)?;
        if start.negative_pivots > 0 {
            return Err(Error::Config("structure is unstable in its unloaded state".into()));
        }
        let k0 = factorize_nonsingular(&model.tangent_stiffness(&x0, a)?)?;
        let v = k0.solve(model.load())?;
        let load_scale = v.norm();
        let first_load_step = settings.initial_load_step.unwrap_or_else(|| {
            settings.initial_displacement_fraction * model.characteristic_length() / v.amax()
        });
        Ok(Self {
            model,
            a,
            settings,
            points: vec![start],
            load_scale,
            step: first_load_step,
            first_step: first_load_step,
            increment: None,
        })
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn last(&self) -> &PathPoint {
        self.points.last().expect("path has a starting point")
    }

    pub fn into_points(self) -> Vec<PathPoint> {
        self.points
    }

    /// Scale `c` in `|dx|^2 + c^2 dlambda^2 = ds^2`.
    pub fn load_scale(&self) -> f64 {
        self.load_scale
    }

    /// Current step size (load increment under load control, arc length
    /// otherwise).
    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Reverses the tracing direction.
    pub fn reverse(&mut self) {
        if let Some((dx, dl)) = self.increment.as_mut() {
            dx.neg_mut();
            *dl = -*dl;
        }
    }

    fn arc(&self, dx: &DVector<f64>, dl: f64) -> f64 {
        (dx.norm_squared() + (self.load_scale * dl).powi(2)).sqrt()
    }

    /// Advances by one converged step, halving the step on failure.
    pub fn advance(&mut self) -> Result<&PathPoint> {
        let mut halvings = 0;
        loop {
            let attempt = match (&self.increment, self.settings.constraint) {
                (None, _) | (Some(_), Constraint::LoadControl) => self.load_step(self.step),
                (Some(_), Constraint::ArcLength) => self.arc_length_step(self.step),
            };
            match attempt {
                Ok(mut point) => {
                    let prev = self.last();
                    let dx = &point.x - &prev.x;
                    let dl = point.lambda - prev.lambda;
                    let iters = point.iterations().max(1) as f64;
                    let factor = (self.settings.target_iterations as f64 / iters).sqrt().clamp(0.5, 2.0);
                    if self.increment.is_none() && self.settings.constraint == Constraint::ArcLength {
                        self.step = self.arc(&dx, dl);
                        self.first_step = self.step;
                    }
                    self.step = (self.step * factor)
                        .clamp(self.first_step * self.settings.min_step_ratio, self.first_step * self.settings.max_step_ratio);
                    self.increment = Some((dx, dl));
                    point.step_index = self.points.len();
                    debug!(
                        "step {}: lambda = {:.10e}, neg = {}, min pivot = {:e}, iters = {}",
                        point.step_index,
                        point.lambda,
                        point.negative_pivots,
                        point.min_abs_pivot,
                        point.iterations()
                    );
                    self.points.push(point);
                    return Ok(self.last());
                }
                Err(e) => {
                    if halvings >= self.settings.max_halvings
                        || self.step * 0.5 < self.first_step * self.settings.min_step_ratio
                    {
                        debug!("step failed after {halvings} halvings: {e}");
                        return Err(Error::StepTooSmall { halvings });
                    }
                    halvings += 1;
                    self.step *= 0.5;
                    trace!("step failed ({e}); halving to {:e}", self.step);
                }
            }
        }
    }

    fn load_step(&self, dl: f64) -> Result<PathPoint> {
        let prev = self.last();
        let dl = match &self.increment {
            Some((_, prev_dl)) if *prev_dl < 0.0 => -dl,
            _ => dl,
        };
        let guess = match &self.increment {
            Some((dx, prev_dl)) if *prev_dl != 0.0 => &prev.x + dx * (dl / prev_dl),
            _ => {
                let k = factorize_nonsingular(&self.model.tangent_stiffness(&prev.x, self.a)?)?;
                let r = self.model.residual(&prev.x, prev.lambda + dl, self.a)?;
                &prev.x - k.solve(&r)?
            }
        };
        let point = newton_equilibrium(self.model, self.a, prev.lambda + dl, &guess, &self.settings)?;
        // a correction larger than the predicted move means Newton jumped to a remote branch
        let correction = (&point.x - &guess).norm();
        let predicted = (&guess - &prev.x).norm();
        if correction > predicted.max(FORCE_ROUNDOFF * self.model.characteristic_length()) {
            return Err(Error::NonConvergence { phase: "load step (snap-through)", iterations: point.iterations(), residual: correction });
        }
        Ok(point)
    }

    /// One spherical arc-length step of length `ds` from the last point;
    /// secant predictor, quadratic constraint root closest in direction to
    /// the running increment.
    pub fn arc_length_step(&self, ds: f64) -> Result<PathPoint> {
        let prev = self.last();
        let (pdx, pdl) = self.increment.as_ref().ok_or_else(|| Error::Config("arc-length step needs a previous increment".into()))?;
        let scale = ds / self.arc(pdx, *pdl);
        let mut dx = pdx * scale;
        let mut dl = pdl * scale;
        let c2 = self.load_scale * self.load_scale;
        let f = self.model.load();
        let mut norms = Vec::new();
        for it in 0..=self.settings.max_newton_iterations {
            let x = &prev.x + &dx;
            let lambda = prev.lambda + dl;
            let r = self.model.residual(&x, lambda, self.a)?;
            let rn = r.norm();
            norms.push(rn);
            if rn <= residual_tolerance(self.model, self.a, lambda, self.settings.newton_tol) {
                return point_at(self.model, self.a, x, lambda, norms, 0);
            }
            if it == self.settings.max_newton_iterations || !rn.is_finite() {
                break;
            }
            let k = factorize_nonsingular(&self.model.tangent_stiffness(&x, self.a)?)?;
            let du_r = -k.solve(&r)?;
            let du_f = k.solve(f)?;
            let base = &dx + &du_r;
            let a1 = du_f.norm_squared() + c2;
            let a2 = 2.0 * (base.dot(&du_f) + c2 * dl);
            let a3 = base.norm_squared() + c2 * dl * dl - ds * ds;
            let disc = a2 * a2 - 4.0 * a1 * a3;
            if disc < 0.0 {
                return Err(Error::NonConvergence { phase: "arc-length constraint", iterations: it, residual: rn });
            }
            let sq = disc.sqrt();
            // numerically stable roots
            let q = -0.5 * (a2 + a2.signum() * sq);
            let roots = if q != 0.0 { [q / a1, a3 / q] } else { [0.0, 0.0] };
            let cosine = |dlam: f64| {
                let ndx = &base + &du_f * dlam;
                ndx.dot(&dx) + c2 * (dl + dlam) * dl
            };
            let dlam = if cosine(roots[0]) >= cosine(roots[1]) { roots[0] } else { roots[1] };
            dx = &base + &du_f * dlam;
            dl += dlam;
        }
        Err(Error::NonConvergence {
            phase: "arc-length corrector",
            iterations: self.settings.max_newton_iterations,
            residual: *norms.last().unwrap_or(&f64::NAN),
        })
    }
}

/// Eigenpair of `k` with the smallest-magnitude eigenvalue; unit-norm vector.
pub(crate) fn smallest_eigenpair(k: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = k.clone().symmetric_eigen();
    let (i, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v.abs() < best.1 { (i, v.abs()) } else { best });
    let mut v = eig.eigenvectors.column(i).into_owned();
    v /= v.norm();
    (eig.eigenvalues[i], v)
}

fn lowest_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Traces the primary path until the smallest pivot drops below
/// `switch_ratio` of its unloaded value or a negative pivot appears.
///
/// When a step crosses into instability, it is retaken with the arc length
/// at which the lowest tangent eigenvalue, interpolated linearly over the
/// step, vanishes. Returns the last point and a predictor mode: the unit
/// eigenvector of the smallest-magnitude eigenvalue of `K` there.
pub fn trace_until_near_critical(
    model: &TrussModel,
    a: &DesignVector,
    settings: &ContinuationSettings,
) -> Result<(PathPoint, DVector<f64>)> {
    let mut follower = PathFollower::new(model, a, settings.clone())?;
    let initial_pivot = follower.last().min_abs_pivot;
    for _ in 0..settings.max_steps {
        let before = follower.clone();
        let p = follower.advance()?;
        let fired = p.negative_pivots > 0 || p.min_abs_pivot < settings.switch_ratio * initial_pivot;
        if fired {
            let mut p = p.clone();
            if settings.refine_crossing
                && p.negative_pivots > 0
                && before.increment.is_some()
                && settings.constraint == Constraint::ArcLength
            {
                let prev = before.last();
                let mu0 = lowest_eigenvalue(&model.tangent_stiffness(&prev.x, a)?);
                let mu1 = lowest_eigenvalue(&model.tangent_stiffness(&p.x, a)?);
                if mu0 > 0.0 && mu1 < 0.0 {
                    let ds = before.arc(&(&p.x - &prev.x), p.lambda - prev.lambda);
                    let frac = mu0 / (mu0 - mu1);
                    match before.arc_length_step(frac * ds) {
                        Ok(mut q) => {
                            q.step_index = p.step_index;
                            p = q;
                        }
                        Err(e) => debug!("refinement of the crossing step failed: {e}"),
                    }
                }
            }
            let k = model.tangent_stiffness(&p.x, a)?;
            let (_, phi) = smallest_eigenpair(&k);
            debug!("switching at step {} (lambda = {:e})", p.step_index, p.lambda);
            return Ok((p, phi));
        }
        if settings.lambda_max.is_some_and(|m| p.lambda >= m) {
            break;
        }
    }
    Err(Error::MaxStepsExceeded { steps: follower.points().len() - 1 })
}

/// Traces `steps` path steps (or until the load parameter returns to zero).
pub fn trace_path(
    model: &TrussModel,
    a: &DesignVector,
    settings: &ContinuationSettings,
    steps: usize,
) -> Result<Vec<PathPoint>> {
    let mut follower = PathFollower::new(model, a, settings.clone())?;
    for _ in 0..steps {
        let p = follower.advance()?;
        if p.lambda < 0.0 || settings.lambda_max.is_some_and(|m| p.lambda >= m) {
            break;
        }
    }
    Ok(follower.into_points())
}

/// Writes `step,lambda,log_abs_det,negative_pivots,x0,y0,z0,...` rows with
/// full nodal coordinates.
pub fn write_path_csv<W: Write>(model: &TrussModel, points: &[PathPoint], mut out: W) -> std::io::Result<()> {
    write!(out, "step,lambda,log_abs_det,negative_pivots")?;
    for n in 0..model.n_nodes() {
        write!(out, ",x{n},y{n},z{n}")?;
    }
    writeln!(out)?;
    for p in points {
        write!(out, "{},{:?},{:?},{}", p.step_index, p.lambda, p.log_abs_det, p.negative_pivots)?;
        for c in model.full_positions(&p.x) {
            write!(out, ",{c:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
