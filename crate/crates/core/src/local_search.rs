//! Bounded Nelder–Mead simplex search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    pub max_iterations: usize,
    /// Initial simplex edge as a fraction of each bound width.
    pub initial_step: f64,
    /// Stop once the simplex values span less than this.
    pub f_tol: f64,
    /// Stop once the simplex is smaller than this in every coordinate.
    pub x_tol: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self { max_iterations: 200, initial_step: 0.1, f_tol: 1e-12, x_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimises `f` over the box `[lower, upper]` starting from `x0`.
///
/// Trial points are projected onto the box. Non-finite values count as
/// `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &NelderMeadSettings,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    if n == 0 {
        let value = eval(&start);
        return Minimum { x: start, value, evaluations: evals };
    }

    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        let width = upper[i] - lower[i];
        let step = settings.initial_step * if width > 0.0 { width } else { 1.0 };
        // step inwards when the start sits on the upper bound
        p[i] = if p[i] + step <= upper[i] { p[i] + step } else { p[i] - step };
        clamp(&mut p, lower, upper);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    for _ in 0..settings.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = (0..n)
            .map(|k| simplex.iter().map(|p| (p[k] - simplex[0][k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= settings.f_tol) || size <= settings.x_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect();
            clamp(&mut p, lower, upper);
            p
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = eval(&c);
                (c, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    values[i] = eval(&p);
                    simplex[i] = p;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("simplex is nonempty");
    Minimum { x: simplex[best].clone(), value: values[best], evaluations: evals }
}
