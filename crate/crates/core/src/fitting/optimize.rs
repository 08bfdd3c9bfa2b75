//! Small dense least-squares solvers for a handful of parameters: damped
//! Gauss–Newton (Levenberg–Marquardt) with a central-difference Jacobian,
//! and a Nelder–Mead simplex on the residual sum of squares as fallback.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step reduces the sum of squares by less than
    /// this fraction.
    pub ftol: f64,
    /// Stop when an accepted step moves every parameter by less than this
    /// fraction of its magnitude.
    pub xtol: f64,
    /// Stop when the scaled gradient drops below this value.
    pub gtol: f64,
    /// A stopped solve is reported as converged only if its scaled gradient
    /// is at most this.
    pub gradient_tolerance: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-13,
            gtol: 1e-10,
            gradient_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    LevenbergMarquardt,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqOutcome {
    pub x: Vec<f64>,
    pub ss: f64,
    pub iterations: usize,
    /// Sum of squares after the start point and every accepted step.
    pub history: Vec<f64>,
    pub gradient_norm: f64,
    pub converged: bool,
    pub method: Method,
}

pub(crate) struct Problem<'a> {
    pub residuals: &'a dyn Fn(&[f64]) -> Option<Vec<f64>>,
    pub lower: &'a [f64],
    /// Residual-norm floor used when scaling the gradient, so that exact
    /// fits do not divide rounding noise by a zero norm.
    pub norm_floor: f64,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

impl Problem<'_> {
    fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        let r = (self.residuals)(x)?;
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn project(&self, x: &mut [f64]) {
        for (v, lo) in x.iter_mut().zip(self.lower) {
            if *v < *lo {
                *v = *lo;
            }
        }
    }

    /// Columns of the Jacobian.
    fn jacobian(&self, x: &[f64], r: &[f64]) -> Option<Vec<Vec<f64>>> {
        let mut cols = Vec::with_capacity(x.len());
        for j in 0..x.len() {
            let h = 1e-6 * x[j].abs().max(1e-6);
            let mut up = x.to_vec();
            up[j] += h;
            let r_up = self.eval(&up)?;
            let mut down = x.to_vec();
            down[j] -= h;
            let col: Vec<f64> = if down[j] >= self.lower[j] {
                let r_down = self.eval(&down)?;
                r_up.iter()
                    .zip(&r_down)
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect()
            } else {
                r_up.iter().zip(r).map(|(a, b)| (a - b) / h).collect()
            };
            cols.push(col);
        }
        Some(cols)
    }

    fn scaled_gradient(&self, cols: &[Vec<f64>], r: &[f64]) -> f64 {
        let rn = sum_sq(r).sqrt().max(self.norm_floor);
        if rn == 0.0 {
            return 0.0;
        }
        cols.iter()
            .map(|c| {
                let cn = sum_sq(c).sqrt();
                if cn == 0.0 {
                    0.0
                } else {
                    dot(c, r).abs() / (cn * rn)
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn gradient_at(&self, x: &[f64]) -> Option<f64> {
        let r = self.eval(x)?;
        let cols = self.jacobian(x, &r)?;
        Some(self.scaled_gradient(&cols, &r))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `m·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col] == 0.0 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (off, r) in lower.iter_mut().enumerate() {
            let f = r[col] / pivot_row[col];
            for (x, p) in r[col..n].iter_mut().zip(&pivot_row[col..n]) {
                *x -= f * p;
            }
            b[col + 1 + off] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) enum LmFailure {
    /// Residuals at the start point are not finite.
    BadStart,
    /// Jacobian or normal equations unusable at `x`.
    Jacobian {
        x: Vec<f64>,
        history: Vec<f64>,
        iterations: usize,
    },
}

pub(crate) fn levenberg_marquardt(
    problem: &Problem<'_>,
    x0: &[f64],
    opts: &LsqOptions,
) -> Result<LsqOutcome, LmFailure> {
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut r = problem.eval(&x).ok_or(LmFailure::BadStart)?;
    let mut ss = sum_sq(&r);
    let mut history = vec![ss];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut stopped = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let Some(cols) = problem.jacobian(&x, &r) else {
            return Err(LmFailure::Jacobian {
                x,
                history,
                iterations,
            });
        };
        if problem.scaled_gradient(&cols, &r) <= opts.gtol || ss == 0.0 {
            stopped = true;
            break;
        }
        let p = x.len();
        let a: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| dot(&cols[i], &cols[j])).collect())
            .collect();
        let g: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let diag_max = (0..p).map(|i| a[i][i]).fold(0.0, f64::max);
        if !(diag_max > 0.0 && diag_max.is_finite()) {
            return Err(LmFailure::Jacobian {
                x,
                history,
                iterations,
            });
        }

        let mut accepted = false;
        while lambda < 1e20 {
            let mut m = a.clone();
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-12 * diag_max);
            }
            let Some(step) = solve(m, g.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            problem.project(&mut trial);
            match problem.eval(&trial) {
                Some(rt) if sum_sq(&rt) < ss => {
                    let ss_new = sum_sq(&rt);
                    let small_step = x
                        .iter()
                        .zip(&trial)
                        .all(|(a, b)| (a - b).abs() <= opts.xtol * a.abs().max(1e-300));
                    let small_gain = ss - ss_new <= opts.ftol * ss;
                    x = trial;
                    r = rt;
                    ss = ss_new;
                    history.push(ss);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    stopped = small_step || small_gain;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            // No descent direction left at machine precision.
            stopped = true;
        }
        if stopped {
            break;
        }
    }

    let gradient_norm = problem.gradient_at(&x).unwrap_or(f64::INFINITY);
    Ok(LsqOutcome {
        converged: stopped && gradient_norm <= opts.gradient_tolerance,
        x,
        ss,
        iterations,
        history,
        gradient_norm,
        method: Method::LevenbergMarquardt,
    })
}

/// Derivative-free minimization of the residual sum of squares.
pub(crate) fn nelder_mead(
    problem: &Problem<'_>,
    x0: &[f64],
    prior_history: Vec<f64>,
    prior_iterations: usize,
    opts: &LsqOptions,
) -> Option<LsqOutcome> {
    let f = |x: &[f64]| problem.eval(x).map(|r| sum_sq(&r)).unwrap_or(f64::INFINITY);
    let p = x0.len();
    let mut start = x0.to_vec();
    problem.project(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p + 1);
    simplex.push((start.clone(), f(&start)));
    for j in 0..p {
        let mut v = start.clone();
        v[j] += if v[j] != 0.0 { 0.05 * v[j] } else { 2.5e-4 };
        problem.project(&mut v);
        let fv = f(&v);
        simplex.push((v, fv));
    }
    if !simplex[0].1.is_finite() {
        return None;
    }
    let mut history = prior_history;
    let mut best = simplex[0].1;
    if history.last().is_none_or(|&h| best < h) {
        history.push(best);
    }
    let max_iter = opts.max_iterations * 20 * p;
    let mut iterations = 0;
    let mut stopped = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[p].1);
        if lo < best {
            best = lo;
            history.push(best);
        }
        if (hi - lo).abs() <= opts.ftol * lo.abs() + f64::MIN_POSITIVE {
            stopped = true;
            break;
        }
        let centroid: Vec<f64> = (0..p)
            .map(|j| simplex[..p].iter().map(|(v, _)| v[j]).sum::<f64>() / p as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[p].0)
                .map(|(c, w)| c + t * (w - c))
                .collect();
            problem.project(&mut v);
            v
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[p] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[p - 1].1 {
            simplex[p] = (xr, fr);
        } else {
            let xc = if fr < simplex[p].1 {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&xc);
            if fc < simplex[p].1.min(fr) {
                simplex[p] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let mut v: Vec<f64> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(a, b)| a + 0.5 * (b - a))
                        .collect();
                    problem.project(&mut v);
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, ss) = simplex.swap_remove(0);
    if ss < best {
        history.push(ss);
    }
    let gradient_norm = problem.gradient_at(&x).unwrap_or(f64::INFINITY);
    Some(LsqOutcome {
        converged: stopped && gradient_norm <= opts.gradient_tolerance,
        x,
        ss,
        iterations: prior_iterations + iterations,
        history,
        gradient_norm,
        method: Method::NelderMead,
    })
}
