//! Projected limited-memory BFGS for `min f(x)` subject to `x >= lb`.

use std::collections::VecDeque;

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Projected-gradient norm below the tolerance.
    Converged,
    /// Iteration budget exhausted; the best iterate is returned.
    IterationLimit,
    /// No sufficient-decrease step exists along steepest descent (typical at
    /// a kink of a nonsmooth objective); the best iterate is returned.
    Stalled,
    /// Solved in closed form without iterating.
    ShortCircuit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub memory: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub contraction: f64,
    pub max_trials: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            memory: 10,
            armijo: 1e-4,
            contraction: 0.5,
            max_trials: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult<E> {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub extra: E,
    pub iterations: usize,
    pub status: Status,
    /// Objective values of accepted iterates, starting with the initial point.
    pub trace: Vec<f64>,
}

/// `‖x - clamp(x - g)‖∞`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lb: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lb)
        .map(|((xi, gi), li)| (xi - (xi - gi).max(*li)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes over the box `x >= lb`.
///
/// `eval` returns the value, a (sub)gradient and a payload carried along with
/// the best iterate; an `Err` marks a point outside the domain, which the
/// line search treats as a rejected trial. The starting point must evaluate.
pub fn minimize<E, Err, F>(
    mut eval: F,
    x0: &[f64],
    lb: &[f64],
    opts: &LbfgsOptions,
) -> Result<LbfgsResult<E>, Err>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>, E), Err>,
{
    let n = x0.len();
    let project = |x: &mut [f64]| x.iter_mut().zip(lb).for_each(|(v, l)| *v = v.max(*l));
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut f, mut g, mut extra) = eval(&x)?;
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut status = Status::IterationLimit;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if projected_gradient_norm(&x, &g, lb) <= opts.grad_tol {
            status = Status::Converged;
            break;
        }
        // coordinates held at the bound by a gradient pushing outward
        let free: Vec<bool> = (0..n).map(|j| !(x[j] <= lb[j] && g[j] > 0.0)).collect();
        let masked = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(&free)
                .map(|(a, f)| if *f { *a } else { 0.0 })
                .collect()
        };

        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if history.is_empty() {
                    break;
                }
                history.clear();
            }
            let gm = masked(&g);
            let mut d = two_loop(&gm, &history);
            d = masked(&d);
            d.iter_mut().for_each(|v| *v = -*v);
            let slope = dot(&d, &gm);
            if slope.is_nan() || slope >= 0.0 {
                history.clear();
                d = gm.iter().map(|v| -v).collect();
            }
            let mut t = if history.is_empty() {
                let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if dn > 0.0 {
                    (1.0 / dn).min(1.0)
                } else {
                    1.0
                }
            } else {
                1.0
            };
            for _ in 0..opts.max_trials {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project(&mut trial);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &step);
                if decrease < 0.0 {
                    if let Ok((ft, gt, et)) = eval(&trial) {
                        if ft <= f + opts.armijo * decrease {
                            accepted = Some((trial, step, ft, gt, et));
                            break;
                        }
                    }
                }
                t *= opts.contraction;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((trial, step, ft, gt, et)) = accepted else {
            status = Status::Stalled;
            break;
        };
        let yk: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &yk);
        if sy > 1e-12 * dot(&step, &step).sqrt() * dot(&yk, &yk).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((step, yk, 1.0 / sy));
        } else {
            history.clear();
        }
        x = trial;
        f = ft;
        g = gt;
        extra = et;
        trace.push(f);
        iterations += 1;
    }
    if status == Status::IterationLimit && projected_gradient_norm(&x, &g, lb) <= opts.grad_tol {
        status = Status::Converged;
    }
    Ok(LbfgsResult {
        x,
        value: f,
        gradient: g,
        extra,
        iterations,
        status,
        trace,
    })
}

/// Two-loop recursion: returns `H g` for the implicit inverse-Hessian
/// approximation `H`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>, ()), ()> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok((f, g, ()))
    }

    #[test]
    fn solves_rosenbrock() {
        let r = minimize(
            rosenbrock,
            &[-1.2, 1.0],
            &[f64::NEG_INFINITY; 2],
            &LbfgsOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        // minimum of (x+1)² + (y-2)² on x >= 0 is at (0, 2)
        let eval = |x: &[f64]| -> Result<(f64, Vec<f64>, ()), ()> {
            Ok((
                (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2),
                vec![2.0 * (x[0] + 1.0), 2.0 * (x[1] - 2.0)],
                (),
            ))
        };
        let r = minimize(
            eval,
            &[-3.0, 0.0],
            &[0.0, f64::NEG_INFINITY],
            &LbfgsOptions::default(),
        )
        .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.x[0] == 0.0 && (r.x[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn domain_errors_reject_trials() {
        // f(x) = x² - 2x is only defined for x <= 0.5; minimum over the domain at 0.5
        let eval = |x: &[f64]| -> Result<(f64, Vec<f64>, ()), ()> {
            if x[0] > 0.5 {
                Err(())
            } else {
                Ok((x[0] * x[0] - 2.0 * x[0], vec![2.0 * x[0] - 2.0], ()))
            }
        };
        let r = minimize(eval, &[0.0], &[f64::NEG_INFINITY], &LbfgsOptions::default()).unwrap();
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.49);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
