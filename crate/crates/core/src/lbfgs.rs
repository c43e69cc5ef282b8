//! Limited-memory BFGS minimiser with a strong-Wolfe line search
//! (Nocedal & Wright, Algorithms 7.4, 3.5 and 3.6).
//!
//! Works on plain `f64` slices; the objective returns value and gradient
//! together because every evaluation here is a full GRAPE pass.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsSettings {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the gradient 2-norm falls to this value.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Evaluation budget of a single line search.
    pub max_line_search_evals: usize,
    /// Largest change of any coordinate in the first steepest-descent trial step.
    pub initial_step: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 20,
            max_iterations: 2000,
            gradient_tolerance: 1e-4,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// One entry per accepted iterate, starting with the initial point.
    pub trace: Vec<TracePoint>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect()
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Counter<F> {
    objective: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Counter<F> {
    fn eval(&mut self, x: Vec<f64>) -> Point {
        self.evaluations += 1;
        let (f, g) = (self.objective)(&x);
        Point { x, f, g }
    }
}

/// Minimises `objective` from `x0`.
pub fn minimize<F>(objective: F, x0: Vec<f64>, settings: &LbfgsSettings) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut counter = Counter {
        objective,
        evaluations: 0,
    };
    let mut current = counter.eval(x0);
    let mut trace = vec![TracePoint {
        value: current.f,
        gradient_norm: norm(&current.g),
    }];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;

    let termination = loop {
        if !current.f.is_finite() {
            break Termination::LineSearchFailed;
        }
        if norm(&current.g) <= settings.gradient_tolerance {
            break Termination::Converged;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }

        let mut step = None;
        for attempt in 0..2 {
            let use_history = attempt == 0 && !history.is_empty();
            let (direction, alpha0) = if use_history {
                (two_loop(&current.g, &history), 1.0)
            } else {
                let p: Vec<f64> = current.g.iter().map(|g| -g).collect();
                let largest = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (p, settings.initial_step / largest.max(f64::MIN_POSITIVE))
            };
            let slope = dot(&current.g, &direction);
            if slope.is_nan() || slope >= 0.0 {
                history.clear();
                continue;
            }
            match line_search(&mut counter, &current, &direction, slope, alpha0, settings) {
                Ok(next) => {
                    step = Some(next);
                    break;
                }
                Err(best) => {
                    history.clear();
                    if let Some(best) = best {
                        if best.f < current.f {
                            step = Some(best);
                            break;
                        }
                    }
                    if !use_history {
                        break;
                    }
                }
            }
        }
        let Some(next) = step else {
            break Termination::LineSearchFailed;
        };

        let s: Vec<f64> = next.x.iter().zip(&current.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&current.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == settings.memory {
                history.pop_front();
            }
            if settings.memory > 0 {
                history.push_back((s, y, 1.0 / sy));
            }
        }
        current = next;
        iterations += 1;
        trace.push(TracePoint {
            value: current.f,
            gradient_norm: norm(&current.g),
        });
    };

    Minimum {
        x: current.x,
        value: current.f,
        gradient: current.g,
        iterations,
        evaluations: counter.evaluations,
        termination,
        trace,
    }
}

/// `−H·g` from the stored pairs, with the initial Hessian scaled by `sᵀy/yᵀy`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = history.back().expect("non-empty history");
    let gamma = dot(s, y) / dot(y, y);
    for qi in &mut q {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
}

/// Returns the accepted point, or on failure the lowest point seen (if any).
fn line_search<F>(
    counter: &mut Counter<F>,
    start: &Point,
    direction: &[f64],
    slope0: f64,
    alpha0: f64,
    settings: &LbfgsSettings,
) -> Result<Point, Option<Point>>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let f0 = start.f;
    let mut best: Option<Point> = None;
    let keep_best = |p: &Point, best: &mut Option<Point>| {
        if p.f.is_finite() && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point {
                x: p.x.clone(),
                f: p.f,
                g: p.g.clone(),
            });
        }
    };

    let mut prev = Trial {
        alpha: 0.0,
        f: f0,
        slope: slope0,
    };
    let mut alpha = alpha0;
    let mut evals = 0;
    let (mut lo, mut hi) = loop {
        if evals >= settings.max_line_search_evals {
            return Err(best);
        }
        evals += 1;
        let p = counter.eval(axpy(&start.x, alpha, direction));
        keep_best(&p, &mut best);
        let slope = dot(&p.g, direction);
        let trial = Trial { alpha, f: p.f, slope };
        if !p.f.is_finite() || p.f > f0 + settings.c1 * alpha * slope0 || (evals > 1 && p.f >= prev.f) {
            break (prev, trial);
        }
        if slope.abs() <= -settings.c2 * slope0 {
            return Ok(p);
        }
        if slope >= 0.0 {
            break (trial, prev);
        }
        prev = trial;
        alpha *= 2.5;
    };

    // zoom: `lo` satisfies sufficient decrease with the lowest value so far
    loop {
        if evals >= settings.max_line_search_evals {
            return Err(best);
        }
        let width = (hi.alpha - lo.alpha).abs();
        if width <= 1e-16 * lo.alpha.abs().max(1e-300) {
            return Err(best);
        }
        let alpha = safeguarded_cubic(&lo, &hi);
        evals += 1;
        let p = counter.eval(axpy(&start.x, alpha, direction));
        keep_best(&p, &mut best);
        let slope = dot(&p.g, direction);
        let trial = Trial { alpha, f: p.f, slope };
        if !p.f.is_finite() || p.f > f0 + settings.c1 * alpha * slope0 || p.f >= lo.f {
            hi = trial;
        } else {
            if slope.abs() <= -settings.c2 * slope0 {
                return Ok(p);
            }
            if slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
    }
}

/// Minimiser of the cubic through both end points, kept inside the middle
/// 80 % of the bracket; bisection when the cubic is degenerate.
fn safeguarded_cubic(a: &Trial, b: &Trial) -> f64 {
    let (x0, x1) = (a.alpha, b.alpha);
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (x0 - x1);
    let disc = d1 * d1 - a.slope * b.slope;
    let lower = x0.min(x1);
    let upper = x0.max(x1);
    let margin = 0.1 * (upper - lower);
    let mid = 0.5 * (x0 + x1);
    if !disc.is_finite() || disc < 0.0 {
        return mid;
    }
    let d2 = (x1 - x0).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let candidate = x1 - (x1 - x0) * (b.slope + d2 - d1) / denom;
    if !candidate.is_finite() {
        return mid;
    }
    candidate.clamp(lower + margin, upper - margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = 1.0 - x[i];
            let b = x[i + 1] - x[i] * x[i];
            f += a * a + 100.0 * b * b;
            g[i] += -2.0 * a - 400.0 * x[i] * b;
            g[i + 1] += 200.0 * b;
        }
        (f, g)
    }

    #[test]
    fn minimises_rosenbrock() {
        let settings = LbfgsSettings {
            gradient_tolerance: 1e-8,
            initial_step: 1.0,
            ..Default::default()
        };
        let m = minimize(rosenbrock, vec![-1.2, 1.0, -0.5, 0.8], &settings);
        assert_eq!(m.termination, Termination::Converged);
        for xi in &m.x {
            assert!((xi - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let m = minimize(rosenbrock, vec![-1.2, 1.0, 0.3], &LbfgsSettings::default());
        for w in m.trace.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
        assert_eq!(m.trace.len(), m.iterations + 1);
    }

    #[test]
    fn stationary_start_uses_one_evaluation() {
        let m = minimize(|x: &[f64]| (dot(x, x), x.iter().map(|v| 2.0 * v).collect()), vec![0.0; 3], &LbfgsSettings::default());
        assert_eq!(m.termination, Termination::Converged);
        assert_eq!(m.evaluations, 1);
        assert_eq!(m.iterations, 0);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let settings = LbfgsSettings {
            max_iterations: 3,
            gradient_tolerance: 0.0,
            ..Default::default()
        };
        let m = minimize(rosenbrock, vec![-1.2, 1.0], &settings);
        assert_eq!(m.termination, Termination::MaxIterations);
        assert_eq!(m.iterations, 3);
    }

    #[test]
    fn inconsistent_gradient_fails_gracefully() {
        // gradient points the wrong way, so no step can satisfy the conditions
        let m = minimize(
            |x: &[f64]| (x[0] * x[0], vec![-2.0 * x[0] - 1.0]),
            vec![1.0],
            &LbfgsSettings::default(),
        );
        assert_eq!(m.termination, Termination::LineSearchFailed);
        assert!(m.value <= 1.0);
    }
}
