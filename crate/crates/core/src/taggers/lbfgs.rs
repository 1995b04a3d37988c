//! Limited-memory BFGS with a backtracking (Armijo) line search.
//!
//! Minimizes; callers maximizing a likelihood pass its negation. Every
//! accepted step strictly decreases the objective, and the iteration is
//! fully deterministic for a deterministic objective.

use std::collections::VecDeque;

use log::debug;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the relative decrease of one iteration falls below this.
    pub tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 100,
            tolerance: 1e-5,
            c1: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the value at `x` and writes the gradient.
pub fn minimize<F>(x0: Vec<f64>, mut f: F, cfg: &LbfgsConfig) -> Result<LbfgsReport>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    if !value.is_finite() {
        return Err(Error::Diverged(format!("objective {value} at the initial point")));
    }
    let mut history = vec![value];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= 1e-10 * dot(&x, &x).sqrt().max(1.0) {
            converged = true;
            break;
        }
        let mut d = direction(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = direction(&g, &pairs);
            slope = dot(&g, &d);
        }
        if pairs.is_empty() {
            // unit-length first step
            let scale = 1.0 / gnorm;
            d.iter_mut().for_each(|v| *v *= scale);
            slope *= scale;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let v = f(&x_new, &mut g_new);
            if v.is_finite() && v <= value + cfg.c1 * step * slope {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }
        let Some(v_new) = accepted else {
            debug!("line search made no progress after {iterations} iterations");
            converged = true;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        let decrease = value - v_new;
        value = v_new;
        history.push(value);
        debug!("iteration {iterations}: objective {value:.6} step {step}");
        if decrease <= cfg.tolerance * value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(LbfgsReport {
        x,
        value,
        iterations,
        history,
        converged,
    })
}

/// Two-loop recursion: `-H g` for the current curvature pairs.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q
}
