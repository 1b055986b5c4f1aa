//! Adam with step decay and L-BFGS with a strong Wolfe line search.

use std::collections::VecDeque;

use crate::diff::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            decay: 0.9,
            decay_every: 2000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// `lr * decay^floor(iter / decay_every)`.
    pub fn lr_at(&self, iter: usize) -> f64 {
        self.lr * self.decay.powi((iter / self.decay_every) as i32)
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: usize,
}

impl AdamState {
    pub fn new(n: usize, cfg: AdamConfig) -> Self {
        AdamState {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        let c = self.cfg;
        let lr = c.lr_at(self.t);
        self.t += 1;
        let b1 = 1.0 - c.beta1.powi(self.t as i32);
        let b2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..x.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let mh = self.m[i] / b1;
            let vh = self.v[i] / b2;
            x[i] -= lr * mh / (vh.sqrt() + c.eps);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_linesearch: usize,
    pub tol: f64,
    pub stall_window: usize,
    pub stall_rel: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 50,
            c1: 1e-4,
            c2: 0.9,
            max_linesearch: 25,
            tol: 1e-10,
            stall_window: 200,
            stall_rel: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StallReason {
    /// Gradient max-norm at or below the tolerance.
    Converged,
    /// The line search could not find an acceptable positive step.
    ZeroStep,
    /// Relative improvement over the window fell below the threshold.
    NoProgress,
    /// Loss or gradient is not finite at the current iterate.
    NonFinite,
}

/// Quantities of an accepted line-search step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfeRecord {
    pub alpha: f64,
    pub f0: f64,
    pub dphi0: f64,
    pub f: f64,
    pub dphi: f64,
}

impl WolfeRecord {
    pub fn satisfies(&self, c1: f64, c2: f64) -> bool {
        self.f <= armijo_bound(self.f0, c1, self.alpha, self.dphi0) && self.dphi.abs() <= -c2 * self.dphi0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsStep {
    pub f: f64,
    pub stall: Option<StallReason>,
    pub evals: usize,
    pub accepted: Option<WolfeRecord>,
}

#[derive(Clone, Debug)]
pub struct LbfgsState {
    pub cfg: LbfgsConfig,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    f: f64,
    g: Vec<f64>,
    ready: bool,
    history: VecDeque<f64>,
    pub iterations: usize,
}

struct Trial {
    a: f64,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

/// Sufficient-decrease bound with a rounding allowance on `f0`.
fn armijo_bound(f0: f64, c1: f64, alpha: f64, dphi0: f64) -> f64 {
    f0 + c1 * alpha * dphi0 + 4.0 * f64::EPSILON * f0.abs()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let m = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    m.is_finite().then_some(m)
}

impl LbfgsState {
    pub fn new(cfg: LbfgsConfig) -> Self {
        LbfgsState {
            cfg,
            s: VecDeque::new(),
            y: VecDeque::new(),
            f: f64::NAN,
            g: Vec::new(),
            ready: false,
            history: VecDeque::new(),
            iterations: 0,
        }
    }

    /// Forget the curvature pairs and cached loss (after the objective
    /// changes).
    pub fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
        self.history.clear();
        self.ready = false;
    }

    pub fn loss(&self) -> f64 {
        self.f
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g
    }

    fn direction(&self) -> Vec<f64> {
        let mut q: Vec<f64> = self.g.iter().map(|v| -v).collect();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = 1.0 / dot(&self.y[i], &self.s[i]);
            let beta = rho * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        q
    }

    pub fn step(&mut self, obj: &dyn Objective, x: &mut [f64]) -> LbfgsStep {
        let mut evals = 0;
        if !self.ready {
            self.g = vec![0.0; x.len()];
            self.f = obj.value_grad(x, &mut self.g);
            evals += 1;
            self.ready = true;
        }
        let out = |f, stall, evals| LbfgsStep {
            f,
            stall: Some(stall),
            evals,
            accepted: None,
        };
        if !self.f.is_finite() || self.g.iter().any(|v| !v.is_finite()) {
            return out(self.f, StallReason::NonFinite, evals);
        }
        if self.g.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= self.cfg.tol {
            return out(self.f, StallReason::Converged, evals);
        }
        let mut d = self.direction();
        let mut dphi0 = dot(&self.g, &d);
        if !(dphi0 < 0.0) {
            self.s.clear();
            self.y.clear();
            d = self.g.iter().map(|v| -v).collect();
            dphi0 = dot(&self.g, &d);
        }
        let a0 = if self.s.is_empty() {
            (1.0 / dot(&self.g, &self.g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let (trial, n) = self.line_search(obj, x, &d, dphi0, a0);
        evals += n;
        let Some(t) = trial else {
            return out(self.f, StallReason::ZeroStep, evals);
        };
        let record = WolfeRecord {
            alpha: t.a,
            f0: self.f,
            dphi0,
            f: t.f,
            dphi: t.dphi,
        };
        let s: Vec<f64> = d.iter().map(|v| t.a * v).collect();
        if s.iter().all(|v| *v == 0.0) {
            return out(self.f, StallReason::ZeroStep, evals);
        }
        let y: Vec<f64> = t.g.iter().zip(&self.g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        if dot(&s, &y) > 0.0 {
            self.s.push_back(s);
            self.y.push_back(y);
            if self.s.len() > self.cfg.memory {
                self.s.pop_front();
                self.y.pop_front();
            }
        }
        self.f = t.f;
        self.g = t.g;
        self.iterations += 1;
        self.history.push_back(self.f);
        let mut stall = None;
        if self.history.len() > self.cfg.stall_window {
            let old = self.history.pop_front().expect("non-empty");
            if (old - self.f) <= self.cfg.stall_rel * old.abs().max(f64::MIN_POSITIVE) {
                stall = Some(StallReason::NoProgress);
            }
        }
        if self.g.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= self.cfg.tol {
            stall = Some(StallReason::Converged);
        }
        LbfgsStep {
            f: self.f,
            stall,
            evals,
            accepted: Some(record),
        }
    }

    fn eval(&self, obj: &dyn Objective, x: &[f64], d: &[f64], a: f64) -> Trial {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let mut g = vec![0.0; x.len()];
        let mut f = obj.value_grad(&xt, &mut g);
        let mut dphi = dot(&g, d);
        if !f.is_finite() || !dphi.is_finite() {
            f = f64::INFINITY;
            dphi = f64::NAN;
        }
        Trial { a, f, g, dphi }
    }

    fn line_search(
        &self,
        obj: &dyn Objective,
        x: &[f64],
        d: &[f64],
        dphi0: f64,
        a_init: f64,
    ) -> (Option<Trial>, usize) {
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        let f0 = self.f;
        let max = self.cfg.max_linesearch;
        let mut prev = Trial {
            a: 0.0,
            f: f0,
            g: self.g.clone(),
            dphi: dphi0,
        };
        let mut a = a_init;
        let mut evals = 0;
        while evals < max {
            let t = self.eval(obj, x, d, a);
            evals += 1;
            if t.f > armijo_bound(f0, c1, t.a, dphi0) || (evals > 1 && t.f >= prev.f) || !t.f.is_finite() {
                return self.zoom(obj, x, d, dphi0, prev, t, evals);
            }
            if t.dphi.abs() <= -c2 * dphi0 {
                return (Some(t), evals);
            }
            if t.dphi >= 0.0 {
                return self.zoom(obj, x, d, dphi0, t, prev, evals);
            }
            let next = cubic_min(prev.a, prev.f, prev.dphi, t.a, t.f, t.dphi)
                .filter(|m| *m > 1.1 * t.a && *m < 10.0 * t.a)
                .unwrap_or(2.0 * t.a);
            prev = t;
            a = next;
        }
        (None, evals)
    }

    #[allow(clippy::too_many_arguments)]
    fn zoom(
        &self,
        obj: &dyn Objective,
        x: &[f64],
        d: &[f64],
        dphi0: f64,
        mut lo: Trial,
        mut hi: Trial,
        mut evals: usize,
    ) -> (Option<Trial>, usize) {
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        let f0 = self.f;
        while evals < self.cfg.max_linesearch {
            let (a, b) = (lo.a.min(hi.a), lo.a.max(hi.a));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1e-300) {
                break;
            }
            let guess = if hi.f.is_finite() {
                cubic_min(lo.a, lo.f, lo.dphi, hi.a, hi.f, hi.dphi)
            } else {
                None
            };
            let at = guess
                .filter(|m| *m > a + 0.1 * width && *m < b - 0.1 * width)
                .unwrap_or(0.5 * (a + b));
            let t = self.eval(obj, x, d, at);
            evals += 1;
            if t.f > armijo_bound(f0, c1, t.a, dphi0) || t.f >= lo.f || !t.f.is_finite() {
                hi = t;
            } else {
                if t.dphi.abs() <= -c2 * dphi0 {
                    return (Some(t), evals);
                }
                if t.dphi * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        (None, evals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Quadratic, Rosenbrock};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_lr_schedule() {
        let c = AdamConfig::new(1e-3);
        assert_eq!(c.lr_at(0), 1e-3);
        assert!((c.lr_at(2000) - 9e-4).abs() < 1e-18);
        assert!((c.lr_at(4000) - 8.1e-4).abs() < 1e-18);
        assert_eq!(c.lr_at(1999), 1e-3);
        let mut prev = f64::INFINITY;
        for it in (0..20_000).step_by(97) {
            assert!(c.lr_at(it) <= prev);
            prev = c.lr_at(it);
        }
    }

    #[test]
    fn adam_zero_grad_and_quadratic() {
        let mut st = AdamState::new(2, AdamConfig::new(1e-2));
        let mut x = vec![1.0, -2.0];
        st.step(&mut x, &[0.0, 0.0]);
        assert_eq!(x, vec![1.0, -2.0]);
        let q = Quadratic {
            a: vec![2.0, 0.5, 0.5, 1.0],
            b: vec![1.0, -1.0],
        };
        let det = 2.0 - 0.25;
        let xstar = [(1.0 + 0.5) / det, (-0.5 - 2.0) / det];
        let mut st = AdamState::new(2, AdamConfig::new(1e-2));
        let mut g = vec![0.0; 2];
        for _ in 0..5000 {
            q.value_grad(&x, &mut g);
            st.step(&mut x, &g);
        }
        let err = ((x[0] - xstar[0]).powi(2) + (x[1] - xstar[1]).powi(2)).sqrt();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let r = Rosenbrock { n: 2 };
        let mut x = vec![-1.2, 1.0];
        let mut st = LbfgsState::new(LbfgsConfig::default());
        let mut f = f64::INFINITY;
        for _ in 0..200 {
            let s = st.step(&r, &mut x);
            f = s.f;
            if let Some(rec) = s.accepted {
                assert!(rec.satisfies(1e-4, 0.9));
            }
            if f < 1e-8 || s.stall.is_some() {
                break;
            }
        }
        assert!(f < 1e-8, "{f}");
    }

    #[test]
    fn lbfgs_quadratic_terminates_in_n_plus_one() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>() / n as f64;
            }
            a[i * n + i] += 1.0;
        }
        let q = Quadratic {
            a,
            b: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let mut x = vec![0.0; n];
        let mut st = LbfgsState::new(LbfgsConfig::default());
        let mut iters = 0;
        while iters < 51 {
            let s = st.step(&q, &mut x);
            if s.stall.is_some() {
                break;
            }
            iters += 1;
        }
        let mut g = vec![0.0; n];
        q.value_grad(&x, &mut g);
        assert!(g.iter().all(|v| v.abs() <= 1e-10), "after {iters}");
        assert!(iters <= 51);
    }

    #[test]
    fn lbfgs_zero_gradient_stalls_immediately() {
        let q = Quadratic {
            a: vec![1.0, 0.0, 0.0, 1.0],
            b: vec![0.0, 0.0],
        };
        let mut x = vec![0.0, 0.0];
        let mut st = LbfgsState::new(LbfgsConfig::default());
        let s = st.step(&q, &mut x);
        assert_eq!(s.stall, Some(StallReason::Converged));
        assert_eq!(x, vec![0.0, 0.0]);
    }
}
