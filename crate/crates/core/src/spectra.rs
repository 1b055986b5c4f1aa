//! Hessian spectral density by stochastic Lanczos quadrature, a dense
//! Hessian oracle for small networks, and the feature Gram check.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diff::Objective;
use crate::features::FeatureBank;
use crate::model::{seeded_rng, Stream};
use crate::pde::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlqConfig {
    pub n_probes: usize,
    pub lanczos_steps: usize,
    pub seed: u64,
    /// Smoothing bandwidth as a fraction of the observed spectral range.
    pub bandwidth_frac: f64,
}

impl Default for SlqConfig {
    fn default() -> Self {
        SlqConfig {
            n_probes: 100,
            lanczos_steps: 200,
            seed: 0,
            bandwidth_frac: 0.01,
        }
    }
}

/// Ritz nodes and weights of one probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub probes: Vec<ProbeQuadrature>,
    pub bandwidth_frac: f64,
}

impl SpectralDensity {
    pub fn lambda_max(&self) -> f64 {
        self.nodes().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lambda_min(&self) -> f64 {
        self.nodes().fold(f64::INFINITY, f64::min)
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.probes.iter().flat_map(|p| p.nodes.iter().copied())
    }

    /// Probe-averaged mass of Ritz nodes strictly above `threshold`.
    pub fn mass_above(&self, threshold: f64) -> f64 {
        let n = self.probes.len().max(1) as f64;
        self.probes
            .iter()
            .map(|p| {
                p.nodes
                    .iter()
                    .zip(&p.weights)
                    .filter(|(l, _)| **l > threshold)
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    /// Gaussian-smoothed density on `n` equispaced points.
    pub fn smoothed(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.lambda_min(), self.lambda_max());
        let range = (hi - lo).max(1e-12 * hi.abs().max(1.0));
        let bw = self.bandwidth_frac * range;
        let norm = 1.0 / (self.probes.len().max(1) as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
        let (a, b) = (lo - 5.0 * bw, hi + 5.0 * bw);
        (0..n)
            .map(|i| {
                let x = a + (b - a) * i as f64 / (n.max(2) - 1) as f64;
                let rho: f64 = self
                    .probes
                    .iter()
                    .flat_map(|p| p.nodes.iter().zip(&p.weights))
                    .map(|(l, w)| w * (-0.5 * ((x - l) / bw).powi(2)).exp())
                    .sum();
                (x, rho * norm)
            })
            .collect()
    }

    /// `node,weight,probe` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,weight,probe\n");
        for (k, p) in self.probes.iter().enumerate() {
            for (l, w) in p.nodes.iter().zip(&p.weights) {
                s.push_str(&format!("{l},{w},{k}\n"));
            }
        }
        s
    }

    pub fn smoothed_csv(&self, n: usize) -> String {
        let mut s = String::from("lambda,rho\n");
        for (l, r) in self.smoothed(n) {
            s.push_str(&format!("{l},{r}\n"));
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lanczos tridiagonalization with full reorthogonalization, started from
/// the unit vector `v0`. Stops early on breakdown.
pub fn lanczos(op: &dyn Fn(&[f64]) -> Vec<f64>, v0: &[f64], steps: usize) -> (Vec<f64>, Vec<f64>) {
    let n = v0.len();
    let steps = steps.min(n);
    let mut basis: Vec<Vec<f64>> = vec![v0.to_vec()];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    for j in 0..steps {
        let mut w = op(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1e-300);
        if j + 1 == steps || b <= 1e-10 * scale {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    (alpha, beta)
}

/// Gauss quadrature of the tridiagonal matrix: eigenvalues and squared first
/// eigenvector components.
pub fn tridiagonal_quadrature(alpha: &[f64], beta: &[f64]) -> ProbeQuadrature {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    ProbeQuadrature {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

pub fn slq_density(obj: &dyn Objective, params: &[f64], cfg: &SlqConfig) -> SpectralDensity {
    let n = params.len();
    let mut rng = seeded_rng(cfg.seed, Stream::Probes);
    let op = |v: &[f64]| obj.hvp(params, v);
    let probes = (0..cfg.n_probes)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let (a, b) = lanczos(&op, &v, cfg.lanczos_steps);
            tridiagonal_quadrature(&a, &b)
        })
        .collect();
    SpectralDensity {
        probes,
        bandwidth_frac: cfg.bandwidth_frac,
    }
}

/// Dense Hessian from Hessian-vector products on the basis vectors.
pub fn dense_hessian(obj: &dyn Objective, params: &[f64]) -> DMatrix<f64> {
    let n = params.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = obj.hvp(params, &e);
        for i in 0..n {
            h[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    h
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `max / min`, infinite when the matrix is numerically singular.
    pub condition: f64,
    /// `max / min` over eigenvalues above `1e-10 * max`.
    pub nonzero_ratio: f64,
    pub grid_points: usize,
}

/// Spectrum of `mean(phi phi^T)` over the grid.
pub fn gram_conditioning(bank: &FeatureBank, grid: &[Point]) -> GramReport {
    let rows: Vec<Vec<f64>> = grid.iter().map(|&p| bank.features(p)).collect();
    let f = rows.first().map_or(0, Vec::len);
    let mut g = DMatrix::<f64>::zeros(f, f);
    for r in &rows {
        for i in 0..f {
            for j in 0..f {
                g[(i, j)] += r[i] * r[j];
            }
        }
    }
    g /= grid.len().max(1) as f64;
    let ev = symmetric_eigenvalues(&g);
    let max = ev.last().copied().unwrap_or(0.0);
    let min = ev.first().copied().unwrap_or(0.0);
    let condition = if min > 1e-12 * max && max > 0.0 { max / min } else { f64::INFINITY };
    let nz: Vec<f64> = ev.iter().copied().filter(|v| *v > 1e-10 * max).collect();
    let nonzero_ratio = match (nz.first(), nz.last()) {
        (Some(a), Some(b)) => b / a,
        _ => f64::INFINITY,
    };
    GramReport {
        eigenvalues: ev,
        condition,
        nonzero_ratio,
        grid_points: grid.len(),
    }
}

/// `n x n` uniform tensor grid on `[0, period)^2` in `(x, t)`.
pub fn periodic_grid(n: usize, period: f64) -> Vec<Point> {
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push(Point::new(period * i as f64 / n as f64, period * j as f64 / n as f64));
        }
    }
    pts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigSummary {
    pub label: String,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `(threshold, mass above threshold)`.
    pub mass_above: Vec<(f64, f64)>,
}

pub const DENSITY_THRESHOLDS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// Spectral summary at each `(label, params)` checkpoint.
pub fn eig_trajectory(obj: &dyn Objective, checkpoints: &[(String, Vec<f64>)], cfg: &SlqConfig) -> Vec<EigSummary> {
    checkpoints
        .iter()
        .map(|(label, p)| {
            let d = slq_density(obj, p, cfg);
            EigSummary {
                label: label.clone(),
                lambda_max: d.lambda_max(),
                lambda_min: d.lambda_min(),
                mass_above: DENSITY_THRESHOLDS.iter().map(|&t| (t, d.mass_above(t))).collect(),
            }
        })
        .collect()
}
