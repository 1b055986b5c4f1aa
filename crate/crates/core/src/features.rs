//! Input feature maps: trainable Fourier cross-features with domain-knowledge
//! features and per-point centered normalization, plus the frozen baseline
//! maps (random Fourier features, normalized Gaussian RBF, periodic Fourier
//! embedding).
//!
//! Every map is available as plain values and as input-coordinate jets; the
//! trainable Fourier block also has a reverse pass producing gradients for
//! its frequencies and amplitudes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::jet::{Dir, Jet};
use crate::pde::{Point, ProblemId};
use crate::scalar::Scalar;

pub const NORM_EPS: f64 = 1e-3;

/// Input coordinates in network order: `(x, t)` or `(x, y, t)`.
pub fn input_coords(p: Point, spatial_dims: usize) -> Vec<(f64, Dir)> {
    if spatial_dims == 2 {
        vec![(p.x, Dir::X), (p.y, Dir::Y), (p.t, Dir::T)]
    } else {
        vec![(p.x, Dir::X), (p.t, Dir::T)]
    }
}

pub fn raw_jets(p: Point, spatial_dims: usize) -> Vec<Jet<f64>> {
    input_coords(p, spatial_dims)
        .into_iter()
        .map(|(v, d)| Jet::coordinate(v, d))
        .collect()
}

// ---------------------------------------------------------------------------
// Domain-knowledge features

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainFeature {
    WaveSinPix,
    WaveSin4Pix,
    ReactionGaussian,
    ConvectionSinX,
    HeatSin20Pix,
    HeatSinPiy,
    HeatProductMode,
    BurgersNegSinPix,
    DiffusionSinPix,
    AllenCahnX2,
    AllenCahnCosPix,
    AllenCahnProduct,
}

/// Jet of `a * f(k x)` as a function of x only, given `f, f', f''` at `k x`.
fn x_jet(f: [f64; 3], k: f64) -> Jet<f64> {
    let mut j = Jet::zero();
    j.c[0] = f[0];
    j.c[Dir::X.first()] = k * f[1];
    j.c[Dir::X.second()] = k * k * f[2];
    j
}

fn sin_jet(k: f64, v: f64, dir: Dir) -> Jet<f64> {
    let (s, c) = (k * v).sin_cos();
    let mut j = Jet::zero();
    j.c[0] = s;
    j.c[dir.first()] = k * c;
    j.c[dir.second()] = -k * k * s;
    j
}

impl DomainFeature {
    pub fn jet(self, p: Point) -> Jet<f64> {
        let x = p.x;
        match self {
            DomainFeature::WaveSinPix | DomainFeature::DiffusionSinPix => sin_jet(PI, x, Dir::X),
            DomainFeature::WaveSin4Pix => sin_jet(4.0 * PI, x, Dir::X),
            DomainFeature::ConvectionSinX => sin_jet(1.0, x, Dir::X),
            DomainFeature::BurgersNegSinPix => sin_jet(PI, x, Dir::X).scale(-1.0),
            DomainFeature::HeatSin20Pix => sin_jet(20.0 * PI, x, Dir::X),
            DomainFeature::HeatSinPiy => sin_jet(PI, p.y, Dir::Y),
            DomainFeature::HeatProductMode => {
                sin_jet(20.0 * PI, x, Dir::X).mul(&sin_jet(PI, p.y, Dir::Y))
            }
            DomainFeature::ReactionGaussian => {
                let s2 = (PI / 4.0) * (PI / 4.0);
                let h = crate::pde::reaction_h(x);
                let d = x - PI;
                x_jet([h, -d / s2 * h, (d * d / (s2 * s2) - 1.0 / s2) * h], 1.0)
            }
            DomainFeature::AllenCahnX2 => x_jet([x * x, 2.0 * x, 2.0], 1.0),
            DomainFeature::AllenCahnCosPix => {
                let (s, c) = (PI * x).sin_cos();
                x_jet([c, -s, -c], PI)
            }
            DomainFeature::AllenCahnProduct => {
                DomainFeature::AllenCahnX2.jet(p).mul(&DomainFeature::AllenCahnCosPix.jet(p))
            }
        }
    }

    pub fn eval(self, p: Point) -> f64 {
        self.jet(p).c[0]
    }
}

/// Registered domain-knowledge features of each benchmark.
pub fn dkf_list(id: ProblemId) -> &'static [DomainFeature] {
    use DomainFeature::*;
    match id {
        ProblemId::Wave => &[WaveSinPix, WaveSin4Pix],
        ProblemId::Reaction => &[ReactionGaussian],
        ProblemId::Convection => &[ConvectionSinX],
        ProblemId::Heat2D => &[HeatSin20Pix, HeatSinPiy, HeatProductMode],
        ProblemId::Burgers => &[BurgersNegSinPix],
        ProblemId::Diffusion => &[DiffusionSinPix],
        ProblemId::AllenCahn => &[AllenCahnX2, AllenCahnCosPix, AllenCahnProduct],
        ProblemId::NonHomogHeat => &[],
    }
}

pub fn dkf_features(id: ProblemId, p: Point) -> Vec<f64> {
    dkf_list(id).iter().map(|f| f.eval(p)).collect()
}

// ---------------------------------------------------------------------------
// Centered normalization

/// `(v - mean) / (||v - mean|| + eps)`.
pub fn normalize(v: &[f64]) -> Vec<f64> {
    normalize_eps(v, NORM_EPS)
}

pub fn normalize_eps(v: &[f64], eps: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = norm + eps;
    c.iter().map(|x| x / d).collect()
}

/// Intermediates of the jet normalization kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct NormTape<S> {
    centered: Vec<Jet<S>>,
    q: Jet<S>,
    d: Jet<S>,
    recip: Jet<S>,
}

fn sqrt_derivs<S: Scalar>(q: S) -> (S, [S; 3]) {
    // At an exactly constant feature vector the norm is not differentiable;
    // its derivatives are taken as zero there.
    if q.re() <= 0.0 {
        return (S::cst(0.0), [S::cst(0.0); 3]);
    }
    let s = q.sqrt();
    let inv = S::cst(1.0) / s;
    let inv3 = inv * inv * inv;
    (s, [inv.scale(0.5), inv3.scale(-0.25), inv3 * inv * inv.scale(0.375)])
}

fn recip_derivs<S: Scalar>(d: S) -> [S; 4] {
    let r = S::cst(1.0) / d;
    let r2 = r * r;
    [r, -r2, (r2 * r).scale(2.0), (r2 * r2).scale(-6.0)]
}

pub fn normalize_jets<S: Scalar>(v: &[Jet<S>], eps: f64) -> (Vec<Jet<S>>, NormTape<S>) {
    let n = v.len().max(1);
    let mut mean = Jet::zero();
    for j in v {
        mean.add_assign(j);
    }
    let mean = mean.scale(S::cst(1.0 / n as f64));
    let centered: Vec<Jet<S>> = v.iter().map(|j| j.sub(&mean)).collect();
    let mut q = Jet::zero();
    for c in &centered {
        q.add_assign(&c.mul(c));
    }
    let (s, ds) = sqrt_derivs(q.c[0]);
    let norm = q.unary([s, ds[0], ds[1]]);
    let d = norm.add_const(S::cst(eps));
    let rd = recip_derivs(d.c[0]);
    let recip = d.unary([rd[0], rd[1], rd[2]]);
    let out = centered.iter().map(|c| c.mul(&recip)).collect();
    (
        out,
        NormTape {
            centered,
            q,
            d,
            recip,
        },
    )
}

pub fn normalize_jets_backward<S: Scalar>(tape: &NormTape<S>, out_bar: &[Jet<S>]) -> Vec<Jet<S>> {
    let n = tape.centered.len().max(1);
    let mut cbar: Vec<Jet<S>> = Vec::with_capacity(tape.centered.len());
    let mut rbar = Jet::zero();
    for (c, ob) in tape.centered.iter().zip(out_bar) {
        cbar.push(Jet::mul_adjoint_one(c, &tape.recip, ob));
        rbar.add_assign(&Jet::mul_adjoint_one(&tape.recip, c, ob));
    }
    let rd = recip_derivs(tape.d.c[0]);
    let dbar = Jet::unary_adjoint(&tape.d, [rd[1], rd[2], rd[3]], &rbar);
    let (_, ds) = sqrt_derivs(tape.q.c[0]);
    let qbar = Jet::unary_adjoint(&tape.q, ds, &dbar);
    let two = S::cst(2.0);
    for (cb, c) in cbar.iter_mut().zip(&tape.centered) {
        cb.axpy(two, &Jet::mul_adjoint_one(c, c, &qbar));
    }
    let mut mean_bar = Jet::zero();
    for cb in &cbar {
        mean_bar.add_assign(cb);
    }
    let mean_bar = mean_bar.scale(S::cst(1.0 / n as f64));
    cbar.iter().map(|cb| cb.sub(&mean_bar)).collect()
}

// ---------------------------------------------------------------------------
// Trainable Fourier cross-features

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqInit {
    Harmonic,
    Gaussian,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffInit {
    Unit,
    Gaussian,
    Uniform,
    Xavier,
}

/// Shape of the trainable Fourier block. Per set there are `2^(d+1)`
/// products of cos/sin factors, one per axis; bit `a` of the product index
/// selects sin (1) or cos (0) on axis `a` in input order, so the 1-D
/// ordering is `[cos cos, sin cos, cos sin, sin sin]` (space first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierLayout {
    pub n_sets: usize,
    pub spatial_dims: usize,
    pub dkf: Vec<DomainFeature>,
    pub normalize: bool,
    pub eps: f64,
}

impl FourierLayout {
    pub fn axes(&self) -> usize {
        self.spatial_dims + 1
    }

    pub fn products(&self) -> usize {
        1 << self.axes()
    }

    pub fn n_fourier(&self) -> usize {
        self.products() * self.n_sets
    }

    pub fn n_features(&self) -> usize {
        self.n_fourier() + self.dkf.len()
    }

    /// Frequencies are stored axis-major: `omega_x[N]`, (`omega_y[N]`),
    /// `lambda_t[N]`.
    pub fn n_freq(&self) -> usize {
        self.axes() * self.n_sets
    }

    pub fn n_coeff(&self) -> usize {
        self.n_fourier()
    }

    pub fn init_frequencies(&self, init: FreqInit, k: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_freq());
        for axis in 0..self.axes() {
            for l in 0..self.n_sets {
                out.push(match init {
                    FreqInit::Harmonic => (l + 1) as f64 * PI / k[axis.min(k.len() - 1)],
                    FreqInit::Gaussian => Normal::new(0.0, PI).expect("finite").sample(rng),
                    FreqInit::Uniform => rng.random_range(0.0..2.0 * PI),
                });
            }
        }
        out
    }

    pub fn init_coeffs(&self, init: CoeffInit, rng: &mut impl Rng) -> Vec<f64> {
        let bound = (6.0 / self.axes() as f64).sqrt();
        (0..self.n_coeff())
            .map(|_| match init {
                CoeffInit::Unit => 1.0,
                CoeffInit::Gaussian => StandardNormal.sample(rng),
                CoeffInit::Uniform => rng.random_range(0.0..1.0),
                CoeffInit::Xavier => rng.random_range(-bound..bound),
            })
            .collect()
    }

    /// Plain values of the Fourier block (no DKF, no normalization).
    pub fn fourier_values(&self, freqs: &[f64], coeffs: &[f64], p: Point) -> Vec<f64> {
        let coords = input_coords(p, self.spatial_dims);
        let np = self.products();
        let mut out = Vec::with_capacity(self.n_fourier());
        for l in 0..self.n_sets {
            let trig: Vec<(f64, f64)> = coords
                .iter()
                .enumerate()
                .map(|(a, &(v, _))| {
                    let (s, c) = (freqs[a * self.n_sets + l] * v).sin_cos();
                    (c, s)
                })
                .collect();
            for j in 0..np {
                let mut prod = coeffs[l * np + j];
                for (a, &(c, s)) in trig.iter().enumerate() {
                    prod *= if (j >> a) & 1 == 1 { s } else { c };
                }
                out.push(prod);
            }
        }
        out
    }

    /// Fourier block, DKF and (optionally) normalization as plain values.
    pub fn feature_values(&self, freqs: &[f64], coeffs: &[f64], p: Point) -> Vec<f64> {
        let mut v = self.fourier_values(freqs, coeffs, p);
        v.extend(self.dkf.iter().map(|f| f.eval(p)));
        if self.normalize {
            normalize_eps(&v, self.eps)
        } else {
            v
        }
    }

    /// Jets of the full feature vector at one point.
    pub fn forward<S: Scalar>(
        &self,
        freqs: &[S],
        coeffs: &[S],
        p: Point,
    ) -> (Vec<Jet<S>>, FourierTape<S>) {
        let coords = input_coords(p, self.spatial_dims);
        let na = coords.len();
        let np = self.products();
        let mut args = Vec::with_capacity(na * self.n_sets);
        let mut trig = Vec::with_capacity(na * self.n_sets);
        let mut prods = Vec::with_capacity(self.n_fourier());
        let mut feats = Vec::with_capacity(self.n_features());
        for l in 0..self.n_sets {
            for (a, &(v, dir)) in coords.iter().enumerate() {
                let arg = Jet::<S>::coordinate(v, dir).scale(freqs[a * self.n_sets + l]);
                trig.push([arg.cos(), arg.sin()]);
                args.push(arg);
            }
            let t = &trig[l * na..(l + 1) * na];
            for j in 0..np {
                let mut prod = t[0][j & 1];
                for (a, pair) in t.iter().enumerate().skip(1) {
                    prod = prod.mul(&pair[(j >> a) & 1]);
                }
                feats.push(prod.scale(coeffs[l * np + j]));
                prods.push(prod);
            }
        }
        feats.extend(self.dkf.iter().map(|f| f.jet(p).lift::<S>()));
        let (out, norm) = if self.normalize {
            let (o, tape) = normalize_jets(&feats, self.eps);
            (o, Some(tape))
        } else {
            (feats, None)
        };
        (
            out,
            FourierTape {
                point: p,
                args,
                trig,
                prods,
                norm,
            },
        )
    }

    /// Accumulate frequency and amplitude gradients given the adjoint of the
    /// feature jets.
    pub fn backward<S: Scalar>(
        &self,
        tape: &FourierTape<S>,
        coeffs: &[S],
        out_bar: &[Jet<S>],
        dfreq: &mut [S],
        dcoeff: &mut [S],
    ) {
        let feat_bar = match &tape.norm {
            Some(n) => normalize_jets_backward(n, out_bar),
            None => out_bar.to_vec(),
        };
        let coords = input_coords(tape.point, self.spatial_dims);
        let na = coords.len();
        let np = self.products();
        let mut prefix: Vec<Jet<S>> = Vec::with_capacity(na);
        for l in 0..self.n_sets {
            let t = &tape.trig[l * na..(l + 1) * na];
            let mut tbar = vec![[Jet::<S>::zero(); 2]; na];
            for j in 0..np {
                let idx = l * np + j;
                let fb = &feat_bar[idx];
                dcoeff[idx] += fb.dot(&tape.prods[idx]);
                let pbar = fb.scale(coeffs[idx]);
                // prefix products of the factors, then unwind right to left
                prefix.clear();
                prefix.push(t[0][j & 1]);
                for (a, pair) in t.iter().enumerate().skip(1) {
                    let next = prefix[a - 1].mul(&pair[(j >> a) & 1]);
                    prefix.push(next);
                }
                let mut acc = pbar;
                for a in (1..na).rev() {
                    let bit = (j >> a) & 1;
                    let (left, right) = Jet::mul_adjoint(&prefix[a - 1], &t[a][bit], &acc);
                    tbar[a][bit].add_assign(&right);
                    acc = left;
                }
                tbar[0][j & 1].add_assign(&acc);
            }
            for (a, &(v, dir)) in coords.iter().enumerate() {
                let arg = &tape.args[l * na + a];
                let mut abar = Jet::unary_adjoint(arg, arg.cos_derivs(), &tbar[a][0]);
                abar.add_assign(&Jet::unary_adjoint(arg, arg.sin_derivs(), &tbar[a][1]));
                dfreq[a * self.n_sets + l] += abar.dot(&Jet::<S>::coordinate(v, dir));
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct FourierTape<S> {
    point: Point,
    args: Vec<Jet<S>>,
    trig: Vec<[Jet<S>; 2]>,
    prods: Vec<Jet<S>>,
    norm: Option<NormTape<S>>,
}

/// Standalone trainable feature bank (layout plus current values).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBank {
    pub layout: FourierLayout,
    pub freqs: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl FeatureBank {
    pub fn harmonic(n_sets: usize, k: f64) -> Self {
        let layout = FourierLayout {
            n_sets,
            spatial_dims: 1,
            dkf: Vec::new(),
            normalize: false,
            eps: NORM_EPS,
        };
        // harmonic frequencies and unit amplitudes draw nothing from the rng
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let freqs = layout.init_frequencies(FreqInit::Harmonic, &[k, 1.0], &mut rng);
        let coeffs = layout.init_coeffs(CoeffInit::Unit, &mut rng);
        FeatureBank {
            layout,
            freqs,
            coeffs,
        }
    }

    pub fn omega_x(&self) -> &[f64] {
        &self.freqs[..self.layout.n_sets]
    }

    pub fn lambda_t(&self) -> &[f64] {
        &self.freqs[(self.layout.axes() - 1) * self.layout.n_sets..]
    }

    pub fn fourier_features(&self, x: f64, t: f64) -> Vec<f64> {
        self.layout
            .fourier_values(&self.freqs, &self.coeffs, Point::new(x, t))
    }

    pub fn features(&self, p: Point) -> Vec<f64> {
        self.layout.feature_values(&self.freqs, &self.coeffs, p)
    }
}

// ---------------------------------------------------------------------------
// Random Fourier features

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    /// `m x d`, row-major.
    pub b: Vec<f64>,
    pub m: usize,
    pub d: usize,
    pub sigma_spatial: f64,
    pub sigma_temporal: f64,
}

impl RffMap {
    pub fn new(m: usize, spatial_dims: usize, rng: &mut impl Rng) -> Self {
        let d = spatial_dims + 1;
        let b = (0..m * d).map(|_| StandardNormal.sample(rng)).collect();
        RffMap {
            b,
            m,
            d,
            sigma_spatial: 200.0,
            sigma_temporal: 10.0,
        }
    }

    pub fn out_dim(&self) -> usize {
        2 * self.m
    }

    fn sigma(&self, axis: usize) -> f64 {
        if axis + 1 == self.d {
            self.sigma_temporal
        } else {
            self.sigma_spatial
        }
    }

    /// `[cos(2 pi B (sigma v)); sin(2 pi B (sigma v))]`.
    pub fn map(&self, p: Point) -> Vec<f64> {
        self.jets(p).iter().map(|j| j.c[0]).collect()
    }

    pub fn jets(&self, p: Point) -> Vec<Jet<f64>> {
        let coords = input_coords(p, self.d - 1);
        let args: Vec<Jet<f64>> = (0..self.m)
            .map(|i| {
                let mut arg = Jet::zero();
                for (a, &(v, dir)) in coords.iter().enumerate() {
                    let k = 2.0 * PI * self.b[i * self.d + a] * self.sigma(a);
                    arg.c[0] += k * v;
                    arg.c[dir.first()] += k;
                }
                arg
            })
            .collect();
        let mut out: Vec<Jet<f64>> = args.iter().map(|a| a.cos()).collect();
        out.extend(args.iter().map(|a| a.sin()));
        out
    }
}

// ---------------------------------------------------------------------------
// Normalized Gaussian RBF

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfMap {
    /// `m x d`, row-major.
    pub centers: Vec<f64>,
    pub m: usize,
    pub d: usize,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub poly_order: usize,
}

/// Exponent tuples of all monomials in `d` variables up to total degree `k`,
/// graded, then lexicographic in the variable index.
pub fn monomial_exponents(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; d]];
    let mut prev: Vec<(Vec<usize>, usize)> = vec![(vec![0; d], 0)];
    for _ in 1..=k {
        let mut next = Vec::new();
        for (e, last) in &prev {
            for v in *last..d {
                let mut e2 = e.clone();
                e2[v] += 1;
                next.push((e2, v));
            }
        }
        out.extend(next.iter().map(|(e, _)| e.clone()));
        prev = next;
    }
    out
}

impl RbfMap {
    pub fn new(m: usize, spatial_dims: usize, poly_order: usize, rng: &mut impl Rng) -> Self {
        let d = spatial_dims + 1;
        let centers = (0..m * d).map(|_| StandardNormal.sample(rng)).collect();
        RbfMap {
            centers,
            m,
            d,
            sigma: 1.0,
            weights: vec![1.0; m],
            poly_order,
        }
    }

    pub fn from_centers(centers: Vec<f64>, d: usize, weights: Vec<f64>, poly_order: usize) -> Self {
        let m = weights.len();
        assert_eq!(centers.len(), m * d);
        RbfMap {
            centers,
            m,
            d,
            sigma: 1.0,
            weights,
            poly_order,
        }
    }

    pub fn n_poly(&self) -> usize {
        if self.poly_order == 0 {
            0
        } else {
            monomial_exponents(self.d, self.poly_order).len()
        }
    }

    fn coords(&self, p: Point) -> Vec<(f64, Dir)> {
        input_coords(p, self.d - 1)
    }

    /// Normalized kernel jets `phi_i / sum_j phi_j`.
    pub fn kernel_jets(&self, p: Point) -> Vec<Jet<f64>> {
        let coords = self.coords(p);
        let r2: Vec<Jet<f64>> = (0..self.m)
            .map(|i| {
                let mut acc = Jet::zero();
                for (a, &(v, dir)) in coords.iter().enumerate() {
                    let diff = Jet::<f64>::coordinate(v, dir).add_const(-self.centers[i * self.d + a]);
                    acc.add_assign(&diff.mul(&diff));
                }
                acc
            })
            .collect();
        // Common factor exp(r2_min / 2 sigma^2) cancels in the ratio and keeps
        // the largest kernel at one.
        let imin = (0..self.m)
            .min_by(|&a, &b| r2[a].c[0].total_cmp(&r2[b].c[0]))
            .unwrap_or(0);
        let scale = -1.0 / (2.0 * self.sigma * self.sigma);
        let k: Vec<Jet<f64>> = r2
            .iter()
            .map(|r| r.sub(&r2[imin]).scale(scale).exp())
            .collect();
        let mut total = Jet::zero();
        for kj in &k {
            total.add_assign(kj);
        }
        let rd = recip_derivs(total.c[0]);
        let inv = total.unary([rd[0], rd[1], rd[2]]);
        k.iter().map(|kj| kj.mul(&inv)).collect()
    }

    pub fn poly_jets(&self, p: Point) -> Vec<Jet<f64>> {
        if self.poly_order == 0 {
            return Vec::new();
        }
        let coords: Vec<Jet<f64>> = self
            .coords(p)
            .into_iter()
            .map(|(v, d)| Jet::coordinate(v, d))
            .collect();
        monomial_exponents(self.d, self.poly_order)
            .iter()
            .map(|e| {
                let mut j = Jet::constant(1.0);
                for (a, &k) in e.iter().enumerate() {
                    for _ in 0..k {
                        j = j.mul(&coords[a]);
                    }
                }
                j
            })
            .collect()
    }

    /// Weighted normalized kernel sum, followed by the polynomial block when
    /// `poly_order > 0`.
    pub fn map(&self, p: Point) -> Vec<f64> {
        let phi: f64 = self
            .kernel_jets(p)
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| k.c[0] * w)
            .sum();
        let mut out = vec![phi];
        out.extend(self.poly_jets(p).iter().map(|j| j.c[0]));
        out
    }
}

pub fn rbf_map(map: &RbfMap, p: Point) -> Vec<f64> {
    map.map(p)
}

pub fn rff_map(map: &RffMap, p: Point) -> Vec<f64> {
    map.map(p)
}

// ---------------------------------------------------------------------------
// Periodic Fourier embedding used by the residual-attention baseline

/// `[1, cos(j w x), sin(j w x) for j = 1..m, t]` with `w = 2 pi / period`.
pub fn periodic_embedding_jets(p: Point, period: f64, m: usize) -> Vec<Jet<f64>> {
    let w = 2.0 * PI / period;
    let mut out = Vec::with_capacity(2 * m + 2);
    out.push(Jet::constant(1.0));
    let x = Jet::<f64>::coordinate(p.x, Dir::X);
    for j in 1..=m {
        let arg = x.scale(j as f64 * w);
        out.push(arg.cos());
        out.push(arg.sin());
    }
    out.push(Jet::coordinate(p.t, Dir::T));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn fourier_trivial_values() {
        let bank = FeatureBank::harmonic(3, 1.0);
        close(&bank.fourier_features(0.0, 0.0), &[1., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0.], 0.0);
        let one = FeatureBank::harmonic(1, 1.0);
        close(&one.fourier_features(0.5, 0.0), &[0.0, 1.0, 0.0, 0.0], 1e-15);
        assert_eq!(bank.omega_x(), &[PI, 2.0 * PI, 3.0 * PI]);
        assert_eq!(bank.lambda_t(), &[PI, 2.0 * PI, 3.0 * PI]);
    }

    #[test]
    fn dkf_values() {
        close(&dkf_features(ProblemId::Wave, Point::new(0.5, 0.3)), &[1.0, 0.0], 1e-15);
        close(&dkf_features(ProblemId::Burgers, Point::new(0.0, 0.3)), &[0.0], 0.0);
        close(&dkf_features(ProblemId::AllenCahn, Point::new(1.0, 0.0)), &[1.0, -1.0, -1.0], 1e-15);
        assert!(dkf_features(ProblemId::NonHomogHeat, Point::new(0.2, 0.1)).is_empty());
    }

    #[test]
    fn dkf_jets_match_finite_differences() {
        let h = 1e-5;
        for id in ProblemId::ALL {
            for f in dkf_list(id) {
                let p = Point::new_2d(0.37, 0.61, 0.2);
                let j = f.jet(p);
                let dx = |s: f64| f.eval(Point { x: p.x + s, ..p });
                let dy = |s: f64| f.eval(Point { y: p.y + s, ..p });
                let fx = (dx(h) - dx(-h)) / (2.0 * h);
                let fxx = (dx(h) - 2.0 * dx(0.0) + dx(-h)) / (h * h);
                let fy = (dy(h) - dy(-h)) / (2.0 * h);
                let scale = 1.0 + j.c[4].abs();
                assert!((fx - j.c[Dir::X.first()]).abs() < 1e-6 * scale, "{f:?}");
                assert!((fy - j.c[Dir::Y.first()]).abs() < 1e-6 * scale, "{f:?}");
                assert!((fxx - j.c[Dir::X.second()]).abs() < 1e-3 * scale, "{f:?}");
            }
        }
    }

    #[test]
    fn normalize_examples() {
        close(&normalize(&[1.0, 2.0, 3.0]), &[-0.70662, 0.0, 0.70662], 2e-5);
        let exact = 1.0 / (2f64.sqrt() + 1e-3);
        close(&normalize(&[1.0, 2.0, 3.0]), &[-exact, 0.0, exact], 1e-15);
        close(&normalize(&[5.0, 5.0]), &[0.0, 0.0], 0.0);
        let z = normalize(&[0.0; 6]);
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rff_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let map = RffMap::new(64, 1, &mut rng);
        let v = map.map(Point::new(0.0, 0.0));
        assert_eq!(v.len(), 128);
        assert!(v[..64].iter().all(|c| *c == 1.0) && v[64..].iter().all(|s| *s == 0.0));
        let p = Point::new(0.3, 0.7);
        assert_eq!(map.map(p), map.map(p));
    }

    #[test]
    fn rbf_examples() {
        let single = RbfMap::from_centers(vec![0.3, -0.2], 2, vec![2.5], 0);
        assert!((rbf_map(&single, Point::new(0.3, -0.2))[0] - 2.5).abs() < 1e-15);
        let two = RbfMap::from_centers(vec![-1.0, 0.0, 1.0, 0.0], 2, vec![1.0, 4.0], 0);
        assert!((two.map(Point::new(0.0, 0.7))[0] - 2.5).abs() < 1e-15);
        let poly = RbfMap::from_centers(vec![0.0, 0.0], 2, vec![1.0], 2);
        close(&poly.map(Point::new(2.0, 0.0))[1..], &[1.0, 2.0, 0.0, 4.0, 0.0, 0.0], 0.0);
        assert_eq!(monomial_exponents(3, 2).len(), 10);
    }

    #[test]
    fn periodic_embedding_is_periodic() {
        let a = periodic_embedding_jets(Point::new(0.1, 0.4), 2.0, 5);
        let b = periodic_embedding_jets(Point::new(2.1, 0.4), 2.0, 5);
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            for i in 0..7 {
                assert!((x.c[i] - y.c[i]).abs() < 1e-12);
            }
        }
    }

    fn layout(dims: usize, normalize: bool) -> FourierLayout {
        FourierLayout {
            n_sets: 3,
            spatial_dims: dims,
            dkf: if dims == 1 {
                vec![DomainFeature::WaveSinPix]
            } else {
                vec![DomainFeature::HeatProductMode]
            },
            normalize,
            eps: NORM_EPS,
        }
    }

    #[test]
    fn jet_forward_matches_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dims in [1, 2] {
            for norm in [false, true] {
                let l = layout(dims, norm);
                let f = l.init_frequencies(FreqInit::Gaussian, &[1.0], &mut rng);
                let c = l.init_coeffs(CoeffInit::Gaussian, &mut rng);
                let p = Point::new_2d(0.3, 0.8, 0.45);
                let (jets, _) = l.forward(&f, &c, p);
                let vals: Vec<f64> = jets.iter().map(|j| j.c[0]).collect();
                close(&vals, &l.feature_values(&f, &c, p), 1e-14);
            }
        }
    }

    #[test]
    fn jet_forward_input_derivatives_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = layout(1, true);
        let f = l.init_frequencies(FreqInit::Gaussian, &[1.0], &mut rng);
        let c = l.init_coeffs(CoeffInit::Gaussian, &mut rng);
        let p = Point::new(0.3, 0.45);
        let (jets, _) = l.forward(&f, &c, p);
        let h = 1e-4;
        let at = |dx: f64, dt: f64| l.feature_values(&f, &c, Point::new(p.x + dx, p.t + dt));
        let (xp, xm, tp, tm, c0) = (at(h, 0.0), at(-h, 0.0), at(0.0, h), at(0.0, -h), at(0.0, 0.0));
        for (i, j) in jets.iter().enumerate() {
            let fx = (xp[i] - xm[i]) / (2.0 * h);
            let ft = (tp[i] - tm[i]) / (2.0 * h);
            let fxx = (xp[i] - 2.0 * c0[i] + xm[i]) / (h * h);
            let ftt = (tp[i] - 2.0 * c0[i] + tm[i]) / (h * h);
            assert!((fx - j.c[1]).abs() < 1e-6, "x {i}");
            assert!((ft - j.c[2]).abs() < 1e-6, "t {i}");
            assert!((fxx - j.c[4]).abs() < 1e-4, "xx {i}");
            assert!((ftt - j.c[5]).abs() < 1e-4, "tt {i}");
        }
    }

    /// The reverse pass must be the transpose of the forward tangent map:
    /// for a random output adjoint `w`, `<w, dF[v]> = <F^T w, v>`.
    #[test]
    fn backward_is_adjoint_of_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dims in [1, 2] {
            for norm in [false, true] {
                let l = layout(dims, norm);
                let f = l.init_frequencies(FreqInit::Gaussian, &[1.0], &mut rng);
                let c = l.init_coeffs(CoeffInit::Gaussian, &mut rng);
                let vf: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let vc: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let p = Point::new_2d(0.21, 0.66, 0.37);
                let fd: Vec<Dual> = f.iter().zip(&vf).map(|(&a, &b)| Dual::new(a, b)).collect();
                let cd: Vec<Dual> = c.iter().zip(&vc).map(|(&a, &b)| Dual::new(a, b)).collect();
                let (jd, _) = l.forward(&fd, &cd, p);
                let w: Vec<Jet<f64>> = (0..jd.len())
                    .map(|_| {
                        let mut j = Jet::zero();
                        for v in j.c.iter_mut() {
                            *v = rng.random_range(-1.0..1.0);
                        }
                        j
                    })
                    .collect();
                let lhs: f64 = jd
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (0..7).map(|i| a.c[i].eps * b.c[i]).sum::<f64>())
                    .sum();
                let (_, tape) = l.forward(&f, &c, p);
                let mut gf = vec![0.0; f.len()];
                let mut gc = vec![0.0; c.len()];
                l.backward(&tape, &c, &w, &mut gf, &mut gc);
                let rhs: f64 = gf.iter().zip(&vf).map(|(a, b)| a * b).sum::<f64>()
                    + gc.iter().zip(&vc).map(|(a, b)| a * b).sum::<f64>();
                assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{dims} {norm}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn rbf_kernel_jets_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let map = RbfMap::new(8, 1, 2, &mut rng);
        let p = Point::new(0.4, 0.2);
        let j = map.kernel_jets(p);
        let h = 1e-4;
        let at = |dx: f64| map.kernel_jets(Point::new(p.x + dx, p.t));
        let (a, b, c) = (at(h), at(-h), at(0.0));
        for i in 0..8 {
            let fx = (a[i].c[0] - b[i].c[0]) / (2.0 * h);
            let fxx = (a[i].c[0] - 2.0 * c[i].c[0] + b[i].c[0]) / (h * h);
            assert!((fx - j[i].c[1]).abs() < 1e-7);
            assert!((fxx - j[i].c[4]).abs() < 1e-5);
        }
        let s: f64 = j.iter().map(|k| k.c[0]).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}
