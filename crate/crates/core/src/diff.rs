//! Batched forward-mode input derivatives with reverse-mode parameter
//! gradients, generic over the scalar so the same code yields
//! Hessian-vector products when run on dual numbers.
//!
//! A block of points is laid out as one matrix per layer whose rows are
//! `(component, point)` pairs, so each dense layer is a single GEMM.

use crate::error::{Error, Result};
use crate::features::{periodic_embedding_jets, raw_jets, FourierTape};
use crate::jet::{Comp, CompMask, Jet, NCOMP};
use crate::model::{InputMap, Layer, Model};
use crate::pde::{DerivativeBundle, Point};
use crate::scalar::{seed_duals, Dual, Scalar};

const CHUNK: usize = 128;

/// Points sharing one derivative mask, with any fixed input jets cached.
#[derive(Clone, Debug)]
pub struct PointBlock {
    pub points: Vec<Point>,
    pub mask: CompMask,
    comps: Vec<usize>,
    /// `points.len() * input_dim` jets for frozen input maps.
    inputs: Option<Vec<Jet<f64>>>,
}

impl PointBlock {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn comps(&self) -> &[usize] {
        &self.comps
    }
}

struct LayerCache<S> {
    /// Pre-activation rows, `K * P x H`.
    z: Vec<S>,
    /// `[s', s'', s''']` per `(point, unit)`.
    d: Vec<[S; 3]>,
}

struct ChunkTape<S> {
    start: usize,
    len: usize,
    /// Input to each dense layer.
    acts: Vec<Vec<S>>,
    caches: Vec<LayerCache<S>>,
    fourier: Vec<FourierTape<S>>,
}

/// Saved forward state for one block.
pub struct Tape<S> {
    chunks: Vec<ChunkTape<S>>,
}

pub struct Engine<'m> {
    pub model: &'m Model,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m Model) -> Self {
        Engine { model }
    }

    pub fn prepare(&self, points: &[Point], mask: CompMask) -> Result<PointBlock> {
        let mask = mask.union(CompMask::VALUE);
        let supported = self.model.supported_mask().union(CompMask::VALUE);
        if let Some(c) = Comp::ALL
            .into_iter()
            .find(|&c| mask.contains(c) && !supported.contains(c))
        {
            return Err(Error::UnsupportedDerivative(c.name()));
        }
        let inputs = match &self.model.input {
            InputMap::Fourier(_) => None,
            _ => {
                let mut v = Vec::with_capacity(points.len() * self.model.input_dim());
                for &p in points {
                    v.extend(self.fixed_input(p));
                }
                Some(v)
            }
        };
        Ok(PointBlock {
            points: points.to_vec(),
            mask,
            comps: mask.indices(),
            inputs,
        })
    }

    fn fixed_input(&self, p: Point) -> Vec<Jet<f64>> {
        match &self.model.input {
            InputMap::Raw => raw_jets(p, self.model.spatial_dims),
            InputMap::Rff(m) => m.jets(p),
            InputMap::Rbf(m) => {
                let mut v = m.kernel_jets(p);
                v.extend(m.poly_jets(p));
                v
            }
            InputMap::Periodic { period, m } => periodic_embedding_jets(p, *period, *m),
            InputMap::Fourier(_) => unreachable!("trainable features are not cached"),
        }
    }

    /// Output jets for every point of the block (inactive components zero).
    pub fn forward<S: Scalar>(&self, params: &[S], block: &PointBlock) -> (Vec<Jet<S>>, Tape<S>) {
        let mut out = Vec::with_capacity(block.len());
        let mut chunks = Vec::new();
        let mut start = 0;
        while start < block.len() {
            let len = CHUNK.min(block.len() - start);
            let (o, t) = self.forward_chunk(params, block, start, len, true);
            out.extend(o);
            chunks.push(t);
            start += len;
        }
        (out, Tape { chunks })
    }

    /// Values only, without keeping a tape.
    pub fn forward_values<S: Scalar>(&self, params: &[S], block: &PointBlock) -> (Vec<S>, ()) {
        let mut out = Vec::with_capacity(block.len());
        let mut start = 0;
        while start < block.len() {
            let len = CHUNK.min(block.len() - start);
            let (o, _) = self.forward_chunk(params, block, start, len, false);
            out.extend(o.iter().map(|j| j.c[0]));
            start += len;
        }
        (out, ())
    }

    fn input_rows<S: Scalar>(
        &self,
        params: &[S],
        block: &PointBlock,
        start: usize,
        len: usize,
        keep: bool,
    ) -> (Vec<S>, Vec<FourierTape<S>>) {
        let f = self.model.input_dim();
        let comps = &block.comps;
        let mut a = vec![S::default(); comps.len() * len * f];
        let mut tapes = Vec::new();
        let mut put = |p: usize, jets: &[Jet<S>]| {
            for (k, &c) in comps.iter().enumerate() {
                let row = &mut a[(k * len + p) * f..(k * len + p + 1) * f];
                for (slot, j) in row.iter_mut().zip(jets) {
                    *slot = j.c[c];
                }
            }
        };
        match (&self.model.input, &block.inputs) {
            (InputMap::Fourier(layout), _) => {
                let fs = self.model.segment("feature-frequencies").expect("segment");
                let cs = self.model.segment("feature-coeffs").expect("segment");
                let freqs = &params[fs.start..fs.start + fs.len];
                let coeffs = &params[cs.start..cs.start + cs.len];
                for p in 0..len {
                    let (jets, tape) = layout.forward(freqs, coeffs, block.points[start + p]);
                    put(p, &jets);
                    if keep {
                        tapes.push(tape);
                    }
                }
            }
            (_, Some(inputs)) => {
                let mut buf = Vec::with_capacity(f);
                for p in 0..len {
                    buf.clear();
                    buf.extend(inputs[(start + p) * f..(start + p + 1) * f].iter().map(|j| j.lift::<S>()));
                    put(p, &buf);
                }
            }
            _ => unreachable!("fixed inputs are prepared with the block"),
        }
        (a, tapes)
    }

    fn dense<S: Scalar>(params: &[S], layer: &Layer, a: &[S], rows: usize, len: usize) -> Vec<S> {
        let (fi, fo) = (layer.fan_in, layer.fan_out);
        let w = &params[layer.w_off..layer.w_off + fi * fo];
        let mut z = vec![S::default(); rows * fo];
        S::gemm(rows, fi, fo, a, fi, 1, w, 1, fi, 0.0, &mut z, fo, 1);
        let b = &params[layer.b_off..layer.b_off + fo];
        for p in 0..len {
            for (zv, bv) in z[p * fo..(p + 1) * fo].iter_mut().zip(b) {
                *zv += *bv;
            }
        }
        z
    }

    fn forward_chunk<S: Scalar>(
        &self,
        params: &[S],
        block: &PointBlock,
        start: usize,
        len: usize,
        keep: bool,
    ) -> (Vec<Jet<S>>, ChunkTape<S>) {
        let comps = &block.comps;
        let pos = positions(comps);
        let kk = comps.len();
        let rows = kk * len;
        let (mut a, fourier) = self.input_rows(params, block, start, len, keep);
        let mut acts = Vec::new();
        let mut caches = Vec::new();
        let layers = &self.model.layers;
        for layer in layers {
            let z = Self::dense(params, layer, &a, rows, len);
            let Some(act) = layer.act else {
                if keep {
                    acts.push(a);
                }
                a = z;
                break;
            };
            let h = layer.fan_out;
            let mut out = vec![S::default(); rows * h];
            let mut d = vec![[S::default(); 3]; len * h];
            for p in 0..len {
                for u in 0..h {
                    let s = act.derivs(z[p * h + u]);
                    out[p * h + u] = s[0];
                    d[p * h + u] = [s[1], s[2], s[3]];
                    for dir in 0..3 {
                        let Some(k1) = pos[1 + dir] else { continue };
                        let z1 = z[(k1 * len + p) * h + u];
                        out[(k1 * len + p) * h + u] = s[1] * z1;
                        if let Some(k2) = pos[4 + dir] {
                            let z2 = z[(k2 * len + p) * h + u];
                            out[(k2 * len + p) * h + u] = s[2] * z1 * z1 + s[1] * z2;
                        }
                    }
                }
            }
            if keep {
                acts.push(std::mem::replace(&mut a, out));
                caches.push(LayerCache { z, d });
            } else {
                a = out;
            }
        }
        let mut jets = vec![Jet::<S>::zero(); len];
        for (p, jet) in jets.iter_mut().enumerate() {
            for (k, &c) in comps.iter().enumerate() {
                jet.c[c] = a[k * len + p];
            }
        }
        (
            jets,
            ChunkTape {
                start,
                len,
                acts,
                caches,
                fourier,
            },
        )
    }

    /// Accumulate `d/dparams sum_p <out_bar[p], out[p]>` into `grad`.
    pub fn backward<S: Scalar>(
        &self,
        params: &[S],
        block: &PointBlock,
        tape: &Tape<S>,
        out_bar: &[Jet<S>],
        grad: &mut [S],
    ) {
        for ch in &tape.chunks {
            self.backward_chunk(params, block, ch, &out_bar[ch.start..ch.start + ch.len], grad);
        }
    }

    fn backward_chunk<S: Scalar>(
        &self,
        params: &[S],
        block: &PointBlock,
        ch: &ChunkTape<S>,
        out_bar: &[Jet<S>],
        grad: &mut [S],
    ) {
        let comps = &block.comps;
        let pos = positions(comps);
        let len = ch.len;
        let rows = comps.len() * len;
        let mut zbar = vec![S::default(); rows];
        for (p, jb) in out_bar.iter().enumerate() {
            for (k, &c) in comps.iter().enumerate() {
                zbar[k * len + p] = jb.c[c];
            }
        }
        let layers = &self.model.layers;
        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let a = &ch.acts[li];
            // dW += Zbar^T A
            S::gemm(
                fo,
                rows,
                fi,
                &zbar,
                1,
                fo,
                a,
                fi,
                1,
                1.0,
                &mut grad[layer.w_off..layer.w_off + fi * fo],
                fi,
                1,
            );
            let gb = &mut grad[layer.b_off..layer.b_off + fo];
            for p in 0..len {
                for (g, z) in gb.iter_mut().zip(&zbar[p * fo..(p + 1) * fo]) {
                    *g += *z;
                }
            }
            let need_input_bar = li > 0 || self.model.fourier().is_some();
            if !need_input_bar {
                break;
            }
            let w = &params[layer.w_off..layer.w_off + fi * fo];
            let mut abar = vec![S::default(); rows * fi];
            S::gemm(rows, fo, fi, &zbar, fo, 1, w, fi, 1, 0.0, &mut abar, fi, 1);
            if li == 0 {
                self.fourier_backward(params, block, ch, &abar, grad);
                break;
            }
            let cache = &ch.caches[li - 1];
            let h = fi;
            let mut zb = vec![S::default(); rows * h];
            for p in 0..len {
                for u in 0..h {
                    let [s1, s2, s3] = cache.d[p * h + u];
                    let mut v = abar[p * h + u] * s1;
                    for dir in 0..3 {
                        let Some(k1) = pos[1 + dir] else { continue };
                        let i1 = (k1 * len + p) * h + u;
                        let z1 = cache.z[i1];
                        let hb1 = abar[i1];
                        v += hb1 * s2 * z1;
                        let mut v1 = hb1 * s1;
                        if let Some(k2) = pos[4 + dir] {
                            let i2 = (k2 * len + p) * h + u;
                            let hb2 = abar[i2];
                            let z2 = cache.z[i2];
                            v += hb2 * (s3 * z1 * z1 + s2 * z2);
                            v1 += (hb2 * s2 * z1).scale(2.0);
                            zb[i2] = hb2 * s1;
                        }
                        zb[i1] = v1;
                    }
                    zb[p * h + u] = v;
                }
            }
            zbar = zb;
        }
    }

    fn fourier_backward<S: Scalar>(
        &self,
        params: &[S],
        block: &PointBlock,
        ch: &ChunkTape<S>,
        abar: &[S],
        grad: &mut [S],
    ) {
        let Some(layout) = self.model.fourier() else { return };
        let fs = self.model.segment("feature-frequencies").expect("segment").clone();
        let cs = self.model.segment("feature-coeffs").expect("segment").clone();
        let coeffs = &params[cs.start..cs.start + cs.len];
        let f = self.model.input_dim();
        let len = ch.len;
        let mut dfreq = vec![S::default(); fs.len];
        let mut dcoeff = vec![S::default(); cs.len];
        let mut jets = vec![Jet::<S>::zero(); f];
        for (p, tape) in ch.fourier.iter().enumerate() {
            for (i, j) in jets.iter_mut().enumerate() {
                *j = Jet::zero();
                for (k, &c) in block.comps.iter().enumerate() {
                    j.c[c] = abar[(k * len + p) * f + i];
                }
            }
            layout.backward(tape, coeffs, &jets, &mut dfreq, &mut dcoeff);
        }
        for (g, d) in grad[fs.start..fs.start + fs.len].iter_mut().zip(dfreq) {
            *g += d;
        }
        for (g, d) in grad[cs.start..cs.start + cs.len].iter_mut().zip(dcoeff) {
            *g += d;
        }
    }
}

fn positions(comps: &[usize]) -> [Option<usize>; NCOMP] {
    let mut pos = [None; NCOMP];
    for (k, &c) in comps.iter().enumerate() {
        pos[c] = Some(k);
    }
    pos
}

/// Network value and the requested input derivatives at one point.
pub fn eval_with_input_derivs(
    model: &Model,
    params: &[f64],
    p: Point,
    mask: CompMask,
) -> Result<DerivativeBundle> {
    model.check_len(params.len())?;
    let engine = Engine::new(model);
    let block = engine.prepare(&[p], mask)?;
    let (out, _) = engine.forward(params, &block);
    Ok(DerivativeBundle {
        jet: out[0],
        present: block.mask,
    })
}

// ---------------------------------------------------------------------------
// Objectives

/// Smooth scalar objective over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }

    /// Returns the value and overwrites `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Hessian-vector product.
    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// Objective written once over [`Scalar`]; the Hessian-vector product is the
/// directional derivative of the gradient obtained with dual numbers.
pub trait GenericObjective {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], grad: &mut [S]) -> S;
}

impl<T: GenericObjective> Objective for T {
    fn dim(&self) -> usize {
        GenericObjective::dim(self)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        self.eval(x, grad)
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let xd = seed_duals(x, v);
        let mut g = vec![Dual::default(); x.len()];
        self.eval(&xd, &mut g);
        g.iter().map(|d| d.eps).collect()
    }
}

/// `0.5 x^T A x - b^T x` with a dense symmetric `A`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl GenericObjective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval<S: Scalar>(&self, x: &[S], grad: &mut [S]) -> S {
        let n = self.b.len();
        let mut f = S::cst(0.0);
        for i in 0..n {
            let mut ax = S::cst(0.0);
            for j in 0..n {
                ax += x[j].scale(self.a[i * n + j]);
            }
            grad[i] = ax - S::cst(self.b[i]);
            f += (x[i] * ax).scale(0.5) - x[i].scale(self.b[i]);
        }
        f
    }
}

/// Extended Rosenbrock function.
#[derive(Clone, Debug)]
pub struct Rosenbrock {
    pub n: usize,
}

impl GenericObjective for Rosenbrock {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval<S: Scalar>(&self, x: &[S], grad: &mut [S]) -> S {
        let mut f = S::cst(0.0);
        for g in grad.iter_mut() {
            *g = S::cst(0.0);
        }
        for i in 0..self.n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = S::cst(1.0) - x[i];
            f += (a * a).scale(100.0) + b * b;
            grad[i] += (x[i] * a).scale(-400.0) - b.scale(2.0);
            grad[i + 1] += a.scale(200.0);
        }
        f
    }
}

/// `0.5 sum_i (sin(x_i) - c_i)^2`.
#[derive(Clone, Debug)]
pub struct SumSquares {
    pub c: Vec<f64>,
}

impl GenericObjective for SumSquares {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval<S: Scalar>(&self, x: &[S], grad: &mut [S]) -> S {
        let mut f = S::cst(0.0);
        for i in 0..self.c.len() {
            let r = x[i].sin() - S::cst(self.c[i]);
            f += (r * r).scale(0.5);
            grad[i] = r * x[i].cos();
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CoeffInit, FreqInit};
    use crate::model::{init_params, Activation, Arch, FeatureConfig, NetworkSpec};
    use crate::pde::{PdeProblem, ProblemId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<NetworkSpec> {
        let mut v = vec![
            NetworkSpec::safenet(16),
            NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Raw),
            NetworkSpec::mlp(Arch::Fls4x50, FeatureConfig::Raw),
            NetworkSpec::mlp(Arch::Mlp6x50, FeatureConfig::Periodic { m: 5 }),
            NetworkSpec::mlp(
                Arch::Mlp4x50,
                FeatureConfig::Rff {
                    m: 8,
                    sigma_spatial: 2.0,
                    sigma_temporal: 1.0,
                },
            ),
            NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Rbf { m: 16, poly_order: 2 }),
        ];
        for act in [Activation::Gelu, Activation::Swish, Activation::Sine] {
            let mut s = NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Raw);
            s.activation = act;
            s.width = 12;
            v.push(s);
        }
        v
    }

    fn setup(spec: &NetworkSpec, id: ProblemId) -> (Model, Vec<f64>) {
        let prob = PdeProblem::new(id);
        let m = Model::new(spec, &prob, 5).unwrap();
        let p = init_params(&m, 2, FreqInit::Gaussian, CoeffInit::Gaussian);
        (m, p.values)
    }

    #[test]
    fn input_derivatives_match_finite_differences() {
        for id in [ProblemId::Wave, ProblemId::Heat2D] {
            for spec in specs() {
                let (m, w) = setup(&spec, id);
                let p = if id == ProblemId::Heat2D {
                    Point::new_2d(0.31, 0.62, 0.17)
                } else {
                    Point::new(0.37, 0.21)
                };
                let b = eval_with_input_derivs(&m, &w, p, m.supported_mask()).unwrap();
                let h = 1e-4;
                let f = |q: Point| m.forward(&w, q).unwrap();
                let shifts: Vec<(Comp, Comp, Box<dyn Fn(f64) -> Point>)> = {
                    let mut s: Vec<(Comp, Comp, Box<dyn Fn(f64) -> Point>)> = vec![
                        (Comp::Ux, Comp::Uxx, Box::new(move |e| Point { x: p.x + e, ..p })),
                        (Comp::Ut, Comp::Utt, Box::new(move |e| Point { t: p.t + e, ..p })),
                    ];
                    if id == ProblemId::Heat2D {
                        s.push((Comp::Uy, Comp::Uyy, Box::new(move |e| Point { y: p.y + e, ..p })));
                    }
                    s
                };
                assert!((b.jet.c[0] - f(p)).abs() < 1e-14);
                for (c1, c2, sh) in &shifts {
                    let d1 = (f(sh(1e-6)) - f(sh(-1e-6))) / 2e-6;
                    let d2 = (f(sh(h)) - 2.0 * f(p) + f(sh(-h))) / (h * h);
                    let g1 = b.get(*c1).unwrap();
                    let g2 = b.get(*c2).unwrap();
                    assert!((d1 - g1).abs() < 1e-5 * (1.0 + g1.abs()), "{:?} {c1:?} {d1} {g1}", spec.arch);
                    assert!((d2 - g2).abs() < 2e-3 * (1.0 + g2.abs()), "{:?} {c2:?} {d2} {g2}", spec.arch);
                }
            }
        }
    }

    #[test]
    fn unsupported_derivative_is_rejected() {
        let (m, w) = setup(&NetworkSpec::safenet(8), ProblemId::Wave);
        let r = eval_with_input_derivs(&m, &w, Point::new(0.1, 0.1), CompMask::from_comps(&[Comp::Uy]));
        assert!(matches!(r, Err(Error::UnsupportedDerivative(_))));
        let mut steady = m.clone();
        steady.time_dependent = false;
        let r = eval_with_input_derivs(&steady, &w, Point::new(0.1, 0.1), CompMask::from_comps(&[Comp::Ut]));
        assert!(matches!(r, Err(Error::UnsupportedDerivative(_))));
        assert!(matches!(m.forward(&w[1..], Point::new(0.0, 0.0)), Err(Error::SegmentMismatch { .. })));
    }

    /// `sum_p <r_p, out_p>` for a fixed random adjoint; its gradient is what
    /// `backward` accumulates.
    fn pairing(m: &Model, block: &PointBlock, bars: &[Jet<f64>], w: &[f64]) -> f64 {
        let e = Engine::new(m);
        let (out, _) = e.forward(w, block);
        out.iter().zip(bars).map(|(o, b)| o.dot(b)).sum()
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in specs() {
            let (m, w) = setup(&spec, ProblemId::Wave);
            let e = Engine::new(&m);
            let pts: Vec<Point> = (0..150)
                .map(|_| Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
                .collect();
            let block = e.prepare(&pts, m.supported_mask()).unwrap();
            let bars: Vec<Jet<f64>> = (0..pts.len())
                .map(|_| {
                    let mut j = Jet::zero();
                    for &c in block.comps() {
                        j.c[c] = rng.random_range(-1.0..1.0);
                    }
                    j
                })
                .collect();
            let (_, tape) = e.forward(&w, &block);
            let mut g = vec![0.0; w.len()];
            e.backward(&w, &block, &tape, &bars, &mut g);
            for _ in 0..12 {
                let i = rng.random_range(0..w.len());
                let h = 1e-6 * (1.0 + w[i].abs());
                let mut wp = w.clone();
                wp[i] += h;
                let mut wm = w.clone();
                wm[i] -= h;
                let fd = (pairing(&m, &block, &bars, &wp) - pairing(&m, &block, &bars, &wm)) / (2.0 * h);
                let scale = 1.0 + fd.abs().max(g[i].abs());
                assert!((fd - g[i]).abs() < 1e-5 * scale, "{:?} param {i}: fd {fd} vs {}", spec.arch, g[i]);
            }
        }
    }

    #[test]
    fn dual_forward_is_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, w) = setup(&NetworkSpec::safenet(16), ProblemId::Heat2D);
        let e = Engine::new(&m);
        let pts = vec![Point::new_2d(0.2, 0.7, 0.4), Point::new_2d(0.9, 0.1, 0.8)];
        let block = e.prepare(&pts, m.supported_mask()).unwrap();
        let v: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (od, _) = e.forward(&seed_duals(&w, &v), &block);
        let h = 1e-6;
        let wp: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let wm: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (op, _) = e.forward(&wp, &block);
        let (om, _) = e.forward(&wm, &block);
        for k in 0..pts.len() {
            for &c in block.comps() {
                let fd = (op[k].c[c] - om[k].c[c]) / (2.0 * h);
                assert!((fd - od[k].c[c].eps).abs() < 1e-5 * (1.0 + fd.abs()));
                assert_eq!(od[k].c[c].re, e.forward(&w, &block).0[k].c[c]);
            }
        }
    }

    #[test]
    fn chunking_does_not_change_results() {
        let (m, w) = setup(&NetworkSpec::safenet(16), ProblemId::Wave);
        let e = Engine::new(&m);
        let pts: Vec<Point> = (0..300).map(|i| Point::new(i as f64 / 300.0, 0.5)).collect();
        let block = e.prepare(&pts, CompMask::VALUE).unwrap();
        let (all, _) = e.forward_values(&w, &block);
        for (i, p) in pts.iter().enumerate().step_by(37) {
            assert!((all[i] - m.forward(&w, *p).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn toy_objectives_gradient_and_hvp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let q = Quadratic { a: a.clone(), b: vec![1.0; n] };
        let r = Rosenbrock { n };
        let s = SumSquares { c: vec![0.3; n] };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objs: [&dyn Objective; 3] = [&q, &r, &s];
        for o in objs {
            let mut g = vec![0.0; n];
            o.value_grad(&x, &mut g);
            let h = 1e-6;
            for i in 0..n {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (o.value(&xp) - o.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
            let hv = o.hvp(&x, &v);
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
            o.value_grad(&xp, &mut gp);
            o.value_grad(&xm, &mut gm);
            for i in 0..n {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
        let hv = q.hvp(&x, &v);
        for i in 0..n {
            let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
            assert!((hv[i] - av).abs() < 1e-13);
        }
    }
}
