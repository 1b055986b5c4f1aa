//! Collocation sampling, the weighted physics-informed loss and the baseline
//! re-weighting schemes.

mod optim;
mod schedule;

pub use optim::{
    AdamConfig, AdamState, LbfgsConfig, LbfgsState, LbfgsStep, StallReason, WolfeRecord,
};
pub use schedule::{
    run_schedule, DivergenceEvent, Phase, PhaseRecord, RunOptions, ScheduleKind, ScheduleSpec,
    TrainReport, TrajectoryRow,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Engine, GenericObjective, PointBlock};
use crate::error::{Error, Result};
use crate::jet::{Comp, CompMask, Jet};
use crate::model::{seeded_rng, Model, Stream};
use crate::pde::{BcKind, BoundaryCondition, Face, IcOrder, InitialCondition, PdeProblem, Point};
use crate::scalar::Scalar;

pub const RBA_GAMMA: f64 = 0.999;
pub const RBA_ETA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub n_res: usize,
    /// Points per boundary face (pairs for periodic conditions).
    pub n_bc: usize,
    pub n_ic: usize,
}

impl Sizes {
    pub const FULL: Sizes = Sizes {
        n_res: 20_000,
        n_bc: 2_000,
        n_ic: 2_000,
    };
    pub const DESK: Sizes = Sizes {
        n_res: 2_000,
        n_bc: 200,
        n_ic: 200,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    pub bc: BoundaryCondition,
    pub points: Vec<Point>,
    /// Matching points on the partner face for periodic conditions.
    pub partner: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<BoundarySet>,
    pub initial: Vec<Point>,
    pub rba_weights: Vec<f64>,
}

impl CollocationSet {
    pub fn n_boundary(&self) -> usize {
        self.boundary.iter().map(|b| b.points.len()).sum()
    }
}

fn face_point(problem: &PdeProblem, face: Face, rng: &mut impl Rng) -> Point {
    let d = &problem.domain;
    let t = d.time();
    let mut p = Point::new_2d(
        rng.random_range(d.x.lo..=d.x.hi),
        d.y.map_or(0.0, |y| rng.random_range(y.lo..=y.hi)),
        rng.random_range(t.lo..=t.hi),
    );
    match face {
        Face::XLo | Face::XHi => p.x = problem.face_coordinate(face),
        Face::YLo | Face::YHi => p.y = problem.face_coordinate(face),
    }
    p
}

fn with_face(problem: &PdeProblem, p: Point, face: Face) -> Point {
    let mut q = p;
    match face {
        Face::XLo | Face::XHi => q.x = problem.face_coordinate(face),
        Face::YLo | Face::YHi => q.y = problem.face_coordinate(face),
    }
    q
}

pub fn sample_collocation(problem: &PdeProblem, seed: u64, sizes: Sizes) -> CollocationSet {
    let mut rng = seeded_rng(seed, Stream::Collocation);
    let d = &problem.domain;
    let t = d.time();
    let interior: Vec<Point> = (0..sizes.n_res)
        .map(|_| {
            Point::new_2d(
                rng.random_range(d.x.lo..d.x.hi),
                d.y.map_or(0.0, |y| rng.random_range(y.lo..y.hi)),
                rng.random_range(t.lo..t.hi),
            )
        })
        .collect();
    let boundary = problem
        .bcs
        .iter()
        .map(|bc| {
            let points: Vec<Point> = (0..sizes.n_bc).map(|_| face_point(problem, bc.face, &mut rng)).collect();
            let partner = match bc.kind {
                BcKind::Periodic { partner } => points.iter().map(|&p| with_face(problem, p, partner)).collect(),
                _ => Vec::new(),
            };
            BoundarySet {
                bc: *bc,
                points,
                partner,
            }
        })
        .collect();
    let initial = (0..sizes.n_ic)
        .map(|_| {
            Point::new_2d(
                rng.random_range(d.x.lo..=d.x.hi),
                d.y.map_or(0.0, |y| rng.random_range(y.lo..=y.hi)),
                t.lo,
            )
        })
        .collect();
    CollocationSet {
        interior,
        boundary,
        initial,
        rba_weights: vec![0.0; sizes.n_res],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_res: f64,
    pub lambda_bc: f64,
    pub lambda_ic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_res: 1.0,
            lambda_bc: 100.0,
            lambda_ic: 100.0,
        }
    }
}

/// Weighted total and its unweighted `0.5 * mean(r^2)` components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<S> {
    pub total: S,
    pub res: S,
    pub bc: S,
    pub ic: S,
}

#[derive(Clone)]
struct BcBlock {
    kind: BcKind,
    block: PointBlock,
    partner: Option<PointBlock>,
    targets: Vec<f64>,
}

#[derive(Clone)]
struct IcBlock {
    order: IcOrder,
    block: PointBlock,
    targets: Vec<f64>,
}

/// Full-batch collocation loss of one network on one problem.
#[derive(Clone)]
pub struct PinnObjective {
    pub problem: PdeProblem,
    pub model: Model,
    pub weights: LossWeights,
    /// Per-interior-point multipliers when residual attention is on.
    pub rba: Option<Vec<f64>>,
    interior: PointBlock,
    bcs: Vec<BcBlock>,
    ics: Vec<IcBlock>,
    n_bc: usize,
    n_ic: usize,
}

impl PinnObjective {
    pub fn new(
        problem: &PdeProblem,
        model: &Model,
        colloc: &CollocationSet,
        weights: LossWeights,
        rba: bool,
    ) -> Result<Self> {
        let e = Engine::new(model);
        let interior = e.prepare(&colloc.interior, problem.residual_mask())?;
        let mut bcs = Vec::new();
        for set in &colloc.boundary {
            let (mask, targets) = match set.bc.kind {
                BcKind::Dirichlet(t) => (CompMask::VALUE, set.points.iter().map(|&p| problem.target(t, p)).collect()),
                BcKind::Robin { target, .. } => (
                    CompMask::VALUE.with(Comp::Ux),
                    set.points.iter().map(|&p| problem.target(target, p)).collect(),
                ),
                BcKind::Periodic { .. } => (CompMask::VALUE, vec![0.0; set.points.len()]),
            };
            let partner = if set.partner.is_empty() {
                None
            } else {
                Some(e.prepare(&set.partner, CompMask::VALUE)?)
            };
            bcs.push(BcBlock {
                kind: set.bc.kind,
                block: e.prepare(&set.points, mask)?,
                partner,
                targets,
            });
        }
        let mut ics = Vec::new();
        for ic in &problem.ics {
            let InitialCondition { order, target } = *ic;
            let mask = match order {
                IcOrder::Value => CompMask::VALUE,
                IcOrder::TimeDerivative => CompMask::VALUE.with(Comp::Ut),
            };
            ics.push(IcBlock {
                order,
                block: e.prepare(&colloc.initial, mask)?,
                targets: colloc.initial.iter().map(|&p| problem.target(target, p)).collect(),
            });
        }
        let n_bc = colloc.n_boundary();
        let n_ic = colloc.initial.len() * problem.ics.len();
        Ok(PinnObjective {
            problem: problem.clone(),
            model: model.clone(),
            weights,
            rba: rba.then(|| colloc.rba_weights.clone()),
            interior,
            bcs,
            ics,
            n_bc,
            n_ic,
        })
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params
    }

    /// Loss parts and (optionally) the gradient. With `rba_update`, the
    /// residual-attention weights are refreshed from this evaluation's
    /// residuals before the loss is formed.
    pub fn evaluate<S: Scalar>(
        &self,
        x: &[S],
        mut grad: Option<&mut [S]>,
        rba_update: Option<&mut [f64]>,
    ) -> LossParts<S> {
        let e = Engine::new(&self.model);
        let w = self.weights;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(S::default());
        }

        let (out, tape) = e.forward(x, &self.interior);
        let n = out.len().max(1) as f64;
        let mut partials = Vec::with_capacity(out.len());
        let mut r = Vec::with_capacity(out.len());
        for (u, &p) in out.iter().zip(&self.interior.points) {
            let (ri, di) = self.problem.residual_partials(u, p);
            r.push(ri);
            partials.push(di);
        }
        let lam: Option<&[f64]> = match rba_update {
            Some(buf) => {
                let mags: Vec<f64> = r.iter().map(|v| v.re().abs()).collect();
                rba_update_in_place(buf, &mags, RBA_GAMMA, RBA_ETA);
                Some(buf)
            }
            None => self.rba.as_deref(),
        };
        let mut res = S::cst(0.0);
        let mut bars = Vec::with_capacity(out.len());
        for (i, (ri, di)) in r.iter().zip(&partials).enumerate() {
            let l = lam.map_or(1.0, |l| l[i]);
            let wr = ri.scale(l);
            res += wr * wr;
            bars.push(di.scale(ri.scale(w.lambda_res * l * l / n)));
        }
        res = res.scale(0.5 / n);
        if let Some(g) = grad.as_deref_mut() {
            e.backward(x, &self.interior, &tape, &bars, g);
        }

        let nb = self.n_bc.max(1) as f64;
        let mut bc = S::cst(0.0);
        for b in &self.bcs {
            let (out, tape) = e.forward(x, &b.block);
            let mut bars = vec![Jet::<S>::zero(); out.len()];
            match b.kind {
                BcKind::Periodic { .. } => {
                    let partner = b.partner.as_ref().expect("periodic partner");
                    let (other, ptape) = e.forward(x, partner);
                    let mut pbars = vec![Jet::<S>::zero(); other.len()];
                    for i in 0..out.len() {
                        let ri = out[i].c[0] - other[i].c[0];
                        bc += ri * ri;
                        let s = ri.scale(w.lambda_bc / nb);
                        bars[i].c[0] = s;
                        pbars[i].c[0] = -s;
                    }
                    if let Some(g) = grad.as_deref_mut() {
                        e.backward(x, partner, &ptape, &pbars, g);
                    }
                }
                BcKind::Dirichlet(_) => {
                    for i in 0..out.len() {
                        let ri = out[i].c[0] - S::cst(b.targets[i]);
                        bc += ri * ri;
                        bars[i].c[0] = ri.scale(w.lambda_bc / nb);
                    }
                }
                BcKind::Robin { h, .. } => {
                    let ux = Comp::Ux.index();
                    for i in 0..out.len() {
                        let ri = out[i].c[ux] + out[i].c[0].scale(h) - S::cst(b.targets[i]);
                        bc += ri * ri;
                        let s = ri.scale(w.lambda_bc / nb);
                        bars[i].c[ux] = s;
                        bars[i].c[0] = s.scale(h);
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                e.backward(x, &b.block, &tape, &bars, g);
            }
        }
        bc = bc.scale(0.5 / nb);

        let ni = self.n_ic.max(1) as f64;
        let mut ic = S::cst(0.0);
        for b in &self.ics {
            let (out, tape) = e.forward(x, &b.block);
            let c = match b.order {
                IcOrder::Value => 0,
                IcOrder::TimeDerivative => Comp::Ut.index(),
            };
            let mut bars = vec![Jet::<S>::zero(); out.len()];
            for i in 0..out.len() {
                let ri = out[i].c[c] - S::cst(b.targets[i]);
                ic += ri * ri;
                bars[i].c[c] = ri.scale(w.lambda_ic / ni);
            }
            if let Some(g) = grad.as_deref_mut() {
                e.backward(x, &b.block, &tape, &bars, g);
            }
        }
        ic = ic.scale(0.5 / ni);

        LossParts {
            total: res.scale(w.lambda_res) + bc.scale(w.lambda_bc) + ic.scale(w.lambda_ic),
            res,
            bc,
            ic,
        }
    }

    /// Loss and gradient after refreshing the attention weights in place.
    pub fn value_grad_rba(&mut self, x: &[f64], grad: &mut [f64]) -> LossParts<f64> {
        let mut lam = self.rba.take().expect("residual attention enabled");
        let parts = self.evaluate(x, Some(grad), Some(&mut lam));
        self.rba = Some(lam);
        parts
    }

    /// Interior residuals at `x`.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let e = Engine::new(&self.model);
        let (out, _) = e.forward(x, &self.interior);
        out.iter()
            .zip(&self.interior.points)
            .map(|(u, &p)| self.problem.residual_partials(u, p).0)
            .collect()
    }
}

impl GenericObjective for PinnObjective {
    fn dim(&self) -> usize {
        self.model.n_params
    }

    fn eval<S: Scalar>(&self, x: &[S], grad: &mut [S]) -> S {
        self.evaluate(x, Some(grad), None).total
    }
}

pub fn pinn_loss(
    problem: &PdeProblem,
    model: &Model,
    params: &[f64],
    colloc: &CollocationSet,
    weights: LossWeights,
    rba: bool,
) -> Result<f64> {
    model.check_len(params.len())?;
    let obj = PinnObjective::new(problem, model, colloc, weights, rba)?;
    let v = obj.evaluate::<f64>(params, None, None).total;
    if !v.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(v)
}

/// `lambda_i <- gamma lambda_i + eta |r_i| / max |r|`, clamped to the
/// analytic bound `eta / (1 - gamma)`.
pub fn rba_update(weights: &[f64], residuals: &[f64], gamma: f64, eta: f64) -> Vec<f64> {
    let mut w = weights.to_vec();
    let mags: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    rba_update_in_place(&mut w, &mags, gamma, eta);
    w
}

fn rba_update_in_place(w: &mut [f64], mags: &[f64], gamma: f64, eta: f64) {
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let bound = eta / (1.0 - gamma);
    for (wi, m) in w.iter_mut().zip(mags) {
        *wi *= gamma;
        if max > 0.0 && max.is_finite() {
            *wi += eta * m / max;
        }
        *wi = wi.min(bound);
    }
}

/// `(lambda_b, lambda_r)` from mean per-point kernel traces.
pub fn trace_weights(t_uu: f64, t_rr: f64) -> Result<(f64, f64)> {
    const MIN_TRACE: f64 = 1e-12;
    if t_uu < MIN_TRACE {
        return Err(Error::ZeroTrace("boundary"));
    }
    if t_rr < MIN_TRACE {
        return Err(Error::ZeroTrace("residual"));
    }
    let tk = t_uu + t_rr;
    Ok((tk / t_uu, tk / t_rr))
}

const WPINN_SUBSAMPLE: usize = 128;

fn subsample(points: &[Point]) -> Vec<Point> {
    let stride = points.len().div_ceil(WPINN_SUBSAMPLE).max(1);
    points.iter().step_by(stride).copied().collect()
}

/// Tangent-kernel trace weights on a fixed subsample of the collocation set.
pub fn wpinn_weights(
    problem: &PdeProblem,
    model: &Model,
    params: &[f64],
    colloc: &CollocationSet,
) -> Result<(f64, f64)> {
    model.check_len(params.len())?;
    let e = Engine::new(model);
    let mut grad = vec![0.0; params.len()];
    let mut sq = |p: Point, mask: CompMask, bar: &dyn Fn(&Jet<f64>) -> Jet<f64>| -> Result<f64> {
        let block = e.prepare(&[p], mask)?;
        let (out, tape) = e.forward(params, &block);
        grad.fill(0.0);
        e.backward(params, &block, &tape, &[bar(&out[0])], &mut grad);
        Ok(grad.iter().map(|g| g * g).sum())
    };
    let mut bpts: Vec<Point> = colloc.boundary.iter().flat_map(|b| b.points.iter().copied()).collect();
    bpts.extend(&colloc.initial);
    let bsub = subsample(&bpts);
    let mut t_uu = 0.0;
    for &p in &bsub {
        t_uu += sq(p, CompMask::VALUE, &|_| Jet::constant(1.0))?;
    }
    let rsub = subsample(&colloc.interior);
    let mut t_rr = 0.0;
    for &p in &rsub {
        t_rr += sq(p, problem.residual_mask(), &|u| problem.residual_partials(u, p).1)?;
    }
    trace_weights(t_uu / bsub.len().max(1) as f64, t_rr / rsub.len().max(1) as f64)
}
