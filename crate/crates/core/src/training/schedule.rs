//! Optimizer schedules and the training loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::optim::{AdamConfig, AdamState, LbfgsConfig, LbfgsState, StallReason};
use super::{wpinn_weights, CollocationSet, LossWeights, PinnObjective};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScheduleKind {
    S1,
    S2,
    S3a,
    S3b,
    S3c,
    S3d,
    S3e,
    S4,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 8] = [
        ScheduleKind::S1,
        ScheduleKind::S2,
        ScheduleKind::S3a,
        ScheduleKind::S3b,
        ScheduleKind::S3c,
        ScheduleKind::S3d,
        ScheduleKind::S3e,
        ScheduleKind::S4,
    ];
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.to_string().to_ascii_lowercase() == t)
            .ok_or_else(|| Error::Config(format!("unknown schedule '{s}'")))
    }
}

/// One optimizer phase. `until` is the global iteration at which the phase
/// ends at the latest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    Adam { until: usize, lr: f64 },
    /// Adam until the loss has not improved by a relative `1e-4` for
    /// `patience` iterations.
    AdamPlateau { until: usize, lr: f64, patience: usize },
    /// L-BFGS until `until` or a stall.
    Lbfgs { until: usize },
}

impl Phase {
    fn until(&self) -> usize {
        match *self {
            Phase::Adam { until, .. } | Phase::AdamPlateau { until, .. } | Phase::Lbfgs { until } => until,
        }
    }

    fn is_adam(&self) -> bool {
        !matches!(self, Phase::Lbfgs { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub phases: Vec<Phase>,
    /// Learning rates tried for the first Adam phase; the run with the lowest
    /// final loss is kept.
    pub adam1_lr_grid: Vec<f64>,
}

pub const BASE_LR: f64 = 1e-3;
const PLATEAU_REL: f64 = 1e-4;

struct Budget {
    total: usize,
    s1_adam: usize,
    s2_warmup: usize,
    s2_tail: usize,
    patience: usize,
    adam_only: usize,
}

impl ScheduleSpec {
    fn build(kind: ScheduleKind, b: Budget, grid: Vec<f64>) -> Self {
        let lr = BASE_LR;
        let t = b.total;
        let split = |adam: usize| vec![Phase::Adam { until: adam, lr }, Phase::Lbfgs { until: t }];
        let (phases, grid) = match kind {
            ScheduleKind::S1 => (split(b.s1_adam), vec![lr]),
            ScheduleKind::S2 => (
                vec![
                    Phase::Adam {
                        until: b.s2_warmup,
                        lr: grid[0],
                    },
                    Phase::Lbfgs { until: t - b.s2_tail },
                    Phase::Adam {
                        until: t - b.s2_tail,
                        lr: lr / 2.0,
                    },
                    Phase::Lbfgs { until: t },
                ],
                grid,
            ),
            ScheduleKind::S3a => (split(t / 2), vec![lr]),
            ScheduleKind::S3b => (split(t / 4), vec![lr]),
            ScheduleKind::S3c => (split(t / 8), vec![lr]),
            ScheduleKind::S3d => (
                vec![
                    Phase::Adam { until: t * 5 / 8, lr },
                    Phase::Lbfgs { until: t * 7 / 8 },
                    Phase::Adam { until: t, lr },
                ],
                vec![lr],
            ),
            ScheduleKind::S3e => (
                vec![
                    Phase::AdamPlateau {
                        until: t,
                        lr,
                        patience: b.patience,
                    },
                    Phase::Lbfgs { until: t },
                ],
                vec![lr],
            ),
            ScheduleKind::S4 => (vec![Phase::Adam { until: b.adam_only, lr }], vec![lr]),
        };
        ScheduleSpec {
            kind,
            phases,
            adam1_lr_grid: grid,
        }
    }

    pub fn full(kind: ScheduleKind) -> Self {
        Self::build(
            kind,
            Budget {
                total: 40_000,
                s1_adam: 30_000,
                s2_warmup: 3_000,
                s2_tail: 3_000,
                patience: 1_000,
                adam_only: 100_000,
            },
            vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        )
    }

    pub fn desk(kind: ScheduleKind) -> Self {
        Self::build(
            kind,
            Budget {
                total: 7_000,
                s1_adam: 5_000,
                s2_warmup: 500,
                s2_tail: 500,
                patience: 175,
                adam_only: 7_000,
            },
            vec![1e-2, 1e-3],
        )
    }

    pub fn adam_only(iters: usize) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::S4,
            phases: vec![Phase::Adam { until: iters, lr: BASE_LR }],
            adam1_lr_grid: vec![BASE_LR],
        }
    }

    pub fn total(&self) -> usize {
        self.phases.iter().map(Phase::until).max().unwrap_or(0)
    }

    fn with_first_lr(&self, lr: f64) -> Self {
        let mut s = self.clone();
        if let Some(Phase::Adam { lr: l, .. } | Phase::AdamPlateau { lr: l, .. }) = s.phases.first_mut() {
            *l = lr;
        }
        s.adam1_lr_grid = vec![lr];
        s
    }
}

pub struct RunOptions<'a> {
    pub log_every: usize,
    /// Kernel-trace re-weighting: collocation set and recompute cadence.
    pub wpinn: Option<(&'a CollocationSet, usize)>,
    /// Error metric evaluated at every logged row.
    pub l2re: Option<&'a (dyn Fn(&[f64]) -> Option<f64> + Sync)>,
    /// Iterations at which to keep a copy of the parameters.
    pub snapshots: &'a [usize],
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            log_every: 100,
            wpinn: None,
            l2re: None,
            snapshots: &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub phase: String,
    pub loss: f64,
    pub l_res: f64,
    pub l_bc: f64,
    pub l_ic: f64,
    pub grad_norm: f64,
    pub l2re: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub stop: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEvent {
    pub iter: usize,
    pub phase: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<TrajectoryRow>,
    pub phases: Vec<PhaseRecord>,
    pub params: Vec<f64>,
    pub final_loss: f64,
    pub divergence: Option<DivergenceEvent>,
    pub selected_lr: Option<f64>,
    /// Smallest and largest attention weight seen after any update.
    pub rba_range: Option<(f64, f64)>,
    pub snapshots: Vec<(usize, Vec<f64>)>,
}

impl TrainReport {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,phase,loss,L_res,L_bc,L_ic,grad_norm,L2RE\n");
        for r in &self.rows {
            let l2 = r.l2re.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.iter, r.phase, r.loss, r.l_res, r.l_bc, r.l_ic, r.grad_norm, l2
            ));
        }
        s
    }

    /// Index of the phase boundary after the named phase.
    pub fn phase_end(&self, name: &str) -> Option<usize> {
        self.phases.iter().find(|p| p.name == name).map(|p| p.end)
    }
}

fn phase_names(phases: &[Phase]) -> Vec<String> {
    let (mut na, mut nl) = (0, 0);
    phases
        .iter()
        .map(|p| {
            if p.is_adam() {
                na += 1;
                format!("adam{na}")
            } else {
                nl += 1;
                format!("lbfgs{nl}")
            }
        })
        .collect()
}

struct Runner<'o, 'a> {
    obj: &'o mut PinnObjective,
    opts: &'o RunOptions<'a>,
    rows: Vec<TrajectoryRow>,
    last_logged: Option<usize>,
    rba_range: Option<(f64, f64)>,
    snapshots: Vec<(usize, Vec<f64>)>,
}

impl Runner<'_, '_> {
    fn log(&mut self, it: usize, phase: &str, x: &[f64]) -> f64 {
        if self.last_logged == Some(it) {
            return self.rows.last().map_or(f64::NAN, |r| r.loss);
        }
        let mut g = vec![0.0; x.len()];
        let parts = self.obj.evaluate(x, Some(&mut g), None);
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.rows.push(TrajectoryRow {
            iter: it,
            phase: phase.to_string(),
            loss: parts.total,
            l_res: parts.res,
            l_bc: parts.bc,
            l_ic: parts.ic,
            grad_norm,
            l2re: self.opts.l2re.and_then(|f| f(x)),
        });
        self.last_logged = Some(it);
        parts.total
    }

    fn snapshot(&mut self, it: usize, x: &[f64]) {
        if self.opts.snapshots.contains(&it) && self.snapshots.last().is_none_or(|s| s.0 != it) {
            self.snapshots.push((it, x.to_vec()));
        }
    }

    fn maybe_reweight(&mut self, it: usize, x: &[f64]) -> bool {
        let Some((colloc, every)) = self.opts.wpinn else {
            return false;
        };
        if it % every != 0 {
            return false;
        }
        match wpinn_weights(&self.obj.problem, &self.obj.model, x, colloc) {
            Ok((lb, lr)) => {
                self.obj.weights = LossWeights {
                    lambda_res: lr,
                    lambda_bc: lb,
                    lambda_ic: lb,
                };
                true
            }
            Err(_) => false,
        }
    }

    fn track_rba(&mut self) {
        if let Some(w) = &self.obj.rba {
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            self.rba_range = Some(match self.rba_range {
                Some((a, b)) => (a.min(lo), b.max(hi)),
                None => (lo, hi),
            });
        }
    }
}

fn run_once(spec: &ScheduleSpec, obj: &mut PinnObjective, params: &[f64], opts: &RunOptions) -> TrainReport {
    let mut x = params.to_vec();
    let n = x.len();
    let names = phase_names(&spec.phases);
    let mut r = Runner {
        obj,
        opts,
        rows: Vec::new(),
        last_logged: None,
        rba_range: None,
        snapshots: Vec::new(),
    };
    let every = opts.log_every.max(1);
    let mut it = 0;
    let mut phases = Vec::new();
    let mut divergence = None;
    let mut g = vec![0.0; n];
    'outer: for (phase, name) in spec.phases.iter().zip(&names) {
        let start = it;
        let mut stop = "budget".to_string();
        match *phase {
            Phase::Adam { until, lr } | Phase::AdamPlateau { until, lr, .. } => {
                let patience = match *phase {
                    Phase::AdamPlateau { patience, .. } => Some(patience),
                    _ => None,
                };
                let mut st = AdamState::new(n, AdamConfig::new(lr));
                let (mut best, mut since) = (f64::INFINITY, 0);
                while it < until {
                    r.maybe_reweight(it, &x);
                    r.snapshot(it, &x);
                    if it % every == 0 {
                        r.log(it, name, &x);
                    }
                    let loss = if r.obj.rba.is_some() {
                        let parts = r.obj.value_grad_rba(&x, &mut g);
                        r.track_rba();
                        parts.total
                    } else {
                        r.obj.evaluate(&x, Some(&mut g), None).total
                    };
                    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                        divergence = Some(DivergenceEvent {
                            iter: it,
                            phase: name.clone(),
                        });
                        stop = "diverged".into();
                        phases.push(PhaseRecord {
                            name: name.clone(),
                            start,
                            end: it,
                            stop,
                        });
                        break 'outer;
                    }
                    st.step(&mut x, &g);
                    it += 1;
                    if let Some(p) = patience {
                        if loss < best * (1.0 - PLATEAU_REL) {
                            best = loss;
                            since = 0;
                        } else {
                            since += 1;
                            if since >= p {
                                stop = "plateau".into();
                                break;
                            }
                        }
                    }
                }
            }
            Phase::Lbfgs { until } => {
                let mut st = LbfgsState::new(LbfgsConfig::default());
                while it < until {
                    if r.maybe_reweight(it, &x) {
                        st.reset();
                    }
                    r.snapshot(it, &x);
                    if it % every == 0 {
                        r.log(it, name, &x);
                    }
                    let s = st.step(&*r.obj, &mut x);
                    if s.accepted.is_some() {
                        it += 1;
                    }
                    match s.stall {
                        Some(StallReason::NonFinite) => {
                            divergence = Some(DivergenceEvent {
                                iter: it,
                                phase: name.clone(),
                            });
                            phases.push(PhaseRecord {
                                name: name.clone(),
                                start,
                                end: it,
                                stop: "diverged".into(),
                            });
                            break 'outer;
                        }
                        Some(reason) => {
                            stop = format!("{reason:?}").to_lowercase();
                            break;
                        }
                        None => {}
                    }
                }
            }
        }
        phases.push(PhaseRecord {
            name: name.clone(),
            start,
            end: it,
            stop,
        });
    }
    let last = phases.last().map_or("init".to_string(), |p: &PhaseRecord| p.name.clone());
    r.snapshot(it, &x);
    let final_loss = if divergence.is_some() {
        f64::NAN
    } else {
        r.log(it, &last, &x)
    };
    TrainReport {
        rows: r.rows,
        phases,
        params: x,
        final_loss,
        divergence,
        selected_lr: None,
        rba_range: r.rba_range,
        snapshots: r.snapshots,
    }
}

/// Run a schedule from `params`. When the first Adam phase has several
/// candidate learning rates, each is run to completion and the lowest final
/// loss wins.
pub fn run_schedule(
    spec: &ScheduleSpec,
    obj: &mut PinnObjective,
    params: &[f64],
    opts: &RunOptions,
) -> TrainReport {
    if spec.adam1_lr_grid.len() <= 1 {
        let mut rep = run_once(spec, obj, params, opts);
        rep.selected_lr = spec.adam1_lr_grid.first().copied();
        return rep;
    }
    let start = obj.clone();
    let mut best: Option<(TrainReport, PinnObjective)> = None;
    for &lr in &spec.adam1_lr_grid {
        let mut o = start.clone();
        let mut rep = run_once(&spec.with_first_lr(lr), &mut o, params, opts);
        rep.selected_lr = Some(lr);
        let better = match &best {
            None => true,
            Some((b, _)) => {
                (b.diverged() && !rep.diverged())
                    || (!rep.diverged() && rep.final_loss < b.final_loss)
            }
        };
        if better {
            best = Some((rep, o));
        }
    }
    let (rep, o) = best.expect("non-empty grid");
    *obj = o;
    rep
}

impl TryFrom<String> for ScheduleKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScheduleKind> for String {
    fn from(v: ScheduleKind) -> String {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CoeffInit, FreqInit};
    use crate::model::{init_params, Arch, FeatureConfig, Model, NetworkSpec};
    use crate::pde::{PdeProblem, ProblemId};
    use crate::training::{sample_collocation, Sizes};

    #[test]
    fn phase_budgets() {
        let s1 = ScheduleSpec::full(ScheduleKind::S1);
        assert_eq!(s1.phases[0], Phase::Adam { until: 30_000, lr: 1e-3 });
        assert_eq!(s1.total(), 40_000);
        for k in ScheduleKind::ALL {
            let want = if k == ScheduleKind::S4 { 100_000 } else { 40_000 };
            assert_eq!(ScheduleSpec::full(k).total(), want, "{k}");
            assert_eq!(ScheduleSpec::desk(k).total(), 7_000, "{k}");
        }
        let s2 = ScheduleSpec::full(ScheduleKind::S2);
        assert_eq!(s2.phases[2], Phase::Adam { until: 37_000, lr: 5e-4 });
        assert_eq!(s2.adam1_lr_grid.len(), 5);
        assert_eq!(ScheduleSpec::full(ScheduleKind::S4).phases.len(), 1);
        assert_eq!("s3e".parse::<ScheduleKind>().unwrap(), ScheduleKind::S3e);
    }

    fn small() -> (PinnObjective, Vec<f64>) {
        let p = PdeProblem::new(ProblemId::Diffusion);
        let m = Model::new(&NetworkSpec::safenet(16), &p, 0).unwrap();
        let c = sample_collocation(&p, 0, Sizes { n_res: 64, n_bc: 16, n_ic: 16 });
        let obj = PinnObjective::new(&p, &m, &c, LossWeights::default(), false).unwrap();
        let x = init_params(&m, 0, FreqInit::Harmonic, CoeffInit::Unit).values;
        (obj, x)
    }

    #[test]
    fn boundaries_are_logged_and_deterministic() {
        let (mut obj, x) = small();
        let spec = ScheduleSpec {
            kind: ScheduleKind::S1,
            phases: vec![Phase::Adam { until: 30, lr: 1e-3 }, Phase::Lbfgs { until: 40 }],
            adam1_lr_grid: vec![1e-3],
        };
        let opts = RunOptions {
            log_every: 10,
            ..Default::default()
        };
        let a = run_schedule(&spec, &mut obj, &x, &opts);
        assert_eq!(a.phase_end("adam1"), Some(30));
        assert!(a.rows.iter().any(|r| r.iter == 30 && r.phase == "lbfgs1"));
        assert!(a.rows.last().unwrap().loss < a.rows[0].loss);
        let (mut obj2, _) = small();
        let b = run_schedule(&spec, &mut obj2, &x, &opts);
        assert_eq!(a.to_csv(), b.to_csv());
        let (mut obj3, _) = small();
        let snaps = [0, 15, 40];
        let c = run_schedule(
            &spec,
            &mut obj3,
            &x,
            &RunOptions {
                snapshots: &snaps,
                ..Default::default()
            },
        );
        assert_eq!(c.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(), snaps);
        assert_eq!(c.snapshots[0].1, x);
        assert_eq!(c.snapshots[2].1, c.params);
        assert!(a.to_csv().starts_with("iter,phase,loss,L_res,L_bc,L_ic,grad_norm,L2RE\n"));
    }

    #[test]
    fn plateau_switches_phase() {
        let (mut obj, x) = small();
        let spec = ScheduleSpec {
            kind: ScheduleKind::S3e,
            phases: vec![
                Phase::AdamPlateau {
                    until: 500,
                    lr: 0.0,
                    patience: 20,
                },
                Phase::Lbfgs { until: 505 },
            ],
            adam1_lr_grid: vec![0.0],
        };
        let rep = run_schedule(&spec, &mut obj, &x, &RunOptions::default());
        assert_eq!(rep.phases[0].stop, "plateau");
        assert_eq!(rep.phases[0].end, 21);
    }

    #[test]
    fn divergence_is_recorded() {
        let (mut obj, x) = small();
        let spec = ScheduleSpec::adam_only(50);
        let mut bad = x.clone();
        bad[0] = f64::NAN;
        let rep = run_schedule(&spec, &mut obj, &bad, &RunOptions::default());
        assert_eq!(
            rep.divergence,
            Some(DivergenceEvent {
                iter: 0,
                phase: "adam1".into()
            })
        );
    }

    #[test]
    fn lr_grid_keeps_best_run() {
        let (mut obj, x) = small();
        let spec = ScheduleSpec {
            kind: ScheduleKind::S2,
            phases: vec![Phase::Adam { until: 20, lr: 0.0 }],
            adam1_lr_grid: vec![0.0, 1e-2],
        };
        let rep = run_schedule(&spec, &mut obj, &x, &RunOptions::default());
        assert_eq!(rep.selected_lr, Some(1e-2));
        let mlp = Model::new(&NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Raw), &obj.problem, 0).unwrap();
        assert!(mlp.n_params > 0);
    }
}
