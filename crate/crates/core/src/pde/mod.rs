//! Benchmark PDE definitions: residual operators, boundary and initial
//! conditions, domains and reference solutions.

mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Comp, CompMask, Jet};
use crate::scalar::Scalar;

pub use oracle::{build_oracle, OracleGrid, OracleResolution};

/// A point of the space-time domain. `y` is ignored by one-dimensional
/// problems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, t: f64) -> Self {
        Point { x, t, y: 0.0 }
    }

    pub fn new_2d(x: f64, y: f64, t: f64) -> Self {
        Point { x, t, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.len().abs());
        v >= self.lo - slack && v <= self.hi + slack
    }

    /// `i`-th of `n` equally spaced nodes including both ends.
    pub fn node(&self, i: usize, n: usize) -> f64 {
        if n == 1 {
            return self.lo;
        }
        self.lo + self.len() * i as f64 / (n - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub spatial_dims: usize,
    pub x: Interval,
    pub y: Option<Interval>,
    pub t: Option<Interval>,
}

impl DomainBox {
    pub fn contains(&self, p: Point) -> bool {
        self.x.contains(p.x)
            && self.y.is_none_or(|y| y.contains(p.y))
            && self.t.is_none_or(|t| t.contains(p.t))
    }

    pub fn time(&self) -> Interval {
        self.t.unwrap_or(Interval::new(0.0, 0.0))
    }

    fn validate(&self) -> bool {
        let ok = |i: &Interval| i.lo < i.hi;
        ok(&self.x)
            && self.y.as_ref().is_none_or(ok)
            && self.t.as_ref().is_none_or(ok)
            && (self.spatial_dims == 2) == self.y.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProblemId {
    Wave,
    Reaction,
    Convection,
    Diffusion,
    Heat2D,
    Burgers,
    AllenCahn,
    NonHomogHeat,
}

impl ProblemId {
    pub const ALL: [ProblemId; 8] = [
        ProblemId::Wave,
        ProblemId::Reaction,
        ProblemId::Convection,
        ProblemId::Diffusion,
        ProblemId::Heat2D,
        ProblemId::Burgers,
        ProblemId::AllenCahn,
        ProblemId::NonHomogHeat,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ProblemId::Wave => "wave",
            ProblemId::Reaction => "reaction",
            ProblemId::Convection => "convection",
            ProblemId::Diffusion => "diffusion",
            ProblemId::Heat2D => "heat2d",
            ProblemId::Burgers => "burgers",
            ProblemId::AllenCahn => "allen-cahn",
            ProblemId::NonHomogHeat => "nh-heat",
        }
    }

    pub fn has_closed_form(self) -> bool {
        !matches!(self, ProblemId::Burgers | ProblemId::AllenCahn)
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        ProblemId::ALL
            .into_iter()
            .find(|p| p.key() == norm || format!("{p:?}").to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown problem '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
}

/// Target functions of the boundary and initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Zero,
    Const(f64),
    WaveInitial,
    ReactionInitial,
    SinX,
    SinPiX,
    NegSinPiX,
    Heat2dInitial,
    AllenCahnInitial,
    NonHomogInitial,
    NonHomogRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BcKind {
    Dirichlet(Target),
    /// `u_x + h u = g` on the face.
    Robin { h: f64, target: Target },
    /// `u(face) = u(partner)` at matching remaining coordinates.
    Periodic { partner: Face },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub face: Face,
    pub kind: BcKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcOrder {
    Value,
    TimeDerivative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub order: IcOrder,
    pub target: Target,
}

/// Named real parameters of the benchmark suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Wave: mode number of the second harmonic.
    pub wave_beta: f64,
    /// Reaction growth rate.
    pub rho: f64,
    /// Convection speed.
    pub convection_beta: f64,
    /// Burgers viscosity numerator (the operator uses `nu / pi`).
    pub nu: f64,
    /// Allen-Cahn diffusion coefficient.
    pub ac_eps: f64,
    /// Robin coefficient of the non-homogeneous heat problem.
    pub robin_h: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            wave_beta: 4.0,
            rho: 5.0,
            convection_beta: 0.1,
            nu: 0.01,
            ac_eps: 1e-4,
            robin_h: 4.0,
        }
    }
}

impl Params {
    pub fn named(&self, id: ProblemId) -> Vec<(&'static str, f64)> {
        match id {
            ProblemId::Wave => vec![("beta", self.wave_beta)],
            ProblemId::Reaction => vec![("rho", self.rho)],
            ProblemId::Convection => vec![("beta", self.convection_beta)],
            ProblemId::Burgers => vec![("nu", self.nu)],
            ProblemId::AllenCahn => vec![("eps", self.ac_eps)],
            ProblemId::NonHomogHeat => vec![("h", self.robin_h)],
            ProblemId::Diffusion | ProblemId::Heat2D => vec![],
        }
    }
}

#[derive(Clone, Debug)]
pub enum ReferenceSolution {
    ClosedForm,
    OracleGrid(OracleGrid),
    /// Oracle-backed problem whose oracle has not been built yet.
    Pending,
}

/// Heat2D decay rate of the separable solution: `(20π)²/(500π)² + π²/π²`.
pub const HEAT2D_KAPPA: f64 = 400.0 / 250_000.0 + 1.0;

const REACTION_SIGMA: f64 = PI / 4.0;

#[derive(Clone, Debug)]
pub struct PdeProblem {
    pub id: ProblemId,
    pub domain: DomainBox,
    pub bcs: Vec<BoundaryCondition>,
    pub ics: Vec<InitialCondition>,
    pub params: Params,
    pub reference: ReferenceSolution,
}

/// Value and input derivatives of a field at one point. Only the
/// components in `present` may be read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBundle {
    pub jet: Jet<f64>,
    pub present: CompMask,
}

impl DerivativeBundle {
    pub fn new(jet: Jet<f64>, present: CompMask) -> Self {
        DerivativeBundle { jet, present }
    }

    pub fn get(&self, c: Comp) -> Result<f64> {
        if self.present.contains(c) {
            Ok(self.jet.get(c))
        } else {
            Err(Error::MissingDerivative(c.name()))
        }
    }
}

impl PdeProblem {
    pub fn new(id: ProblemId) -> Self {
        use BcKind::*;
        use Face::*;
        let unit = Interval::new(0.0, 1.0);
        let two_pi = Interval::new(0.0, 2.0 * PI);
        let sym = Interval::new(-1.0, 1.0);
        let d1 = |x: Interval, t: Interval| DomainBox {
            spatial_dims: 1,
            x,
            y: None,
            t: Some(t),
        };
        let dirichlet0 = |faces: &[Face]| -> Vec<BoundaryCondition> {
            faces
                .iter()
                .map(|&face| BoundaryCondition {
                    face,
                    kind: Dirichlet(Target::Zero),
                })
                .collect()
        };
        let periodic = vec![BoundaryCondition {
            face: XLo,
            kind: Periodic { partner: XHi },
        }];
        let value = |target| InitialCondition {
            order: IcOrder::Value,
            target,
        };
        let params = Params::default();
        let (domain, bcs, ics) = match id {
            ProblemId::Wave => (
                d1(unit, unit),
                dirichlet0(&[XLo, XHi]),
                vec![
                    value(Target::WaveInitial),
                    InitialCondition {
                        order: IcOrder::TimeDerivative,
                        target: Target::Zero,
                    },
                ],
            ),
            ProblemId::Reaction => (
                d1(two_pi, unit),
                periodic,
                vec![value(Target::ReactionInitial)],
            ),
            ProblemId::Convection => (d1(two_pi, unit), periodic, vec![value(Target::SinX)]),
            ProblemId::Diffusion => (
                d1(sym, unit),
                dirichlet0(&[XLo, XHi]),
                vec![value(Target::SinPiX)],
            ),
            ProblemId::Heat2D => (
                DomainBox {
                    spatial_dims: 2,
                    x: unit,
                    y: Some(unit),
                    t: Some(Interval::new(0.0, 5.0)),
                },
                dirichlet0(&[XLo, XHi, YLo, YHi]),
                vec![value(Target::Heat2dInitial)],
            ),
            ProblemId::Burgers => (
                d1(sym, unit),
                dirichlet0(&[XLo, XHi]),
                vec![value(Target::NegSinPiX)],
            ),
            ProblemId::AllenCahn => (
                d1(sym, unit),
                periodic,
                vec![value(Target::AllenCahnInitial)],
            ),
            ProblemId::NonHomogHeat => (
                d1(unit, unit),
                vec![
                    BoundaryCondition {
                        face: XLo,
                        kind: Dirichlet(Target::Const(1.0)),
                    },
                    BoundaryCondition {
                        face: XHi,
                        kind: Robin {
                            h: params.robin_h,
                            target: Target::NonHomogRobin,
                        },
                    },
                ],
                vec![value(Target::NonHomogInitial)],
            ),
        };
        debug_assert!(domain.validate());
        let reference = if id.has_closed_form() {
            ReferenceSolution::ClosedForm
        } else {
            ReferenceSolution::Pending
        };
        PdeProblem {
            id,
            domain,
            bcs,
            ics,
            params,
            reference,
        }
    }

    pub fn with_reference(mut self, reference: ReferenceSolution) -> Self {
        self.reference = reference;
        self
    }

    pub fn spatial_dims(&self) -> usize {
        self.domain.spatial_dims
    }

    pub fn is_periodic(&self) -> bool {
        self.bcs
            .iter()
            .any(|bc| matches!(bc.kind, BcKind::Periodic { .. }))
    }

    /// Both ends of the x-interval carry homogeneous Dirichlet data.
    pub fn homogeneous_dirichlet_x(&self) -> bool {
        let zero_on = |f: Face| {
            self.bcs
                .iter()
                .any(|bc| bc.face == f && bc.kind == BcKind::Dirichlet(Target::Zero))
        };
        zero_on(Face::XLo) && zero_on(Face::XHi)
    }

    /// Components the interior residual reads.
    pub fn residual_mask(&self) -> CompMask {
        use Comp::*;
        let comps: &[Comp] = match self.id {
            ProblemId::Wave => &[Utt, Uxx],
            ProblemId::Reaction => &[Ut],
            ProblemId::Convection => &[Ut, Ux],
            ProblemId::Diffusion
            | ProblemId::AllenCahn
            | ProblemId::NonHomogHeat
            | ProblemId::Burgers => &[Ut, Uxx],
            ProblemId::Heat2D => &[Ut, Uxx, Uyy],
        };
        CompMask::from_comps(comps)
    }

    /// Components a network must be able to supply for this problem: the
    /// residual's plus whatever the boundary/initial operators read.
    pub fn supported_mask(&self) -> CompMask {
        let mut m = self.residual_mask();
        for bc in &self.bcs {
            if let BcKind::Robin { .. } = bc.kind {
                m = m.with(Comp::Ux);
            }
        }
        for ic in &self.ics {
            if ic.order == IcOrder::TimeDerivative {
                m = m.with(Comp::Ut);
            }
        }
        m
    }

    /// Forcing term `f` such that the residual is `D[u] - f`.
    pub fn forcing(&self, p: Point) -> f64 {
        match self.id {
            ProblemId::Diffusion => (-p.t).exp() * (PI * PI - 1.0) * (PI * p.x).sin(),
            ProblemId::NonHomogHeat => {
                let (x, t) = (p.x, p.t);
                let k = 6.3 * PI;
                4.0 * PI * PI * (2.0 * PI * x).sin() * (PI * t).cos()
                    - PI * (2.0 * PI * x).sin() * (PI * t).sin()
                    + 0.6 * k * k * (k * x).sin() * (3.0 * PI * t).sin()
                    + 0.6 * 3.0 * PI * (k * x).sin() * (3.0 * PI * t).cos()
            }
            _ => 0.0,
        }
    }

    /// Residual and its partial derivatives with respect to each jet
    /// component of `u` (returned in a jet-shaped array).
    ///
    /// Written over [`Scalar`] so the Hessian-vector path can differentiate
    /// the partials themselves.
    pub fn residual_partials<S: Scalar>(&self, u: &Jet<S>, p: Point) -> (S, Jet<S>) {
        use Comp::*;
        let one = S::cst(1.0);
        let mut d = Jet::<S>::zero();
        let g = |c: Comp| u.get(c);
        let r = match self.id {
            ProblemId::Wave => {
                let c2 = self.params.wave_beta;
                d.c[Utt.index()] = one;
                d.c[Uxx.index()] = S::cst(-c2);
                g(Utt) - g(Uxx).scale(c2)
            }
            ProblemId::Reaction => {
                let rho = self.params.rho;
                let v = g(U);
                d.c[Ut.index()] = one;
                d.c[U.index()] = (one - v.scale(2.0)).scale(-rho);
                g(Ut) - (v * (one - v)).scale(rho)
            }
            ProblemId::Convection => {
                let b = self.params.convection_beta;
                d.c[Ut.index()] = one;
                d.c[Ux.index()] = S::cst(b);
                g(Ut) + g(Ux).scale(b)
            }
            ProblemId::Diffusion | ProblemId::NonHomogHeat => {
                d.c[Ut.index()] = one;
                d.c[Uxx.index()] = S::cst(-1.0);
                g(Ut) - g(Uxx) - S::cst(self.forcing(p))
            }
            ProblemId::Heat2D => {
                let ax = 1.0 / (500.0 * PI).powi(2);
                let ay = 1.0 / (PI * PI);
                d.c[Ut.index()] = one;
                d.c[Uxx.index()] = S::cst(-ax);
                d.c[Uyy.index()] = S::cst(-ay);
                g(Ut) - g(Uxx).scale(ax) - g(Uyy).scale(ay)
            }
            ProblemId::Burgers => {
                let visc = self.params.nu / PI;
                d.c[Ut.index()] = one;
                d.c[U.index()] = g(Ux);
                d.c[Ux.index()] = g(U);
                d.c[Uxx.index()] = S::cst(-visc);
                g(Ut) + g(U) * g(Ux) - g(Uxx).scale(visc)
            }
            ProblemId::AllenCahn => {
                let e = self.params.ac_eps;
                let v = g(U);
                d.c[Ut.index()] = one;
                d.c[Uxx.index()] = S::cst(-e);
                d.c[U.index()] = (v * v).scale(15.0) - S::cst(5.0);
                g(Ut) - g(Uxx).scale(e) + (v * v * v).scale(5.0) - v.scale(5.0)
            }
        };
        (r, d)
    }

    /// `D[u](x, t)` for a bundle of derivatives.
    pub fn residual_at(&self, state: &DerivativeBundle, p: Point) -> Result<f64> {
        let need = self.residual_mask();
        for c in Comp::ALL {
            if need.contains(c) && !state.present.contains(c) {
                return Err(Error::MissingDerivative(c.name()));
            }
        }
        Ok(self.residual_partials(&state.jet, p).0)
    }

    pub fn target(&self, target: Target, p: Point) -> f64 {
        let x = p.x;
        match target {
            Target::Zero => 0.0,
            Target::Const(c) => c,
            Target::WaveInitial => (PI * x).sin() + 0.5 * (self.params.wave_beta * PI * x).sin(),
            Target::ReactionInitial => reaction_h(x),
            Target::SinX => x.sin(),
            Target::SinPiX => (PI * x).sin(),
            Target::NegSinPiX => -(PI * x).sin(),
            Target::Heat2dInitial => (20.0 * PI * x).sin() * (PI * p.y).sin(),
            Target::AllenCahnInitial => x * x * (PI * x).cos(),
            Target::NonHomogInitial => (2.0 * PI * x).sin() + 0.5 * x + 1.0,
            Target::NonHomogRobin => {
                let t = p.t;
                let k = 6.3 * PI;
                2.0 * PI * (PI * t).cos()
                    + 3.78 * PI * k.cos() * (3.0 * PI * t).sin()
                    + 2.4 * k.sin() * (3.0 * PI * t).sin()
                    + 6.5
            }
        }
    }

    /// Fixed coordinate of a face.
    pub fn face_coordinate(&self, face: Face) -> f64 {
        match face {
            Face::XLo => self.domain.x.lo,
            Face::XHi => self.domain.x.hi,
            Face::YLo => self.domain.y.map_or(0.0, |y| y.lo),
            Face::YHi => self.domain.y.map_or(0.0, |y| y.hi),
        }
    }

    pub fn reference_eval(&self, p: Point) -> Result<f64> {
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain { x: p.x, t: p.t });
        }
        match &self.reference {
            ReferenceSolution::ClosedForm => Ok(closed_form_jet(self.id, &self.params, p)
                .expect("closed-form problem")
                .c[0]),
            ReferenceSolution::OracleGrid(g) => Ok(g.eval(p.x, p.t)),
            ReferenceSolution::Pending => Err(Error::NoReference(format!(
                "{} needs an oracle; build one first",
                self.id
            ))),
        }
    }

    /// Hand-differentiated closed-form solution with every jet component.
    pub fn reference_bundle(&self, p: Point) -> Option<DerivativeBundle> {
        closed_form_jet(self.id, &self.params, p).map(|jet| {
            DerivativeBundle::new(jet, CompMask::from_comps(&Comp::ALL))
        })
    }
}

pub fn reaction_h(x: f64) -> f64 {
    (-(x - PI).powi(2) / (2.0 * REACTION_SIGMA * REACTION_SIGMA)).exp()
}

fn jet_from(values: [f64; 7]) -> Jet<f64> {
    Jet { c: values }
}

/// Closed forms and their hand-derived partials, ordered
/// `[u, u_x, u_t, u_y, u_xx, u_tt, u_yy]`.
fn closed_form_jet(id: ProblemId, params: &Params, p: Point) -> Option<Jet<f64>> {
    let (x, t, y) = (p.x, p.t, p.y);
    let j = match id {
        ProblemId::Wave => {
            let b = params.wave_beta;
            let (k1, w1) = (PI, 2.0 * PI);
            let (k2, w2) = (b * PI, 2.0 * b * PI);
            let (s1, c1, s2, c2) = ((k1 * x).sin(), (k1 * x).cos(), (k2 * x).sin(), (k2 * x).cos());
            let (ct1, st1, ct2, st2) = ((w1 * t).cos(), (w1 * t).sin(), (w2 * t).cos(), (w2 * t).sin());
            jet_from([
                s1 * ct1 + 0.5 * s2 * ct2,
                k1 * c1 * ct1 + 0.5 * k2 * c2 * ct2,
                -w1 * s1 * st1 - 0.5 * w2 * s2 * st2,
                0.0,
                -k1 * k1 * s1 * ct1 - 0.5 * k2 * k2 * s2 * ct2,
                -w1 * w1 * s1 * ct1 - 0.5 * w2 * w2 * s2 * ct2,
                0.0,
            ])
        }
        ProblemId::Reaction => {
            let rho = params.rho;
            let s2 = REACTION_SIGMA * REACTION_SIGMA;
            let h = reaction_h(x);
            let hx = -(x - PI) / s2 * h;
            let hxx = (-1.0 / s2 + (x - PI).powi(2) / (s2 * s2)) * h;
            let e = (rho * t).exp();
            let den = 1.0 + h * (e - 1.0);
            let u = h * e / den;
            let gh = e / (den * den);
            let ghh = -2.0 * e * (e - 1.0) / den.powi(3);
            let ut = rho * u * (1.0 - u);
            let utt = rho * ut * (1.0 - 2.0 * u);
            jet_from([u, gh * hx, ut, 0.0, ghh * hx * hx + gh * hxx, utt, 0.0])
        }
        ProblemId::Convection => {
            let b = params.convection_beta;
            let (s, c) = (x - b * t).sin_cos();
            jet_from([s, c, -b * c, 0.0, -s, -b * b * s, 0.0])
        }
        ProblemId::Diffusion => {
            let e = (-t).exp();
            let (s, c) = (PI * x).sin_cos();
            let u = e * s;
            jet_from([u, PI * e * c, -u, 0.0, -PI * PI * u, u, 0.0])
        }
        ProblemId::Heat2D => {
            let k = HEAT2D_KAPPA;
            let e = (-k * t).exp();
            let (sx, cx) = (20.0 * PI * x).sin_cos();
            let (sy, cy) = (PI * y).sin_cos();
            let u = sx * sy * e;
            jet_from([
                u,
                20.0 * PI * cx * sy * e,
                -k * u,
                PI * sx * cy * e,
                -400.0 * PI * PI * u,
                k * k * u,
                -PI * PI * u,
            ])
        }
        ProblemId::NonHomogHeat => {
            let k = 6.3 * PI;
            let (s2, c2) = (2.0 * PI * x).sin_cos();
            let (sk, ck) = (k * x).sin_cos();
            let (spt, cpt) = (PI * t).sin_cos();
            let (s3t, c3t) = (3.0 * PI * t).sin_cos();
            jet_from([
                s2 * cpt + 0.6 * sk * s3t + 0.5 * x + 1.0,
                2.0 * PI * c2 * cpt + 0.6 * k * ck * s3t + 0.5,
                -PI * s2 * spt + 0.6 * 3.0 * PI * sk * c3t,
                0.0,
                -4.0 * PI * PI * s2 * cpt - 0.6 * k * k * sk * s3t,
                -PI * PI * s2 * cpt - 0.6 * 9.0 * PI * PI * sk * s3t,
                0.0,
            ])
        }
        ProblemId::Burgers | ProblemId::AllenCahn => return None,
    };
    Some(j)
}

impl TryFrom<String> for ProblemId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProblemId> for String {
    fn from(v: ProblemId) -> String {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(p: &PdeProblem, rng: &mut ChaCha8Rng) -> Point {
        let d = &p.domain;
        let t = d.time();
        Point {
            x: rng.random_range(d.x.lo..=d.x.hi),
            t: rng.random_range(t.lo..=t.hi),
            y: d.y.map_or(0.0, |y| rng.random_range(y.lo..=y.hi)),
        }
    }

    fn closed_form_ids() -> impl Iterator<Item = ProblemId> {
        ProblemId::ALL.into_iter().filter(|p| p.has_closed_form())
    }

    #[test]
    fn wave_residual_vanishes_on_closed_form() {
        let p = PdeProblem::new(ProblemId::Wave);
        for (x, t) in [(0.3, 0.2), (0.9, 0.77), (0.01, 0.5)] {
            let b = p.reference_bundle(Point::new(x, t)).unwrap();
            assert!(p.residual_at(&b, Point::new(x, t)).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn trivial_fixed_points() {
        let r = PdeProblem::new(ProblemId::Reaction);
        let one = DerivativeBundle::new(Jet::constant(1.0), CompMask::from_comps(&[Comp::Ut]));
        assert_eq!(r.residual_at(&one, Point::new(1.0, 0.5)).unwrap(), 0.0);
        let ac = PdeProblem::new(ProblemId::AllenCahn);
        let zero = DerivativeBundle::new(Jet::zero(), ac.residual_mask());
        assert_eq!(ac.residual_at(&zero, Point::new(0.2, 0.5)).unwrap(), 0.0);
    }

    #[test]
    fn missing_derivative_is_an_error() {
        let p = PdeProblem::new(ProblemId::Wave);
        let b = DerivativeBundle::new(Jet::zero(), CompMask::from_comps(&[Comp::Uxx]));
        assert!(matches!(
            p.residual_at(&b, Point::new(0.5, 0.5)),
            Err(Error::MissingDerivative("u_t"))
        ));
    }

    #[test]
    fn reference_values() {
        let w = PdeProblem::new(ProblemId::Wave);
        assert!((w.reference_eval(Point::new(0.5, 0.0)).unwrap() - 1.0).abs() < 1e-14);
        let r = PdeProblem::new(ProblemId::Reaction);
        for x in [0.0, 1.0, PI, 5.5] {
            assert_eq!(r.reference_eval(Point::new(x, 0.0)).unwrap(), reaction_h(x));
        }
        let c = PdeProblem::new(ProblemId::Convection);
        assert!(c.reference_eval(Point::new(0.1, 1.0)).unwrap().abs() < 1e-15);
        assert!(matches!(
            c.reference_eval(Point::new(7.0, 0.5)),
            Err(Error::OutOfDomain { .. })
        ));
        let b = PdeProblem::new(ProblemId::Burgers);
        assert!(matches!(b.reference_eval(Point::new(0.0, 0.5)), Err(Error::NoReference(_))));
    }

    #[test]
    fn closed_forms_satisfy_operators_on_random_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for id in closed_form_ids() {
            let p = PdeProblem::new(id);
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let pt = random_point(&p, &mut rng);
                let b = p.reference_bundle(pt).unwrap();
                worst = worst.max(p.residual_at(&b, pt).unwrap().abs());
            }
            assert!(worst < 1e-8, "{id}: max residual {worst:e}");
        }
    }

    /// Hand-coded partials must agree with finite differences of the closed
    /// form values.
    #[test]
    fn closed_form_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-4;
        for id in closed_form_ids() {
            let p = PdeProblem::new(id);
            for _ in 0..20 {
                let mut pt = random_point(&p, &mut rng);
                // keep the stencil inside the box
                pt.x = pt.x.clamp(p.domain.x.lo + 2.0 * h, p.domain.x.hi - 2.0 * h);
                let t = p.domain.time();
                pt.t = pt.t.clamp(t.lo + 2.0 * h, t.hi - 2.0 * h);
                let u = |q: Point| closed_form_jet(id, &p.params, q).unwrap().c[0];
                let j = closed_form_jet(id, &p.params, pt).unwrap();
                let sh = |dx: f64, dt: f64, dy: f64| Point {
                    x: pt.x + dx,
                    t: pt.t + dt,
                    y: pt.y + dy,
                };
                let checks = [
                    (Comp::Ux, (u(sh(h, 0., 0.)) - u(sh(-h, 0., 0.))) / (2. * h)),
                    (Comp::Ut, (u(sh(0., h, 0.)) - u(sh(0., -h, 0.))) / (2. * h)),
                    (
                        Comp::Uxx,
                        (u(sh(h, 0., 0.)) - 2. * u(pt) + u(sh(-h, 0., 0.))) / (h * h),
                    ),
                    (
                        Comp::Utt,
                        (u(sh(0., h, 0.)) - 2. * u(pt) + u(sh(0., -h, 0.))) / (h * h),
                    ),
                ];
                for (c, fd) in checks {
                    let exact = j.get(c);
                    let tol = 1e-5 * (1.0 + exact.abs());
                    assert!((exact - fd).abs() < tol, "{id} {c:?}: {exact} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn boundary_targets_agree_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for id in closed_form_ids() {
            let p = PdeProblem::new(id);
            for bc in &p.bcs {
                for _ in 0..100 {
                    let mut pt = random_point(&p, &mut rng);
                    match bc.face {
                        Face::XLo | Face::XHi => pt.x = p.face_coordinate(bc.face),
                        Face::YLo | Face::YHi => pt.y = p.face_coordinate(bc.face),
                    }
                    let b = p.reference_bundle(pt).unwrap();
                    match bc.kind {
                        BcKind::Dirichlet(g) => {
                            assert!((b.jet.c[0] - p.target(g, pt)).abs() < 1e-10, "{id}")
                        }
                        BcKind::Robin { h, target } => {
                            let lhs = b.jet.get(Comp::Ux) + h * b.jet.c[0];
                            assert!((lhs - p.target(target, pt)).abs() < 1e-10, "{id}")
                        }
                        BcKind::Periodic { partner } => {
                            let mut q = pt;
                            q.x = p.face_coordinate(partner);
                            let other = p.reference_eval(q).unwrap();
                            assert!((b.jet.c[0] - other).abs() < 1e-10, "{id}");
                        }
                    }
                }
            }
            for ic in &p.ics {
                let mut pt = random_point(&p, &mut rng);
                pt.t = p.domain.time().lo;
                let b = p.reference_bundle(pt).unwrap();
                let got = match ic.order {
                    IcOrder::Value => b.jet.c[0],
                    IcOrder::TimeDerivative => b.jet.get(Comp::Ut),
                };
                assert!((got - p.target(ic.target, pt)).abs() < 1e-12, "{id}");
            }
        }
    }

    #[test]
    fn heat2d_separable_solution_rate() {
        assert!((HEAT2D_KAPPA - 1.0016).abs() < 1e-15);
        let p = PdeProblem::new(ProblemId::Heat2D);
        let pt = Point::new_2d(0.123, 0.456, 2.5);
        let b = p.reference_bundle(pt).unwrap();
        assert!(p.residual_at(&b, pt).unwrap().abs() < 1e-8);
    }

    #[test]
    fn residual_partials_match_finite_differences() {
        // Nonlinear residuals: check d r / d comp numerically.
        for id in [ProblemId::Reaction, ProblemId::Burgers, ProblemId::AllenCahn] {
            let p = PdeProblem::new(id);
            let mut u = Jet::<f64>::zero();
            for (i, v) in u.c.iter_mut().enumerate() {
                *v = 0.3 + 0.1 * i as f64;
            }
            let pt = Point::new(0.2, 0.4);
            let (_, d) = p.residual_partials(&u, pt);
            for i in 0..7 {
                let h = 1e-6;
                let mut up = u;
                up.c[i] += h;
                let mut dn = u;
                dn.c[i] -= h;
                let fd = (p.residual_partials(&up, pt).0 - p.residual_partials(&dn, pt).0) / (2.0 * h);
                assert!((fd - d.c[i]).abs() < 1e-7, "{id} comp {i}");
            }
        }
    }

    #[test]
    fn parse_ids() {
        assert_eq!("wave".parse::<ProblemId>().unwrap(), ProblemId::Wave);
        assert_eq!("Allen_Cahn".parse::<ProblemId>().unwrap(), ProblemId::AllenCahn);
        assert_eq!("heat2d".parse::<ProblemId>().unwrap(), ProblemId::Heat2D);
        assert!("navier-stokes".parse::<ProblemId>().is_err());
    }
}
