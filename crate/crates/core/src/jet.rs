//! Truncated second-order Taylor jets in the input coordinates.
//!
//! A [`Jet`] carries a value, the three first partials (x, t, y) and the
//! three pure second partials (xx, tt, yy). No residual in the benchmark
//! suite reads a mixed partial, so mixed terms are not propagated. Jets
//! compose exactly (no truncation error for the components they carry),
//! and every forward rule has a matching adjoint rule used by the reverse
//! pass.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

pub const NCOMP: usize = 7;

/// Index of a jet component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Comp {
    U = 0,
    Ux = 1,
    Ut = 2,
    Uy = 3,
    Uxx = 4,
    Utt = 5,
    Uyy = 6,
}

impl Comp {
    pub const ALL: [Comp; NCOMP] = [
        Comp::U,
        Comp::Ux,
        Comp::Ut,
        Comp::Uy,
        Comp::Uxx,
        Comp::Utt,
        Comp::Uyy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Comp::U => "u",
            Comp::Ux => "u_x",
            Comp::Ut => "u_t",
            Comp::Uy => "u_y",
            Comp::Uxx => "u_xx",
            Comp::Utt => "u_tt",
            Comp::Uyy => "u_yy",
        }
    }
}

/// Coordinate direction. Jet component `1 + dir` is the first partial,
/// `4 + dir` the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    X = 0,
    T = 1,
    Y = 2,
}

impl Dir {
    pub const ALL: [Dir; 3] = [Dir::X, Dir::T, Dir::Y];

    pub fn first(self) -> usize {
        1 + self as usize
    }
    pub fn second(self) -> usize {
        4 + self as usize
    }
}

/// Set of jet components, as a bitmask. Requesting a second partial always
/// pulls in the matching first partial since the chain rule needs it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CompMask(u8);

impl CompMask {
    pub const VALUE: CompMask = CompMask(1);

    pub fn from_comps(comps: &[Comp]) -> Self {
        let mut m = CompMask::VALUE;
        for &c in comps {
            m = m.with(c);
        }
        m
    }

    pub fn with(self, c: Comp) -> Self {
        let mut bits = self.0 | 1 << c as u8 | 1;
        let i = c as u8;
        if i >= 4 {
            bits |= 1 << (i - 3);
        }
        CompMask(bits)
    }

    pub fn union(self, o: CompMask) -> Self {
        CompMask(self.0 | o.0)
    }

    pub fn contains(self, c: Comp) -> bool {
        self.0 & (1 << c as u8) != 0
    }

    pub fn is_subset_of(self, o: CompMask) -> bool {
        self.0 & !o.0 == 0
    }

    /// Active component indices in ascending order (value first).
    pub fn indices(self) -> Vec<usize> {
        (0..NCOMP).filter(|&i| self.0 & (1 << i) != 0).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S> {
    pub c: [S; NCOMP],
}

impl<S: Scalar> Default for Jet<S> {
    fn default() -> Self {
        Jet {
            c: [S::default(); NCOMP],
        }
    }
}

impl<S: Scalar> Jet<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: S) -> Self {
        let mut j = Self::zero();
        j.c[0] = v;
        j
    }

    /// The coordinate itself seen as a function of the inputs.
    pub fn coordinate(v: f64, dir: Dir) -> Self {
        let mut j = Self::constant(S::cst(v));
        j.c[dir.first()] = S::cst(1.0);
        j
    }

    pub fn value(&self) -> S {
        self.c[0]
    }

    pub fn get(&self, c: Comp) -> S {
        self.c[c.index()]
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..NCOMP {
            r.c[i] += o.c[i];
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..NCOMP {
            r.c[i] -= o.c[i];
        }
        r
    }

    pub fn scale(&self, k: S) -> Self {
        let mut r = *self;
        for v in r.c.iter_mut() {
            *v *= k;
        }
        r
    }

    pub fn add_const(&self, k: S) -> Self {
        let mut r = *self;
        r.c[0] += k;
        r
    }

    pub fn add_assign(&mut self, o: &Self) {
        for i in 0..NCOMP {
            self.c[i] += o.c[i];
        }
    }

    pub fn axpy(&mut self, a: S, o: &Self) {
        for i in 0..NCOMP {
            self.c[i] += a * o.c[i];
        }
    }

    /// Componentwise inner product, used to contract an adjoint with a
    /// tangent jet.
    pub fn dot(&self, o: &Self) -> S {
        let mut acc = S::default();
        for i in 0..NCOMP {
            acc += self.c[i] * o.c[i];
        }
        acc
    }

    pub fn mul(&self, b: &Self) -> Self {
        let a = self;
        let mut r = Self::zero();
        r.c[0] = a.c[0] * b.c[0];
        for d in 0..3 {
            let (i, j) = (1 + d, 4 + d);
            r.c[i] = a.c[i] * b.c[0] + a.c[0] * b.c[i];
            r.c[j] = a.c[j] * b.c[0] + (a.c[i] * b.c[i]).scale(2.0) + a.c[0] * b.c[j];
        }
        r
    }

    /// Adjoint of `p = a * b`: returns `(ā, b̄)` given `p̄`.
    pub fn mul_adjoint(a: &Self, b: &Self, pbar: &Self) -> (Self, Self) {
        (Self::mul_adjoint_one(a, b, pbar), Self::mul_adjoint_one(b, a, pbar))
    }

    /// Adjoint of `p = a * b` with respect to `a` only.
    pub fn mul_adjoint_one(_a: &Self, b: &Self, pbar: &Self) -> Self {
        let mut abar = Self::zero();
        let mut v = pbar.c[0] * b.c[0];
        for d in 0..3 {
            let (i, j) = (1 + d, 4 + d);
            v += pbar.c[i] * b.c[i] + pbar.c[j] * b.c[j];
            abar.c[i] = pbar.c[i] * b.c[0] + (pbar.c[j] * b.c[i]).scale(2.0);
            abar.c[j] = pbar.c[j] * b.c[0];
        }
        abar.c[0] = v;
        abar
    }

    /// `f(a)` given `f`, `f'`, `f''` at `a.value()`.
    pub fn unary(&self, f: [S; 3]) -> Self {
        let a = self;
        let mut r = Self::zero();
        r.c[0] = f[0];
        for d in 0..3 {
            let (i, j) = (1 + d, 4 + d);
            r.c[i] = f[1] * a.c[i];
            r.c[j] = f[2] * a.c[i] * a.c[i] + f[1] * a.c[j];
        }
        r
    }

    /// Adjoint of `p = f(a)` given `f'`, `f''`, `f'''` at `a.value()`.
    pub fn unary_adjoint(a: &Self, f: [S; 3], pbar: &Self) -> Self {
        let [f1, f2, f3] = f;
        let mut abar = Self::zero();
        let mut v = pbar.c[0] * f1;
        for d in 0..3 {
            let (i, j) = (1 + d, 4 + d);
            v += pbar.c[i] * f2 * a.c[i] + pbar.c[j] * (f3 * a.c[i] * a.c[i] + f2 * a.c[j]);
            abar.c[i] = pbar.c[i] * f1 + (pbar.c[j] * f2 * a.c[i]).scale(2.0);
            abar.c[j] = pbar.c[j] * f1;
        }
        abar.c[0] = v;
        abar
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.unary([s, c, -s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.unary([c, -s, -c])
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.unary([e, e, e])
    }

    /// Derivative tables `[f', f'', f''']` for sin and cos at `a.value()`.
    pub fn sin_derivs(&self) -> [S; 3] {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        [c, -s, -c]
    }

    pub fn cos_derivs(&self) -> [S; 3] {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        [-s, -c, s]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Jet<T> {
        let mut r = Jet::<T>::zero();
        for i in 0..NCOMP {
            r.c[i] = f(self.c[i]);
        }
        r
    }
}

impl Jet<f64> {
    pub fn lift<S: Scalar>(&self) -> Jet<S> {
        self.map(S::cst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;

    /// Evaluate f at x + h·e_dir and t likewise using jets seeded by dual
    /// numbers; compare against finite differences of plain f64 evaluation.
    fn fd_check(f: impl Fn(&Jet<f64>, &Jet<f64>) -> Jet<f64>, g: impl Fn(f64, f64) -> f64) {
        let (x0, t0) = (0.31, 0.77);
        let j = f(&Jet::coordinate(x0, Dir::X), &Jet::coordinate(t0, Dir::T));
        let h = 1e-4;
        let ux = (g(x0 + h, t0) - g(x0 - h, t0)) / (2.0 * h);
        let ut = (g(x0, t0 + h) - g(x0, t0 - h)) / (2.0 * h);
        let uxx = (g(x0 + h, t0) - 2.0 * g(x0, t0) + g(x0 - h, t0)) / (h * h);
        let utt = (g(x0, t0 + h) - 2.0 * g(x0, t0) + g(x0, t0 - h)) / (h * h);
        assert!((j.c[0] - g(x0, t0)).abs() < 1e-12);
        assert!((j.get(Comp::Ux) - ux).abs() < 1e-7);
        assert!((j.get(Comp::Ut) - ut).abs() < 1e-7);
        assert!((j.get(Comp::Uxx) - uxx).abs() < 1e-5);
        assert!((j.get(Comp::Utt) - utt).abs() < 1e-5);
    }

    #[test]
    fn product_and_unary_rules() {
        fd_check(
            |x, t| x.scale(3.0).sin().mul(&t.scale(2.0).cos()),
            |x, t| (3.0 * x).sin() * (2.0 * t).cos(),
        );
        fd_check(
            |x, t| x.mul(x).mul(&t).exp(),
            |x, t| (x * x * t).exp(),
        );
    }

    #[test]
    fn mask_closure_pulls_first_partials() {
        let m = CompMask::from_comps(&[Comp::Uxx, Comp::Ut]);
        assert_eq!(m.indices(), vec![0, 1, 2, 4]);
        assert!(CompMask::VALUE.is_subset_of(m));
        assert!(!m.is_subset_of(CompMask::VALUE));
    }

    /// The adjoint rules must be the transpose of the forward rules: for any
    /// tangent `da` through the forward map, `<p̄, J da> = <ā, da>`.
    #[test]
    fn adjoints_are_transposes() {
        let mk = |s: f64| -> Jet<Dual> {
            let mut j = Jet::zero();
            for i in 0..NCOMP {
                j.c[i] = Dual::new((s + i as f64).sin(), (s * 1.3 + i as f64).cos());
            }
            j
        };
        let a = mk(0.2);
        let b = mk(1.7);
        let pbar = mk(3.1).map(|d| d.re);
        // Forward-differentiate mul along the dual tangents of a and b.
        let p = a.mul(&b);
        let lhs: f64 = (0..NCOMP).map(|i| pbar.c[i] * p.c[i].eps).sum();
        let ap = a.map(|d| d.re);
        let bp = b.map(|d| d.re);
        let (abar, bbar) = Jet::mul_adjoint(&ap, &bp, &pbar);
        let rhs: f64 = (0..NCOMP)
            .map(|i| abar.c[i] * a.c[i].eps + bbar.c[i] * b.c[i].eps)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");

        // Unary: sin. Only the jet components are differentiated here, the
        // derivative table is evaluated at the primal value (as in the
        // reverse pass), so the tangent of the table enters via f''.
        let q = a.sin();
        let lhs: f64 = (0..NCOMP).map(|i| pbar.c[i] * q.c[i].eps).sum();
        let abar = Jet::unary_adjoint(&ap, ap.sin_derivs(), &pbar);
        let rhs: f64 = (0..NCOMP).map(|i| abar.c[i] * a.c[i].eps).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }
}
