//! Scalar abstraction shared by the value path (`f64`) and the
//! Hessian-vector path (`Dual`, one tangent direction in parameter space).
//!
//! Everything in the network engine is written once over [`Scalar`]; running
//! it with `Dual` seeded by a parameter direction `v` differentiates the whole
//! forward + reverse computation along `v`, which yields `H v` exactly.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(v: f64) -> Self;
    /// Primal part.
    fn re(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn erf(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }

    fn is_finite(self) -> bool {
        self.re().is_finite()
    }

    /// `C = alpha * A * B + beta * C` on strided matrices (m x k times k x n).
    ///
    /// The default is a plain triple loop; `f64` and `Dual` route to
    /// `matrixmultiply`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: usize,
        csa: usize,
        b: &[Self],
        rsb: usize,
        csb: usize,
        beta: f64,
        c: &mut [Self],
        rsc: usize,
        csc: usize,
    ) {
        for i in 0..m {
            for j in 0..n {
                let mut acc = Self::default();
                for p in 0..k {
                    acc += a[i * rsa + p * csa] * b[p * rsb + j * csb];
                }
                let slot = &mut c[i * rsc + j * csc];
                *slot = if beta == 0.0 { acc } else { slot.scale(beta) + acc };
            }
        }
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "gemm operand out of bounds: {last} >= {len}");
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: usize,
        csa: usize,
        b: &[f64],
        rsb: usize,
        csb: usize,
        beta: f64,
        c: &mut [f64],
        rsc: usize,
        csc: usize,
    ) {
        if m == 0 || n == 0 {
            return;
        }
        check_extent(a.len(), m, k, rsa, csa);
        check_extent(b.len(), k, n, rsb, csb);
        check_extent(c.len(), m, n, rsc, csc);
        // SAFETY: extents checked above; slices do not alias (c is &mut).
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa as isize,
                csa as isize,
                b.as_ptr(),
                rsb as isize,
                csb as isize,
                beta,
                c.as_mut_ptr(),
                rsc as isize,
                csc as isize,
            );
        }
    }
}

/// First-order dual number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Dual { re, eps }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        Dual::new(f, df * self.eps)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        let q = self.re * inv;
        Dual::new(q, (self.eps - q * o.eps) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        self.re -= o.re;
        self.eps -= o.eps;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl Scalar for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s)
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, 1.0 - t * t)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn erf(self) -> Self {
        let d = std::f64::consts::FRAC_2_SQRT_PI * (-self.re * self.re).exp();
        self.chain(libm::erf(self.re), d)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::cst(1.0);
        }
        self.chain(self.re.powi(n), n as f64 * self.re.powi(n - 1))
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        Dual::new(self.re * k, self.eps * k)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Dual],
        rsa: usize,
        csa: usize,
        b: &[Dual],
        rsb: usize,
        csb: usize,
        beta: f64,
        c: &mut [Dual],
        rsc: usize,
        csc: usize,
    ) {
        if m == 0 || n == 0 {
            return;
        }
        check_extent(a.len(), m, k, rsa, csa);
        check_extent(b.len(), k, n, rsb, csb);
        check_extent(c.len(), m, n, rsc, csc);
        // A Dual slice is an interleaved pair of f64 matrices: the primal
        // parts start at offset 0, the tangents at offset 1, both with doubled
        // strides. C.re = A.re B.re, C.eps = A.eps B.re + A.re B.eps.
        let (rsa, csa, rsb, csb, rsc, csc) = (
            2 * rsa as isize,
            2 * csa as isize,
            2 * rsb as isize,
            2 * csb as isize,
            2 * rsc as isize,
            2 * csc as isize,
        );
        let ap = a.as_ptr() as *const f64;
        let bp = b.as_ptr() as *const f64;
        let cp = c.as_mut_ptr() as *mut f64;
        // SAFETY: Dual is repr(C) of two f64, extents checked above, and the
        // primal/tangent views of C are disjoint.
        unsafe {
            matrixmultiply::dgemm(m, k, n, 1.0, ap, rsa, csa, bp, rsb, csb, beta, cp, rsc, csc);
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                ap.add(1),
                rsa,
                csa,
                bp,
                rsb,
                csb,
                beta,
                cp.add(1),
                rsc,
                csc,
            );
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                ap,
                rsa,
                csa,
                bp.add(1),
                rsb,
                csb,
                1.0,
                cp.add(1),
                rsc,
                csc,
            );
        }
    }
}

/// Lift a primal slice into duals with the given tangent.
pub fn seed_duals(primal: &[f64], tangent: &[f64]) -> Vec<Dual> {
    primal
        .iter()
        .zip(tangent)
        .map(|(&p, &t)| Dual::new(p, t))
        .collect()
}

pub fn lift<S: Scalar>(values: &[f64]) -> Vec<S> {
    values.iter().map(|&v| S::cst(v)).collect()
}
