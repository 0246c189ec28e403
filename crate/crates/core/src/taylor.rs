//! Truncated Taylor series in two variables (s, t), total degree at most 4.
//!
//! Coefficients are stored by total degree: index(i, j) = d(d+1)/2 + j with d = i + j,
//! where i is the power of s and j the power of t. Each value carries its own
//! truncation order so low-order work stays cheap.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

pub const MAX_ORDER: usize = 4;
const N: usize = 15;

#[inline]
pub const fn index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[inline]
const fn len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor {
    c: [f64; N],
    order: u8,
}

impl Default for Taylor {
    fn default() -> Self {
        Taylor { c: [0.0; N], order: MAX_ORDER as u8 }
    }
}

impl Taylor {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Taylor { c, order: order as u8 }
    }

    /// v + ds*s + dt*t
    pub fn linear(v: f64, ds: f64, dt: f64, order: usize) -> Self {
        let mut t = Taylor::constant(v, order);
        if order >= 1 {
            t.c[1] = ds;
            t.c[2] = dt;
        }
        t
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order() {
            0.0
        } else {
            self.c[index(i, j)]
        }
    }

    /// Partial derivative d^{i+j} / ds^i dt^j at the origin.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        let mut c = [0.0; N];
        c[..len(order)].copy_from_slice(&self.c[..len(order)]);
        Taylor { c, order: order as u8 }
    }

    /// Derivative in s, one order lower.
    pub fn ds(&self) -> Self {
        let o = self.order();
        let mut r = Taylor::constant(0.0, o.saturating_sub(1));
        if o == 0 {
            return r;
        }
        for d in 0..o {
            for j in 0..=d {
                let i = d - j;
                r.c[index(i, j)] = (i + 1) as f64 * self.c[index(i + 1, j)];
            }
        }
        r
    }

    /// Derivative in t, one order lower.
    pub fn dt(&self) -> Self {
        let o = self.order();
        let mut r = Taylor::constant(0.0, o.saturating_sub(1));
        if o == 0 {
            return r;
        }
        for d in 0..o {
            for j in 0..=d {
                let i = d - j;
                r.c[index(i, j)] = (j + 1) as f64 * self.c[index(i, j + 1)];
            }
        }
        r
    }

    /// Directional derivative a*ds + b*dt.
    pub fn deriv(&self, a: f64, b: f64) -> Self {
        self.ds() * a + self.dt() * b
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut r = *self;
        for x in r.c[..len(self.order())].iter_mut() {
            *x *= k;
        }
        r
    }

    /// f(self) where f has derivatives `fd[n]` at the constant term.
    fn compose(&self, fd: &[f64]) -> Self {
        let o = self.order();
        let mut g = *self;
        g.c[0] = 0.0;
        let mut out = Taylor::constant(fd[0], o);
        let mut pow = Taylor::constant(1.0, o);
        let mut fact = 1.0;
        for (n, f) in fd.iter().enumerate().take(o + 1).skip(1) {
            pow = pow * g;
            fact *= n as f64;
            out = out + pow.scale(f / fact);
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let mut fd = [0.0; MAX_ORDER + 1];
        let mut v = 1.0 / a;
        for (n, slot) in fd.iter_mut().enumerate() {
            *slot = v;
            v *= -((n + 1) as f64) / a;
        }
        self.compose(&fd)
    }

    pub fn sqrt(&self) -> Self {
        let a = self.c[0];
        let mut fd = [0.0; MAX_ORDER + 1];
        // d^n/dx^n x^{1/2} = (1/2)(1/2 - 1)...(1/2 - n + 1) x^{1/2 - n}
        let mut coef = 1.0;
        for (n, slot) in fd.iter_mut().enumerate() {
            *slot = coef * a.powf(0.5 - n as f64);
            coef *= 0.5 - n as f64;
        }
        self.compose(&fd)
    }

    pub fn powi(&self, k: i32) -> Self {
        let a = self.c[0];
        let mut fd = [0.0; MAX_ORDER + 1];
        let mut coef = 1.0;
        for (n, slot) in fd.iter_mut().enumerate() {
            *slot = coef * a.powi(k - n as i32);
            coef *= (k - n as i32) as f64;
        }
        self.compose(&fd)
    }

    pub fn atan2(y: &Taylor, x: &Taylor) -> Taylor {
        // d atan2 = (x dy - y dx) / (x^2 + y^2); integrate the derivative series
        let o = y.order().min(x.order());
        let theta0 = y.value().atan2(x.value());
        if o == 0 {
            return Taylor::constant(theta0, 0);
        }
        let r2 = (*x * *x + *y * *y).truncate(o - 1);
        let inv = r2.recip();
        let gs = (x.truncate(o - 1) * y.ds() - y.truncate(o - 1) * x.ds()) * inv;
        let gt = (x.truncate(o - 1) * y.dt() - y.truncate(o - 1) * x.dt()) * inv;
        let mut out = Taylor::constant(theta0, o);
        for d in 1..=o {
            for j in 0..=d {
                let i = d - j;
                out.c[index(i, j)] = if i > 0 {
                    gs.c[index(i - 1, j)] / i as f64
                } else {
                    gt.c[index(i, j - 1)] / j as f64
                };
            }
        }
        out
    }

    pub fn sin_cos(&self) -> (Taylor, Taylor) {
        let (s, c) = self.c[0].sin_cos();
        let sd = [s, c, -s, -c, s];
        let cd = [c, -s, -c, s, c];
        (self.compose(&sd), self.compose(&cd))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, o: Taylor) -> Taylor {
        let order = self.order.min(o.order);
        let mut r = Taylor { c: [0.0; N], order };
        for k in 0..len(order as usize) {
            r.c[k] = self.c[k] + o.c[k];
        }
        r
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, o: Taylor) -> Taylor {
        let order = self.order.min(o.order);
        let mut r = Taylor { c: [0.0; N], order };
        for k in 0..len(order as usize) {
            r.c[k] = self.c[k] - o.c[k];
        }
        r
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, o: Taylor) -> Taylor {
        let order = self.order.min(o.order) as usize;
        let mut r = Taylor { c: [0.0; N], order: order as u8 };
        for d1 in 0..=order {
            for j1 in 0..=d1 {
                let a = self.c[index(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=order - d1 {
                    for j2 in 0..=d2 {
                        r.c[index(d1 - j1 + d2 - j2, j1 + j2)] += a * o.c[index(d2 - j2, j2)];
                    }
                }
            }
        }
        r
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(self, k: f64) -> Taylor {
        self.scale(k)
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(mut self, k: f64) -> Taylor {
        self.c[0] += k;
        self
    }
}

impl Div for Taylor {
    type Output = Taylor;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Taylor) -> Taylor {
        self * o.recip()
    }
}

impl AddAssign for Taylor {
    fn add_assign(&mut self, o: Taylor) {
        *self = *self + o;
    }
}

impl SubAssign for Taylor {
    fn sub_assign(&mut self, o: Taylor) {
        *self = *self - o;
    }
}

/// Scalar ring shared by f64 and Taylor, so providers can be written once.
pub trait Ring:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self>
{
    fn from_f64(v: f64, like: &Self) -> Self;
}

impl Ring for f64 {
    fn from_f64(v: f64, _like: &Self) -> Self {
        v
    }
}

impl Ring for Taylor {
    fn from_f64(v: f64, like: &Self) -> Self {
        Taylor::constant(v, like.order())
    }
}

pub type TVec<const D: usize> = [Taylor; D];

pub fn tdot<const D: usize>(a: &TVec<D>, b: &TVec<D>) -> Taylor {
    let mut s = a[0] * b[0];
    for k in 1..D {
        s += a[k] * b[k];
    }
    s
}

pub fn tscale<const D: usize>(a: &TVec<D>, k: &Taylor) -> TVec<D> {
    std::array::from_fn(|i| a[i] * *k)
}

pub fn taxpy<const D: usize>(y: &TVec<D>, k: &Taylor, x: &TVec<D>) -> TVec<D> {
    std::array::from_fn(|i| y[i] + x[i] * *k)
}

pub fn tsub<const D: usize>(a: &TVec<D>, b: &TVec<D>) -> TVec<D> {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn tadd<const D: usize>(a: &TVec<D>, b: &TVec<D>) -> TVec<D> {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn tnormalize<const D: usize>(a: &TVec<D>) -> TVec<D> {
    let inv = tdot(a, a).sqrt().recip();
    tscale(a, &inv)
}

pub fn ttruncate<const D: usize>(a: &TVec<D>, order: usize) -> TVec<D> {
    std::array::from_fn(|i| a[i].truncate(order))
}

pub fn tvalue<const D: usize>(a: &TVec<D>) -> nalgebra::SVector<f64, D> {
    nalgebra::SVector::from_fn(|i, _| a[i].value())
}

pub fn tds<const D: usize>(a: &TVec<D>) -> TVec<D> {
    std::array::from_fn(|i| a[i].ds())
}

pub fn tdt<const D: usize>(a: &TVec<D>) -> TVec<D> {
    std::array::from_fn(|i| a[i].dt())
}

pub fn tconst<const D: usize>(v: &nalgebra::SVector<f64, D>, order: usize) -> TVec<D> {
    std::array::from_fn(|i| Taylor::constant(v[i], order))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-11 * (1.0 + b.abs())
    }

    #[test]
    fn index_layout() {
        assert_eq!(index(0, 0), 0);
        assert_eq!(index(1, 0), 1);
        assert_eq!(index(0, 1), 2);
        assert_eq!(index(2, 0), 3);
        assert_eq!(index(0, 4), 14);
    }

    #[test]
    fn product_matches_polynomial() {
        // (1 + s)(2 + t) = 2 + 2s + t + st
        let a = Taylor::linear(1.0, 1.0, 0.0, 4);
        let b = Taylor::linear(2.0, 0.0, 1.0, 4);
        let p = a * b;
        assert!(close(p.coeff(0, 0), 2.0));
        assert!(close(p.coeff(1, 0), 2.0));
        assert!(close(p.coeff(0, 1), 1.0));
        assert!(close(p.coeff(1, 1), 1.0));
        assert!(close(p.coeff(2, 0), 0.0));
    }

    #[test]
    fn recip_sqrt_against_closed_form() {
        // f = 1 + s^2 + t^2 around the origin: 1/sqrt(f) has partials
        // d2/ds2 = -1, d4/ds4 = 9, d4/ds2dt2 = 3
        let s = Taylor::linear(0.0, 1.0, 0.0, 4);
        let t = Taylor::linear(0.0, 0.0, 1.0, 4);
        let f = s * s + t * t + 1.0;
        let g = f.sqrt().recip();
        assert!(close(g.partial(0, 0), 1.0));
        assert!(close(g.partial(2, 0), -1.0));
        assert!(close(g.partial(4, 0), 9.0));
        assert!(close(g.partial(2, 2), 3.0));
        let h = f.powi(-1);
        // 1/(1+s^2) = 1 - s^2 + s^4
        assert!(close(h.coeff(4, 0), 1.0));
        assert!(close(h.coeff(2, 2), 2.0));
    }

    #[test]
    fn derivative_and_atan2() {
        let s = Taylor::linear(0.3, 1.0, 0.0, 4);
        let t = Taylor::linear(0.7, 0.0, 1.0, 4);
        let f = s * s * t;
        let d = f.ds();
        assert!(close(d.value(), 2.0 * 0.3 * 0.7));
        assert!(close(d.partial(0, 1), 2.0 * 0.3));
        let a = Taylor::atan2(&t, &s);
        // d/ds atan2(t, s) = -t / (s^2 + t^2)
        assert!(close(a.partial(1, 0), -0.7 / (0.09 + 0.49)));
        assert!(close(a.partial(0, 1), 0.3 / (0.09 + 0.49)));
    }
}
