//! Second-order forward-mode differentiation.
//!
//! Chart maps are written once against the [`Real`] trait and evaluated either
//! on plain `f64` or on [`Jet`], which carries the gradient and the (packed,
//! symmetric) Hessian with respect to the chart variables. A jet with empty
//! derivative storage is a constant, so constants never need to know how many
//! variables are in play.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar type a chart map can be evaluated on.
pub trait Real:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(x: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn exp(&self) -> Self;
    fn recip(&self) -> Self;

    fn powi(&self, k: u32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }

    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Real for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
}

/// Value, gradient and packed upper-triangular Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    g: Vec<f64>,
    h: Vec<f64>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row i of the upper triangle starts at i*n - i*(i-1)/2
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: Vec::new(), h: Vec::new() }
    }

    /// The `i`-th of `n` independent variables, evaluated at `v`.
    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut g = vec![0.0; n];
        g[i] = 1.0;
        Jet { v, g, h: vec![0.0; packed_len(n)] }
    }

    /// Seeds `values.len()` independent variables.
    pub fn variables(values: &[f64]) -> Vec<Jet> {
        let n = values.len();
        values.iter().enumerate().map(|(i, &v)| Jet::variable(v, i, n)).collect()
    }

    pub fn nvars(&self) -> usize {
        self.g.len()
    }

    pub fn grad(&self, i: usize) -> f64 {
        self.g.get(i).copied().unwrap_or(0.0)
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        let n = self.g.len();
        if n == 0 {
            return 0.0;
        }
        self.h[packed_index(n, i, j)]
    }

    pub fn gradient(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.grad(i)).collect()
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.g.len();
        if n == 0 {
            return Jet::constant(f0);
        }
        let g: Vec<f64> = self.g.iter().map(|x| f1 * x).collect();
        let mut h = Vec::with_capacity(self.h.len());
        let mut k = 0;
        for i in 0..n {
            let gi = self.g[i];
            for j in i..n {
                h.push(f1 * self.h[k] + f2 * gi * self.g[j]);
                k += 1;
            }
        }
        Jet { v: f0, g, h }
    }

    fn lin(a: &Jet, ca: f64, b: &Jet, cb: f64, v: f64) -> Jet {
        match (a.g.len(), b.g.len()) {
            (0, 0) => Jet::constant(v),
            (_, 0) => Jet { v, g: a.g.iter().map(|x| ca * x).collect(), h: a.h.iter().map(|x| ca * x).collect() },
            (0, _) => Jet { v, g: b.g.iter().map(|x| cb * x).collect(), h: b.h.iter().map(|x| cb * x).collect() },
            (n, m) => {
                assert_eq!(n, m, "jets over different variable counts");
                Jet {
                    v,
                    g: a.g.iter().zip(&b.g).map(|(x, y)| ca * x + cb * y).collect(),
                    h: a.h.iter().zip(&b.h).map(|(x, y)| ca * x + cb * y).collect(),
                }
            }
        }
    }

    fn scale(&self, c: f64) -> Jet {
        Jet { v: self.v * c, g: self.g.iter().map(|x| c * x).collect(), h: self.h.iter().map(|x| c * x).collect() }
    }

    fn product(a: &Jet, b: &Jet) -> Jet {
        match (a.g.len(), b.g.len()) {
            (0, _) => b.scale(a.v),
            (_, 0) => a.scale(b.v),
            (n, m) => {
                assert_eq!(n, m, "jets over different variable counts");
                let g = a.g.iter().zip(&b.g).map(|(x, y)| a.v * y + b.v * x).collect();
                let mut h = Vec::with_capacity(a.h.len());
                let mut k = 0;
                for i in 0..n {
                    let (ai, bi) = (a.g[i], b.g[i]);
                    for j in i..n {
                        h.push(a.v * b.h[k] + b.v * a.h[k] + ai * b.g[j] + bi * a.g[j]);
                        k += 1;
                    }
                }
                Jet { v: a.v * b.v, g, h }
            }
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::lin(&self, 1.0, &o, 1.0, self.v + o.v)
    }
}
impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::lin(&self, 1.0, &o, -1.0, self.v - o.v)
    }
}
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::product(&self, &o)
    }
}
impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        Jet::product(&self, &o.recip())
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}
impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}
impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

impl Real for Jet {
    fn cst(x: f64) -> Self {
        Jet::constant(x)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sinh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }
    fn cosh(&self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }
    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

/// `cos(√z)` as an entire function of `z`, usable at and below zero.
pub fn cos_sqrt<T: Real>(z: &T) -> T {
    let zv = z.value();
    if zv > 1e-2 {
        z.sqrt().cos()
    } else if zv < -1e-2 {
        (-z.clone()).sqrt().cosh()
    } else {
        // 1 - z/2! + z^2/4! - ...
        let mut term = T::cst(1.0);
        let mut acc = T::cst(1.0);
        for k in 1..10 {
            let d = ((2 * k - 1) * (2 * k)) as f64;
            term = term * z.clone() * (-1.0 / d);
            acc = acc + term.clone();
        }
        acc
    }
}

/// `sin(√z)/√z` as an entire function of `z`.
pub fn sinc_sqrt<T: Real>(z: &T) -> T {
    let zv = z.value();
    if zv > 1e-2 {
        let s = z.sqrt();
        s.sin() / s
    } else if zv < -1e-2 {
        let s = (-z.clone()).sqrt();
        s.sinh() / s
    } else {
        let mut term = T::cst(1.0);
        let mut acc = T::cst(1.0);
        for k in 1..10 {
            let d = ((2 * k) * (2 * k + 1)) as f64;
            term = term * z.clone() * (-1.0 / d);
            acc = acc + term.clone();
        }
        acc
    }
}
