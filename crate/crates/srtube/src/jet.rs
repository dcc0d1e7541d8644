//! Forward-mode jets over up to four coordinates.
//!
//! `Jet1` carries a value and gradient, `Jet2` additionally the (symmetric)
//! Hessian. Arrays are fixed at width 4; three-dimensional charts simply leave
//! the last slot at zero, which propagates through every operation.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Maximum number of chart coordinates.
pub const DIM: usize = 4;

/// Common interface for plain values and jets, used by the generic
/// expression evaluator. `ORDER` tells the evaluator which domain
/// restrictions apply (derivatives of `sqrt` blow up at zero, for instance).
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const ORDER: usize;

    fn constant(c: f64) -> Self;
    /// The i-th coordinate function evaluated at `x`.
    fn variable(i: usize, x: f64) -> Self;
    fn val(&self) -> f64;
    fn scale(self, c: f64) -> Self;

    // Domain conditions (arguments positive, denominators nonzero) are the
    // caller's responsibility; see `expr::Expr::eval` for the checked layer.
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
}

impl Scalar for f64 {
    const ORDER: usize = 0;

    fn constant(c: f64) -> Self {
        c
    }
    fn variable(_i: usize, x: f64) -> Self {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

/// First-order jet: value and coordinate gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: [f64; DIM],
}

impl Jet1 {
    pub const ZERO: Jet1 = Jet1 {
        v: 0.0,
        g: [0.0; DIM],
    };

    pub fn new(v: f64, g: [f64; DIM]) -> Self {
        Jet1 { v, g }
    }

    /// Apply a scalar function given its value and first derivative at `self.v`.
    fn chain(self, f0: f64, f1: f64) -> Self {
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = f1 * self.g[a];
        }
        Jet1 { v: f0, g }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = self.g[a] + o.g[a];
        }
        Jet1 { v: self.v + o.v, g }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, o: Jet1) -> Jet1 {
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = self.g[a] - o.g[a];
        }
        Jet1 { v: self.v - o.v, g }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = self.v * o.g[a] + o.v * self.g[a];
        }
        Jet1 { v: self.v * o.v, g }
    }
}

impl Div for Jet1 {
    type Output = Jet1;
    fn div(self, o: Jet1) -> Jet1 {
        let v = self.v / o.v;
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = (self.g[a] - v * o.g[a]) / o.v;
        }
        Jet1 { v, g }
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        let mut g = [0.0; DIM];
        for a in 0..DIM {
            g[a] = -self.g[a];
        }
        Jet1 { v: -self.v, g }
    }
}

impl Scalar for Jet1 {
    const ORDER: usize = 1;

    fn constant(c: f64) -> Self {
        Jet1 {
            v: c,
            g: [0.0; DIM],
        }
    }

    fn variable(i: usize, x: f64) -> Self {
        let mut g = [0.0; DIM];
        g[i] = 1.0;
        Jet1 { v: x, g }
    }

    fn val(&self) -> f64 {
        self.v
    }

    fn scale(self, c: f64) -> Self {
        self.chain(c * self.v, c)
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }

    fn powi(self, n: i32) -> Self {
        self.chain(self.v.powi(n), f64::from(n) * self.v.powi(n - 1))
    }

    fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }
}

/// Second-order jet: value, gradient, and full Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; DIM],
    pub h: [[f64; DIM]; DIM],
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        v: 0.0,
        g: [0.0; DIM],
        h: [[0.0; DIM]; DIM],
    };

    /// Drop the Hessian.
    pub fn lower(&self) -> Jet1 {
        Jet1 {
            v: self.v,
            g: self.g,
        }
    }

    /// Apply a scalar function given value, first, and second derivative at
    /// `self.v`: grad -> f1 g, hess -> f1 h + f2 g (x) g.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut g = [0.0; DIM];
        let mut h = [[0.0; DIM]; DIM];
        for a in 0..DIM {
            g[a] = f1 * self.g[a];
            for b in 0..DIM {
                h[a][b] = f1 * self.h[a][b] + f2 * self.g[a] * self.g[b];
            }
        }
        Jet2 { v: f0, g, h }
    }

    fn recip(self) -> Self {
        let iv = 1.0 / self.v;
        self.chain(iv, -iv * iv, 2.0 * iv * iv * iv)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r.v += o.v;
        for a in 0..DIM {
            r.g[a] += o.g[a];
            for b in 0..DIM {
                r.h[a][b] += o.h[a][b];
            }
        }
        r
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r.v -= o.v;
        for a in 0..DIM {
            r.g[a] -= o.g[a];
            for b in 0..DIM {
                r.h[a][b] -= o.h[a][b];
            }
        }
        r
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut g = [0.0; DIM];
        let mut h = [[0.0; DIM]; DIM];
        for a in 0..DIM {
            g[a] = self.v * o.g[a] + o.v * self.g[a];
            for b in 0..DIM {
                h[a][b] = self.v * o.h[a][b]
                    + o.v * self.h[a][b]
                    + self.g[a] * o.g[b]
                    + self.g[b] * o.g[a];
            }
        }
        Jet2 {
            v: self.v * o.v,
            g,
            h,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.chain(-self.v, -1.0, 0.0)
    }
}

impl Scalar for Jet2 {
    const ORDER: usize = 2;

    fn constant(c: f64) -> Self {
        Jet2 {
            v: c,
            ..Jet2::ZERO
        }
    }

    fn variable(i: usize, x: f64) -> Self {
        let mut g = [0.0; DIM];
        g[i] = 1.0;
        Jet2 {
            v: x,
            g,
            h: [[0.0; DIM]; DIM],
        }
    }

    fn val(&self) -> f64 {
        self.v
    }

    fn scale(self, c: f64) -> Self {
        self.chain(c * self.v, c, 0.0)
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let iv = 1.0 / self.v;
        self.chain(self.v.ln(), iv, -iv * iv)
    }

    fn powi(self, n: i32) -> Self {
        let nf = f64::from(n);
        self.chain(
            self.v.powi(n),
            nf * self.v.powi(n - 1),
            nf * (nf - 1.0) * self.v.powi(n - 2),
        )
    }

    fn powf(self, p: f64) -> Self {
        self.chain(
            self.v.powf(p),
            p * self.v.powf(p - 1.0),
            p * (p - 1.0) * self.v.powf(p - 2.0),
        )
    }
}
