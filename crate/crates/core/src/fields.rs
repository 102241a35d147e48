//! Closed-form space-time fields with exact 2-jets.
//!
//! A [`ScalarField`] is an expression tree over constants, the coordinates
//! `x_i` and `t`, arithmetic, powers, `exp`, `log`, `|·|` and `|x|`. Jets are
//! computed by forward-mode differentiation of the tree: the full first
//! derivative in `(x, t)` and the spatial Hessian are propagated together,
//! which is closed under every node type used here.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};
use crate::geometry::{Coords, SpacetimePoint};

/// Symmetric `n x n` matrix stored as its upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: SmallVec<[f64; 3]>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: smallvec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, scale);
        }
        m
    }

    /// Builds from a full row-major matrix, reading the upper triangle only.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rows[i][j]);
            }
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.upper[k] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `⟨M v, v⟩`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * v[i] * v[j];
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| c * v).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }
}

/// Value, time derivative, spatial gradient and spatial Hessian at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub dt: f64,
    pub grad: Coords,
    pub hess: SymMatrix,
}

impl Jet2 {
    pub fn new(value: f64, dt: f64, grad: &[f64], hess: SymMatrix) -> Self {
        assert_eq!(grad.len(), hess.n(), "gradient and Hessian dimensions differ");
        Self {
            value,
            dt,
            grad: Coords::from_slice(grad),
            hess,
        }
    }

    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn negated(&self) -> Self {
        Self {
            value: -self.value,
            dt: -self.dt,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.scaled(-1.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.dt.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.is_finite()
    }
}

#[derive(Debug)]
enum Expr {
    Const(f64),
    X(usize),
    T,
    NormSq,
    Norm,
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, f64),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
    Abs(Arc<Expr>),
    Min(Arc<Expr>, Arc<Expr>),
}

/// Closed-form scalar field on `R^n x R`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    n: usize,
    expr: Arc<Expr>,
}

impl ScalarField {
    fn wrap(n: usize, expr: Expr) -> Self {
        Self {
            n,
            expr: Arc::new(expr),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::wrap(n, Expr::Const(c))
    }

    /// Coordinate `x_i` (zero-based).
    pub fn x(n: usize, i: usize) -> Self {
        assert!(i < n, "coordinate index {i} out of range for n = {n}");
        Self::wrap(n, Expr::X(i))
    }

    pub fn t(n: usize) -> Self {
        Self::wrap(n, Expr::T)
    }

    /// `|x|²`, smooth everywhere.
    pub fn norm_sq(n: usize) -> Self {
        Self::wrap(n, Expr::NormSq)
    }

    /// `|x - c|²` as a polynomial.
    pub fn dist_sq_to(c: &[f64]) -> Self {
        let n = c.len();
        (0..n)
            .map(|i| {
                let d = Self::x(n, i) - c[i];
                d.clone() * d
            })
            .fold(Self::constant(n, 0.0), |acc, v| acc + v)
    }

    /// `|x|`; singular at `x = 0`.
    pub fn norm(n: usize) -> Self {
        Self::wrap(n, Expr::Norm)
    }

    pub fn exp(&self) -> Self {
        Self::wrap(self.n, Expr::Exp(self.expr.clone()))
    }

    /// Natural logarithm; singular for nonpositive arguments.
    pub fn ln(&self) -> Self {
        Self::wrap(self.n, Expr::Log(self.expr.clone()))
    }

    /// Scalar absolute value; singular where the argument vanishes.
    pub fn abs(&self) -> Self {
        Self::wrap(self.n, Expr::Abs(self.expr.clone()))
    }

    pub fn powf(&self, e: f64) -> Self {
        Self::wrap(self.n, Expr::Pow(self.expr.clone(), e))
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Pointwise minimum. Jets are taken from the smaller branch (the first on ties).
    pub fn min(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self::wrap(self.n, Expr::Min(self.expr.clone(), other.expr.clone()))
    }

    /// `|log|t||^e`; singular at `t = 0` and `|t| = 1`.
    pub fn abs_log_abs_t_pow(n: usize, e: f64) -> Self {
        Self::t(n).abs().ln().abs().powf(e)
    }

    /// Composition with the parabolic dilation: `v(x, t) = u(λx, λ²t)`.
    pub fn parabolic_rescale(&self, lambda: f64) -> Self {
        Self {
            n: self.n,
            expr: rescale(&self.expr, self.n, lambda),
        }
    }

    /// Value only.
    pub fn eval(&self, xi: &SpacetimePoint) -> Result<f64> {
        self.check_dim(xi)?;
        eval_value(&self.expr, xi)
    }

    /// Exact 2-jet.
    pub fn eval_jet(&self, xi: &SpacetimePoint) -> Result<Jet2> {
        self.check_dim(xi)?;
        if !xi.is_finite() {
            return Err(Error::SingularPoint(format!("non-finite point {xi}")));
        }
        let d = eval_dual(&self.expr, xi, self.n)?;
        let jet = Jet2 {
            value: d.v,
            dt: d.d[self.n],
            grad: d.d[..self.n].iter().copied().collect(),
            hess: SymMatrix {
                n: self.n,
                upper: d.h,
            },
        };
        if !jet.is_finite() {
            return Err(Error::SingularPoint(format!("non-finite jet at {xi}")));
        }
        Ok(jet)
    }

    fn check_dim(&self, xi: &SpacetimePoint) -> Result<()> {
        if xi.n() != self.n {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {}, field has {}",
                xi.n(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Named-jet evaluation entry point.
pub fn eval_jet(field: &ScalarField, xi: &SpacetimePoint) -> Result<Jet2> {
    field.eval_jet(xi)
}

fn rescale(e: &Arc<Expr>, n: usize, l: f64) -> Arc<Expr> {
    let r = |a: &Arc<Expr>| rescale(a, n, l);
    Arc::new(match &**e {
        Expr::Const(c) => Expr::Const(*c),
        Expr::X(i) => Expr::Mul(Arc::new(Expr::Const(l)), Arc::new(Expr::X(*i))),
        Expr::T => Expr::Mul(Arc::new(Expr::Const(l * l)), Arc::new(Expr::T)),
        Expr::NormSq => Expr::Mul(Arc::new(Expr::Const(l * l)), Arc::new(Expr::NormSq)),
        Expr::Norm => Expr::Mul(Arc::new(Expr::Const(l)), Arc::new(Expr::Norm)),
        Expr::Add(a, b) => Expr::Add(r(a), r(b)),
        Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
        Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
        Expr::Div(a, b) => Expr::Div(r(a), r(b)),
        Expr::Neg(a) => Expr::Neg(r(a)),
        Expr::Pow(a, p) => Expr::Pow(r(a), *p),
        Expr::Exp(a) => Expr::Exp(r(a)),
        Expr::Log(a) => Expr::Log(r(a)),
        Expr::Abs(a) => Expr::Abs(r(a)),
        Expr::Min(a, b) => Expr::Min(r(a), r(b)),
    })
}

fn singular(msg: &str, xi: &SpacetimePoint) -> Error {
    Error::SingularPoint(format!("{msg} at {xi}"))
}

fn pow_value(base: f64, e: f64, xi: &SpacetimePoint) -> Result<f64> {
    if e.fract() == 0.0 {
        if base == 0.0 && e < 0.0 {
            return Err(singular("negative power of zero", xi));
        }
        Ok(base.powi(e as i32))
    } else if base > 0.0 {
        Ok(base.powf(e))
    } else if base == 0.0 && e > 0.0 {
        Ok(0.0)
    } else {
        Err(singular("fractional power of a nonpositive base", xi))
    }
}

fn eval_value(e: &Expr, xi: &SpacetimePoint) -> Result<f64> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::X(i) => xi.x[*i],
        Expr::T => xi.t,
        Expr::NormSq => xi.x.iter().map(|v| v * v).sum(),
        Expr::Norm => xi.norm_x(),
        Expr::Add(a, b) => eval_value(a, xi)? + eval_value(b, xi)?,
        Expr::Sub(a, b) => eval_value(a, xi)? - eval_value(b, xi)?,
        Expr::Mul(a, b) => eval_value(a, xi)? * eval_value(b, xi)?,
        Expr::Div(a, b) => {
            let d = eval_value(b, xi)?;
            if d == 0.0 {
                return Err(singular("division by zero", xi));
            }
            eval_value(a, xi)? / d
        }
        Expr::Neg(a) => -eval_value(a, xi)?,
        Expr::Pow(a, p) => pow_value(eval_value(a, xi)?, *p, xi)?,
        Expr::Exp(a) => eval_value(a, xi)?.exp(),
        Expr::Log(a) => {
            let v = eval_value(a, xi)?;
            if v <= 0.0 {
                return Err(singular("logarithm of a nonpositive value", xi));
            }
            v.ln()
        }
        Expr::Abs(a) => eval_value(a, xi)?.abs(),
        Expr::Min(a, b) => eval_value(a, xi)?.min(eval_value(b, xi)?),
    })
}

/// Value, derivatives in `(x_1..x_n, t)`, spatial Hessian (upper triangle).
#[derive(Clone, Debug)]
struct Dual {
    v: f64,
    d: SmallVec<[f64; 3]>,
    h: SmallVec<[f64; 3]>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Self {
            v,
            d: smallvec![0.0; n + 1],
            h: smallvec![0.0; n * (n + 1) / 2],
        }
    }

    /// Chain rule for `g(self)` given `g`, `g'`, `g''` at `self.v`.
    fn compose(&self, n: usize, g: f64, g1: f64, g2: f64) -> Self {
        let mut h = SmallVec::with_capacity(self.h.len());
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                h.push(g1 * self.h[k] + g2 * self.d[i] * self.d[j]);
                k += 1;
            }
        }
        Self {
            v: g,
            d: self.d.iter().map(|x| g1 * x).collect(),
            h,
        }
    }

    fn add(&self, o: &Self, sign: f64) -> Self {
        Self {
            v: self.v + sign * o.v,
            d: self.d.iter().zip(&o.d).map(|(a, b)| a + sign * b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a + sign * b).collect(),
        }
    }

    fn mul(&self, o: &Self, n: usize) -> Self {
        let mut h = SmallVec::with_capacity(self.h.len());
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                h.push(
                    self.h[k] * o.v
                        + self.v * o.h[k]
                        + self.d[i] * o.d[j]
                        + self.d[j] * o.d[i],
                );
                k += 1;
            }
        }
        Self {
            v: self.v * o.v,
            d: self.d.iter().zip(&o.d).map(|(a, b)| a * o.v + self.v * b).collect(),
            h,
        }
    }
}

fn eval_dual(e: &Expr, xi: &SpacetimePoint, n: usize) -> Result<Dual> {
    Ok(match e {
        Expr::Const(c) => Dual::constant(*c, n),
        Expr::X(i) => {
            let mut d = Dual::constant(xi.x[*i], n);
            d.d[*i] = 1.0;
            d
        }
        Expr::T => {
            let mut d = Dual::constant(xi.t, n);
            d.d[n] = 1.0;
            d
        }
        Expr::NormSq => {
            let mut d = Dual::constant(xi.x.iter().map(|v| v * v).sum(), n);
            let mut k = 0;
            for i in 0..n {
                d.d[i] = 2.0 * xi.x[i];
                for j in i..n {
                    d.h[k] = if i == j { 2.0 } else { 0.0 };
                    k += 1;
                }
            }
            d
        }
        Expr::Norm => {
            let r = xi.norm_x();
            if r == 0.0 {
                return Err(singular("|x| at x = 0", xi));
            }
            let mut d = Dual::constant(r, n);
            let mut k = 0;
            for i in 0..n {
                d.d[i] = xi.x[i] / r;
                for j in i..n {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    d.h[k] = (delta - xi.x[i] * xi.x[j] / (r * r)) / r;
                    k += 1;
                }
            }
            d
        }
        Expr::Add(a, b) => eval_dual(a, xi, n)?.add(&eval_dual(b, xi, n)?, 1.0),
        Expr::Sub(a, b) => eval_dual(a, xi, n)?.add(&eval_dual(b, xi, n)?, -1.0),
        Expr::Mul(a, b) => eval_dual(a, xi, n)?.mul(&eval_dual(b, xi, n)?, n),
        Expr::Div(a, b) => {
            let den = eval_dual(b, xi, n)?;
            if den.v == 0.0 {
                return Err(singular("division by zero", xi));
            }
            let u = den.v;
            let inv = den.compose(n, 1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u));
            eval_dual(a, xi, n)?.mul(&inv, n)
        }
        Expr::Neg(a) => {
            let a = eval_dual(a, xi, n)?;
            a.compose(n, -a.v, -1.0, 0.0)
        }
        Expr::Pow(a, p) => {
            let a = eval_dual(a, xi, n)?;
            let u = a.v;
            let p = *p;
            let g = pow_value(u, p, xi)?;
            let (g1, g2) = if p == 0.0 {
                (0.0, 0.0)
            } else if p == 1.0 {
                (1.0, 0.0)
            } else if p == 2.0 {
                (2.0 * u, 2.0)
            } else {
                if u == 0.0 && p < 2.0 {
                    return Err(singular("power with unbounded derivatives at zero", xi));
                }
                (p * pow_value(u, p - 1.0, xi)?, p * (p - 1.0) * pow_value(u, p - 2.0, xi)?)
            };
            a.compose(n, g, g1, g2)
        }
        Expr::Exp(a) => {
            let a = eval_dual(a, xi, n)?;
            let g = a.v.exp();
            a.compose(n, g, g, g)
        }
        Expr::Log(a) => {
            let a = eval_dual(a, xi, n)?;
            if a.v <= 0.0 {
                return Err(singular("logarithm of a nonpositive value", xi));
            }
            let u = a.v;
            a.compose(n, u.ln(), 1.0 / u, -1.0 / (u * u))
        }
        Expr::Abs(a) => {
            let a = eval_dual(a, xi, n)?;
            if a.v == 0.0 {
                return Err(singular("|·| at zero", xi));
            }
            let s = a.v.signum();
            a.compose(n, a.v.abs(), s, 0.0)
        }
        Expr::Min(a, b) => {
            let a = eval_dual(a, xi, n)?;
            let b = eval_dual(b, xi, n)?;
            if a.v <= b.v {
                a
            } else {
                b
            }
        }
    })
}

macro_rules! binop {
    ($tr:ident, $m:ident, $var:ident) => {
        impl $tr<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                assert_eq!(self.n, rhs.n, "field dimensions differ");
                ScalarField::wrap(self.n, Expr::$var(self.expr, rhs.expr))
            }
        }
        impl $tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                self.clone().$m(rhs.clone())
            }
        }
        impl $tr<f64> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: f64) -> ScalarField {
                let n = self.n;
                self.$m(ScalarField::constant(n, rhs))
            }
        }
        impl $tr<ScalarField> for f64 {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                ScalarField::constant(rhs.n, self).$m(rhs)
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::wrap(self.n, Expr::Neg(self.expr))
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpacetimePoint {
        SpacetimePoint::new(x, t)
    }

    #[test]
    fn norm_sq_jet() {
        let u = ScalarField::norm_sq(2);
        let j = u.eval_jet(&pt(&[1.0, 1.0], -1.0)).unwrap();
        assert_eq!(j.value, 2.0);
        assert_eq!(j.dt, 0.0);
        assert_eq!(j.grad.as_slice(), &[2.0, 2.0]);
        assert_eq!(j.hess, SymMatrix::identity(2, 2.0));
    }

    #[test]
    fn manufactured_solution_jet() {
        let (n, p) = (1usize, 3.0);
        let u = ScalarField::norm_sq(n) + 2.0 * (n as f64 + p - 2.0) * ScalarField::t(n);
        let j = u.eval_jet(&pt(&[0.3], -0.2)).unwrap();
        assert_eq!(j.dt, 4.0);
        assert_eq!(j.grad[0], 0.6);
        assert_eq!(j.hess.get(0, 0), 2.0);
    }

    #[test]
    fn petrovskii_f_at_minus_exp_e() {
        let a = 0.25;
        let f = ScalarField::abs_log_abs_t_pow(1, -a - 1.0);
        let t = -(-std::f64::consts::E).exp();
        let j = f.eval_jet(&pt(&[0.0], t)).unwrap();
        assert!((j.value - (-1.25f64).exp()).abs() < 1e-14);
        assert!((j.value - 0.2865047968601901).abs() < 1e-12);
        let l = t.abs().ln().abs();
        let expect = -(a + 1.0) / (t.abs() * l.powf(a + 2.0));
        assert!((j.dt - expect).abs() < 1e-10 * expect.abs());
    }

    #[test]
    fn singular_points_are_reported() {
        let n = 1;
        assert!(matches!(
            ScalarField::t(n).ln().eval_jet(&pt(&[0.0], -1.0)),
            Err(Error::SingularPoint(_))
        ));
        assert!(matches!(
            (ScalarField::constant(n, 1.0) / ScalarField::x(n, 0)).eval_jet(&pt(&[0.0], 0.0)),
            Err(Error::SingularPoint(_))
        ));
        assert!(ScalarField::norm(2).eval_jet(&pt(&[0.0, 0.0], 0.0)).is_err());
        // |x|² is a polynomial primitive and is fine at the origin
        assert!(ScalarField::norm_sq(2).eval_jet(&pt(&[0.0, 0.0], 0.0)).is_ok());
    }

    #[test]
    fn min_takes_smaller_branch() {
        let u = ScalarField::norm_sq(1).min(&ScalarField::constant(1, 1.0));
        let j = u.eval_jet(&pt(&[0.5], 0.0)).unwrap();
        assert_eq!(j.grad[0], 1.0);
        let j = u.eval_jet(&pt(&[2.0], 0.0)).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.grad[0], 0.0);
    }
}
