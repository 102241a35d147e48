//! Bounded space-time domains described by membership predicates.
//!
//! A [`Domain`] is an open, bounded subset of `R^{n+1}` given by one of the
//! catalogued constructors (cylinders, tusk houses, Petrovskiĭ regions, ...)
//! or by a user predicate. Boundaries are never meshed: solvers find them by
//! bisection along segments that join an inside point to an outside point.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Spatial coordinates. Inline storage for the `n <= 2` case.
pub type Coords = SmallVec<[f64; 2]>;

/// Relative bisection tolerance used by [`project_to_boundary`].
pub const BISECTION_TOL: f64 = 1e-12;

/// A point `(x, t)` of space-time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub x: Coords,
    pub t: f64,
}

impl SpacetimePoint {
    pub fn new(x: &[f64], t: f64) -> Self {
        Self {
            x: Coords::from_slice(x),
            t,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }

    pub fn norm_x(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean distance in `R^{n+1}`.
    pub fn dist(&self, other: &Self) -> f64 {
        let dx: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (dx + (self.t - other.t).powi(2)).sqrt()
    }

    /// Parabolic distance `|x - y| + |t - s|^{1/2}`.
    pub fn parabolic_dist(&self, other: &Self) -> f64 {
        let dx: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        dx + (self.t - other.t).abs().sqrt()
    }

    /// `a + s (b - a)`.
    pub fn lerp(a: &Self, b: &Self, s: f64) -> Self {
        Self {
            x: a.x.iter().zip(&b.x).map(|(p, q)| p + s * (q - p)).collect(),
            t: a.t + s * (b.t - a.t),
        }
    }

    fn midpoint(a: &Self, b: &Self) -> Self {
        Self {
            x: a.x.iter().zip(&b.x).map(|(p, q)| 0.5 * (p + q)).collect(),
            t: 0.5 * (a.t + b.t),
        }
    }
}

impl fmt::Display for SpacetimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for v in &self.x {
            write!(f, "{v}, ")?;
        }
        write!(f, "t={})", self.t)
    }
}

/// Parabolic dilation `(x, t) -> (λx, λ²t)`.
pub fn parabolic_scale(xi: &SpacetimePoint, lambda: f64) -> SpacetimePoint {
    SpacetimePoint {
        x: xi.x.iter().map(|v| lambda * v).collect(),
        t: lambda * lambda * xi.t,
    }
}

/// Closed axis-aligned box in `R^{n+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lo: Coords,
    pub hi: Coords,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl BBox {
    pub fn new(lo: &[f64], hi: &[f64], t_lo: f64, t_hi: f64) -> Self {
        Self {
            lo: Coords::from_slice(lo),
            hi: Coords::from_slice(hi),
            t_lo,
            t_hi,
        }
    }

    /// Box `[-r, r]^n x [t_lo, t_hi]`.
    pub fn centered(n: usize, r: f64, t_lo: f64, t_hi: f64) -> Self {
        Self {
            lo: smallvec::smallvec![-r; n],
            hi: smallvec::smallvec![r; n],
            t_lo,
            t_hi,
        }
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    /// Strict interior test; faces are excluded.
    pub fn contains_open(&self, xi: &SpacetimePoint) -> bool {
        xi.t > self.t_lo
            && xi.t < self.t_hi
            && xi
                .x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| v > l && v < h)
    }

    pub fn contains_closed(&self, xi: &SpacetimePoint) -> bool {
        xi.t >= self.t_lo
            && xi.t <= self.t_hi
            && xi
                .x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| v >= l && v <= h)
    }

    /// Largest spatial side length.
    pub fn spatial_extent(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    pub fn duration(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    /// Parabolic diameter: spatial diagonal plus square root of the duration.
    pub fn parabolic_diameter(&self) -> f64 {
        let diag: f64 = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt();
        diag + self.duration().sqrt()
    }

    pub fn intersect(&self, other: &BBox) -> BBox {
        BBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
            t_lo: self.t_lo.max(other.t_lo),
            t_hi: self.t_hi.min(other.t_hi),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> SpacetimePoint {
        SpacetimePoint {
            x: self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| l + (h - l) * rng.gen::<f64>())
                .collect(),
            t: self.t_lo + self.duration() * rng.gen::<f64>(),
        }
    }
}

/// The tusk `{-T < t < 0, |x - (-t)^{1/2} x̂|² < R²(-t)}` at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tusk {
    pub xhat: Coords,
    pub radius: f64,
    pub depth: f64,
}

impl Tusk {
    fn offset_sq(&self, xi: &SpacetimePoint) -> f64 {
        let s = (-xi.t).max(0.0).sqrt();
        xi.x.iter()
            .zip(&self.xhat)
            .map(|(x, c)| (x - s * c) * (x - s * c))
            .sum()
    }

    pub fn contains(&self, xi: &SpacetimePoint) -> bool {
        xi.t > -self.depth
            && xi.t < 0.0
            && self.offset_sq(xi) < self.radius * self.radius * (-xi.t)
    }

    pub fn contains_closed(&self, xi: &SpacetimePoint) -> bool {
        xi.t >= -self.depth
            && xi.t <= 0.0
            && self.offset_sq(xi) <= self.radius * self.radius * (-xi.t)
    }
}

/// Spatial cross-section of a cylinder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Base {
    Ball { center: Coords, radius: f64 },
    Box { lo: Coords, hi: Coords },
}

impl Base {
    fn n(&self) -> usize {
        match self {
            Base::Ball { center, .. } => center.len(),
            Base::Box { lo, .. } => lo.len(),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Base::Ball { center, radius } => {
                dist_sq(x, center) < radius * radius
            }
            Base::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| v > l && v < h),
        }
    }

    fn bounds(&self) -> (Coords, Coords) {
        match self {
            Base::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Base::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Shared membership predicate for user-defined domains.
#[derive(Clone)]
pub struct Predicate {
    f: Arc<dyn Fn(&SpacetimePoint) -> bool + Send + Sync>,
    source: Option<String>,
}

impl Predicate {
    pub fn new(f: impl Fn(&SpacetimePoint) -> bool + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            source: None,
        }
    }

    /// Region `{expr < 0}` of a closed-form expression in `x0, x1, ..., t`
    /// (`x` is an alias for `x0`).
    pub fn from_expression(expr: &str, n: usize) -> Result<Self> {
        let tree = evalexpr::build_operator_tree(expr)
            .map_err(|e| Error::InvalidParameter(format!("expression `{expr}`: {e}")))?;
        let probe = SpacetimePoint::new(&vec![0.0; n], -0.5);
        eval_expression(&tree, &probe)
            .map_err(|e| Error::InvalidParameter(format!("expression `{expr}`: {e}")))?;
        let source = expr.to_string();
        Ok(Self {
            f: Arc::new(move |xi| matches!(eval_expression(&tree, xi), Ok(v) if v < 0.0)),
            source: Some(source),
        })
    }
}

fn eval_expression(tree: &evalexpr::Node, xi: &SpacetimePoint) -> std::result::Result<f64, String> {
    use evalexpr::{ContextWithMutableVariables, HashMapContext, Value};
    let mut ctx = HashMapContext::new();
    let set = |ctx: &mut HashMapContext, k: &str, v: f64| {
        ctx.set_value(k.into(), Value::Float(v)).map_err(|e| e.to_string())
    };
    for (i, v) in xi.x.iter().enumerate() {
        set(&mut ctx, &format!("x{i}"), *v)?;
    }
    if let Some(v) = xi.x.first() {
        set(&mut ctx, "x", *v)?;
    }
    set(&mut ctx, "t", xi.t)?;
    tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "Predicate({s:?})"),
            None => write!(f, "Predicate(<closure>)"),
        }
    }
}

/// Constructor catalogue.
#[derive(Clone, Debug)]
pub enum Shape {
    /// `G x (t1, t2)`.
    Cylinder { base: Base, t1: f64, t2: f64 },
    /// `Θ̂ \ V̄` with `Θ̂ = (B_{R0} x (-1, 0]) ∪ {|x| < R0(1 - t), 0 <= t < 1}`.
    TuskHouse { tusk: Tusk, r0: f64 },
    /// `(B_{R0} x (-T, 0)) \ V̄`.
    TuskComplement { tusk: Tusk, r0: f64 },
    /// `{|x|² < A|t| log|log|t||, -1/3 < t < 0}`.
    Petrovskii { a: f64 },
    /// Open box of half-width `delta` around `xi0`, minus the closed ball `B̄(xi1, r1)`.
    BallComplement {
        xi1: SpacetimePoint,
        r1: f64,
        xi0: SpacetimePoint,
        delta: f64,
    },
    /// `(B_{R0} x (-1, 0))` minus the closures of the ellipses `E_k`, `k >= 1`.
    EllipseChain {
        xhat: Coords,
        a: f64,
        b: f64,
        c: f64,
        q: f64,
        r0: f64,
    },
    /// `(B(center, radius) \ cone) x (t1, t2)` with the closed cone
    /// `{(x - x0)·y >= a|x - x0|}` removed.
    WedgeCylinder {
        center: Coords,
        radius: f64,
        x0: Coords,
        y: Coords,
        a: f64,
        t1: f64,
        t2: f64,
    },
    /// Preimage `{(x, t): (b^k x, b^{2k} t) ∈ inner}`.
    Scaled { inner: Box<Domain>, b: f64, k: i32 },
    /// Intersection with the open box `window`.
    Restricted { inner: Box<Domain>, window: BBox },
    /// User predicate.
    Generic { predicate: Predicate },
}

/// A bounded open space-time set.
#[derive(Clone, Debug)]
pub struct Domain {
    shape: Shape,
    bbox: BBox,
}

impl Domain {
    pub fn cylinder(base: Base, t1: f64, t2: f64) -> Result<Self> {
        if !(t1 < t2) {
            return Err(Error::InvalidParameter(format!("cylinder needs t1 < t2, got {t1}, {t2}")));
        }
        if let Base::Ball { radius, .. } = &base {
            positive("radius", *radius)?;
        }
        let (lo, hi) = base.bounds();
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidParameter("cylinder base is empty".into()));
        }
        check_dim(lo.len())?;
        let bbox = BBox { lo, hi, t_lo: t1, t_hi: t2 };
        Ok(Self {
            shape: Shape::Cylinder { base, t1, t2 },
            bbox,
        })
    }

    /// `(lo, hi) x (t1, t2)`.
    pub fn box_cylinder(lo: &[f64], hi: &[f64], t1: f64, t2: f64) -> Result<Self> {
        Self::cylinder(
            Base::Box {
                lo: Coords::from_slice(lo),
                hi: Coords::from_slice(hi),
            },
            t1,
            t2,
        )
    }

    /// `B(center, radius) x (t1, t2)`.
    pub fn ball_cylinder(center: &[f64], radius: f64, t1: f64, t2: f64) -> Result<Self> {
        Self::cylinder(
            Base::Ball {
                center: Coords::from_slice(center),
                radius,
            },
            t1,
            t2,
        )
    }

    pub fn tusk_house(xhat: &[f64], radius: f64, r0: f64) -> Result<Self> {
        check_dim(xhat.len())?;
        positive("R", radius)?;
        if !(r0 > norm_sq(xhat).sqrt() + radius) {
            return Err(Error::InvalidParameter(format!(
                "tusk house needs R0 > |x̂| + R, got R0 = {r0}"
            )));
        }
        let n = xhat.len();
        Ok(Self {
            shape: Shape::TuskHouse {
                tusk: Tusk {
                    xhat: Coords::from_slice(xhat),
                    radius,
                    depth: 1.0,
                },
                r0,
            },
            bbox: BBox::centered(n, r0, -1.0, 1.0),
        })
    }

    pub fn tusk_complement(xhat: &[f64], radius: f64, depth: f64, r0: f64) -> Result<Self> {
        check_dim(xhat.len())?;
        positive("R", radius)?;
        positive("T", depth)?;
        positive("R0", r0)?;
        let n = xhat.len();
        Ok(Self {
            shape: Shape::TuskComplement {
                tusk: Tusk {
                    xhat: Coords::from_slice(xhat),
                    radius,
                    depth,
                },
                r0,
            },
            bbox: BBox::centered(n, r0, -depth, 0.0),
        })
    }

    pub fn petrovskii(a: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        positive("A", a)?;
        let half = (a * petrovskii_width_max()).sqrt() * (1.0 + 1e-3);
        Ok(Self {
            shape: Shape::Petrovskii { a },
            bbox: BBox::centered(n, half, -1.0 / 3.0, 0.0),
        })
    }

    pub fn ball_complement(
        xi1: SpacetimePoint,
        r1: f64,
        xi0: SpacetimePoint,
        delta: f64,
    ) -> Result<Self> {
        check_dim(xi1.n())?;
        if xi0.n() != xi1.n() {
            return Err(Error::InvalidParameter("xi0 and xi1 dimensions differ".into()));
        }
        positive("R1", r1)?;
        positive("delta", delta)?;
        let bbox = BBox {
            lo: xi0.x.iter().map(|v| v - delta).collect(),
            hi: xi0.x.iter().map(|v| v + delta).collect(),
            t_lo: xi0.t - delta,
            t_hi: xi0.t + delta,
        };
        Ok(Self {
            shape: Shape::BallComplement { xi1, r1, xi0, delta },
            bbox,
        })
    }

    pub fn ellipse_chain(xhat: &[f64], a: f64, b: f64, c: f64, q: f64, r0: f64) -> Result<Self> {
        check_dim(xhat.len())?;
        positive("a", a)?;
        positive("b", b)?;
        positive("c", c)?;
        positive("R0", r0)?;
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("ellipse chain needs 0 < q < 1, got {q}")));
        }
        let n = xhat.len();
        Ok(Self {
            shape: Shape::EllipseChain {
                xhat: Coords::from_slice(xhat),
                a,
                b,
                c,
                q,
                r0,
            },
            bbox: BBox::centered(n, r0, -1.0, 0.0),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn wedge_cylinder(
        center: &[f64],
        radius: f64,
        x0: &[f64],
        y: &[f64],
        a: f64,
        t1: f64,
        t2: f64,
    ) -> Result<Self> {
        check_dim(center.len())?;
        positive("radius", radius)?;
        positive("a", a)?;
        if x0.len() != center.len() || y.len() != center.len() {
            return Err(Error::InvalidParameter("wedge vectors have mismatched dimensions".into()));
        }
        if !(t1 < t2) {
            return Err(Error::InvalidParameter("wedge cylinder needs t1 < t2".into()));
        }
        let bbox = BBox {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
            t_lo: t1,
            t_hi: t2,
        };
        Ok(Self {
            shape: Shape::WedgeCylinder {
                center: Coords::from_slice(center),
                radius,
                x0: Coords::from_slice(x0),
                y: Coords::from_slice(y),
                a,
                t1,
                t2,
            },
            bbox,
        })
    }

    pub fn restricted(inner: Domain, window: BBox) -> Result<Self> {
        if window.n() != inner.n() {
            return Err(Error::InvalidParameter("window dimension mismatch".into()));
        }
        let bbox = inner.bbox.intersect(&window);
        Ok(Self {
            shape: Shape::Restricted {
                inner: Box::new(inner),
                window,
            },
            bbox,
        })
    }

    pub fn generic(bbox: BBox, predicate: Predicate) -> Result<Self> {
        check_dim(bbox.n())?;
        Ok(Self {
            shape: Shape::Generic { predicate },
            bbox,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn n(&self) -> usize {
        self.bbox.n()
    }

    /// True iff `xi` lies in the open set. Points where a defining
    /// inequality is tight are outside.
    pub fn membership(&self, xi: &SpacetimePoint) -> bool {
        if !self.bbox.contains_open(xi) {
            return false;
        }
        match &self.shape {
            Shape::Cylinder { base, t1, t2 } => xi.t > *t1 && xi.t < *t2 && base.contains(&xi.x),
            Shape::TuskHouse { tusk, r0 } => {
                let r2 = norm_sq(&xi.x);
                let in_hat = if xi.t <= 0.0 {
                    xi.t > -1.0 && r2 < r0 * r0
                } else {
                    xi.t < 1.0 && r2 < (r0 * (1.0 - xi.t)).powi(2)
                };
                in_hat && !tusk.contains_closed(xi)
            }
            Shape::TuskComplement { tusk, r0 } => {
                xi.t > -tusk.depth
                    && xi.t < 0.0
                    && norm_sq(&xi.x) < r0 * r0
                    && !tusk.contains_closed(xi)
            }
            Shape::Petrovskii { a } => petrovskii_inside(*a, xi),
            Shape::BallComplement { xi1, r1, .. } => xi.dist(xi1) > *r1,
            Shape::EllipseChain {
                xhat,
                a,
                b,
                c,
                q,
                r0,
            } => {
                xi.t > -1.0
                    && xi.t < 0.0
                    && norm_sq(&xi.x) < r0 * r0
                    && !ellipse_chain_hits(xhat, *a, *b, *c, *q, xi)
            }
            Shape::WedgeCylinder {
                center,
                radius,
                x0,
                y,
                a,
                t1,
                t2,
            } => {
                if !(xi.t > *t1 && xi.t < *t2) || dist_sq(&xi.x, center) >= radius * radius {
                    return false;
                }
                let d: Coords = xi.x.iter().zip(x0).map(|(p, q)| p - q).collect();
                let dot: f64 = d.iter().zip(y).map(|(p, q)| p * q).sum();
                dot < a * norm_sq(&d).sqrt()
            }
            Shape::Scaled { inner, b, k } => {
                let s = b.powi(*k);
                inner.membership(&SpacetimePoint {
                    x: xi.x.iter().map(|v| s * v).collect(),
                    t: s * s * xi.t,
                })
            }
            Shape::Restricted { inner, window } => {
                window.contains_open(xi) && inner.membership(xi)
            }
            Shape::Generic { predicate } => (predicate.f)(xi),
        }
    }

    /// JSON-serializable descriptor, when the domain was not built from a closure.
    pub fn to_spec(&self) -> Option<DomainSpec> {
        DomainSpec::from_domain(self)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("spatial dimension must be 1 or 2, got {n}")))
    }
}

/// `|t| log|log|t||`, the Petrovskiĭ width profile (times `A`).
pub fn petrovskii_width(t: f64) -> f64 {
    let s = t.abs();
    s * (s.ln().abs()).ln()
}

fn petrovskii_inside(a: f64, xi: &SpacetimePoint) -> bool {
    xi.t > -1.0 / 3.0 && xi.t < 0.0 && norm_sq(&xi.x) < a * petrovskii_width(xi.t)
}

/// `sup_{-1/3 < t < 0} |t| log|log|t||`, found by a coarse scan and golden-section refinement.
pub fn petrovskii_width_max() -> f64 {
    let m = 2000;
    let (mut best_t, mut best) = (-1.0 / 3.0, f64::MIN);
    for i in 1..m {
        let t = -(i as f64) / (3.0 * m as f64);
        let g = petrovskii_width(t);
        if g > best {
            best = g;
            best_t = t;
        }
    }
    let step = 1.0 / (3.0 * m as f64);
    let (mut lo, mut hi) = ((best_t - step).max(-1.0 / 3.0), (best_t + step).min(-1e-12));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if petrovskii_width(c) > petrovskii_width(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    petrovskii_width(0.5 * (lo + hi)).max(best)
}

fn ellipse_chain_hits(xhat: &[f64], a: f64, b: f64, c: f64, q: f64, xi: &SpacetimePoint) -> bool {
    let mut qk = q;
    while qk > 1e-12 {
        let q2 = qk * qk;
        let (ak, bk, tk) = (a * qk, b * q2, -c * q2);
        let dt = (xi.t - tk) / bk;
        if dt.abs() <= 1.0 {
            let dx: f64 = xi
                .x
                .iter()
                .zip(xhat)
                .map(|(x, h)| (x - qk * h) * (x - qk * h))
                .sum::<f64>()
                / (ak * ak);
            if dx + dt * dt <= 1.0 {
                return true;
            }
        }
        qk *= q;
    }
    false
}

/// Domain `{(x, t): (b^k x, b^{2k} t) ∈ dom}`.
pub fn scale_domain(dom: &Domain, b: f64, k: i32) -> Result<Domain> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale factor must exceed 1, got {b}")));
    }
    let s = b.powi(k);
    let bb = dom.bbox();
    let bbox = BBox {
        lo: bb.lo.iter().map(|v| v / s).collect(),
        hi: bb.hi.iter().map(|v| v / s).collect(),
        t_lo: bb.t_lo / (s * s),
        t_hi: bb.t_hi / (s * s),
    };
    Ok(Domain {
        shape: Shape::Scaled {
            inner: Box::new(dom.clone()),
            b,
            k,
        },
        bbox,
    })
}

/// Bisection on the segment from an inside point to an outside point.
///
/// Returns the outside end of the final bracket, so the result has
/// `membership == false` and an inside point within `BISECTION_TOL` times
/// the segment length.
pub fn project_to_boundary(
    dom: &Domain,
    inside: &SpacetimePoint,
    outside: &SpacetimePoint,
) -> SpacetimePoint {
    project_with_tol(dom, inside, outside, BISECTION_TOL)
}

pub fn project_with_tol(
    dom: &Domain,
    inside: &SpacetimePoint,
    outside: &SpacetimePoint,
    rel_tol: f64,
) -> SpacetimePoint {
    let len = inside.dist(outside);
    let stop = rel_tol * len;
    let mut a = inside.clone();
    let mut b = outside.clone();
    for _ in 0..200 {
        if a.dist(&b) <= stop {
            break;
        }
        let m = SpacetimePoint::midpoint(&a, &b);
        if dom.membership(&m) {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Finds an interior point by uniform sampling of the bounding box.
pub fn find_interior_point<R: Rng>(dom: &Domain, rng: &mut R) -> Result<SpacetimePoint> {
    for _ in 0..1_000_000 {
        let p = dom.bbox.sample(rng);
        if dom.membership(&p) {
            return Ok(p);
        }
    }
    Err(Error::EmptyDomain)
}

/// Deterministic boundary samples.
///
/// Cylinders return points of the classical parabolic boundary (bottom and
/// lateral faces). Other domains return points of the topological boundary
/// found by bisection along random rays from interior points, discarding the
/// top face of the bounding box.
pub fn parabolic_boundary_sample(
    dom: &Domain,
    count: usize,
    seed: u64,
) -> Result<Vec<SpacetimePoint>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Shape::Cylinder { base, t1, t2 } = &dom.shape {
        return Ok(cylinder_boundary_sample(base, *t1, *t2, count, &mut rng));
    }
    let bb = dom.bbox().clone();
    let first = find_interior_point(dom, &mut rng)?;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count + 10_000 {
            break;
        }
        let start = if out.is_empty() {
            first.clone()
        } else {
            match (0..1000).map(|_| bb.sample(&mut rng)).find(|p| dom.membership(p)) {
                Some(p) => p,
                None => first.clone(),
            }
        };
        let end = ray_exit(&bb, &start, &mut rng);
        let z = project_to_boundary(dom, &start, &end);
        if z.t >= bb.t_hi - 1e-9 * bb.duration() {
            continue;
        }
        out.push(z);
    }
    Ok(out)
}

fn ray_exit<R: Rng>(bb: &BBox, start: &SpacetimePoint, rng: &mut R) -> SpacetimePoint {
    let n = bb.n();
    let mut dir: Vec<f64> = (0..=n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    dir.iter_mut().for_each(|v| *v /= norm);
    for i in 0..n {
        dir[i] *= bb.hi[i] - bb.lo[i];
    }
    dir[n] *= bb.duration();
    let mut s_max = f64::INFINITY;
    for i in 0..=n {
        let (p, lo, hi) = if i < n {
            (start.x[i], bb.lo[i], bb.hi[i])
        } else {
            (start.t, bb.t_lo, bb.t_hi)
        };
        if dir[i] > 0.0 {
            s_max = s_max.min((hi - p) / dir[i]);
        } else if dir[i] < 0.0 {
            s_max = s_max.min((lo - p) / dir[i]);
        }
    }
    SpacetimePoint {
        x: (0..n).map(|i| (start.x[i] + s_max * dir[i]).clamp(bb.lo[i], bb.hi[i])).collect(),
        t: (start.t + s_max * dir[n]).clamp(bb.t_lo, bb.t_hi),
    }
}

fn cylinder_boundary_sample<R: Rng>(
    base: &Base,
    t1: f64,
    t2: f64,
    count: usize,
    rng: &mut R,
) -> Vec<SpacetimePoint> {
    let n = base.n();
    let (lo, hi) = base.bounds();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let bottom = rng.gen::<f64>() < 0.5;
        let x: Coords = if bottom {
            loop {
                let x: Coords = (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>()).collect();
                if base.contains(&x) {
                    break x;
                }
            }
        } else {
            match base {
                Base::Ball { center, radius } => {
                    if n == 1 {
                        let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        smallvec::smallvec![center[0] + s * radius]
                    } else {
                        let th = rng.gen::<f64>() * std::f64::consts::TAU;
                        smallvec::smallvec![center[0] + radius * th.cos(), center[1] + radius * th.sin()]
                    }
                }
                Base::Box { lo, hi } => {
                    let axis = rng.gen_range(0..n);
                    let mut x: Coords =
                        (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>()).collect();
                    x[axis] = if rng.gen::<bool>() { lo[axis] } else { hi[axis] };
                    x
                }
            }
        };
        let t = if bottom { t1 } else { t1 + (t2 - t1) * rng.gen::<f64>() };
        out.push(SpacetimePoint { x, t });
    }
    out
}

/// JSON descriptor of a domain. Field names follow the constructor parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Cylinder {
        #[serde(flatten)]
        base: Base,
        t1: f64,
        t2: f64,
    },
    TuskHouse {
        xhat: Vec<f64>,
        #[serde(rename = "R")]
        r: f64,
        #[serde(rename = "R0")]
        r0: f64,
    },
    TuskComplement {
        xhat: Vec<f64>,
        #[serde(rename = "R")]
        r: f64,
        #[serde(rename = "T")]
        t: f64,
        #[serde(rename = "R0")]
        r0: f64,
    },
    Petrovskii {
        #[serde(rename = "A")]
        a: f64,
        n: usize,
    },
    BallComplement {
        xi1: SpacetimePoint,
        #[serde(rename = "R1")]
        r1: f64,
        xi0: SpacetimePoint,
        delta: f64,
    },
    EllipseChain {
        xhat: Vec<f64>,
        a: f64,
        b: f64,
        c: f64,
        q: f64,
        #[serde(rename = "R0")]
        r0: f64,
    },
    WedgeCylinder {
        center: Vec<f64>,
        radius: f64,
        x0: Vec<f64>,
        y: Vec<f64>,
        a: f64,
        t1: f64,
        t2: f64,
    },
    Scaled {
        inner: Box<DomainSpec>,
        b: f64,
        k: i32,
    },
    Restricted {
        inner: Box<DomainSpec>,
        window: BBox,
    },
    Generic {
        expr: String,
        bbox: BBox,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Cylinder { base, t1, t2 } => Domain::cylinder(base.clone(), *t1, *t2),
            DomainSpec::TuskHouse { xhat, r, r0 } => Domain::tusk_house(xhat, *r, *r0),
            DomainSpec::TuskComplement { xhat, r, t, r0 } => {
                Domain::tusk_complement(xhat, *r, *t, *r0)
            }
            DomainSpec::Petrovskii { a, n } => Domain::petrovskii(*a, *n),
            DomainSpec::BallComplement { xi1, r1, xi0, delta } => {
                Domain::ball_complement(xi1.clone(), *r1, xi0.clone(), *delta)
            }
            DomainSpec::EllipseChain { xhat, a, b, c, q, r0 } => {
                Domain::ellipse_chain(xhat, *a, *b, *c, *q, *r0)
            }
            DomainSpec::WedgeCylinder {
                center,
                radius,
                x0,
                y,
                a,
                t1,
                t2,
            } => Domain::wedge_cylinder(center, *radius, x0, y, *a, *t1, *t2),
            DomainSpec::Scaled { inner, b, k } => scale_domain(&inner.build()?, *b, *k),
            DomainSpec::Restricted { inner, window } => {
                Domain::restricted(inner.build()?, window.clone())
            }
            DomainSpec::Generic { expr, bbox } => {
                Domain::generic(bbox.clone(), Predicate::from_expression(expr, bbox.n())?)
            }
        }
    }

    fn from_domain(dom: &Domain) -> Option<Self> {
        Some(match &dom.shape {
            Shape::Cylinder { base, t1, t2 } => DomainSpec::Cylinder {
                base: base.clone(),
                t1: *t1,
                t2: *t2,
            },
            Shape::TuskHouse { tusk, r0 } => DomainSpec::TuskHouse {
                xhat: tusk.xhat.to_vec(),
                r: tusk.radius,
                r0: *r0,
            },
            Shape::TuskComplement { tusk, r0 } => DomainSpec::TuskComplement {
                xhat: tusk.xhat.to_vec(),
                r: tusk.radius,
                t: tusk.depth,
                r0: *r0,
            },
            Shape::Petrovskii { a } => DomainSpec::Petrovskii { a: *a, n: dom.n() },
            Shape::BallComplement { xi1, r1, xi0, delta } => DomainSpec::BallComplement {
                xi1: xi1.clone(),
                r1: *r1,
                xi0: xi0.clone(),
                delta: *delta,
            },
            Shape::EllipseChain { xhat, a, b, c, q, r0 } => DomainSpec::EllipseChain {
                xhat: xhat.to_vec(),
                a: *a,
                b: *b,
                c: *c,
                q: *q,
                r0: *r0,
            },
            Shape::WedgeCylinder {
                center,
                radius,
                x0,
                y,
                a,
                t1,
                t2,
            } => DomainSpec::WedgeCylinder {
                center: center.to_vec(),
                radius: *radius,
                x0: x0.to_vec(),
                y: y.to_vec(),
                a: *a,
                t1: *t1,
                t2: *t2,
            },
            Shape::Scaled { inner, b, k } => DomainSpec::Scaled {
                inner: Box::new(inner.to_spec()?),
                b: *b,
                k: *k,
            },
            Shape::Restricted { inner, window } => DomainSpec::Restricted {
                inner: Box::new(inner.to_spec()?),
                window: window.clone(),
            },
            Shape::Generic { predicate } => DomainSpec::Generic {
                expr: predicate.source.clone()?,
                bbox: dom.bbox.clone(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1(x: f64, t: f64) -> SpacetimePoint {
        SpacetimePoint::new(&[x], t)
    }

    #[test]
    fn petrovskii_membership_example() {
        let d = Domain::petrovskii(4.0, 1).unwrap();
        // 4 * 0.1 * log(log 10) ≈ 0.3336 > 0.01
        assert!(d.membership(&p1(0.1, -0.1)));
        assert!(!d.membership(&p1(0.6, -0.1)));
        assert!(!d.membership(&p1(0.0, 0.0)));
    }

    #[test]
    fn tusk_contains_example_point() {
        let tusk = Tusk {
            xhat: smallvec::smallvec![0.0],
            radius: 1.0,
            depth: 1.0,
        };
        assert!(tusk.contains(&p1(0.5, -0.5)));
        let d = Domain::tusk_complement(&[0.0], 1.0, 1.0, 2.0).unwrap();
        assert!(!d.membership(&p1(0.5, -0.5)));
        assert!(d.membership(&p1(1.5, -0.5)));
    }

    #[test]
    fn bbox_faces_are_outside() {
        let doms = vec![
            Domain::petrovskii(4.0, 1).unwrap(),
            Domain::tusk_house(&[1.0], 0.5, 2.0).unwrap(),
            Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0).unwrap(),
            Domain::ellipse_chain(&[0.5], 0.2, 0.1, 0.5, 0.5, 1.0).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in &doms {
            let bb = d.bbox().clone();
            for _ in 0..2000 {
                let mut p = bb.sample(&mut rng);
                match rng.gen_range(0..3) {
                    0 => p.t = bb.t_lo,
                    1 => p.t = bb.t_hi,
                    _ => p.x[0] = if rng.gen() { bb.lo[0] } else { bb.hi[0] },
                }
                assert!(!d.membership(&p), "{p} on a face of {d:?}");
            }
        }
    }

    #[test]
    fn projection_on_cylinder_and_petrovskii() {
        let c = Domain::ball_cylinder(&[0.0], 1.0, -1.0, 0.0).unwrap();
        let z = project_to_boundary(&c, &p1(0.0, -0.5), &p1(2.0, -0.5));
        assert!((z.x[0] - 1.0).abs() < 1e-11);
        assert!(!c.membership(&z));
        let z = project_to_boundary(&c, &p1(0.3, -0.5), &p1(0.3, -1.5));
        assert!((z.t + 1.0).abs() < 1e-11);

        let d = Domain::petrovskii(4.0, 1).unwrap();
        let z = project_to_boundary(&d, &p1(0.0, -0.1), &p1(1.0, -0.1));
        let expect = 0.4 * (10f64.ln()).ln();
        assert!((z.x[0] * z.x[0] - expect).abs() < 1e-11);
        assert!(!d.membership(&z));
    }

    #[test]
    fn projection_stable_under_tolerance_halving() {
        let d = Domain::petrovskii(4.0, 1).unwrap();
        let a = project_with_tol(&d, &p1(0.0, -0.1), &p1(1.0, -0.1), 1e-10);
        let b = project_with_tol(&d, &p1(0.0, -0.1), &p1(1.0, -0.1), 5e-11);
        assert!(a.dist(&b) < 10.0 * 1e-10);
    }

    #[test]
    fn cylinder_boundary_samples_are_on_parabolic_boundary() {
        let c = Domain::ball_cylinder(&[0.0, 0.0], 1.0, -1.0, 0.0).unwrap();
        let pts = parabolic_boundary_sample(&c, 4, 3).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            let r = p.norm_x();
            let on_bottom = p.t == -1.0 && r <= 1.0;
            let on_side = (r - 1.0).abs() < 1e-12 && (-1.0..=0.0).contains(&p.t);
            assert!(on_bottom || on_side, "{p}");
            assert!(!(p.t == 0.0 && r < 1.0));
        }
        assert!(parabolic_boundary_sample(&c, 0, 3).unwrap().is_empty());
        assert_eq!(pts, parabolic_boundary_sample(&c, 4, 3).unwrap());
    }

    #[test]
    fn petrovskii_boundary_samples_satisfy_defining_equation() {
        let d = Domain::petrovskii(4.0, 1).unwrap();
        let pts = parabolic_boundary_sample(&d, 50, 11).unwrap();
        assert_eq!(pts.len(), 50);
        for p in &pts {
            assert!(!d.membership(p));
            let lateral = (p.x[0] * p.x[0] - 4.0 * petrovskii_width(p.t)).abs() < 1e-9;
            let bottom = (p.t + 1.0 / 3.0).abs() < 1e-9;
            assert!(lateral || bottom, "{p}");
        }
    }

    #[test]
    fn parabolic_scaling_examples() {
        let p = parabolic_scale(&p1(1.0, -1.0), 2.0);
        assert_eq!(p, p1(2.0, -4.0));
        let q = SpacetimePoint::new(&[0.3, -0.2], -0.7);
        assert_eq!(parabolic_scale(&q, 1.0), q);
    }

    #[test]
    fn scaled_tusk_house_matches_preimage() {
        let d = Domain::tusk_house(&[1.0], 0.5, 2.0).unwrap();
        let s = scale_domain(&d, 2.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5000 {
            let p = s.bbox().sample(&mut rng);
            assert_eq!(s.membership(&p), d.membership(&parabolic_scale(&p, 2.0)));
        }
    }

    #[test]
    fn tusk_shape_invariance_under_dyadic_scaling() {
        let tusk = Tusk {
            xhat: smallvec::smallvec![0.7, -0.2],
            radius: 0.4,
            depth: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..6 {
            let s = 2f64.powi(k);
            for _ in 0..500 {
                let p = SpacetimePoint::new(
                    &[rng.gen::<f64>() * 2.0 / s - 1.0 / s, rng.gen::<f64>() * 2.0 / s - 1.0 / s],
                    -rng.gen::<f64>() / (s * s),
                );
                assert_eq!(tusk.contains(&p), tusk.contains(&parabolic_scale(&p, s)));
            }
        }
    }

    #[test]
    fn spec_round_trip_through_json() {
        let json = r#"{"kind":"petrovskii","A":4.0,"n":1}"#;
        let spec: DomainSpec = serde_json::from_str(json).unwrap();
        let d = spec.build().unwrap();
        assert_eq!(d.to_spec().unwrap(), spec);
        let json = r#"{"kind":"cylinder","center":[0.0],"radius":1.0,"t1":-1.0,"t2":0.0}"#;
        let spec: DomainSpec = serde_json::from_str(json).unwrap();
        assert!(spec.build().unwrap().membership(&p1(0.2, -0.5)));
        let json = r#"{"kind":"tusk_house","xhat":[1.0],"R":0.5,"R0":2.0}"#;
        assert!(serde_json::from_str::<DomainSpec>(json).unwrap().build().is_ok());
    }

    #[test]
    fn generic_expression_domain() {
        let spec = DomainSpec::Generic {
            expr: "x^2 + t".into(),
            bbox: BBox::new(&[-1.0], &[1.0], -1.0, 0.0),
        };
        let d = spec.build().unwrap();
        assert!(d.membership(&p1(0.1, -0.5)));
        assert!(!d.membership(&p1(0.9, -0.5)));
        assert!(!d.membership(&p1(0.0, -1.0)));
    }

    #[test]
    fn ellipse_chain_excludes_ellipses() {
        let d = Domain::ellipse_chain(&[0.5], 0.2, 0.1, 0.5, 0.5, 1.0).unwrap();
        // centre of E_1: x = 0.25, t = -0.125
        assert!(!d.membership(&p1(0.25, -0.125)));
        assert!(d.membership(&p1(-0.5, -0.125)));
    }

    #[test]
    fn wedge_cylinder_removes_cone() {
        // cone at (1, 0) opening inward along -e1
        let d = Domain::wedge_cylinder(&[0.0, 0.0], 1.0, &[1.0, 0.0], &[-1.0, 0.0], 0.9, -1.0, 0.0)
            .unwrap();
        assert!(d.membership(&SpacetimePoint::new(&[0.0, 0.8], -0.5)));
        assert!(!d.membership(&SpacetimePoint::new(&[0.9, 0.0], -0.5)));
        assert!(d.membership(&SpacetimePoint::new(&[0.9, 0.3], -0.5)));
    }
}
