//! Explicit barrier families and their verification.
//!
//! Verification is sampled, not certified: each report lists the points
//! checked and the worst value seen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::{petrovskii_width, BBox, Coords, Domain, Shape, SpacetimePoint, Tusk};
use crate::operator::{
    classical_subsolution_check, classical_supersolution_check, CheckReport, OperatorParams,
};
use crate::solver::{solve_observed, Grid, GridSpec, Storage};

const GEOMETRY_TOL: f64 = 1e-9;
const J_SAFETY: f64 = 1.1;
/// Smallest time depth tried by the irregularity search.
pub const MIN_TAU: f64 = 1e-6;
/// Tolerance for the boundary identity `u = h - 1`.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Low-discrepancy sample set over a domain, refined near a boundary point.
///
/// The main set is a Halton sequence over the bounding box (or over the
/// known cross-section for Petrovskiĭ-type domains), then the axis
/// `x = x0`, then dyadic time bands `t0 - 2^-m < t < t0 - 2^-(m+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub n_main: usize,
    pub n_axis: usize,
    pub n_per_band: usize,
    pub max_band: u32,
    /// Offset into the Halton sequence.
    pub seed: u64,
}

impl Default for Sampler {
    fn default() -> Self {
        Self {
            n_main: 10_000,
            n_axis: 1_000,
            n_per_band: 1_000,
            max_band: 20,
            seed: 0,
        }
    }
}

const BASES: [u8; 3] = [2, 3, 5];

fn halton_point(index: usize, dim: usize) -> Coords {
    (0..dim).map(|d| halton::number(BASES[d], index)).collect()
}

/// Half-width of the cross-section at time `t`, when the shape knows it.
fn cross_section(dom: &Domain, t: f64) -> Option<(Coords, f64)> {
    match dom.shape() {
        Shape::Petrovskii { a } => {
            let w = petrovskii_width(t);
            (w > 0.0).then(|| (smallvec::smallvec![0.0; dom.n()], (a * w).sqrt()))
        }
        Shape::Restricted { inner, .. } => cross_section(inner, t),
        _ => None,
    }
}

impl Sampler {
    fn offset(&self) -> usize {
        1 + self.seed as usize * 7919
    }

    /// Point of the domain built from unit-cube coordinates `u` with time `t`.
    fn place(dom: &Domain, u: &[f64], t: f64) -> SpacetimePoint {
        let bb = dom.bbox();
        let x: Coords = match cross_section(dom, t) {
            Some((c, r)) => (0..dom.n()).map(|i| c[i] + r * (2.0 * u[i] - 1.0)).collect(),
            None => (0..dom.n()).map(|i| bb.lo[i] + (bb.hi[i] - bb.lo[i]) * u[i]).collect(),
        };
        SpacetimePoint { x, t }
    }

    /// Interior sample points.
    pub fn points(&self, dom: &Domain, xi0: &SpacetimePoint) -> Vec<SpacetimePoint> {
        let bb = dom.bbox();
        let n = dom.n();
        let mut out = Vec::new();
        let mut idx = self.offset();

        let mut take = |count: usize, t_of: &dyn Fn(f64) -> f64, idx: &mut usize| {
            let mut got = 0;
            let mut tries = 0;
            while got < count && tries < 50 * count {
                let h = halton_point(*idx, n + 1);
                *idx += 1;
                tries += 1;
                let p = Self::place(dom, &h[1..], t_of(h[0]));
                if dom.membership(&p) {
                    out.push(p);
                    got += 1;
                }
            }
        };

        take(self.n_main, &|s| bb.t_lo + s * bb.duration(), &mut idx);

        for m in 0..=self.max_band {
            let hi = (xi0.t - 0.5f64.powi(m as i32 + 1)).min(bb.t_hi);
            let lo = (xi0.t - 0.5f64.powi(m as i32)).max(bb.t_lo);
            if lo < hi {
                take(self.n_per_band, &|s| lo + s * (hi - lo), &mut idx);
            }
        }

        // Axis: half uniform in time, half geometrically refined toward t0 from both sides.
        let below = xi0.t - bb.t_lo;
        let above = bb.t_hi - xi0.t;
        for i in 0..self.n_axis {
            let s = halton::number(2, self.offset() + i);
            let t = match i % 4 {
                0 | 1 => bb.t_lo + s * bb.duration(),
                2 => xi0.t - below * 2f64.powf(-30.0 * s),
                _ => xi0.t + above * 2f64.powf(-30.0 * s),
            };
            let p = SpacetimePoint { x: xi0.x.clone(), t };
            if dom.membership(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Points of `dom` in the parabolic box `|x - x0| < r`, `|t - t0| < r²`.
    fn neighborhood(&self, dom: &Domain, xi0: &SpacetimePoint, r: f64, count: usize) -> Vec<SpacetimePoint> {
        let n = dom.n();
        let mut out = Vec::new();
        for i in 0..count * 20 {
            if out.len() >= count {
                break;
            }
            let h = halton_point(self.offset() + i, n + 1);
            let t = xi0.t + r * r * (2.0 * h[0] - 1.0);
            let x: Coords = (0..n).map(|d| xi0.x[d] + r * (2.0 * h[d + 1] - 1.0)).collect();
            let p = SpacetimePoint { x, t };
            let dx: f64 = p.x.iter().zip(&xi0.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dx < r && dom.membership(&p) {
                out.push(p);
            }
        }
        out
    }
}

/// Sign check of field values over a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueCheck {
    pub pass: bool,
    pub n_samples: usize,
    /// Worst value: the minimum for positivity, the maximum for the other checks.
    pub worst: Option<f64>,
    pub worst_point: Option<SpacetimePoint>,
}

/// Maxima of `|u|` over shrinking parabolic neighborhoods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub pass: bool,
    pub radii: Vec<f64>,
    pub max_abs: Vec<f64>,
}

/// Diagnostics for the sufficient conditions used in the irregularity proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientConditions {
    /// `(a+1)/|log|t|| <= b/2` on all samples.
    pub log_term: bool,
    /// The bracket inequality `c s/k + b e^{-s} L^{a/2} >= b` on all samples.
    pub bracket_inequality: bool,
    /// The far branch of the case split, `ac/(2k) log L >= b`, on all samples.
    pub case_split_far_branch: bool,
    /// Largest value of the full bracket over the samples; `<= 0` means subparabolic.
    pub max_full_bracket: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub family: String,
    pub pass: bool,
    /// Super- or subsolution check, depending on the family.
    pub residual: CheckReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positivity: Option<ValueCheck>,
    pub limit: LimitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_condition: Option<ValueCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_identity: Option<ValueCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sufficient_conditions: Option<SufficientConditions>,
}

/// Dyadic radii used by the limit check.
pub fn limit_radii() -> Vec<f64> {
    (3..=10).map(|m| 0.5f64.powi(m)).collect()
}

fn limit_check(field: &ScalarField, dom: &Domain, xi0: &SpacetimePoint, sampler: &Sampler) -> Result<LimitReport> {
    let radii = limit_radii();
    let mut pool = Vec::new();
    for &r in &radii {
        pool.extend(sampler.neighborhood(dom, xi0, r, 128));
    }
    let mut vals = Vec::with_capacity(pool.len());
    for (index, p) in pool.iter().enumerate() {
        let v = field
            .eval(p)
            .map_err(|e| Error::SingularSample { index, reason: e.to_string() })?;
        vals.push(v.abs());
    }
    let mut max_abs = Vec::with_capacity(radii.len());
    for &r in &radii {
        let m = pool
            .iter()
            .zip(&vals)
            .filter(|(p, _)| {
                let dx: f64 = p.x.iter().zip(&xi0.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                dx < r && (p.t - xi0.t).abs() < r * r
            })
            .map(|(_, v)| *v)
            .fold(f64::NAN, f64::max);
        max_abs.push(m);
    }
    let pass = max_abs.iter().all(|v| v.is_finite()) && max_abs.windows(2).all(|w| w[1] < w[0]);
    Ok(LimitReport { pass, radii, max_abs })
}

/// Verifies a candidate barrier at `xi0`: superparabolic on samples,
/// positive on samples away from `xi0`, and vanishing at `xi0`.
pub fn verify_barrier(
    field: &ScalarField,
    dom: &Domain,
    xi0: &SpacetimePoint,
    params: &OperatorParams,
    sampler: &Sampler,
) -> Result<BarrierReport> {
    let pts = sampler.points(dom, xi0);
    let residual = classical_supersolution_check(field, dom, params, &pts)?;
    let mut positivity = ValueCheck {
        pass: true,
        n_samples: 0,
        worst: None,
        worst_point: None,
    };
    for (index, p) in pts.iter().enumerate() {
        if p.parabolic_dist(xi0) < 1e-9 {
            continue;
        }
        let v = field
            .eval(p)
            .map_err(|e| Error::SingularSample { index, reason: e.to_string() })?;
        positivity.n_samples += 1;
        if !(v > 0.0) {
            positivity.pass = false;
        }
        if positivity.worst.map_or(true, |w| v < w) {
            positivity.worst = Some(v);
            positivity.worst_point = Some(p.clone());
        }
    }
    let limit = limit_check(field, dom, xi0, sampler)?;
    Ok(BarrierReport {
        family: "custom".into(),
        pass: residual.pass && positivity.pass && limit.pass,
        residual,
        positivity: Some(positivity),
        limit,
        tau: None,
        axis_condition: None,
        boundary_identity: None,
        sufficient_conditions: None,
    })
}

/// `w = e^{-j R1²} - e^{-j R²}` with `R = |ξ - ξ1|`, positive outside the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteriorBallBarrier {
    pub xi0: SpacetimePoint,
    pub xi1: SpacetimePoint,
    pub r1: f64,
    pub j: f64,
    /// Radius of the neighborhood of `xi0` where the barrier is certified.
    pub delta: f64,
    pub p: f64,
}

impl ExteriorBallBarrier {
    pub fn n(&self) -> usize {
        self.xi0.n()
    }

    pub fn field(&self) -> ScalarField {
        let n = self.n();
        let dt = ScalarField::t(n) - self.xi1.t;
        let r2 = ScalarField::dist_sq_to(&self.xi1.x) + dt.clone() * dt;
        (-self.j * self.r1 * self.r1).exp() - (-self.j * r2).exp()
    }

    /// `n + p - 2 - 2j(p-1)|x - x1|² - (t - t1)`; the barrier is superparabolic where this is `<= 0`.
    pub fn bracket(&self, xi: &SpacetimePoint) -> f64 {
        let d2: f64 = xi.x.iter().zip(&self.xi1.x).map(|(a, b)| (a - b) * (a - b)).sum();
        self.n() as f64 + self.p - 2.0 - 2.0 * self.j * (self.p - 1.0) * d2 - (xi.t - self.xi1.t)
    }

    /// The certified neighborhood minus the closed ball. The box half-width is
    /// `delta / sqrt(n)` so every point is within `delta` of `xi0` in each of `x` and `t`.
    pub fn neighborhood(&self) -> Result<Domain> {
        let half = self.delta / (self.n() as f64).sqrt();
        Domain::ball_complement(self.xi1.clone(), self.r1, self.xi0.clone(), half)
    }
}

/// Builds the exterior-ball barrier for the ball `B(xi1, r1)` touching `xi0`.
pub fn make_exterior_ball_barrier(
    xi0: &SpacetimePoint,
    xi1: &SpacetimePoint,
    r1: f64,
    p: f64,
) -> Result<ExteriorBallBarrier> {
    OperatorParams::new(p)?;
    let n = xi0.n();
    if xi1.n() != n {
        return Err(Error::InvalidParameter("xi0 and xi1 dimensions differ".into()));
    }
    if !(r1 > 0.0) {
        return Err(Error::InvalidParameter(format!("R1 must be positive, got {r1}")));
    }
    let dist = xi0.dist(xi1);
    if (dist - r1).abs() > GEOMETRY_TOL {
        return Err(Error::GeometryViolation(format!("|xi0 - xi1| = {dist} differs from R1 = {r1}")));
    }
    let dx: f64 = xi0.x.iter().zip(&xi1.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let npm2 = n as f64 + p - 2.0;
    let (j, delta) = if dx > GEOMETRY_TOL {
        let delta = 0.5 * dx;
        let j = J_SAFETY * (npm2 + (xi1.t - xi0.t).abs() + delta) / (2.0 * (p - 1.0) * delta * delta);
        (j, delta)
    } else {
        if xi1.t > xi0.t {
            return Err(Error::GeometryViolation("the ball lies above xi0 (south pole)".into()));
        }
        if r1 <= npm2 {
            return Err(Error::RadiusTooSmall { radius: r1, bound: npm2 });
        }
        (1.0, 0.5 * (r1 - npm2))
    };
    Ok(ExteriorBallBarrier {
        xi0: xi0.clone(),
        xi1: xi1.clone(),
        r1,
        j,
        delta,
        p,
    })
}

fn log_abs_t(t: f64) -> f64 {
    t.abs().ln().abs()
}

/// Regular-side Petrovskiĭ barrier `u = -f(t) e^{|x|²/(k|t|)} + h(t)` with `k = 4(p-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovskiiBarrier {
    pub n: usize,
    pub p: f64,
    pub k: f64,
    pub a: f64,
}

impl PetrovskiiBarrier {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        OperatorParams::new(p)?;
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let k = 4.0 * (p - 1.0);
        Ok(Self {
            n,
            p,
            k,
            a: (n as f64 + p - 2.0) / k,
        })
    }

    pub fn field(&self) -> ScalarField {
        let n = self.n;
        let s = ScalarField::norm_sq(n) / (ScalarField::t(n).abs() * self.k);
        let f = ScalarField::abs_log_abs_t_pow(n, -self.a - 1.0);
        let h = 2.0 * ScalarField::abs_log_abs_t_pow(n, -self.a);
        h - f * s.exp()
    }

    /// `|x|²` below which `u > 0`: `k|t| log|log|t|| + k|t| log 2`.
    pub fn positivity_threshold(&self, t: f64) -> f64 {
        self.k * t.abs() * (log_abs_t(t).ln() + 2f64.ln())
    }
}

/// Irregular-side Petrovskiĭ comparison function, a subsolution near `(0, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrregularityBarrier {
    pub n: usize,
    pub p: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl IrregularityBarrier {
    /// `k` defaults to the midpoint of `(4(p-1), A)`.
    pub fn new(p: f64, n: usize, big_a: f64, k: Option<f64>) -> Result<Self> {
        OperatorParams::new(p)?;
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let k0 = 4.0 * (p - 1.0);
        if !(big_a > k0) {
            return Err(Error::Precondition(format!("need A > 4(p-1) = {k0}, got A = {big_a}")));
        }
        let k = k.unwrap_or(0.5 * (k0 + big_a));
        if !(k > k0 && k < big_a) {
            return Err(Error::InvalidParameter(format!("need 4(p-1) < k < A, got k = {k}")));
        }
        Ok(Self {
            n,
            p,
            big_a,
            k,
            a: big_a / k - 1.0,
            b: 4.0 * (n as f64 + p - 2.0) / k,
            c: k - k0,
        })
    }

    pub fn field(&self) -> ScalarField {
        let n = self.n;
        let s = ScalarField::norm_sq(n) / (ScalarField::t(n).abs() * self.k);
        let f = ScalarField::abs_log_abs_t_pow(n, -self.a - 1.0);
        let h = (2.0 * self.b / self.a) * ScalarField::abs_log_abs_t_pow(n, -0.5 * self.a);
        h - f * s.exp()
    }

    pub fn f(&self, t: f64) -> f64 {
        log_abs_t(t).powf(-self.a - 1.0)
    }

    pub fn h(&self, t: f64) -> f64 {
        2.0 * self.b / (self.a * log_abs_t(t).powf(0.5 * self.a))
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        -self.f(t) / t.abs() * (self.a + 1.0) / log_abs_t(t)
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        -self.b * self.f(t) / t.abs() * log_abs_t(t).powf(0.5 * self.a)
    }

    /// The bracket `(a+1)/L - c s/k + b/2 - b e^{-s} L^{a/2}`, with
    /// `s = |x|²/(k|t|)` and `L = |log|t||`. The residual `u_t - Δ_p^N u`
    /// equals this times the positive factor `e^s f(t)/|t|`.
    pub fn full_bracket(&self, x2: f64, t: f64) -> f64 {
        let l = log_abs_t(t);
        let s = x2 / (self.k * t.abs());
        (self.a + 1.0) / l - self.c * s / self.k + 0.5 * self.b - self.b * (-s).exp() * l.powf(0.5 * self.a)
    }

    /// Left side minus right side of `c|x|²/(k²|t|) + b e^{-s} L^{a/2} >= b`.
    pub fn bracket_inequality_margin(&self, x2: f64, t: f64) -> f64 {
        let l = log_abs_t(t);
        let s = x2 / (self.k * t.abs());
        self.c * s / self.k + self.b * (-s).exp() * l.powf(0.5 * self.a) - self.b
    }
}

fn sufficient_conditions(bar: &IrregularityBarrier, pts: &[SpacetimePoint]) -> SufficientConditions {
    let mut out = SufficientConditions {
        log_term: true,
        bracket_inequality: true,
        case_split_far_branch: true,
        max_full_bracket: f64::NEG_INFINITY,
    };
    for p in pts {
        let l = log_abs_t(p.t);
        let x2: f64 = p.x.iter().map(|v| v * v).sum();
        if (bar.a + 1.0) / l > 0.5 * bar.b {
            out.log_term = false;
        }
        if bar.bracket_inequality_margin(x2, p.t) < 0.0 {
            out.bracket_inequality = false;
        }
        if x2 > 0.5 * bar.a * bar.k * p.t.abs() * l.ln() && bar.a * bar.c / (2.0 * bar.k) * l.ln() < bar.b {
            out.case_split_far_branch = false;
        }
        out.max_full_bracket = out.max_full_bracket.max(bar.full_bracket(x2, p.t));
    }
    out
}

/// Exact lateral boundary points `|x|² = A|t| log|log|t||`.
fn petrovskii_boundary_points(big_a: f64, n: usize, count: usize) -> Vec<SpacetimePoint> {
    (0..count)
        .map(|i| {
            let u = halton::number(2, i + 1);
            let v = halton::number(3, i + 1);
            let t = if i % 2 == 0 { -u / 3.0 } else { -(1.0 / 3.0) * 2f64.powf(-40.0 * u) };
            let r = (big_a * petrovskii_width(t)).sqrt();
            let x: Coords = if n == 1 {
                smallvec::smallvec![if v < 0.5 { -r } else { r }]
            } else {
                let th = std::f64::consts::TAU * v;
                let mut x: Coords = smallvec::smallvec![r * th.cos(), r * th.sin()];
                x.extend(std::iter::repeat(0.0).take(n.saturating_sub(2)));
                x
            };
            SpacetimePoint { x, t }
        })
        .filter(|p| p.t < 0.0 && p.t > -1.0 / 3.0)
        .collect()
}

/// Searches `τ = 1/3, 1/6, ...` for a depth where the barrier is a
/// subsolution on `Θ ∩ {t > -τ}`, then checks the boundary identity and the
/// axis limit.
///
/// A depth is accepted when the sampled subsolution check passes and
/// `u_t(0, t) < 0` on every axis sample. The proof's sufficient conditions
/// are reported alongside but do not drive the search.
pub fn verify_irregularity_barrier(
    bar: &IrregularityBarrier,
    dom: &Domain,
    params: &OperatorParams,
    sampler: &Sampler,
) -> Result<BarrierReport> {
    match dom.shape() {
        Shape::Petrovskii { a } if (*a - bar.big_a).abs() <= 1e-12 * a.abs() && dom.n() == bar.n => {}
        _ => {
            return Err(Error::Precondition(format!(
                "domain must be the Petrovskiĭ domain with A = {} in dimension {}",
                bar.big_a, bar.n
            )))
        }
    }
    let field = bar.field();
    let origin = SpacetimePoint::new(&vec![0.0; bar.n], 0.0);
    let bb = dom.bbox();

    let mut tau = 1.0 / 3.0;
    let mut found = None;
    while tau >= MIN_TAU {
        let window = BBox::new(&bb.lo, &bb.hi, -tau, bb.t_hi);
        let sub = Domain::restricted(dom.clone(), window)?;
        let pts = sampler.points(&sub, &origin);
        let residual = classical_subsolution_check(&field, &sub, params, &pts)?;
        let mut axis = ValueCheck {
            pass: true,
            n_samples: 0,
            worst: None,
            worst_point: None,
        };
        for (index, p) in pts.iter().enumerate() {
            if p.x.iter().any(|v| *v != 0.0) {
                continue;
            }
            let ut = field
                .eval_jet(p)
                .map_err(|e| Error::SingularSample { index, reason: e.to_string() })?
                .dt;
            axis.n_samples += 1;
            if !(ut < 0.0) {
                axis.pass = false;
            }
            if axis.worst.map_or(true, |w| ut > w) {
                axis.worst = Some(ut);
                axis.worst_point = Some(p.clone());
            }
        }
        if residual.pass && axis.pass {
            found = Some((tau, residual, axis, sufficient_conditions(bar, &pts)));
            break;
        }
        tau *= 0.5;
    }
    let Some((tau, residual, axis, suff)) = found else {
        return Err(Error::NoAdmissibleTau { min_tau: MIN_TAU });
    };

    let mut identity = ValueCheck {
        pass: true,
        n_samples: 0,
        worst: None,
        worst_point: None,
    };
    for (index, p) in petrovskii_boundary_points(bar.big_a, bar.n, 2000).into_iter().enumerate() {
        let u = field
            .eval(&p)
            .map_err(|e| Error::SingularSample { index, reason: e.to_string() })?;
        let err = (u - (bar.h(p.t) - 1.0)).abs();
        identity.n_samples += 1;
        if !(err <= IDENTITY_TOL) {
            identity.pass = false;
        }
        if identity.worst.map_or(true, |w| err > w) {
            identity.worst = Some(err);
            identity.worst_point = Some(p);
        }
    }

    // Axis limit: u(0, t) positive and decreasing to 0 as t -> 0- inside the window.
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for m in 1..=200 {
        let t = -0.5f64.powi(m);
        if t <= -tau {
            continue;
        }
        let u = field.eval(&SpacetimePoint::new(&vec![0.0; bar.n], t))?;
        radii.push(t.abs().sqrt());
        values.push(u);
    }
    let limit_pass = values.iter().all(|v| *v > 0.0) && values.windows(2).all(|w| w[1] < w[0]);
    let limit = LimitReport {
        pass: limit_pass,
        radii,
        max_abs: values,
    };

    Ok(BarrierReport {
        family: "irregularity".into(),
        pass: residual.pass && axis.pass && identity.pass && limit.pass,
        residual,
        positivity: None,
        limit,
        tau: Some(tau),
        axis_condition: Some(axis),
        boundary_identity: Some(identity),
        sufficient_conditions: Some(suff),
    })
}

/// Verifies `min{u, c}` as a supersolution on samples, the pasting used to
/// extend a local barrier by a constant.
pub fn pasting_check(
    u: &ScalarField,
    c: f64,
    dom: &Domain,
    params: &OperatorParams,
    samples: &[SpacetimePoint],
) -> Result<CheckReport> {
    let pasted = u.min(&ScalarField::constant(u.n(), c));
    classical_supersolution_check(&pasted, dom, params, samples)
}

/// The tusk-house problem: `Θ0 = Θ̂ \ V̄` with data `-t` on the tusk and 1 elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuskHouseBarrierSpec {
    pub xhat: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    /// Largest numeric value on the sampled set `K`.
    pub alpha1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    pub n_samples: usize,
}

/// `β = -log α / log 2`.
pub fn beta_from_alpha(alpha: f64) -> f64 {
    -alpha.ln() / 2f64.ln()
}

impl TuskHouseBarrierSpec {
    pub fn new(xhat: &[f64], r: f64, r0: f64) -> Result<Self> {
        Domain::tusk_house(xhat, r, r0)?;
        Ok(Self { xhat: xhat.to_vec(), r, r0 })
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::tusk_house(&self.xhat, self.r, self.r0)
    }

    /// Continuous extension of the data: `-t` on and inside the tusk, rising
    /// to 1 within the gap between the tusk and the rest of the boundary.
    pub fn data(&self) -> impl Fn(&SpacetimePoint) -> f64 {
        let gap = self.r0 - self.xhat.iter().map(|c| c * c).sum::<f64>().sqrt() - self.r;
        let slope = (1.0 / gap).max(1.0);
        let xhat = self.xhat.clone();
        let r = self.r;
        move |xi: &SpacetimePoint| {
            let g = if xi.t < 0.0 {
                let s = (-xi.t).sqrt();
                let d: f64 = xi.x.iter().zip(&xhat).map(|(x, c)| (x - s * c) * (x - s * c)).sum();
                (d.sqrt() - r * s).max(0.0)
            } else {
                xi.x.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            ((-xi.t).max(0.0) + slope * (g + xi.t.max(0.0))).min(1.0)
        }
    }

    /// Samples of `K`, the closure of the boundary of the half-scale house
    /// minus the tusk: bottom at `t = -1/4`, side `|x| = R0/2`, and the roof
    /// `|x| = (R0/2)(1 - 4t)`.
    pub fn k_points(&self, per_part: usize) -> Vec<SpacetimePoint> {
        let n = self.xhat.len();
        let half = 0.5 * self.r0;
        let tusk = Tusk {
            xhat: Coords::from_slice(&self.xhat),
            radius: self.r,
            depth: 1.0,
        };
        let mut out = Vec::new();
        let m = per_part.max(2);
        let unit = |i: usize| -> Vec<f64> {
            if n == 1 {
                vec![if i % 2 == 0 { 1.0 } else { -1.0 }]
            } else {
                let th = std::f64::consts::TAU * i as f64 / m as f64;
                vec![th.cos(), th.sin()]
            }
        };
        for i in 0..m {
            let tt = -0.25 + 0.25 * i as f64 / (m - 1) as f64;
            out.push(SpacetimePoint::new(&scaled(&unit(i), half), tt));
            let tc = 0.25 * i as f64 / (m - 1) as f64;
            out.push(SpacetimePoint::new(&scaled(&unit(i + 1), half * (1.0 - 4.0 * tc)), tc));
        }
        for i in 0..m {
            let x: Vec<f64> = if n == 1 {
                vec![-half + 2.0 * half * i as f64 / (m - 1) as f64]
            } else {
                let rho = half * halton::number(2, i + 1).sqrt();
                let th = std::f64::consts::TAU * halton::number(3, i + 1);
                vec![rho * th.cos(), rho * th.sin()]
            };
            let xi = SpacetimePoint::new(&x, -0.25);
            if !tusk.contains(&xi) {
                out.push(xi);
            }
        }
        out
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|c| c * s).collect()
}

/// Solves the tusk-house problem on a grid of step `h` and reads off the
/// contraction factor `α = max{sup_K u, 1/4}` and exponent `β = -log α / log 2`.
pub fn estimate_alpha_and_beta(
    spec: &TuskHouseBarrierSpec,
    params: &OperatorParams,
    h: f64,
) -> Result<AlphaBeta> {
    let dom = spec.domain()?;
    let data = spec.data();
    let pts = spec.k_points(400);
    let grid = Grid::new(&dom, params, &GridSpec::new(h))?;
    let mut acc = vec![0.0; pts.len()];
    let slots: Vec<(usize, f64)> = pts
        .iter()
        .map(|p| {
            let s = (p.t - grid.t_lo) / grid.dt;
            let m = s.floor();
            (m as usize, s - m)
        })
        .collect();
    let spec_grid = GridSpec {
        storage: Storage::Last,
        ..GridSpec::new(h)
    };
    solve_observed(&dom, &data, params, &spec_grid, |g, slice| {
        for (k, p) in pts.iter().enumerate() {
            let (m, w) = slots[k];
            let weight = if slice.m == m {
                1.0 - w
            } else if slice.m == m + 1 {
                w
            } else {
                continue;
            };
            if weight == 0.0 {
                continue;
            }
            let v = slice.interpolate(g, &p.x, |x| data(&SpacetimePoint::new(x, slice.t)));
            acc[k] += weight * v;
        }
    })?;
    let alpha1 = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if alpha1 >= 1.0 - h {
        return Err(Error::ResolutionTooCoarse { alpha1, tol: h });
    }
    let alpha = alpha1.max(0.25);
    Ok(AlphaBeta {
        alpha1,
        alpha,
        beta: beta_from_alpha(alpha),
        h,
        n_samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sampler() -> Sampler {
        Sampler {
            n_main: 1500,
            n_axis: 200,
            n_per_band: 100,
            max_band: 20,
            seed: 0,
        }
    }

    #[test]
    fn exterior_ball_tangent_example() {
        let xi0 = SpacetimePoint::new(&[0.0], 0.0);
        let xi1 = SpacetimePoint::new(&[1.0], 0.0);
        let b = make_exterior_ball_barrier(&xi0, &xi1, 1.0, 2.0).unwrap();
        assert_eq!(b.delta, 0.5);
        assert!((b.j - 3.3).abs() < 1e-12);
    }

    #[test]
    fn exterior_ball_north_pole_examples() {
        let xi0 = SpacetimePoint::new(&[0.0], 0.0);
        let b = make_exterior_ball_barrier(&xi0, &SpacetimePoint::new(&[0.0], -2.0), 2.0, 2.0).unwrap();
        assert_eq!((b.delta, b.j), (0.5, 1.0));
        let at = SpacetimePoint::new(&[0.0], -0.3);
        assert!((b.bracket(&at) - (-1.0 + 0.3)).abs() < 1e-14);

        let xi0 = SpacetimePoint::new(&[0.0, 0.0], 0.0);
        let err = make_exterior_ball_barrier(&xi0, &SpacetimePoint::new(&[0.0, 0.0], -3.0), 3.0, 3.0);
        assert!(matches!(err, Err(Error::RadiusTooSmall { .. })));
    }

    #[test]
    fn exterior_ball_geometry_violation() {
        let xi0 = SpacetimePoint::new(&[0.0], 0.0);
        let xi1 = SpacetimePoint::new(&[1.0], 0.0);
        assert!(matches!(
            make_exterior_ball_barrier(&xi0, &xi1, 1.1, 2.0),
            Err(Error::GeometryViolation(_))
        ));
    }

    #[test]
    fn irregularity_constants() {
        let bar = IrregularityBarrier::new(2.0, 1, 8.0, None).unwrap();
        assert_eq!(bar.k, 6.0);
        assert!((bar.a - 1.0 / 3.0).abs() < 1e-15);
        assert!((bar.b - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(bar.c, 2.0);
        assert!(matches!(IrregularityBarrier::new(2.0, 1, 4.0, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn case_split_boundary_value() {
        // At |x|² = a k |t| log L / 2 the exponential term equals b exactly.
        let bar = IrregularityBarrier::new(2.0, 1, 8.0, None).unwrap();
        let t = -1e-5;
        let l = log_abs_t(t);
        let x2 = 0.5 * bar.a * bar.k * t.abs() * l.ln();
        let s = x2 / (bar.k * t.abs());
        let term = bar.b * (-s).exp() * l.powf(0.5 * bar.a);
        assert!((term - bar.b).abs() < 1e-12);
    }

    #[test]
    fn axis_derivative_matches_closed_form() {
        let bar = IrregularityBarrier::new(3.0, 1, 16.0, None).unwrap();
        let t = -1e-3;
        let jet = bar.field().eval_jet(&SpacetimePoint::new(&[0.0], t)).unwrap();
        let expect = bar.h_prime(t) - bar.f_prime(t);
        assert!((jet.dt - expect).abs() < 1e-9 * expect.abs());
        let l = log_abs_t(t);
        let factored = bar.f(t) / t.abs() * ((bar.a + 1.0) / l - bar.b * l.powf(0.5 * bar.a));
        assert!((expect - factored).abs() < 1e-9 * expect.abs());
    }

    #[test]
    fn petrovskii_positivity_matches_threshold() {
        let bar = PetrovskiiBarrier::new(2.0, 1).unwrap();
        let u = bar.field();
        let mut agree = 0;
        for i in 1..2000 {
            let t = -halton::number(2, i) / 3.0;
            let x = 2.0 * halton::number(3, i) - 1.0;
            let p = SpacetimePoint::new(&[x], t);
            let pos = u.eval(&p).unwrap() > 0.0;
            if pos == (x * x < bar.positivity_threshold(t)) {
                agree += 1;
            }
        }
        assert_eq!(agree, 1999);
    }

    #[test]
    fn petrovskii_axis_is_vacuous() {
        let bar = PetrovskiiBarrier::new(2.0, 1).unwrap();
        let dom = Domain::petrovskii(4.0, 1).unwrap();
        let rep = verify_barrier(
            &bar.field(),
            &dom,
            &SpacetimePoint::new(&[0.0], 0.0),
            &OperatorParams::new(2.0).unwrap(),
            &small_sampler(),
        )
        .unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.residual.branch_counts.grad_zero_vacuous > 0);
    }

    #[test]
    fn minus_t_fails_supersolution_condition() {
        let dom = Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0).unwrap();
        let rep = verify_barrier(
            &(-ScalarField::t(1)),
            &dom,
            &SpacetimePoint::new(&[0.0], 0.0),
            &OperatorParams::new(2.0).unwrap(),
            &small_sampler(),
        )
        .unwrap();
        assert!(!rep.residual.pass);
        assert!(!rep.pass);
    }

    #[test]
    fn pasting_with_constant() {
        let xi0 = SpacetimePoint::new(&[0.0], 0.0);
        let b = make_exterior_ball_barrier(&xi0, &SpacetimePoint::new(&[1.0], 0.0), 1.0, 2.0).unwrap();
        let dom = b.neighborhood().unwrap();
        let w = b.field();
        let params = OperatorParams::new(2.0).unwrap();
        let pts = small_sampler().points(&dom, &xi0);
        let vals: Vec<f64> = pts.iter().map(|p| w.eval(p).unwrap()).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let c = sorted[sorted.len() / 2];
        let rep = pasting_check(&w, c, &dom, &params, &pts).unwrap();
        assert!(rep.pass);
        assert!(vals.iter().any(|v| *v > c) && vals.iter().any(|v| *v < c));
    }
}
