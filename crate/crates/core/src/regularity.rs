//! Numerical boundary-regularity classification.
//!
//! A boundary point `ξ0` is probed with the continuous data
//! `f = min(1, d(ξ, ξ0)/ρ)`, where `d` is the parabolic distance
//! `|x - x0| + |t - t0|^{1/2}`. The solver's solution is compared with
//! `f(ξ0) = 0` on shrinking parabolic neighborhoods in the past of `ξ0`.
//! Regular points show gaps that decay; irregular points keep a gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, SpacetimePoint};
use crate::operator::OperatorParams;
use crate::solver::{solve_observed, GridSpec, Storage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Irregular,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Regular => "regular",
            Verdict::Irregular => "irregular",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Grid steps, coarse to fine.
    pub ladder: Vec<f64>,
    pub theta_reg: f64,
    pub theta_irr: f64,
    /// Radii are `2^-i` times the box's parabolic diameter for `i` in this range.
    pub min_exponent: i32,
    pub max_exponent: i32,
    /// A radius is usable on a grid when it spans at least this many steps.
    pub min_steps_per_radius: f64,
    /// Number of trailing usable radii that must decrease for a regular verdict.
    pub decreasing_tail: usize,
    /// An irregular verdict also needs the last usable gap to have stopped
    /// falling: relative drop over the last halving below this.
    pub plateau_tol: f64,
    pub directions: usize,
    pub arm_factor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            ladder: vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
            theta_reg: 0.05,
            theta_irr: 0.25,
            min_exponent: 2,
            max_exponent: 8,
            min_steps_per_radius: 4.0,
            decreasing_tail: 4,
            plateau_tol: 0.02,
            directions: 8,
            arm_factor: 1.5,
        }
    }
}

/// Gaps measured on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGaps {
    pub h: f64,
    pub radii: Vec<f64>,
    /// `None` where the radius is too small for the grid or holds no node.
    pub gaps: Vec<Option<f64>>,
    pub verdict: Verdict,
}

impl GridGaps {
    /// `(r, gap)` pairs for usable radii, coarse to fine.
    pub fn usable(&self) -> Vec<(f64, f64)> {
        self.radii
            .iter()
            .zip(&self.gaps)
            .filter_map(|(r, g)| g.map(|g| (*r, g)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub beta: f64,
    pub c: f64,
    /// Root-mean-square residual of the log-log regression.
    pub residual: f64,
    /// Set when the fitted exponent is indistinguishable from zero.
    pub flat: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub verdict: Verdict,
    pub point: SpacetimePoint,
    /// Usable `(r, gap)` on the finest grid.
    pub gaps: Vec<(f64, f64)>,
    pub final_gap: Option<f64>,
    pub holder: Option<HolderFit>,
    pub resolutions: Vec<f64>,
    pub per_grid: Vec<GridGaps>,
}

/// `|x - x0| + |t - t0|^{1/2}`.
pub fn parabolic_distance(a: &SpacetimePoint, b: &SpacetimePoint) -> f64 {
    let dx: f64 = a.x.iter().zip(&b.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    dx + (a.t - b.t).abs().sqrt()
}

/// Probe data `min(1, d(ξ, ξ0)/ρ)` with `ρ` a quarter of the box's parabolic diameter.
pub fn probe_data(dom: &Domain, xi0: &SpacetimePoint) -> impl Fn(&SpacetimePoint) -> f64 {
    let rho = 0.25 * dom.bbox().parabolic_diameter();
    let xi0 = xi0.clone();
    move |xi: &SpacetimePoint| (parabolic_distance(xi, &xi0) / rho).min(1.0)
}

/// Checks that `xi0` is outside the domain with domain points arbitrarily close.
fn check_boundary_point(dom: &Domain, xi0: &SpacetimePoint) -> Result<()> {
    if xi0.n() != dom.n() || dom.membership(xi0) {
        return Err(Error::NotABoundaryPoint(xi0.to_string()));
    }
    let scale = dom.bbox().parabolic_diameter();
    let n = dom.n();
    for e in [1e-2, 1e-3, 1e-4] {
        let r = e * scale;
        let hit = (1..2000).any(|i| {
            let x = (0..n)
                .map(|d| xi0.x[d] + r * (2.0 * halton::number([3, 5][d], i) - 1.0))
                .collect::<Vec<_>>();
            let t = xi0.t + r * r * (2.0 * halton::number(2, i) - 1.0);
            dom.membership(&SpacetimePoint::new(&x, t))
        });
        if !hit {
            return Err(Error::NotABoundaryPoint(xi0.to_string()));
        }
    }
    Ok(())
}

/// Radii `2^-i D` for the configured exponents.
pub fn probe_radii(dom: &Domain, cfg: &ClassifyConfig) -> Vec<f64> {
    let d = dom.bbox().parabolic_diameter();
    (cfg.min_exponent..=cfg.max_exponent).map(|i| d * 0.5f64.powi(i)).collect()
}

/// Solves with `data` on one grid and records `sup |u - f0|` over past
/// parabolic neighborhoods of `xi0`.
pub fn measure_gaps<F: Fn(&SpacetimePoint) -> f64>(
    dom: &Domain,
    xi0: &SpacetimePoint,
    data: &F,
    f0: f64,
    params: &OperatorParams,
    spec: &GridSpec,
    radii: &[f64],
) -> Result<Vec<Option<f64>>> {
    // level_max[i]: largest gap among nodes whose innermost neighborhood is i.
    let mut level_max = vec![f64::NAN; radii.len()];
    solve_observed(dom, data, params, spec, |grid, slice| {
        let dt0 = xi0.t - slice.t;
        if dt0 <= 0.0 {
            return;
        }
        for (k, v) in slice.values.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            let x = grid.node_x(k);
            let dx: f64 = x.iter().zip(&xi0.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let mut level = None;
            for (i, r) in radii.iter().enumerate() {
                if dx < *r && dt0 < r * r {
                    level = Some(i);
                } else {
                    break;
                }
            }
            if let Some(i) = level {
                let g = (v - f0).abs();
                if level_max[i].is_nan() || g > level_max[i] {
                    level_max[i] = g;
                }
            }
        }
    })?;
    let mut out = vec![None; radii.len()];
    let mut acc = f64::NAN;
    for i in (0..radii.len()).rev() {
        if !level_max[i].is_nan() && (acc.is_nan() || level_max[i] > acc) {
            acc = level_max[i];
        }
        if !acc.is_nan() {
            out[i] = Some(acc);
        }
    }
    Ok(out)
}

fn grid_verdict(usable: &[(f64, f64)], cfg: &ClassifyConfig) -> Verdict {
    if usable.is_empty() {
        return Verdict::Inconclusive;
    }
    let plateau = match usable {
        [.., a, b] => (a.1 - b.1) < cfg.plateau_tol * a.1,
        _ => false,
    };
    if plateau && usable.iter().all(|(_, g)| *g > cfg.theta_irr) {
        return Verdict::Irregular;
    }
    let tail = cfg.decreasing_tail.min(usable.len());
    let last = &usable[usable.len() - tail..];
    let decreasing = tail >= 2 && last.windows(2).all(|w| w[1].1 < w[0].1);
    if decreasing && usable[usable.len() - 1].1 < cfg.theta_reg {
        Verdict::Regular
    } else {
        Verdict::Inconclusive
    }
}

/// Classifies `xi0` by running the probe on every grid of the ladder.
/// The verdict is the one shared by the two finest grids, else inconclusive.
pub fn classify(
    dom: &Domain,
    xi0: &SpacetimePoint,
    params: &OperatorParams,
    cfg: &ClassifyConfig,
) -> Result<RegularityReport> {
    check_boundary_point(dom, xi0)?;
    if cfg.ladder.is_empty() {
        return Err(Error::InvalidParameter("empty grid ladder".into()));
    }
    let data = probe_data(dom, xi0);
    let radii = probe_radii(dom, cfg);
    let mut per_grid = Vec::new();
    for &h in &cfg.ladder {
        let spec = GridSpec {
            directions: cfg.directions,
            arm_factor: cfg.arm_factor,
            storage: Storage::Last,
            ..GridSpec::new(h)
        };
        let gaps = measure_gaps(dom, xi0, &data, 0.0, params, &spec, &radii)?;
        let gaps: Vec<Option<f64>> = gaps
            .into_iter()
            .zip(&radii)
            .map(|(g, r)| if *r >= cfg.min_steps_per_radius * h { g } else { None })
            .collect();
        let mut gg = GridGaps {
            h,
            radii: radii.clone(),
            gaps,
            verdict: Verdict::Inconclusive,
        };
        gg.verdict = grid_verdict(&gg.usable(), cfg);
        per_grid.push(gg);
    }
    let finest = per_grid.last().expect("nonempty ladder");
    let verdict = if per_grid.len() >= 2 {
        let prev = &per_grid[per_grid.len() - 2];
        if prev.verdict == finest.verdict {
            finest.verdict
        } else {
            Verdict::Inconclusive
        }
    } else {
        finest.verdict
    };
    let gaps = finest.usable();
    let final_gap = gaps.last().map(|g| g.1);
    let holder = if verdict == Verdict::Regular { fit_holder(&gaps).ok() } else { None };
    Ok(RegularityReport {
        verdict,
        point: xi0.clone(),
        gaps,
        final_gap,
        holder,
        resolutions: cfg.ladder.clone(),
        per_grid,
    })
}

/// Least-squares fit of `log gap = log C + β log r`.
pub fn fit_holder(gaps: &[(f64, f64)]) -> Result<HolderFit> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|(r, g)| *r > 0.0 && *g > 0.0)
        .map(|(r, g)| (r.ln(), g.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientDecades(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let residual = (pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + beta * p.0);
            e * e
        })
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(HolderFit {
        beta,
        c: intercept.exp(),
        residual,
        flat: beta.abs() < 0.05,
    })
}

/// Hölder exponent guaranteed at a tusk point for data of exponent `gamma`:
/// `min{γ/2, -log α / (2 log 2)}`.
pub fn tusk_holder_exponent(gamma: f64, alpha: f64) -> f64 {
    (0.5 * gamma).min(-alpha.ln() / (2.0 * 2f64.ln()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "A")]
    pub a: f64,
    pub verdict: Verdict,
    pub final_gap: Option<f64>,
    pub threshold: f64,
}

/// Classifies the vertex of the Petrovskiĭ domain for each `A`.
pub fn petrovskii_sweep(
    p: f64,
    n: usize,
    a_list: &[f64],
    cfg: &ClassifyConfig,
) -> Result<Vec<SweepRow>> {
    let params = OperatorParams::new(p)?;
    let threshold = 4.0 * (p - 1.0);
    let origin = SpacetimePoint::new(&vec![0.0; n], 0.0);
    a_list
        .iter()
        .map(|&a| {
            let dom = Domain::petrovskii(a, n)?;
            let rep = classify(&dom, &origin, &params, cfg)?;
            Ok(SweepRow {
                a,
                verdict: rep.verdict,
                final_gap: rep.final_gap,
                threshold,
            })
        })
        .collect()
}

/// CSV with header `A,verdict,final_gap,threshold`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("A,verdict,final_gap,threshold\n");
    for r in rows {
        let gap = r.final_gap.map(|g| format!("{g}")).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.a, r.verdict.as_str(), gap, r.threshold));
    }
    s
}
