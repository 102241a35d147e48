//! Explicit monotone finite differences for `u_t = Δ_p^N u`.
//!
//! The grid is uniform over the domain's bounding box. Each time slice has
//! its own active set (nodes inside the domain at that time), so
//! non-cylindrical domains are handled by activating and dropping nodes.
//!
//! In one dimension the operator is `(p - 1) u_xx` and the scheme is the
//! three-point stencil. In two dimensions:
//!
//! * `p >= 2`: five-point Laplacian plus `(p - 2)` times the max/min
//!   directional difference over a symmetric set of wide arms.
//! * `p < 2`: `(p - 1) D_νν + D_⊥⊥` along the set direction closest to the
//!   discrete gradient, using the same arms.
//!
//! Where the discrete gradient is below the threshold, the direction is
//! replaced by the minimum over all set directions. Arm endpoints off the
//! grid are found by bilinear interpolation; arms that leave the domain read
//! the boundary data instead.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_to_boundary, Coords, Domain, Shape, SpacetimePoint};
use crate::operator::OperatorParams;

/// Which slices a solve keeps in memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    All,
    /// Every `k`-th slice plus the last.
    Stride(usize),
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    /// Explicit time step; defaults to the largest stable step that divides the duration.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Number of arm directions in `[0, π)`; must be even.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Arm length is `arm_factor * sqrt(h * extent)`.
    #[serde(default = "default_arm_factor")]
    pub arm_factor: f64,
    /// Overrides the default gradient threshold.
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default = "default_storage")]
    pub storage: Storage,
}

fn default_directions() -> usize {
    8
}

fn default_arm_factor() -> f64 {
    1.5
}

fn default_storage() -> Storage {
    Storage::All
}

impl GridSpec {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            dt: None,
            directions: default_directions(),
            arm_factor: default_arm_factor(),
            grad_tol: None,
            storage: default_storage(),
        }
    }

    pub fn with_storage(mut self, storage: Storage) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
}

/// Largest stable time step, `h² / (2(n + |p - 2|) + 1)`.
pub fn cfl_bound(n: usize, p: f64, h: f64) -> f64 {
    h * h / (2.0 * (n as f64 + (p - 2.0).abs()) + 1.0)
}

/// Uniform space-time grid over a bounding box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub p: f64,
    pub h: f64,
    pub dt: f64,
    pub lo: Coords,
    /// Nodes per axis; the second entry is 1 when `n = 1`.
    pub counts: [usize; 2],
    pub t_lo: f64,
    /// Number of time steps; slices are `0..=steps`.
    pub steps: usize,
    pub arm_len: f64,
    pub directions: usize,
    pub grad_tol: f64,
}

impl Grid {
    pub fn new(dom: &Domain, params: &OperatorParams, spec: &GridSpec) -> Result<Self> {
        let n = dom.n();
        let p = params.p;
        let h = spec.h;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
        }
        if n != 1 && n != 2 {
            return Err(Error::InvalidParameter(format!("solver supports n = 1, 2, got {n}")));
        }
        if spec.directions < 2 || spec.directions % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "directions must be even and at least 2, got {}",
                spec.directions
            )));
        }
        let bb = dom.bbox();
        let extent = bb.spatial_extent();
        let duration = bb.duration();
        let bound = cfl_bound(n, p, h);
        let (dt, steps) = match spec.dt {
            Some(dt) => {
                if !(dt > 0.0) || dt > bound {
                    return Err(Error::CflViolation { dt, bound });
                }
                let steps = (duration / dt).ceil() as usize;
                (dt, steps)
            }
            None => {
                let steps = (duration / bound).ceil().max(1.0) as usize;
                (duration / steps as f64, steps)
            }
        };
        let mut counts = [1usize; 2];
        for i in 0..n {
            let r = (bb.hi[i] - bb.lo[i]) / h;
            let c = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() };
            counts[i] = c as usize + 1;
        }
        let arm_len = (spec.arm_factor * (h * extent).sqrt()).max(h);
        let rel = h / extent;
        let grad_tol = spec
            .grad_tol
            .unwrap_or_else(|| (p - 2.0).abs().max(1.0) * rel * rel / extent);
        Ok(Self {
            n,
            p,
            h,
            dt,
            lo: bb.lo.clone(),
            counts,
            t_lo: bb.t_lo,
            steps,
            arm_len,
            directions: spec.directions,
            grad_tol,
        })
    }

    pub fn node_count(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn node_x(&self, idx: usize) -> Coords {
        let i = idx % self.counts[0];
        let j = idx / self.counts[0];
        let mut x: Coords = smallvec::smallvec![self.lo[0] + i as f64 * self.h];
        if self.n == 2 {
            x.push(self.lo[1] + j as f64 * self.h);
        }
        x
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t_lo + m as f64 * self.dt
    }

    /// Time at which slice `m`'s active set is decided. The last slice lies on the
    /// top face of the box, which the open domain excludes, so it looks half a step back.
    pub fn mask_time(&self, m: usize) -> f64 {
        if m == self.steps {
            self.time(m) - 0.5 * self.dt
        } else {
            self.time(m)
        }
    }

    pub fn active_mask(&self, dom: &Domain, m: usize) -> Vec<bool> {
        let t = self.mask_time(m);
        (0..self.node_count())
            .map(|k| dom.membership(&SpacetimePoint { x: self.node_x(k), t }))
            .collect()
    }

    /// Index of the node at integer offset `(di, dj)`, if inside the grid.
    fn offset(&self, idx: usize, di: i64, dj: i64) -> Option<usize> {
        let i = (idx % self.counts[0]) as i64 + di;
        let j = (idx / self.counts[0]) as i64 + dj;
        if i < 0 || j < 0 || i >= self.counts[0] as i64 || j >= self.counts[1] as i64 {
            None
        } else {
            Some(i as usize + j as usize * self.counts[0])
        }
    }

    /// Same node layout and time levels.
    pub fn matches(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Values at one time level; `NaN` marks inactive nodes.
#[derive(Clone, Debug)]
pub struct Slice {
    pub m: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

/// Bitwise equality, so inactive (NaN) nodes compare equal.
impl PartialEq for Slice {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
            && self.t.to_bits() == other.t.to_bits()
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Slice {
    pub fn is_active(&self, idx: usize) -> bool {
        !self.values[idx].is_nan()
    }

    /// `(min, max)` over active nodes.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((a, b)) => Some((a.min(v), b.max(v))),
            })
    }

    /// Multilinear interpolation at `x`. Corners that are inactive or off the
    /// grid take `fallback` at the corner.
    pub fn interpolate(&self, grid: &Grid, x: &[f64], fallback: impl Fn(&[f64]) -> f64) -> f64 {
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        let mut off = [false; 2];
        for d in 0..grid.n {
            let s = (x[d] - grid.lo[d]) / grid.h;
            let i = s.floor();
            frac[d] = s - i;
            if i < 0.0 || i as usize + 1 >= grid.counts[d] {
                off[d] = true;
            } else {
                base[d] = i as usize;
            }
        }
        let corners = if grid.n == 1 { 2 } else { 4 };
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = [0usize; 2];
            let mut cx = [0.0; 2];
            let mut inside = true;
            for d in 0..grid.n {
                let bit = (c >> d) & 1;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                idx[d] = base[d] + bit;
                cx[d] = (x[d] - frac[d] * grid.h) + bit as f64 * grid.h;
                inside &= !off[d];
            }
            if w == 0.0 {
                continue;
            }
            let v = if inside {
                self.values[idx[0] + grid.counts[0] * idx[1]]
            } else {
                f64::NAN
            };
            acc += w * if v.is_nan() { fallback(&cx[..grid.n]) } else { v };
        }
        acc
    }
}

/// Numeric solution on the stored slices.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub slices: Vec<Slice>,
}

impl GridFunction {
    pub fn last(&self) -> Option<&Slice> {
        self.slices.last()
    }

    pub fn slice(&self, m: usize) -> Option<&Slice> {
        self.slices.iter().find(|s| s.m == m)
    }

    /// Active nodes of the stored slices as `(point, value)`.
    pub fn nodes(&self) -> impl Iterator<Item = (SpacetimePoint, f64)> + '_ {
        self.slices.iter().flat_map(move |s| {
            s.values
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .map(move |(k, v)| (SpacetimePoint { x: self.grid.node_x(k), t: s.t }, *v))
        })
    }
}

/// Source of a stencil value: a node of the previous slice, or a boundary
/// data point (stored after the nodes in the read buffer).
#[derive(Clone, Copy, Debug, PartialEq)]
enum Src {
    Node(u32),
    Data(u32),
}

impl Src {
    fn index(self, nodes: usize) -> u32 {
        match self {
            Src::Node(j) => j,
            Src::Data(k) => nodes as u32 + k,
        }
    }
}

/// Stencils for every node active on the previous slice.
struct Stencil {
    mask: Vec<bool>,
    data_pts: Vec<SpacetimePoint>,
    nodes: Vec<usize>,
    /// `2n` read-buffer indices per node.
    nb: Vec<u32>,
    /// Four `(index, weight)` terms per arm, `2K` arms per node; unused slots have weight 0.
    term_idx: Vec<u32>,
    term_w: Vec<f64>,
}

struct Directions {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Directions {
    fn new(k: usize) -> Self {
        let th: Vec<f64> = (0..2 * k).map(|i| std::f64::consts::PI * i as f64 / k as f64).collect();
        Self {
            cos: th.iter().map(|t| t.cos()).collect(),
            sin: th.iter().map(|t| t.sin()).collect(),
        }
    }
}

struct Builder<'a> {
    dom: &'a Domain,
    grid: &'a Grid,
    dirs: &'a Directions,
    t: f64,
    mask: &'a [bool],
    data_pts: Vec<SpacetimePoint>,
    seen: HashMap<Vec<u64>, u32>,
}

impl Builder<'_> {
    /// Registers a data point, reusing an identical earlier one.
    fn data(&mut self, x: Coords) -> Src {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let next = self.data_pts.len() as u32;
        let k = *self.seen.entry(key).or_insert(next);
        if k == next {
            self.data_pts.push(SpacetimePoint { x, t: self.t });
        }
        Src::Data(k)
    }

    fn inside(&self, x: &[f64]) -> bool {
        self.dom.membership(&SpacetimePoint { x: x.into(), t: self.t })
    }

    /// Neighbor at grid offset; inactive neighbors read data at the boundary crossing.
    fn neighbor(&mut self, idx: usize, axis: usize, sign: i64) -> Src {
        let (di, dj) = if axis == 0 { (sign, 0) } else { (0, sign) };
        if let Some(j) = self.grid.offset(idx, di, dj) {
            if self.mask[j] {
                return Src::Node(j as u32);
            }
        }
        let x = self.grid.node_x(idx);
        let mut y = x.clone();
        y[axis] += sign as f64 * self.grid.h;
        let z = project_to_boundary(
            self.dom,
            &SpacetimePoint { x, t: self.t },
            &SpacetimePoint { x: y, t: self.t },
        );
        self.data(z.x)
    }

    fn arm(&mut self, idx: usize, k: usize, out: &mut Vec<(Src, f64)>) {
        let g = self.grid;
        let x = g.node_x(idx);
        let d = g.arm_len;
        let (c, s) = (self.dirs.cos[k], self.dirs.sin[k]);
        let at = |r: f64| -> Coords { smallvec::smallvec![x[0] + r * c, x[1] + r * s] };
        let walk = (2.0 * d / g.h).ceil() as usize;
        let mut last_in = x.clone();
        for j in 1..=walk {
            let y = at(d * j as f64 / walk as f64);
            if !self.inside(&y) {
                let end = at(d);
                let src = if j == walk || !self.inside(&end) {
                    self.data(end)
                } else {
                    let z = project_to_boundary(
                        self.dom,
                        &SpacetimePoint { x: last_in.clone(), t: self.t },
                        &SpacetimePoint { x: y, t: self.t },
                    );
                    self.data(z.x)
                };
                out.push((src, 1.0));
                return;
            }
            last_in = y;
        }
        // Bilinear interpolation at the endpoint.
        let y = at(d);
        let fx = (y[0] - g.lo[0]) / g.h;
        let fy = (y[1] - g.lo[1]) / g.h;
        let (i0, j0) = (fx.floor(), fy.floor());
        let (sx, sy) = (fx - i0, fy - j0);
        for (di, dj, w) in [
            (0i64, 0i64, (1.0 - sx) * (1.0 - sy)),
            (1, 0, sx * (1.0 - sy)),
            (0, 1, (1.0 - sx) * sy),
            (1, 1, sx * sy),
        ] {
            if w == 0.0 {
                continue;
            }
            let (ci, cj) = (i0 as i64 + di, j0 as i64 + dj);
            let in_grid = ci >= 0 && cj >= 0 && (ci as usize) < g.counts[0] && (cj as usize) < g.counts[1];
            let corner = ci as usize + cj as usize * g.counts[0];
            let src = if in_grid && self.mask[corner] {
                Src::Node(corner as u32)
            } else {
                let cx: Coords = smallvec::smallvec![g.lo[0] + ci as f64 * g.h, g.lo[1] + cj as f64 * g.h];
                self.data(cx)
            };
            out.push((src, w));
        }
    }
}

impl Stencil {
    fn build(dom: &Domain, grid: &Grid, dirs: &Directions, m: usize, mask: &[bool]) -> Self {
        let mut b = Builder {
            dom,
            grid,
            dirs,
            t: grid.mask_time(m),
            mask,
            data_pts: Vec::new(),
            seen: HashMap::new(),
        };
        let nodes: Vec<usize> = (0..grid.node_count()).filter(|&k| mask[k]).collect();
        let mut nb = Vec::with_capacity(nodes.len() * 2 * grid.n);
        let mut terms = Vec::new();
        for &idx in &nodes {
            for axis in 0..grid.n {
                nb.push(b.neighbor(idx, axis, 1));
                nb.push(b.neighbor(idx, axis, -1));
            }
            if grid.n == 2 && needs_arms(grid.p) {
                for k in 0..2 * grid.directions {
                    let start = terms.len();
                    b.arm(idx, k, &mut terms);
                    terms.resize(start + 4, (Src::Node(idx as u32), 0.0));
                }
            }
        }
        let total = grid.node_count();
        Self {
            mask: mask.to_vec(),
            data_pts: b.data_pts,
            nodes,
            nb: nb.into_iter().map(|s: Src| s.index(total)).collect(),
            term_idx: terms.iter().map(|(s, _)| s.index(total)).collect(),
            term_w: terms.iter().map(|(_, w)| *w).collect(),
        }
    }
}

fn needs_arms(p: f64) -> bool {
    p != 2.0
}

/// Advances slice values by one explicit step.
struct Stepper<'a, F> {
    dom: &'a Domain,
    data: &'a F,
    grid: &'a Grid,
    dirs: Directions,
    stencil: Option<Stencil>,
    cylindrical: bool,
    lam: f64,
    ratio: f64,
    buf: Vec<f64>,
}

fn is_cylindrical(dom: &Domain) -> bool {
    matches!(dom.shape(), Shape::Cylinder { .. })
}

impl<'a, F: Fn(&SpacetimePoint) -> f64> Stepper<'a, F> {
    fn new(dom: &'a Domain, data: &'a F, grid: &'a Grid) -> Self {
        let hd = grid.h / grid.arm_len;
        Self {
            dom,
            data,
            grid,
            dirs: Directions::new(grid.directions),
            stencil: None,
            cylindrical: is_cylindrical(dom),
            lam: grid.dt / (grid.h * grid.h),
            ratio: hd * hd,
            buf: Vec::new(),
        }
    }

    /// Values at slice `m` from slice `m - 1` with active sets `prev_mask`, `mask`.
    fn advance(&mut self, prev: &[f64], prev_mask: &[bool], mask: &[bool], m: usize) -> Vec<f64> {
        let g = self.grid;
        let rebuild = match &self.stencil {
            Some(s) => !self.cylindrical || s.mask != prev_mask,
            None => true,
        };
        if rebuild {
            self.stencil = Some(Stencil::build(self.dom, g, &self.dirs, m - 1, prev_mask));
        }
        let st = self.stencil.as_mut().expect("stencil built");
        let t_prev = g.time(m - 1);
        self.buf.clear();
        self.buf.extend_from_slice(prev);
        for pt in st.data_pts.iter_mut() {
            pt.t = t_prev;
            self.buf.push((self.data)(pt));
        }
        let st = &*st;
        let buf = &self.buf;
        let read = |i: u32| buf[i as usize];

        let mut out = vec![f64::NAN; g.node_count()];
        let p = g.p;
        let kdir = g.directions;
        let mut arms = vec![0.0; 2 * kdir];
        for (pos, &idx) in st.nodes.iter().enumerate() {
            if !mask[idx] {
                continue;
            }
            let u0 = prev[idx];
            if g.n == 1 {
                let (a, b) = (read(st.nb[2 * pos]), read(st.nb[2 * pos + 1]));
                out[idx] = u0 + self.lam * (p - 1.0) * (a + b - 2.0 * u0);
                continue;
            }
            let nb = &st.nb[4 * pos..4 * pos + 4];
            let (e, w, nn, s) = (read(nb[0]), read(nb[1]), read(nb[2]), read(nb[3]));
            let lap5 = e + w + nn + s - 4.0 * u0;
            if !needs_arms(p) {
                out[idx] = u0 + self.lam * lap5;
                continue;
            }
            let gx = (e - w) / (2.0 * g.h);
            let gy = (nn - s) / (2.0 * g.h);
            let gnorm = (gx * gx + gy * gy).sqrt();
            let base = pos * 8 * kdir;
            let ti = &st.term_idx[base..base + 8 * kdir];
            let tw = &st.term_w[base..base + 8 * kdir];
            for (k, arm) in arms.iter_mut().enumerate() {
                let (i, w) = (&ti[4 * k..4 * k + 4], &tw[4 * k..4 * k + 4]);
                *arm = w[0] * read(i[0]) + w[1] * read(i[1]) + w[2] * read(i[2]) + w[3] * read(i[3]);
            }
            let second = |k: usize| arms[k] + arms[k + kdir] - 2.0 * u0;
            let update = if p > 2.0 {
                let sdir = if gnorm > g.grad_tol {
                    let (mut mx, mut mn) = (arms[0], arms[0]);
                    for &a in &arms[1..] {
                        if a > mx {
                            mx = a;
                        }
                        if a < mn {
                            mn = a;
                        }
                    }
                    mx + mn - 2.0 * u0
                } else {
                    (0..kdir).map(second).fold(f64::INFINITY, f64::min)
                };
                lap5 + (p - 2.0) * self.ratio * sdir
            } else {
                let pair = |k: usize| (p - 1.0) * second(k) + second((k + kdir / 2) % kdir);
                let sdir = if gnorm > g.grad_tol {
                    let (nx, ny) = (gx / gnorm, gy / gnorm);
                    let mut best = 0;
                    let mut best_c = -1.0;
                    for k in 0..kdir {
                        let c = (self.dirs.cos[k] * nx + self.dirs.sin[k] * ny).abs();
                        if c > best_c {
                            best_c = c;
                            best = k;
                        }
                    }
                    pair(best)
                } else {
                    (0..kdir).map(pair).fold(f64::INFINITY, f64::min)
                };
                self.ratio * sdir
            };
            out[idx] = u0 + self.lam * update;
        }
        // Newly activated nodes take data where the node entered the domain.
        if mask == prev_mask {
            return out;
        }
        let (t_now, t_before) = (g.mask_time(m), g.mask_time(m - 1));
        for idx in 0..g.node_count() {
            if mask[idx] && !prev_mask[idx] {
                let x = g.node_x(idx);
                let z = project_to_boundary(
                    self.dom,
                    &SpacetimePoint { x: x.clone(), t: t_now },
                    &SpacetimePoint { x, t: t_before },
                );
                out[idx] = (self.data)(&z);
            }
        }
        out
    }
}

/// One explicit step from slice `m - 1` to slice `m`.
pub fn step<F: Fn(&SpacetimePoint) -> f64>(
    dom: &Domain,
    data: &F,
    grid: &Grid,
    prev: &Slice,
) -> Result<Slice> {
    let m = prev.m + 1;
    if m > grid.steps {
        return Err(Error::InvalidParameter("no slice after the last".into()));
    }
    let prev_mask: Vec<bool> = prev.values.iter().map(|v| !v.is_nan()).collect();
    let mask = grid.active_mask(dom, m);
    let mut st = Stepper::new(dom, data, grid);
    let values = st.advance(&prev.values, &prev_mask, &mask, m);
    Ok(Slice { m, t: grid.time(m), values })
}

/// Solves with boundary data `data`, calling `observer` on every slice.
pub fn solve_observed<F, O>(
    dom: &Domain,
    data: &F,
    params: &OperatorParams,
    spec: &GridSpec,
    mut observer: O,
) -> Result<GridFunction>
where
    F: Fn(&SpacetimePoint) -> f64,
    O: FnMut(&Grid, &Slice),
{
    let grid = Grid::new(dom, params, spec)?;
    let mut slices = Vec::new();
    let mut m0 = None;
    let mut mask = Vec::new();
    for m in 0..=grid.steps {
        mask = grid.active_mask(dom, m);
        if mask.iter().any(|&a| a) {
            m0 = Some(m);
            break;
        }
    }
    let m0 = m0.ok_or(Error::EmptyDomain)?;
    let t0 = grid.time(m0);
    let values: Vec<f64> = (0..grid.node_count())
        .map(|k| if mask[k] { data(&SpacetimePoint { x: grid.node_x(k), t: t0 }) } else { f64::NAN })
        .collect();
    let mut cur = Slice { m: m0, t: t0, values };
    observer(&grid, &cur);
    let keep = |m: usize| match spec.storage {
        Storage::All => true,
        Storage::Stride(k) => k > 0 && (m - m0) % k == 0,
        Storage::Last => false,
    };
    let mut stepper = Stepper::new(dom, data, &grid);
    // Cylinder membership does not depend on time strictly inside the box.
    let fixed = is_cylindrical(dom);
    for m in m0 + 1..=grid.steps {
        let next_mask = if fixed { mask.clone() } else { grid.active_mask(dom, m) };
        let values = stepper.advance(&cur.values, &mask, &next_mask, m);
        let next = Slice { m, t: grid.time(m), values };
        observer(&grid, &next);
        if keep(cur.m) {
            slices.push(cur);
        }
        cur = next;
        mask = next_mask;
    }
    slices.push(cur);
    drop(stepper);
    Ok(GridFunction { grid, slices })
}

pub fn solve<F: Fn(&SpacetimePoint) -> f64>(
    dom: &Domain,
    data: &F,
    params: &OperatorParams,
    spec: &GridSpec,
) -> Result<GridFunction> {
    solve_observed(dom, data, params, spec, |_, _| {})
}

/// True iff `u >= v` at every node active in both, on every shared slice.
pub fn discrete_comparison(u: &GridFunction, v: &GridFunction) -> Result<bool> {
    if !u.grid.matches(&v.grid) || u.slices.len() != v.slices.len() {
        return Err(Error::GridMismatch);
    }
    for (a, b) in u.slices.iter().zip(&v.slices) {
        if a.m != b.m {
            return Err(Error::GridMismatch);
        }
        for (x, y) in a.values.iter().zip(&b.values) {
            if x.is_nan() != y.is_nan() {
                return Err(Error::GridMismatch);
            }
            if !x.is_nan() && x < y {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured(n: usize, p: f64) -> impl Fn(&SpacetimePoint) -> f64 {
        move |xi: &SpacetimePoint| xi.x.iter().map(|v| v * v).sum::<f64>() + 2.0 * (n as f64 + p - 2.0) * xi.t
    }

    #[test]
    fn linear_is_preserved_by_one_heat_step() {
        let dom = Domain::box_cylinder(&[-1.0, -1.0], &[1.0, 1.0], -1.0, 0.0).unwrap();
        let params = OperatorParams::new(2.0).unwrap();
        let grid = Grid::new(&dom, &params, &GridSpec::new(0.125)).unwrap();
        let f = |xi: &SpacetimePoint| xi.x[0];
        let mask = grid.active_mask(&dom, 1);
        let values = (0..grid.node_count())
            .map(|k| if mask[k] { grid.node_x(k)[0] } else { f64::NAN })
            .collect();
        let s = Slice { m: 1, t: grid.time(1), values };
        let next = step(&dom, &f, &grid, &s).unwrap();
        for (k, v) in next.values.iter().enumerate() {
            if !v.is_nan() {
                assert!((v - grid.node_x(k)[0]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let dom = Domain::ball_cylinder(&[0.0, 0.0], 1.0, -0.5, 0.0).unwrap();
        for p in [1.5, 2.0, 3.5] {
            let sol = solve(&dom, &|_: &SpacetimePoint| 0.7, &OperatorParams::new(p).unwrap(), &GridSpec::new(0.125))
                .unwrap();
            for (_, v) in sol.nodes() {
                assert!((v - 0.7).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn manufactured_exact_in_one_dimension() {
        let dom = Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let f = manufactured(1, p);
            let sol = solve(&dom, &f, &OperatorParams::new(p).unwrap(), &GridSpec::new(1.0 / 16.0)).unwrap();
            let err = sol.nodes().map(|(xi, v)| (v - f(&xi)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "p = {p}: {err}");
        }
    }

    #[test]
    fn cfl_violation_reported() {
        let dom = Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0).unwrap();
        let spec = GridSpec::new(0.1).with_dt(0.01);
        assert!(matches!(
            Grid::new(&dom, &OperatorParams::new(2.0).unwrap(), &spec),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn comparison_with_shifted_data() {
        let dom = Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0).unwrap();
        let params = OperatorParams::new(3.0).unwrap();
        let spec = GridSpec::new(0.125);
        let f = |xi: &SpacetimePoint| (3.0 * xi.x[0]).sin() + xi.t;
        let g = |xi: &SpacetimePoint| f(xi) + 1.0;
        let u = solve(&dom, &f, &params, &spec).unwrap();
        let v = solve(&dom, &g, &params, &spec).unwrap();
        assert!(discrete_comparison(&v, &u).unwrap());
        assert!(!discrete_comparison(&u, &v).unwrap());
        for (a, b) in u.slices.iter().zip(&v.slices) {
            for (x, y) in a.values.iter().zip(&b.values) {
                if !x.is_nan() {
                    assert!((y - x - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn petrovskii_nodes_activate_over_time() {
        let dom = Domain::petrovskii(4.0, 1).unwrap();
        let params = OperatorParams::new(2.0).unwrap();
        let sol = solve(&dom, &|xi: &SpacetimePoint| xi.x[0].abs(), &params, &GridSpec::new(1.0 / 32.0)).unwrap();
        let counts: Vec<usize> = sol
            .slices
            .iter()
            .map(|s| s.values.iter().filter(|v| !v.is_nan()).count())
            .collect();
        assert!(counts.iter().max().unwrap() > counts.first().unwrap());
        assert!(sol.nodes().all(|(_, v)| v.is_finite()));
    }
}
