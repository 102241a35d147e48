//! The normalized p-Laplacian and the classical supersolution criterion.
//!
//! For a jet with nonzero gradient,
//! `Δ_p^N u = Δu + (p - 2) ⟨D²u ν, ν⟩` with `ν = ∇u / |∇u|`.
//! At gradient zeros the operator is replaced by the eigenvalue envelope:
//! the smallest Hessian eigenvalue when `p >= 2` and the largest when `p < 2`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Jet2, ScalarField, SymMatrix};
use crate::geometry::{Domain, SpacetimePoint};

/// Default gradient threshold for exact jets.
pub const DEFAULT_GRAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub p: f64,
    /// Gradients with norm at or below this are treated as zero.
    pub grad_tol: f64,
    /// Allowed negative residual before a sample fails.
    pub slack: f64,
}

impl OperatorParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must satisfy 1 < p < ∞, got {p}")));
        }
        Ok(Self {
            p,
            grad_tol: DEFAULT_GRAD_TOL,
            slack: 0.0,
        })
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be nonnegative, got {tol}")));
        }
        self.grad_tol = tol;
        Ok(self)
    }

    pub fn with_slack(mut self, slack: f64) -> Result<Self> {
        if !(slack >= 0.0) {
            return Err(Error::InvalidParameter(format!("slack must be nonnegative, got {slack}")));
        }
        self.slack = slack;
        Ok(self)
    }
}

/// `⟨D²u ν, ν⟩` with `ν = ∇u/|∇u|`.
pub fn normalized_inf_laplacian(j: &Jet2, grad_tol: f64) -> Result<f64> {
    let norm = j.grad_norm();
    if norm <= grad_tol {
        return Err(Error::ZeroGradient { norm, tol: grad_tol });
    }
    let nu: Vec<f64> = j.grad.iter().map(|g| g / norm).collect();
    Ok(j.hess.quad_form(&nu))
}

/// `Δu + (p - 2) Δ_∞^N u`.
pub fn normalized_p_laplacian(j: &Jet2, params: &OperatorParams) -> Result<f64> {
    let inf = normalized_inf_laplacian(j, params.grad_tol)?;
    Ok(j.hess.trace() + (params.p - 2.0) * inf)
}

/// Eigenvalues in ascending order. Closed form for `n <= 2`, cyclic Jacobi otherwise.
pub fn sym_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    match m.n() {
        0 => vec![],
        1 => vec![m.get(0, 0)],
        2 => {
            let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        }
        n => jacobi_eigenvalues(m, n),
    }
}

fn jacobi_eigenvalues(m: &SymMatrix, n: usize) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue if `p >= 2`, largest if `p < 2`.
pub fn envelope_eigenvalue(hess: &SymMatrix, p: f64) -> f64 {
    let ev = sym_eigenvalues(hess);
    if ev.is_empty() {
        return 0.0;
    }
    if p >= 2.0 {
        ev[0]
    } else {
        ev[ev.len() - 1]
    }
}

/// Which branch of the classical criterion a sample fell into.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Branch {
    /// `∇u ≠ 0`; carries `u_t - Δ_p^N u`.
    GradNonzero(f64),
    /// `∇u = 0` and `D²u >= 0`; carries `u_t`.
    GradZeroPsd(f64),
    /// `∇u = 0` and `D²u` not PSD; no requirement.
    GradZeroVacuous,
}

impl Branch {
    pub fn residual(&self) -> Option<f64> {
        match self {
            Branch::GradNonzero(r) | Branch::GradZeroPsd(r) => Some(*r),
            Branch::GradZeroVacuous => None,
        }
    }
}

/// Supersolution residual of a jet under the classical criterion.
pub fn supersolution_branch(j: &Jet2, params: &OperatorParams) -> Branch {
    if j.grad_norm() > params.grad_tol {
        let lap = normalized_p_laplacian(j, params).expect("gradient above threshold");
        Branch::GradNonzero(j.dt - lap)
    } else {
        let ev = sym_eigenvalues(&j.hess);
        if ev.first().map_or(true, |&l| l >= -params.slack) {
            Branch::GradZeroPsd(j.dt)
        } else {
            Branch::GradZeroVacuous
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub grad_nonzero: usize,
    pub grad_zero_psd: usize,
    pub grad_zero_vacuous: usize,
}

/// Outcome of a sampled classical criterion check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    pub n_samples: usize,
    pub n_failed: usize,
    /// Smallest residual over non-vacuous samples, `None` if every sample was vacuous.
    pub worst_residual: Option<f64>,
    pub worst_point: Option<SpacetimePoint>,
    pub branch_counts: BranchCounts,
}

fn lex_cmp(a: &SpacetimePoint, b: &SpacetimePoint) -> Ordering {
    for (x, y) in a.x.iter().zip(&b.x) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.t.total_cmp(&b.t)
}

/// Aggregates per-sample branches. Worst residual is chosen by value, then
/// lexicographic location, so the result does not depend on sample order.
pub fn summarize(branches: &[(SpacetimePoint, Branch)], slack: f64) -> CheckReport {
    let mut counts = BranchCounts::default();
    let mut worst: Option<(f64, &SpacetimePoint)> = None;
    let mut failed = 0;
    for (pt, b) in branches {
        match b {
            Branch::GradNonzero(_) => counts.grad_nonzero += 1,
            Branch::GradZeroPsd(_) => counts.grad_zero_psd += 1,
            Branch::GradZeroVacuous => counts.grad_zero_vacuous += 1,
        }
        if let Some(r) = b.residual() {
            if !(r >= -slack) {
                failed += 1;
            }
            let replace = match worst {
                None => true,
                Some((w, wp)) => match r.total_cmp(&w) {
                    Ordering::Less => true,
                    Ordering::Equal => lex_cmp(pt, wp) == Ordering::Less,
                    Ordering::Greater => false,
                },
            };
            if replace {
                worst = Some((r, pt));
            }
        }
    }
    CheckReport {
        pass: failed == 0,
        n_samples: branches.len(),
        n_failed: failed,
        worst_residual: worst.map(|w| w.0),
        worst_point: worst.map(|w| w.1.clone()),
        branch_counts: counts,
    }
}

/// Classical supersolution criterion at each sample.
pub fn classical_supersolution_check(
    field: &ScalarField,
    dom: &Domain,
    params: &OperatorParams,
    samples: &[SpacetimePoint],
) -> Result<CheckReport> {
    check_signed(field, dom, params, samples, false)
}

/// Subsolution check: supersolution check of `-u`.
pub fn classical_subsolution_check(
    field: &ScalarField,
    dom: &Domain,
    params: &OperatorParams,
    samples: &[SpacetimePoint],
) -> Result<CheckReport> {
    check_signed(field, dom, params, samples, true)
}

fn check_signed(
    field: &ScalarField,
    dom: &Domain,
    params: &OperatorParams,
    samples: &[SpacetimePoint],
    negate: bool,
) -> Result<CheckReport> {
    let mut branches = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        if !dom.membership(s) {
            return Err(Error::Precondition(format!("sample {index} at {s} is outside the domain")));
        }
        let jet = field.eval_jet(s).map_err(|e| Error::SingularSample {
            index,
            reason: e.to_string(),
        })?;
        let jet = if negate { jet.negated() } else { jet };
        branches.push((s.clone(), supersolution_branch(&jet, params)));
    }
    Ok(summarize(&branches, params.slack))
}
