//! Grid convergence on the cylinder (-1, 1) x (-1, 0) against closed-form
//! solutions: the 1-D quadratic (reproduced exactly) and the first heat mode.

use std::f64::consts::PI;

use pparabolic::geometry::{Domain, SpacetimePoint};
use pparabolic::operator::OperatorParams;
use pparabolic::solver::{solve_observed, GridSpec, Storage};

fn max_error(
    dom: &Domain,
    f: impl Fn(&SpacetimePoint) -> f64,
    p: f64,
    h: f64,
) -> pparabolic::error::Result<f64> {
    let mut err: f64 = 0.0;
    let spec = GridSpec::new(h).with_storage(Storage::Last);
    solve_observed(dom, &f, &OperatorParams::new(p)?, &spec, |g, s| {
        for (k, v) in s.values.iter().enumerate() {
            if !v.is_nan() {
                err = err.max((v - f(&SpacetimePoint::new(&g.node_x(k), s.t))).abs());
            }
        }
    })?;
    Ok(err)
}

fn main() -> pparabolic::error::Result<()> {
    let dom = Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0)?;
    for p in [1.5, 2.0, 3.0] {
        let c = 2.0 * (p - 1.0);
        let e = max_error(&dom, |xi| xi.x[0] * xi.x[0] + c * xi.t, p, 1.0 / 64.0)?;
        println!("quadratic p={p}: max error {e:.2e}");
    }

    let heat = |xi: &SpacetimePoint| (-PI * PI * (xi.t + 1.0)).exp() * (PI * xi.x[0]).sin();
    let mut prev = None;
    for k in 5..=8 {
        let h = 0.5f64.powi(k);
        let e = max_error(&dom, heat, 2.0, h)?;
        let ratio = prev.map(|q: f64| q / e);
        println!("heat h=1/{}: max error {e:.3e} ratio {}", 1 << k, ratio.map_or("-".into(), |r| format!("{r:.2}")));
        prev = Some(e);
    }
    Ok(())
}
