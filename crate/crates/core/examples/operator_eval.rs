//! Evaluates the normalized p-Laplacian on a few jets and fields, including
//! the envelope rule at a vanishing gradient.

use pparabolic::fields::{Jet2, ScalarField, SymMatrix};
use pparabolic::geometry::SpacetimePoint;
use pparabolic::operator::{
    envelope_eigenvalue, normalized_p_laplacian, supersolution_branch, OperatorParams,
};

fn main() -> pparabolic::error::Result<()> {
    let hess = SymMatrix::from_rows(&[&[2.0, 1.0], &[1.0, -1.0]]);
    let jet = Jet2::new(0.0, 0.0, &[1.0, 0.0], hess.clone());
    for p in [1.5, 2.0, 3.0, 8.0] {
        let params = OperatorParams::new(p)?;
        println!(
            "p = {p:>3}: Δ_p^N u = {:+.4}, envelope at ∇u = 0: {:+.4}",
            normalized_p_laplacian(&jet, &params)?,
            envelope_eigenvalue(&hess, p),
        );
    }

    // u = |x|² + 2(n + p - 2)t solves u_t = Δ_p^N u away from x = 0.
    let (n, p) = (2, 3.0);
    let u = ScalarField::norm_sq(n) + ScalarField::t(n) * (2.0 * (n as f64 + p - 2.0));
    let params = OperatorParams::new(p)?;
    for xi in [
        SpacetimePoint::new(&[0.3, -0.4], -0.5),
        SpacetimePoint::new(&[0.0, 0.0], -0.5),
    ] {
        let j = u.eval_jet(&xi)?;
        println!("at {xi}: {:?}", supersolution_branch(&j, &params));
    }
    Ok(())
}
