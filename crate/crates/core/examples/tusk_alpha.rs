//! Contraction factor of the tusk-house problem and the Hölder exponent it
//! guarantees at the tusk's tip, under grid refinement.

use pparabolic::barriers::{estimate_alpha_and_beta, TuskHouseBarrierSpec};
use pparabolic::operator::OperatorParams;
use pparabolic::regularity::tusk_holder_exponent;

fn main() -> pparabolic::error::Result<()> {
    let spec = TuskHouseBarrierSpec::new(&[1.0], 0.5, 2.0)?;
    let params = OperatorParams::new(2.0)?;
    for k in 4..=7 {
        let ab = estimate_alpha_and_beta(&spec, &params, 0.5f64.powi(k))?;
        println!(
            "h=1/{:<4} α1={:.5} α={:.5} β={:.5} exponent for γ=1: {:.5}",
            1 << k,
            ab.alpha1,
            ab.alpha,
            ab.beta,
            tusk_holder_exponent(1.0, ab.alpha)
        );
    }
    Ok(())
}
