//! Classifies the top center of a cylinder and the tip of a tusk house, and
//! fits a Hölder exponent to the tusk gaps.

use pparabolic::geometry::{Domain, SpacetimePoint};
use pparabolic::operator::OperatorParams;
use pparabolic::regularity::{classify, fit_holder, ClassifyConfig};

fn main() -> pparabolic::error::Result<()> {
    let params = OperatorParams::new(2.0)?;
    let cfg = ClassifyConfig::default();
    let origin = SpacetimePoint::new(&[0.0], 0.0);
    let cases = [
        ("cylinder top", Domain::box_cylinder(&[-1.0], &[1.0], -1.0, 0.0)?),
        ("tusk tip", Domain::tusk_house(&[1.0], 0.5, 2.0)?),
    ];
    for (name, dom) in cases {
        let rep = classify(&dom, &origin, &params, &cfg)?;
        println!("{name}: {}", rep.verdict.as_str());
        for (r, g) in &rep.gaps {
            println!("  r={r:.4} gap={g:.4}");
        }
        if let Ok(fit) = fit_holder(&rep.gaps) {
            println!("  fitted β={:.3} C={:.3} residual={:.3}", fit.beta, fit.c, fit.residual);
        }
    }
    Ok(())
}
