//! Sample-based verification of the three explicit barrier families.

use pparabolic::barriers::{
    make_exterior_ball_barrier, verify_barrier, verify_irregularity_barrier, IrregularityBarrier,
    PetrovskiiBarrier, Sampler,
};
use pparabolic::geometry::{Domain, SpacetimePoint};
use pparabolic::operator::OperatorParams;

fn main() -> pparabolic::error::Result<()> {
    let sampler = Sampler::default();

    for (p, n) in [(1.5, 1), (2.0, 1), (3.0, 2)] {
        let bar = PetrovskiiBarrier::new(p, n)?;
        let dom = Domain::petrovskii(bar.k, n)?;
        let origin = SpacetimePoint::new(&vec![0.0; n], 0.0);
        let rep = verify_barrier(&bar.field(), &dom, &origin, &OperatorParams::new(p)?, &sampler)?;
        println!(
            "petrovskii p={p} n={n}: pass={} worst residual {:.3e} over {} samples",
            rep.pass,
            rep.residual.worst_residual.unwrap_or(f64::NAN),
            rep.residual.n_samples
        );
    }

    for (p, n, a) in [(2.0, 1, 8.0), (3.0, 1, 16.0)] {
        let bar = IrregularityBarrier::new(p, n, a, None)?;
        let dom = Domain::petrovskii(a, n)?;
        let rep = verify_irregularity_barrier(&bar, &dom, &OperatorParams::new(p)?, &sampler)?;
        println!(
            "irregularity p={p} n={n} A={a}: pass={} tau={:?} identity error {:.1e}",
            rep.pass,
            rep.tau,
            rep.boundary_identity.and_then(|c| c.worst).unwrap_or(f64::NAN)
        );
    }

    let xi0 = SpacetimePoint::new(&[0.0], 0.0);
    for (xi1, r1) in [(SpacetimePoint::new(&[1.0], 0.0), 1.0), (SpacetimePoint::new(&[0.0], -2.0), 2.0)] {
        let bar = make_exterior_ball_barrier(&xi0, &xi1, r1, 2.0)?;
        let rep = verify_barrier(&bar.field(), &bar.neighborhood()?, &xi0, &OperatorParams::new(2.0)?, &sampler)?;
        println!("exterior ball ξ1={xi1} R1={r1}: j={:.3} δ={:.3} pass={}", bar.j, bar.delta, rep.pass);
    }
    Ok(())
}
