//! Trajectory distributions of an instrument and a perturbed implementation stay close.

use gibbs_nd::channels::{build_db_channel, build_sampler, DbParams, SamplerSpec};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::instrument::{compose_db_instrument, default_probe_set, perturb_and_tv};
use gibbs_nd::linalg::{pauli, ComplexMatrix};

fn main() -> gibbs_nd::Result<()> {
    let ctx = make_gibbs_context(&pauli::z(), 1.0)?;
    let n = build_sampler(&SamplerSpec::Reset { gamma: 0.5 }, &ctx)?;
    let ideal = compose_db_instrument(&build_db_channel(&pauli::x(), &ctx, DbParams { u: 0.3, c: 0.2, tau: 2.0 })?, &n)?;
    let probes = default_probe_set(&ctx, 0);
    for delta in [0.0, 0.01, 0.05, 0.1] {
        let a = &pauli::x().scale_real((1.0 - delta) as f64) + &pauli::y().scale_real(delta);
        let noisy = compose_db_instrument(&build_db_channel(&a, &ctx, DbParams { u: 0.3, c: 0.2, tau: 2.0 })?, &n)?;
        let rho = &ctx.sigma.scale_real(1.0 - delta) + &ComplexMatrix::identity(2).scale_real(delta / 2.0);
        let rep = perturb_and_tv(&ideal, &noisy, &ctx.sigma, &rho, 4, &probes, None)?;
        println!("delta {delta:.2}: TV {:.3e} <= (eta + T eps)/2 = {:.3e}", rep.tv, rep.bound);
    }
    Ok(())
}
