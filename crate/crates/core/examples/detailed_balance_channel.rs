//! The three-branch detailed-balance measurement channel and its estimator identity.

use gibbs_nd::channels::{build_db_channel, DbOverrides, DbParams};
use gibbs_nd::gibbs::{kms_db_residual, make_gibbs_context};
use gibbs_nd::linalg::random::{random_hermitian_normed, rng};
use gibbs_nd::linalg::trace_norm;

fn main() -> gibbs_nd::Result<()> {
    let mut r = rng(21);
    let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), 1.0)?;
    let a = random_hermitian_normed(&mut r, 4, 1.0);

    let params = DbParams::resolve(&a, &ctx, DbOverrides::default())?;
    println!("u = {:.4}, c = {:.4}, tau = {:.2}", params.u, params.c, params.tau);
    let m = build_db_channel(&a, &ctx, params)?;
    println!("labels {:?}, outcomes {:?}", m.labels, m.outcomes);
    println!("trace-preservation residual {:.2e}", m.tp_residual());
    println!("KMS detailed-balance residual {:.2e}", kms_db_residual(&m, &ctx)?);
    println!("|M(sigma) - sigma|_1 = {:.2e}", trace_norm(&(&m.superop().apply(&ctx.sigma) - &ctx.sigma))?);

    let p = m.probabilities(&ctx.sigma);
    println!("branch probabilities at sigma {p:?}");
    println!("estimator mean {:.12}", m.db_estimator_mean(&ctx.sigma).unwrap());
    println!("Tr(sigma A)    {:.12}", ctx.expectation(&a).re);
    Ok(())
}
