//! Energy quasi-locality of K1^dag K1 + K2^dag K2 and the rejection-branch precondition report.

use gibbs_nd::blockenc::{precheck_implement_r, quasi_local_from_channel, quasi_local_plan};
use gibbs_nd::channels::{build_db_channel, DbParams};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::linalg::random::{random_hermitian_normed, rng};

fn main() -> gibbs_nd::Result<()> {
    let mut r = rng(12);
    let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), 1.0)?;
    let a = random_hermitian_normed(&mut r, 4, 1.0);
    let (c, u, eps) = (0.1, 0.4, 0.1);

    let plan = quasi_local_plan(&ctx, eps, c, u)?;
    println!("{plan:?}");
    let q = quasi_local_from_channel(&a, &ctx, DbParams { u, c, tau: plan.tau }, plan.k, plan.omega)?;
    println!("residual {:.3e} (target {:.3e}), out-of-band max {:.1e}", q.residual, plan.eps_prime, q.out_of_band);

    let ch = build_db_channel(&a, &ctx, DbParams { u, c, tau: plan.tau })?;
    let o = &(&ch.kraus[0].adjoint() * &ch.kraus[0]) + &(&ch.kraus[1].adjoint() * &ch.kraus[1]);
    let rep = precheck_implement_r(&o, &ctx, eps)?;
    println!("{}", serde_json::to_string_pretty(&rep).unwrap());
    Ok(())
}
