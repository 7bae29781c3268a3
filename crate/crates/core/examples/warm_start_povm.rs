//! Two-outcome POVM: post-measurement states stay warm.

use gibbs_nd::channels::{build_povm, post_select, warm_start_bound, warm_start_cf};
use gibbs_nd::gibbs::{chi2_divergence, make_gibbs_context};
use gibbs_nd::linalg::random::{random_hermitian_normed, random_state, rng};

fn main() -> gibbs_nd::Result<()> {
    let mut r = rng(5);
    let beta = 2.0;
    let tau = 2.0 * beta;
    let u = 0.25;
    let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), beta)?;
    let a = random_hermitian_normed(&mut r, 4, 1.0);
    let m = build_povm(&a, &ctx, u, tau)?;
    let cf = warm_start_cf(beta, tau);

    for _ in 0..5 {
        let rho = &random_state(&mut r, 4).scale_real(0.2) + &ctx.sigma.scale_real(0.8);
        let chi = chi2_divergence(&rho, &ctx)?;
        let bound = warm_start_bound(chi, u, cf);
        let mut worst: f64 = 0.0;
        for branch in 0..2 {
            let (post, _) = post_select(&m, branch, &rho)?;
            worst = worst.max(chi2_divergence(&post, &ctx)?);
        }
        println!("chi2 in {chi:.4} -> worst out {worst:.4} (bound {bound:.4})");
    }
    Ok(())
}
