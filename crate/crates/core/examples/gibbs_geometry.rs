//! KMS geometry of a small random Hamiltonian: Gibbs state, chi-squared, gap and mixing time
//! of the reset sampler.

use gibbs_nd::channels::{build_sampler, SamplerSpec};
use gibbs_nd::gibbs::{chi2_divergence, kms_inner, make_gibbs_context, mixing_time_upper, spectral_gap};
use gibbs_nd::linalg::random::{random_hermitian_normed, random_state, rng};

fn main() -> gibbs_nd::Result<()> {
    let mut r = rng(3);
    let h = random_hermitian_normed(&mut r, 4, 1.0);
    let ctx = make_gibbs_context(&h, 2.0)?;
    println!("spectrum {:?}", ctx.eig.values);
    println!("sigma_min {:.4e}", ctx.sigma_min);

    let rho = random_state(&mut r, 4);
    println!("chi2(rho, sigma) = {:.4}", chi2_divergence(&rho, &ctx)?);
    println!("<rho, rho>_KMS = {:.4}", kms_inner(&rho, &rho, &ctx)?.re);

    for gamma in [0.1, 0.5, 1.0] {
        let n = build_sampler(&SamplerSpec::Reset { gamma }, &ctx)?;
        let s = n.superop();
        println!("reset gamma={gamma}: gap {:.4} t_mix(0.01) {}", spectral_gap(&s, &ctx)?, mixing_time_upper(&s, &ctx, 0.01)?);
    }
    Ok(())
}
