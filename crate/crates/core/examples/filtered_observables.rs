//! Gaussian-filtered observables, the imaginary time shift and the time-grid quadrature.

use gibbs_nd::filters::{filtered_exact, filtered_quadrature, imaginary_shift, quadrature_error_bound, FilterSpec, QuadratureGrid};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::linalg::random::{random_hermitian_normed, rng};
use gibbs_nd::linalg::op_norm;

fn main() -> gibbs_nd::Result<()> {
    let mut r = rng(8);
    let (beta, tau) = (1.0, 2.0);
    let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 8, 1.0), beta)?;
    let a = random_hermitian_normed(&mut r, 8, 1.0);

    let gauss = FilterSpec::gaussian(tau)?;
    let af = filtered_exact(&a, &ctx, &gauss)?;
    println!("|A| = {:.4}, |A_f| = {:.4}", op_norm(&a)?, op_norm(&af)?);
    println!("Tr(sigma A) = {:.6}, Tr(sigma A_f) = {:.6}", ctx.expectation(&a).re, ctx.expectation(&af).re);

    // sigma^{1/2} A_f sigma^{-1/2} is again a filtered operator.
    let s = -beta / 2.0;
    let shifted = imaginary_shift(&af, s, &ctx)?;
    let direct = filtered_exact(&a, &ctx, &FilterSpec::shifted(tau, s)?)?;
    println!("dual-path difference {:.2e}", op_norm(&(&shifted - &direct))?);
    println!("|A_f~| = {:.4} <= {:.4}", op_norm(&direct)?, (s * s / (2.0 * tau * tau)).exp());

    for m in [16, 64, 256] {
        let grid = QuadratureGrid::new(8.0 * tau, m)?;
        match filtered_quadrature(&a, &ctx.h, &gauss, &grid) {
            Ok(q) => {
                let err = op_norm(&(&q - &af))?;
                let bound = quadrature_error_bound(&gauss, &grid, ctx.h_norm, ctx.dim())?;
                println!("M = {m:4}: error {err:.3e} bound {bound:.3e}");
            }
            Err(e) => println!("M = {m:4}: {e}"),
        }
    }
    Ok(())
}
