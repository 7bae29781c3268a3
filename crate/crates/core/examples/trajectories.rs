//! One-trajectory statistics of the measure-then-sample instrument: Monte Carlo against
//! enumeration, autocorrelation time and its spectral bound.

use gibbs_nd::channels::{build_db_channel, build_sampler, DbParams, SamplerSpec};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::instrument::{compose_db_instrument, exact_trajectory_distribution, sample_trajectories, summarize, t_aut, theta_gap_bound};
use gibbs_nd::linalg::pauli;

fn main() -> gibbs_nd::Result<()> {
    let ctx = make_gibbs_context(&pauli::z(), 1.0)?;
    let m = build_db_channel(&pauli::x(), &ctx, DbParams { u: 0.4, c: 0.25, tau: 3.0 })?;
    let gamma = 0.3;
    let n = build_sampler(&SamplerSpec::Reset { gamma }, &ctx)?;
    let inst = compose_db_instrument(&m, &n)?;

    let dist = exact_trajectory_distribution(&inst, &ctx.sigma, 3)?;
    println!("{} outcome sequences of length 3, total probability {:.12}", dist.len(), dist.values().sum::<f64>());

    let recs = sample_trajectories(&inst, &ctx.sigma, 2000, 17, 8)?;
    let s = summarize(&recs);
    // Outcomes are 1/(2c^2 u) on the first two branches and 0 on the third.
    println!("8 trajectories of 2000 steps: mean outcome {:.4}, estimate {:.4}, truth {:.4}", s.mean, s.mean - 1.0 / 0.4, ctx.expectation(&pauli::x()).re);

    let tb = theta_gap_bound(&m, gamma, &ctx)?;
    for t in [10, 100, 1000] {
        println!("t_aut,{t} = {:.4} (bound {:.4})", t_aut(&inst, &ctx, t)?, tb.bound);
    }
    Ok(())
}
