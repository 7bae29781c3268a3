//! Autocorrelation time of the measurement record against the sampler's mixing time on a
//! three-site Ising chain, across inverse temperatures.

use gibbs_nd::channels::{DbOverrides, SamplerSpec};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::linalg::{op_norm, pauli};
use gibbs_nd::models::{single_site_paulis, tfim};
use gibbs_nd::protocols::{prepare_db_protocol, ProtocolConfig};

fn main() -> gibbs_nd::Result<()> {
    let h = tfim(3, 1.0)?;
    let h = h.scale_real(1.0 / op_norm(&h)?);
    let a = pauli::string("ZZI")?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>12} {:>10}", "beta", "sigma_min", "gap", "t_aut", "theta_bound", "t_mix");
    for beta in [0.5, 1.0, 2.0, 4.0] {
        let ctx = make_gibbs_context(&h, beta)?;
        let sampler = SamplerSpec::PauliDbMixture {
            jump_ops: single_site_paulis(3)?,
            params: DbOverrides { tau: Some(beta / 2.0), ..Default::default() },
        };
        let cfg = ProtocolConfig { eps: 0.1, eta: 0.1, burn_in: Some(0), t: Some(1000), ..Default::default() };
        let p = prepare_db_protocol(&a, &ctx, &sampler, &cfg)?;
        let d = &p.diagnostics;
        println!(
            "{beta:>5} {:>10.3e} {:>10.3e} {:>10.4} {:>12.4} {:>10}",
            ctx.sigma_min,
            d.gap,
            d.t_aut,
            d.theta_bound.unwrap_or(f64::NAN),
            d.t_mix_upper.map_or("-".into(), |t| t.to_string())
        );
    }
    Ok(())
}
