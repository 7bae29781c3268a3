//! Single-trajectory estimation of Tr(sigma A) with the detailed-balance channel.

use gibbs_nd::channels::SamplerSpec;
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::linalg::pauli;
use gibbs_nd::protocols::{prepare_db_protocol, ProtocolConfig};

fn main() -> gibbs_nd::Result<()> {
    let ctx = make_gibbs_context(&pauli::string("ZZ")?.scale_real(0.5), 1.0)?;
    let a = pauli::string("XI")?;
    let cfg = ProtocolConfig { eps: 0.2, eta: 0.1, ..Default::default() };
    let prepared = prepare_db_protocol(&a, &ctx, &SamplerSpec::Reset { gamma: 0.5 }, &cfg)?;
    let d = &prepared.diagnostics;
    println!("burn-in {}  T {}  var {:.2}  t_aut {:.3}  theta bound {:?}", d.burn_in, d.t_len, d.var, d.t_aut, d.theta_bound);
    for seed in 0..5 {
        let res = prepared.run(seed, 0)?;
        println!("seed {seed}: estimate {:+.4} truth {:+.4} error {:.4}", res.estimate, res.truth, res.abs_error);
    }
    Ok(())
}
