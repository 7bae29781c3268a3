//! Warm-start POVM protocol with remixing between measurements.

use gibbs_nd::channels::{DbOverrides, SamplerSpec};
use gibbs_nd::gibbs::make_gibbs_context;
use gibbs_nd::models::{single_site_paulis, tfim};
use gibbs_nd::linalg::{op_norm, pauli};
use gibbs_nd::protocols::{prepare_remix_protocol, ProtocolConfig};

fn main() -> gibbs_nd::Result<()> {
    let h = tfim(2, 1.0)?;
    let h = h.scale_real(1.0 / op_norm(&h)?);
    let ctx = make_gibbs_context(&h, 1.0)?;
    let a = pauli::string("ZZ")?;
    let sampler = SamplerSpec::PauliDbMixture {
        jump_ops: single_site_paulis(2)?,
        params: DbOverrides { tau: Some(0.5), ..Default::default() },
    };
    let cfg = ProtocolConfig { eps: 0.3, eta: 0.2, ..Default::default() };
    let prepared = prepare_remix_protocol(&a, &ctx, &sampler, &cfg)?;
    let d = &prepared.diagnostics;
    println!("sampler gap {:.3e}  k0 {:?}  T {}  warm-start constant {:?}", d.gap, d.k0, d.t_len, d.warm_start_constant);
    let res = prepared.run(1, 0)?;
    println!("estimate {:.4} truth {:.4}", res.estimate, res.truth);
    if let Some(c) = res.diagnostics.bias_certificate {
        println!("bias over first {} steps: {:.3e} (bound {:.3e}, target {:.3e})", c.steps, c.max_bias, c.max_bias_bound, c.target);
    }
    Ok(())
}
