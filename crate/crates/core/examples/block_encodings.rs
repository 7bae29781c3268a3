//! Block-encoding calculus on explicit unitaries.

use gibbs_nd::blockenc::{be_filtered, be_lcu, be_product, be_taylor_sqrt, dilate, poly_sqrt_degree, taylor_sqrt_params};
use gibbs_nd::filters::{FilterSpec, QuadratureGrid};
use gibbs_nd::linalg::{op_norm, pauli, C64};

fn main() -> gibbs_nd::Result<()> {
    let x = dilate(&pauli::x())?;
    let z = dilate(&pauli::z().scale_real(0.5))?;

    let prod = be_product(&[x.clone(), z.clone()])?;
    println!("product: alpha {} b {} eps {} error {:.2e}", prod.alpha, prod.b, prod.eps, prod.measured_error().unwrap());

    let lcu = be_lcu(&[x.clone(), z.clone()], &[C64::new(0.5, 0.0), C64::new(0.0, 1.0)])?;
    println!("lcu: alpha {} b {} error {:.2e}", lcu.alpha, lcu.b, lcu.measured_error().unwrap());

    let spec = FilterSpec::gaussian(1.0)?;
    let fil = be_filtered(&x, &pauli::z(), &spec, &QuadratureGrid::new(8.0, 64)?)?;
    println!("filtered: alpha {:.4} (|g|_1 = {:.4}) b {} declared eps {:.2e} error {:.2e}", fil.alpha, spec.l1_norm(), fil.b, fil.eps, fil.measured_error().unwrap());

    let root = be_taylor_sqrt(&z, 0.4, 0.25, 5)?;
    println!("sqrt: gamma {:.4} b {} declared eps {:.2e} error {:.2e}", root.alpha, root.b, root.eps, root.measured_error().unwrap());
    let big = taylor_sqrt_params(1.0, 1, 0.0, 0.4, 0.25, 30)?;
    println!("order 30 would need {} ancillas, gamma {:.4} <= {:.4}", big.ancillas, big.gamma, big.gamma_limit);

    let poly = poly_sqrt_degree(0.25, 1e-3)?;
    println!("degree {} polynomial, tail {:.2e}, |p| at x=1: {:.4}", poly.degree, poly.tail, poly.eval(1.0));
    println!("unitarity residual of the sqrt encoding {:.2e}, |extract| {:.4}", root.unitarity_residual(), op_norm(&root.extract())?);
    Ok(())
}
