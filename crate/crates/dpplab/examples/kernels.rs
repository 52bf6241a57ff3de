//! Evaluate finite and limiting kernels and a correlation determinant.

use dpplab::kernels::{self, Family, KernelSpec, Point, PointConfiguration, ScalingMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gue = KernelSpec::new(Family::HermiteN { n: 10 })?;
    for x in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        println!("rho_10({x:+.1}) = {:.6}", kernels::lebesgue_density(&gue, &Point::Real(x))?);
    }
    let pts = PointConfiguration::from_reals(vec![-0.3, 0.1, 0.6]);
    println!("rho^3 = {:.6e}", kernels::correlation_det(&gue, &pts)?);
    println!("trace = {:.12}", kernels::projection_trace(&gue)?);
    for mode in [ScalingMode::Bulk, ScalingMode::SoftEdge, ScalingMode::HardEdge(0.3)] {
        println!("{mode:?}: sup error at N=200 is {:.2e}", kernels::scaling_limit_error(mode, 200, 0.0, 2.0, 21)?);
    }
    Ok(())
}
