//! Direct Monte Carlo of two noncolliding Brownian motions against the
//! determinantal-martingale reweighting of independent ones.

use dpplab::dsp::{self, Functional, InitialConfig, Process};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xi = InitialConfig::simple(Process::Bm, vec![-0.5, 0.5])?;
    let f = Functional::Window { a: -1.0, b: 1.2, t: 0.5 };
    let e = dsp::dmr_expectation(&xi, &f, 20_000, 1e-2, 9)?;
    println!("direct   {:.4} +- {:.4}", e.direct, e.direct_se);
    println!("weighted {:.4} +- {:.4}", e.weighted, e.weighted_se);
    println!("z = {:.2}", e.z_score());

    let multi = InitialConfig::multiple_origin(Process::Bm, 3)?;
    println!("extended Hermite kernel K(1, 0.2; 2, -0.4) = {:.6}", dsp::st_kernel(&multi, 1.0, 0.2, 2.0, -0.4)?);
    Ok(())
}
