//! Simulate a Dyson gas and a Bru-Wishart gas and print their terminal states.

use dpplab::loggas::{self, GasConfig, GasModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dyson = GasConfig::new(GasModel::dyson(2.0), vec![-1.0, 0.0, 1.0])?;
    let tr = loggas::simulate(&dyson, 1.0, 1e-2, 42)?;
    println!("Dyson X(1) = {:?}, min gap {:.4}, {} steps", tr.last(), tr.min_gap, tr.steps);

    let bw = GasConfig::new(GasModel::bru_wishart(2.0, 0.5), vec![0.0; 3])?;
    let tr = loggas::simulate(&bw, 1.0, 1e-2, 42)?;
    println!("Bru-Wishart from the origin, Lambda(1) = {:?}", tr.last());
    Ok(())
}
