//! Green's function, Dirichlet energy of a bump and a short stationarity run.

use dpplab::gff::{self, StationarityOptions, TestFn};
use dpplab::sle::{Region, SleGas};
use num_complex::Complex64 as C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (z, w) = (C64::new(0.0, 1.0), C64::new(0.5, 2.0));
    println!("G_H(z, w) = {:.6}, G_O(z, w) = {:.6}", gff::green(Region::H, z, w)?, gff::green(Region::O, z + 0.2, w)?);
    let f = TestFn::new(Region::H, C64::new(0.3, 1.5), 0.3)?;
    println!("E(f) = {:.6}", gff::dirichlet_energy(&f, &f)?);

    let gas = SleGas::new(Region::H, 2.0, 0.0, vec![0.0])?;
    let rep = gff::stationarity_check(&gas, &f, &[0.05, 0.1], 1000, 3, StationarityOptions::default())?;
    for row in &rep.rows {
        println!("t = {}: Var + E_t = {:.5}, E_0 = {:.5}, mean z {:.2}", row.t, row.variance + row.energy_t, row.energy0, row.mean_z);
    }
    Ok(())
}
