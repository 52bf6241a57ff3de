//! Monte Carlo mean of the SLE martingale observable driven by a Dyson gas.

use dpplab::sle::{self, Region, SleGas};
use num_complex::Complex64 as C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gas = SleGas::new(Region::H, 2.0, 0.0, vec![-1.0, 1.0])?;
    let rep = sle::martingale_check(&gas, C64::new(0.4, 1.5), 0.5, 50, 10, 2000, 5)?;
    for ((t, m), se) in rep.times.iter().zip(&rep.mean).zip(&rep.std_error) {
        println!("t = {t:.2}: E[M] = {m:.4} (se {se:.4})");
    }
    println!("max z-score {:.2}", rep.max_z);
    Ok(())
}
