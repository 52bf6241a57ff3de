//! Loewner flows with deterministic driving: the vertical slit and a tilted slit.

use dpplab::sle::{self, DrivingPath};
use num_complex::Complex64 as C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let zero = DrivingPath::from_fn(1.0, 10, |_| vec![0.0])?;
    let st = sle::forward_flow(&zero, &[C64::new(1.0, 1.0)], 1.0)?;
    println!("g_1(1+i) = {:.6} (exact {:.6})", st.points[0].g, C64::new(4.0, 2.0).sqrt());
    println!("hcap = {:.6}", sle::hcap_estimate(&st)?);

    let alpha = 1.0 / 3.0;
    let tr = sle::trace_slit(&sle::tilted_driving(alpha, 1.0, 2000)?, 1.0, 1e-3)?;
    let tip = tr.tips.last().expect("trace")[0];
    println!("tilted slit tip {tip:.4}, angle / pi = {:.4}", tip.arg() / std::f64::consts::PI);
    Ok(())
}
