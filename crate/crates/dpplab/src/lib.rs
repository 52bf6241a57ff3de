pub mod specfun;
pub mod kernels;
pub mod rng;
pub mod dpp;
pub mod loggas;
pub mod dsp;
pub mod sle;
pub mod gff;
pub mod cli;
