//! Total-variation analytics, the blow-up counterexample and the experiment
//! drivers used to check the regularity statements numerically.

mod counterexample;
mod experiments;
mod tv;

pub use counterexample::*;
pub use experiments::*;
pub use tv::*;
