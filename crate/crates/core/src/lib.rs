pub mod geometry;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod synth;
pub mod robustify;
pub mod learner;
pub mod diagnostics;
pub mod harness;
