pub mod csp;
pub mod eval;
pub mod features;
pub mod harness;
pub mod learners;
pub mod solver;
