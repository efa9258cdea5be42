//! Accelerated gradient for the constrained convex problems and the DC
//! outer loop for the truncated-L1 model.

mod agm;
mod dc;

pub use agm::{agm_solve, constrained_sgl_solve, AgmState};
pub use dc::{dc_solve, dc_solve_keep_iterates, linearize, DcTrace, Linearization};

#[cfg(test)]
mod tests;
