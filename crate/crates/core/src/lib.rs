//! Team formation amidst conflicts: assign individuals to capacity-limited tasks,
//! maximizing preference satisfaction plus the conflict weight split across teams.

pub mod baselines;
pub mod eval;
pub mod exact;
pub mod io;
pub mod model;
pub mod relax;
pub mod rng;
pub mod rounding;
pub mod solve;
pub mod speedups;
