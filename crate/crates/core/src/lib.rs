//! Utility-optimal single-path entanglement routing.
//!
//! Given a fiber network whose links trade entanglement rate against Werner
//! parameter as `rate = d (1 - w)`, and a list of source-destination demands,
//! the crate computes routes and allocations maximising the product of
//! `rate * f(end-to-end Werner parameter)` over demands:
//!
//! * [`routing_micp`]: exact mixed-integer convex formulation, its relaxation,
//!   and the over/underestimator bracket;
//! * [`heuristics`]: min-congestion LP, two randomized-rounding heuristics and
//!   a second upper bound;
//! * [`qnum`]: optimal allocation for a fixed routing;
//! * [`oracle`]: brute-force enumeration for certification on small graphs.

pub mod heuristics;
pub mod measures;
pub mod oracle;
pub mod qnum;
pub mod routing_micp;
mod solution;
pub mod topology;

pub use solution::RoutingSolution;
