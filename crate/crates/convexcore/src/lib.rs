//! Mixed-integer convex programs over linear rows, logarithmic atoms and
//! concave hypographs, solved by branch-and-bound on a conic relaxation.

mod bnb;
mod concave;
mod error;
mod presolve;
mod program;
mod solve;

pub use bnb::{
    branch_and_bound, relative_gap, BnbConfig, BnbResult, BnbStatus, Branching, NodeSelection,
};
pub use concave::{ConcaveFn, CutPool, TangentCut};
pub use error::{BnbError, ProgramError};
pub use program::{Atom, ConvexProgram, LinExpr, LinearConstraint, Sense, VarId, Variable};
pub use solve::{solve_relaxation, solve_with_bounds, SolveOptions, SolveResult, SolveStatus};
