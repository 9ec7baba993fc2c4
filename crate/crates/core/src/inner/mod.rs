//! Inner solvers: preconditioned CG, semismooth Newton on the dual map, and
//! robust solvers for shifted graph Laplacians.

pub mod consensus;
pub mod dual_map;
pub mod pcg;
pub mod ssn;

pub use consensus::{
    augmented_consensus_solve, plain_stationary_solve, stationary_iteration_step, BorderedState,
    ConsensusMethod, ConsensusOperator, ConsensusOutcome,
};
pub use dual_map::{assemble_saddle_subproblem, eval_fk, eval_merit, DualMapContext, SaddleSystems};
pub use pcg::{pcg_solve, PcgOutcome};
pub use ssn::{ssn_solve, SsnConfig, SsnOutcome};
