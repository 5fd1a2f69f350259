//! Colonel Blotto and General Lotto games with favoritism.
//!
//! Battlefield `i` is won by A iff `x_A > q_i x_B - p_i`. The crate provides
//! closed-form equilibria of the single-item all-pay auction with
//! favoritism ([`fapa`]), optimal univariate distributions parameterized by
//! `kappa` ([`oud`]), a winding-number solver for the `kappa` that exhausts
//! both budgets ([`solver`]), playable strategies with exploitability
//! estimates ([`strategies`]) and a sweep harness ([`experiment`]).

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod fapa;
pub mod game;
pub mod oud;
pub mod par;
pub mod solver;
pub mod strategies;

pub use distributions::{win_prob_a, AtomUniform, Marginal};
pub use error::{Error, Result};
pub use fapa::{FapaEquilibrium, FapaInstance, Regime};
pub use game::{
    check_assumptions, pure_payoffs, random_instance, reduce_trivial, AssumptionStatus, Battlefield, GameInstance,
    Player, PureAllocation, RawInstance,
};
pub use oud::{build_ouds, oud_payoffs, residual, IndexClass, Kappa, OudProfile, Residual};
pub use solver::{solve, winding_number, Rect, SolveReport, SolveStatus, SolverConfig};
pub use strategies::{StrategyKind, StrategyProfile};
