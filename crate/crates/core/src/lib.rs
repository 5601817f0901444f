//! Symmetric Nash equilibria of symmetric bimatrix games via Hedge dynamics
//! with weighted empirical averaging, plus LP-based certificate extraction.

pub mod equilibrium;
pub mod error;
pub mod extraction;
pub mod game;
pub mod hedge;
pub mod lp;
pub mod rng;

pub use equilibrium::{
    best_subequalizer, enumerate_symmetric_equilibria, epsilon_gap, find_equalizer, is_well_supported,
    min_equalizer_gap, verify_support, EquilibriumCertificate, Method, Tolerances,
};
pub use error::{Error, Result};
pub use extraction::{
    approx_best_response_set, check_polytope_property, extract_certificate, rank_by_average_mass,
    rank_by_average_payoff, rank_by_iterate_mass, Criterion, ExtractionOutcome, Ranking, TracePoint,
};
pub use game::{
    decompose, generate_game, normalize_payoffs, payoff_vector, support, AffineMap, GameKind, MixedStrategy,
    SymmetricGame,
};
pub use hedge::{
    diagnose_entropy_bounds, diagnose_trajectory_identities, hedge_step, relative_entropy, run_trajectory,
    validate_schedule, LearningRateSchedule, ScheduleValidity, Trace, TrajectoryRunner,
};
pub use lp::{solve_lp, LpResult, LpStatus, Sense, StandardFormLp};
pub use rng::SeededRng;
