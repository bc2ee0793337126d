//! Perpetual convertible bonds as a Dynkin game under a spectrally positive
//! Lévy log-price: closed-form equilibrium solutions via scale functions and
//! a Monte Carlo verifier.

pub mod error;
pub mod levy;
pub mod numerics;
mod tabulated;

pub use error::{ModelError, NumericError};
pub use levy::{JumpSpec, LevyModel, PathVariation, TabulatedDensity};
pub mod game;
pub mod scale;
pub mod sim;

pub use error::{GameError, ScaleError, SimError};
pub use game::{
    a_star, c_star, call_threshold_function, classify, exit_expectation, g_function, q0, q1, q1_condition, solve_as,
    FitKind, FitReport, GameParams, Regime, RegimeSolution, StopRule,
};
pub use scale::{tilted_w, ScaleEvaluator, ScaleMethod};
pub use sim::{
    estimate_exit_transform, estimate_game_value, estimate_laplace, estimate_two_sided_exit, first_passage_down,
    first_passage_up, mc_eligibility, payoff, saddle_check, sample_path, wiener_hopf_check, PathSample, PayoffEstimate,
    Piece, SaddleComparison, SaddleReport, SimConfig, Verdict, WienerHopfReport,
};
