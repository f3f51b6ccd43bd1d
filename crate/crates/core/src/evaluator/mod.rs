//! Exact expected accuracy over all failure scenarios, Monte Carlo
//! estimates, and ablation sweeps.

mod monte_carlo;
mod scenario;
mod sweep;

pub use monte_carlo::{monte_carlo_accuracy, McEstimate};
pub use scenario::{
    correctness, enumerate_scenarios, evaluate_exact, evaluate_scenario, expected_accuracy, timed, EvaluationReport,
    FailureScenario, ScenarioResult, MAX_ENUMERATED_NODES,
};
pub use sweep::{
    axis_levels, failout_levels, skip_levels, sweep, weight_levels, AblationAxis, AblationGrid, GridCell, GridLevel,
    LevelValue, SweepSpec, FAILOUT_RATES,
};
