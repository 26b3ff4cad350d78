//! Scenario ingestion, pipeline orchestration and artifact output.

mod fixtures;
mod output;
mod run;
mod scenario;

pub use fixtures::FIXTURES;
pub use output::{circle_image, grid_csv, Curve, Figure};
pub use run::{
    build_map, exit_code, report_json, run_demo, run_file, run_scenario, DemoEntry, RunOptions,
    RunOutcome, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_PIPELINE, EXIT_SCHEMA,
};
pub use scenario::{
    parse_scenario, BallSpec, Command, InsertSpec, MapExpr, Outputs, PairSpec, Scenario,
    ScenarioCheck, SuiteScale, SCENARIO_VERSION,
};
