//! Compilation of engineered walks to a photonic OAM/polarization train:
//! QWP-HWP-QWP coins, `q = 1/2` plates as shifts and an HWP + PBS
//! measurement of the coin.

pub mod conventions;
pub mod jones;
pub mod plan;

pub use jones::{
    coin_to_waveplates, qplate_action, unitary_to_waveplates, waveplates_to_jones, JonesElement, PlateKind, Polarization, WaveplateAngles,
};
pub use plan::{compile_experiment, plan_walk_discrepancy, simulate_plan, ExperimentPlan, OpticalUnit, PlanSimulation, ProjectionStage};
