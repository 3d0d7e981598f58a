//! Fixtures shared by the benchmarks.

use lsfp_core::experiments::ExperimentConfig;
use lsfp_core::network::{generate_network, random_fading};
use lsfp_core::oracle::OracleSetup;
use lsfp_core::{LargeScaleFading, NetworkConfig};

/// Seven-cell network with ten users per cell and shadowing.
pub fn seven_cell_network() -> (NetworkConfig, LargeScaleFading) {
    let cfg = NetworkConfig::default();
    let fading = generate_network(&cfg).expect("default network is valid");
    (cfg, fading)
}

/// Small Monte-Carlo operating point: 3 cells, 2 users, unit powers.
pub fn oracle_setup(antennas: usize) -> OracleSetup {
    OracleSetup { fading: random_fading(3, 2, 2024).expect("valid dims"), rho_f: 1.0, rho_r: 1.0, tau: 2, antennas }
}

/// Default experiment shrunk to `draws` network draws.
pub fn small_experiment(draws: usize) -> ExperimentConfig {
    ExperimentConfig { draws, ..ExperimentConfig::default() }
}
