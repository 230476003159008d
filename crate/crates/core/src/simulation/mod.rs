//! Simulation design with an unobserved confounder, super-population
//! calibration of its loadings and a Monte Carlo replication farm.

mod calibrate;
mod dgp;
mod monte_carlo;

pub use calibrate::{
    calibrate_confounding, insample_fit, insample_propensity, oracle_values, CalibrationResult, OracleScenario,
    DEFAULT_CALIBRATION_TOL, DEFAULT_SUPERPOP_N, MAX_OUTER_ITERATIONS,
};
pub use dgp::{draw_sample, f_ps, f_reg, DgpConfig, RawDraw, SimSample, DEFAULT_SIGMA_EPS, N_COVARIATES};
pub use monte_carlo::{
    kernel_density, run_monte_carlo, standardized_histogram, write_xy_csv, IntervalTable, MeanSd, MonteCarloSettings,
    PointTable, RepRecord, SimTables,
};
