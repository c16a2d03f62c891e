//! Martingale-problem checks: the covariance kernels of the event noise, the
//! exact generator of `<q, phi>`, fluctuation fields and the variance of the
//! limiting Gaussian fluctuations.

mod fluctuations;
mod generator;
mod kernels;
mod martingale;
mod report;
mod rescaled;

pub use fluctuations::{
    extract_fluctuations, noise_pairing, spde_variance_oracle, spde_variance_oracle_stable, FluctuationField,
    NoiseModel,
};
pub use generator::{generator_rates, mean_event_volume, radius_classes, GeneratorRates};
pub use kernels::{
    alpha_average, k_alpha, k_alpha_constant, rho_r, sigma_alpha_delta, sigma_r, CovarianceKernel, RadialSettings,
};
pub use martingale::{martingale_residual_check, Estimate, MartingaleCheck, MartingaleEstimate, MIN_REPLICATES};
pub use report::{DiagnosticsReport, ReportRow};
pub use rescaled::{clt_variance, deterministic_distance, scaled_law, CltVariance, RescaledSetup};
