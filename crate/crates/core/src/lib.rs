//! Fire-front tracking with a UAV team: spread model, adaptive filter,
//! tour construction, service-time bounds and the two planners.

pub mod coordinator;
pub mod coverage;
pub mod filter;
pub mod fire;
pub mod qos;
pub mod scalar;
pub mod seed;
pub mod tour;

pub use scalar::{Real, Scalar};

pub type Filter = filter::FilterState<f64>;
pub type FilterSettings = filter::FilterConfig<f64>;
pub type Tour = tour::TourGraph<f64>;
pub type Env = fire::EnvParams<f64>;
