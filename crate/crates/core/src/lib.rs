//! Forecasting engine for the odds of meeting a compatible partner and for
//! valuing romantic options over time.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`population`]: synthesize or load each social group, intersect
//!    subgroups and relax them until they are statistically significant;
//! 2. [`matching`]: score members against the user's windows of
//!    compatibility and estimate single-encounter match probabilities;
//! 3. [`sociology`]: model encounter rates and combine them into a
//!    cumulative match probability with group and quality attributions;
//! 4. [`utility`]: value relationships, single life and the open option;
//! 5. [`forecast`]: compare the options and build the report.

pub mod error;
pub mod forecast;
pub mod grid;
pub mod linalg;
pub mod matching;
pub mod parallel;
pub mod population;
pub mod rng;
pub mod scenario;
pub mod sociology;
pub mod utility;

pub use error::{Error, RelaxationStep, Result, Stage};
pub use forecast::{run_forecast, run_forecast_with, EngineOptions, OptionKind, Report};
pub use grid::TimeGrid;
pub use scenario::Scenario;
