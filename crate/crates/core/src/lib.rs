//! Numeric core of HelixForge: datasets and splits, fitted preprocessing
//! pipelines, descriptive statistics and plot specifications, the learner
//! roster, model-agnostic feature importance and fuzzy linguistic rules.

pub mod fuzzy;
pub mod interpret;
pub mod learners;
pub mod matrix;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod tabular;

pub use matrix::Matrix;
pub use rng::Rng;
pub use tabular::{Dataset, ProblemType, SplitMethod, SplitPlan};
