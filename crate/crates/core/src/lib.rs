//! Functional depth ranking and extreme-scenario screening for day-ahead
//! power-grid scenario ensembles.
//!
//! A day's ensemble holds `N` probabilistic scenarios of hourly load, solar
//! and wind at grid and zonal level. Each `(entity, facet)` view is an `N×T`
//! [`FacetMatrix`]; depth metrics rank its rows from central to outlying and
//! the screening pipelines turn those rankings into a short list of scenarios
//! worth sending through a full unit-commitment / economic-dispatch run.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below are what the CLI and most callers use.

pub mod depth;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod screening;
pub mod synthetic;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use depth::{DepthParams, DepthResult, Metric, Orientation};
pub use ensemble::{Facet, FacetMatrix, PointwiseStats, RankMatrix, ScenarioEnsemble, TiePolicy};
pub use error::{Error, Result};
pub use evaluation::{EdOutcomes, ExtremeLabel, LabelRule, OutcomeMatrix, OutcomeMetric};
pub use screening::{PipelineConfig, SelectionSet};

/// Floating-point type the numerical core is written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every caller passes values that fit.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    /// Exact for integers below the mantissa width (2^24 for f32, 2^53 for f64).
    fn of_count(n: u64) -> Self {
        Self::from_u64(n).expect("u64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type FacetMatrix64 = FacetMatrix<f64>;
pub type FacetMatrix32 = FacetMatrix<f32>;
pub type ScenarioEnsemble64 = ScenarioEnsemble<f64>;
pub type ScenarioEnsemble32 = ScenarioEnsemble<f32>;
pub type DepthResult64 = DepthResult<f64>;
pub type DepthResult32 = DepthResult<f32>;
pub type PointwiseStats64 = PointwiseStats<f64>;
pub type EdOutcomes64 = EdOutcomes<f64>;
pub type SelectionSet64 = SelectionSet<f64>;
