//! Monte Carlo estimation of fault-tolerance thresholds of the toric and
//! color codes through their mapped disordered Z2 lattice gauge theories.
//!
//! The numerical core is generic over the floating point type ([`scalar::Real`]);
//! the aliases below fix it to `f64` or `f32`.

pub mod analysis;
pub mod disorder;
pub mod error;
pub mod geometry;
pub mod model;
pub mod montecarlo;
pub mod nishimori;
pub mod oracle;
pub mod scalar;
pub mod seed;

pub use disorder::DisorderSample;
pub use error::{Error, Result};
pub use geometry::{Family, GaugeModel};
pub use model::{Incidence, SpinConfiguration};
pub use montecarlo::Schedule;

pub type Couplings64 = model::Couplings<f64>;
pub type Couplings32 = model::Couplings<f32>;
pub type NishimoriPoint64 = nishimori::NishimoriPoint<f64>;
pub type NishimoriPoint32 = nishimori::NishimoriPoint<f32>;
pub type TemperatureLadder64 = montecarlo::TemperatureLadder<f64>;
pub type TemperatureLadder32 = montecarlo::TemperatureLadder<f32>;
pub type MeasurementSet64 = montecarlo::MeasurementSet<f64>;
pub type MeasurementSet32 = montecarlo::MeasurementSet<f32>;
pub type RunState64 = montecarlo::RunState<f64>;
pub type ObservableTable64 = analysis::ObservableTable<f64>;
pub type ThresholdEstimate64 = analysis::ThresholdEstimate<f64>;
