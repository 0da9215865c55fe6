//! Time-resolved and time-frequency O-information rate (OIR) for networks
//! of stochastic processes.
//!
//! The pipeline models a multichannel record as a time-varying VAR process,
//! identified from repeated realizations by recursive least squares with a
//! forgetting factor ([`rls`]). At each time step the model's lagged
//! covariances yield restricted sub-process models and Gaussian entropy
//! rates ([`submodel`]); the frozen-coefficient spectral representation
//! yields their frequency-resolved counterparts ([`spectral`]); and the
//! [`oir`] module assembles both into signed redundancy/synergy measures
//! over channel multiplets, with subset terms cached across multiplets.
//! [`bench`] reproduces the simulation study used to characterize the
//! estimator.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the command
//! line live in the companion `tvoir-cli` crate.

#![cfg_attr(not(test), no_std)]
// validation guards are written as `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bench;
pub mod error;
pub mod oir;
pub mod rls;
pub mod spectral;
pub mod submodel;
pub mod var;

pub use error::{Error, Result};
pub use oir::{
    enumerate_multiplets, oir_from_data, Multiplet, OirEngine, OirSeries, TimeFreqField,
};
pub use rls::{rls_identify, select_order_mspe, RlsConfig};
pub use spectral::FrequencyGrid;
pub use submodel::{entropy_rate, entropy_rate_series};
pub use var::{
    build_benchmark_model, simulate, stability_report, CoefficientSchedule, EpochData, TvVarModel,
    Waveform,
};
