//! Data-driven two-sided moment-matching model order reduction for
//! MIMO LTI systems.
//!
//! The pipeline: design a signal generator (right interpolation data)
//! and a swapped filter (left interpolation data), simulate or measure
//! the two interconnections, estimate the reduced quantities CPi and
//! UpsilonB from the time series alone, solve a nu-by-nu Sylvester
//! equation for the coupling matrix UpsilonPi, and assemble an order-nu
//! model matching 2*nu tangential interpolation conditions. A
//! model-based oracle (full-order Sylvester solves and transfer-matrix
//! evaluation) backs every estimate for validation.

pub mod bench;
pub mod design;
pub mod error;
pub mod estimation;
pub mod io;
pub mod lti;
pub mod oracle;
pub mod rom;
pub mod sylvester;

pub use design::{
    build_filter, build_generator, Block, DesignFile, SideSpec, SignalGenerator, SwappedFilter,
};
pub use error::{Error, Result};
pub use estimation::{EstimationOptions, EstimationResult};
pub use lti::{Integrator, StateSpace, TimeGrid, Trajectory};
pub use rom::{ReducedModel, RomKind};

/// Cap rayon's global pool from the `MM_REDUCE_THREADS` environment
/// variable. Call once at process start; later calls are no-ops.
pub fn init_thread_limit() {
    if let Ok(v) = std::env::var("MM_REDUCE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
