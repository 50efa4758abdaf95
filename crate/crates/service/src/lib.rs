//! Run store, asynchronous job runner and HTTP API for the telemetry
//! workbench.

pub mod api;
pub mod eda;
pub mod store;

pub use api::{router, AppState, ServiceConfig};
pub use store::{RunRecord, RunState, RunStore, StoreError};

/// Version carried by every JSON payload the service emits.
pub const SERVICE_SCHEMA_VERSION: u32 = 1;
