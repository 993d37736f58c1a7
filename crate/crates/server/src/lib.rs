//! HTTP service, background workers and offline simulation around the
//! contest domain crate.

pub mod api;
pub mod clock;
pub mod config;
pub mod error;
pub mod service;
pub mod simulate;
pub mod state;
pub mod store;
pub mod workers;
