//! HTTP API and command-line front ends over the HelixForge experiment store.

pub mod api;
pub mod cli;
pub mod jobs;

pub use api::{router, serve, ROUTES};
pub use jobs::{JobHandle, JobState};
