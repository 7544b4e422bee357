//! Filesystem and orchestration layer over `basin-core`: configuration
//! files, dataset/model/candidate/report formats, and the staged pipeline
//! the `basin` binary drives.

pub mod config;
pub mod formats;
pub mod pipeline;
