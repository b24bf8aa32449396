//! Files, campaign orchestration and the command line around `homspec-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod cli;
pub mod config;
pub mod error;
pub mod events;
pub mod manifest;
pub mod tables;

pub use config::CampaignConfig;
pub use error::{FormatError, FormatResult};
