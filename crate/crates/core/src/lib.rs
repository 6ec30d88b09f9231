#![forbid(unsafe_code)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod field;
pub mod filter;
pub mod gp;
pub mod linalg;
pub mod motion;
pub mod online;
pub mod report;
pub mod sparse;
pub mod support;
pub mod trajectory;

pub use error::{Error, Result};
