// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed literal '{0}'")]
    MalformedLiteral(String),

    #[error("invalid geometry: {field} = {value} (must be {requirement})")]
    InvalidGeometry {
        field: &'static str,
        value: i64,
        requirement: &'static str,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("empty range for {0}")]
    EmptyRange(&'static str),

    #[error("matrix format error: {0}")]
    Format(String),

    #[error("verification failed: {0}")]
    Mismatch(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
