use thiserror::Error;

/// Errors surfaced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Headings outside [pi/2, pi] make the inverse Doppler map ambiguous.
    #[error("unsupported heading: beta = {beta} rad is outside [pi/2, pi]")]
    UnsupportedHeading { beta: f64 },

    /// The speed correction factor collapsed to a non-positive value.
    #[error("degenerate kinematics at omega = {omega} rad/s: alpha = {alpha}")]
    DegenerateKinematics { omega: f64, alpha: f64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("filter diverged at step {step}{}: {detail}", channel.as_deref().map(|c| format!(" ({c} channel)")).unwrap_or_default())]
    Divergence {
        step: usize,
        channel: Option<String>,
        detail: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
