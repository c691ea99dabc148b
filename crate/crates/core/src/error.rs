use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid channel or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The AR noise filter has a characteristic root on or outside the unit circle.
    #[error("unstable autoregressive filter {coeffs:?}")]
    UnstableFilter { coeffs: Vec<f64> },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The error-state transfer function has no finite value: the spectral
    /// radius of the bad-to-bad block is at least one.
    #[error("bound diverges: spectral radius of V_BB(1) is {spectral_radius}")]
    BoundDiverges { spectral_radius: f64 },

    #[error("singular linear system")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
