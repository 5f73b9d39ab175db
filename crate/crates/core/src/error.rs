use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Schwinger label (2j={twice_j}, 2m={twice_m})")]
    InvalidSchwingerLabel { twice_j: i64, twice_m: i64 },

    #[error("Fock label |{n1},{n2}> exceeds photon cutoff {cutoff}")]
    CutoffExceeded { n1: u32, n2: u32, cutoff: u32 },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: u32, right: u32 },

    #[error("expected {expected} amplitudes, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("both coupling constants vanish")]
    ZeroCouplings,

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("state occupies {occupied} photons but cutoff {cutoff} leaves no room for an emitted photon")]
    InsufficientHeadroom { occupied: u32, cutoff: u32 },

    #[error("basis transform covers up to {available} photons, {needed} needed")]
    TransformTooSmall { available: u32, needed: u32 },

    #[error("conditioning on an outcome with probability {probability:e}")]
    ImpossibleOutcome { probability: f64 },

    #[error("target has {found} photons, expected {expected}")]
    PhotonNumberMismatch { expected: u32, found: u32 },

    #[error("{steps} steps cannot produce a {photons}-photon state")]
    TooFewSteps { steps: usize, photons: u32 },

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    InvalidArgument(String),
}
