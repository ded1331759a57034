use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("weak values ({0}) are too small to fix a state")]
    DegenerateInput(String),

    #[error("bases are not mutually unbiased: ⟨b{j}|a{i}⟩ = 0")]
    NonMubBasis { i: usize, j: usize },

    #[error("invalid pointer configuration: {0}")]
    InvalidPointer(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("post-selection probability vanishes ({probability:e})")]
    PostselectionVanishes { probability: f64 },

    #[error("profile for ROI {roi} extends beyond its bounds (lost fraction {lost:e})")]
    RoiOverflow { roi: String, lost: f64 },

    #[error("ROI {0} holds no intensity")]
    EmptyRoi(String),

    #[error("no signal in either post-selection channel")]
    NoSignal,

    #[error("degenerate calibration design: {0}")]
    DegenerateDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
