use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument or on input data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no in-session data")]
    NoSessionData,

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("degenerate series: zero variance")]
    DegenerateSeries,

    #[error("Gaussian limit has no power tail (q_tilde = {0})")]
    GaussianLimit(f64),

    #[error("q_tilde = {0} outside supported range")]
    OutsideSupportedRange(f64),

    #[error("window shorter than detrend order + 2 (s = {window}, order = {order})")]
    WindowTooShort { window: usize, order: usize },

    #[error("degenerate segment under negative moments: segment {segment} at scale {scale} has zero variance (q = {q})")]
    DegenerateSegment { scale: usize, segment: usize, q: f64 },

    #[error("insufficient scaling range: {found} scales in [{s_min}, {s_max}], need at least {needed}")]
    InsufficientScalingRange {
        found: usize,
        needed: usize,
        s_min: usize,
        s_max: usize,
    },

    #[error("non-positive fluctuation F_q(s) at q = {q}, s = {scale}")]
    NonPositiveFluctuation { q: f64, scale: usize },

    #[error("tail too sparse: {found} points in the fit window, need at least {needed}")]
    TailTooSparse { found: usize, needed: usize },

    #[error("extrapolation refused: beta = {beta} outside calibrated range [{lo}, {hi}]")]
    ExtrapolationRefused { beta: f64, lo: f64, hi: f64 },

    #[error("q = {0} is not on the q grid")]
    QNotOnGrid(f64),

    #[error("finite-size parameters not set ({0}); supply them in a parameter file or use the Monte-Carlo path")]
    FseParamsUnset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad arguments or by input too short for the
    /// requested windows, as opposed to failures that only show up while
    /// computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NonPositivePrice { .. }
                | Error::DegenerateSeries
                | Error::GaussianLimit(_)
                | Error::OutsideSupportedRange(_)
                | Error::WindowTooShort { .. }
                | Error::InsufficientScalingRange { .. }
                | Error::TailTooSparse { .. }
                | Error::ExtrapolationRefused { .. }
                | Error::QNotOnGrid(_)
                | Error::FseParamsUnset(_)
                | Error::Parse(_)
                | Error::Csv(_)
        )
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
