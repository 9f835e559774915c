use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("factor `{0}` has no levels")]
    EmptyFactor(&'static str),
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("no simulator profile entry for backend `{backend}` mode `{mode}`")]
    MissingProfile { backend: String, mode: String },
    #[error("invalid simulator profile: {0}")]
    InvalidProfile(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("design matrix is rank deficient in columns {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("term `{0}` is not estimable in this design")]
    NonEstimable(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid prompt pool: {0}")]
    InvalidPool(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("missing route slice for `{route}` in {backend}/{mode}")]
    MissingRouteSlice {
        backend: String,
        mode: String,
        route: String,
    },
    #[error("missing analysis input: {0}")]
    MissingInput(&'static str),
}
