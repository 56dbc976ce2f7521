use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("subsystem label `{0}` appears twice")]
    LabelCollision(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("subsystem `{0}` has dimension zero")]
    ZeroDimension(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("labels do not partition the state: {0}")]
    BadPartition(String),
    #[error("not a density operator: {0}")]
    NotDensity(String),
    #[error("not an isometry (deviation {0:e})")]
    NotIsometry(f64),
    #[error("Kraus set is not trace preserving: deficit {deficit:e}, eigenvalues of the Kraus sum {eigenvalues:?}")]
    NotTracePreserving { deficit: f64, eigenvalues: Vec<f64> },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension {0} exceeds the supported limit {1}")]
    TooLarge(usize, usize),
}
