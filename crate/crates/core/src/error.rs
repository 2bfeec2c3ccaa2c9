use alloc::string::String;

use crate::backend::BackendError;
use crate::types::StatementId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("statement {0} is not the conclusion of any step in the forest")]
    NotDerived(StatementId),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("infeasible world spec: {0}")]
    Spec(String),
    #[error("closure exceeded {limit} facts")]
    SizeExceeded { limit: usize },
    #[error("malformed tree: {0}")]
    Structure(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("metric undefined: {0}")]
    Metric(String),
}
