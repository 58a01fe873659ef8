use thiserror::Error;

use crate::auth::AuthError;
use crate::eig::TreeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("corruption budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("strategy {strategy} cannot run on this plan: {reason}")]
    WrongPlan { strategy: String, reason: String },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("oracle breach: {0}")]
    OracleBreach(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
