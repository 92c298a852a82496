use thiserror::Error;

use crate::backend::BackendError;
use crate::gateway::AgentError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no topic entities: the record supplies none and inference produced none")]
    NoTopicEntities,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("configuration error: {0}")]
    Config(String),
}
