use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Engine(#[from] smfj::Error),
}

impl CliError {
    /// 2 for anything the user can fix in the config, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Engine(smfj::Error::InvalidParameter { .. } | smfj::Error::Io(_) | smfj::Error::Csv(_)) => 2,
            Self::Engine(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Engine(e.into())
    }
}
