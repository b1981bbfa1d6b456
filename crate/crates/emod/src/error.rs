use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: no such file or directory", .0.display())]
    MissingPath(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source:#}")]
    Stage { stage: &'static str, source: anyhow::Error },
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingPath(path.to_path_buf())
        } else {
            CliError::Io { path: path.to_path_buf(), source: e }
        }
    }

    /// 2 for a missing input or a bad configuration, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingPath(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Stage { source, .. } => source.downcast_ref::<CliError>().map_or(1, CliError::exit_code),
        }
    }
}
