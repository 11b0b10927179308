use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sensel_core::Error),

    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no plottable data in {0}")]
    EmptyData(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },
}

impl HarnessError {
    /// Process exit code: 2 usage, 3 input/parse, 4 solver failure.
    pub fn exit_code(&self) -> i32 {
        use sensel_core::Error as E;
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Input { .. }
            | HarnessError::EmptyData(_)
            | HarnessError::MissingColumn { .. }
            | HarnessError::Io { .. } => 3,
            HarnessError::Core(e) => match e {
                E::Parse { .. } | E::Io { .. } | E::NonFinite { .. } | E::InvalidRank { .. } => 3,
                E::InvalidArgument(_) | E::InvalidDimension(_) => 2,
                _ => 4,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}
