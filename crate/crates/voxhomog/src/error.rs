use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] voxhomog_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// Config or argument validation; `field` is the dotted key path.
    #[error("invalid value for `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("sample {id}: {source}")]
    Sample {
        id: usize,
        #[source]
        source: voxhomog_core::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn config(field: impl Into<String>, msg: impl ToString) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.to_string(),
        }
    }

    /// 2 for configuration and validation problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Core(voxhomog_core::Error::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}
