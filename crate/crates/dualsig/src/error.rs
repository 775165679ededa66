use std::io;
use std::path::{Path, PathBuf};

/// Everything the command line can fail with, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    /// A malformed input line or row.
    #[error("{}:{line}: {}{message}", path.display(), field_prefix(field))]
    Input {
        path: PathBuf,
        line: usize,
        field: Option<String>,
        message: String,
    },
    /// A file that is readable but whose header, schema or document is wrong.
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: dualsig_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn field_prefix(field: &Option<String>) -> String {
    field.as_ref().map(|f| format!("field `{f}`: ")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an error, which fixes the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Data,
    Infeasible,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            Category::Data => 3,
            Category::Infeasible => 4,
            Category::Io => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Data => "data",
            Category::Infeasible => "infeasible",
            Category::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Usage(_) => Category::Usage,
            Error::Input { .. } | Error::Schema { .. } => Category::Data,
            Error::Core { source, .. } if source.is_infeasible() => Category::Infeasible,
            Error::Core { .. } => Category::Data,
            Error::Io { .. } => Category::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    pub(crate) fn input(path: &Path, line: usize, field: Option<&str>, message: impl Into<String>) -> Self {
        Error::Input {
            path: path.to_path_buf(),
            line,
            field: field.map(str::to_string),
            message: message.into(),
        }
    }

    pub(crate) fn schema(path: &Path, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Attaches a context string to core results.
pub(crate) trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for dualsig_core::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| Error::Core {
            context: context(),
            source,
        })
    }
}
