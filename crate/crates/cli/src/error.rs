use std::path::PathBuf;

use thiserror::Error;

/// Exit status for a run that found a property violation.
pub const EXIT_VIOLATION: i32 = 2;
/// Exit status for bad input or a failed operation.
pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `location` is the JSON path of the offending value.
    #[error("{file}: at {location}: {message}")]
    Schema {
        file: String,
        location: String,
        message: String,
    },
    #[error("[{module}] {message}")]
    Module { module: &'static str, message: String },
}

impl CliError {
    pub fn module(module: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Module {
            module,
            message: e.to_string(),
        }
    }

    pub fn field(file: &str, location: &str, message: impl Into<String>) -> Self {
        CliError::Schema {
            file: file.to_string(),
            location: location.to_string(),
            message: message.into(),
        }
    }
}

pub fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses JSON, reporting the path of the first value that fails to
/// deserialize.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str, file: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let location = match e.path().to_string().as_str() {
            "." => "$".to_string(),
            p => format!("${}", if p.starts_with('[') { p.to_string() } else { format!(".{p}") }),
        };
        CliError::Schema {
            file: file.to_string(),
            location,
            message: e.into_inner().to_string(),
        }
    })
}
