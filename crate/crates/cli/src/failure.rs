use std::fmt::Display;
use std::path::Path;

/// A fatal error with its exit code: 1 for IO or bad data, 2 for configuration.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn data(e: impl Display) -> Self {
        Self { code: 1, message: e.to_string() }
    }

    pub fn config(e: impl Display) -> Self {
        Self { code: 2, message: e.to_string() }
    }

    pub fn io(path: &Path, e: impl Display) -> Self {
        Self { code: 1, message: format!("{}: {e}", path.display()) }
    }
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::io(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::data)?;
    text.push('\n');
    write_file(path, text)
}
