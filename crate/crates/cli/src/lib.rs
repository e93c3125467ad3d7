//! Library surface of the `matclass` binary: configuration loading, on-disk
//! formats, and the subcommand implementations. The binary is a thin clap
//! wrapper over this crate, and integration tests drive it the same way.

pub mod commands;
pub mod config;
pub mod formats;

/// CLI failure modes, each with a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad usage or an unreadable/invalid configuration. Exit code 1.
    Config(String),
    /// An unreadable, malformed, or incompatible data file. Exit code 2.
    Data(String),
    /// The demo ran to completion but missed its accuracy gate. Exit code 3.
    Gate { accuracy: f64, threshold: f64 },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::Data(message.into())
    }

    /// Wraps a core error that was raised while validating configuration,
    /// where [`From`] would classify it as a data problem.
    pub fn from_config_error(e: matclass_core::Error) -> Self {
        Self::Config(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::Gate { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) | Self::Data(m) => f.write_str(m),
            Self::Gate { accuracy, threshold } => write!(
                f,
                "demo accuracy {accuracy:.4} is below the {threshold} gate"
            ),
        }
    }
}

impl std::error::Error for CliError {}

impl From<matclass_core::Error> for CliError {
    fn from(e: matclass_core::Error) -> Self {
        use matclass_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidMaterial(_) | E::Geometry(_) => {
                Self::Config(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}
