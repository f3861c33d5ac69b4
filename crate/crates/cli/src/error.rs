use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Solver(#[from] pathflow::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Validation(_) => "validation",
            CliError::Solver(e) => e.kind(),
            CliError::Io { .. } => "io",
        }
    }

    /// 2 for bad input, 3 for data the solver cannot handle, 4 for failures
    /// of the program itself.
    pub fn exit_code(&self) -> u8 {
        use pathflow::Error as E;
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Solver(e) => match e {
                E::Validation(_) | E::Domain(_) | E::Model(_) => 2,
                E::Congestion { .. } | E::InfeasibleFlux { .. } | E::UnsupportedRegime(_) | E::FreeRegime(_) => 3,
                E::Internal(_) | E::Coupling(_) | E::Io(_) => 4,
            },
        }
    }

    /// One line per message, in the form `error kind=... message="..."`.
    pub fn records(&self) -> Vec<String> {
        let messages = match self {
            CliError::Validation(m) | CliError::Solver(pathflow::Error::Validation(m)) => m.clone(),
            other => vec![other.to_string()],
        };
        messages
            .iter()
            .map(|m| format!("error kind={} message={:?}", self.kind(), m))
            .collect()
    }

    pub fn report(&self) -> ExitCode {
        for line in self.records() {
            eprintln!("{line}");
        }
        ExitCode::from(self.exit_code())
    }
}
