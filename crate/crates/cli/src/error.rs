use arnold_stab_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(CoreError),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Solver(e) => write!(f, "solver failure: {e}"),
            CliError::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        // Bad user input surfaces from the core as these variants.
        match e {
            CoreError::InvalidInput(m) | CoreError::Resolution(m) | CoreError::Format(m) => CliError::Config(m),
            CoreError::Disconnected { .. } | CoreError::NestedHoles | CoreError::Component { .. } => CliError::Config(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Solver(CoreError::Io(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::Solver(CoreError::Format(e.to_string()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
