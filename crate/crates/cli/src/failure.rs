use chainhoi::ChainError;

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const NUMERIC: u8 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type Outcome<T> = Result<T, Failure>;

impl Failure {
    pub fn config(m: impl Into<String>) -> Failure {
        Failure { code: CONFIG, message: m.into() }
    }

    pub fn data(m: impl Into<String>) -> Failure {
        Failure { code: DATA, message: m.into() }
    }

    pub fn numeric(m: impl Into<String>) -> Failure {
        Failure { code: NUMERIC, message: m.into() }
    }
}

/// Default exit code for a library error when the call site does not force one.
pub fn code_of(e: &ChainError) -> u8 {
    use ChainError::*;
    match e {
        Config(_) | InvalidSpec(_) | InvalidChains(_) => CONFIG,
        Nn(_) | Shape(_) | Timestep { .. } | StepOrder { .. } | InvalidFeatures(_) => NUMERIC,
        _ => DATA,
    }
}

pub trait ResultExt<T> {
    fn config(self) -> Outcome<T>;
    fn data(self) -> Outcome<T>;
    fn classify(self) -> Outcome<T>;
    /// Names `path` in I/O errors, which otherwise say only what failed.
    fn at(self, path: &std::path::Path) -> Result<T, ChainError>;
}

impl<T, E: Into<ChainError>> ResultExt<T> for Result<T, E> {
    fn config(self) -> Outcome<T> {
        self.map_err(|e| Failure::config(e.into().to_string()))
    }

    fn data(self) -> Outcome<T> {
        self.map_err(|e| {
            let e = e.into();
            // configuration problems found while loading data keep their code
            let code = if code_of(&e) == CONFIG { CONFIG } else { DATA };
            Failure { code, message: e.to_string() }
        })
    }

    fn classify(self) -> Outcome<T> {
        self.map_err(|e| {
            let e = e.into();
            Failure { code: code_of(&e), message: e.to_string() }
        })
    }

    fn at(self, path: &std::path::Path) -> Result<T, ChainError> {
        self.map_err(|e| match e.into() {
            ChainError::Io(io) => ChainError::Io(std::io::Error::new(io.kind(), format!("{}: {}", path.display(), io))),
            other => other,
        })
    }
}
