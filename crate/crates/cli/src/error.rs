use std::fmt;

/// Exit codes. They are part of the command-line contract.
pub mod code {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const GAP_ABOVE_TOL: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const UNBOUNDED: i32 = 4;
    pub const PARSE: i32 = 64;
    pub const HASH_MISMATCH: i32 = 65;
    pub const NO_INPUT: i32 = 66;
    pub const NUMERIC: i32 = 70;
    pub const CANT_CREATE: i32 = 73;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> CliError {
        CliError { code, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> CliError {
        CliError::new(code::PARSE, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<stochdual::Error> for CliError {
    fn from(e: stochdual::Error) -> CliError {
        use stochdual::Error as E;
        let c = match e {
            E::Infeasible => code::INFEASIBLE,
            E::Unbounded => code::UNBOUNDED,
            E::NoClosedForm(_) | E::NotProxFriendly(_) | E::Numerical(_) | E::MaxIter => code::NUMERIC,
            _ => code::PARSE,
        };
        CliError::new(c, e.to_string())
    }
}
