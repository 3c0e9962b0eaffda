use std::fmt;

use bodyimage_core::ErrorCode;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_ANALYSIS: u8 = 4;

/// Parse failures of input files.
const UNREADABLE_INPUT: [&str; 14] = [
    "affect.arity",
    "affect.duplicate",
    "affect.non_numeric",
    "affect.out_of_range",
    "corpus.malformed_line",
    "corpus.manifest",
    "embedding.arity",
    "embedding.bad_header",
    "embedding.missing_header",
    "embedding.non_numeric",
    "normalize.syntax",
    "normalize.chained_rule",
    "normalize.drop_conflict",
    "normalize.empty",
];

/// A failure carrying the process exit status and a stable `module.kind` code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub exit: u8,
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_USAGE,
            code: "cli.usage".into(),
            message: message.into(),
        }
    }

    pub fn input(code: &str, message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_INPUT,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn analysis(code: &str, message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_ANALYSIS,
            code: code.into(),
            message: message.into(),
        }
    }

    /// Files that cannot be read or parsed are input problems; everything
    /// else is a failed analysis precondition.
    pub fn from_module<E: ErrorCode + fmt::Display>(e: E) -> Self {
        let code = e.code();
        if code.ends_with(".io") || UNREADABLE_INPUT.contains(&code) {
            Self::input(code, e.to_string())
        } else {
            Self::analysis(code, e.to_string())
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

/// `?`-friendly conversion for module errors.
pub trait OrCli<T> {
    fn or_cli(self) -> Result<T>;
}

impl<T, E: ErrorCode + fmt::Display> OrCli<T> for std::result::Result<T, E> {
    fn or_cli(self) -> Result<T> {
        self.map_err(CliError::from_module)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bodyimage_core::embedding::read_embeddings;
    use bodyimage_core::lme::LmeError;

    #[test]
    fn exit_status_follows_error_kind() {
        let parse = read_embeddings("2 3\ncat 1 0\n".as_bytes(), None).unwrap_err();
        assert_eq!(CliError::from_module(parse).exit, EXIT_INPUT);
        let fit = CliError::from_module(LmeError::TooFewGroups(1));
        assert_eq!(fit.exit, EXIT_ANALYSIS);
        assert_eq!(fit.to_string(), format!("error[lme.too_few_groups]: {}", LmeError::TooFewGroups(1)));
    }
}
