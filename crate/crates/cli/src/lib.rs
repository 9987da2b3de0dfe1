//! Command-line driver: argument parsing, configuration, artifact layout and
//! report emission around the `coldpack` library.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

use sha2::{Digest, Sha256};

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

/// 0 on success, 2 for configuration and validation errors, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<coldpack::Error>() {
            if matches!(e, coldpack::Error::Config { .. } | coldpack::Error::Parse { .. }) {
                return 2;
            }
        }
    }
    1
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let usage: anyhow::Error = UsageError::Config("x".into()).into();
        assert_eq!(exit_code(&usage.context("stage gen")), 2);
        let core: anyhow::Result<()> = Err(coldpack::Error::InvalidInput("boom".into())).context("stage");
        assert_eq!(exit_code(&core.unwrap_err()), 1);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
