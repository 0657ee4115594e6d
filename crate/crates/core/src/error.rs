//! Error codes shared by every layer of the platform.
//!
//! Each failure carries a stable machine-readable code plus a human message.
//! The gateway maps codes 1:1 onto HTTP statuses, so nothing may fail with an
//! unclassified string.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable machine-readable failure codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    // ledger
    BadSignature,
    BadNonce,
    OversizedTx,
    NoSuchContract,
    CorruptLog,
    // contract runtime
    BadInitArgs,
    NoSuchMethod,
    BadArgs,
    // identity registry
    AlreadyRegistered,
    AddressMismatch,
    KeyMismatch,
    NotRegistered,
    BadUrl,
    // databom registry
    DuplicateProject,
    NotOwner,
    ImmutableOwner,
    NotAuthorised,
    DuplicateUuid,
    DanglingDependency,
    MissingField,
    NoSuchDataset,
    UnchangedContent,
    TooFewParents,
    NoSuchVersion,
    BadField,
    BadUuid,
    InvalidYear,
    UnknownOperation,
    // factory
    BadSchema,
    // lineage
    UnknownLicence,
    UnresolvedActor,
    // generator
    NoMetadata,
    MalformedSidecar,
    RegistryUnreachable,
    // plumbing
    #[serde(rename = "IO_ERROR")]
    Io,
    Timeout,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::BadSignature => "BAD_SIGNATURE",
            ErrorCode::BadNonce => "BAD_NONCE",
            ErrorCode::OversizedTx => "OVERSIZED_TX",
            ErrorCode::NoSuchContract => "NO_SUCH_CONTRACT",
            ErrorCode::CorruptLog => "CORRUPT_LOG",
            ErrorCode::BadInitArgs => "BAD_INIT_ARGS",
            ErrorCode::NoSuchMethod => "NO_SUCH_METHOD",
            ErrorCode::BadArgs => "BAD_ARGS",
            ErrorCode::AlreadyRegistered => "ALREADY_REGISTERED",
            ErrorCode::AddressMismatch => "ADDRESS_MISMATCH",
            ErrorCode::KeyMismatch => "KEY_MISMATCH",
            ErrorCode::NotRegistered => "NOT_REGISTERED",
            ErrorCode::BadUrl => "BAD_URL",
            ErrorCode::DuplicateProject => "DUPLICATE_PROJECT",
            ErrorCode::NotOwner => "NOT_OWNER",
            ErrorCode::ImmutableOwner => "IMMUTABLE_OWNER",
            ErrorCode::NotAuthorised => "NOT_AUTHORISED",
            ErrorCode::DuplicateUuid => "DUPLICATE_UUID",
            ErrorCode::DanglingDependency => "DANGLING_DEPENDENCY",
            ErrorCode::MissingField => "MISSING_FIELD",
            ErrorCode::NoSuchDataset => "NO_SUCH_DATASET",
            ErrorCode::UnchangedContent => "UNCHANGED_CONTENT",
            ErrorCode::TooFewParents => "TOO_FEW_PARENTS",
            ErrorCode::NoSuchVersion => "NO_SUCH_VERSION",
            ErrorCode::BadField => "BAD_FIELD",
            ErrorCode::BadUuid => "BAD_UUID",
            ErrorCode::InvalidYear => "INVALID_YEAR",
            ErrorCode::UnknownOperation => "UNKNOWN_OPERATION",
            ErrorCode::BadSchema => "BAD_SCHEMA",
            ErrorCode::UnknownLicence => "UNKNOWN_LICENCE",
            ErrorCode::UnresolvedActor => "UNRESOLVED_ACTOR",
            ErrorCode::NoMetadata => "NO_METADATA",
            ErrorCode::MalformedSidecar => "MALFORMED_SIDECAR",
            ErrorCode::RegistryUnreachable => "REGISTRY_UNREACHABLE",
            ErrorCode::Io => "IO_ERROR",
            ErrorCode::Timeout => "TIMEOUT",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorCode> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A coded failure. Contract reverts, ledger rejections, lineage and
/// generator errors all use this shape.
#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct Error {
    pub code: ErrorCode,
    pub message: String,
}

impl Error {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Error {
        Error {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Error {
        Error::new(ErrorCode::Io, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_serde_matches_as_str() {
        for code in [
            ErrorCode::BadSignature,
            ErrorCode::OversizedTx,
            ErrorCode::NoSuchContract,
            ErrorCode::DanglingDependency,
            ErrorCode::UnchangedContent,
            ErrorCode::MalformedSidecar,
        ] {
            let json = serde_json::to_value(code).unwrap();
            assert_eq!(json, serde_json::Value::String(code.as_str().to_string()));
            assert_eq!(ErrorCode::parse(code.as_str()), Some(code));
        }
    }

    #[test]
    fn display_includes_code_and_message() {
        let e = Error::new(ErrorCode::BadNonce, "expected 3, got 5");
        assert_eq!(e.to_string(), "BAD_NONCE: expected 3, got 5");
    }
}
