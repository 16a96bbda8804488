//! Error classes behind the exit codes.

use std::fmt;

/// Bad flags or option values; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Unreadable or inconsistent input data; exit code 2.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for DataError {}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Exit code for an error chain: the first classified cause wins; library
/// parameter errors count as usage errors and other library errors as data
/// errors.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<contact_core::Error>() {
            return match e {
                contact_core::Error::InvalidParameter(_) => EXIT_USAGE,
                contact_core::Error::Io(_) => EXIT_INTERNAL,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_INTERNAL
}
