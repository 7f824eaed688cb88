use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const INVALID_CONFIG: i32 = 2;
    pub const ORACLE_MISMATCH: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("oracle mismatch in {check}: {detail}")]
    Oracle { check: String, detail: String },
    #[error("output encoding failed: {0}")]
    Encode(String),
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) | Self::Encode(_) => exit::IO,
            Self::Config { .. } => exit::INVALID_CONFIG,
            Self::Oracle { .. } => exit::ORACLE_MISMATCH,
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        let value = match self {
            Self::Io(e) => serde_json::json!({"error": "io", "message": e.to_string()}),
            Self::Encode(m) => serde_json::json!({"error": "io", "message": m}),
            Self::Config { field, message } => {
                serde_json::json!({"error": "invalid-config", "field": field, "message": message})
            }
            Self::Oracle { check, detail } => {
                serde_json::json!({"error": "oracle-mismatch", "check": check, "message": detail})
            }
        };
        value.to_string()
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Self::Io(io),
            other => Self::Encode(format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Self::Io(e.into())
        } else {
            Self::Encode(e.to_string())
        }
    }
}

impl From<logrem_core::Error> for HarnessError {
    fn from(e: logrem_core::Error) -> Self {
        use logrem_core::Error as E;
        match e {
            E::NotPositiveSemidefinite { .. } | E::ComplexSpectrum(_) | E::CholeskyFailed => Self::Oracle {
                check: "spectral".into(),
                detail: e.to_string(),
            },
            other => Self::config("parameters", other),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::config("n", "bad").exit_code(), 2);
        let oracle = HarnessError::Oracle {
            check: "covariance-check".into(),
            detail: "x".into(),
        };
        assert_eq!(oracle.exit_code(), 3);
        assert!(oracle.to_json().contains("oracle-mismatch"));
        let spectral: HarnessError = logrem_core::Error::ComplexSpectrum(1.0).into();
        assert_eq!(spectral.exit_code(), 3);
        assert_eq!(HarnessError::Io(std::io::Error::other("x")).exit_code(), 1);
    }
}
