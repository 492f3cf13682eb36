use thiserror::Error;

/// Errors surfaced by the protection, container and dispersion layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input (bad lengths, bad flags, malformed data).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A coefficient fell outside the range its storage field admits. On the
    /// protect path this is a logic bug; on the restore path it signals a
    /// corrupted fragment.
    #[error("coefficient out of range in {band} at ({row},{col}): {value} (bound {bound})")]
    CoeffRange {
        band: &'static str,
        row: usize,
        col: usize,
        value: i32,
        bound: i32,
    },

    #[error("i/o error{}: {source}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Io {
        #[source]
        source: std::io::Error,
        offset: Option<u64>,
    },

    /// Container or image file does not parse.
    #[error("format error: {0}")]
    Format(String),

    /// Stored bytes do not match their recorded digest.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A required fragment or stream is missing.
    #[error("availability error: {0}")]
    Availability(String),

    /// A placement rule was violated (e.g. private fragment on a public target).
    #[error("policy violation: {0}")]
    Policy(String),

    /// The same (key, nonce) pair was about to be used twice in one run.
    #[error("nonce reuse detected: chunk nonce {0}")]
    NonceReuse(u64),

    /// A metric is undefined for the given input (e.g. zero variance).
    #[error("metric undefined: {0}")]
    Undefined(String),
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io {
            source,
            offset: None,
        }
    }
}

impl Error {
    pub fn io_at(source: std::io::Error, offset: u64) -> Self {
        Error::Io {
            source,
            offset: Some(offset),
        }
    }

    /// Name the storage target a transfer error happened on.
    pub fn with_target_context(self, target: &str) -> Self {
        match self {
            Error::Io { source, offset } => Error::Io {
                source: std::io::Error::new(source.kind(), format!("target {target:?}: {source}")),
                offset,
            },
            Error::Availability(m) => Error::Availability(format!("target {target:?}: {m}")),
            Error::Integrity(m) => Error::Integrity(format!("target {target:?}: {m}")),
            Error::Policy(m) => Error::Policy(format!("target {target:?}: {m}")),
            other => other,
        }
    }

    /// Transient transport failures are worth retrying; everything else
    /// (integrity, policy, structural) is not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
