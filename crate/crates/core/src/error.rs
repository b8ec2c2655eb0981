use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A token was empty or contained whitespace.
    InvalidToken(String),
    /// Tags and tokens disagree in length.
    TagLengthMismatch { tokens: usize, tags: usize },
    EmptyCorpus,
    /// An alignment link points outside its sentence pair.
    LinkOutOfRange { src: usize, tgt: usize, src_len: usize, tgt_len: usize },
    /// Two parallel lists had different lengths.
    LengthMismatch { left: usize, right: usize },
    /// TER is undefined for an empty reference.
    EmptyReference,
    /// Every reference in a tuning set is empty.
    DegenerateDevSet,
    InvalidRule(String),
    InvalidModel(String),
    InvalidArgument(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidToken(t) => write!(f, "invalid token {t:?}"),
            Error::TagLengthMismatch { tokens, tags } => {
                write!(f, "{tags} tags for {tokens} tokens")
            }
            Error::EmptyCorpus => f.write_str("corpus is empty"),
            Error::LinkOutOfRange { src, tgt, src_len, tgt_len } => write!(
                f,
                "alignment link {src}-{tgt} out of range for sentence pair of lengths {src_len}/{tgt_len}"
            ),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::EmptyReference => f.write_str("reference sentence is empty"),
            Error::DegenerateDevSet => f.write_str("every development reference is empty"),
            Error::InvalidRule(m) => write!(f, "invalid rule: {m}"),
            Error::InvalidModel(m) => write!(f, "invalid model: {m}"),
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
        }
    }
}

impl core::error::Error for Error {}
