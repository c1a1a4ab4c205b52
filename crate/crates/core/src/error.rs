use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Input,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 1,
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

/// Every failure the toolkit can report.
///
/// `Display` renders a single machine-parsable line: the variant name followed by
/// `key=value` pairs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("IoError path={} reason={source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("FormatError path={} line={line} reason={reason}", path.display())]
    Format { path: PathBuf, line: u64, reason: String },
    #[error("EmptyInput path={}", path.display())]
    EmptyInput { path: PathBuf },
    #[error("DuplicateKey id={id} line={line}")]
    DuplicateKey { id: String, line: u64 },
    #[error("MissingColumn column={column}")]
    MissingColumn { column: String },
    #[error("UnknownLabel column={column} label={label}")]
    UnknownLabel { column: String, label: String },
    #[error("EmptyIntersection embeddings={embeddings} annotations={annotations}")]
    EmptyIntersection { embeddings: usize, annotations: usize },
    #[error("IdMismatch missing={missing} example={example}")]
    IdMismatch { missing: usize, example: String },
    #[error("ShapeMismatch expected={expected} found={found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("InvalidInput reason={0}")]
    InvalidInput(String),

    #[error("ConfigError reason={0}")]
    Config(String),
    #[error("KTooLarge k={k} n={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("NonPositiveSigma sigma={0}")]
    NonPositiveSigma(f64),
    #[error("InvalidSpec reason={0}")]
    InvalidSpec(String),

    #[error("ZeroNormRow row={row}")]
    ZeroNormRow { row: usize },
    #[error("ZeroBandwidth point={point}")]
    ZeroBandwidth { point: usize },
    #[error("NonSymmetric max_asymmetry={max_asymmetry:e}")]
    NonSymmetric { max_asymmetry: f64 },
    #[error("ConvergenceFailure n={n}")]
    ConvergenceFailure { n: usize },
    #[error("DisconnectedGraph components={} sizes={}", sizes.len(), join_sizes(sizes))]
    DisconnectedGraph { sizes: Vec<usize> },
    #[error("ZeroDegreeNode node={node}")]
    ZeroDegreeNode { node: usize },
    #[error("SingularLocalGram point={point}")]
    SingularLocalGram { point: usize },
    #[error("CalibrationFailure point={point} perplexity={perplexity}")]
    CalibrationFailure { point: usize, perplexity: f64 },
    #[error("NumericalOverflow iteration={iteration}")]
    NumericalOverflow { iteration: usize },
    #[error("ZeroRowSum row={row}")]
    ZeroRowSum { row: usize },
    #[error("DegenerateSpectrum nonzero={nonzero}")]
    DegenerateSpectrum { nonzero: usize },
    #[error("SingleClass label={label}")]
    SingleClass { label: String },
}

fn join_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. }
            | Format { .. }
            | EmptyInput { .. }
            | DuplicateKey { .. }
            | MissingColumn { .. }
            | EmptyIntersection { .. }
            | IdMismatch { .. }
            | ShapeMismatch { .. }
            | InvalidInput(_) => ErrorClass::Input,
            Config(_) | KTooLarge { .. } | NonPositiveSigma(_) | InvalidSpec(_) | UnknownLabel { .. } => {
                ErrorClass::Config
            }
            ZeroNormRow { .. }
            | ZeroBandwidth { .. }
            | NonSymmetric { .. }
            | ConvergenceFailure { .. }
            | DisconnectedGraph { .. }
            | ZeroDegreeNode { .. }
            | SingularLocalGram { .. }
            | CalibrationFailure { .. }
            | NumericalOverflow { .. }
            | ZeroRowSum { .. }
            | DegenerateSpectrum { .. }
            | SingleClass { .. } => ErrorClass::Numerical,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
