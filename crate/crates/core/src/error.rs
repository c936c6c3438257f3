use std::path::PathBuf;

/// Errors raised anywhere in the search and training pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::sim::MAX_QUBITS)]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("CNOT control and target are both qubit {0}")]
    SameControlTarget(usize),
    #[error("parameter slot {slot} is unbound: needs index {index} but only {available} values supplied")]
    UnboundSlot {
        slot: usize,
        index: usize,
        available: usize,
    },
    #[error("dense unitary limited to {max} qubits, circuit has {n_qubits}")]
    UnitaryTooLarge { n_qubits: usize, max: usize },

    #[error("edge enumeration needs at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("edge index {index} out of range (E = {edges})")]
    EdgeOutOfRange { index: usize, edges: usize },
    #[error("duplicate edge index {0} in genotype")]
    DuplicateEdge(usize),
    #[error("entanglement level {k} exceeds edge count {edges}")]
    LevelTooLarge { k: usize, edges: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("label {label} out of range for {n_classes} classes")]
    InvalidLabel { label: usize, n_classes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty data: {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch} (non-finite loss or gradient)")]
    Diverged { epoch: usize },

    #[error("history has {have} completed trials, need at least {need}")]
    InsufficientHistory { have: usize, need: usize },
    #[error("genotype length {actual} does not match search level {expected}")]
    GenotypeLength { expected: usize, actual: usize },

    #[error("data error at row {row}, column {column}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("class `{class}` has {count} samples, fewer than the {parts} partitions")]
    ClassTooSmall {
        class: usize,
        count: usize,
        parts: usize,
    },
    #[error("need at least {need} values, got {have}")]
    TooFewSamples { need: usize, have: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for malformed or inconsistent input data (as opposed to bad configuration
    /// or runtime failures).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Cell { .. }
                | Error::MissingColumn(_)
                | Error::Data(_)
                | Error::ClassTooSmall { .. }
                | Error::InvalidLabel { .. }
                | Error::Empty(_)
        )
    }
}
