use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{table}.{column}`")]
    UnknownColumn { table: String, column: String },
    #[error("row has {got} values, table `{table}` has {expected} columns")]
    RowArity {
        table: String,
        expected: usize,
        got: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("join graph over the FROM list is not connected")]
    DisconnectedJoin,
    #[error("sub-query decomposition is not defined for COUNT(DISTINCT ..) queries")]
    UnsupportedDecomposition,
    #[error("row selector {row_id} on `{table}` matched {matched} rows, expected exactly one")]
    Selector {
        table: String,
        row_id: u64,
        matched: usize,
    },
    #[error("no statistics for `{table}.{column}`")]
    MissingStats { table: String, column: String },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, example {example}")]
    NonFiniteLoss { epoch: usize, example: usize },
    #[error("training loss increased at epoch {epoch}: {previous} -> {current}")]
    LossIncreased {
        epoch: usize,
        previous: f64,
        current: f64,
    },
    #[error("malformed digit sequence: {0}")]
    MalformedDigits(String),
    #[error("feedback budget of {0} turns exhausted")]
    FeedbackBudget(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-numeric model output `{0}`")]
    NonNumeric(String),
    #[error("backend failure: {0}")]
    Backend(String),
}
