use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("max_y_chunk = {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error("corrupt SELLPACK image: {0}")]
    Corruption(String),

    #[error("COO tile ({tile_row}, {tile_col}) holds {nnz} nonzeros, capacity is {capacity}")]
    TileOverflow {
        tile_row: usize,
        tile_col: usize,
        nnz: usize,
        capacity: usize,
    },

    #[error("PE ({row}, {col}) [{role}] needs {bytes} B of local memory, budget is {budget} B (over by {} B)", bytes - budget)]
    MemoryBudget {
        row: usize,
        col: usize,
        role: &'static str,
        bytes: usize,
        budget: usize,
    },

    #[error("placement needs a {rows}x{cols} grid, cap is {cap_rows}x{cap_cols}{hint}")]
    GridCap {
        rows: usize,
        cols: usize,
        cap_rows: usize,
        cap_cols: usize,
        hint: &'static str,
    },

    #[error("invalid placement: {0}")]
    Placement(String),

    #[error("invalid host script: {0}")]
    Script(String),

    #[error("deadlock at cycle {cycle}: {diagnostic}")]
    Deadlock { cycle: u64, diagnostic: String },

    #[error("PE ({row}, {col}) program fault: {message}")]
    ProgramFault {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
