use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("frequency {frequency} aliases on a grid of {grid_size} points")]
    Aliasing { frequency: i64, grid_size: usize },

    #[error("index {index} out of range for a system of {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {0} in support")]
    DuplicateIndex(usize),

    #[error("point {0} is outside the domain")]
    PointOutsideDomain(f64),

    #[error("norming functional undefined for the zero element")]
    UndefinedFunctional,

    #[error("norming functional vanishes on every remaining dictionary element")]
    OrthogonalityStall,

    #[error("degenerate basis: {0}")]
    Degenerate(String),

    #[error("{subsets} subsets exceed the budget of {budget}")]
    BudgetExceeded { subsets: u128, budget: u64 },

    #[error("bisection range exhausted: no success up to m = {0}")]
    RangeExhausted(usize),
}
