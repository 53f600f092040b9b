pub mod adagrad;
pub mod datasets;
pub mod dictionary;
pub mod dmd;
pub mod error;
pub mod estimation;
pub mod field;
pub mod givens;
pub mod numerics;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result};
