pub mod algebra;
pub mod averaging;
pub mod convergence;
pub mod ds;
pub mod error;
pub mod maximal;
pub mod orlicz;
pub mod random;
pub mod report;
pub mod scenario;
pub mod singular;
pub mod subseq;
pub mod weights;

pub use error::{Error, Result};
