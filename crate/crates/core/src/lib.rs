pub mod borel;
pub mod claim_number;
pub mod compounds;
pub mod error;
pub mod family;
pub mod numerics;
pub mod oracle;
pub mod panjer;
pub mod pmf;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::LogWeight;
pub use pmf::LogPmf;
