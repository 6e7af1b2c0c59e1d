pub mod broadcast;
pub mod core_consensus;
pub mod crypto;
pub mod harness;
pub mod simnet;
pub mod universal;
pub mod vector_consensus;
pub mod validity;

pub use validity::{InputConfiguration, ProcessId, SystemParams, ValidityProperty, Value, ValueSpace};
