pub mod embed_io;
pub mod error;
pub mod experiments;
pub mod freqcount;
pub mod hypotheses;
pub mod metrics;
pub mod rdm;

pub use error::{Error, Result};
