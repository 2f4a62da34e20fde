pub mod dynamics;
pub mod error;
pub mod fem;
pub mod krylov;
pub mod network;
pub mod schwarz;
pub mod sparsela;

pub use error::{Error, Result};
