pub mod dynamics;
pub mod error;
pub mod ising;
pub mod ldp;
pub mod ode;
pub mod quad;
pub mod scaling;
pub mod specfun;
pub mod workstats;

pub use error::{Error, Result};
