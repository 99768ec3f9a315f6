pub mod asymptotics;
pub mod closed_form;
pub mod ddouble;
pub mod dyadic;
pub mod error;
pub mod export;
pub mod kahan;
pub mod model;
pub mod monte_carlo;
pub mod quad;

pub use dyadic::DyadicProb;
pub use error::{Error, Result};
