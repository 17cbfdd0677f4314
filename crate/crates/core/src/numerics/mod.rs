//! Numerical building blocks shared by the pricers and calibrators.

pub mod lsq;
pub mod normal;
pub mod quad;
pub mod roots;
