//! Explicit dimension estimates for nonautonomous dynamical systems over
//! valued fields, with the numerical machinery used to check them.

pub mod boxdim;
pub mod dde;
pub mod field;
pub mod growth;
pub mod linalg;
