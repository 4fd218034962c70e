#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contact;
pub mod curves;
pub mod eigen;
pub mod error;
pub mod feedback;
pub mod geom;
pub mod ode;
pub mod pmp;
pub mod profile;
pub mod quadrature;
pub mod quality;
pub mod spline;

pub use error::{Error, Result};
pub use geom::Vec2;
