//! Level curves of polynomials, rational functions and ratios of finite
//! Blaschke products.

pub mod annulus;
pub mod corpus;
pub mod error;
pub mod export;
pub mod funcspace;
pub mod gauss_lucas;
pub mod geom;
pub mod levelgraph;
pub mod metrics;
pub mod order;
pub mod raster;
pub mod tol;
pub mod tracer;

pub use error::{Error, ErrorClass, Result};
pub use funcspace::{parse_rational, DomainSpec, FnKind, Polynomial, RationalFn, Root, Value};
pub use num_complex::Complex64;
pub use tol::Tolerances;
