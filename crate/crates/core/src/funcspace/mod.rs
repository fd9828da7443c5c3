//! The function class: polynomials, rational functions and Blaschke ratios.

pub mod domain;
pub mod parse;
pub mod poly;
pub mod rational;
pub mod roots;

pub use domain::DomainSpec;
pub use parse::{parse_function, parse_rational, FunctionSpec};
pub use poly::Polynomial;
pub use rational::{FnKind, RationalFn, Value};
pub use roots::{find_roots, Root};
