//! Universal algebra over structure categories of finite-ordinal functions.
//!
//! The crate is layered bottom-up: [`finord`] supplies the function
//! arithmetic, [`context`] the eight modelable context structures, [`syntax`]
//! terms and theories, [`deduction`] bounded saturation with proof objects,
//! [`setmodel`] finite-set semantics and [`universal`] the term-model and
//! universal-model constructions. [`selftest`] bundles the acceptance checks.

pub mod congruence;
pub mod context;
pub mod deduction;
pub mod finord;
pub mod selftest;
pub mod setmodel;
pub mod symbol;
pub mod syntax;
pub mod universal;

pub use symbol::Sym;
