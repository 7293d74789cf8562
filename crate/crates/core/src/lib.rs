//! Numerical toolkit for plurisubharmonicity certification on domains in `C^n`.
//!
//! Given an explicit defining function `ρ` of a bounded domain `Ω ⊂ C^n`
//! (`n ≤ 4`), the crate
//!
//! * evaluates `ρ` with exact first and second derivatives ([`expr`]),
//! * converts real jets into Wirtinger data, samples the boundary and collars,
//!   and normalizes defining functions ([`geometry`]),
//! * computes Levi forms, ranks, the weakly pseudoconvex set and the scalar
//!   invariants `S(r)` and `K₀` ([`levi`]),
//! * certifies Diederich–Fornæss exponents, estimates Oka and DF indices and
//!   evaluates the closed-form lower bounds ([`certify`], [`bounds`]),
//! * expands `d^c`/`dd^c` forms in an exterior-algebra engine and checks
//!   Monge–Ampère decay laws and Stokes consistency ([`forms`],
//!   [`monge_ampere`]).
//!
//! Sample-level work runs through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! bit-identical either way.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certify;
pub mod cli;
mod error;
pub mod expr;
pub mod fit;
pub mod forms;
pub mod geometry;
pub mod levi;
pub mod linalg;
pub mod monge_ampere;
pub mod par;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use expr::{parse, Expression, Jet2};
pub use geometry::{DomainSpec, MetricKind};
