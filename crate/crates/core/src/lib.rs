//! Spectral tools for control problems of the heat equation on model 1-D
//! domains: heat kernels, explicit full-domain and subdomain controls,
//! backward inversion of the semigroup, and independent numerical oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod backinv;
pub mod domain;
pub mod error;
pub mod fullctl;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod par;
pub mod subctl;
pub mod verify;

pub use domain::{DomainKind, Field, LaplacianBackend, SpectralDomain};
pub use error::{HeatError, Result};
pub use fullctl::{FullControlResult, FullControlSpec, SeriesTolerances, SeriesVariant};
pub use kernel::SubdomainWindow;
pub use subctl::SubdomainControlSystem;
