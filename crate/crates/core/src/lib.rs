//! Certified upper bounds on the ℓ∞ Lipschitz constant of smooth feed-forward
//! networks.
//!
//! The gradient of a network with activation derivatives in `[0, 1]` is bounded
//! by a multilinear polynomial over the unit box (the *norm-gradient
//! polynomial*). Its maximum is upper-bounded by a hierarchy of linear programs
//! built from products `Π x_j^a (1 - x_j)^b`, restricted to cliques read off the
//! network's connectivity.
//!
//! Module map:
//! - [`network`]: networks, gradients, baselines (UBP, LBS) and local bounds.
//! - [`polynomial`]: sparse multivariate polynomials and the norm-gradient polynomial.
//! - [`sparsity`]: computational graph and the clique pattern it induces.
//! - [`certificate`]: certificate terms, LP assembly and the end-to-end bound.
//! - [`lp`]: two-phase revised simplex and MPS export.
//! - [`sdp`]: QCQP reformulation, Shor relaxation and SDPA export.
//! - [`oracle`]: exact vertex maximization and finite differences for testing.

pub mod certificate;
pub mod error;
pub mod fmt;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod polynomial;
pub mod sdp;
pub mod sparsity;

pub use error::{Error, Result};
