//! Pseudospectral simulation and verification of 2D gravity water waves
//! written in holomorphic (modified Lagrangian) coordinates.

pub mod cauchy;
pub mod cli;
pub mod cubic;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod flow;
pub mod grid;
pub mod identity;
pub mod material;

pub use error::{Error, Result};

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod guide_introduction {}
#[doc = include_str!("../../../book/src/grid.md")]
pub mod guide_grid {}
#[doc = include_str!("../../../book/src/cauchy.md")]
pub mod guide_cauchy {}
#[doc = include_str!("../../../book/src/flow.md")]
pub mod guide_flow {}
#[doc = include_str!("../../../book/src/cubic.md")]
pub mod guide_cubic {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod guide_evolution {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod guide_diagnostics {}
#[doc = include_str!("../../../book/src/identities.md")]
pub mod guide_identities {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod guide_cli {}
