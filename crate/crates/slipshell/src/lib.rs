//! Fluid–shell interaction in a cylinder with Navier slip on the elastic
//! wall.

pub mod config;
pub mod coupling;
pub mod error;
pub mod extension;
pub mod forms;
pub mod galerkin;
pub mod geometry;
pub mod koiter;
pub mod numerics;
pub mod output;
pub mod piola;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};

/// Concept chapters of the book; their code blocks run as doc-tests.
pub mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    pub mod spaces {}
    #[doc = include_str!("../../../book/src/piola.md")]
    pub mod piola {}
    #[doc = include_str!("../../../book/src/extensions.md")]
    pub mod extensions {}
    #[doc = include_str!("../../../book/src/koiter.md")]
    pub mod koiter {}
    #[doc = include_str!("../../../book/src/forms.md")]
    pub mod forms {}
    #[doc = include_str!("../../../book/src/galerkin.md")]
    pub mod galerkin {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    pub mod coupling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
}
