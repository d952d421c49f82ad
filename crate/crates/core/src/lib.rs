pub mod catalog;
pub mod cm_kernel;
pub mod cylinder;
pub mod damped;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod ibp;
pub mod manifold;
pub mod oracle;
pub mod rng;
pub mod rolling;
pub mod series;
pub mod stats;
pub mod stochastic;
pub mod submersion;

pub use error::{Error, Result};
pub use grid::Grid;
pub use manifold::{Frame, Kind, Manifold, Point, VectorField};
pub use series::{CmVector, MatrixPath};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    pub mod kernel {}
    #[doc = include_str!("../../../book/src/transport.md")]
    pub mod transport {}
    #[doc = include_str!("../../../book/src/ibp.md")]
    pub mod ibp {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub mod oracle {}
    #[doc = include_str!("../../../book/src/submersion.md")]
    pub mod submersion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    pub mod acceptance {}
}
