//! Local kernel filters as one-shot approximations of MAP denoisers.
//!
//! The crate covers both directions of the loss/kernel correspondence:
//! a robust loss `rho` yields first- and second-order filter kernels, and a
//! kernel integrates back to the loss whose MAP problem it approximates.
//! Iterative reference solvers, a dense graph-Laplacian oracle, the closed
//! form 1D Dirichlet filters and a PSNR experiment harness are included.
//!
//! Modules:
//! - [`image`], [`pgm`], [`noise`], [`metrics`], [`stencil`], [`corpus`]: shared plumbing
//! - [`losses`]: scalar loss families with analytic derivatives
//! - [`kernels`], [`quadrature`]: kernel families and the two-way translation
//! - [`graph`]: dense affinity/Laplacian oracle
//! - [`filters`]: one-shot filters and the Dirichlet closed forms
//! - [`solvers`]: gradient descent and heavy-ball MAP solvers
//! - [`experiments`]: sweeps and CSV emission

pub mod corpus;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod graph;
pub mod image;
pub mod io;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod pgm;
pub mod quadrature;
pub mod solvers;
pub mod stencil;

pub use crate::corpus::CorpusImage;
pub use crate::error::{Error, Result};
pub use crate::filters::{FilterConfig, PeriodicFilter1D};
pub use crate::graph::{AffinityMatrix, LaplacianBundle};
pub use crate::image::Image;
pub use crate::kernels::{BridgeOrder, ScalarKernel, TranslationScale};
pub use crate::losses::ScalarLoss;
pub use crate::metrics::{l1_filter_distance, psnr, DEFAULT_PEAK};
pub use crate::noise::{add_gaussian_noise, NoiseSpec};
pub use crate::pgm::{load_pgm, save_pgm};
pub use crate::solvers::{MapProblem, SolverConfig};
pub use crate::stencil::{make_box_stencil, make_gaussian_stencil, Boundary, Stencil};
