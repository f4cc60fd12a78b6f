//! Tree-ensemble kernels.
//!
//! Random forests and gradient-boosted trees are fitted from scratch; the
//! kernel each one induces (the fraction of trees in which two points share
//! a terminal node) is then used for kernel ridge regression and
//! classification. Synthetic benchmark generators and a repeated-split
//! experiment harness sit on top.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below name the common instantiations.

pub mod bench;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod kernels;
pub mod krr;
pub mod linalg;
pub mod model_io;
pub mod num;
pub mod rng;
pub mod simgen;
pub mod tabular;
pub mod tree;

pub use dataset::{Dataset, Task};
pub use ensemble::{fit_gbt, fit_rf, leaf_assignments, Ensemble, EnsembleKind, EnsembleParams, GbtParams, Loss, RfParams};
pub use error::{Error, Result};
pub use kernels::{check_psd, ensemble_kernel, feature_map, laplace_kernel, mantel, FeatureMap, KernelKind, KernelMatrix};
pub use krr::{classify_krr, fit_krr, predict_krr, select_lambda, KrrModel};
pub use num::Real;
pub use simgen::{SimSample, SimSetup};
pub use tree::{best_split, fit_tree, SplitCandidate, SplitCriterion, Tree, TreeParams};

pub type Dataset64 = Dataset<f64>;
pub type Tree64 = Tree<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type GbtParams64 = GbtParams<f64>;
pub type KernelMatrix64 = KernelMatrix<f64>;
pub type KrrModel64 = KrrModel<f64>;

pub type Dataset32 = Dataset<f32>;
pub type Tree32 = Tree<f32>;
pub type Ensemble32 = Ensemble<f32>;
pub type GbtParams32 = GbtParams<f32>;
pub type KernelMatrix32 = KernelMatrix<f32>;
pub type KrrModel32 = KrrModel<f32>;
