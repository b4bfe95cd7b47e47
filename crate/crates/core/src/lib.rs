//! Trace-norm regularized Tucker decompositions of dense tensors.
//!
//! Two solvers built on a Jacobi-parallel ADMM:
//!
//! * [`ctd`]: the convex model `Σ_n ‖X_(n)‖_tr + λ/2 ‖X − T‖_F²`, which
//!   picks the mode ranks itself;
//! * [`nctd`]: HOOI with a trace-norm penalty on the core unfoldings,
//!   robust to overestimated ranks while only ever taking SVDs of small
//!   matrices.
//!
//! HOSVD and HOOI are provided as baselines, along with a synthetic data
//! generator, recovery metrics and the experiment harness used by the
//! `trace-tucker` binary.
//!
//! Tensors are stored first-index-fastest and mode indices are 0-based in
//! the API. The numeric code is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.
//!
//! ```
//! use trace_tucker::{ctd_decompose, SolverConfig, SynthSpec};
//!
//! let data = SynthSpec::new(vec![12, 12, 12], vec![2, 2, 2])
//!     .with_seed(7)
//!     .generate::<f64>()
//!     .unwrap();
//! let fit = ctd_decompose(&data.noisy, &SolverConfig::ctd_default()).unwrap();
//! assert_eq!(fit.mode_ranks, vec![2, 2, 2]);
//! ```

pub mod baselines;
pub mod config;
pub mod ctd;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kv;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod nctd;
pub mod report;
pub mod scalar;
pub mod tensor;
pub mod tucker;

pub use baselines::{hooi, hosvd, HooiResult};
pub use config::SolverConfig;
pub use ctd::{ctd_decompose, CtdResult, CtdState};
pub use datagen::{add_outliers, gen_tucker, SynthData, SynthSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::{rse, TrialOutcome, SUCCESS_RSE};
pub use nctd::{nctd_decompose, NctdResult, NctdState};
pub use report::{IterationRecord, SolveReport, StopReason};
pub use scalar::{Element, Scalar};
pub use tensor::DenseTensor;
pub use tucker::FactorModel;

pub type Tensor = DenseTensor<f64>;
pub type Mat = Matrix<f64>;
pub type Model = FactorModel<f64>;
pub type Config = SolverConfig<f64>;
