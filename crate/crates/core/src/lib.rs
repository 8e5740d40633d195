//! Parametrix laboratory for (∂_z − iA + B)u = 0 on the periodic line.
//!
//! Symbols are evaluated as truncated Taylor jets in (x, ξ, z), quantized on
//! a uniform grid (Kohn–Nirenberg, direct sums) and checked against a
//! spectral method-of-lines reference solver.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod egorov;
pub mod error;
pub mod estimates;
pub mod jet;
pub mod parametrix;
pub mod quantize;
pub mod rays;
pub mod solver;
pub mod sqrt;
pub mod symbol;

pub use egorov::{conjugation_error, conjugation_errors, egorov_report, ConjugationProbe};
pub use error::{Error, Result};
pub use estimates::{EstimateReport, SampleSpec};
pub use jet::{Axis, CJet, Jet, RJet};
pub use parametrix::{build_parametrix, conjugated_parametrix, parametrix_apply, ParametrixSymbol};
pub use quantize::{apply_op, wave_packet, Grid, GridSymbol, WaveField};
pub use rays::{trace_ray, RaySolution, RaySystem};
pub use solver::{energy_report, evolve, EnergyReport, EvolutionTrace, IVPProblem, NormP};
pub use sqrt::{build_sqrt, sqrt_residual_report, SqrtSymbol};
pub use symbol::{
    build_cutoff_b, AssumptionParams, CutoffB, CutoffFamily, HKind, HyperbolicA, MultiplierB, RhoFn, Symbol, SymbolKind,
    SymbolModel, ZeroSymbol,
};
