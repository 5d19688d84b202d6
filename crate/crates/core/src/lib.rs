//! Equal-distortion scalar quantizers.

// NaN must fail every `!(x > y)` guard, and the quadrature nodes keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod distribution;
pub mod error;
pub mod moments;
mod quadrature;
mod roots;

pub use distribution::{DensityModel, Family, Tabulated, UnimodalityReport};
pub use error::{Error, Result};
pub use moments::{cell_moment, cell_stats, one_point_optimal, partial_moment, CellStats, Order, SolverConfig};
pub mod gersho;
pub use gersho::{
    build_by_doubling, build_gersho, distortion, extend_cell, split_cell, verify_quantizer, ConstructionReport, Method,
    Quantizer, VerificationReport,
};
pub mod lloyd;
pub use lloyd::{lloyd_step, run_lloyd, Init, LloydRun, LloydState};
pub mod asymptotics;
pub use asymptotics::{
    cell_census, convergence_table, counterexample_quantizer, default_interval, diagnostics, quantization_coefficient,
    root_density_integral, zador_constant, Census, Construction, ConvergenceRow, ConvergenceTable, DiagnosticsRow,
    LevelOutcome,
};
pub mod io;
