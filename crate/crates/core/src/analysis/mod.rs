//! Complexity accounting, gradient checks, latency measurement and a toy fitting task.

pub mod alloc;
pub mod bench;
pub mod complexity;
pub mod fit;
pub mod gradcheck;

pub use bench::{analyze, bench, BenchSpec, ComplexityReport, LatencyStats};
pub use complexity::{count_flops, count_params, count_params_for, stage_params, FlopBreakdown};
pub use fit::{toy_fit, EdgeTask, FitReport};
pub use gradcheck::{check_op, check_trials, grad_check, CheckOp, Differentiable, GradCheckReport};
