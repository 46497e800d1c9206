//! Tensor files, weight directories and report serialization.

pub mod npy;
pub mod report;
pub mod weights;

pub use npy::{read_npy, read_npy_as, write_npy, AnyTensor};
pub use report::{read_report_csv, read_report_json, write_report_csv, write_report_json, ReportRow};
pub use weights::{load_weights, save_weights};
