//! End-to-end orchestration: training on a reference set, forecasting new
//! series, evaluation and persistence.

mod evaluate;
mod forecast;
pub mod io;
pub mod mcb;
mod model;
mod train;

pub use evaluate::{evaluate, selection_rates, Candidate, EvaluationReport, LevelMcb, ReportRow, SelectionRow};
pub use forecast::{forecast_all, simple_average, Provenance, SeriesForecast};
pub use mcb::{mcb_test, McbResult, McbRow};
pub use model::{MethodModel, TrainConfig, TrainedEnsemble, FORMAT_VERSION};
pub use train::{
    check_failures, prepare_record, prepare_reference, train, train_from_records, Exclusion, ModelDiagnostics,
    SeriesRecord, TrainReport,
};
