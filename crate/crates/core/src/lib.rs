//! Data preparation, calendar features and evaluation metrics for
//! long-horizon traffic flow forecasting.
//!
//! The crate covers everything that happens before a model sees data and
//! after it has produced a forecast:
//!
//! - [`flow`]: CSV ingestion, same-period-last-week imputation, aggregation
//! - [`split`] and [`standardize`]: chronological splits and z-scoring
//! - [`window`]: stride-1 rolling input/target windows
//! - [`calendar`]: the seven time features and the holiday calendar
//! - [`metrics`]: MAE, RMSE, MAPE over 100 veh/h, and the GEH statistic
//! - [`recipe`]: the early-stopping rule shared by every trainer

pub mod calendar;
pub mod error;
pub mod flow;
pub mod metrics;
pub mod recipe;
pub mod split;
pub mod standardize;
pub mod window;

pub use calendar::{extract_time_features, load_holiday_calendar, HolidayCalendar, TimeFeatureVector};
pub use error::{DataError, Result};
pub use flow::{aggregate, impute_same_period_last_week, parse_flow_csv, DatasetProfile, FlowRecord, FlowSeries};
pub use metrics::{clamp_nonnegative, error_metrics, geh, geh_classify, GehClass, MetricAccumulator, MetricReport};
pub use recipe::{EarlyStopping, StopDecision};
pub use split::{split, SplitSpec};
pub use standardize::{fit_standardizer, Standardizer};
pub use window::{rolling_windows, RollingWindows, Window};
