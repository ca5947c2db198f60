//! Metrics and validation protocols: AUC, calibration, bootstrap CIs,
//! leave-one-country-out folds, few-shot curves, permutation importance,
//! the equity audit, paired t-tests, and the theory-facing estimators
//! (proxy domain divergence, head-only sample-complexity curves).

mod bootstrap;
mod divergence;
mod equity;
mod fewshot;
mod importance;
mod loco;
mod metrics;
mod report;
mod theory;
mod ttest;

pub use bootstrap::{bootstrap_ci, stratified_resample, DEFAULT_N_RESAMPLES};
pub use divergence::proxy_divergence;
pub use equity::{equity_audit, EquityReport, EquityRow};
pub use fewshot::{
    fewshot_curve, FewShotConfig, FewShotCurve, FewShotPoint, SizeSummary, SkippedSize,
    DEFAULT_FEWSHOT_SEEDS, DEFAULT_FEWSHOT_SIZES, MIN_SEEDS_FOR_WINS, MODEL_COLD_GBDT,
    MODEL_COLD_MLP, MODEL_PRETRAINED,
};
pub use importance::{
    permutation_importance, ImportanceReport, ImportanceRow, DEFAULT_N_REPEATS,
};
pub use loco::{loco_run, LocoRow};
pub use metrics::{auc, auc_pair_count, brier, ece, reliability_bins, ReliabilityBin};
pub use report::{percentile, EvalReport, GroupRow};
pub use theory::{pearson, sample_complexity_curve, TheoryCurve, TheoryPoint};
pub use ttest::{beta_inc, ln_gamma, paired_ttest, student_t_cdf, TTestResult};
