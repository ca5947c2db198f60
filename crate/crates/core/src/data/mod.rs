//! Schema, ingestion, harmonization, imputation, standardization, splits,
//! and the synthetic multi-country generator.

mod csv_io;
mod dataset;
mod impute;
mod splits;
mod synth;

pub use csv_io::{
    harmonize, load_csv, read_dataset_csv, table_into_dataset, write_dataset_csv, Cell, RawTable,
};
pub use dataset::{
    audit_countries, CountryAudit, Dataset, Schema, Standardizer, COUNTRY_COLUMN, FEATURE_NAMES,
    N_FEATURES, OUTCOME_NAME, REGION_COLUMN, WEALTH_INDEX,
};
pub use impute::{impute_chained, impute_median, ImputeProtocol};
pub use splits::{country_split, fewshot_sample, stratified_holdout, stratified_split_binary};
pub use synth::{synth_generate, SynthConfig, DEFAULT_COEFFICIENTS};
