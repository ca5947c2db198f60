//! Cold-start comparators: histogram gradient-boosted trees, a plain MLP,
//! and L2 logistic regression.

mod gbdt;
mod logreg;

pub use gbdt::{
    predict_gbdt, train_gbdt, GbdtConfig, GbdtModel, Node, RoundStats, Tree, GBDT_FORMAT_VERSION,
};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel, LOGREG_FORMAT_VERSION};
pub(crate) use logreg::fit_logistic as fit_logistic_raw;

use crate::classifier::{finetune, ClassifierModel, FinetuneConfig};
use crate::data::Dataset;
use crate::error::Result;

/// Hidden widths of the cold-start MLP baseline.
pub const COLD_MLP_HIDDEN: (usize, usize) = (512, 32);

/// Trains the cold-start MLP `(d, 512, 32, 1)` from random initialization,
/// standardizing on its own (local) training sample. Protocol mirrors the
/// encoder fine-tune: early stopping on validation AUC.
pub fn train_cold_mlp(
    train: &Dataset,
    val: &Dataset,
    cfg: &FinetuneConfig,
) -> Result<ClassifierModel> {
    let d = train.n_features();
    let dims = [d, COLD_MLP_HIDDEN.0, COLD_MLP_HIDDEN.1, 1];
    let model = ClassifierModel::init_cold(&dims, &train.features, &train.feature_names, cfg)?;
    finetune(model, train, val, cfg)
}
