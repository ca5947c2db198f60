//! Command implementations.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::json;

use tabmae::baselines::GbdtConfig;
use tabmae::classifier::{
    finetune, finetune_with_auto_val, train_ensemble, ClassifierModel, FinetuneConfig, ModelFile,
    ProbScorer,
};
use tabmae::data::{
    audit_countries, country_split, harmonize, impute_chained, impute_median, load_csv,
    read_dataset_csv, stratified_holdout, stratified_split_binary, synth_generate, write_dataset_csv,
    Dataset, ImputeProtocol, Schema, SynthConfig,
};
use tabmae::error::{Error, Result};
use tabmae::eval::{
    auc, bootstrap_ci, brier, ece, equity_audit, fewshot_curve, loco_run, permutation_importance,
    proxy_divergence, reliability_bins, sample_complexity_curve, FewShotConfig, GroupRow,
    DEFAULT_FEWSHOT_SIZES,
};
use tabmae::hpo::{run_search, SearchBudget, SearchSpace};
use tabmae::rng::{derive_seed, stream};
use tabmae::tmae::{pretrain, EncoderCheckpoint, PretrainConfig};

use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, FinetuneOverrides, ImputationArg, PretrainOverrides, ProtocolArg};

/// Relative input paths that do not exist are retried under this directory.
const DATA_DIR_ENV: &str = "TABMAE_DATA_DIR";

fn resolve_input(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_csv(&resolve_input(path))
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(resolve_input(path)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(serde_json::from_str(&s)?)
}

fn parse_countries(arg: &str) -> Vec<String> {
    arg.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_sizes(arg: &str) -> Result<Vec<usize>> {
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad size {s:?}")))
        })
        .collect()
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::Synth { config, out } => cmd_synth(&config, &out, seed, jobs),
        Command::Ingest {
            input,
            imputation,
            out,
            audit_out,
        } => cmd_ingest(&input, imputation, &out, audit_out.as_deref(), seed, jobs),
        Command::Pretrain {
            data,
            config,
            out,
            overrides,
        } => cmd_pretrain(&data, config.as_deref(), &out, &overrides, seed, jobs),
        Command::Finetune {
            checkpoint,
            data,
            val_data,
            config,
            out,
            ensemble_seeds,
            overrides,
        } => cmd_finetune(
            &checkpoint,
            &data,
            val_data.as_deref(),
            config.as_deref(),
            &out,
            ensemble_seeds.as_deref(),
            &overrides,
            seed,
            jobs,
        ),
        Command::Eval {
            protocol,
            data,
            model,
            checkpoint,
            out,
            config,
            holdout_fraction,
            n_resamples,
            target_country,
            sizes,
            n_seeds,
            overrides,
        } => cmd_eval(EvalArgs {
            protocol,
            data,
            model,
            checkpoint,
            out,
            config,
            holdout_fraction,
            n_resamples,
            target_country,
            sizes,
            n_seeds,
            overrides,
            seed,
            jobs,
        }),
        Command::Importance {
            model,
            data,
            out,
            repeats,
        } => cmd_importance(&model, &data, &out, repeats, seed, jobs),
        Command::Calibration {
            model,
            data,
            out,
            bins,
        } => cmd_calibration(&model, &data, &out, bins, seed, jobs),
        Command::Equity { model, data, out } => cmd_equity(&model, &data, &out, seed, jobs),
        Command::Divergence {
            data,
            source_countries,
            target_countries,
            out,
        } => cmd_divergence(&data, &source_countries, &target_countries, &out, seed, jobs),
        Command::Hpo {
            data,
            val_countries,
            trials,
            out,
            pretrain_epochs,
            finetune_max_epochs,
        } => cmd_hpo(
            &data,
            &val_countries,
            trials,
            &out,
            pretrain_epochs,
            finetune_max_epochs,
            seed,
            jobs,
        ),
        Command::TheoryCurve {
            checkpoint,
            data,
            sizes,
            n_seeds,
            out,
        } => cmd_theory_curve(&checkpoint, &data, sizes.as_deref(), n_seeds, &out, seed, jobs),
    }
}

fn cmd_synth(config: &Path, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    mb.add_input(&resolve_input(config))?;
    let mut cfg: SynthConfig = read_json_file(config)?;
    cfg.seed = seed; // the CLI seed is authoritative
    mb.set_config(serde_json::to_value(&cfg)?);
    let data = synth_generate(&cfg)?;

    // render through the shared CSV writer, then re-write atomically
    let tmp = tempdir_file(out, "synth")?;
    write_dataset_csv(&data, &tmp)?;
    let bytes = std::fs::read(&tmp).map_err(|e| Error::Io {
        path: tmp.display().to_string(),
        source: e,
    })?;
    std::fs::remove_file(&tmp).ok();
    mb.write_output(out, &bytes)?;
    mb.finish(out)?;
    println!(
        "wrote {} rows across {} countries to {}",
        data.n_rows(),
        data.countries().len(),
        out.display()
    );
    Ok(())
}

/// Scratch path in the output's directory (atomic-rename friendly).
fn tempdir_file(out: &Path, tag: &str) -> Result<PathBuf> {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{tag}.{}", std::process::id()));
    let p = out.with_file_name(name);
    if let Some(parent) = p.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
    }
    Ok(p)
}

fn cmd_ingest(
    input: &Path,
    imputation: ImputationArg,
    out: &Path,
    audit_out: Option<&Path>,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let input = resolve_input(input);
    mb.add_input(&input)?;
    let schema = Schema::default();
    let table = harmonize(&load_csv(&input, &schema)?);
    let (dataset, warnings, method) = match imputation {
        ImputationArg::Median => {
            let (d, w) = impute_median(&table)?;
            (d, w, "median")
        }
        ImputationArg::ChainedBlind => {
            let (d, w) = impute_chained(&table, 10, ImputeProtocol::Blind)?;
            (d, w, "chained-blind")
        }
        ImputationArg::ChainedCongenial => {
            let (d, w) = impute_chained(&table, 10, ImputeProtocol::Congenial)?;
            (d, w, "chained-congenial")
        }
    };
    let (kept, audits) = audit_countries(&dataset);
    if kept.n_rows() == 0 {
        return Err(Error::Data(
            "no country passed the prevalence/size audit".into(),
        ));
    }
    mb.set_config(json!({ "imputation": method }));

    let tmp = tempdir_file(out, "ingest")?;
    write_dataset_csv(&kept, &tmp)?;
    let bytes = std::fs::read(&tmp).map_err(|e| Error::Io {
        path: tmp.display().to_string(),
        source: e,
    })?;
    std::fs::remove_file(&tmp).ok();
    mb.write_output(out, &bytes)?;

    let audit_path = audit_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sibling(out, ".audit.json"));
    let audit_json = serde_json::to_string_pretty(&json!({
        "imputation": method,
        "rows_in": dataset.n_rows(),
        "rows_kept": kept.n_rows(),
        "countries": audits,
        "warnings": warnings,
    }))?;
    mb.write_output(&audit_path, audit_json.as_bytes())?;
    mb.finish(out)?;

    for a in &audits {
        if !a.accepted {
            eprintln!(
                "excluded {}: {}",
                a.country,
                a.reason.as_deref().unwrap_or("")
            );
        }
    }
    println!(
        "ingested {} rows ({} kept after audit) to {}",
        dataset.n_rows(),
        kept.n_rows(),
        out.display()
    );
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    out.with_file_name(name)
}

fn cmd_pretrain(
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    ov: &PretrainOverrides,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let data_path = resolve_input(data);
    mb.add_input(&data_path)?;
    let mut cfg: PretrainConfig = match config {
        Some(p) => {
            mb.add_input(&resolve_input(p))?;
            read_json_file(p)?
        }
        None => PretrainConfig::default(),
    };
    if let Some(v) = ov.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = ov.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = ov.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = ov.mask_ratio {
        cfg.mask_ratio = v;
    }
    if let Some(v) = ov.hidden1 {
        cfg.hidden_dims.0 = v;
    }
    if let Some(v) = ov.hidden2 {
        cfg.hidden_dims.1 = v;
    }
    cfg.seed = seed;
    mb.set_config(serde_json::to_value(&cfg)?);

    let dataset = load_dataset(&data_path)?;
    let outcome = pretrain(&dataset.features, &dataset.feature_names, &cfg)?;
    mb.write_output(out, outcome.checkpoint.to_json()?.as_bytes())?;
    mb.finish(out)?;
    println!(
        "pre-trained on {} rows for {} epochs; final masked MSE {:.6}; checkpoint {}",
        dataset.n_rows(),
        cfg.epochs,
        outcome.checkpoint.pretrain_meta.final_loss,
        out.display()
    );
    Ok(())
}

fn load_finetune_cfg(
    config: Option<&Path>,
    ov: &FinetuneOverrides,
    seed: u64,
    mb: &mut ManifestBuilder,
) -> Result<FinetuneConfig> {
    let mut cfg: FinetuneConfig = match config {
        Some(p) => {
            mb.add_input(&resolve_input(p))?;
            read_json_file(p)?
        }
        None => FinetuneConfig::default(),
    };
    if let Some(v) = ov.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = ov.l2 {
        cfg.l2 = v;
    }
    if let Some(v) = ov.dropout {
        cfg.dropout = v;
    }
    if let Some(v) = ov.patience {
        cfg.patience = v;
    }
    if let Some(v) = ov.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = ov.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = ov.freeze_encoder {
        cfg.freeze_encoder = v;
    }
    cfg.seed = seed;
    Ok(cfg)
}

#[allow(clippy::too_many_arguments)]
fn cmd_finetune(
    checkpoint: &Path,
    data: &Path,
    val_data: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    ensemble_seeds: Option<&str>,
    ov: &FinetuneOverrides,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let ckpt_path = resolve_input(checkpoint);
    let data_path = resolve_input(data);
    mb.add_input(&ckpt_path)?;
    mb.add_input(&data_path)?;
    let cfg = load_finetune_cfg(config, ov, seed, &mut mb)?;
    mb.set_config(serde_json::to_value(&cfg)?);

    let ckpt = EncoderCheckpoint::load(&ckpt_path)?;
    let sample = load_dataset(&data_path)?;
    let (train, val) = match val_data {
        Some(vp) => {
            let vp = resolve_input(vp);
            mb.add_input(&vp)?;
            (sample.clone(), load_dataset(&vp)?)
        }
        None => {
            let (tr_idx, va_idx) = stratified_split_binary(&sample.outcome, 0.2, seed)?;
            (sample.select(&tr_idx), sample.select(&va_idx))
        }
    };

    let model_file = match ensemble_seeds {
        Some(arg) => {
            let seeds: Vec<u64> = arg
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad seed {s:?}")))
                })
                .collect::<Result<_>>()?;
            ModelFile::Ensemble(train_ensemble(&ckpt, &train, &val, &cfg, &seeds)?)
        }
        None => {
            let model = ClassifierModel::init_from_encoder(&ckpt, &cfg)?;
            ModelFile::Classifier(finetune(model, &train, &val, &cfg)?)
        }
    };
    mb.write_output(out, model_file.to_json()?.as_bytes())?;
    mb.finish(out)?;
    match &model_file {
        ModelFile::Classifier(m) => {
            let best = m
                .history
                .iter()
                .map(|e| e.val_auc)
                .fold(f64::NEG_INFINITY, f64::max);
            println!(
                "fine-tuned for {} epochs (best val AUC {:.4}); model {}",
                m.history.len(),
                best,
                out.display()
            );
        }
        ModelFile::Ensemble(e) => {
            println!("trained {}-member ensemble; model {}", e.members.len(), out.display());
        }
    }
    Ok(())
}

struct EvalArgs {
    protocol: ProtocolArg,
    data: PathBuf,
    model: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    out: PathBuf,
    config: Option<PathBuf>,
    holdout_fraction: f64,
    n_resamples: usize,
    target_country: Option<String>,
    sizes: Option<String>,
    n_seeds: usize,
    overrides: FinetuneOverrides,
    seed: u64,
    jobs: usize,
}

fn per_country_rows(scorer: &dyn ProbScorer, data: &Dataset) -> Result<Vec<GroupRow>> {
    let mut rows = Vec::new();
    for (country, idx) in data.country_indices() {
        let sub = data.select(&idx);
        let row = if sub.has_both_classes() {
            let a = auc(&scorer.predict_proba(&sub.features)?, &sub.labels_f64())?;
            GroupRow {
                group: country,
                n: idx.len(),
                value: Some(a),
                flag: None,
            }
        } else {
            GroupRow {
                group: country,
                n: idx.len(),
                value: None,
                flag: Some("AUC undefined: single class".into()),
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut mb = ManifestBuilder::new(args.seed, args.jobs);
    let data_path = resolve_input(&args.data);
    mb.add_input(&data_path)?;
    let data = load_dataset(&data_path)?;

    let ft_cfg = load_finetune_cfg(args.config.as_deref(), &args.overrides, args.seed, &mut mb)?;

    let load_ckpt = |mb: &mut ManifestBuilder| -> Result<EncoderCheckpoint> {
        let p = args
            .checkpoint
            .as_deref()
            .ok_or_else(|| Error::Config("this protocol needs --checkpoint".into()))?;
        let p = resolve_input(p);
        mb.add_input(&p)?;
        EncoderCheckpoint::load(&p)
    };
    let load_model = |mb: &mut ManifestBuilder| -> Result<ModelFile> {
        let p = args
            .model
            .as_deref()
            .ok_or_else(|| Error::Config("this protocol needs --model".into()))?;
        let p = resolve_input(p);
        mb.add_input(&p)?;
        ModelFile::from_json(&std::fs::read_to_string(&p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?)
    };

    match args.protocol {
        ProtocolArg::Zeroshot => {
            let model = load_model(&mut mb)?;
            let labels = data.labels_f64();
            let probs = model.predict_proba(&data.features)?;
            let pooled = auc(&probs, &labels)?;
            let rows = per_country_rows(&model, &data)?;
            let report = json!({
                "protocol": "zeroshot",
                "pooled_auc": pooled,
                "brier": brier(&probs, &labels)?,
                "per_country": rows,
                "seed": args.seed,
            });
            emit_report(&mut mb, &args.out, &report)?;
            println!("zero-shot pooled AUC {pooled:.4} over {} rows", data.n_rows());
        }
        ProtocolArg::Holdout => {
            let (train, test) =
                stratified_holdout(&data, args.holdout_fraction, derive_seed(args.seed, stream::SPLIT, 1))?;
            let scorer: Box<dyn ProbScorer> = if args.model.is_some() {
                Box::new(load_model(&mut mb)?)
            } else {
                let ckpt = load_ckpt(&mut mb)?;
                let model = ClassifierModel::init_from_encoder(&ckpt, &ft_cfg)?;
                Box::new(finetune_with_auto_val(model, &train, 0.2, &ft_cfg)?)
            };
            let labels = test.labels_f64();
            let probs = scorer.predict_proba(&test.features)?;
            let report = json!({
                "protocol": "holdout",
                "holdout_fraction": args.holdout_fraction,
                "n_train": train.n_rows(),
                "n_test": test.n_rows(),
                "auc": auc(&probs, &labels)?,
                "brier": brier(&probs, &labels)?,
                "ece": ece(&probs, &labels, 10)?,
                "per_country": per_country_rows(scorer.as_ref(), &test)?,
                "seed": args.seed,
                "config": ft_cfg,
            });
            emit_report(&mut mb, &args.out, &report)?;
            println!(
                "holdout AUC {:.4} on {} test rows",
                report["auc"].as_f64().unwrap(),
                test.n_rows()
            );
        }
        ProtocolArg::Bootstrap => {
            let ckpt = load_ckpt(&mut mb)?;
            // fixed test side, resampled training side
            let (train, test) = stratified_holdout(
                &data,
                args.holdout_fraction,
                derive_seed(args.seed, stream::SPLIT, 1),
            )?;
            if !test.has_both_classes() {
                return Err(Error::Data("test side has a single class".into()));
            }
            let test_labels = test.labels_f64();
            let statistic = |resample: &Dataset, fold_seed: u64| -> Result<f64> {
                let mut cfg = ft_cfg.clone();
                cfg.seed = fold_seed;
                let (tr_idx, va_idx) =
                    stratified_split_binary(&resample.outcome, 0.2, fold_seed)?;
                let model = ClassifierModel::init_from_encoder(&ckpt, &cfg)?;
                let fitted = finetune(model, &resample.select(&tr_idx), &resample.select(&va_idx), &cfg)?;
                auc(&fitted.predict_proba(&test.features)?, &test_labels)
            };
            let mut report = bootstrap_ci(
                statistic,
                &train,
                "auc",
                args.n_resamples,
                args.seed,
                args.jobs,
            )?;
            report.config = json!({
                "protocol": "bootstrap",
                "n_resamples": args.n_resamples,
                "holdout_fraction": args.holdout_fraction,
                "finetune": ft_cfg,
            });
            emit_report(&mut mb, &args.out, &serde_json::to_value(&report)?)?;
            print!("{}", report.to_text());
        }
        ProtocolArg::Loco => {
            let ckpt = load_ckpt(&mut mb)?;
            let rows = loco_run(
                |train, test, fold_seed| {
                    let mut cfg = ft_cfg.clone();
                    cfg.seed = fold_seed;
                    let model = ClassifierModel::init_from_encoder(&ckpt, &cfg)?;
                    let fitted = finetune_with_auto_val(model, train, 0.2, &cfg)?;
                    auc(&fitted.predict_proba(&test.features)?, &test.labels_f64())
                },
                &data,
                args.seed,
                args.jobs,
            )?;
            let report = json!({
                "protocol": "loco",
                "folds": rows,
                "seed": args.seed,
                "config": ft_cfg,
            });
            emit_report(&mut mb, &args.out, &report)?;
            for r in report["folds"].as_array().unwrap() {
                println!(
                    "{:<12} {}",
                    r["country"].as_str().unwrap(),
                    r["auc"]
                        .as_f64()
                        .map(|a| format!("{a:.4}"))
                        .unwrap_or_else(|| "undefined".into())
                );
            }
        }
        ProtocolArg::Fewshot => {
            let ckpt = load_ckpt(&mut mb)?;
            let target = args
                .target_country
                .clone()
                .ok_or_else(|| Error::Config("fewshot needs --target-country".into()))?;
            let sizes = match &args.sizes {
                Some(s) => parse_sizes(s)?,
                None => DEFAULT_FEWSHOT_SIZES.to_vec(),
            };
            let cfg = FewShotConfig {
                sizes,
                n_seeds: args.n_seeds,
                seed: args.seed,
                finetune: ft_cfg.clone(),
                gbdt: GbdtConfig::default(),
                val_fraction: 0.2,
            };
            let curve = fewshot_curve(&ckpt, &data, &target, &cfg, args.jobs)?;
            emit_report(&mut mb, &args.out, &serde_json::to_value(&curve)?)?;
            let csv_path = args.out.with_extension("csv");
            mb.write_output(&csv_path, curve.to_csv_string().as_bytes())?;
            for s in &curve.summaries {
                let wins = |w: Option<f64>| {
                    w.map(|v| format!("{v}/{}", curve.n_seeds))
                        .unwrap_or_else(|| "n/a".into())
                };
                println!(
                    "N={:<6} pretrained {:.4}±{:.4}  cold_mlp {:.4}±{:.4}  cold_gbdt {:.4}±{:.4}  gain {:+.4} ({:+.1}%) vs mlp, {:+.4} ({:+.1}%) vs gbdt  wins {} vs mlp, {} vs gbdt",
                    s.n,
                    s.pretrained_mean,
                    s.pretrained_sd,
                    s.cold_mlp_mean,
                    s.cold_mlp_sd,
                    s.cold_gbdt_mean,
                    s.cold_gbdt_sd,
                    s.gain_abs_vs_mlp,
                    s.gain_rel_vs_mlp * 100.0,
                    s.gain_abs_vs_gbdt,
                    s.gain_rel_vs_gbdt * 100.0,
                    wins(s.wins_vs_mlp),
                    wins(s.wins_vs_gbdt)
                );
            }
        }
    }
    mb.finish(&args.out)?;
    Ok(())
}

fn emit_report(mb: &mut ManifestBuilder, out: &Path, value: &serde_json::Value) -> Result<()> {
    mb.set_config(value.get("config").cloned().unwrap_or(serde_json::Value::Null));
    mb.write_output(out, serde_json::to_string_pretty(value)?.as_bytes())
}

fn cmd_importance(
    model: &Path,
    data: &Path,
    out: &Path,
    repeats: usize,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let model_path = resolve_input(model);
    let data_path = resolve_input(data);
    mb.add_input(&model_path)?;
    mb.add_input(&data_path)?;
    let model = ModelFile::from_json(&std::fs::read_to_string(&model_path).map_err(|e| {
        Error::Io {
            path: model_path.display().to_string(),
            source: e,
        }
    })?)?;
    let dataset = load_dataset(&data_path)?;
    let report = permutation_importance(&model, &dataset, repeats, seed, jobs)?;
    mb.set_config(json!({ "repeats": repeats }));
    mb.write_output(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    mb.finish(out)?;
    println!("baseline AUC {:.4}", report.baseline_auc);
    for r in &report.rows {
        println!(
            "{:<20} {:>8.4}  [{:.4}, {:.4}]",
            r.feature, r.importance, r.ci_low, r.ci_high
        );
    }
    Ok(())
}

fn cmd_calibration(
    model: &Path,
    data: &Path,
    out: &Path,
    bins: usize,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let model_path = resolve_input(model);
    let data_path = resolve_input(data);
    mb.add_input(&model_path)?;
    mb.add_input(&data_path)?;
    let model = ModelFile::from_json(&std::fs::read_to_string(&model_path).map_err(|e| {
        Error::Io {
            path: model_path.display().to_string(),
            source: e,
        }
    })?)?;
    let dataset = load_dataset(&data_path)?;
    let probs = model.predict_proba(&dataset.features)?;
    let labels = dataset.labels_f64();
    let report = json!({
        "brier": brier(&probs, &labels)?,
        "ece": ece(&probs, &labels, bins)?,
        "n_bins": bins,
        "bins": reliability_bins(&probs, &labels, bins)?,
        "n": dataset.n_rows(),
        "seed": seed,
    });
    mb.set_config(json!({ "bins": bins }));
    mb.write_output(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    mb.finish(out)?;
    println!(
        "brier {:.4}  ece {:.4} ({} rows)",
        report["brier"].as_f64().unwrap(),
        report["ece"].as_f64().unwrap(),
        dataset.n_rows()
    );
    Ok(())
}

fn cmd_equity(model: &Path, data: &Path, out: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let model_path = resolve_input(model);
    let data_path = resolve_input(data);
    mb.add_input(&model_path)?;
    mb.add_input(&data_path)?;
    let model = ModelFile::from_json(&std::fs::read_to_string(&model_path).map_err(|e| {
        Error::Io {
            path: model_path.display().to_string(),
            source: e,
        }
    })?)?;
    let dataset = load_dataset(&data_path)?;
    let report = equity_audit(&model, &dataset)?;
    mb.write_output(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    mb.finish(out)?;
    for r in &report.rows {
        println!(
            "Q{} (n={:>6}): {}",
            r.quintile,
            r.n,
            r.auc
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "undefined".into())
        );
    }
    if let Some(ratio) = report.q5_q1_ratio {
        println!("Q5/Q1 ratio: {ratio:.4}");
    }
    Ok(())
}

fn cmd_divergence(
    data: &Path,
    source_countries: &str,
    target_countries: &str,
    out: &Path,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let data_path = resolve_input(data);
    mb.add_input(&data_path)?;
    let dataset = load_dataset(&data_path)?;
    let source = parse_countries(source_countries);
    let target = parse_countries(target_countries);
    if source.iter().any(|c| target.contains(c)) {
        return Err(Error::Config(
            "source and target country sets overlap".into(),
        ));
    }
    let rows_of = |countries: &[String]| -> Result<Vec<usize>> {
        let wanted: BTreeSet<&String> = countries.iter().collect();
        let idx: Vec<usize> = (0..dataset.n_rows())
            .filter(|&i| wanted.contains(&dataset.country[i]))
            .collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("no rows for countries {countries:?}")));
        }
        Ok(idx)
    };
    let s = dataset.features.select_rows(&rows_of(&source)?);
    let t = dataset.features.select_rows(&rows_of(&target)?);
    let d_hat = proxy_divergence(&s, &t, seed)?;
    let report = json!({
        "d_hat": d_hat,
        "source_countries": source,
        "target_countries": target,
        "n_source": s.rows(),
        "n_target": t.rows(),
        "seed": seed,
    });
    mb.set_config(json!({ "source": source_countries, "target": target_countries }));
    mb.write_output(out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    mb.finish(out)?;
    println!("proxy A-distance: {d_hat:.4}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_hpo(
    data: &Path,
    val_countries: &str,
    trials: usize,
    out: &Path,
    pretrain_epochs: usize,
    finetune_max_epochs: usize,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let data_path = resolve_input(data);
    mb.add_input(&data_path)?;
    let dataset = load_dataset(&data_path)?;
    let held: BTreeSet<String> = parse_countries(val_countries).into_iter().collect();
    if held.is_empty() {
        return Err(Error::Config("--val-countries must name at least one country".into()));
    }
    let (train, validation) = country_split(&dataset, &held)?;
    let budget = SearchBudget {
        pretrain_epochs,
        finetune_max_epochs,
        ..SearchBudget::default()
    };
    mb.set_config(json!({
        "trials": trials,
        "val_countries": held,
        "budget": budget,
    }));
    let outcome = run_search(
        &SearchSpace::default(),
        &train,
        &validation,
        trials,
        seed,
        &budget,
        jobs,
    )?;
    mb.write_output(out, outcome.to_csv_string().as_bytes())?;
    let best_path = sibling(out, ".best.json");
    mb.write_output(&best_path, serde_json::to_string_pretty(outcome.best())?.as_bytes())?;
    mb.finish(out)?;
    let best = outcome.best();
    println!(
        "best trial {}: objective {:.4} (mean {:.4}, min {:.4}); log {}",
        best.index,
        best.objective,
        best.mean_auc,
        best.min_auc,
        out.display()
    );
    Ok(())
}

fn cmd_theory_curve(
    checkpoint: &Path,
    data: &Path,
    sizes: Option<&str>,
    n_seeds: usize,
    out: &Path,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let mut mb = ManifestBuilder::new(seed, jobs);
    let ckpt_path = resolve_input(checkpoint);
    let data_path = resolve_input(data);
    mb.add_input(&ckpt_path)?;
    mb.add_input(&data_path)?;
    let ckpt = EncoderCheckpoint::load(&ckpt_path)?;
    let dataset = load_dataset(&data_path)?;
    let sizes = match sizes {
        Some(s) => parse_sizes(s)?,
        None => vec![50, 100, 200, 400, 800],
    };
    mb.set_config(json!({ "sizes": sizes, "n_seeds": n_seeds }));
    let curve = sample_complexity_curve(&ckpt, &dataset, &sizes, n_seeds, seed, jobs)?;
    mb.write_output(out, serde_json::to_string_pretty(&curve)?.as_bytes())?;
    let csv_path = out.with_extension("csv");
    mb.write_output(&csv_path, curve.to_csv_string().as_bytes())?;
    mb.finish(out)?;
    println!(
        "reference AUC {:.4} at n={}; fit c={:.4}, corr(deficit, 1/sqrt(n))={:.4}",
        curve.reference_auc, curve.reference_n, curve.c_fit, curve.correlation
    );
    for p in &curve.points {
        println!("  n={:<6} deficit {:.4} ± {:.4}", p.n, p.mean_deficit, p.sd_deficit);
    }
    Ok(())
}
