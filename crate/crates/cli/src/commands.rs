use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stddp::baselines::{fit_counts, Baseline, BaselineRanker};
use stddp::eval::{evaluate_parallel, MetricsReport, ModelRanker};
use stddp::ingest::{
    build_corpus, filter_min_activity, parse_foursquare, parse_gowalla, prepared::PreparedCorpus, Segment,
};
use stddp::model::{load_checkpoint, save_checkpoint, HyperParams, ModelParams, SpatialContext, Variant};
use stddp::numerics::RngState;
use stddp::synthetic::{overfit_fixture, random_instance};
use stddp::train::{finite_difference_check, fit, FitOutcome, TrainConfig};
use stddp::Result;

use crate::config::{DataFormat, ExperimentConfig};
use crate::{SplitArg, SweepParam};

const SPATIAL_CACHE: usize = 4096;

impl From<SplitArg> for Segment {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Segment::Train,
            SplitArg::Val => Segment::Val,
            SplitArg::Test => Segment::Test,
        }
    }
}

fn load(cfg: &ExperimentConfig) -> Result<PreparedCorpus> {
    let path = cfg.data_path()?;
    let outcome = match cfg.format {
        DataFormat::Prepared => {
            let prep = PreparedCorpus::load(path)?;
            if prep.window == cfg.hyper.w {
                return Ok(prep);
            }
            return PreparedCorpus::from_corpus(prep.corpus, cfg.hyper.w);
        }
        DataFormat::Foursquare => parse_foursquare(path)?,
        DataFormat::Gowalla => parse_gowalla(path)?,
    };
    if outcome.malformed_count() > 0 {
        eprintln!("skipped {} malformed lines", outcome.malformed_count());
    }
    let corpus = filter_min_activity(&outcome.pois, &outcome.checkins, &cfg.filter)?;
    PreparedCorpus::from_corpus(corpus, cfg.hyper.w)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    Ok(&cfg.out)
}

fn spatial_for(prep: &PreparedCorpus) -> SpatialContext {
    SpatialContext::with_capacity(prep.corpus.pois.clone(), SPATIAL_CACHE)
}

fn metric_header(ks: &[usize]) -> String {
    let mut cols: Vec<String> = ks.iter().map(|k| format!("recall@{k}")).collect();
    cols.extend(ks.iter().map(|k| format!("f1@{k}")));
    cols.push("map".into());
    cols.push("count".into());
    cols.join(",")
}

fn metric_values(r: &MetricsReport) -> String {
    let mut cols: Vec<String> = r.recall.iter().chain(&r.f1).map(f64::to_string).collect();
    cols.push(r.map.to_string());
    cols.push(r.count.to_string());
    cols.join(",")
}

/// Aligned text table of one row per method.
fn comparison_table(ks: &[usize], rows: &[(String, MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}", "method");
    for k in ks {
        let _ = write!(out, "  {:>8}", format!("R@{k}"));
    }
    let _ = writeln!(out, "  {:>8}", "MAP");
    for (name, r) in rows {
        let _ = write!(out, "{name:<width$}");
        for v in &r.recall {
            let _ = write!(out, "  {v:>8.4}");
        }
        let _ = writeln!(out, "  {:>8.4}", r.map);
    }
    out
}

fn train_one(
    prep: &PreparedCorpus,
    spatial: &SpatialContext,
    hyper: HyperParams,
    variant: Variant,
    train: &TrainConfig,
    init: Option<ModelParams>,
) -> Result<FitOutcome> {
    let (n, m) = (prep.corpus.num_users(), prep.corpus.num_pois());
    let params = match init {
        Some(p) => p,
        None => ModelParams::glorot(n, m, hyper, &mut RngState::new(train.seed)),
    };
    fit(
        &prep.samples_in(Segment::Train),
        &prep.samples_in(Segment::Val),
        params,
        spatial,
        &variant.config(),
        train,
    )
}

fn score(
    params: &ModelParams,
    spatial: &SpatialContext,
    variant: Variant,
    samples: &[&stddp::ingest::Sample],
    cfg: &ExperimentConfig,
) -> Result<MetricsReport> {
    let ranker = ModelRanker {
        params,
        spatial,
        variant: variant.config(),
    };
    evaluate_parallel(&ranker, samples, &cfg.ks, cfg.train.threads)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<bool> {
    let prep = load(cfg)?;
    let dir = out_dir(cfg)?;
    prep.save(dir.join("prepared.tsv"))?;
    let c = &prep.corpus;
    let count = |s| prep.samples_in(s).len().to_string();
    let stats = [
        ("users", c.num_users().to_string()),
        ("pois", c.num_pois().to_string()),
        ("checkins", c.num_checkins().to_string()),
        ("sparsity", c.sparsity().to_string()),
        ("train_samples", count(Segment::Train)),
        ("val_samples", count(Segment::Val)),
        ("test_samples", count(Segment::Test)),
    ];
    let mut csv = String::from("stat,value\n");
    for (k, v) in &stats {
        let _ = writeln!(csv, "{k},{v}");
        println!("{k:<14}  {v}");
    }
    fs::write(dir.join("stats.csv"), csv)?;
    Ok(true)
}

pub fn train(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<bool> {
    let prep = load(cfg)?;
    let spatial = spatial_for(&prep);
    let init = match resume {
        Some(path) => {
            let (header, params) = load_checkpoint(path)?;
            header.ensure_compatible(prep.corpus.num_users(), prep.corpus.num_pois(), cfg.hyper)?;
            Some(params)
        }
        None => None,
    };
    let out = train_one(&prep, &spatial, cfg.hyper, cfg.variant, &cfg.train, init)?;
    let dir = out_dir(cfg)?;
    save_checkpoint(&out.params, dir.join("checkpoint.bin"))?;
    fs::write(dir.join("train_log.csv"), out.log.to_csv())?;
    print!("{}", out.log.to_table());
    println!(
        "best epoch {}{}",
        out.best_epoch,
        if out.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(true)
}

pub fn evaluate(cfg: &ExperimentConfig, checkpoint: &Path, split: Segment) -> Result<bool> {
    let prep = load(cfg)?;
    let (header, params) = load_checkpoint(checkpoint)?;
    header.ensure_compatible(prep.corpus.num_users(), prep.corpus.num_pois(), cfg.hyper)?;
    let spatial = spatial_for(&prep);
    let report = score(&params, &spatial, cfg.variant, &prep.samples_in(split), cfg)?;
    let dir = out_dir(cfg)?;
    fs::write(dir.join(format!("report_{split}.csv")), report.to_csv())?;
    print!("{}", report.to_table());
    Ok(true)
}

pub fn baselines(cfg: &ExperimentConfig, split: Segment) -> Result<bool> {
    let prep = load(cfg)?;
    let counts = fit_counts(&prep.corpus, &prep.split);
    let samples = prep.samples_in(split);
    let mut rows = Vec::new();
    for kind in Baseline::ALL {
        let ranker = BaselineRanker { counts: &counts, kind };
        rows.push((kind.name().to_string(), evaluate_parallel(&ranker, &samples, &cfg.ks, cfg.train.threads)?));
    }
    write_comparison(cfg, &format!("baselines_{split}.csv"), &rows)?;
    Ok(true)
}

fn write_comparison(cfg: &ExperimentConfig, file: &str, rows: &[(String, MetricsReport)]) -> Result<()> {
    let dir = out_dir(cfg)?;
    let mut csv = format!("method,{}\n", metric_header(&cfg.ks));
    for (name, r) in rows {
        let _ = writeln!(csv, "{name},{}", metric_values(r));
    }
    fs::write(dir.join(file), csv)?;
    print!("{}", comparison_table(&cfg.ks, rows));
    Ok(())
}

pub fn ablate(cfg: &ExperimentConfig, split: Segment) -> Result<bool> {
    let prep = load(cfg)?;
    let spatial = spatial_for(&prep);
    let samples = prep.samples_in(split);
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let out = train_one(&prep, &spatial, cfg.hyper, v, &cfg.train, None)?;
        rows.push((v.name().to_string(), score(&out.params, &spatial, v, &samples, cfg)?));
    }
    write_comparison(cfg, &format!("ablation_{split}.csv"), &rows)?;
    Ok(true)
}

pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[usize]) -> Result<bool> {
    let base = load(cfg)?;
    let spatial = spatial_for(&base);
    let name = match param {
        SweepParam::D => "d",
        SweepParam::H => "h",
        SweepParam::W => "w",
    };
    let mut csv = format!("param,value,status,best_epoch,{}\n", metric_header(&cfg.ks));
    let mut all_ok = true;
    for &value in values {
        let mut hyper = cfg.hyper;
        match param {
            SweepParam::D => hyper.d = value,
            SweepParam::H => hyper.h = value,
            SweepParam::W => hyper.w = value,
        }
        let point = || -> Result<(usize, MetricsReport)> {
            hyper.validate()?;
            let rebuilt;
            let prep = if hyper.w == base.window {
                &base
            } else {
                rebuilt = PreparedCorpus::from_corpus(base.corpus.clone(), hyper.w)?;
                &rebuilt
            };
            let out = train_one(prep, &spatial, hyper, cfg.variant, &cfg.train, None)?;
            let report = score(&out.params, &spatial, cfg.variant, &prep.samples_in(Segment::Test), cfg)?;
            Ok((out.best_epoch, report))
        };
        match point() {
            Ok((best, report)) => {
                println!("{name}={value}  R@{}={:.4}  MAP={:.4}", cfg.ks[0], report.recall[0], report.map);
                let _ = writeln!(csv, "{name},{value},ok,{best},{}", metric_values(&report));
            }
            Err(e) => {
                all_ok = false;
                eprintln!("{name}={value} failed: {e}");
                let blanks = ",".repeat(2 * cfg.ks.len() + 2);
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(csv, "{name},{value},failed: {msg},{blanks}");
            }
        }
    }
    let dir = out_dir(cfg)?;
    fs::write(dir.join(format!("sweep_{name}.csv")), csv)?;
    Ok(all_ok)
}

pub fn selfcheck(cfg: &ExperimentConfig, instances: u64) -> Result<bool> {
    let mut ok = true;
    let mut worst = 0.0f64;
    for w in [1, 2] {
        let hp = HyperParams { d: 5, h: 7, w };
        for i in 0..instances {
            let (spatial, params, sample) = random_instance(cfg.seed.wrapping_add(i), 6, 30, hp)?;
            for v in Variant::ALL {
                let report = finite_difference_check(&params, &sample, &spatial, &v.config(), 1e-4)?;
                worst = worst.max(report.max_error());
                if !report.passed() {
                    ok = false;
                    println!("gradient check failed: instance {i}, w={w}, {v}");
                    print!("{}", report.to_table());
                }
            }
        }
    }
    println!("gradient check    max relative error {worst:.2e}");

    let (pois, checkins) = overfit_fixture()?;
    let prep = PreparedCorpus::from_corpus(build_corpus(&pois, &checkins)?, 1)?;
    let spatial = SpatialContext::new(prep.corpus.pois.clone());
    let train = TrainConfig {
        max_epochs: 20,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let hp = HyperParams { d: 8, h: 16, w: 1 };
    let out = train_one(&prep, &spatial, hp, Variant::Full, &train, None)?;
    let report = score(&out.params, &spatial, Variant::Full, &prep.samples_in(Segment::Train), cfg)?;
    let identity = report
        .ks
        .iter()
        .zip(report.recall.iter().zip(&report.f1))
        .all(|(&k, (&r, &f))| f == 2.0 * r / (k as f64 + 1.0));
    println!("metric identity   {}", if identity { "holds" } else { "VIOLATED" });
    ok &= identity;
    println!("selfcheck {}", if ok { "passed" } else { "FAILED" });
    Ok(ok)
}
