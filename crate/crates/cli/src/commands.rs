//! The six subcommands. Each takes a validated config and returns a summary
//! of what it wrote; printing is left to the binary.

use crate::artifacts::{hash_from_comment, sha256_file, write_csv, write_json};
use crate::config::{burgers_time_note, default_budgets, Benchmark, ExperimentConfig, Field, Split, RESOLVED_CONFIG};
use crate::error::{CliError, Result};
use hyperop_constructions::mc::par_map;
use hyperop_constructions::{scaling_report, Builder, ConstructionReport};
use hyperop_core::measures::{generate_dataset, load_dataset, save_dataset, Dataset, DatasetRequest, MeasureSpec};
use hyperop_core::spectra::{box_measure_fourier_eigs, empirical_covariance_eigs, SpectrumReport};
use hyperop_core::stats;
use hyperop_core::grid::relative_l1_values;
use hyperop_nets::operator_nets::{read_checkpoint_tagged, write_checkpoint_tagged};
use hyperop_nets::train::{init_model, train_model_with, EvalSummary, History, TrainError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn offsets(cfg: &ExperimentConfig, split: Split) -> (u64, usize) {
    let d = &cfg.data;
    match split {
        Split::Train => (0, d.n_train),
        Split::Val => (d.n_train as u64, d.n_val),
        Split::Test => ((d.n_train + d.n_val) as u64, d.n_test),
    }
}

/// Samples `first..first + n` of the benchmark, generated in index chunks on
/// up to `threads` workers; identical for any thread count.
pub fn generate_split(req: &DatasetRequest, threads: usize) -> Result<Dataset> {
    let chunks = threads.clamp(1, req.n_samples.max(1));
    if chunks == 1 {
        return Ok(generate_dataset(req)?);
    }
    let size = req.n_samples.div_ceil(chunks);
    let parts = par_map(chunks, threads, |k| {
        let lo = (k * size).min(req.n_samples);
        let hi = ((k + 1) * size).min(req.n_samples);
        generate_dataset(&DatasetRequest { n_samples: hi - lo, first_index: req.first_index + lo as u64, ..req.clone() })
    })?;
    let mut parts = parts.into_iter();
    let mut ds = parts.next().expect("at least one chunk");
    for p in parts {
        ds.manifest.notes.boundary_disturbed += p.manifest.notes.boundary_disturbed;
        ds.inputs.extend(p.inputs);
        ds.outputs.extend(p.outputs);
    }
    ds.manifest.first_index = req.first_index;
    ds.manifest.n_samples = ds.inputs.len();
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub benchmark: Benchmark,
    pub split: Split,
    pub path: PathBuf,
    pub n_samples: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checksums {
    pub config_hash: String,
    pub files: Vec<DatasetFile>,
}

pub fn cmd_generate(cfg: &ExperimentConfig, threads: usize) -> Result<Checksums> {
    let hash = cfg.hash();
    cfg.write_resolved()?;
    let mut files = Vec::new();
    for b in &cfg.benchmarks {
        std::fs::create_dir_all(cfg.benchmark_dir(b.name))?;
        for split in Split::ALL {
            let (first_index, n_samples) = offsets(cfg, split);
            let req = DatasetRequest {
                measure: b.measure(),
                n_samples,
                grid_n: cfg.data.grid,
                seed: cfg.data.seed,
                first_index,
                solver: b.solver(),
            };
            let mut ds = generate_split(&req, threads).map_err(|e| e.context(b.name.name()))?;
            ds.manifest.config_hash = Some(hash.clone());
            let path = cfg.dataset_path(b.name, split);
            save_dataset(&ds, &path).map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
            files.push(DatasetFile { benchmark: b.name, split, sha256: sha256_file(&path)?, path, n_samples });
        }
    }
    let sums = Checksums { config_hash: hash, files };
    write_json(&cfg.output_dir.join("checksums.json"), &sums)?;
    Ok(sums)
}

fn load(cfg: &ExperimentConfig, b: Benchmark, split: Split) -> Result<Dataset> {
    let path = cfg.dataset_path(b, split);
    load_dataset(&path).map_err(|e| CliError::from(e).context(&format!("{} (run `generate` first?)", path.display())))
}

/// Empirical eigenvalues next to the Fourier prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCheck {
    pub k: usize,
    pub empirical: f64,
    pub fourier: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOutput {
    pub benchmark: Benchmark,
    pub report: SpectrumReport,
    pub fourier: Vec<FourierCheck>,
}

/// The comparison assumes a shift uniform over the period; it is reported,
/// not enforced, when the measure's shift range is narrower.
pub fn fourier_check(empirical: &SpectrumReport, measure: &MeasureSpec, top: usize) -> Result<Vec<FourierCheck>> {
    let modes = top.div_ceil(2) + 1;
    let f = box_measure_fourier_eigs(measure, modes)?;
    Ok((0..top.min(empirical.eigenvalues.len()).min(f.eigenvalues.len()))
        .map(|k| {
            let (e, a) = (empirical.eigenvalues[k], f.eigenvalues[k]);
            FourierCheck { k: k + 1, empirical: e, fourier: a, rel_diff: (e - a).abs() / a.abs() }
        })
        .collect())
}

pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumOutput>> {
    let hash = cfg.hash();
    cfg.write_resolved()?;
    let sp = &cfg.spectrum;
    let mut out = Vec::new();
    for b in &cfg.benchmarks {
        let ds = load(cfg, b.name, sp.split)?;
        let samples = match sp.field {
            Field::Input => &ds.inputs,
            Field::Output => &ds.outputs,
        };
        let mut report = empirical_covariance_eigs(samples, ds.grid.dx(), sp.p_max).map_err(|e| CliError::from(e).context(b.name.name()))?;
        report.fit_tail(sp.fit_min, sp.fit_max);
        report.config_hash = Some(hash.clone());
        let measure = b.measure();
        let fourier = if sp.fourier_top > 0 && matches!(measure, MeasureSpec::BoxWave { .. }) {
            fourier_check(&report, &measure, sp.fourier_top)?
        } else {
            Vec::new()
        };
        let dir = cfg.benchmark_dir(b.name);
        write_csv(&dir.join("spectrum.csv"), &hash, |w| report.write_csv(w).map_err(std::io::Error::other))?;
        if !fourier.is_empty() {
            write_csv(&dir.join("fourier_check.csv"), &hash, |w| {
                writeln!(w, "k,empirical,fourier,rel_diff")?;
                for c in &fourier {
                    writeln!(w, "{},{:e},{:e},{:e}", c.k, c.empirical, c.fourier, c.rel_diff)?;
                }
                Ok(())
            })?;
        }
        let o = SpectrumOutput { benchmark: b.name, report, fourier };
        write_json(&dir.join("spectrum.json"), &o)?;
        out.push(o);
    }
    Ok(out)
}

pub fn construction_path(cfg: &ExperimentConfig, builder: &Builder, ext: &str) -> PathBuf {
    cfg.output_dir.join("constructions").join(format!("{}.{ext}", builder.name()))
}

pub fn cmd_construct(cfg: &ExperimentConfig, threads: usize) -> Result<ConstructionReport> {
    let c = &cfg.construct;
    let builder = c.builder.ok_or_else(|| CliError::Config("no builder selected".into()))?;
    let budgets = if c.budgets.is_empty() { default_budgets(&builder) } else { c.budgets.clone() };
    let hash = cfg.hash();
    cfg.write_resolved()?;
    let mut report = scaling_report(&builder, &budgets, c.n_mc, c.seed, threads).map_err(|e| CliError::from(e).context(builder.name()))?;
    if let Builder::BurgSdon { t } | Builder::BurgFno { t, .. } = builder {
        report.notes.extend(burgers_time_note(t));
    }
    report.config_hash = Some(hash.clone());
    write_csv(&construction_path(cfg, &builder, "csv"), &hash, |w| report.write_csv(w))?;
    write_json(&construction_path(cfg, &builder, "json"), &report)?;
    Ok(report)
}

/// Outcome of one (benchmark, model, seed) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: Benchmark,
    pub model: String,
    pub seed: u64,
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub best_val_rel_l1: f64,
    /// Set when training diverged; no checkpoint is written then.
    pub diverged: Option<String>,
    pub config_hash: String,
}

struct Job<'a> {
    benchmark: Benchmark,
    model: &'a crate::config::ModelConfig,
    seed: u64,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job<'_>> {
    let mut v = Vec::new();
    for b in &cfg.benchmarks {
        for m in &cfg.models {
            for &seed in &cfg.seeds {
                v.push(Job { benchmark: b.name, model: m, seed });
            }
        }
    }
    v
}

fn history_path(cfg: &ExperimentConfig, b: Benchmark, model: &str, seed: u64) -> PathBuf {
    cfg.benchmark_dir(b).join("models").join(format!("{model}_s{seed}_history.csv"))
}

fn record_path(cfg: &ExperimentConfig, b: Benchmark, model: &str, seed: u64) -> PathBuf {
    cfg.benchmark_dir(b).join("models").join(format!("{model}_s{seed}.json"))
}

/// Trains every (benchmark, model, seed) run, one run per worker. `progress`
/// is called with a line of text every `progress_every` epochs (0 = never).
pub fn cmd_train(
    cfg: &ExperimentConfig,
    threads: usize,
    progress_every: usize,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<Vec<RunRecord>> {
    let hash = cfg.hash();
    cfg.write_resolved()?;
    let mut data = Vec::new();
    for b in &cfg.benchmarks {
        data.push((b.name, load(cfg, b.name, Split::Train)?, load(cfg, b.name, Split::Val)?));
    }
    let jobs = jobs(cfg);
    let records = par_map(jobs.len(), threads, |i| {
        let job = &jobs[i];
        let (_, train, val) = data.iter().find(|d| d.0 == job.benchmark).expect("loaded above");
        let tag = format!("{}/{} s{}", job.benchmark.name(), job.model.name, job.seed);
        let model = init_model(&job.model.architecture, &train.grid, train.n_input_channels, 1, job.seed)
            .map_err(|e| CliError::from(e).context(&tag))?;
        let tc = hyperop_nets::train::TrainConfig { seed: job.seed, ..cfg.train.clone() };
        let result = train_model_with(model, train, val, &tc, |r| {
            if progress_every > 0 && r.epoch % progress_every == 0 {
                progress(&format!("{tag}: epoch {} loss {:.4e} val {:.4e}", r.epoch, r.train_loss, r.val_rel_l1));
            }
        });
        let mut rec = RunRecord {
            benchmark: job.benchmark,
            model: job.model.name.clone(),
            seed: job.seed,
            best_epoch: 0,
            final_train_loss: f64::NAN,
            best_val_rel_l1: f64::NAN,
            diverged: None,
            config_hash: hash.clone(),
        };
        match result {
            Ok((model, history)) => {
                rec.best_epoch = history.best_epoch;
                rec.final_train_loss = history.records.last().map_or(f64::NAN, |r| r.train_loss);
                rec.best_val_rel_l1 = history.records.iter().find(|r| r.epoch == history.best_epoch).map_or(f64::NAN, |r| r.val_rel_l1);
                save_run(cfg, job, &hash, &model, &history)?;
            }
            Err(e @ TrainError::Divergence { .. }) => rec.diverged = Some(e.to_string()),
            Err(e) => return Err(CliError::from(e).context(&tag)),
        }
        write_json(&record_path(cfg, job.benchmark, &job.model.name, job.seed), &rec)?;
        Ok(rec)
    })?;
    let failed: Vec<String> = records
        .iter()
        .filter_map(|r| r.diverged.as_ref().map(|d| format!("{}/{} s{}: {d}", r.benchmark.name(), r.model, r.seed)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Numeric(failed.join("; ")));
    }
    Ok(records)
}

fn save_run(
    cfg: &ExperimentConfig,
    job: &Job<'_>,
    hash: &str,
    model: &hyperop_nets::operator_nets::OperatorModel,
    history: &History,
) -> Result<()> {
    let path = cfg.checkpoint_path(job.benchmark, &job.model.name, job.seed);
    std::fs::create_dir_all(path.parent().expect("checkpoint dir"))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_checkpoint_tagged(model, Some(hash), &mut w)?;
    std::io::Write::flush(&mut w)?;
    write_csv(&history_path(cfg, job.benchmark, &job.model.name, job.seed), hash, |w| history.write_csv(w))
}

/// Test-set errors of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub benchmark: Benchmark,
    pub model: String,
    pub seed: u64,
    pub split: Split,
    pub summary: EvalSummary,
    pub errors: Vec<f64>,
    pub config_hash: String,
    /// Hash stored in the checkpoint; differs from `config_hash` when the
    /// model was trained under another config.
    pub checkpoint_hash: Option<String>,
}

/// One Table-1 cell: per-sample relative L1 errors pooled over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub benchmark: Benchmark,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

fn eval_path(cfg: &ExperimentConfig, b: Benchmark, model: &str, seed: u64, split: Split) -> PathBuf {
    cfg.benchmark_dir(b).join("eval").join(format!("{model}_s{seed}_{}.json", split.name()))
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, split: Split, threads: usize) -> Result<(Vec<EvalRecord>, Vec<TableRow>)> {
    let hash = cfg.hash();
    cfg.write_resolved()?;
    let mut records = Vec::new();
    for b in &cfg.benchmarks {
        let ds = load(cfg, b.name, split)?;
        for m in &cfg.models {
            for &seed in &cfg.seeds {
                let path = cfg.checkpoint_path(b.name, &m.name, seed);
                let f = std::fs::File::open(&path).map_err(|e| CliError::Io(format!("{} (run `train` first?): {e}", path.display())))?;
                let (model, tag) = read_checkpoint_tagged(std::io::BufReader::new(f))?;
                let errors = par_map(ds.len(), threads, |i| {
                    let pred = model.predict(&ds.grid, &ds.inputs[i])?;
                    relative_l1_values(&pred, &ds.outputs[i]).map_err(|e| CliError::Numeric(e.to_string()))
                })?;
                let rec = EvalRecord {
                    benchmark: b.name,
                    model: m.name.clone(),
                    seed,
                    split,
                    summary: EvalSummary::from_errors(&errors)?,
                    errors,
                    config_hash: hash.clone(),
                    checkpoint_hash: tag,
                };
                write_json(&eval_path(cfg, b.name, &m.name, seed, split), &rec)?;
                records.push(rec);
            }
        }
    }
    let table = table_rows(&records);
    write_table(&cfg.output_dir.join(format!("table_{}.csv", split.name())), &hash, &table)?;
    Ok((records, table))
}

/// Pools errors over seeds for every (model, benchmark) pair, keeping the
/// order in which pairs first appear.
pub fn table_rows(records: &[EvalRecord]) -> Vec<TableRow> {
    let mut keys: Vec<(String, Benchmark)> = Vec::new();
    for r in records {
        if !keys.iter().any(|k| k.0 == r.model && k.1 == r.benchmark) {
            keys.push((r.model.clone(), r.benchmark));
        }
    }
    keys.into_iter()
        .map(|(model, benchmark)| {
            let errs: Vec<f64> = records
                .iter()
                .filter(|r| r.model == model && r.benchmark == benchmark)
                .flat_map(|r| r.errors.iter().copied())
                .collect();
            TableRow {
                model,
                benchmark,
                median: stats::quantile(&errs, 0.5),
                q25: stats::quantile(&errs, 0.25),
                q75: stats::quantile(&errs, 0.75),
            }
        })
        .collect()
}

pub fn write_table(path: &Path, hash: &str, rows: &[TableRow]) -> Result<()> {
    write_csv(path, hash, |w| {
        writeln!(w, "model,benchmark,median,q25,q75")?;
        for r in rows {
            writeln!(w, "{},{},{},{},{}", r.model, r.benchmark.name(), r.median, r.q25, r.q75)?;
        }
        Ok(())
    })
}

/// Models of one benchmark sorted by median error, with the ratio of each
/// median to the next better one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub benchmark: Benchmark,
    pub models: Vec<String>,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSummary {
    pub builder: String,
    pub error_slope: Option<f64>,
    pub size_slope: Option<f64>,
    pub rate_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub benchmark: Benchmark,
    pub tail_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub table: Vec<TableRow>,
    pub ordering: Vec<Ordering>,
    pub constructions: Vec<ConstructionSummary>,
    pub spectra: Vec<SpectrumSummary>,
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    v.sort();
    Ok(v)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Aggregates every evaluation, construction and spectrum artifact under
/// `dir`. All of them must carry the same config hash.
pub fn cmd_report(dir: &Path) -> Result<Report> {
    let mut hashes: Vec<(PathBuf, Option<String>)> = Vec::new();
    let resolved = dir.join(RESOLVED_CONFIG);
    if resolved.exists() {
        hashes.push((resolved.clone(), hash_from_comment(&std::fs::read_to_string(&resolved)?)));
    }
    let mut evals: Vec<EvalRecord> = Vec::new();
    let mut spectra = Vec::new();
    let mut bench_dirs: Vec<PathBuf> = Vec::new();
    if dir.is_dir() {
        for e in std::fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() && p.file_name().is_some_and(|n| n != "constructions") {
                bench_dirs.push(p);
            }
        }
    }
    bench_dirs.sort();
    for b in &bench_dirs {
        for p in json_files(&b.join("eval"))? {
            let r: EvalRecord = read_json(&p)?;
            hashes.push((p.clone(), Some(r.config_hash.clone())));
            hashes.push((p.with_extension("json (checkpoint)"), r.checkpoint_hash.clone()));
            evals.push(r);
        }
        let sp = b.join("spectrum.json");
        if sp.exists() {
            let o: SpectrumOutput = read_json(&sp)?;
            hashes.push((sp, o.report.config_hash.clone()));
            spectra.push(SpectrumSummary { benchmark: o.benchmark, tail_exponent: o.report.tail_fit.map(|f| f.exponent) });
        }
    }
    let mut constructions = Vec::new();
    for p in json_files(&dir.join("constructions"))? {
        let r: ConstructionReport = read_json(&p)?;
        hashes.push((p, r.config_hash.clone()));
        constructions.push(ConstructionSummary {
            builder: r.builder.name().to_string(),
            error_slope: r.error_fit.as_ref().map(|f| f.slope),
            size_slope: r.size_fit.as_ref().map(|f| f.slope),
            rate_constant: r.rate_constant,
        });
    }
    let Some((_, Some(first))) = hashes.first().cloned() else {
        return Err(CliError::Config(match hashes.first() {
            None => format!("no artifacts under {}", dir.display()),
            Some((p, _)) => format!("{} carries no config hash", p.display()),
        }));
    };
    for (p, h) in &hashes {
        if h.as_deref() != Some(first.as_str()) {
            return Err(CliError::Config(format!(
                "config hash mismatch: {} has {} but {} has {first}",
                p.display(),
                h.as_deref().unwrap_or("none"),
                hashes[0].0.display()
            )));
        }
    }
    let table = table_rows(&evals.iter().filter(|r| r.split == Split::Test).cloned().collect::<Vec<_>>());
    let mut ordering = Vec::new();
    let mut benches: Vec<Benchmark> = table.iter().map(|r| r.benchmark).collect();
    benches.dedup();
    for b in benches {
        let mut rows: Vec<&TableRow> = table.iter().filter(|r| r.benchmark == b).collect();
        rows.sort_by(|x, y| x.median.total_cmp(&y.median));
        ordering.push(Ordering {
            benchmark: b,
            models: rows.iter().map(|r| r.model.clone()).collect(),
            ratios: rows.windows(2).map(|w| w[1].median / w[0].median).collect(),
        });
    }
    let report = Report { config_hash: first.clone(), table, ordering, constructions, spectra };
    if !report.table.is_empty() {
        write_table(&dir.join("report.csv"), &first, &report.table)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}
