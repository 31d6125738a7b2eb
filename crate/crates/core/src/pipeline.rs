//! Full experiment orchestration: dataset, dual-domain training, clean and
//! adversarial evaluation, and deterministic report artifacts.
//!
//! A run directory is owned by one process at a time via a lock file. Every
//! artifact is a pure function of the resolved configuration, so rerunning
//! with equal seeds reproduces metric reports and attack logs byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::attacks::{apply_attack, sample_attack, AttackKind};
use crate::data::{build_spectral_cache, synth_dataset, TensorCache};
use crate::error::{Error, Result};
use crate::fft::spectral_image;
use crate::metrics::{evaluate_protocol, Domain, EvalReport, EvalSetting, PredictionRecord};
use crate::nn::arch::tiny_detector_arch;
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::graph::NetworkGraph;
use crate::nn::train::{predict_scores, train, SampleSet, TrainConfig, TrainReport};
use crate::report::{emit_scatter_svg, linear_fit};
use crate::rng::Rng;
use crate::selection::EfficiencyWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Pre-built spatial caches; when absent the run generates synthetic
    /// data from `synth_per_class`/`synth_size`.
    pub train_cache: Option<PathBuf>,
    pub val_cache: Option<PathBuf>,
    pub synth_per_class: usize,
    pub synth_size: usize,
    pub attacks: Vec<AttackKind>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda: EfficiencyWeights,
    pub out_dir: PathBuf,
    pub fusion_clean: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            train_cache: None,
            val_cache: None,
            synth_per_class: 200,
            synth_size: 64,
            attacks: AttackKind::ALL.to_vec(),
            epochs: 100,
            batch_size: 32,
            lr: 1e-4,
            lambda: EfficiencyWeights::default(),
            out_dir: PathBuf::from("run-out"),
            fusion_clean: false,
        }
    }
}

fn parse_attacks(value: &str) -> Result<Vec<AttackKind>> {
    let mut kinds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let kind: AttackKind = part
            .parse()
            .map_err(|_| Error::Config(format!("unknown attack kind `{part}`")))?;
        if kinds.contains(&kind) {
            return Err(Error::Config(format!("attack kind `{part}` listed twice")));
        }
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err(Error::Config("attack list is empty".into()));
    }
    Ok(kinds)
}

fn parse_lambda(value: &str) -> Result<EfficiencyWeights> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "lambda needs 3 comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut v = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .parse()
            .map_err(|_| Error::Config(format!("bad lambda value `{p}`")))?;
    }
    EfficiencyWeights::new(v[0], v[1], v[2]).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    /// Apply one flat `key = value` setting. Unknown keys are rejected so
    /// typos surface at validation time instead of silently using defaults.
    pub fn apply_setting(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value `{value}` for `{what}`"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "train_cache" => self.train_cache = Some(PathBuf::from(value)),
            "val_cache" => self.val_cache = Some(PathBuf::from(value)),
            "synth_per_class" => {
                self.synth_per_class = value.parse().map_err(|_| bad("synth_per_class"))?
            }
            "synth_size" => self.synth_size = value.parse().map_err(|_| bad("synth_size"))?,
            "attacks" => self.attacks = parse_attacks(value)?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch" => self.batch_size = value.parse().map_err(|_| bad("batch"))?,
            "lr" => self.lr = value.parse().map_err(|_| bad("lr"))?,
            "lambda" => self.lambda = parse_lambda(value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "fusion_clean" => {
                self.fusion_clean = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("fusion_clean")),
                }
            }
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parse a flat INI-style `key = value` file into `self`. Blank lines
    /// and `#`/`;` comments are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {} is not `key = value`", lineno + 1))
            })?;
            self.apply_setting(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Check invariants and referenced paths before any work happens.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.epochs > 100 {
            return Err(Error::Config(format!("epochs {} outside 1..=100", self.epochs)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.attacks.is_empty() {
            return Err(Error::Config("attack list is empty".into()));
        }
        match (&self.train_cache, &self.val_cache) {
            (Some(t), Some(v)) => {
                for p in [t, v] {
                    if !p.is_file() {
                        return Err(Error::Config(format!(
                            "dataset path {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
            (None, None) => {
                if self.synth_per_class < 8 {
                    return Err(Error::Config(format!(
                        "synth_per_class {} below the minimum of 8",
                        self.synth_per_class
                    )));
                }
            }
            _ => {
                return Err(Error::Config(
                    "train_cache and val_cache must be set together".into(),
                ))
            }
        }
        Ok(())
    }

    /// Serialized resolved configuration, written alongside run artifacts.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let attacks: Vec<&str> = self.attacks.iter().map(|k| k.name()).collect();
        let _ = writeln!(s, "attacks = {}", attacks.join(","));
        let _ = writeln!(s, "batch = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "fusion_clean = {}", self.fusion_clean);
        let _ = writeln!(
            s,
            "lambda = {},{},{}",
            self.lambda.lambda1, self.lambda.lambda2, self.lambda.lambda3
        );
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        if let (Some(t), Some(v)) = (&self.train_cache, &self.val_cache) {
            let _ = writeln!(s, "train_cache = {}", t.display());
            let _ = writeln!(s, "val_cache = {}", v.display());
        } else {
            let _ = writeln!(s, "synth_per_class = {}", self.synth_per_class);
            let _ = writeln!(s, "synth_size = {}", self.synth_size);
        }
        s
    }
}

/// Everything `run` produced, keyed by report row name in emission order.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<(String, EvalReport)>,
    pub out_dir: PathBuf,
}

fn tag_stage(stage: &str, e: Error) -> Error {
    let wrap = |m: String| format!("stage {stage}: {m}");
    match e {
        Error::Dimension(m) => Error::Dimension(wrap(m)),
        Error::Parameter(m) => Error::Parameter(wrap(m)),
        Error::Numeric(m) => Error::Numeric(wrap(m)),
        Error::State(m) => Error::State(wrap(m)),
        Error::Data(m) => Error::Data(wrap(m)),
        Error::Config(m) => Error::Config(wrap(m)),
        Error::UnsupportedMetric(m) => Error::UnsupportedMetric(wrap(m)),
        Error::Io(io) => Error::Data(wrap(io.to_string())),
    }
}

struct RunDir {
    root: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    fn acquire(root: &Path) -> Result<RunDir> {
        std::fs::create_dir_all(root)?;
        let lock = root.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(RunDir { root: root.to_path_buf(), lock }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::State(format!(
                "run directory {} is locked by another process (remove {} if stale)",
                root.display(),
                lock.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.root.join(name), contents)?;
        Ok(())
    }

    fn fail(&self, stage: &str, err: &Error) {
        let _ = std::fs::write(
            self.root.join("FAILED"),
            format!("stage: {stage}\nerror: {err}\n"),
        );
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock);
    }
}

fn to_set(cache: &TensorCache) -> Result<SampleSet> {
    SampleSet::from_images(&cache.images(), &cache.labels)
}

fn train_log_tsv(report: &TrainReport) -> String {
    let mut s = String::from("epoch\ttrain_loss\tval_acc\tlr\n");
    for e in &report.log {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}\t{:e}", e.epoch, e.train_loss, e.val_acc, e.lr);
    }
    s
}

fn train_curve_svg(report: &TrainReport, title: &str) -> Option<String> {
    let points: Vec<(f64, f64)> = report
        .log
        .iter()
        .map(|e| (e.epoch as f64, e.val_acc))
        .collect();
    let fit = linear_fit(&points).ok()?;
    Some(emit_scatter_svg(&points, &fit, title, "epoch", "validation accuracy (%)"))
}

fn metric_row(name: &str, report: &EvalReport) -> String {
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6}"),
        None => "-".to_string(),
    };
    format!(
        "{name}\t{:.6}\t{}\t{}\t{}\n",
        report.accuracy,
        opt(report.f1),
        opt(report.auc_roc),
        report.n
    )
}

fn train_domain(
    cache_train: &TensorCache,
    cache_val: &TensorCache,
    cfg: &RunConfig,
    init_rng: &mut Rng,
    train_seed: u64,
) -> Result<(NetworkGraph, TrainReport)> {
    let mut net = tiny_detector_arch(cache_train.height, cache_train.width)?;
    net.init_params(init_rng);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        seed: train_seed,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &to_set(cache_train)?, &to_set(cache_val)?, &tc)?;
    Ok((net, report))
}

/// Execute the full benchmark: data, dual-domain training, clean and
/// adversarial evaluation, reports. Artifacts land under `config.out_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let dir = RunDir::acquire(&config.out_dir)?;
    match run_stages(config, &dir) {
        Ok(summary) => Ok(summary),
        Err((stage, err)) => {
            dir.fail(&stage, &err);
            Err(tag_stage(&stage, err))
        }
    }
}

fn run_stages(config: &RunConfig, dir: &RunDir) -> std::result::Result<RunSummary, (String, Error)> {
    let stage = |name: &str| name.to_string();
    let master = Rng::new(config.seed);

    dir.write("config.ini", &config.to_ini())
        .map_err(|e| (stage("config"), e))?;

    // Data: load caches or generate the procedural dataset.
    let (train_sp, val_sp) = match (&config.train_cache, &config.val_cache) {
        (Some(t), Some(v)) => {
            let load = |p: &Path| -> Result<TensorCache> {
                let c = TensorCache::read(p)?;
                if c.domain != Domain::Spatial {
                    return Err(Error::Data(format!(
                        "{} is not a spatial-domain cache",
                        p.display()
                    )));
                }
                Ok(c)
            };
            (
                load(t).map_err(|e| (stage("data"), e))?,
                load(v).map_err(|e| (stage("data"), e))?,
            )
        }
        _ => synth_dataset(config.synth_per_class, config.synth_size, &mut master.child(0))
            .map_err(|e| (stage("data"), e))?,
    };

    let train_fr = build_spectral_cache(&train_sp).map_err(|e| (stage("spectral"), e))?;
    let val_fr = build_spectral_cache(&val_sp).map_err(|e| (stage("spectral"), e))?;

    // The two detectors train independently, one per domain.
    let (net_p, log_p) = train_domain(
        &train_sp,
        &val_sp,
        config,
        &mut master.child(1),
        master.child(2).next_u64(),
    )
    .map_err(|e| (stage("train-spatial"), e))?;
    let (net_f, log_f) = train_domain(
        &train_fr,
        &val_fr,
        config,
        &mut master.child(3),
        master.child(4).next_u64(),
    )
    .map_err(|e| (stage("train-spectral"), e))?;

    let persist = |name: &str, net: &NetworkGraph, rep: &TrainReport| -> Result<()> {
        save_checkpoint(net, &dir.root.join(format!("model_{name}.ckpt")))?;
        dir.write(&format!("train_{name}.tsv"), &train_log_tsv(rep))?;
        if let Some(svg) = train_curve_svg(rep, &format!("validation accuracy, {name} domain")) {
            dir.write(&format!("train_{name}.svg"), &svg)?;
        }
        Ok(())
    };
    persist("spatial", &net_p, &log_p).map_err(|e| (stage("train-spatial"), e))?;
    persist("spectral", &net_f, &log_f).map_err(|e| (stage("train-spectral"), e))?;

    let mut reports = evaluate_clean(
        &net_p,
        &net_f,
        &val_sp,
        &val_fr,
        config.batch_size,
        config.fusion_clean,
    )
    .map_err(|e| (stage("evaluate-clean"), e))?;

    let outcome = evaluate_adversarial(
        &net_p,
        &net_f,
        &val_sp,
        &config.attacks,
        &master.child(5),
        config.batch_size,
    )
    .map_err(|e| (stage("evaluate-adversarial"), e))?;
    for (kind, log) in &outcome.logs {
        dir.write(&format!("attacks_{}.tsv", kind.name()), log)
            .map_err(|e| (stage("attack"), e))?;
    }
    reports.extend(outcome.reports);

    dir.write("metrics.tsv", &metrics_tsv(&reports))
        .map_err(|e| (stage("report"), e))?;

    Ok(RunSummary { reports, out_dir: dir.root.clone() })
}

fn build_records(score_p: &[f64], score_f: &[f64], labels: &[u8]) -> Vec<PredictionRecord> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &g)| PredictionRecord::new(score_p[i], score_f[i], g))
        .collect()
}

/// Score both detectors on the clean validation pair and report per-domain
/// metrics; fusion is included only on request since it is an adversarial
/// protocol by default.
pub fn evaluate_clean(
    net_p: &NetworkGraph,
    net_f: &NetworkGraph,
    val_sp: &TensorCache,
    val_fr: &TensorCache,
    batch: usize,
    fusion_clean: bool,
) -> Result<Vec<(String, EvalReport)>> {
    let sp = predict_scores(net_p, &to_set(val_sp)?, batch)?;
    let sf = predict_scores(net_f, &to_set(val_fr)?, batch)?;
    let records = build_records(&sp, &sf, &val_sp.labels);
    let mut reports = Vec::new();
    for (name, setting) in [
        ("clean_spatial", EvalSetting::Clean(Domain::Spatial)),
        ("clean_spectral", EvalSetting::Clean(Domain::Spectral)),
    ] {
        reports.push((name.to_string(), evaluate_protocol(&records, setting)?));
    }
    if fusion_clean {
        reports.push((
            "clean_fusion".to_string(),
            evaluate_protocol(&records, EvalSetting::AdvFusion)?,
        ));
    }
    Ok(reports)
}

#[derive(Debug, Clone)]
pub struct AdversarialOutcome {
    pub reports: Vec<(String, EvalReport)>,
    /// Replayable parameter log per attack kind, one record per image.
    pub logs: Vec<(AttackKind, String)>,
}

/// Attack the spatial validation images, rederive spectra, and score both
/// detectors plus the fusion rule under every requested attack kind.
///
/// Each kind draws from its own child stream of `attack_root`, so the set
/// of requested kinds never changes the parameters of another kind.
pub fn evaluate_adversarial(
    net_p: &NetworkGraph,
    net_f: &NetworkGraph,
    val_sp: &TensorCache,
    attacks: &[AttackKind],
    attack_root: &Rng,
    batch: usize,
) -> Result<AdversarialOutcome> {
    if val_sp.domain != Domain::Spatial {
        return Err(Error::Data("adversarial evaluation needs a spatial cache".into()));
    }
    let mut reports = Vec::new();
    let mut logs = Vec::new();
    for (ki, &kind) in attacks.iter().enumerate() {
        let mut kind_rng = attack_root.child(ki as u64);
        let mut attacked = Vec::with_capacity(val_sp.len());
        let mut log = String::from(
            "kind\tseed\tcrop_fraction\tblur_kernel\tblur_sigma\tnoise_variance\tjpeg_quality\tflags\n",
        );
        for i in 0..val_sp.len() {
            let spec = sample_attack(kind, &mut kind_rng);
            log.push_str(&spec.to_record());
            log.push('\n');
            attacked.push(apply_attack(&val_sp.image(i), &spec)?);
        }
        logs.push((kind, log));

        let spectra: Result<Vec<_>> = attacked.iter().map(spectral_image).collect();
        let sp = predict_scores(net_p, &SampleSet::from_images(&attacked, &val_sp.labels)?, batch)?;
        let sf = predict_scores(net_f, &SampleSet::from_images(&spectra?, &val_sp.labels)?, batch)?;
        let records = build_records(&sp, &sf, &val_sp.labels);
        for (suffix, setting) in [
            ("spatial", EvalSetting::AdvSpatial),
            ("spectral", EvalSetting::AdvSpectral),
            ("fusion", EvalSetting::AdvFusion),
        ] {
            reports.push((
                format!("adv_{}_{suffix}", kind.name()),
                evaluate_protocol(&records, setting)?,
            ));
        }
    }
    Ok(AdversarialOutcome { reports, logs })
}

/// Serialize evaluation rows as the standard tab-separated metrics table.
pub fn metrics_tsv(reports: &[(String, EvalReport)]) -> String {
    let mut s = String::from("setting\taccuracy\tf1\tauc_roc\tn\n");
    for (name, rep) in reports {
        s.push_str(&metric_row(name, rep));
    }
    s
}

/// Parse a headered candidate-pool table: name, family, top1_acc, params,
/// flops, tab- or comma-separated.
pub fn load_candidate_pool(path: &Path) -> Result<Vec<crate::selection::CandidateModel>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("candidate pool file is empty".into()))?;
    let sep = if header.contains('\t') { '\t' } else { ',' };
    let cols: Vec<&str> = header.split(sep).map(str::trim).collect();
    let want = ["name", "family", "top1_acc", "params", "flops"];
    if cols != want {
        return Err(Error::Data(format!(
            "candidate pool header {cols:?}, expected {want:?}"
        )));
    }
    let mut pool = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(sep).map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::Data(format!(
                "candidate pool row {} has {} fields, expected 5",
                i + 2,
                f.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad {what} `{s}` on row {}", i + 2)))
        };
        pool.push(crate::selection::CandidateModel {
            name: f[0].to_string(),
            family: f[1].to_string(),
            top1_acc: num(f[2], "top1_acc")?,
            params: num(f[3], "params")?,
            flops: num(f[4], "flops")?,
        });
    }
    if pool.is_empty() {
        return Err(Error::Data("candidate pool has no rows".into()));
    }
    Ok(pool)
}

/// Group evaluation rows for display: setting name -> report.
pub fn reports_by_name(summary: &RunSummary) -> BTreeMap<&str, &EvalReport> {
    summary.reports.iter().map(|(n, r)| (n.as_str(), r)).collect()
}
