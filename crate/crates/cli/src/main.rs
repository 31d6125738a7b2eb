//! Command-line front end for the detection benchmark toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aigi_core::attacks::{apply_attack, sample_attack, AttackKind, AttackSpec};
use aigi_core::data::{
    build_spectral_cache, read_ppm, split_val_test, stratified_subsample, synth_dataset,
    DatasetManifest, Split, TensorCache,
};
use aigi_core::image::{resize_bilinear, ImageTensor, RangeTag};
use aigi_core::metrics::{Domain, EvalReport};
use aigi_core::nn::arch::tiny_detector_arch;
use aigi_core::nn::checkpoint::{load_checkpoint, save_checkpoint};
use aigi_core::nn::train::{train, SampleSet, TrainConfig};
use aigi_core::pipeline::{
    evaluate_adversarial, evaluate_clean, load_candidate_pool, metrics_tsv, run_pipeline,
    RunConfig,
};
use aigi_core::profiler::profile;
use aigi_core::report::{emit_scatter_svg, linear_fit};
use aigi_core::rng::Rng;
use aigi_core::selection::{constraint_filter, efficiency_score, rank_and_dedupe, EfficiencyWeights};
use aigi_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "aigi-bench",
    version,
    about = "Benchmark toolkit for lightweight AI-generated-image detection"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build tensor caches from a directory tree of PPM/PGM images.
    ///
    /// Expected layout: <input>/<generator>/<nature|ai>/<file>. Grayscale
    /// images are replicated to three channels.
    Preprocess {
        /// Dataset root directory.
        #[arg(long)]
        input: PathBuf,
        /// Output directory for caches and manifests.
        #[arg(long)]
        out: PathBuf,
        /// Square edge length every image is resized to.
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Total entries for balanced stratified subsampling (must divide
        /// evenly across class-generator pairs).
        #[arg(long)]
        total: Option<usize>,
        /// Split the result 50/50 into validation and test caches.
        #[arg(long)]
        split_val_test: bool,
        /// Also derive spectral-domain caches.
        #[arg(long)]
        spectral: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Generate the procedural two-class dataset (train + val caches).
    SynthData {
        /// Training images per class; validation gets a quarter of this.
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        /// Square edge length, 64 for desk scale.
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also derive spectral-domain caches.
        #[arg(long)]
        spectral: bool,
    },
    /// Perturb every image of a spatial cache, logging replayable specs.
    Attack {
        /// Spatial-domain tensor cache to perturb.
        #[arg(long)]
        input: PathBuf,
        /// One of crop, blur, noise, jpeg, combined (ignored with --replay).
        #[arg(long)]
        kind: Option<AttackKind>,
        /// Replay a previously written attack log instead of sampling.
        #[arg(long, conflicts_with = "kind")]
        replay: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the compact dual-domain detector on one cache pair.
    Train {
        /// Training-split tensor cache.
        #[arg(long)]
        train_cache: PathBuf,
        /// Validation-split tensor cache (same domain and shape).
        #[arg(long)]
        val_cache: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate trained spatial and spectral models, clean and attacked.
    Evaluate {
        #[arg(long)]
        model_spatial: PathBuf,
        #[arg(long)]
        model_spectral: PathBuf,
        /// Spatial-domain validation cache; spectra are derived from it.
        #[arg(long)]
        val_cache: PathBuf,
        /// Comma-separated attack kinds.
        #[arg(long, default_value = "crop,blur,noise,jpeg,combined")]
        attacks: String,
        /// Include decision fusion in the clean setting too.
        #[arg(long)]
        fusion_clean: bool,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a candidate-model pool by efficiency score.
    Select {
        /// Headered table with columns: name, family, top1_acc, params, flops.
        #[arg(long)]
        pool: PathBuf,
        /// Weights for accuracy, inverse FLOPs, inverse params.
        #[arg(long, default_value = "0.5,0.25,0.25")]
        lambda: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Parameter, MAC, and FLOP breakdown of the compact detector.
    Profile {
        /// Square input edge length.
        #[arg(long, default_value_t = 256)]
        size: usize,
    },
    /// Fit accuracy-versus-cost trend panels from a candidate pool.
    Analyze {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value = "0.5,0.25,0.25")]
        lambda: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: data, dual-domain training, evaluation, reports.
    Run {
        /// Flat key = value configuration file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        attacks: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        train_cache: Option<PathBuf>,
        #[arg(long)]
        val_cache: Option<PathBuf>,
        #[arg(long)]
        fusion_clean: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for configuration problems, 4 for numeric failures, 3 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 4,
        _ => 3,
    }
}

fn parse_lambda(s: &str) -> Result<EfficiencyWeights> {
    let mut cfg = RunConfig::default();
    cfg.apply_setting("lambda", s)?;
    Ok(cfg.lambda)
}

fn parse_attack_list(s: &str) -> Result<Vec<AttackKind>> {
    let mut cfg = RunConfig::default();
    cfg.apply_setting("attacks", s)?;
    Ok(cfg.attacks)
}

fn print_reports(reports: &[(String, EvalReport)]) {
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    };
    println!("{:<24} {:>9} {:>8} {:>8} {:>6}", "setting", "accuracy", "f1", "auc_roc", "n");
    for (name, r) in reports {
        println!(
            "{name:<24} {:>9.3} {:>8} {:>8} {:>6}",
            r.accuracy,
            opt(r.f1),
            opt(r.auc_roc),
            r.n
        );
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess { input, out, size, total, split_val_test: split, spectral, seed } => {
            preprocess(&input, &out, size, total, split, spectral, seed)
        }
        Command::SynthData { per_class, size, seed, out, spectral } => {
            std::fs::create_dir_all(&out)?;
            let (train, val) = synth_dataset(per_class, size, &mut Rng::new(seed))?;
            train.write(&out.join("train.cache"))?;
            val.write(&out.join("val.cache"))?;
            if spectral {
                build_spectral_cache(&train)?.write(&out.join("train_spectral.cache"))?;
                build_spectral_cache(&val)?.write(&out.join("val_spectral.cache"))?;
            }
            println!(
                "wrote {} train and {} val images at {size}x{size} to {}",
                train.len(),
                val.len(),
                out.display()
            );
            Ok(())
        }
        Command::Attack { input, kind, replay, seed, out } => {
            attack_cache(&input, kind, replay.as_deref(), seed, &out)
        }
        Command::Train { train_cache, val_cache, epochs, batch, lr, seed, out } => {
            train_command(&train_cache, &val_cache, epochs, batch, lr, seed, &out)
        }
        Command::Evaluate {
            model_spatial,
            model_spectral,
            val_cache,
            attacks,
            fusion_clean,
            batch,
            seed,
            out,
        } => evaluate_command(
            &model_spatial,
            &model_spectral,
            &val_cache,
            &attacks,
            fusion_clean,
            batch,
            seed,
            &out,
        ),
        Command::Select { pool, lambda, top } => {
            let weights = parse_lambda(&lambda)?;
            let candidates = load_candidate_pool(&pool)?;
            let kept = constraint_filter(&candidates);
            println!(
                "{} of {} candidates satisfy the lightweight constraints",
                kept.len(),
                candidates.len()
            );
            let ranked = rank_and_dedupe(&kept, &weights, top)?;
            println!(
                "{:<6} {:<20} {:<14} {:>7} {:>10} {:>12} {:>14}",
                "rank", "name", "family", "E", "top1_acc", "params", "flops"
            );
            for (i, r) in ranked.iter().enumerate() {
                println!(
                    "{:<6} {:<20} {:<14} {:>7.4} {:>10.2} {:>12.0} {:>14.0}",
                    i + 1,
                    r.model.name,
                    r.model.family,
                    r.score,
                    r.model.top1_acc,
                    r.model.params,
                    r.model.flops
                );
            }
            Ok(())
        }
        Command::Profile { size } => {
            let net = tiny_detector_arch(size, size)?;
            let report = profile(&net)?;
            print!("{}", report.to_table());
            println!(
                "input {size}x{size}: {} params, {} MACs, {} FLOPs per inference",
                report.params, report.macs, report.flops
            );
            Ok(())
        }
        Command::Analyze { pool, lambda, out } => analyze(&pool, &lambda, &out),
        Command::Run {
            config,
            seed,
            attacks,
            epochs,
            batch,
            lr,
            lambda,
            out,
            per_class,
            size,
            train_cache,
            val_cache,
            fusion_clean,
        } => {
            let mut cfg = RunConfig::default();
            if let Some(path) = config {
                cfg.apply_file(&path)?;
            }
            // Flags win over file values.
            let mut set = |key: &str, v: Option<String>| -> Result<()> {
                if let Some(v) = v {
                    cfg.apply_setting(key, &v)?;
                }
                Ok(())
            };
            set("seed", seed.map(|v| v.to_string()))?;
            set("attacks", attacks)?;
            set("epochs", epochs.map(|v| v.to_string()))?;
            set("batch", batch.map(|v| v.to_string()))?;
            set("lr", lr.map(|v| v.to_string()))?;
            set("lambda", lambda)?;
            set("out", out.map(|v| v.display().to_string()))?;
            set("synth_per_class", per_class.map(|v| v.to_string()))?;
            set("synth_size", size.map(|v| v.to_string()))?;
            set("train_cache", train_cache.map(|v| v.display().to_string()))?;
            set("val_cache", val_cache.map(|v| v.display().to_string()))?;
            if fusion_clean {
                cfg.fusion_clean = true;
            }
            let summary = run_pipeline(&cfg)?;
            print_reports(&summary.reports);
            println!("artifacts in {}", summary.out_dir.display());
            Ok(())
        }
    }
}

fn load_and_resize(entry_path: &str, size: usize) -> Result<ImageTensor> {
    let img = read_ppm(Path::new(entry_path))?;
    let img = if img.channels == 1 {
        let mut rgb = ImageTensor::zeros(img.height, img.width, 3, RangeTag::Byte0255);
        for y in 0..img.height {
            for x in 0..img.width {
                let v = img.get(y, x, 0);
                for c in 0..3 {
                    rgb.set(y, x, c, v);
                }
            }
        }
        rgb
    } else {
        img
    };
    resize_bilinear(&rgb_checked(img, entry_path)?, size, size)
}

fn rgb_checked(img: ImageTensor, path: &str) -> Result<ImageTensor> {
    if img.channels != 3 {
        return Err(Error::Data(format!("{path}: expected 1 or 3 channels")));
    }
    Ok(img)
}

fn manifest_to_cache(manifest: &DatasetManifest, size: usize) -> Result<TensorCache> {
    let mut images = Vec::with_capacity(manifest.entries.len());
    let mut labels = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        images.push(load_and_resize(&e.path, size)?);
        labels.push(e.label);
    }
    TensorCache::from_images(&images, &labels, Domain::Spatial)
}

#[allow(clippy::too_many_arguments)]
fn preprocess(
    input: &Path,
    out: &Path,
    size: usize,
    total: Option<usize>,
    split: bool,
    spectral: bool,
    seed: u64,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut rng = Rng::new(seed);
    let mut manifest = DatasetManifest::from_directory(input, Split::Train)?;
    if let Some(total) = total {
        manifest = stratified_subsample(&manifest, total, &mut rng)?;
    }
    let emit = |m: &DatasetManifest, stem: &str| -> Result<()> {
        m.save(&out.join(format!("{stem}_manifest.tsv")))?;
        let cache = manifest_to_cache(m, size)?;
        cache.write(&out.join(format!("{stem}.cache")))?;
        if spectral {
            build_spectral_cache(&cache)?.write(&out.join(format!("{stem}_spectral.cache")))?;
        }
        println!("{stem}: {} images", m.entries.len());
        Ok(())
    };
    if split {
        let (val, test) = split_val_test(&manifest, &mut rng)?;
        emit(&val, "val")?;
        emit(&test, "test")?;
    } else {
        emit(&manifest, "train")?;
    }
    Ok(())
}

fn attack_cache(
    input: &Path,
    kind: Option<AttackKind>,
    replay: Option<&Path>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let cache = TensorCache::read(input)?;
    if cache.domain != Domain::Spatial {
        return Err(Error::Data("attacks operate on spatial-domain caches".into()));
    }
    std::fs::create_dir_all(out)?;
    let specs: Vec<AttackSpec> = match (kind, replay) {
        (_, Some(log_path)) => {
            let text = std::fs::read_to_string(log_path)?;
            let mut specs = Vec::new();
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                specs.push(AttackSpec::from_record(line)?);
            }
            if specs.len() != cache.len() {
                return Err(Error::Data(format!(
                    "log holds {} records but the cache holds {} images",
                    specs.len(),
                    cache.len()
                )));
            }
            specs
        }
        (Some(kind), None) => {
            let mut rng = Rng::new(seed);
            (0..cache.len()).map(|_| sample_attack(kind, &mut rng)).collect()
        }
        (None, None) => {
            return Err(Error::Config("pass either --kind or --replay".into()));
        }
    };

    let mut attacked = Vec::with_capacity(cache.len());
    let mut log = String::from(
        "kind\tseed\tcrop_fraction\tblur_kernel\tblur_sigma\tnoise_variance\tjpeg_quality\tflags\n",
    );
    for (i, spec) in specs.iter().enumerate() {
        log.push_str(&spec.to_record());
        log.push('\n');
        attacked.push(apply_attack(&cache.image(i), spec)?);
    }
    TensorCache::from_images(&attacked, &cache.labels, Domain::Spatial)?
        .write(&out.join("attacked.cache"))?;
    let log_name = match kind {
        Some(k) => format!("attacks_{}.tsv", k.name()),
        None => "attacks_replayed.tsv".to_string(),
    };
    std::fs::write(out.join(log_name), log)?;
    println!("attacked {} images into {}", cache.len(), out.display());
    Ok(())
}

fn train_command(
    train_path: &Path,
    val_path: &Path,
    epochs: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let train_cache = TensorCache::read(train_path)?;
    let val_cache = TensorCache::read(val_path)?;
    if train_cache.domain != val_cache.domain {
        return Err(Error::Data("train and val caches are from different domains".into()));
    }
    if (train_cache.height, train_cache.width, train_cache.channels)
        != (val_cache.height, val_cache.width, val_cache.channels)
    {
        return Err(Error::Data("train and val caches have different shapes".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut net = tiny_detector_arch(train_cache.height, train_cache.width)?;
    net.init_params(&mut Rng::new(seed));
    let cfg = TrainConfig { epochs, batch_size: batch, lr, seed, ..TrainConfig::default() };
    let train_set = SampleSet::from_images(&train_cache.images(), &train_cache.labels)?;
    let val_set = SampleSet::from_images(&val_cache.images(), &val_cache.labels)?;
    let report = train(&mut net, &train_set, &val_set, &cfg)?;

    save_checkpoint(&net, &out.join("model.ckpt"))?;
    let mut tsv = String::from("epoch\ttrain_loss\tval_acc\tlr\n");
    for e in &report.log {
        tsv.push_str(&format!("{}\t{:.6}\t{:.6}\t{:e}\n", e.epoch, e.train_loss, e.val_acc, e.lr));
    }
    std::fs::write(out.join("train_log.tsv"), tsv)?;
    let points: Vec<(f64, f64)> = report.log.iter().map(|e| (e.epoch as f64, e.val_acc)).collect();
    if let Ok(fit) = linear_fit(&points) {
        std::fs::write(
            out.join("train_curve.svg"),
            emit_scatter_svg(&points, &fit, "validation accuracy", "epoch", "accuracy (%)"),
        )?;
    }
    println!(
        "best val accuracy {:.2}% at epoch {}{}",
        report.best_val_acc,
        report.best_epoch,
        if report.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate_command(
    model_spatial: &Path,
    model_spectral: &Path,
    val_cache: &Path,
    attacks: &str,
    fusion_clean: bool,
    batch: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let kinds = parse_attack_list(attacks)?;
    let net_p = load_checkpoint(model_spatial)?;
    let net_f = load_checkpoint(model_spectral)?;
    let val_sp = TensorCache::read(val_cache)?;
    if val_sp.domain != Domain::Spatial {
        return Err(Error::Data("evaluation expects a spatial-domain cache".into()));
    }
    let val_fr = build_spectral_cache(&val_sp)?;
    std::fs::create_dir_all(out)?;

    let mut reports = evaluate_clean(&net_p, &net_f, &val_sp, &val_fr, batch, fusion_clean)?;
    let outcome =
        evaluate_adversarial(&net_p, &net_f, &val_sp, &kinds, &Rng::new(seed), batch)?;
    for (kind, log) in &outcome.logs {
        std::fs::write(out.join(format!("attacks_{}.tsv", kind.name())), log)?;
    }
    reports.extend(outcome.reports);
    std::fs::write(out.join("metrics.tsv"), metrics_tsv(&reports))?;
    print_reports(&reports);
    Ok(())
}

fn analyze(pool_path: &Path, lambda: &str, out: &Path) -> Result<()> {
    let weights = parse_lambda(lambda)?;
    let pool = constraint_filter(&load_candidate_pool(pool_path)?);
    if pool.len() < 2 {
        return Err(Error::Data("need at least 2 constraint-satisfying candidates".into()));
    }
    std::fs::create_dir_all(out)?;
    let acc: Vec<f64> = pool.iter().map(|m| m.top1_acc).collect();
    let panels: [(&str, &str, Vec<f64>); 3] = [
        ("panel_params", "parameters (millions)", pool.iter().map(|m| m.params / 1e6).collect()),
        ("panel_flops", "GFLOPs", pool.iter().map(|m| m.flops / 1e9).collect()),
        (
            "panel_efficiency",
            "efficiency score",
            pool.iter()
                .map(|m| efficiency_score(m, &pool, &weights))
                .collect::<Result<_>>()?,
        ),
    ];
    for (stem, label, xs) in panels {
        let points: Vec<(f64, f64)> = xs.iter().cloned().zip(acc.iter().cloned()).collect();
        let fit = linear_fit(&points)?;
        std::fs::write(
            out.join(format!("{stem}.svg")),
            emit_scatter_svg(&points, &fit, "top-1 accuracy trend", label, "top-1 accuracy (%)"),
        )?;
        println!(
            "{stem}: slope {:.4}, intercept {:.4}, R^2 {:.4}, n {}",
            fit.slope, fit.intercept, fit.r_squared, fit.n
        );
    }
    Ok(())
}
