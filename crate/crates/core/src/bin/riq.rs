use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use riq_core::features::FeatureParams;
use riq_core::imaging::PreprocessParams;
use riq_core::manifest::{load_labeled, read_manifest};
use riq_core::mlnn::{evaluate, read_model, train, write_model, MlafParams, TrainConfig, DEFAULT_CATEGORIES};
use riq_core::pipeline::{analyze_image, PipelineParams};
use riq_core::retrieval::{self, build_index, load_index, resolve_keywords, save_index, QueryMode};
use riq_core::segmentation::{write_label_map, SegmentationParams};
use riq_core::synth::{generate_dataset, SynthConfig};
use riq_core::Error;

/// Region-based image classification and keyword retrieval.
#[derive(Parser)]
#[command(name = "riq", version)]
struct Cli {
    /// Seed for segmentation windows, weight initialization and synthesis.
    #[arg(long, global = true, env = "RIQ_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment one image and print its significant regions.
    Segment {
        image: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
        /// Write the region map as an 8-bit PGM (value = region index + 1).
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Train a classifier from a labeled-region manifest.
    Train {
        /// Lines of `<image>\t<region index>\t<category>`.
        manifest: PathBuf,
        /// Model file to write.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
        #[command(flatten)]
        net: NetArgs,
    },
    /// Classify every significant region of an image.
    Classify {
        image: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Report per-category precision on a labeled-region manifest.
    Evaluate {
        manifest: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Build a keyword index over all images under a directory.
    Index {
        dir: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        /// Index file to write.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// List indexed images whose keywords contain the query terms.
    Query {
        index: PathBuf,
        #[arg(required = true)]
        keywords: Vec<String>,
        /// Match images containing any of the terms instead of all of them.
        #[arg(long = "or")]
        any: bool,
        /// Warn if the index was built with a different model or parameters.
        #[arg(short, long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        seg: SegArgs,
    },
    /// Generate a labeled synthetic dataset with train/test manifests.
    Synth {
        out: PathBuf,
        /// Labeled regions in the training manifest.
        #[arg(long = "train", default_value_t = 200)]
        train_regions: usize,
        /// Labeled regions in the test manifest.
        #[arg(long = "test", default_value_t = 500)]
        test_regions: usize,
        #[command(flatten)]
        seg: SegArgs,
    },
}

#[derive(Args, Clone)]
struct SegArgs {
    /// Mean-shift window radius in cone-embedded HSV units.
    #[arg(long, default_value_t = 0.10)]
    radius: f64,
    /// Minimum region area as a fraction of the image (t).
    #[arg(long = "min-region", default_value_t = 0.05)]
    min_region: f64,
    /// Minimum pixel support for a palette color.
    #[arg(long = "min-color", default_value_t = 50)]
    min_color: usize,
    /// Number of random mean-shift windows.
    #[arg(long, default_value_t = 64)]
    windows: usize,
    /// Side of the square image after preprocessing.
    #[arg(long, default_value_t = 256)]
    size: usize,
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Sigmoid steepness of the multi-level activation.
    #[arg(long, default_value_t = MlafParams::default().beta)]
    beta: f64,
    /// Window width of each activation level.
    #[arg(long, default_value_t = MlafParams::default().c)]
    c: f64,
    /// Hidden layer width.
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    hidden: usize,
    /// Gradient-descent learning rate.
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    /// Full-batch training epochs.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
}

impl SegArgs {
    fn pipeline(&self, seed: u64) -> riq_core::Result<PipelineParams> {
        let p = PipelineParams {
            preprocess: PreprocessParams {
                target_size: self.size,
                ..Default::default()
            },
            segmentation: SegmentationParams {
                radius: self.radius,
                min_region_fraction: self.min_region,
                min_color_count: self.min_color,
                n_windows: self.windows,
                rng_seed: seed,
                ..Default::default()
            },
            features: FeatureParams::default(),
        };
        p.validate()?;
        Ok(p)
    }
}

impl NetArgs {
    fn configs(&self, seed: u64) -> riq_core::Result<(TrainConfig, MlafParams)> {
        let cfg = TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            hidden: self.hidden,
            rng_seed: seed,
        };
        let mlaf = MlafParams {
            beta: self.beta,
            c: self.c,
            n: DEFAULT_CATEGORIES.len(),
        };
        cfg.validate()?;
        mlaf.validate()?;
        Ok((cfg, mlaf))
    }
}

fn categories() -> Vec<String> {
    DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

fn run(cli: Cli) -> riq_core::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Segment { image, seg, labels_out } => {
            let p = seg.pipeline(seed)?;
            let a = analyze_image(&image, &p)?;
            for (i, r) in a.segmentation.regions.iter().enumerate() {
                let b = r.bbox;
                println!(
                    "{i}\t{}\t{}\t{},{},{},{}",
                    r.label, r.area, b.top, b.left, b.bottom, b.right
                );
            }
            if let Some(path) = labels_out {
                let l = &a.segmentation.labels;
                write_label_map(&path, l.width, l.height, &a.segmentation.regions)?;
            }
        }
        Command::Train {
            manifest,
            out,
            seg,
            net,
        } => {
            let p = seg.pipeline(seed)?;
            let (cfg, mlaf) = net.configs(seed)?;
            let start = Instant::now();
            let data = load_labeled(&read_manifest(&manifest)?, &categories(), &p)?;
            info!("extracted {} labeled regions in {:.1?}", data.len(), start.elapsed());
            let trained = train(&data, &cfg, &mlaf, &categories())?;
            write_model(&trained.model, &out)?;
            let correct = data
                .iter()
                .map(|s| trained.model.classify(&s.features).map(|(l, _)| l == s.category))
                .collect::<riq_core::Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            println!("final loss {:.6}", trained.final_loss);
            println!("training accuracy {:.1}%", 100.0 * correct as f64 / data.len() as f64);
            info!("trained in {:.1?}", start.elapsed());
        }
        Command::Classify { image, model, seg } => {
            let p = seg.pipeline(seed)?;
            let model = read_model(&model)?;
            let a = analyze_image(&image, &p)?;
            for (i, f) in a.features.iter().enumerate() {
                let (level, out) = model.classify(f)?;
                println!("{i}\t{}\t{out:.6}", model.category_name(level));
            }
        }
        Command::Evaluate { manifest, model, seg } => {
            let p = seg.pipeline(seed)?;
            let model = read_model(&model)?;
            let data = load_labeled(&read_manifest(&manifest)?, &model.categories, &p)?;
            print!("{}", evaluate(&model, &data)?);
        }
        Command::Index { dir, model, out, seg } => {
            let p = seg.pipeline(seed)?;
            let bytes = std::fs::read(&model).map_err(|e| io_error(&model, e))?;
            let parsed = read_model(&model)?;
            let (index, failures) = build_index(&dir, &parsed, &bytes, &p)?;
            for f in &failures {
                eprintln!("skipped {}: {}", f.id, f.error);
            }
            save_index(&index, &out)?;
            eprintln!("indexed {} images ({} failed)", index.records.len(), failures.len());
        }
        Command::Query {
            index,
            keywords,
            any,
            model,
            seg,
        } => {
            let idx = load_index(&index)?;
            if let Some(model) = model {
                let p = seg.pipeline(seed)?;
                let bytes = std::fs::read(&model).map_err(|e| io_error(&model, e))?;
                if let Err(e) = idx.check_fingerprint(&retrieval::fingerprint(&bytes, &p)) {
                    eprintln!("warning: {e}");
                }
            }
            let terms = resolve_keywords(&keywords, &DEFAULT_CATEGORIES[..])?;
            let mode = if any { QueryMode::Any } else { QueryMode::All };
            for id in retrieval::query(&idx, &terms, mode) {
                println!("{id}");
            }
        }
        Command::Synth {
            out,
            train_regions,
            test_regions,
            seg,
        } => {
            let cfg = SynthConfig {
                seed,
                train_regions,
                test_regions,
                pipeline: seg.pipeline(seed)?,
                ..Default::default()
            };
            let s = generate_dataset(&out, &cfg)?;
            println!(
                "train: {} regions from {} images; test: {} regions from {} images",
                s.train_lines, s.train_images, s.test_lines, s.test_images
            );
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidParameter { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
