use std::path::PathBuf;
use std::process::ExitCode;

use adyolo_cli::commands;
use adyolo_cli::config::Config;
use adyolo_core::sim::{SceneSpec, Trajectory};
use anyhow::Result;
use clap::{Args, Parser, Subcommand};

/// Grid-anchored sound event localization and detection toolkit.
#[derive(Parser)]
#[command(name = "adyolo", version, about)]
struct Cli {
    /// Flat key=value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SceneArgs {
    /// Number of label frames.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Number of event classes.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 3)]
    max_polyphony: usize,
    /// Probability that a newborn event duplicates an active event's class.
    #[arg(long, default_value_t = 0.25)]
    overlap_prob: f64,
    /// Uniform feature noise amplitude (0 = noiseless).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Great-circle drift in degrees per frame (0 = static events).
    #[arg(long, default_value_t = 2.0)]
    drift: f64,
    #[arg(long)]
    seed: Option<u64>,
}

impl SceneArgs {
    fn to_spec(&self, config: &Config) -> SceneSpec {
        SceneSpec {
            num_frames: self.frames,
            num_classes: self.classes.unwrap_or(config.num_classes),
            max_polyphony: self.max_polyphony,
            same_class_overlap_prob: self.overlap_prob,
            noise_amplitude: self.noise,
            trajectory: if self.drift == 0.0 {
                Trajectory::Static
            } else {
                Trajectory::GreatCircleDrift {
                    deg_per_frame: self.drift,
                }
            },
            seed: self.seed.unwrap_or(config.seed),
            grid: Default::default(),
            ..SceneSpec::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: reference events plus feature vectors.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Reference CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Feature binary output path.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Report responsibility statistics per threshold.
    Encode {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the loss breakdown of predictions against references.
    Loss {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        preds: PathBuf,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random instances.
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Decode a prediction tensor into detections.
    Decode {
        #[arg(long)]
        preds: PathBuf,
        /// Unify threshold in degrees.
        #[arg(long)]
        upsilon: Option<f64>,
        #[arg(long)]
        score_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detections against references.
    Eval {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        /// Restrict to frames holding same-class overlapping references.
        #[arg(long)]
        overlap_only: bool,
        /// Emit the machine-readable JSON document instead of key=value.
        #[arg(long)]
        json: bool,
    },
    /// Train the toy head on a scene and write its loss curve.
    TrainToy {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 96)]
        hidden: usize,
        #[arg(long, default_value_t = 1500)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Loss curve CSV output path.
        #[arg(long)]
        curve_out: PathBuf,
        /// Optionally write the trained prediction tensor.
        #[arg(long)]
        preds_out: Option<PathBuf>,
    },
    /// Chain simulate, train-toy, decode, and eval, and print the report.
    Demo {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 96)]
        hidden: usize,
        #[arg(long, default_value_t = 1500)]
        epochs: usize,
        #[arg(long)]
        upsilon: Option<f64>,
        /// Write all intermediate artifacts into this directory.
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Simulate {
            scene,
            out,
            features,
        } => commands::simulate_cmd(&scene.to_spec(&config), &out, features.as_deref()),
        Command::Encode { refs, preds, out } => {
            commands::encode_cmd(&config, &refs, &preds, out.as_deref())
        }
        Command::Loss { refs, preds } => commands::loss_cmd(&config, &refs, &preds),
        Command::Gradcheck { seed, trials } => {
            commands::gradcheck_cmd(seed.unwrap_or(config.seed), trials)
        }
        Command::Decode {
            preds,
            upsilon,
            score_threshold,
            out,
        } => commands::decode_cmd(
            &config,
            &preds,
            upsilon.unwrap_or(config.upsilon_deg),
            score_threshold.unwrap_or(config.score_threshold),
            &out,
        ),
        Command::Eval {
            refs,
            dets,
            overlap_only,
            json,
        } => commands::eval_cmd(&config, &refs, &dets, overlap_only, json),
        Command::TrainToy {
            refs,
            features,
            hidden,
            epochs,
            lr,
            seed,
            curve_out,
            preds_out,
        } => commands::train_toy_cmd(
            &config,
            &refs,
            &features,
            hidden,
            epochs,
            lr,
            seed.unwrap_or(config.seed),
            &curve_out,
            preds_out.as_deref(),
        ),
        Command::Demo {
            scene,
            hidden,
            epochs,
            upsilon,
            outdir,
        } => {
            let mut opts = commands::DemoOptions::from_config(&config);
            opts.scene = scene.to_spec(&config);
            opts.hidden_dim = hidden;
            opts.epochs = epochs;
            opts.head_seed = opts.scene.seed.wrapping_add(1);
            if let Some(upsilon) = upsilon {
                opts.upsilon_deg = upsilon;
            }
            commands::demo_cmd(&opts, outdir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
