use std::fs::File;
use std::io::BufWriter;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gesture_cell::net::{Checkpoint, TrainConfig};
use gesture_cell::radar::io::write_cube;
use gesture_cell::synth::{
    generate_dataset, load_dataset, random_script, synth_gesture_sequence, DatasetSpec, Environment, EnvironmentProfile,
    GestureClass, HandModel, StoreFormat,
};
use gesture_cell_gateway::demo::{run_demo, DemoConfig, DemoKind};
use gesture_cell_gateway::log::{read_log, replay, SessionLogWriter};
use gesture_cell_gateway::server::{self, ServerConfig};
use gesture_cell_gateway::source::SourceConfig;
use gesture_cell_gateway::training::{evaluate_checkpoint, labeled_splits, train_checkpoint};
use gesture_cell_gateway::{default_checkpoint, default_dataset_dir, PipelineConfig, Session, HOME_ENV};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "gesture-cell", version, about = "Simulated radar gesture-controlled robot cell")]
#[command(after_help = "Default data and checkpoint paths live under $GESTURE_CELL_HOME (./gesture-cell-data if unset).")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesise a labelled dataset.
    GenData {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Ten times the desk sample counts.
        #[arg(long)]
        full_scale: bool,
        /// Store raw cubes instead of point clouds.
        #[arg(long)]
        cubes: bool,
    },
    /// Train the classifier on a dataset.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Test-split accuracy, macro recall, macro F1 and confusion matrix.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Re-run a session log and compare its gesture events and final state.
    Replay {
        log: PathBuf,
        /// Overrides the checkpoint path stored in the log.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the pipeline and serve the operator protocol over TCP.
    Serve {
        #[arg(long, default_value = "test1")]
        preset: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value = "hand_only")]
        env: Environment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run without a classifier (inject_gesture only).
        #[arg(long, conflicts_with = "checkpoint")]
        no_classifier: bool,
        /// Play an RCUB1 cube file instead of the live scene.
        #[arg(long)]
        cubes: Option<PathBuf>,
        /// Record the session to this JSONL log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Headless scripted playlist; exits non-zero unless the task completes.
    Demo {
        kind: DemoKind,
        #[arg(long, default_value = "hand_only")]
        env: Environment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write the radar cubes of one synthetic gesture to an RCUB1 file.
    SynthGesture {
        class: GestureClass,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "hand_only")]
        env: Environment,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Quiet frames appended after the gesture.
        #[arg(long, default_value_t = 20)]
        tail: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_checkpoint(path: Option<PathBuf>) -> Result<Checkpoint> {
    let path = path.unwrap_or_else(default_checkpoint);
    Checkpoint::load(&path).with_context(|| {
        format!("loading checkpoint {} (run `gesture-cell train` or set {HOME_ENV})", path.display())
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::GenData { out, seed, full_scale, cubes } => {
            let dir = out.unwrap_or_else(default_dataset_dir);
            let mut spec = if full_scale { DatasetSpec::full_scale(seed) } else { DatasetSpec::desk(seed) };
            if cubes {
                spec.store = StoreFormat::Cubes;
            }
            let t = Instant::now();
            let manifest = generate_dataset(&spec, &dir)?;
            println!("{} samples in {} ({:.1} s)", manifest.samples.len(), dir.display(), t.elapsed().as_secs_f64());
        }
        Cmd::Train { data, out, epochs, seed } => {
            let dir = data.unwrap_or_else(default_dataset_dir);
            let (manifest, frames) =
                load_dataset(&dir).with_context(|| format!("loading dataset {}", dir.display()))?;
            let splits = labeled_splits(&manifest, &frames);
            println!("train {} / val {} / test {}", splits.train.len(), splits.val.len(), splits.test.len());
            let cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
            let t = Instant::now();
            let (ckpt, outcome) = train_checkpoint(&splits, &cfg, |e| {
                println!(
                    "epoch {:>3}  loss {:.4}  acc {:.4}  val loss {:.4}  val acc {:.4}",
                    e.epoch + 1,
                    e.train_loss,
                    e.train_accuracy,
                    e.val_loss,
                    e.val_accuracy
                );
            })?;
            let path = out.unwrap_or_else(default_checkpoint);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            ckpt.save(&path)?;
            println!(
                "best epoch {} written to {} ({:.1} s)",
                outcome.best_epoch + 1,
                path.display(),
                t.elapsed().as_secs_f64()
            );
        }
        Cmd::Eval { data, checkpoint } => {
            let dir = data.unwrap_or_else(default_dataset_dir);
            let (manifest, frames) =
                load_dataset(&dir).with_context(|| format!("loading dataset {}", dir.display()))?;
            let ckpt = load_checkpoint(checkpoint)?;
            let report = evaluate_checkpoint(&ckpt, &manifest, &frames)?;
            let names: Vec<&str> = GestureClass::ALL.iter().map(|g| g.name()).collect();
            print!("{}", report.render(&names));
        }
        Cmd::Replay { log, checkpoint } => {
            let loaded = read_log(&log)?;
            let ckpt = checkpoint.map(|p| load_checkpoint(Some(p))).transpose()?;
            let report = replay(&loaded, ckpt)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.is_faithful() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Serve { preset, port, bind, env, seed, checkpoint, no_classifier, cubes, log, duration } => {
            let mut config = PipelineConfig::synthetic(&preset, env, seed);
            if let Some(path) = cubes {
                config.source = SourceConfig::FileReplay { path };
            }
            if !no_classifier {
                config.checkpoint = Some(checkpoint.unwrap_or_else(default_checkpoint));
            }
            let mut session = Session::new(config.clone())?;
            if let Some(path) = &log {
                session.attach_log(SessionLogWriter::create(path, &config)?);
            }
            let listener = TcpListener::bind((bind.as_str(), port)).with_context(|| format!("binding {bind}:{port}"))?;
            let handle = server::spawn(session, listener, ServerConfig::default())?;
            eprintln!("serving preset {preset} on {}", handle.addr());
            let mut session = match duration {
                Some(s) => {
                    let end = Instant::now() + Duration::from_secs_f64(s);
                    while Instant::now() < end && !handle.is_finished() {
                        std::thread::sleep(Duration::from_millis(50));
                    }
                    handle.shutdown()?
                }
                None => handle.wait()?,
            };
            if let Some(r) = session.finish_log() {
                r?;
            }
        }
        Cmd::Demo { kind, env, seed, checkpoint, json } => {
            let ckpt = load_checkpoint(checkpoint)?;
            let report = run_demo(&DemoConfig::new(kind, env, seed), ckpt)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for s in &report.steps {
                    println!(
                        "{:<12} attempts {}  heard {:<30} tree {:<20} {:?}",
                        s.gesture.name(),
                        s.attempts,
                        s.recognized.join(","),
                        s.tree.as_deref().unwrap_or("-"),
                        s.outcome
                    );
                }
                println!(
                    "trees {}  all success {}  at home {}  repeats {}  sim {:.1} s  wall {:.1} s",
                    if report.executed_trees == report.expected_trees { "as expected" } else { "differ" },
                    report.all_success,
                    report.at_home,
                    report.repeats(),
                    report.sim_time,
                    report.wall_time.as_secs_f64()
                );
            }
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Cmd::SynthGesture { class, out, env, seed, tail } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let script = random_script(class, &mut rng);
            let profile = EnvironmentProfile::preset(env);
            let radar = gesture_cell::radar::RadarConfig::default();
            let mut cubes = synth_gesture_sequence(&script, &profile, &radar, &HandModel::default(), seed)?;
            let mut quiet = gesture_cell::synth::SceneSim::new(radar, profile, seed ^ 0xA5)?;
            for _ in 0..tail {
                cubes.push(quiet.next_frame(&[])?);
            }
            let mut w = BufWriter::new(File::create(&out).with_context(|| out.display().to_string())?);
            for c in &cubes {
                write_cube(&mut w, c)?;
            }
            println!("{} frames of {class} written to {}", cubes.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
