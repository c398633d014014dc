//! Command-line front end. Exit codes: 0 success, 1 runtime or IO failure,
//! 2 usage error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eval::NoiseSpec;
use crate::fusion::{AttentionConfig, Projections};
use crate::pipeline::{run_frames, summarize, CogtConfig, EvalReport, PipelineConfig, Strategy};
use crate::report::{parse_levels, sweep_csv, RunReport, Settings};
use crate::scenario::{preset, Layout, Scene, PRESET_NAMES};
use crate::wire::{write_msgdump, Accounting};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "coopercept", version, about = "Instance-level collaborative perception simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-agent scene file.
    GenScene(GenSceneArgs),
    /// Run one or all strategies on a scene and report AP and bandwidth.
    Run(RunArgs),
    /// Run one strategy over a grid of pose-noise levels.
    SweepNoise(SweepArgs),
    /// Report per-frame byte statistics for late and instance fusion.
    BenchBandwidth(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    None,
    Late,
    Instance,
    All,
}

impl StrategyArg {
    fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyArg::None => vec![Strategy::None],
            StrategyArg::Late => vec![Strategy::Late],
            StrategyArg::Instance => vec![Strategy::Instance],
            StrategyArg::All => Strategy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AccountingArg {
    FeatureOnly,
    FullPayload,
}

impl From<AccountingArg> for Accounting {
    fn from(a: AccountingArg) -> Self {
        match a {
            AccountingArg::FeatureOnly => Accounting::FeatureOnly,
            AccountingArg::FullPayload => Accounting::FullPayload,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    /// Objects per frame; defaults to the preset's count.
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub agents: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: u32,
    #[arg(long, default_value = "default", value_parser = PRESET_NAMES)]
    pub preset: String,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Settings shared by every command that runs the pipeline.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Projection weights file; analytic attention when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,
    /// Enable co-sampled ground truth with this many samples per frame.
    #[arg(long)]
    pub cogt: Option<usize>,
    #[arg(long, value_enum, default_value_t = AccountingArg::FeatureOnly)]
    pub accounting: AccountingArg,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::Instance)]
    pub strategy: StrategyArg,
    /// Pose noise as `sigma_t/sigma_r` (meters/degrees) or a single value for both.
    #[arg(long, value_parser = parse_one_level)]
    pub noise: Option<NoiseSpec>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every received instance message to this `.msgdump` file.
    #[arg(long)]
    pub dump_messages: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyArg::Instance)]
    pub strategy: StrategyArg,
    /// Comma-separated levels, each `sigma_t/sigma_r` or one value for both.
    #[arg(long, value_parser = parse_level_list)]
    pub levels: Option<LevelList>,
    /// Directory for sweep.json, sweep.txt and sweep.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scene file; a scene is generated from `--preset` when absent.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value = "dair", value_parser = PRESET_NAMES)]
    pub preset: String,
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub agents: u32,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelList(pub Vec<NoiseSpec>);

fn parse_level_list(s: &str) -> std::result::Result<LevelList, String> {
    parse_levels(s).map(LevelList).map_err(|e| e.to_string())
}

fn parse_one_level(s: &str) -> std::result::Result<NoiseSpec, String> {
    match parse_levels(s).map_err(|e| e.to_string())?.as_slice() {
        [one] => Ok(*one),
        _ => Err("expected a single noise level".into()),
    }
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig {
            seed: self.seed,
            jobs: self.jobs as usize,
            accounting: self.accounting.into(),
            ..PipelineConfig::default()
        };
        if let Some(path) = &self.weights {
            cfg.attention = AttentionConfig::loaded(Projections::load(path)?);
        }
        cfg.attention.beta = self.beta;
        cfg.routing.lambda = self.lambda;
        cfg.filter.score_threshold = self.threshold;
        cfg.cogt = self.cogt.map(|n| CogtConfig {
            samples_per_frame: n,
            ..CogtConfig::default()
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn cmd_gen_scene(args: &GenSceneArgs) -> Result<()> {
    let (layout, default_objects) = preset(&args.preset).unwrap_or((Layout::default(), 13));
    let n = args.objects.unwrap_or(default_objects);
    let scene = Scene::generate(args.seed, args.frames, n, args.agents as usize, &layout)?;
    scene.save(&args.output)?;
    println!(
        "wrote {}: {} objects over {} frames, {} agents, seed {}",
        args.output.display(),
        scene.objects.len(),
        scene.frame_count,
        scene.agents.len(),
        scene.seed
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let scene = Scene::load(&args.scene)?;
    let mut cfg = args.pipeline.config()?;
    cfg.noise = args.noise.unwrap_or_default();
    let mut reports = Vec::new();
    for strategy in args.strategy.strategies() {
        let outcomes = run_frames(&scene, strategy, &cfg)?;
        if strategy == Strategy::Instance {
            if let Some(path) = &args.dump_messages {
                let messages: Vec<_> = outcomes.iter().flat_map(|o| o.messages.iter().cloned()).collect();
                write_msgdump(BufWriter::new(File::create(path)?), &messages)?;
            }
        }
        reports.push(summarize(strategy, cfg.noise, &outcomes)?);
    }
    let run = RunReport {
        settings: Settings::from_config(&cfg, scene.frame_count),
        reports,
    };
    let table = run.comparison_table();
    print!("{table}");
    if let Some(dir) = &args.out {
        write_outputs(dir, &[("report.json", &run.to_json()?), ("report.txt", &table)])?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let scene = Scene::load(&args.scene)?;
    let cfg = args.pipeline.config()?;
    let levels = args.levels.clone().map(|l| l.0).unwrap_or_else(NoiseSpec::default_grid);
    let mut reports: Vec<EvalReport> = Vec::new();
    for strategy in args.strategy.strategies() {
        reports.extend(crate::pipeline::sweep_noise(&scene, strategy, &cfg, &levels)?);
    }
    let run = RunReport {
        settings: Settings::from_config(&cfg, scene.frame_count),
        reports,
    };
    let table = run.sweep_table();
    let csv = sweep_csv(&run.reports);
    print!("{table}");
    if let Some(dir) = &args.out {
        write_outputs(dir, &[("sweep.json", &run.to_json()?), ("sweep.txt", &table), ("sweep.csv", &csv)])?;
    } else {
        print!("\n{csv}");
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let scene = match &args.scene {
        Some(path) => Scene::load(path)?,
        None => {
            let (layout, default_objects) = preset(&args.preset).unwrap_or((Layout::default(), 13));
            Scene::generate(
                args.pipeline.seed,
                args.frames,
                args.objects.unwrap_or(default_objects),
                args.agents as usize,
                &layout,
            )?
        }
    };
    let cfg = args.pipeline.config()?;
    let reports = [Strategy::Late, Strategy::Instance]
        .into_iter()
        .map(|s| crate::pipeline::run_pipeline(&scene, s, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let run = RunReport {
        settings: Settings::from_config(&cfg, scene.frame_count),
        reports,
    };
    let table = run.bandwidth_table();
    print!("{table}");
    if let Some(dir) = &args.out {
        write_outputs(dir, &[("bandwidth.json", &run.to_json()?), ("bandwidth.txt", &table)])?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenScene(a) => cmd_gen_scene(a),
        Command::Run(a) => cmd_run(a),
        Command::SweepNoise(a) => cmd_sweep(a),
        Command::BenchBandwidth(a) => cmd_bench(a),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
