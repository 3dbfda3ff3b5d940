use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use reflectgen::eval::{
    consistency_ratio, eval_edit, eval_t2i, gen_labeled_pairs, reason_accuracy, write_report, AhaMode, EvalSuite,
    ReportBuilder,
};
use reflectgen::introspect::{run_episode, EpisodeConfig, EpisodeMode, TrajectoryDump};
use reflectgen::policy::{load_checkpoint, PolicyParams};
use reflectgen::rng;
use reflectgen::sft::{build_corpus, GeneratorMix};
use reflectgen::trainer::{
    load_config, train_edit_rl, train_edit_sft, train_rl, train_sft, EditRlConfig, EditSftConfig, RlConfig, RunSink,
    SftConfig,
};
use reflectgen::world::jsonl;
use reflectgen::Result;

#[derive(Parser)]
#[command(name = "reflectgen", version, about = "Introspective grid generation: training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting checkpoint.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Mixed-task supervised fine-tuning; also writes the corpus as corpus.jsonl.
    Sft(TrainArgs),
    /// GRPO over introspective episodes (requires --init).
    Rl(TrainArgs),
    /// Supervised editing on filtered pairs.
    EditSft(TrainArgs),
    /// GRPO on editing tasks (requires --init).
    EditRl(TrainArgs),
    /// Evaluate a checkpoint on the held-out suite.
    Eval {
        /// Suite directory with prompts.jsonl and edits.jsonl; the default seeded suite when absent.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: AhaMode,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode settings (TOML).
        #[arg(long)]
        episode: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
    },
    /// Run inference episodes and dump them as JSON lines.
    RolloutDump {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episode: Option<PathBuf>,
    },
    /// Write the default seeded evaluation suite to a directory.
    Suite {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_category: usize,
        #[arg(long, default_value_t = 300)]
        edit_tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), load_config)
}

fn init(args: &TrainArgs) -> Result<Option<PolicyParams>> {
    args.init.as_deref().map(load_checkpoint).transpose()
}

fn require_init(args: &TrainArgs) -> Result<PolicyParams> {
    init(args)?.ok_or_else(|| reflectgen::Error::Config("--init checkpoint is required".into()))
}

fn suite(path: Option<&Path>) -> Result<EvalSuite> {
    path.map_or_else(|| Ok(EvalSuite::default_suite()), EvalSuite::load)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sft(a) => {
            let mut cfg: SftConfig = config_or_default(a.config.as_deref())?;
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let mut sink = RunSink::create(&a.out_dir)?;
            let corpus = build_corpus(&cfg.generator, cfg.corpus_prompts, cfg.images_per_prompt, cfg.seed)?;
            jsonl::write(&a.out_dir.join("corpus.jsonl"), &corpus)?;
            let out = train_sft(&cfg, init(&a)?, Some(&mut sink))?;
            log::info!("sft done: held-out loss {:?}", out.heldout_loss.last());
        }
        Command::Rl(a) => {
            let mut cfg: RlConfig = config_or_default(a.config.as_deref())?;
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let mut sink = RunSink::create(&a.out_dir)?;
            let out = train_rl(&cfg, &require_init(&a)?, Some(&mut sink))?;
            log::info!("rl done: {} interventions", out.events.len());
        }
        Command::EditSft(a) => {
            let mut cfg: EditSftConfig = config_or_default(a.config.as_deref())?;
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let mut sink = RunSink::create(&a.out_dir)?;
            train_edit_sft(&cfg, init(&a)?, Some(&mut sink))?;
        }
        Command::EditRl(a) => {
            let mut cfg: EditRlConfig = config_or_default(a.config.as_deref())?;
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            let mut sink = RunSink::create(&a.out_dir)?;
            train_edit_rl(&cfg, &require_init(&a)?, Some(&mut sink))?;
        }
        Command::Eval { suite: suite_dir, mode, checkpoint, out_dir, seed, episode, pairs } => {
            let params = load_checkpoint(&checkpoint)?;
            let suite = suite(suite_dir.as_deref())?;
            let ep: EpisodeConfig = config_or_default(episode.as_deref())?;
            let labeled = gen_labeled_pairs(pairs, &GeneratorMix::default(), seed);
            let mismatched: Vec<_> = labeled.iter().filter(|p| p.qa < 1.0).cloned().collect();
            let mut b = ReportBuilder::new(seed);
            b.t2i = Some(eval_t2i(&params, &suite, mode, &ep, seed));
            b.editing = Some(eval_edit(&params, &suite, reflectgen::introspect::EditRolloutConfig::default().cfg_scale)?);
            b.consistency_ratio = Some(consistency_ratio(&params, &labeled, ep.text_cfg));
            b.reason_accuracy = Some(reason_accuracy(&params, &mismatched, ep.text_cfg)?);
            let report = write_report(&out_dir, &b)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::RolloutDump { checkpoint, suite: suite_dir, out, seed, episode } => {
            let params = load_checkpoint(&checkpoint)?;
            let suite = suite(suite_dir.as_deref())?;
            let ep: EpisodeConfig = config_or_default(episode.as_deref())?;
            let dumps: Vec<TrajectoryDump> = suite
                .prompts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let s = rng::derive(seed, &[rng::stream::EVAL_EPISODES, i as u64]);
                    TrajectoryDump::from(&run_episode(&params, p, &ep, s, EpisodeMode::Rollout))
                })
                .collect();
            jsonl::write(&out, &dumps)?;
        }
        Command::Suite { out_dir, per_category, edit_tasks, seed } => {
            EvalSuite::generate(per_category, edit_tasks, seed).save(&out_dir)?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
