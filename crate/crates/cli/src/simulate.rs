use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use newer_core::{io, simulate::size_histogram, SimConfig};

use crate::config::RunConfig;
use crate::usage;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Default,
    HubDominated,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    cascades: Option<usize>,
    #[arg(long)]
    history_cascades: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let mut sim = match (&cfg.simulate, args.preset) {
        (Some(_), Some(_)) => return Err(usage("--preset cannot be combined with a [simulate] config table")),
        (Some(c), None) => c.clone(),
        (None, Some(Preset::HubDominated)) => SimConfig::hub_dominated(),
        (None, _) => SimConfig::default(),
    };
    if let Some(n) = args.nodes {
        sim.nodes = n;
        // keep the degree law feasible on small networks
        sim.min_degree = sim.min_degree.min(n.saturating_sub(1));
    }
    if let Some(n) = args.cascades {
        sim.cascades = n;
    }
    if let Some(n) = args.history_cascades {
        sim.history_cascades = n;
    }
    if let Some(s) = args.seed.or(cfg.seed) {
        sim.seed = s;
    }
    sim.validate()?;

    let result = newer_core::simulate(&sim)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let out = |name: &str| args.out.join(name);
    io::write_network(out("network.csv"), &result.network)?;
    io::write_cascades(out("history.jsonl"), &result.history)?;
    io::write_cascades(out("cascades.jsonl"), &result.cascades.cascades)?;
    io::write_truth(out("truth.json"), &result.truth)?;
    if let Some(f) = &result.features {
        io::write_features(out("features.csv"), f)?;
    }
    let mut hist = String::from("size,count\n");
    for (size, count) in size_histogram(&result.cascades.cascades) {
        writeln!(hist, "{size},{count}")?;
    }
    let path = out("size_histogram.csv");
    std::fs::write(&path, hist).with_context(|| format!("writing {}", path.display()))?;
    io::write_json(out("sim_config.json"), &sim)?;
    Ok(())
}
