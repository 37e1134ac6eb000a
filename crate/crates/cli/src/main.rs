//! `kgflow`: runs the verification suites and writes CSV tables, plot data
//! and a plotting script. Exit status is 0 iff every evaluated acceptance
//! check passed, 1 if one failed, 2 on a usage or runtime error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgflow::experiments::{RunConfig, Series, Suite, SuiteOutput, Table};

#[derive(Parser)]
#[command(
    name = "kgflow",
    version,
    about = "Spectral and time-domain checks for Klein-Gordon waves on a two-branch star graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized samples (overrides `seed` in the config).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for independent cells; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Plancherel isometry and round trip (criteria 1, 2).
    TransformCheck,
    /// Decay exponent along rays in the inner cone (criterion 3).
    Decay,
    /// Remainder order, coefficient bounds, cone identities (criteria 4, 5, 10).
    Coefficient,
    /// Branch and cone energy sweeps (criteria 6, 7, 8).
    Energy,
    /// Finite-difference cross-validation (criterion 9).
    Oracle,
    /// Every suite.
    All,
}

impl Command {
    fn suites(self) -> Vec<Suite> {
        match self {
            Command::TransformCheck => vec![Suite::Transform],
            Command::Decay => vec![Suite::Decay],
            Command::Coefficient => vec![Suite::Coefficient],
            Command::Energy => vec![Suite::Energy],
            Command::Oracle => vec![Suite::Oracle],
            Command::All => Suite::ALL.to_vec(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kgflow: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(out_dir.join("plots")).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join("config.json"), cfg.to_json() + "\n")?;

    let mut all = SuiteOutput::default();
    for suite in cli.command.suites() {
        let out = suite.run(&cfg).with_context(|| format!("{suite:?} suite"))?;
        for check in &out.checks {
            println!("{}", check.line());
        }
        all.merge(out);
    }
    write_outputs(&out_dir, &all)?;
    Ok(all.all_passed())
}

fn write_outputs(dir: &Path, out: &SuiteOutput) -> Result<()> {
    let checks = Table::checks(&out.checks);
    for table in std::iter::once(&checks).chain(&out.tables) {
        let path = dir.join(format!("{}.csv", table.name));
        table
            .write_csv(BufWriter::new(File::create(&path)?))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for series in &out.series {
        series.write_dat(BufWriter::new(File::create(
            dir.join("plots").join(format!("{}.dat", series.name)),
        )?))?;
    }
    fs::write(dir.join("plots").join("plot.py"), plot_script(&out.series))?;
    Ok(())
}

/// A matplotlib script drawing one figure per series next to its data file.
fn plot_script(series: &[Series]) -> String {
    let mut s = String::from(
        "#!/usr/bin/env python3\n\"\"\"Draws every two-column series in this directory to <name>.png.\"\"\"\n\
         import os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\nimport numpy as np\n\n\
         HERE = os.path.dirname(os.path.abspath(__file__))\n\n# (name, x label, y label, log-log)\nSERIES = [\n",
    );
    for x in series {
        let py_bool = if x.log_log { "True" } else { "False" };
        s.push_str(&format!("    ({:?}, {:?}, {:?}, {py_bool}),\n", x.name, x.x_label, x.y_label));
    }
    s.push_str(
        "]\n\nfor name, xlabel, ylabel, loglog in SERIES:\n    \
         data = np.loadtxt(os.path.join(HERE, name + \".dat\"), ndmin=2)\n    \
         fig, ax = plt.subplots(figsize=(6, 4))\n    \
         ax.plot(data[:, 0], data[:, 1], \"o-\" if len(data) < 50 else \"-\", markersize=3)\n    \
         if loglog:\n        ax.set_xscale(\"log\")\n        ax.set_yscale(\"log\")\n    \
         ax.set_xlabel(xlabel)\n    ax.set_ylabel(ylabel)\n    ax.set_title(name)\n    \
         fig.tight_layout()\n    fig.savefig(os.path.join(HERE, name + \".png\"), dpi=120)\n    plt.close(fig)\n",
    );
    s
}
