use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cz_cli::report::{self, RECORDS_FILE};
use cz_cli::run::{self, Record};
use cz_cli::scenario::{self, load_scenario, Mode, RunConfig, Scenario, SearchConfig, Tolerances, FAMILIES};
use cz_cli::{resolve_scenario, DEFAULT_FIXTURE_DIR};

#[derive(Parser)]
#[command(name = "cz", version, about = "Check nonlinear Calderon-Zygmund estimates on chart models of maps")]
struct Cli {
    /// Directory searched for scenario names.
    #[arg(long, env = "CZ_FIXTURE_DIR", default_value = DEFAULT_FIXTURE_DIR, global = true)]
    fixture_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Exponents, e.g. `--p 1.5,2,4`.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Source grid nodes per axis, one run per level, e.g. `--resolution 32,64`.
    #[arg(long, value_delimiter = ',')]
    resolution: Vec<usize>,
    /// Largest radius tried by the harmonic radius estimator.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a scenario.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Run a scenario and write reports.
    Run {
        #[arg(long)]
        scenario: String,
        /// Modes to run instead of the scenario's own.
        #[arg(long, value_enum, value_delimiter = ',')]
        mode: Vec<Mode>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Extremal-ratio search over a built-in map family.
    Search {
        /// One of affine, sine, graph.
        #[arg(long)]
        family: String,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        max_contractions: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Estimate the harmonic radii of a scenario's manifolds.
    Radius {
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize a reports file written by `run` or `search`.
    Report {
        /// A reports.jsonl file or the directory holding it.
        #[arg(long)]
        input: PathBuf,
    },
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> Result<()> {
    if !o.p.is_empty() {
        scenario::check_exponents(&o.p).map_err(anyhow::Error::msg)?;
        cfg.p = o.p.clone();
    }
    if !o.resolution.is_empty() {
        if let Some(bad) = o.resolution.iter().find(|n| **n < 3) {
            bail!("resolution levels must be at least 3, got {bad}");
        }
        cfg.ladder = o.resolution.clone();
    }
    if let Some(r) = o.r_max {
        if !(r > 0.0) {
            bail!("--r-max must be positive");
        }
        cfg.r_max = Some(r);
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    Ok(())
}

fn load(arg: &str, fixture_dir: &std::path::Path) -> Result<Scenario> {
    let path = resolve_scenario(arg, fixture_dir)?;
    Ok(load_scenario(&path)?)
}

fn finish(records: &[Record], cfg: &RunConfig) -> Result<ExitCode> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("cz-out"));
    report::write_reports(&dir, records)?;
    print!("{}", report::summary(records));
    println!("reports written to {}", dir.display());
    Ok(if report::all_ok(records) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn validate(s: &Scenario) -> Result<()> {
    println!(
        "{}: valid ({}-dimensional '{}' -> {}-dimensional '{}', map '{}')",
        s.path.display(),
        s.source.dimension,
        s.source.name,
        s.target.dimension,
        s.target.name,
        s.map.name
    );
    let modes: Vec<&str> = s.run.modes.iter().map(|m| m.name()).collect();
    println!("modes {}, p {:?}, ladder {:?}, seed {}", modes.join(","), s.run.p, s.run.ladder, s.run.seed);
    for model in [&s.source, &s.target] {
        let warnings = model.ricci_warnings()?;
        if let Some(w) = warnings.first() {
            println!(
                "warning: Ricci curvature of '{}' drops below -{} at {} node(s), e.g. {:.3e} at {:?}",
                model.name,
                model.ricci_lower_bound,
                warnings.len(),
                w.min_eigenvalue,
                w.point
            );
        }
    }
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scenario } => {
            let path = resolve_scenario(&scenario, &cli.fixture_dir)?;
            match load_scenario(&path) {
                Ok(s) => {
                    validate(&s)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Run { scenario, mode, overrides } => {
            let mut s = load(&scenario, &cli.fixture_dir)?;
            apply(&mut s.run, &overrides)?;
            if !mode.is_empty() {
                if mode.contains(&Mode::Search) && s.search.is_none() {
                    bail!("search mode needs a [search] section in the scenario");
                }
                s.run.modes = mode;
            }
            let records = run::run_scenario(&s);
            finish(&records, &s.run)
        }
        Command::Search { family, restarts, max_contractions, overrides } => {
            if !FAMILIES.contains(&family.as_str()) {
                bail!("unknown family '{family}' (one of {})", FAMILIES.join(", "));
            }
            let mut cfg = RunConfig {
                modes: vec![Mode::Search],
                p: vec![2.0],
                ladder: vec![41],
                seed: 7,
                r_max: None,
                out: None,
                tolerances: Tolerances::default(),
            };
            apply(&mut cfg, &overrides)?;
            let search = SearchConfig { family, restarts, max_contractions };
            let records = run::run_family_search(&search, &cfg);
            finish(&records, &cfg)
        }
        Command::Radius { scenario, overrides } => {
            let mut s = load(&scenario, &cli.fixture_dir)?;
            apply(&mut s.run, &overrides)?;
            let rows = run::radius_records(&s);
            let mut text = String::new();
            for r in &rows {
                text.push_str(&serde_json::to_string(r)?);
                text.push('\n');
            }
            print!("{text}");
            if let Some(dir) = &s.run.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("radius.jsonl"), &text).context("writing radius.jsonl")?;
            }
            let ok = rows.iter().all(|r| r["status"] == "ok");
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { input } => {
            let path = if input.is_dir() { input.join(RECORDS_FILE) } else { input };
            let records = report::read_records(&path)?;
            print!("{}", report::summary(&records));
            Ok(if report::all_ok(&records) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
