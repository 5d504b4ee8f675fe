use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gsa_core::config::RunConfig;
use gsa_core::dynamics::write_state_dump;
use gsa_core::scenarios::{Overrides, RunOptions, Scenario, ScenarioReport, SCENARIO_IDS};
use gsa_core::Execution;

/// Exit status when a run finished but some criteria failed under `--check`.
const EXIT_CRITERIA: u8 = 3;

#[derive(Parser)]
#[command(name = "gsa", version, about = "Giant-superatom waveguide QED simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios by id (`all` for every one) or from a config file.
    Run {
        ids: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run every point of a config file's sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// List the canned scenarios.
    ListScenarios,
    /// Print the default configuration of a scenario as TOML.
    Defaults { id: String },
    /// Parse and check a config file without running it.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file.
    #[arg(short, long, env = "GSA_OUTPUT_DIR")]
    output: Option<PathBuf>,
    /// Exit with status 3 when any criterion fails.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(short, long)]
    quiet: bool,
    /// Worker threads; 1 forces sequential execution.
    #[arg(short, long)]
    jobs: Option<usize>,
}

impl Common {
    fn options(&self, cfg: &RunConfig) -> RunOptions {
        RunOptions {
            overrides: Overrides {
                dt: self.dt.or(cfg.integration.dt),
                horizon: self.horizon.or(cfg.integration.horizon),
            },
            execution: if self.jobs == Some(1) {
                Execution::Sequential
            } else {
                Execution::Auto
            },
        }
    }

    fn output_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.output
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn init_threads(jobs: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    Ok(())
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_report(dir: &Path, report: &ScenarioReport) -> Result<()> {
    for s in &report.series {
        write_atomic(&dir.join("series").join(format!("{}.csv", s.name)), s.to_csv().as_bytes())?;
    }
    write_atomic(&dir.join("report.json"), report.to_json().as_bytes())
}

fn summarize(common: &Common, report: &ScenarioReport, secs: f64) {
    common.log(format!("{} ({}) in {secs:.1}s", report.scenario, report.title));
    for c in &report.criteria {
        common.log(format!("  {c}"));
    }
    if secs > report.input.budget_secs() {
        common.log(format!(
            "  warning: exceeded the {:.0}s budget",
            report.input.budget_secs()
        ));
    }
}

/// Run one config, write its outputs, and report whether every criterion passed.
fn execute(common: &Common, cfg: &RunConfig, dir: &Path) -> Result<bool> {
    let opts = common.options(cfg);
    let start = Instant::now();
    let (report, state) = cfg.scenario.run_keeping_state(&opts)?;
    if let (true, Some((basis, state))) = (cfg.output.state_dump, state) {
        let mut buf = Vec::new();
        write_state_dump(&mut buf, &basis, &state)?;
        write_atomic(&dir.join("state.bin"), &buf)?;
    }
    write_report(dir, &report)?;
    summarize(common, &report, start.elapsed().as_secs_f64());
    Ok(report.passed())
}

fn run(ids: &[String], common: &Common) -> Result<bool> {
    if let Some(path) = &common.config {
        if !ids.is_empty() {
            bail!("pass either scenario ids or --config, not both");
        }
        let cfg = load(path)?;
        if cfg.sweep.is_some() {
            bail!("{} defines a sweep; use `gsa sweep`", path.display());
        }
        return execute(common, &cfg, &common.output_dir(Some(&cfg)));
    }
    if ids.is_empty() {
        bail!("nothing to run: give scenario ids, `all`, or --config");
    }
    let ids: Vec<&str> = if ids.iter().any(|i| i == "all") {
        SCENARIO_IDS.to_vec()
    } else {
        ids.iter().map(String::as_str).collect()
    };
    let root = common.output_dir(None);
    let mut ok = true;
    for id in ids {
        let cfg = RunConfig::new(Scenario::defaults(id)?);
        ok &= execute(common, &cfg, &root.join(id))?;
    }
    Ok(ok)
}

fn sweep(common: &Common) -> Result<bool> {
    let Some(path) = &common.config else {
        bail!("sweep needs --config");
    };
    let cfg = load(path)?;
    if cfg.sweep.is_none() {
        bail!("{} has no [sweep] section", path.display());
    }
    let root = common.output_dir(Some(&cfg));
    let points = cfg.expand()?;
    common.log(format!("{} sweep points", points.len()));
    let mut index = String::from("point,passed");
    for (p, _) in &points[0].assignments {
        index.push(',');
        index.push_str(p);
    }
    index.push('\n');
    let mut ok = true;
    for point in &points {
        let name = format!("point-{:04}", point.index);
        let passed = execute(common, &point.config, &root.join(&name))?;
        ok &= passed;
        index.push_str(&format!("{name},{passed}"));
        for (_, v) in &point.assignments {
            index.push_str(&format!(",{v}"));
        }
        index.push('\n');
    }
    write_atomic(&root.join("index.csv"), index.as_bytes())?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListScenarios => {
            for id in SCENARIO_IDS {
                let s = Scenario::defaults(id).expect("known id");
                println!("{id}  {}", s.title());
            }
            Ok(true)
        }
        Command::Defaults { id } => Scenario::defaults(id)
            .map(|s| print!("{}", RunConfig::new(s).to_toml()))
            .map(|_| true)
            .map_err(Into::into),
        Command::Validate { config } => load(config).map(|c| {
            println!("{}: ok ({})", config.display(), c.scenario.id());
            true
        }),
        Command::Run { ids, common } => init_threads(common.jobs).and_then(|_| run(ids, common)),
        Command::Sweep { common } => init_threads(common.jobs).and_then(|_| sweep(common)),
    };
    let check = match &cli.command {
        Command::Run { common, .. } | Command::Sweep { common } => common.check,
        _ => false,
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if check => {
            eprintln!("some criteria failed");
            ExitCode::from(EXIT_CRITERIA)
        }
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
