use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superou::config::{ExperimentConfig, SUITES};
use superou::output::{self, RunManifest};
use superou::simulator::{run_ensemble, Ensemble};
use superou::stats::TestReport;
use superou::suites::{self, SpectralCheckOptions};
use superou::Error;

#[derive(Parser, Debug)]
#[command(
    name = "superou",
    version,
    about = "Super-OU simulation and verification"
)]
struct Cli {
    /// TOML experiment configuration; the canonical desk-scale model if omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Number of worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orthonormality, eigen-action and quadrature checks of the OU basis.
    SpectralCheck {
        #[arg(long, hide = true)]
        corrupt_basis: bool,
    },
    /// m_t[f], m[f] and the characteristic function table for `limits.f`.
    Limits,
    /// Runs the ensemble and writes checkpoints, a summary and a manifest.
    Simulate,
    /// Runs one verification suite, or every suite listed in the config.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Option<String>,
    },
    /// Collects every report in the output directory.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain { .. }
        | Error::Precondition { .. }
        | Error::Construction { .. }
        | Error::Config(_)
        | Error::Json(_) => 2,
        Error::Numeric { .. } | Error::Divergence { .. } => 3,
        Error::Resource { .. } | Error::Io(_) => 4,
    }
}

struct Context {
    config: ExperimentConfig,
    config_text: String,
    out: PathBuf,
}

fn load(cli: &Cli) -> superou::Result<Context> {
    let (mut config, text) = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            let cfg = ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                other => other,
            })?;
            (cfg, text)
        }
        None => {
            let cfg = ExperimentConfig::canonical();
            let text = cfg.to_toml_string();
            (cfg, text)
        }
    };
    let mut text = text;
    if let Some(s) = cli.seed {
        config.simulation.seed = s;
        text.push_str(&format!("\n# --seed {s}\n"));
    }
    Ok(Context {
        config,
        config_text: text,
        out: cli.out.clone(),
    })
}

fn ensure_out(dir: &Path) -> superou::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn print_reports(reports: &[TestReport]) -> bool {
    for r in reports {
        println!("{}", r.line());
    }
    reports.iter().all(|r| r.passed)
}

fn spectral_check(ctx: &Context, corrupt_basis: bool) -> superou::Result<bool> {
    let reports = suites::spectral_check(&ctx.config, SpectralCheckOptions { corrupt_basis })?;
    ensure_out(&ctx.out)?;
    output::write_reports(&ctx.out.join("spectral_check.json"), &reports)?;
    Ok(print_reports(&reports))
}

/// `max_n |Σ_k ⟨Z_1 T_k f̃, φ⟩ − m_{n+1}[f]|` must stay below this.
const IDENTITY_TOLERANCE: f64 = 1e-6;

fn limits(ctx: &Context) -> superou::Result<bool> {
    let table = suites::limits_table(&ctx.config)?;
    ensure_out(&ctx.out)?;
    let mt_rows: Vec<Vec<f64>> = table
        .m_t
        .iter()
        .map(|(t, v)| vec![*t, v.re, v.im])
        .chain(std::iter::once(vec![
            f64::INFINITY,
            table.m.value.re,
            table.m.value.im,
        ]))
        .collect();
    output::write_table_csv(
        &ctx.out.join("limits_mt.csv"),
        &["t", "re_m", "im_m"],
        &mt_rows,
    )?;
    let (thetas, cf): (Vec<f64>, Vec<_>) = table.cf.iter().cloned().unzip();
    output::write_cf_csv(&ctx.out.join("limits_cf.csv"), &thetas, &cf)?;
    println!("f = {}", superou::stats::describe(&table.f));
    println!(
        "m[f] = {:.12} {:+.12}i (index {})",
        table.m.value.re, table.m.value.im, table.m.index
    );
    let mut ok = true;
    if !table.identity.is_empty() {
        let rows: Vec<Vec<f64>> = table
            .identity
            .iter()
            .map(|(n, l, r)| vec![*n as f64, l.re, l.im, r.re, r.im, (l - r).norm()])
            .collect();
        output::write_table_csv(
            &ctx.out.join("limits_identity.csv"),
            &["n", "re_sum", "im_sum", "re_m", "im_m", "abs_err"],
            &rows,
        )?;
        let err = table.identity_error();
        let report = TestReport::new(
            "limits[Z1 identity on small+critical part]",
            err,
            IDENTITY_TOLERANCE,
            table.identity.len(),
            0.0,
            0.0,
            serde_json::Value::Null,
        );
        ok = print_reports(std::slice::from_ref(&report));
        output::write_reports(&ctx.out.join("limits_identity.json"), &[report])?;
    }
    Ok(ok)
}

fn simulate(ctx: &Context) -> superou::Result<Ensemble> {
    let cfg = &ctx.config;
    let load = suites::feasibility(cfg)?;
    eprintln!(
        "simulating {} replicates: {:.3e} particles and {:.3e} events expected per replicate",
        cfg.simulation.replicates, load.expected_particles, load.expected_events
    );
    let ens_cfg = cfg.ensemble_config()?;
    let ens = run_ensemble(&ens_cfg)?;
    ensure_out(&ctx.out)?;
    let hash = output::params_hash(&ens_cfg)?;
    output::write_checkpoints_jsonl(&ctx.out.join("checkpoints.jsonl"), &ens.records, &hash)?;
    output::write_summary_csv(&ctx.out.join("summary.csv"), &ens, &ens_cfg)?;
    let mut manifest = RunManifest::new(&ctx.config_text, &ens_cfg, &ens)?;
    manifest.index_file(&ctx.out, "checkpoints.jsonl")?;
    manifest.index_file(&ctx.out, "summary.csv")?;
    output::write_json(&ctx.out.join("manifest.json"), &manifest)?;
    println!(
        "survival fraction {:.4} (superprocess {:.4}, particle system {:.4}); {} aborted",
        ens.survival_fraction,
        ens.superprocess_survival,
        ens.particle_survival,
        ens.aborted.len()
    );
    if !ens.aborted.is_empty() {
        println!("aborted replicates: {:?}", ens.aborted);
    }
    Ok(ens)
}

/// Reuses `checkpoints.jsonl` when it matches the configuration, otherwise
/// simulates.
fn ensemble_for(ctx: &Context) -> superou::Result<Ensemble> {
    let path = ctx.out.join("checkpoints.jsonl");
    if path.exists() {
        match output::read_checkpoints_jsonl(&path, &ctx.config.ensemble_config()?) {
            Ok(e) => return Ok(e),
            Err(Error::Precondition { msg, .. }) => {
                eprintln!("{msg}; simulating again");
            }
            Err(e) => return Err(e),
        }
    }
    simulate(ctx)
}

fn verify(ctx: &Context, suite: Option<&str>) -> superou::Result<bool> {
    let names: Vec<String> = match suite {
        Some(s) => vec![s.to_string()],
        None if !ctx.config.suites.is_empty() => ctx.config.suites.clone(),
        None => {
            return Err(Error::Config(
                "no suite given and the configuration lists none in `suites`".into(),
            ))
        }
    };
    let ens = ensemble_for(ctx)?;
    let mut ok = true;
    for name in names {
        let reports = suites::run_suite(&name, &ctx.config, &ens)?;
        output::write_reports(&ctx.out.join(format!("verify_{name}.json")), &reports)?;
        ok &= print_reports(&reports);
    }
    Ok(ok)
}

fn report(ctx: &Context) -> superou::Result<bool> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&ctx.out)
        .map_err(|e| {
            Error::precondition(
                "cli",
                "report",
                format!("output directory {}: {e}", ctx.out.display()),
            )
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json")
                && (name.starts_with("verify_")
                    || name == "spectral_check.json"
                    || name == "limits_identity.json")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::precondition(
            "cli",
            "report",
            format!(
                "no reports in {}; run `spectral-check`, `limits` or `verify` first",
                ctx.out.display()
            ),
        ));
    }
    let mut all = Vec::new();
    for f in &files {
        all.extend(output::read_reports(f)?);
    }
    output::write_report_csv(&ctx.out.join("report.csv"), &all)?;
    let ok = print_reports(&all);
    let failed = all.iter().filter(|r| !r.passed).count();
    println!("{} reports, {} failed", all.len(), failed);
    Ok(ok)
}

fn run(cli: &Cli) -> superou::Result<bool> {
    let ctx = load(cli)?;
    match &cli.command {
        Command::SpectralCheck { corrupt_basis } => spectral_check(&ctx, *corrupt_basis),
        Command::Limits => limits(&ctx),
        Command::Simulate => simulate(&ctx).map(|_| true),
        Command::Verify { suite } => verify(&ctx, suite.as_deref()),
        Command::Report => report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(k) = cli.parallelism {
        if k == 0 {
            eprintln!("error: --parallelism must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: cannot configure worker pool: {e}");
            return ExitCode::from(4);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
