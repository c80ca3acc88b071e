//! Command-line front end: code analysis reports, BER curves, required-Eb/N0
//! searches and beta sweeps, with CSV/JSON output and reproducible seeding.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

use stsim_core::analysis::{analyze_code, DeterminantReport, SearchConfig};
use stsim_core::codes::{
    make_code, make_code_by_name, parse_descriptor, write_descriptor, ALL_CODES,
};
use stsim_core::sim::{
    awgn_bpsk_point, beta_sweep, curves_to_csv, required_ebn0, run_all_curves, run_manifest_json,
    ExperimentSpec, RunOptions, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "stsim",
    about = "Space-time lattice codes for hybrid satellite-terrestrial MIMO: \
             algebraic analysis and link-level Monte Carlo simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in code constructions.
    ListCodes,
    /// Search minimum determinants and NVD properties of a code.
    Analyze(AnalyzeArgs),
    /// Write a code descriptor in the text interchange format.
    ExportCode(ExportArgs),
    /// Simulate BER curves over the Eb/N0 grid for every beta.
    Ber(BerArgs),
    /// Find the Eb/N0 reaching the target BER.
    RequiredEbn0(RequiredArgs),
    /// One required-Eb/N0 per (scheme, beta) cell.
    BetaSweep(SweepArgs),
    /// Uncoded BPSK over real AWGN, the closed-form debug mode.
    AwgnDebug(AwgnArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Built-in code name (repeatable). Use `list-codes` for the names.
    #[arg(long = "code", value_name = "NAME", conflicts_with = "descriptor_file")]
    codes: Vec<String>,
    /// Analyze a code loaded from a descriptor file instead.
    #[arg(long, value_name = "PATH")]
    descriptor_file: Option<PathBuf>,
    /// Coefficient box half-width.
    #[arg(long, default_value_t = 1)]
    box_bound: i64,
    /// Evaluation budget before sampling kicks in.
    #[arg(long, default_value_t = stsim_core::analysis::DEFAULT_BUDGET)]
    budget: u64,
    /// Enable stratified sampling above the budget (results become bounds).
    #[arg(long)]
    sample: bool,
    /// Seed for the sampling fallback.
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    /// Require every construction-level symbol slot to be nonzero (ab != 0).
    #[arg(long)]
    nonzero_slots: bool,
    /// Also write the reports as a JSON array.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Built-in code name.
    #[arg(long)]
    code: String,
    /// Output path (stdout if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BerArgs {
    /// Experiment config (TOML, schema of ExperimentSpec).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory for curves.csv and manifest.json.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RequiredArgs {
    /// Experiment config (TOML, schema of ExperimentSpec).
    #[arg(long, short)]
    config: PathBuf,
    /// Power imbalance in dB (defaults to the first beta_grid entry).
    #[arg(long)]
    beta_db: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (TOML, schema of SweepSpec).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory for sweep.csv and manifest.json.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct AwgnArgs {
    /// Eb/N0 in dB.
    #[arg(long, default_value_t = 9.6)]
    ebn0_db: f64,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long, default_value_t = 100_000_000)]
    max_bits: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListCodes => list_codes(),
        Command::Analyze(args) => analyze(args),
        Command::ExportCode(args) => export_code(args),
        Command::Ber(args) => ber(args),
        Command::RequiredEbn0(args) => required(args),
        Command::BetaSweep(args) => sweep(args),
        Command::AwgnDebug(args) => awgn(args),
    }
}

fn list_codes() -> Result<()> {
    println!(
        "{:<24} {:>4} {:>3} {:>4} {:>6} {:<10}",
        "name", "n_t", "T", "K", "rate", "sat_rows"
    );
    for name in ALL_CODES {
        let code = make_code(name);
        let rows: Vec<String> = code.sat_rows.iter().map(|r| r.to_string()).collect();
        println!(
            "{:<24} {:>4} {:>3} {:>4} {:>6} {:<10}",
            code.name,
            code.n_t,
            code.t,
            code.k,
            format!("{:.2}", code.rate()),
            rows.join(",")
        );
    }
    Ok(())
}

fn print_report(rep: &DeterminantReport) {
    println!("code:                 {}", rep.code_name);
    println!("box bound:            {}", rep.box_bound);
    println!(
        "search:               {} ({} evaluations{})",
        if rep.exhaustive {
            "exhaustive"
        } else {
            "sampled (upper bounds)"
        },
        rep.evaluations,
        if rep.nonzero_slots {
            ", nonzero slots only"
        } else {
            ""
        }
    );
    println!("min joint det:        {:.9e}", rep.min_joint_det);
    println!("  argmin:             {:?}", rep.argmin_joint);
    println!("normalized min det:   {:.9e}", rep.normalized_min_det);
    println!("full diversity:       {}", rep.full_diversity);
    match &rep.parallel {
        Some(p) => {
            println!("min parallel product: {:.9e}", p.min_product);
            println!("  argmin:             {:?}", p.argmin);
            println!(
                "  nonzero blocks:     {:.9e} at {:?}",
                p.min_product_nonzero_blocks, p.argmin_nonzero_blocks
            );
        }
        None => println!("min parallel product: n/a (no proper SAT/TER split)"),
    }
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let cfg = SearchConfig {
        box_bound: args.box_bound,
        budget: args.budget,
        allow_sampling: args.sample,
        sample_seed: args.sample_seed,
        nonzero_slots: args.nonzero_slots,
    };
    let codes = if let Some(path) = &args.descriptor_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        vec![parse_descriptor(&text)?]
    } else if args.codes.is_empty() {
        bail!("pass --code <name> (repeatable) or --descriptor-file <path>");
    } else {
        args.codes
            .iter()
            .map(|n| make_code_by_name(n))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut reports = Vec::new();
    for (i, code) in codes.iter().enumerate() {
        let rep = analyze_code(code, &cfg)?;
        if i > 0 {
            println!();
        }
        print_report(&rep);
        reports.push(rep);
    }
    if let Some(path) = args.json {
        std::fs::write(&path, serde_json::to_string_pretty(&reports)?)
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn export_code(args: ExportArgs) -> Result<()> {
    let code = make_code_by_name(&args.code)?;
    let text = write_descriptor(&code);
    match args.out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn ber(args: BerArgs) -> Result<()> {
    let spec: ExperimentSpec = load_toml(&args.config)?;
    spec.validate()?;
    let opts = RunOptions::from_env();
    let started = Instant::now();
    let curves = run_all_curves(&spec, &opts)?;
    let hash = spec.sha256_hex();
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("curves.csv");
    std::fs::write(&csv_path, curves_to_csv(&curves, &hash, spec.seed))?;
    let manifest = run_manifest_json(
        &spec,
        &hash,
        spec.seed,
        opts.workers,
        started.elapsed().as_secs_f64(),
    );
    std::fs::write(args.out.join("manifest.json"), manifest)?;
    let censored = curves
        .iter()
        .flat_map(|c| &c.points)
        .filter(|p| p.censored)
        .count();
    eprintln!(
        "wrote {} ({} curves, {} censored points)",
        csv_path.display(),
        curves.len(),
        censored
    );
    Ok(())
}

fn required(args: RequiredArgs) -> Result<()> {
    let spec: ExperimentSpec = load_toml(&args.config)?;
    spec.validate()?;
    let beta = args.beta_db.unwrap_or(spec.beta_grid[0]);
    let opts = RunOptions::from_env();
    match required_ebn0(&spec, beta, &opts)? {
        Ok(r) => {
            println!(
                "{} @ beta {:.2} dB: required Eb/N0 = {:.4} dB (achieved BER {:.3e}, bracket [{:.4}, {:.4}])",
                spec.link.scheme, beta, r.ebn0_db, r.achieved_ber, r.bracket_db.0, r.bracket_db.1
            );
            Ok(())
        }
        Err(f) => {
            println!(
                "{} @ beta {:.2} dB: {}",
                spec.link.scheme,
                beta,
                failure_text(&f)
            );
            bail!("target BER not bracketable on the grid");
        }
    }
}

fn failure_text(f: &stsim_core::sim::BracketFailure) -> String {
    match f {
        stsim_core::sim::BracketFailure::BelowGrid { ber_at_lowest } => format!(
            "target already met at the lowest grid point (BER {ber_at_lowest:.3e})"
        ),
        stsim_core::sim::BracketFailure::AboveGrid { ber_at_highest } => format!(
            "target unreachable on the grid (BER {ber_at_highest:.3e} at the top)"
        ),
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let spec: SweepSpec = load_toml(&args.config)?;
    spec.validate()?;
    let opts = RunOptions::from_env();
    let started = Instant::now();
    let result = beta_sweep(&spec, &opts)?;
    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, result.to_csv())?;
    let manifest = run_manifest_json(
        &spec,
        &result.spec_sha256,
        spec.seed,
        opts.workers,
        started.elapsed().as_secs_f64(),
    );
    std::fs::write(args.out.join("manifest.json"), manifest)?;
    eprintln!("wrote {} ({} cells)", csv_path.display(), result.cells.len());
    if result.has_failures() {
        for cell in result.cells.iter().filter(|c| c.result.is_err()) {
            eprintln!(
                "failure: {} @ beta {:.2} dB: {}",
                cell.scheme,
                cell.beta_db,
                failure_text(cell.result.as_ref().err().unwrap())
            );
        }
        bail!("sweep finished with failure records");
    }
    Ok(())
}

fn awgn(args: AwgnArgs) -> Result<()> {
    let p = awgn_bpsk_point(args.ebn0_db, args.min_errors, args.max_bits, args.seed);
    println!(
        "Eb/N0 {:.2} dB: BER {:.6e} ({} errors / {} bits{})",
        p.ebn0_db,
        p.ber,
        p.bit_errors,
        p.bits,
        if p.censored { ", censored" } else { "" }
    );
    Ok(())
}
