//! rifsim: simulate branching random IFS cascades and estimate their
//! multifractal spectra.
//!
//! Exit codes: 0 ok, 1 tolerance/test failure, 2 config error,
//! 3 insufficient data, 4 inconclusive.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rifsim::benchmarks::{kappa_closed_form_reference, kappa_exact, kappa_monte_carlo};
use rifsim::config::default_config;
use rifsim::io::{
    benchmark_csv, heatmap_csv, leaf_table_csv, manifest, parse_leaf_table,
    scale_matrix_from_records, spectrum_json, BenchmarkRow,
};
use rifsim::measure::{leaf_masses, mass_heatmap_bins, scale_matrix};
use rifsim::spectrum::{
    estimate_spectrum, retained_depths, tau_fit, MassSource, MeshMode, QGrid, DEFAULT_SKIP_DEPTHS,
};
use rifsim::svg::{curve_svg, heatmap_svg};
use rifsim::tangent::tangent_equivalence_test;
use rifsim::tree::grow;
use rifsim::{Config64, ContractionLaw64, Error, OneStepEnvironment64, QGrid64};

#[derive(Parser)]
#[command(
    name = "rifsim",
    version,
    about = "branching random IFS multifractal toolkit"
)]
struct Cli {
    /// Worker threads for tree growth (default: all cores). Results are
    /// independent of this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a realization and write its leaf table plus a manifest.
    Simulate(SimulateArgs),
    /// Estimate tau(q), alpha, f(alpha) from a leaf-table CSV.
    Spectrum(SpectrumArgs),
    /// Compare simulated kappa(q) against the analytic benchmarks.
    Benchmark(BenchmarkArgs),
    /// Tangent-measure equivalence test (blow-ups vs the cascade law).
    Tangent(TangentArgs),
    /// One-command reproduction of the depth-20 heatmap + spectrum figure.
    Figure1(Figure1Args),
    /// Print the default config in the key-value file format.
    Defaults,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file (flat `key = value` format; see `rifsim defaults`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for realization.csv and manifest.txt.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshArg {
    Max,
    Geomean,
    Median,
}

impl From<MeshArg> for MeshMode {
    fn from(m: MeshArg) -> Self {
        match m {
            MeshArg::Max => MeshMode::Max,
            MeshArg::Geomean => MeshMode::GeoMean,
            MeshArg::Median => MeshMode::Median,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Mass,
    Diameter,
}

impl From<SourceArg> for MassSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Mass => MassSource::Mass,
            SourceArg::Diameter => MassSource::Diameter,
        }
    }
}

#[derive(Args)]
struct SpectrumArgs {
    /// Leaf-table CSV produced by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = -2.0)]
    q_min: f64,
    #[arg(long, default_value_t = 4.0)]
    q_max: f64,
    #[arg(long, default_value_t = 0.1)]
    q_step: f64,
    #[arg(long, value_enum, default_value_t = MeshArg::Geomean)]
    mesh: MeshArg,
    #[arg(long, value_enum, default_value_t = SourceArg::Mass)]
    source: SourceArg,
    /// Leading transient depths excluded from the fits.
    #[arg(long, default_value_t = DEFAULT_SKIP_DEPTHS)]
    skip_depths: usize,
    /// Output JSON path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an f(alpha) curve SVG here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 14)]
    depth: usize,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = -1.0)]
    q_min: f64,
    #[arg(long, default_value_t = 3.0)]
    q_max: f64,
    #[arg(long, default_value_t = 0.5)]
    q_step: f64,
    /// Mean |simulated kappa - closed form| allowed before exit 1.
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    /// Output CSV path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TangentArgs {
    /// Config file; defaults to the two-point reference cascade.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Blow-up base depth.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Sub-depth below the base leaf.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Trees per side.
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    calibration_reps: usize,
    /// Power check: compare against a Constant(r) baseline instead of the
    /// matching law.
    #[arg(long)]
    baseline_constant_r: Option<f64>,
    /// Output JSON path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Figure1Args {
    /// Config file; defaults to the uniform-law depth-20 run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig { .. } | Error::Parse(_) => 2,
        Error::InsufficientData(_)
        | Error::ExtinctDepth { .. }
        | Error::EmptyRow
        | Error::NonEnumerable => 3,
        Error::Inconclusive(_) => 4,
        _ => 1,
    }
}

fn load_config(path: &Path) -> Result<Config64, Error> {
    let text = fs::read_to_string(path)?;
    Config64::from_key_values(&text)
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<(), Error> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(p, contents)?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Error> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    for warning in config.validate(false)? {
        eprintln!("warning: {warning}");
    }
    let real = grow(config.clone())?;
    let masses = leaf_masses(&real, &config.weighting)?;
    let csv = leaf_table_csv(&real, Some(&masses));
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("realization.csv");
    fs::write(&csv_path, &csv)?;
    let m = manifest(&config, &[("realization.csv", csv.as_bytes())]);
    fs::write(args.out.join("manifest.txt"), m)?;
    if real.extinct {
        eprintln!(
            "note: realization went extinct at depth {}",
            real.leaves_by_depth.len() - 1
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(0)
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<u8, Error> {
    let text = fs::read_to_string(&args.input)?;
    let records = parse_leaf_table::<f64>(&text)?;
    let matrix = scale_matrix_from_records(&records)?;
    let grid = QGrid64::new(args.q_min, args.q_max, args.q_step)?;
    let estimate = estimate_spectrum(
        &matrix,
        &grid,
        args.mesh.into(),
        args.source.into(),
        args.skip_depths,
    )?;
    if estimate.low_depth_warning {
        eprintln!("warning: fewer than 6 usable depths; slope error bars are wide");
    }
    if estimate.hull_applied {
        eprintln!("note: tau was not strictly convex; concave hull applied before Legendre");
    }
    let json = spectrum_json(&estimate)?;
    write_or_print(args.out.as_deref(), &json)?;
    if let Some(svg_path) = &args.svg {
        write_or_print(
            Some(svg_path),
            &curve_svg(&estimate.alpha, &estimate.f, "alpha", "f"),
        )?;
    }
    Ok(0)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<u8, Error> {
    let grid = QGrid64::new(args.q_min, args.q_max, args.q_step.min(0.25))?;
    // the benchmark grid may be coarser than the Legendre limit allows
    let qs: Vec<f64> = if args.q_step > 0.25 {
        let steps = ((args.q_max - args.q_min) / args.q_step).round() as usize;
        (0..=steps)
            .map(|i| args.q_min + i as f64 * args.q_step)
            .collect()
    } else {
        grid.values()
    };

    let env = OneStepEnvironment64::new(
        rifsim::OffspringLaw::constant(2),
        ContractionLaw64::TwoPoint {
            r1: 1.0 / 3.0,
            r2: 2.0 / 3.0,
            p: 0.5,
        },
        1.0,
    )?;

    // simulated kappa-hat averaged over seeds
    let mut kappa_sim = vec![0.0f64; qs.len()];
    let sim_grid = QGrid {
        q_min: args.q_min,
        q_max: args.q_max,
        q_step: args.q_step,
    };
    // shrink the transient window on shallow runs instead of failing
    let skip = DEFAULT_SKIP_DEPTHS.min((args.depth + 1).saturating_sub(3));
    for s in 0..args.seeds {
        let cfg = Config64::worked_example(args.depth, args.seed + s as u64);
        let real = grow(cfg.clone())?;
        let matrix = scale_matrix(&real, &cfg.weighting)?;
        let est = tau_fit(
            &matrix,
            &sim_grid,
            MeshMode::GeoMean,
            MassSource::Mass,
            skip,
        )?;
        debug_assert_eq!(est.q, qs);
        for (acc, k) in kappa_sim.iter_mut().zip(&est.kappa_hat) {
            *acc += k / args.seeds as f64;
        }
    }

    let mut rows = Vec::with_capacity(qs.len());
    let mut worst: f64 = 0.0;
    let mut total_err = 0.0;
    for (i, &q) in qs.iter().enumerate() {
        let closed = kappa_closed_form_reference(q);
        let exact = kappa_exact(&env, q)?;
        let (mc, se) = kappa_monte_carlo(&env, q, args.mc_samples, args.seed ^ 0xbe9c)?;
        let err = (kappa_sim[i] - closed).abs();
        worst = worst.max(err);
        total_err += err / qs.len() as f64;
        rows.push(BenchmarkRow {
            q,
            kappa_closed_form: Some(closed),
            kappa_exact: Some(exact),
            kappa_monte_carlo: mc,
            kappa_monte_carlo_se: se,
            kappa_simulated: Some(kappa_sim[i]),
        });
    }
    write_or_print(args.out.as_deref(), &benchmark_csv(&rows))?;
    eprintln!(
        "kappa benchmark: mean |sim - closed| = {total_err:.6}, worst = {worst:.6}, tolerance = {}",
        args.tolerance
    );
    if worst > args.tolerance {
        eprintln!("tolerance exceeded");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_tangent(args: &TangentArgs) -> Result<u8, Error> {
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => Config64::worked_example(args.n + args.k, args.seed),
    };
    let baseline = args.baseline_constant_r.map(|r| Config64 {
        contraction: ContractionLaw64::Constant(r),
        ..config.clone()
    });
    let report = tangent_equivalence_test(
        &config,
        args.seeds,
        args.n,
        args.k,
        args.seed,
        args.calibration_reps,
        baseline.as_ref(),
    )?;
    let verdict = if report.pass {
        "not rejected"
    } else {
        "rejected"
    };
    let mut json = serde_json::to_value(&report)?;
    json["verdict"] = serde_json::Value::String(verdict.into());
    let text = serde_json::to_string_pretty(&json)?;
    write_or_print(args.out.as_deref(), &text)?;
    if args.out.is_some() {
        eprintln!("tangent equivalence: {verdict}");
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_figure1(args: &Figure1Args) -> Result<u8, Error> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => default_config(),
    };
    if let Some(depth) = args.depth {
        config.max_depth = depth;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let real = grow(config.clone())?;
    let matrix = scale_matrix(&real, &config.weighting)?;
    let heat = mass_heatmap_bins(&matrix, &real, args.bins)?;

    // shrink the transient window on shallow runs instead of failing
    let skip = DEFAULT_SKIP_DEPTHS.min(matrix.rows.len().saturating_sub(3));
    let n_usable = retained_depths(&matrix, skip)?.len();
    if n_usable < 6 {
        eprintln!("warning: only {n_usable} usable depths; slope error bars are wide");
    }
    let estimate = estimate_spectrum(
        &matrix,
        &QGrid64::default_grid(),
        MeshMode::GeoMean,
        MassSource::Mass,
        skip,
    )?;

    fs::create_dir_all(&args.out)?;
    let heat_csv = heatmap_csv(&heat);
    let spec_json = spectrum_json(&estimate)?;
    fs::write(args.out.join("heatmap.csv"), &heat_csv)?;
    fs::write(args.out.join("heatmap.svg"), heatmap_svg(&heat))?;
    fs::write(args.out.join("spectrum.json"), &spec_json)?;
    fs::write(
        args.out.join("spectrum.svg"),
        curve_svg(&estimate.alpha, &estimate.f, "alpha", "f"),
    )?;
    let m = manifest(
        &config,
        &[
            ("heatmap.csv", heat_csv.as_bytes()),
            ("spectrum.json", spec_json.as_bytes()),
        ],
    );
    fs::write(args.out.join("manifest.txt"), m)?;
    println!(
        "wrote heatmap + spectrum to {} ({} leaves at depth {})",
        args.out.display(),
        real.leaves_by_depth.last().map_or(0, Vec::len),
        real.leaves_by_depth.len() - 1
    );
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Tangent(args) => cmd_tangent(args),
        Command::Figure1(args) => cmd_figure1(args),
        Command::Defaults => {
            print!("{}", default_config::<f64>().to_key_values());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
