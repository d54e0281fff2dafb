//! Command-line surface for the sequence-uniformity toolkit.
//!
//! Every run resolves its full configuration, executes one computation,
//! and writes a data file (CSV or JSON) plus a `.meta.json` sidecar with
//! the config, its hash, and the runtime. Data files are byte-identical
//! across repeated runs and thread counts; anything run-dependent stays
//! in the sidecar.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use qmult_cli::emit::{self, Field, Table};
use qmult_core::autocorr::{correlation_series, CorrelationMethod};
use qmult_core::expsum::{
    cesaro_mean, sup_linear_correlation, sup_poly_correlation, AlphaSearch,
};
use qmult_core::gowers::{
    box_average_exact, epsilon_ledger, gowers_norm_bruteforce, parallelepiped_average,
    recursive_average, uniformity_report, BoxCondition, CarryVector, DEFAULT_MIN_BLOCK,
};
use qmult_core::patterns::{count_ap_cells, count_ap_patterns, PatternSpec};
use qmult_core::{checked_pow, AnySequence, Phase, SeqSpec};

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Budget(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Budget(_) => 3,
            AppError::Io(_) => 4,
            AppError::Other(_) => 1,
        }
    }
}

impl From<qmult_core::Error> for AppError {
    fn from(e: qmult_core::Error) -> AppError {
        match e {
            qmult_core::Error::BudgetExceeded { .. } => AppError::Budget(e.to_string()),
            qmult_core::Error::InvalidParameter(_) | qmult_core::Error::SpecParse(_) => {
                AppError::Usage(e.to_string())
            }
            qmult_core::Error::Numeric(_) => AppError::Other(e.to_string()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NormMode {
    Brute,
    Dp,
    Recursive,
}

#[derive(Parser, Debug)]
#[command(name = "qmult", version, about = "Uniformity diagnostics for digital sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file; default <command>.csv under $QMULT_OUT_DIR or '.'
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Worker threads; 0 picks the machine default
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Work-unit cap for the heavy enumerations
    #[arg(long, global = true, default_value_t = qmult_core::DEFAULT_BUDGET)]
    budget: u64,
    /// Recorded in the sidecar; sequences carry their own seeds
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Box-norm values U^s on [0, q^L): full report, or one method
    Norms {
        #[arg(long)]
        seq: String,
        /// Largest order (2..=4); with --r, the single order 2^s = len r
        #[arg(long)]
        s: u32,
        #[arg(long = "L")]
        level: u32,
        /// brute = tuple enumeration, dp = conditioned digit recursion,
        /// recursive = split formula; omit for the standard report
        #[arg(long, value_enum)]
        mode: Option<NormMode>,
        /// Carry vector entries, comma-separated, length 2^s
        #[arg(long)]
        r: Option<String>,
        /// Split position for --mode recursive
        #[arg(long, default_value_t = 1)]
        split: u32,
        /// Beam width for the linear-correlation search in the report
        #[arg(long, default_value_t = 256)]
        beam: u64,
    },
    /// Supremum of |E f(n) e(p(n))| over polynomial phases of one degree
    Supcorr {
        #[arg(long)]
        seq: String,
        #[arg(long)]
        deg: u32,
        #[arg(long = "L")]
        level: u32,
        /// Beam width at degree 1; coefficient grid density otherwise
        #[arg(long, default_value_t = 256)]
        beam: u64,
    },
    /// Linear-phase sup across scales q^L with a fitted decay exponent
    Gelfond {
        #[arg(long)]
        seq: String,
        #[arg(long = "Lmin")]
        lmin: u32,
        #[arg(long = "Lmax")]
        lmax: u32,
        #[arg(long, default_value_t = 256)]
        beam: u64,
        /// Exhaustive alpha grid instead of the beam search
        #[arg(long)]
        grid: Option<u64>,
    },
    /// Count arithmetic progressions with digit-sum constraints
    Patterns {
        #[arg(long)]
        q: u32,
        #[arg(long = "Q")]
        modulus: Option<u32>,
        /// Progression length; must match the residue/cell list
        #[arg(long)]
        k: Option<usize>,
        /// Residues mod Q, comma-separated; k = 1 counts single n
        #[arg(long)]
        residues: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Cells lo:hi of [0,1), comma-separated
        #[arg(long)]
        cells: Option<String>,
        #[arg(long = "N")]
        n: u64,
    },
    /// Autocorrelation coefficients gamma_r for r < R
    Gamma {
        #[arg(long)]
        seq: String,
        #[arg(long = "R")]
        count: u64,
        /// finite:N=<terms> or series:depth=<levels>
        #[arg(long)]
        method: String,
    },
    /// Plain means E_{n<q^L} f(n) along the scale ladder
    Cesaro {
        #[arg(long)]
        seq: String,
        #[arg(long = "L")]
        level: u32,
    },
    /// Rotation-weighted averages E f(n) e(x0 + p(n) theta)
    ErgodicDemo {
        #[arg(long)]
        seq: String,
        /// Integer polynomial coefficients c0,c1,..., constant first
        #[arg(long)]
        poly: String,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long = "N")]
        n: u64,
    },
    /// Per-block uniformity deficits across digit blocks
    Ledger {
        #[arg(long)]
        seq: String,
        #[arg(long)]
        s: u32,
        /// Block lengths in digits, comma-separated
        #[arg(long)]
        blocks: String,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => println!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, AppError> {
    let threads = if cli.threads == 0 {
        std::thread::available_parallelism().map(usize::from).unwrap_or(1)
    } else {
        cli.threads
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Other(e.to_string()))?;
    let started = Instant::now();
    let (table, extras) = pool.install(|| dispatch(cli))?;
    let runtime_ms = started.elapsed().as_millis();

    let out = resolve_out_path(cli);
    let data = match cli.format {
        OutFormat::Csv => emit::write_csv(&table),
        OutFormat::Json => emit::write_json(&table),
    };
    let io = |e: std::io::Error| AppError::Io(format!("{}: {e}", out.display()));
    std::fs::write(&out, data).map_err(io)?;
    let extras_ref: Vec<(&str, String)> =
        extras.iter().map(|(k, v)| (*k, v.clone())).collect();
    let meta = emit::sidecar(&config_line(cli), threads, runtime_ms, &extras_ref);
    std::fs::write(emit::sidecar_path(&out), meta).map_err(io)?;
    Ok(out)
}

fn resolve_out_path(cli: &Cli) -> PathBuf {
    if let Some(p) = &cli.out {
        return p.clone();
    }
    let name = match &cli.command {
        Command::Norms { .. } => "norms",
        Command::Supcorr { .. } => "supcorr",
        Command::Gelfond { .. } => "gelfond",
        Command::Patterns { .. } => "patterns",
        Command::Gamma { .. } => "gamma",
        Command::Cesaro { .. } => "cesaro",
        Command::ErgodicDemo { .. } => "ergodic-demo",
        Command::Ledger { .. } => "ledger",
    };
    let ext = match cli.format {
        OutFormat::Csv => "csv",
        OutFormat::Json => "json",
    };
    let dir = std::env::var_os("QMULT_OUT_DIR").map(PathBuf::from).unwrap_or_default();
    dir.join(format!("{name}.{ext}"))
}

/// The resolved config as one canonical line; hashed into the sidecar.
fn config_line(cli: &Cli) -> String {
    format!(
        "{:?} format={:?} threads={} budget={} seed={}",
        cli.command, cli.format, cli.threads, cli.budget, cli.seed
    )
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

/// Sequence specs parse in the core; range checks the core leaves to
/// presentation (it stores phases mod 1) are enforced here.
fn build_seq(text: &str) -> Result<AnySequence, AppError> {
    let spec: SeqSpec = text.parse()?;
    if let SeqSpec::GenThueMorse { tau } = &spec {
        if !(0.0..1.0).contains(tau) {
            return Err(usage(format!("gtm tau must lie in [0, 1), got {tau}")));
        }
    }
    Ok(spec.build()?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, AppError> {
    text.split(',')
        .map(|tok| tok.trim().parse::<T>().map_err(|_| usage(format!("bad {what}: '{tok}'"))))
        .collect()
}

fn complex_fields(z: Complex64) -> [Field; 2] {
    [Field::Real(z.re), Field::Real(z.im)]
}

fn dispatch(cli: &Cli) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    match &cli.command {
        Command::Norms { seq, s, level, mode, r, split, beam } => {
            run_norms(seq, *s, *level, *mode, r.as_deref(), *split, *beam, cli.budget)
        }
        Command::Supcorr { seq, deg, level, beam } => run_supcorr(seq, *deg, *level, *beam),
        Command::Gelfond { seq, lmin, lmax, beam, grid } => {
            run_gelfond(seq, *lmin, *lmax, *beam, *grid)
        }
        Command::Patterns { q, modulus, k, residues, alpha, cells, n } => run_patterns(
            *q,
            *modulus,
            *k,
            residues.as_deref(),
            *alpha,
            cells.as_deref(),
            *n,
            cli.budget,
        ),
        Command::Gamma { seq, count, method } => run_gamma(seq, *count, method),
        Command::Cesaro { seq, level } => run_cesaro(seq, *level),
        Command::ErgodicDemo { seq, poly, theta, x0, n } => {
            run_ergodic(seq, poly, *theta, *x0, *n)
        }
        Command::Ledger { seq, s, blocks } => run_ledger(seq, *s, blocks, cli.budget),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_norms(
    seq: &str,
    s: u32,
    level: u32,
    mode: Option<NormMode>,
    r: Option<&str>,
    split: u32,
    beam: u64,
    budget: u64,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    if r.is_none() && !(2..=4).contains(&s) {
        return Err(usage(format!("--s must lie in 2..=4, got {s}")));
    }
    let mut table = Table::new(&["s", "L", "method", "value", "error_bound"]);
    let carry = match r {
        Some(text) => {
            let entries: Vec<u8> = parse_list(text, "carry entry")?;
            if entries.len() != 1usize << s {
                return Err(usage(format!(
                    "--r needs 2^s = {} entries for --s {s}, got {}",
                    1u32 << s,
                    entries.len()
                )));
            }
            Some(CarryVector::from_entries(s, entries)?)
        }
        None => None,
    };

    match mode {
        None => {
            if carry.is_some() {
                return Err(usage("--r needs an explicit --mode".to_string()));
            }
            let g = f.as_qmult()?;
            let report = uniformity_report(g, s, level, beam, budget)?;
            table.push(vec![
                Field::Int(1),
                Field::Int(level as u64),
                Field::Text("beam".into()),
                Field::Real(report.sup_linear.value),
                Field::Real(0.0),
            ]);
            for nv in report.norms {
                table.push(vec![
                    Field::Int(nv.s as u64),
                    Field::Int(nv.level as u64),
                    Field::Text(nv.method.to_string()),
                    Field::Real(nv.value),
                    Field::Real(nv.error_bound),
                ]);
            }
        }
        Some(NormMode::Brute) => {
            let q = f.as_qmult().map(|g| g.q()).unwrap_or(2);
            let n = checked_pow(q, level)?;
            match &carry {
                None => {
                    for order in 2..=s {
                        let v = gowers_norm_bruteforce(&f, order, n, budget)?;
                        table.push(norm_row(order, level, "brute", v, 0.0));
                    }
                }
                Some(rv) => {
                    let v = parallelepiped_average(&f, rv, n, budget)?;
                    table.push(norm_row(s, level, "brute", v.norm(), 0.0));
                }
            }
        }
        Some(NormMode::Dp) => {
            let g = f.as_qmult()?;
            match &carry {
                None => {
                    for order in 2..=s {
                        let zero = CarryVector::zero(order)?;
                        let v = box_average_exact(g, &zero, level, BoxCondition::SumBelowQL)?;
                        table.push(norm_row(order, level, "dp", v.re, 0.0));
                    }
                }
                Some(rv) => {
                    let v = box_average_exact(g, rv, level, BoxCondition::SumBelowQL)?;
                    table.push(norm_row(s, level, "dp", v.re, 0.0));
                }
            }
        }
        Some(NormMode::Recursive) => {
            let g = f.as_qmult()?;
            match &carry {
                None => {
                    for order in 2..=s {
                        let zero = CarryVector::zero(order)?;
                        let (v, err) = recursive_average(g, &zero, level, split, budget)?;
                        table.push(norm_row(order, level, "recursive", v.norm(), err));
                    }
                }
                Some(rv) => {
                    let (v, err) = recursive_average(g, rv, level, split, budget)?;
                    table.push(norm_row(s, level, "recursive", v.norm(), err));
                }
            }
        }
    }
    Ok((table, Vec::new()))
}

fn norm_row(s: u32, level: u32, method: &str, value: f64, err: f64) -> Vec<Field> {
    vec![
        Field::Int(s as u64),
        Field::Int(level as u64),
        Field::Text(method.into()),
        Field::Real(value),
        Field::Real(err),
    ]
}

fn run_supcorr(
    seq: &str,
    deg: u32,
    level: u32,
    beam: u64,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    let mut table = Table::new(&["L", "N", "value", "alpha_star"]);
    if deg == 1 {
        let g = f.as_qmult()?;
        let sup = sup_linear_correlation(g, level, beam)?;
        table.push(vec![
            Field::Int(level as u64),
            Field::Int(checked_pow(g.q(), level)?),
            Field::Real(sup.value),
            Field::Real(sup.alpha.turns()),
        ]);
        let extras = vec![("exact_on_grid", sup.exact_on_grid.to_string())];
        Ok((table, extras))
    } else {
        let q = f.as_qmult().map(|g| g.q()).unwrap_or(2);
        let n = checked_pow(q, level)?;
        let density = u32::try_from(beam.clamp(2, 1 << 12))
            .expect("clamped to a small range");
        let (poly, value) = sup_poly_correlation(&f, deg, n, density)?;
        let leading = poly.coeffs_turns().last().copied().unwrap_or(0.0);
        table.push(vec![
            Field::Int(level as u64),
            Field::Int(n),
            Field::Real(value),
            Field::Real(leading),
        ]);
        Ok((table, Vec::new()))
    }
}

fn run_gelfond(
    seq: &str,
    lmin: u32,
    lmax: u32,
    beam: u64,
    grid: Option<u64>,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    let g = f.as_qmult()?;
    let search = match grid {
        Some(points) => AlphaSearch::Grid { points },
        None => AlphaSearch::Beam { width: beam },
    };
    let points = qmult_core::expsum::gelfond_scale_values(g, search, lmin, lmax)?;
    let method = match search {
        AlphaSearch::Grid { .. } => qmult_core::expsum::FitMethod::Grid,
        AlphaSearch::Beam { .. } => qmult_core::expsum::FitMethod::BeamSearch,
    };
    let report = qmult_core::expsum::fit_scale_points(&points, method);
    let mut table = Table::new(&["L", "N", "value", "alpha_star"]);
    for p in &points {
        table.push(vec![
            Field::Int(p.level as u64),
            Field::Int(p.n),
            Field::Real(p.value),
            Field::Real(p.alpha.turns()),
        ]);
    }
    let extras = vec![
        ("fitted_exponent", emit::format_real(report.fitted_exponent)),
        ("fit_residual", emit::format_real(report.fit_residual)),
        ("fit_method", report.method.to_string()),
    ];
    Ok((table, extras))
}

#[allow(clippy::too_many_arguments)]
fn run_patterns(
    q: u32,
    modulus: Option<u32>,
    k: Option<usize>,
    residues: Option<&str>,
    alpha: Option<f64>,
    cells: Option<&str>,
    n: u64,
    budget: u64,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let spec = match (modulus, residues, alpha, cells) {
        (Some(modulus), Some(residues), None, None) => {
            let rs: Vec<u32> = parse_list(residues, "residue")?;
            let spec = PatternSpec::mod_residues(q, modulus, rs)?;
            if !spec.coprimality_holds() {
                return Err(usage(format!(
                    "Q = {modulus} shares a factor with q - 1 = {}; residue patterns \
                     degenerate (s_q(n) = n mod q-1), pick a coprime modulus",
                    q - 1
                )));
            }
            spec
        }
        (None, None, Some(alpha), Some(cells)) => {
            let intervals = cells
                .split(',')
                .map(|tok| {
                    let (lo, hi) = tok
                        .split_once(':')
                        .ok_or_else(|| usage(format!("cell '{tok}' is not lo:hi")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| usage(format!("bad cell bound '{s}'")))
                    };
                    Ok((parse(lo)?, parse(hi)?))
                })
                .collect::<Result<Vec<_>, AppError>>()?;
            PatternSpec::irrational_cells(q, alpha, intervals)?
        }
        _ => {
            return Err(usage(
                "give either --Q with --residues, or --alpha with --cells".to_string(),
            ))
        }
    };
    if let Some(k) = k {
        if k != spec.k() {
            return Err(usage(format!(
                "--k {k} does not match the {} constraints given",
                spec.k()
            )));
        }
    }
    let report = match spec.kind() {
        qmult_core::patterns::PatternKind::ModResidues { .. } => {
            count_ap_patterns(&spec, n, budget)?
        }
        qmult_core::patterns::PatternKind::IrrationalCells { .. } => {
            count_ap_cells(&spec, n, budget)?
        }
    };
    let mut table = Table::new(&["N", "count", "density"]);
    for &(np, count) in &report.series {
        table.push(vec![
            Field::Int(np),
            Field::Int(count),
            Field::Real(count as f64 / (np as f64 * np as f64)),
        ]);
    }
    let extras = vec![("zero_count", report.is_empty().to_string())];
    Ok((table, extras))
}

fn run_gamma(
    seq: &str,
    count: u64,
    method: &str,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    let method = parse_gamma_method(method)?;
    let series = correlation_series(&f, count, method)?;
    let mut table = Table::new(&["r", "re", "im", "err"]);
    for (r, (g, e)) in series.gamma.iter().zip(&series.error_estimate).enumerate() {
        let [re, im] = complex_fields(*g);
        table.push(vec![Field::Int(r as u64), re, im, Field::Real(*e)]);
    }
    Ok((table, Vec::new()))
}

fn parse_gamma_method(text: &str) -> Result<CorrelationMethod, AppError> {
    let (name, arg) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("method '{text}' is not finite:N=... or series:depth=...")))?;
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| usage(format!("method argument '{arg}' is not key=value")))?;
    match (name, key) {
        ("finite", "N") => {
            let n = value.parse().map_err(|_| usage(format!("bad N '{value}'")))?;
            Ok(CorrelationMethod::FiniteN(n))
        }
        ("series", "depth") => {
            let d = value.parse().map_err(|_| usage(format!("bad depth '{value}'")))?;
            Ok(CorrelationMethod::TruncatedSeries(d))
        }
        _ => Err(usage(format!("unknown method '{name}:{key}'"))),
    }
}

fn run_cesaro(
    seq: &str,
    level: u32,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    let g = f.as_qmult()?;
    let mut table = Table::new(&["L", "N", "re", "im"]);
    for l in 1..=level {
        let mean = cesaro_mean(g, l);
        let [re, im] = complex_fields(mean);
        table.push(vec![Field::Int(l as u64), Field::Int(checked_pow(g.q(), l)?), re, im]);
    }
    Ok((table, Vec::new()))
}

fn run_ergodic(
    seq: &str,
    poly: &str,
    theta: f64,
    x0: f64,
    n: u64,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    if !theta.is_finite() || !x0.is_finite() {
        return Err(usage("theta and x0 must be finite turn values".to_string()));
    }
    let coeffs: Vec<u64> = parse_list(poly, "polynomial coefficient")?;
    let ladder = qmult_core::patterns::weighted_birkhoff_demo(
        &f,
        &coeffs,
        Phase::new(theta),
        Phase::new(x0),
        n,
    )?;
    let mut table = Table::new(&["N", "re", "im", "abs"]);
    for (np, avg) in ladder {
        let [re, im] = complex_fields(avg);
        table.push(vec![Field::Int(np), re, im, Field::Real(avg.norm())]);
    }
    Ok((table, Vec::new()))
}

fn run_ledger(
    seq: &str,
    s: u32,
    blocks: &str,
    budget: u64,
) -> Result<(Table, Vec<(&'static str, String)>), AppError> {
    let f = build_seq(seq)?;
    let g = f.as_qmult()?;
    let lengths: Vec<u32> = parse_list(blocks, "block length")?;
    let ledger = epsilon_ledger(g, s, &lengths, DEFAULT_MIN_BLOCK, budget)?;
    let mut table = Table::new(&["block", "start_level", "length", "deficit", "running_total"]);
    let mut running = 0.0;
    for (i, (&len, &deficit)) in
        ledger.block_lengths.iter().zip(&ledger.deficits).enumerate()
    {
        running += deficit;
        table.push(vec![
            Field::Int(i as u64),
            Field::Int(ledger.breakpoints[i] as u64),
            Field::Int(len as u64),
            Field::Real(deficit),
            Field::Real(running),
        ]);
    }
    let extras = vec![
        ("cumulative", emit::format_real(ledger.cumulative)),
        ("final_average_re", emit::format_real(ledger.final_average.re)),
        ("final_average_im", emit::format_real(ledger.final_average.im)),
    ];
    Ok((table, extras))
}
