use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qtc_core::decoder::Decoder;
use qtc_core::hdrg::RegionParams;
use qtc_core::lattice::{compute_syndrome, sample_errors, CodeParams, NoiseParams};
use qtc_core::rng::trial_seed;
use qtc_core::stats::{
    estimate_spanning, estimate_success, fit_threshold, hashing_threshold, CurvePoint, FitResult, HashingModel,
    PercolationMode,
};

const SPANNING_RULE: &str = "a nearest-neighbour cluster touches every row or every column";

#[derive(Parser)]
#[command(name = "qtc", version, about = "Decoder and threshold simulations for qudit toric codes")]
struct Cli {
    /// Worker threads for Monte Carlo sampling; 0 uses every core.
    #[arg(long, env = "QTC_THREADS", global = true, default_value_t = 0)]
    threads: usize,
    /// TOML file with the same keys as the flags. Flags given on the command
    /// line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the success probability at one (d, L, p).
    Sample(SampleArgs),
    /// Sweep a campaign grid, write curve CSVs and fit the threshold.
    Threshold(ThresholdArgs),
    /// Spanning probability of the charged plaquettes.
    Percolate(PercolateArgs),
    /// Hashing-bound thresholds.
    Hashing(HashingArgs),
    /// Fit the threshold of an existing curve CSV.
    Fit(FitArgs),
    /// Join fit results with rescaled hashing thresholds.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DecoderKind {
    Hdrg,
    EnhancedHdrg,
    Sdrg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Model {
    Independent,
    Depolarizing,
}

impl From<Model> for HashingModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Independent => HashingModel::Independent,
            Model::Depolarizing => HashingModel::Depolarizing,
        }
    }
}

/// `start:stop:step`, or a single rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct PGrid {
    start: f64,
    stop: f64,
    step: f64,
}

impl PGrid {
    fn values(&self) -> Vec<f64> {
        if self.step == 0.0 {
            return vec![self.start];
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Rounding keeps grid points, and hence trial seeds, stable.
        (0..=n).map(|i| ((self.start + self.step * i as f64) * 1e9).round() / 1e9).collect()
    }
}

fn parse_grid(s: &str) -> Result<PGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number"));
    let grid = match parts.as_slice() {
        [p] => {
            let p = num(p)?;
            PGrid { start: p, stop: p, step: 0.0 }
        }
        [a, b, c] => PGrid { start: num(a)?, stop: num(b)?, step: num(c)? },
        _ => return Err("expected start:stop:step or a single value".into()),
    };
    if !(0.0..=1.0).contains(&grid.start) || !(0.0..=1.0).contains(&grid.stop) {
        return Err("rates must lie in [0, 1]".into());
    }
    if parts.len() == 3 && !(grid.step > 0.0) {
        return Err("step must be positive".into());
    }
    if grid.stop < grid.start {
        return Err("stop is below start".into());
    }
    Ok(grid)
}

fn parse_depth(s: &str) -> Result<RegionParams, String> {
    let (r, t) = s.split_once(',').ok_or("expected r,s")?;
    let r = r.trim().parse().map_err(|_| format!("bad r in '{s}'"))?;
    let t = t.trim().parse().map_err(|_| format!("bad s in '{s}'"))?;
    RegionParams::new(r, t).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
struct DecoderArgs {
    #[arg(long, value_enum, default_value = "hdrg")]
    decoder: DecoderKind,
    /// Initialization depth `r,s`; turns hdrg into enhanced-hdrg.
    #[arg(long, value_parser = parse_depth)]
    init: Option<RegionParams>,
    /// Belief-propagation rounds per SDRG level.
    #[arg(long, default_value_t = 5)]
    bp_rounds: usize,
}

impl DecoderArgs {
    fn resolve(&self) -> Result<Decoder> {
        Ok(match (self.decoder, self.init) {
            (DecoderKind::Hdrg, depth) => Decoder::hdrg_with_init(depth),
            (DecoderKind::EnhancedHdrg, Some(depth)) => Decoder::EnhancedHdrg { depth },
            (DecoderKind::EnhancedHdrg, None) => bail!("enhanced-hdrg needs --init r,s"),
            (DecoderKind::Sdrg, None) => Decoder::Sdrg { bp_rounds: self.bp_rounds },
            (DecoderKind::Sdrg, Some(_)) => bail!("--init applies to the hdrg decoders only"),
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    decoder: DecoderArgs,
    #[arg(long)]
    d: u32,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print the decoder's internal levels for the first trial to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ThresholdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    decoder: DecoderArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<u32>,
    #[arg(long = "L", value_delimiter = ',', required = true)]
    #[serde(rename = "L")]
    l: Vec<usize>,
    #[arg(long, value_parser = parse_grid)]
    p: PGrid,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fit only these sizes; the CSV keeps every size.
    #[arg(long, value_delimiter = ',')]
    fit_sizes: Option<Vec<usize>>,
    /// Output directory for `<decoder>_d<d>.csv` and `.fit.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PercolateArgs {
    #[arg(long, value_delimiter = ',', default_value = "2")]
    d: Vec<u32>,
    #[arg(long = "L", value_delimiter = ',', required = true)]
    #[serde(rename = "L")]
    l: Vec<usize>,
    #[arg(long, alias = "p", value_parser = parse_grid)]
    p_grid: PGrid,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Thin the syndrome with the initialization pass to depth `r,s` first.
    #[arg(long, value_parser = parse_depth)]
    init: Option<RegionParams>,
    /// Occupy plaquettes independently with probability p instead.
    #[arg(long)]
    site_mode: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct HashingArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<u32>,
    #[arg(long, value_enum, default_value = "independent")]
    model: Model,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FitArgs {
    /// Curve CSV with columns d,L,p,count,total.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    fit_sizes: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CompareArgs {
    /// Fit JSON files written by `threshold` or `fit`.
    #[arg(long, value_delimiter = ',', required = true)]
    fits: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "independent")]
    model: Model,
    /// Factor applied to the hashing threshold.
    #[arg(long, default_value_t = 0.69)]
    rescale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FitDocument {
    config: serde_json::Value,
    decoder: String,
    d: u32,
    sizes: Vec<usize>,
    fit: FitResult,
}

fn header_line(command: &str, args: &impl Serialize) -> Result<String> {
    let cfg = serde_json::json!({
        "qtc": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    Ok(format!("# {}\n", serde_json::to_string(&cfg)?))
}

fn config_value(command: &str, args: &impl Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::json!({ "qtc": env!("CARGO_PKG_VERSION"), "command": command, "args": serde_json::to_value(args)? }))
}

fn curve_csv(points: &[CurvePoint], count_column: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["d", "L", "p", count_column, "n_total"])?;
    for x in points {
        w.write_record([x.d.to_string(), x.l.to_string(), x.p.to_string(), x.n_success.to_string(), x.n_total.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn read_curve(path: &Path) -> Result<(Vec<CurvePoint>, Option<String>)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = text.lines().next().filter(|l| l.starts_with('#')).map(|l| l[1..].trim().to_string());
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV row {}", path.display(), i + 1))?;
        ensure!(rec.len() == 5, "{}: row {} has {} columns, expected 5", path.display(), i + 1, rec.len());
        let f = |k: usize| rec[k].trim().to_string();
        let parse_err = || format!("{}: unparsable row {}", path.display(), i + 1);
        let pt = CurvePoint::new(
            f(0).parse().with_context(parse_err)?,
            f(1).parse().with_context(parse_err)?,
            f(2).parse().with_context(parse_err)?,
            f(3).parse().with_context(parse_err)?,
            f(4).parse().with_context(parse_err)?,
        )?;
        points.push(pt);
    }
    ensure!(!points.is_empty(), "{}: no data rows", path.display());
    Ok((points, header))
}

fn fit_document(config: serde_json::Value, decoder: String, points: &[CurvePoint], subset: Option<&[usize]>) -> Result<FitDocument> {
    let d = points[0].d;
    ensure!(points.iter().all(|x| x.d == d), "curve mixes several d");
    let chosen: Vec<CurvePoint> = match subset {
        Some(s) => points.iter().filter(|x| s.contains(&x.l)).copied().collect(),
        None => points.to_vec(),
    };
    let mut sizes: Vec<usize> = chosen.iter().map(|x| x.l).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let fit = fit_threshold(&chosen).with_context(|| format!("threshold fit for d={d} failed"))?;
    Ok(FitDocument { config, decoder, d, sizes, fit })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn file_stem(decoder: &Decoder) -> String {
    let raw = decoder.name();
    let mut out = String::new();
    for ch in raw.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

fn run_sample(args: &SampleArgs) -> Result<()> {
    let decoder = args.decoder.resolve()?;
    let params = CodeParams::new(args.d, args.l)?;
    let noise = NoiseParams::new(args.p)?;
    if args.trace {
        let e = sample_errors(params, noise, trial_seed(args.seed, args.d, args.l, args.p, 0));
        let (_, trace) = decoder.decode_traced(&compute_syndrome(&e), noise)?;
        eprintln!("{}", serde_json::to_string_pretty(&trace)?);
    }
    let pt = estimate_success(decoder, params, noise, args.n, args.seed)?;
    let out = serde_json::json!({
        "config": config_value("sample", args)?,
        "decoder": decoder.name(),
        "d": pt.d,
        "L": pt.l,
        "p": pt.p,
        "n_success": pt.n_success,
        "n_total": pt.n_total,
        "p_succ": pt.p_succ(),
        "sigma": pt.sigma(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_threshold(args: &ThresholdArgs) -> Result<()> {
    let decoder = args.decoder.resolve()?;
    let ps = args.p.values();
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let stem = file_stem(&decoder);
    let mut failures = Vec::new();
    for &d in &args.d {
        let mut points = Vec::new();
        for &l in &args.l {
            let params = CodeParams::new(d, l)?;
            for &p in &ps {
                points.push(estimate_success(decoder, params, NoiseParams::new(p)?, args.n, args.seed)?);
            }
        }
        let csv_path = args.out.join(format!("{stem}_d{d}.csv"));
        write_file(&csv_path, &(header_line("threshold", args)? + &curve_csv(&points, "n_success")?))?;
        match fit_document(config_value("threshold", args)?, decoder.name(), &points, args.fit_sizes.as_deref()) {
            Ok(doc) => {
                let json = serde_json::to_string_pretty(&doc)?;
                write_file(&args.out.join(format!("{stem}_d{d}.fit.json")), &(json.clone() + "\n"))?;
                println!("{}", serde_json::to_string(&doc.fit)?);
                if doc.fit.extrapolation {
                    eprintln!("warning: d={d}: fitted p_th sits on the edge of the sampled range");
                }
            }
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    if !failures.is_empty() {
        bail!("{}", failures.join("; "));
    }
    Ok(())
}

fn run_percolate(args: &PercolateArgs) -> Result<()> {
    ensure!(!(args.site_mode && args.init.is_some()), "--init has no meaning with --site-mode");
    let mode = if args.site_mode { PercolationMode::Site } else { PercolationMode::Syndrome { depth: args.init } };
    let mut points = Vec::new();
    for &d in &args.d {
        for &l in &args.l {
            let params = CodeParams::new(d, l)?;
            for p in args.p_grid.values() {
                points.push(estimate_spanning(mode, params, p, args.n, args.seed)?);
            }
        }
    }
    let meta = serde_json::json!({ "settings": args, "spanning": SPANNING_RULE });
    let body = header_line("percolate", &meta)? + &curve_csv(&points, "n_span")?;
    match &args.out {
        Some(path) => write_file(path, &body),
        None => Ok(io::stdout().write_all(body.as_bytes())?),
    }
}

fn run_hashing(args: &HashingArgs) -> Result<()> {
    let single = args.d.len() == 1;
    if !single {
        println!("d,p_th");
    }
    for &d in &args.d {
        let p = hashing_threshold(d, args.model.into()).with_context(|| format!("hashing threshold for d={d}"))?;
        if single {
            println!("{p:.6}");
        } else {
            println!("{d},{p:.6}");
        }
    }
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let (points, header) = read_curve(&args.input)?;
    let source: Option<serde_json::Value> = header.and_then(|h| serde_json::from_str(&h).ok());
    let decoder = source
        .as_ref()
        .and_then(|s| s.pointer("/args/decoder"))
        .and_then(|v| v.as_str())
        .unwrap_or("unknown")
        .to_string();
    let config = serde_json::json!({ "qtc": env!("CARGO_PKG_VERSION"), "command": "fit", "args": args, "source": source });
    let doc = fit_document(config, decoder, &points, args.fit_sizes.as_deref())?;
    let json = serde_json::to_string_pretty(&doc)?;
    match &args.out {
        Some(path) => write_file(path, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn run_compare(args: &CompareArgs) -> Result<()> {
    ensure!(args.rescale > 0.0, "--rescale must be positive");
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(["decoder", "d", "p_th", "hashing", "rescaled_hashing", "ratio"])?;
    for path in &args.fits {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let doc: FitDocument = serde_json::from_str(&text).with_context(|| format!("{} is not a fit JSON", path.display()))?;
        let h = hashing_threshold(doc.d, args.model.into())?;
        let row = [
            doc.decoder.clone(),
            doc.d.to_string(),
            format!("{:.6}", doc.fit.p_th),
            format!("{h:.6}"),
            format!("{:.6}", h * args.rescale),
            format!("{:.6}", doc.fit.p_th / h),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends `--key value` pairs from the TOML file named by `--config` for
/// every key not already given on the command line.
fn splice_config(mut argv: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().context("--config needs a path")?,
    };
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read config {path}"))?;
    let table: toml::Table = text.parse().with_context(|| format!("invalid TOML in {path}"))?;
    let present: HashSet<String> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    for (key, value) in table {
        let flag = key.replace('_', "-");
        if flag == "config" || present.contains(&flag) {
            continue;
        }
        let text = match value {
            toml::Value::Boolean(true) => {
                argv.push(format!("--{flag}"));
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
            v => scalar(&v)?,
        };
        argv.push(format!("--{flag}"));
        argv.push(text);
    }
    Ok(argv)
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => bail!("unsupported config value {other}"),
    })
}

fn run() -> Result<()> {
    let argv = splice_config(std::env::args().collect())?;
    let cli = Cli::parse_from(argv);
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().context("cannot start the worker pool")?;
    }
    match &cli.command {
        Command::Sample(a) => run_sample(a),
        Command::Threshold(a) => run_threshold(a),
        Command::Percolate(a) => run_percolate(a),
        Command::Hashing(a) => run_hashing(a),
        Command::Fit(a) => run_fit(a),
        Command::Compare(a) => run_compare(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
