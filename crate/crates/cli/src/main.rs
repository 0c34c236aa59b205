use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use atomic_deconv::asymptotics::{
    asymptotic_sd_f, asymptotic_sd_p, corrected_sd_f, corrected_sd_p, default_schedule, edge_asymptote_ratio,
};
use atomic_deconv::estimators::{f_known_p_grid, f_star_grid_with, fhat_grid, p_hat};
use atomic_deconv::simulation::{draw_sample, mc_study, write_summaries_csv, MCSummary};
use atomic_deconv::{DensityGrid, Error, Family, GridConfig, Kernel, ModelSpec, Sample};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "atomic-deconv", version, about = "Deconvolution with an atom at zero")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from the model and write it as a one-column CSV.
    Simulate(SimulateArgs),
    /// Estimate the atom and the density from a sample file.
    Estimate(EstimateArgs),
    /// Monte Carlo table of atom estimates over a list of bandwidths.
    McTable(McTableArgs),
    /// Constants, moments and diagnostics of a kernel.
    KernelInfo(KernelInfoArgs),
    /// Bandwidth schedule and standard-deviation predictors.
    Asymptotics(AsymptoticsArgs),
    /// Simulate and estimate in one go, writing estimate and true density side by side.
    Figure(FigureArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    PlugIn,
    KnownP,
    Classical,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Normal design, n = 1000, sigma = 1, g in 0.5, 0.55, 0.6, 0.65.
    Table1,
    /// Normal design, n = 500, sigma = 0.3, g in 0.45, 0.5, 0.6, 0.65.
    Table2,
    /// Normal design, n = 1000, h = 0.58, g = 0.5.
    Fig5,
    /// Gamma(8, 1) design with p = 0.25, n = 1000, h = g = 0.6.
    Fig7,
}

struct PresetConfig {
    model: ModelSpec,
    n: usize,
    bandwidths: Vec<f64>,
    h: f64,
    g: f64,
}

impl Preset {
    fn config(self) -> PresetConfig {
        let normal = ModelSpec::normal_example();
        match self {
            Preset::Table1 => {
                PresetConfig { model: normal, n: 1000, bandwidths: vec![0.5, 0.55, 0.6, 0.65], h: 0.58, g: 0.5 }
            }
            Preset::Table2 => PresetConfig {
                model: ModelSpec { sigma: 0.3, ..normal },
                n: 500,
                bandwidths: vec![0.45, 0.5, 0.6, 0.65],
                h: 0.58,
                g: 0.45,
            },
            Preset::Fig5 => PresetConfig { model: normal, n: 1000, bandwidths: vec![0.5], h: 0.58, g: 0.5 },
            Preset::Fig7 => {
                PresetConfig { model: ModelSpec::gamma_example(), n: 1000, bandwidths: vec![0.6], h: 0.6, g: 0.6 }
            }
        }
    }
}

/// Model flags shared by the commands that draw samples.
#[derive(Args)]
struct ModelArgs {
    /// Preset experiment; explicit flags override its values.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Distribution of the continuous part, e.g. `normal:3,9`, `gamma:8,1`, `mixture:0.5,-2,1;0.5,2,1`.
    #[arg(long)]
    model: Option<String>,
    /// Atom mass at zero.
    #[arg(long)]
    p: Option<f64>,
    /// Standard deviation of the Gaussian noise.
    #[arg(long)]
    sigma: Option<f64>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self, fallback: Preset) -> Result<PresetConfig> {
        let mut cfg = self.preset.unwrap_or(fallback).config();
        let family = match &self.model {
            Some(s) => s.parse::<Family>()?,
            None => cfg.model.family.clone(),
        };
        cfg.model = ModelSpec::new(self.p.unwrap_or(cfg.model.p), family, self.sigma.unwrap_or(cfg.model.sigma))?;
        if let Some(n) = self.n {
            if n == 0 {
                return Err(Error::invalid("n", "sample size must be at least 1").into());
            }
            cfg.n = n;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Number of FFT grid points (a power of two).
    #[arg(long = "grid-n", default_value_t = atomic_deconv::numerics::DEFAULT_POINTS)]
    grid_n: usize,
    /// Only write grid points in `LO,HI`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    /// Zero negative values and renormalise to unit mass.
    #[arg(long)]
    clip: bool,
}

impl GridArgs {
    fn config(&self, h: f64) -> Result<GridConfig> {
        Ok(GridConfig::for_bandwidth(h, self.grid_n, atomic_deconv::numerics::DEFAULT_COVERAGE)?)
    }

    fn rows(&self, grid: &DensityGrid) -> Result<Vec<(f64, f64)>> {
        match self.window.as_deref() {
            None => Ok(grid.xs.iter().copied().zip(grid.values.iter().copied()).collect()),
            Some([lo, hi]) if lo < hi => Ok(grid.window(*lo, *hi)),
            Some(other) => Err(Error::invalid("window", format!("expected LO,HI with LO < HI, got {other:?}")).into()),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample file: one value per line after an `x` header.
    input: PathBuf,
    /// Noise standard deviation of the sample.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Bandwidth of the density estimate.
    #[arg(long, default_value_t = 0.58)]
    h: f64,
    /// Bandwidth of the atom estimate.
    #[arg(long, default_value_t = 0.5)]
    g: f64,
    /// The atom estimate is capped at `1 - eps`.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Mode::PlugIn)]
    mode: Mode,
    /// Known atom mass, required by `--mode known-p`.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value = "deconv_w")]
    kernel_w: String,
    #[arg(long, default_value = "atom_k")]
    kernel_k: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Grid output; the metadata sidecar goes next to it with a `.meta.json` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McTableArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Bandwidths for the atom estimator; defaults to the preset list.
    #[arg(long, value_delimiter = ',')]
    g: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Shorthand for `--reps 1000`.
    #[arg(long, conflicts_with = "reps")]
    full: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "atom_k")]
    kernel_k: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelInfoArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Density bandwidth; the schedule value when omitted.
    #[arg(long)]
    h: Option<f64>,
    /// Atom bandwidth; the schedule value when omitted.
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, default_value = "deconv_w")]
    kernel_w: String,
    #[arg(long, default_value = "atom_k")]
    kernel_k: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long = "grid-n", default_value_t = atomic_deconv::numerics::DEFAULT_POINTS)]
    grid_n: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::McTable(a) => mc_table(a),
        Command::KernelInfo(a) => kernel_info(a),
        Command::Asymptotics(a) => asymptotics(a),
        Command::Figure(a) => figure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let numerical = err.chain().find_map(|e| e.downcast_ref::<Error>()).filter(|e| e.is_numerical());
            match numerical {
                Some(e @ Error::ExponentOverflow { .. }) => {
                    eprintln!("error: {e}\nhint: increase h (or g for the atom estimate)");
                    ExitCode::from(3)
                }
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
                None => {
                    eprintln!("error: {err:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn kernel(name: &str) -> Result<Kernel> {
    Kernel::by_name(name).ok_or_else(|| {
        anyhow!(
            "unknown kernel `{name}`; expected one of {}",
            atomic_deconv::kernels::BUILTIN_NAMES.join(", ")
        )
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.model.resolve(Preset::Fig5)?;
    let sample = draw_sample(&cfg.model, cfg.n, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "x")?;
    for v in sample.values() {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn read_sample(path: &Path, sigma: f64) -> Result<Sample> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == "x") {
            continue;
        }
        let v: f64 = line.parse().with_context(|| format!("{}:{}: `{line}` is not a number", path.display(), i + 1))?;
        values.push(v);
    }
    Ok(Sample::new(values, sigma)?)
}

#[derive(Serialize)]
struct EstimateMeta {
    mode: &'static str,
    n: usize,
    sigma: f64,
    h: f64,
    g: Option<f64>,
    eps: Option<f64>,
    p_raw: Option<f64>,
    p_hat: Option<f64>,
    truncated: Option<bool>,
    p_used: Option<f64>,
    kernel_w: String,
    kernel_k: Option<String>,
    grid: GridConfig,
    clipped: bool,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let sample = read_sample(&args.input, args.sigma)?;
    let kw = kernel(&args.kernel_w)?;
    let grid_cfg = args.grid.config(args.h)?;
    let mut meta = EstimateMeta {
        mode: "",
        n: sample.len(),
        sigma: args.sigma,
        h: args.h,
        g: None,
        eps: None,
        p_raw: None,
        p_hat: None,
        truncated: None,
        p_used: None,
        kernel_w: kw.name().to_string(),
        kernel_k: None,
        grid: grid_cfg,
        clipped: args.grid.clip,
    };
    let mut grid = match args.mode {
        Mode::PlugIn => {
            let kk = kernel(&args.kernel_k)?;
            // Same validation as the library config, so bad eps or kernel roles fail early.
            atomic_deconv::EstimatorConfig::with_grid(args.h, args.g, args.eps, kw.clone(), kk.clone(), grid_cfg)?;
            let est = p_hat(&sample, args.g, args.eps, &kk)?;
            meta.mode = "plug_in";
            meta.g = Some(args.g);
            meta.eps = Some(args.eps);
            meta.p_raw = Some(est.p_raw);
            meta.p_hat = Some(est.p_hat);
            meta.truncated = Some(est.truncated);
            meta.p_used = Some(est.p_hat);
            meta.kernel_k = Some(kk.name().to_string());
            f_star_grid_with(&sample, args.h, est.p_hat, &kw, &grid_cfg)?
        }
        Mode::KnownP => {
            let p = args.p.ok_or_else(|| Error::invalid("p", "--mode known-p needs --p"))?;
            meta.mode = "known_p";
            meta.p_used = Some(p);
            f_known_p_grid(&sample, args.h, p, &kw, &grid_cfg)?
        }
        Mode::Classical => {
            meta.mode = "classical";
            fhat_grid(&sample, args.h, &kw, &grid_cfg)?
        }
    };
    if args.grid.clip {
        grid.clip_and_renormalize();
    }
    let rows = args.grid.rows(&grid)?;
    let mut out = output(Some(&args.out))?;
    match args.format {
        Format::Csv => {
            writeln!(out, "x,value")?;
            for (x, v) in &rows {
                writeln!(out, "{x},{v}")?;
            }
        }
        Format::Json => {
            let (xs, values): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            write_json(&mut out, &serde_json::json!({ "xs": xs, "values": values, "estimator_tag": grid.estimator_tag }))?;
        }
    }
    out.flush()?;
    let mut side = output(Some(&sidecar_path(&args.out)))?;
    write_json(&mut side, &meta)?;
    side.flush()?;
    if let (Some(raw), Some(hat)) = (meta.p_raw, meta.p_hat) {
        eprintln!("p_raw = {raw}, p_hat = {hat}");
    }
    Ok(())
}

fn mc_table(args: McTableArgs) -> Result<()> {
    let cfg = args.model.resolve(Preset::Table1)?;
    let bandwidths = args.g.clone().unwrap_or(cfg.bandwidths);
    if bandwidths.is_empty() {
        bail!(Error::invalid("g", "empty bandwidth list"));
    }
    let reps = if args.full { 1000 } else { args.reps };
    let kk = kernel(&args.kernel_k)?;
    let summaries = mc_study(&cfg.model, cfg.n, &bandwidths, reps, args.seed, &kk)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_summaries_csv(&summaries, &mut out)?,
        Format::Json => {
            let rows: Vec<serde_json::Value> = summaries.iter().map(summary_json).collect::<Result<_>>()?;
            write_json(&mut out, &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn summary_json(s: &MCSummary) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(s)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("estimates");
    }
    Ok(v)
}

#[derive(Serialize)]
struct KernelReport {
    name: String,
    kind: String,
    alpha: f64,
    edge_const: f64,
    origin_order: Option<f64>,
    origin_coeff: Option<f64>,
    tail_decay: f64,
    tail_amplitude: f64,
    ft_integral: f64,
    moments: Vec<Option<f64>>,
    fourier_pair_residual: f64,
    h: f64,
    sigma: f64,
    edge_ratio: f64,
}

fn kernel_info(args: KernelInfoArgs) -> Result<()> {
    let k = kernel(&args.kernel)?;
    let moments = (0..=4u32)
        .map(|j| match k.kernel_moment(j, 1e-6) {
            Ok(m) => Ok(Some(m)),
            Err(Error::NonIntegrableMoment { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let report = KernelReport {
        name: k.name().to_string(),
        kind: format!("{:?}", k.kind()).to_lowercase(),
        alpha: k.alpha(),
        edge_const: k.edge_const(),
        origin_order: k.origin().map(|o| o.order),
        origin_coeff: k.origin().map(|o| o.coeff),
        tail_decay: k.tail_decay(),
        tail_amplitude: k.tail_amplitude(),
        ft_integral: k.ft_integral(),
        moments,
        fourier_pair_residual: k.fourier_pair_residual(-20.0, 20.0, 401),
        h: args.h,
        sigma: args.sigma,
        edge_ratio: edge_asymptote_ratio(&k, args.h, args.sigma)?,
    };
    let mut out = output(None)?;
    match args.format {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            writeln!(out, "kernel: {} ({})", report.name, report.kind)?;
            writeln!(out, "edge: phi(1 - s) ~ {} s^{}", report.edge_const, report.alpha)?;
            match (report.origin_order, report.origin_coeff) {
                (Some(order), Some(coeff)) => writeln!(out, "origin: order {order}, coefficient {coeff}")?,
                _ => writeln!(out, "origin: not specified")?,
            }
            writeln!(out, "tail: |k(x)| ~ {} |x|^-{}", report.tail_amplitude, report.tail_decay)?;
            writeln!(out, "integral of phi: {:.6}", report.ft_integral)?;
            for (j, m) in report.moments.iter().enumerate() {
                match m {
                    Some(m) => writeln!(out, "moment {j}: {m:.6}")?,
                    None => writeln!(out, "moment {j}: n/a")?,
                }
            }
            writeln!(out, "fourier pair residual: {:.3e}", report.fourier_pair_residual)?;
            writeln!(
                out,
                "edge asymptote ratio (h = {}, sigma = {}): {:.4}",
                report.h, report.sigma, report.edge_ratio
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AsymptoticsReport {
    n: u64,
    sigma: f64,
    p: f64,
    schedule_h: f64,
    schedule_g: f64,
    eps_n: f64,
    h: f64,
    g: f64,
    asymptotic_sd_p: f64,
    corrected_sd_p: f64,
    asymptotic_sd_f: f64,
    corrected_sd_f: f64,
}

fn asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let schedule = default_schedule(args.n, args.sigma)?;
    let (kw, kk) = (kernel(&args.kernel_w)?, kernel(&args.kernel_k)?);
    let h = args.h.unwrap_or(schedule.h);
    let g = args.g.unwrap_or(schedule.g);
    let n = usize::try_from(args.n).context("n does not fit in memory-sized integers")?;
    let report = AsymptoticsReport {
        n: args.n,
        sigma: args.sigma,
        p: args.p,
        schedule_h: schedule.h,
        schedule_g: schedule.g,
        eps_n: schedule.eps_n,
        h,
        g,
        asymptotic_sd_p: asymptotic_sd_p(g, n, args.sigma, &kk)?,
        corrected_sd_p: corrected_sd_p(g, n, args.sigma, &kk)?,
        asymptotic_sd_f: asymptotic_sd_f(h, n, args.sigma, args.p, &kw)?,
        corrected_sd_f: corrected_sd_f(h, n, args.sigma, args.p, &kw)?,
    };
    let mut out = output(None)?;
    match args.format {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            writeln!(out, "n,sigma,p,schedule_h,schedule_g,eps_n,h,g,asymptotic_sd_p,corrected_sd_p,asymptotic_sd_f,corrected_sd_f")?;
            let r = &report;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.sigma,
                r.p,
                r.schedule_h,
                r.schedule_g,
                r.eps_n,
                r.h,
                r.g,
                r.asymptotic_sd_p,
                r.corrected_sd_p,
                r.asymptotic_sd_f,
                r.corrected_sd_f
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn figure(args: FigureArgs) -> Result<()> {
    let cfg = args.preset.config();
    let sample = draw_sample(&cfg.model, cfg.n, args.seed)?;
    let (kw, kk) = (Kernel::deconv_w(), Kernel::atom_k());
    let grid_cfg = GridConfig::for_bandwidth(cfg.h, args.grid_n, atomic_deconv::numerics::DEFAULT_COVERAGE)?;
    let est = p_hat(&sample, cfg.g, args.eps, &kk)?;
    let plug_in = f_star_grid_with(&sample, cfg.h, est.p_hat, &kw, &grid_cfg)?;
    let known = f_known_p_grid(&sample, cfg.h, cfg.model.p, &kw, &grid_cfg)?;
    let family = &cfg.model.family;
    let (lo, hi) = (family.mean() - 4.0 * family.variance().sqrt(), family.mean() + 4.0 * family.variance().sqrt());
    let mut out = output(Some(&args.out))?;
    writeln!(out, "x,f_star,f_known_p,truth")?;
    for ((x, a), b) in plug_in.xs.iter().zip(&plug_in.values).zip(&known.values) {
        if *x >= lo && *x <= hi {
            writeln!(out, "{x},{a},{b},{}", family.density(*x))?;
        }
    }
    out.flush()?;
    eprintln!("p_raw = {}, p_hat = {}", est.p_raw, est.p_hat);
    Ok(())
}
