use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mfspread::decompose::{
    self, calibrate_ft, DecomposeConfig, DecompositionReport, FseMethod, FseParams,
    FtCalibration, FtMethod, SurrogateMatching, SymmetryChoice, TailWindow, MIN_ENSEMBLE,
    MIN_FT_LENGTH,
};
use mfspread::mfdfa::{
    fit_hq_mode, geometric_scales, mfdfa, q_range, DataKind, FitMode, FluctuationSurface,
    HurstProfile, MfdfaConfig, DEFAULT_CROSSOVER_THRESHOLD, DEFAULT_DETREND_ORDER,
    DEFAULT_Q_STEP, DEFAULT_SCALE_COUNT, DEFAULT_S_MIN,
};
use mfspread::qgen::{self, QGaussianParams, Regime};
use mfspread::spectrum::{legendre, SingularitySpectrum};
use mfspread::surrogate::{fourier_filtered, phase_randomized, shuffle, SurrogateSpec};
use serde::{Deserialize, Serialize};

use crate::fail::{CliError, CliResult};
use crate::input::{load_values, InputArgs};
use crate::output::{sha256_hex, FileRecord, Manifest, OutputSet, PlotRecord};
use crate::plot::{Chart, Scale, Series, Style};

pub struct Context {
    pub output_dir: PathBuf,
    pub threads: usize,
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn values_text(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Formats an optional number for CSV output (empty when absent).
fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// synth

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Tsallis index in [1, 2]; 1 is the Gaussian.
    #[arg(long)]
    pub qtilde: f64,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian right half spliced to a q-Gaussian left half.
    #[arg(long)]
    pub asymmetric: bool,
    #[arg(long, default_value = "synth.csv")]
    pub out: PathBuf,
}

pub fn synth(ctx: &Context, args: SynthArgs) -> CliResult<()> {
    let (mut out, name) = OutputSet::for_file(&ctx.output_dir, &args.out)?;
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let params = if args.asymmetric {
        QGaussianParams::asymmetric(args.qtilde)?
    } else {
        QGaussianParams::new(args.qtilde)?
    };
    let x = qgen::sample(&params, args.n, args.seed)?;
    out.write_str(&name, &values_text(x.values()))?;
    out.finish(Manifest {
        subcommand: "synth".into(),
        seed: Some(args.seed),
        threads: ctx.threads,
        config: config_json(&args),
        ..Default::default()
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// surrogate

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    /// Gaussian noise with spectrum ~ f^-(2H-1) (needs --hurst, --n).
    FourierFiltered,
    /// Random permutation of --input.
    Shuffle,
    /// Random Fourier phases with the amplitudes of --input.
    PhaseRandomized,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SurrogateArgs {
    #[arg(long, value_enum, default_value_t = KindArg::FourierFiltered)]
    pub kind: KindArg,
    /// Target Hurst exponent in (0, 1.5).
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Template series for shuffle and phase randomization.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "surrogate.csv")]
    pub out: PathBuf,
}

pub fn surrogate(ctx: &Context, args: SurrogateArgs) -> CliResult<()> {
    let (mut out, name) = OutputSet::for_file(&ctx.output_dir, &args.out)?;
    let mut inputs = Vec::new();
    let series = match args.kind {
        KindArg::FourierFiltered => {
            let (Some(h), Some(n)) = (args.hurst, args.n) else {
                return Err(CliError::usage("fourier-filtered needs --hurst and --n"));
            };
            if args.input.is_some() {
                return Err(CliError::usage("fourier-filtered takes no --input"));
            }
            fourier_filtered(&SurrogateSpec::fourier_filtered(h, n, args.seed))?
        }
        KindArg::Shuffle | KindArg::PhaseRandomized => {
            let Some(path) = &args.input else {
                return Err(CliError::usage("--input is required for this kind"));
            };
            if args.hurst.is_some() || args.n.is_some() {
                return Err(CliError::usage("--hurst and --n apply to fourier-filtered only"));
            }
            let (template, rec) = load_values(path)?;
            inputs.push(rec);
            if args.kind == KindArg::Shuffle {
                shuffle(&template, args.seed)?
            } else {
                phase_randomized(template.values(), args.seed)?
            }
        }
    };
    out.write_str(&name, &values_text(series.values()))?;
    out.finish(Manifest {
        subcommand: "surrogate".into(),
        seed: Some(args.seed),
        threads: ctx.threads,
        config: config_json(&args),
        inputs,
        ..Default::default()
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// MFDFA options shared by analyze, calibrate and decompose

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindOfData {
    /// Largest scale M/10.
    Empirical,
    /// Largest scale M/20.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitArg {
    /// All scales in [s-min, s-max].
    Full,
    /// Per q, only the scales above the detected crossover.
    Crossover,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MfdfaArgs {
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub q_min: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub q_max: f64,
    #[arg(long, default_value_t = DEFAULT_Q_STEP)]
    pub q_step: f64,
    #[arg(long, default_value_t = DEFAULT_S_MIN)]
    pub s_min: usize,
    /// Defaults to M/10 (empirical) or M/20 (synthetic).
    #[arg(long)]
    pub s_max: Option<usize>,
    /// Number of geometrically spaced scales.
    #[arg(long, default_value_t = DEFAULT_SCALE_COUNT)]
    pub scales: usize,
    #[arg(long, default_value_t = DEFAULT_DETREND_ORDER)]
    pub detrend_order: usize,
    #[arg(long, value_enum, default_value_t = KindOfData::Empirical)]
    pub data_kind: KindOfData,
    #[arg(long, value_enum, default_value_t = FitArg::Full)]
    pub fit_mode: FitArg,
    /// Slope change that counts as a crossover.
    #[arg(long, default_value_t = DEFAULT_CROSSOVER_THRESHOLD)]
    pub crossover_threshold: f64,
}

impl MfdfaArgs {
    fn kind(&self) -> DataKind {
        match self.data_kind {
            KindOfData::Empirical => DataKind::Empirical,
            KindOfData::Synthetic => DataKind::Synthetic,
        }
    }

    pub fn fit_mode(&self) -> CliResult<FitMode> {
        match self.fit_mode {
            FitArg::Full => Ok(FitMode::Full),
            FitArg::Crossover => {
                if !(self.crossover_threshold > 0.0 && self.crossover_threshold.is_finite()) {
                    return Err(CliError::usage("--crossover-threshold must be positive"));
                }
                Ok(FitMode::AboveCrossover {
                    threshold: self.crossover_threshold,
                })
            }
        }
    }

    /// Builds and checks the configuration for a series of `len` points.
    pub fn config(&self, len: usize) -> CliResult<MfdfaConfig> {
        if !(self.q_step > 0.0) {
            return Err(CliError::usage("--q-step must be positive"));
        }
        if self.scales < 4 {
            return Err(CliError::usage("--scales must be at least 4"));
        }
        let s_max = self.s_max.unwrap_or_else(|| self.kind().default_s_max(len));
        if s_max > len {
            return Err(CliError::usage(format!(
                "--s-max {s_max} exceeds the series length {len}"
            )));
        }
        if self.s_min > s_max {
            return Err(CliError::usage(format!(
                "s-min {} exceeds s-max {s_max} (series of length {len})",
                self.s_min
            )));
        }
        let q = q_range(self.q_min, self.q_max, self.q_step)?;
        let s = geometric_scales(self.s_min, s_max, self.scales)?;
        if s.len() < 4 {
            return Err(CliError::usage(format!(
                "only {} distinct scales in [{}, {s_max}]; at least 4 are needed",
                s.len(),
                self.s_min
            )));
        }
        Ok(MfdfaConfig::new(q, s, self.detrend_order, self.s_min, s_max)?)
    }
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mfdfa: MfdfaArgs,
    /// Directory (inside --output-dir) for the result files.
    #[arg(long, default_value = ".")]
    pub out_prefix: PathBuf,
}

fn surface_csv(surface: &FluctuationSurface) -> String {
    let mut out = String::from("s,q,F\n");
    for (j, s) in surface.s_grid().iter().enumerate() {
        for (i, q) in surface.q_grid().iter().enumerate() {
            let _ = writeln!(out, "{s},{q},{}", surface.values[i][j]);
        }
    }
    out
}

fn hq_csv(p: &HurstProfile) -> String {
    let mut out = String::from("q,h,stderr,r2,ci95,fit_from\n");
    for i in 0..p.q.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.q[i], p.h[i], p.stderr[i], p.r2[i], p.ci95[i], p.fit_from[i]
        );
    }
    out
}

fn spectrum_csv(s: &SingularitySpectrum) -> String {
    let mut out = String::from("q,tau,alpha,f\n");
    for i in 0..s.q.len() {
        let _ = writeln!(out, "{},{},{},{}", s.q[i], s.tau[i], s.alpha[i], s.f_alpha[i]);
    }
    out
}

fn hq_chart(p: &HurstProfile) -> Chart {
    let points = p.q.iter().copied().zip(p.h.iter().copied()).collect();
    Chart {
        title: "Generalized Hurst exponent".into(),
        x_label: "q".into(),
        y_label: "h(q)".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series: vec![Series::new("h(q)", points, Style::LineMarkers).with_errors(p.ci95.clone())],
    }
}

fn fq_chart(surface: &FluctuationSurface) -> Chart {
    let n = surface.q_grid().len();
    let mut picks: Vec<usize> = (0..7).map(|k| (k * (n - 1) + 3) / 6).collect();
    picks.dedup();
    let series = picks
        .into_iter()
        .map(|i| {
            let pts = surface
                .s_grid()
                .iter()
                .zip(surface.row(i))
                .map(|(&s, &f)| (s as f64, f))
                .collect();
            Series::new(format!("q = {}", surface.q_grid()[i]), pts, Style::Line)
        })
        .collect();
    Chart {
        title: "Fluctuation functions".into(),
        x_label: "s".into(),
        y_label: "F_q(s)".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series,
    }
}

fn falpha_chart(s: &SingularitySpectrum) -> Chart {
    let (points, style) = if s.delta_alpha.abs() < 1e-9 {
        let m = s.alpha.len() as f64;
        let centre = (
            s.alpha.iter().sum::<f64>() / m,
            s.f_alpha.iter().sum::<f64>() / m,
        );
        (vec![centre], Style::Markers)
    } else {
        let pts = s.alpha.iter().copied().zip(s.f_alpha.iter().copied()).collect();
        (pts, Style::LineMarkers)
    };
    Chart {
        title: "Singularity spectrum".into(),
        x_label: "alpha".into(),
        y_label: "f(alpha)".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series: vec![Series::new("f(alpha)", points, style)],
    }
}

fn write_chart(out: &mut OutputSet, plots: &mut Vec<PlotRecord>, name: &str, chart: &Chart) -> CliResult<()> {
    let r = chart.render();
    out.write_str(name, &r.svg)?;
    plots.push(PlotRecord {
        file: name.into(),
        dropped_points: r.dropped,
    });
    Ok(())
}

pub fn analyze(ctx: &Context, args: AnalyzeArgs) -> CliResult<()> {
    let mut out = OutputSet::new(&ctx.output_dir, &args.out_prefix)?;
    let fit_mode = args.mfdfa.fit_mode()?;
    let loaded = args.input.load()?;
    let x = loaded.returns.values();
    let cfg = args.mfdfa.config(x.len())?;
    let surface = mfdfa(x, &cfg)?;
    let profile = fit_hq_mode(&surface, fit_mode)?;
    let mut warnings = Vec::new();
    let mut plots = Vec::new();
    out.write_str("surface.csv", &surface_csv(&surface))?;
    out.write_str("hq.csv", &hq_csv(&profile))?;
    write_chart(&mut out, &mut plots, "hq.svg", &hq_chart(&profile))?;
    write_chart(&mut out, &mut plots, "fq.svg", &fq_chart(&surface))?;
    match legendre(&profile) {
        Ok(spec) => {
            if spec.folded {
                warnings.push("singularity spectrum folds back".to_string());
            }
            out.write_str("spectrum.csv", &spectrum_csv(&spec))?;
            write_chart(&mut out, &mut plots, "falpha.svg", &falpha_chart(&spec))?;
        }
        Err(e) => warnings.push(format!("no singularity spectrum: {e}")),
    }
    out.finish(Manifest {
        subcommand: "analyze".into(),
        seed: None,
        threads: ctx.threads,
        config: config_json(&args),
        inputs: loaded.files,
        warnings,
        plots,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSides {
    Both,
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Comma-separated Tsallis indices in (1, 2]; both regimes are needed.
    #[arg(long, value_delimiter = ',', default_value = "1.05,1.2,1.4,1.6,1.7,1.8,1.9,2")]
    pub qtilde: Vec<f64>,
    #[arg(long, value_enum, default_value_t = TailSides::Both)]
    pub sides: TailSides,
    /// Length of each synthetic series.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub ensemble: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub mfdfa: MfdfaArgs,
    #[arg(long, default_value = "calibration.csv")]
    pub out: PathBuf,
}

pub fn calibrate(ctx: &Context, args: CalibrateArgs) -> CliResult<()> {
    let (mut out, name) = OutputSet::for_file(&ctx.output_dir, &args.out)?;
    if args.n < MIN_FT_LENGTH {
        return Err(CliError::usage(format!("--n must be at least {MIN_FT_LENGTH}")));
    }
    if args.ensemble < MIN_ENSEMBLE {
        return Err(CliError::usage(format!("--ensemble must be at least {MIN_ENSEMBLE}")));
    }
    for &q in &args.qtilde {
        qgen::beta_from_qtilde(q)?;
    }
    let regimes: Vec<Regime> = args.qtilde.iter().map(|&q| Regime::of(q)).collect();
    if !(regimes.contains(&Regime::Gaussian) && regimes.contains(&Regime::Levy)) {
        return Err(CliError::usage(
            "--qtilde must include values from both regimes (below and above 5/3)",
        ));
    }
    let mut mfdfa_args = args.mfdfa.clone();
    if mfdfa_args.q_max < 15.0 {
        mfdfa_args.q_max = 15.0;
    }
    if mfdfa_args.q_min > -15.0 {
        mfdfa_args.q_min = -15.0;
    }
    let cfg = mfdfa_args.config(args.n)?;
    let fit_mode = args.mfdfa.fit_mode()?;
    let sides: &[bool] = match args.sides {
        TailSides::Both => &[true, false],
        TailSides::Symmetric => &[true],
        TailSides::Asymmetric => &[false],
    };
    let cases: Vec<(f64, bool)> = sides
        .iter()
        .flat_map(|&s| args.qtilde.iter().map(move |&q| (q, s)))
        .collect();
    let cal = calibrate_ft(&cases, args.n, &cfg, fit_mode, args.ensemble, args.seed)?;
    let mut csv = Vec::new();
    cal.to_csv(&mut csv)?;
    out.write(&name, &csv)?;
    out.finish(Manifest {
        subcommand: "calibrate".into(),
        seed: Some(args.seed),
        threads: ctx.threads,
        config: serde_json::json!({
            "args": config_json(&args),
            "q_grid": [cfg.q_grid.first(), cfg.q_grid.last()],
            "provenance": cal.provenance,
        }),
        ..Default::default()
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// decompose

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Formula,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingArg {
    Hurst,
    FullSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryArg {
    Auto,
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mfdfa: MfdfaArgs,
    /// Method for both components; --fse-method / --ft-method override it.
    #[arg(long, value_enum)]
    pub mode: Option<MethodArg>,
    /// Finite-size component (default: montecarlo).
    #[arg(long, value_enum)]
    pub fse_method: Option<MethodArg>,
    /// Fat-tail component (default: formula, i.e. the calibrated power law).
    #[arg(long, value_enum)]
    pub ft_method: Option<MethodArg>,
    /// `key = value` file with C1, C0, C, eta1, eta0, nu, Q.
    #[arg(long)]
    pub fse_params: Option<PathBuf>,
    /// Calibration CSV replacing the built-in table.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub allow_extrapolation: bool,
    /// Members of each Monte-Carlo ensemble.
    #[arg(long, default_value_t = 10)]
    pub ensemble: usize,
    /// Length of the fat-tail Monte-Carlo series (default max(M, 10^6)).
    #[arg(long)]
    pub ft_length: Option<usize>,
    #[arg(long, value_enum, default_value_t = MatchingArg::Hurst)]
    pub matching: MatchingArg,
    #[arg(long, value_enum, default_value_t = SymmetryArg::Auto)]
    pub symmetry: SymmetryArg,
    /// Tail exponent; fitted from the input when absent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fraction of the largest |x| used by the tail fit.
    #[arg(long, default_value_t = 0.02)]
    pub tail_fraction: f64,
    /// Largest order statistics left out of the tail fit.
    #[arg(long, default_value_t = 10)]
    pub tail_skip: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    pub ci95: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub delta_alpha: f64,
    pub folded: bool,
}

/// Layout of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub generator: String,
    #[serde(flatten)]
    pub report: DecompositionReport,
    pub profile: ProfileSummary,
    pub spectrum: Option<SpectrumSummary>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn read_text(path: &Path) -> CliResult<(String, FileRecord)> {
    let bytes =
        fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let rec = FileRecord {
        path: path.display().to_string(),
        bytes: bytes.len(),
        sha256: sha256_hex(&bytes),
    };
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))?;
    Ok((text, rec))
}

impl DecomposeArgs {
    /// Everything that can be checked without touching the input series.
    fn build(&self, inputs: &mut Vec<FileRecord>) -> CliResult<(FseMethod, FtMethod, TailWindow)> {
        let fse_m = self.fse_method.or(self.mode).unwrap_or(MethodArg::Montecarlo);
        let ft_m = self.ft_method.or(self.mode).unwrap_or(MethodArg::Formula);
        let uses_mc = fse_m == MethodArg::Montecarlo || ft_m == MethodArg::Montecarlo;
        if uses_mc && self.ensemble < MIN_ENSEMBLE {
            return Err(CliError::usage(format!("--ensemble must be at least {MIN_ENSEMBLE}")));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::usage("--beta must be positive"));
            }
        }
        if let Some(l) = self.ft_length {
            if l < MIN_FT_LENGTH {
                return Err(CliError::usage(format!("--ft-length must be at least {MIN_FT_LENGTH}")));
            }
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(CliError::usage("--tail-fraction must be in (0, 1]"));
        }
        let fse = match fse_m {
            MethodArg::Formula => {
                let Some(path) = &self.fse_params else {
                    return Err(mfspread::Error::FseParamsUnset(
                        "the formula method needs --fse-params".into(),
                    )
                    .into());
                };
                let (text, rec) = read_text(path)?;
                inputs.push(rec);
                FseMethod::Formula {
                    params: FseParams::from_toml(&text)?,
                }
            }
            MethodArg::Montecarlo => FseMethod::MonteCarlo {
                ensemble: self.ensemble,
                matching: match self.matching {
                    MatchingArg::Hurst => SurrogateMatching::Hurst,
                    MatchingArg::FullSpectrum => SurrogateMatching::FullSpectrum,
                },
            },
        };
        let ft = match ft_m {
            MethodArg::Formula => {
                let calibration = match &self.calibration {
                    Some(path) => {
                        let (text, rec) = read_text(path)?;
                        inputs.push(rec);
                        FtCalibration::from_csv(text.as_bytes(), format!("file {}", path.display()))?
                    }
                    None => FtCalibration::builtin(),
                };
                FtMethod::PowerLaw {
                    calibration,
                    allow_extrapolation: self.allow_extrapolation,
                }
            }
            MethodArg::Montecarlo => FtMethod::MonteCarlo {
                ensemble: self.ensemble,
                length: self.ft_length,
            },
        };
        let window = TailWindow {
            fraction: self.tail_fraction,
            skip_largest: self.tail_skip,
        };
        Ok((fse, ft, window))
    }
}

fn decomposition_csv(report: &DecompositionReport) -> String {
    let mut out = String::from(
        "q,delta_h,delta_h_ci95,delta_h_fse,delta_h_fse_ci95,delta_h_ft,delta_h_ft_ci95,\
         delta_h_nl,delta_h_nl_clipped,delta_h_nl_ci95,delta_h_realization_ci95\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.q,
            r.delta_h,
            r.delta_h_ci95,
            r.delta_h_fse,
            opt(r.delta_h_fse_ci95),
            r.delta_h_ft,
            opt(r.delta_h_ft_ci95),
            r.delta_h_nl,
            r.delta_h_nl_clipped,
            r.delta_h_nl_ci95,
            opt(r.delta_h_realization_ci95),
        );
    }
    out
}

fn decomposition_chart(report: &DecompositionReport) -> Chart {
    let pick = |f: &dyn Fn(&decompose::DecompositionRow) -> f64| -> Vec<(f64, f64)> {
        report.rows.iter().map(|r| (r.q, f(r))).collect()
    };
    Chart {
        title: "Spread decomposition".into(),
        x_label: "q".into(),
        y_label: "spread".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Log,
        series: vec![
            Series::new("Δh", pick(&|r| r.delta_h), Style::LineMarkers),
            Series::new("Δh FSE", pick(&|r| r.delta_h_fse), Style::LineMarkers),
            Series::new("Δh FT", pick(&|r| r.delta_h_ft), Style::LineMarkers),
            Series::new("Δh NL", pick(&|r| r.delta_h_nl), Style::LineMarkers),
        ],
    }
}

pub fn decompose(ctx: &Context, args: DecomposeArgs) -> CliResult<()> {
    let mut out = OutputSet::new(&ctx.output_dir, &args.out_prefix)?;
    let fit_mode = args.mfdfa.fit_mode()?;
    args.input.validate()?;
    let mut inputs = Vec::new();
    let (fse, ft, tail_window) = args.build(&mut inputs)?;
    let loaded = args.input.load()?;
    inputs.splice(0..0, loaded.files);
    let returns = loaded.returns;
    let mfdfa_cfg = args.mfdfa.config(returns.len())?;
    let q_grid = mfdfa_cfg.q_grid.clone();
    let cfg = DecomposeConfig {
        mfdfa: mfdfa_cfg,
        fit_mode,
        fse,
        ft,
        symmetry: match args.symmetry {
            SymmetryArg::Auto => SymmetryChoice::Auto,
            SymmetryArg::Symmetric => SymmetryChoice::Symmetric,
            SymmetryArg::Asymmetric => SymmetryChoice::Asymmetric,
        },
        beta: args.beta,
        tail_window,
        seed: args.seed,
    };
    let (report, profile) = decompose::decompose(&returns, &cfg)?;
    let spectrum = legendre(&profile).ok().map(|s| SpectrumSummary {
        alpha_min: s.alpha_min,
        alpha_max: s.alpha_max,
        delta_alpha: s.delta_alpha,
        folded: s.folded,
    });
    let file = ReportFile {
        schema_version: REPORT_SCHEMA_VERSION,
        generator: format!("mfspread {}", env!("CARGO_PKG_VERSION")),
        report,
        profile: ProfileSummary {
            q: q_grid,
            h: profile.h.clone(),
            ci95: profile.ci95.clone(),
        },
        spectrum,
    };
    let mut plots = Vec::new();
    out.write_json("report.json", &file)?;
    out.write_str("decomposition.csv", &decomposition_csv(&file.report))?;
    out.write_str("hq.csv", &hq_csv(&profile))?;
    write_chart(&mut out, &mut plots, "decomposition.svg", &decomposition_chart(&file.report))?;
    out.finish(Manifest {
        subcommand: "decompose".into(),
        seed: Some(args.seed),
        threads: ctx.threads,
        config: config_json(&args),
        inputs,
        warnings: file.report.warnings.clone(),
        plots,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// A report.json written by `decompose`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_prefix: PathBuf,
}

fn summary_markdown(f: &ReportFile) -> String {
    let r = &f.report;
    let i = &r.inputs;
    let mut out = String::new();
    let _ = writeln!(out, "# Spread decomposition: {}\n", i.source_label);
    let _ = writeln!(out, "- length M = {}, lag {} s, tick {} s", i.length, i.lag, i.tick);
    let _ = writeln!(out, "- H = h(2) = {:.4} ± {:.4}", i.hurst, i.hurst_ci95);
    let beta_src = if i.beta_supplied { "supplied" } else { "fitted" };
    match i.beta_ci {
        Some((lo, hi)) => {
            let _ = writeln!(out, "- β = {:.3} ({beta_src}, 95% [{lo:.3}, {hi:.3}])", i.beta);
        }
        None => {
            let _ = writeln!(out, "- β = {:.3} ({beta_src})", i.beta);
        }
    }
    let _ = writeln!(
        out,
        "- tails: {}, FSE: {:?}, FT: {:?}",
        if i.symmetric { "symmetric" } else { "asymmetric" },
        r.fse_method,
        r.ft_method
    );
    if let Some(s) = &f.spectrum {
        let _ = writeln!(
            out,
            "- α range [{:.4}, {:.4}], Δα = {:.4}",
            s.alpha_min, s.alpha_max, s.delta_alpha
        );
    }
    for w in &r.warnings {
        let _ = writeln!(out, "- warning: {w}");
    }
    let _ = writeln!(out, "\n| q | Δh | Δh FSE | Δh FT | Δh NL | NL 95% |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for row in &r.rows {
        let _ = writeln!(
            out,
            "| {} | {:.4} | {:.4} | {:.4} | {:.4} | ±{:.4} |",
            row.q, row.delta_h, row.delta_h_fse, row.delta_h_ft, row.delta_h_nl, row.delta_h_nl_ci95
        );
    }
    out
}

pub fn report(ctx: &Context, args: ReportArgs) -> CliResult<()> {
    let mut out = OutputSet::new(&ctx.output_dir, &args.out_prefix)?;
    let (text, rec) = read_text(&args.input)?;
    let file: ReportFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: not a report: {e}", args.input.display())))?;
    if file.schema_version != REPORT_SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "report schema version {} is not supported",
            file.schema_version
        )));
    }
    let mut plots = Vec::new();
    out.write_str("summary.md", &summary_markdown(&file))?;
    write_chart(&mut out, &mut plots, "decomposition.svg", &decomposition_chart(&file.report))?;
    out.finish(Manifest {
        subcommand: "report".into(),
        seed: None,
        threads: ctx.threads,
        config: config_json(&args),
        inputs: vec![rec],
        warnings: Vec::new(),
        plots,
    })?;
    Ok(())
}
