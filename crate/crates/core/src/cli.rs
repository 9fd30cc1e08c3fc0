//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::config::RunConfig;
use crate::densities::{fit_gmm, fit_rayleigh, NominalModel};
use crate::detector::{evaluate_with, CountUnit};
use crate::error::{Error, Result};
use crate::lfd::{LfdOptions, LfdSolution, LrCase, MAX_SWEEPS};
use crate::numerics::IntensityGrid;
use crate::pipeline::{build_detector, run_multiview, DetectorKind, RunReport};
use crate::raster::{BinaryMask, Raster};
use crate::synth::{generate, Roughness, SceneSpec};
use crate::training::{
    read_samples_csv, region_grow_with, split_training, SeedPoint, TrainingSets,
};
use crate::uncertainty::BandSpec;

pub const LOG_ENV: &str = "ROBUST_LRT_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "robust-lrt",
    version,
    about = "Minimax robust likelihood-ratio detection"
)]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of intensity grid points on [0, 1].
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Target false-alarm probability.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Spatial unit for false alarms and misses.
    #[arg(long, global = true, value_enum)]
    pub count_unit: Option<CountUnit>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the nominal clutter and target models.
    Fit(FitArgs),
    /// Solve for the least favorable densities.
    Lfd(LfdArgs),
    /// Detect targets on one or more views and fuse the masks.
    Detect(DetectArgs),
    /// Generate a synthetic multiview scene.
    Synth(SynthArgs),
    /// Score a fused mask against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// One-column CSV of target intensities.
    #[arg(long, requires = "clutter")]
    pub targets: Option<PathBuf>,
    /// One-column CSV of clutter intensities.
    #[arg(long, requires = "targets")]
    pub clutter: Option<PathBuf>,
    /// Labelled raster to grow target regions in.
    #[arg(long, conflicts_with_all = ["targets", "clutter"])]
    pub raster: Option<PathBuf>,
    /// Region-growing seed as `i,j`; repeatable.
    #[arg(long = "seed-point", value_parser = parse_seed)]
    pub seed_points: Vec<SeedPoint>,
    /// Mixture components for the target model.
    #[arg(long)]
    pub components: Option<usize>,
    /// Region-growing tolerance in dB.
    #[arg(long)]
    pub band_db: Option<f64>,
    /// Where to write the model JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for the extracted training sets.
    #[arg(long)]
    pub export_training: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandKindArg {
    Band,
    Outlier,
}

#[derive(Debug, Args, Default)]
pub struct BandArgs {
    /// Uncertainty model.
    #[arg(long, value_enum)]
    pub band: Option<BandKindArg>,
    /// Lower envelope factor.
    #[arg(long)]
    pub lower: Option<f64>,
    /// Upper envelope factor.
    #[arg(long)]
    pub upper: Option<f64>,
    /// Contamination ratio of the outlier model.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// L1 stopping tolerance of the fixed-point sweep.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LfdArgs {
    /// Model JSON; the built-in reference model when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub band: BandArgs,
    /// Where to write the LFD JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the `x,log_lr,case` table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Model JSON; the built-in reference model when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "robust")]
    pub detector: DetectorKind,
    #[command(flatten)]
    pub band: BandArgs,
    /// Input raster (binary or .csv); repeat once per view.
    #[arg(long = "view")]
    pub views: Vec<PathBuf>,
    /// Ground-truth mask (PGM).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Directory for per-view masks, the fused mask and the report.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clutter roughness layout for the reference scene.
    #[arg(long, value_enum, default_value = "low")]
    pub layout: Roughness,
    /// Number of views.
    #[arg(long)]
    pub views: Option<usize>,
    /// Scale factor of high-roughness clutter.
    #[arg(long)]
    pub high_factor: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub fused: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Where to write the report (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_seed(s: &str) -> std::result::Result<SeedPoint, String> {
    let (i, j) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j but got {s}"))?;
    let i = i
        .trim()
        .parse()
        .map_err(|e| format!("bad column in {s}: {e}"))?;
    let j = j
        .trim()
        .parse()
        .map_err(|e| format!("bad row in {s}: {e}"))?;
    Ok(SeedPoint::new(i, j))
}

/// Merged settings: flags over config file over defaults.
struct Settings {
    cfg: RunConfig,
}

impl Settings {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.seed = cli.seed.or(cfg.seed);
        cfg.grid_points = cli.grid_points.or(cfg.grid_points);
        cfg.alpha = cli.alpha.or(cfg.alpha);
        cfg.count_unit = cli.count_unit.or(cfg.count_unit);
        cfg.validate()?;
        Ok(Self { cfg })
    }

    fn grid(&self) -> Result<IntensityGrid> {
        IntensityGrid::unit(self.cfg.grid_points())
    }

    fn band(&self, args: &BandArgs) -> Result<BandSpec> {
        let base = self.cfg.band();
        let spec = match args.band {
            Some(BandKindArg::Outlier) => {
                BandSpec::outlier(args.epsilon.unwrap_or(base.epsilon().unwrap_or(0.4)))?
            }
            Some(BandKindArg::Band) => {
                let (l, u) = default_factors(&base);
                BandSpec::band(args.lower.unwrap_or(l), args.upper.unwrap_or(u))?
            }
            None => match base.epsilon() {
                Some(eps) => BandSpec::outlier(args.epsilon.unwrap_or(eps))?,
                None => {
                    let (l, u) = default_factors(&base);
                    BandSpec::band(args.lower.unwrap_or(l), args.upper.unwrap_or(u))?
                }
            },
        };
        Ok(spec)
    }

    fn lfd_options(&self, args: &BandArgs) -> Result<LfdOptions> {
        let delta = args.delta.unwrap_or(self.cfg.delta());
        if !(delta > 0.0) {
            return Err(Error::Input(format!("delta must be positive, got {delta}")));
        }
        Ok(LfdOptions {
            delta,
            max_sweeps: MAX_SWEEPS,
        })
    }

    fn model(&self, flag: &Option<PathBuf>) -> Result<NominalModel> {
        match flag.as_ref().or(self.cfg.paths.model.as_ref()) {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Input(format!("cannot read model {}: {e}", p.display())))?;
                NominalModel::from_json(&text)
                    .map_err(|e| Error::Input(format!("model {}: {e}", p.display())))
            }
            None => {
                info!("no model given; using the built-in reference model");
                Ok(NominalModel::reference())
            }
        }
    }
}

fn default_factors(base: &BandSpec) -> (f64, f64) {
    match base.upper_factor {
        crate::uncertainty::UpperFactor::Bounded(u) => (base.lower_factor, u),
        crate::uncertainty::UpperFactor::Unbounded => {
            let d = BandSpec::default();
            (d.lower_factor, 2.5)
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let settings = Settings::new(cli)?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(&settings, a, out),
        Command::Lfd(a) => cmd_lfd(&settings, a, out),
        Command::Detect(a) => cmd_detect(&settings, a, out),
        Command::Synth(a) => cmd_synth(&settings, a, out),
        Command::Evaluate(a) => cmd_evaluate(&settings, a, out),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn training_sets(s: &Settings, a: &FitArgs) -> Result<TrainingSets> {
    let cfg = &s.cfg;
    let targets = a.targets.as_ref().or(cfg.paths.targets.as_ref());
    let clutter = a.clutter.as_ref().or(cfg.paths.clutter.as_ref());
    let raster = a.raster.as_ref().or(cfg.paths.raster.as_ref());
    match (targets, clutter, raster) {
        (Some(t), Some(c), _) => {
            let sets = TrainingSets {
                targets: read_samples_csv(&read_text(t)?)?,
                clutter: read_samples_csv(&read_text(c)?)?,
            };
            if sets.targets.is_empty() {
                return Err(Error::Training(format!(
                    "no target samples in {}",
                    t.display()
                )));
            }
            if sets.clutter.is_empty() {
                return Err(Error::Training(format!(
                    "no clutter samples in {}",
                    c.display()
                )));
            }
            Ok(sets)
        }
        (None, None, Some(r)) => {
            let raster = Raster::load(r)?;
            let seeds = if a.seed_points.is_empty() {
                cfg.seeds.clone()
            } else {
                a.seed_points.clone()
            };
            if seeds.is_empty() {
                return Err(Error::Training(
                    "region growing needs at least one seed".into(),
                ));
            }
            let band_db = a.band_db.unwrap_or(cfg.band_db());
            let mask = region_grow_with(&raster, &seeds, band_db, cfg.db_convention())?;
            split_training(&raster, &mask)
        }
        _ => Err(Error::Input(
            "fit needs --targets and --clutter, or --raster with seeds".into(),
        )),
    }
}

fn cmd_fit(s: &Settings, a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let sets = training_sets(s, a)?;
    info!(
        "training sets: {} target and {} clutter pixels",
        sets.n_t(),
        sets.n_c()
    );
    if let Some(dir) = &a.export_training {
        std::fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        TrainingSets::write_csv(&sets.targets, &mut buf)?;
        write_file(&dir.join("targets.csv"), &buf)?;
        buf.clear();
        TrainingSets::write_csv(&sets.clutter, &mut buf)?;
        write_file(&dir.join("clutter.csv"), &buf)?;
    }
    let k = a.components.unwrap_or(s.cfg.components());
    let model = NominalModel {
        h0: fit_rayleigh(&sets.clutter)?,
        h1: fit_gmm(&sets.targets, k, s.cfg.seed())?,
    };
    let json = model.to_json()?;
    match &a.out {
        Some(p) => {
            write_file(p, format!("{json}\n").as_bytes())?;
            write!(out, "{}", model.table())?;
        }
        None => {
            writeln!(out, "{json}")?;
            eprint!("{}", model.table());
        }
    }
    Ok(())
}

fn cmd_lfd(s: &Settings, a: &LfdArgs, out: &mut dyn Write) -> Result<()> {
    let model = s.model(&a.model)?;
    let spec = s.band(&a.band)?;
    let solution = LfdSolution::from_model(&model, s.grid()?, &spec, s.lfd_options(&a.band)?)?;
    let pair = &solution.pair;
    if !pair.converged {
        warn!(
            "fixed-point sweep stopped after {} sweeps without meeting the tolerance",
            pair.iterations
        );
    }
    let lr = solution.robust_log_lr()?;
    if let Some(p) = &a.out {
        write_file(p, format!("{}\n", pair.to_json()?).as_bytes())?;
    }
    if let Some(p) = &a.csv {
        let mut buf = Vec::new();
        lr.write_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    let (lo, hi) = solution.clip_levels();
    writeln!(out, "iterations  {}", pair.iterations)?;
    writeln!(
        out,
        "a0          {:.6}  (ln a0 = {:+.4})",
        pair.a0,
        pair.a0.ln()
    )?;
    writeln!(
        out,
        "a1          {:.6}  (ln a1 = {:+.4})",
        pair.a1,
        pair.a1.ln()
    )?;
    writeln!(out, "clip levels {lo:+.4} {hi:+.4}")?;
    for case in LrCase::ALL {
        let spans = lr.case_intervals(case);
        if spans.is_empty() {
            continue;
        }
        let text: Vec<String> = spans
            .iter()
            .map(|(a, b)| format!("[{a:.4}, {b:.4}]"))
            .collect();
        writeln!(out, "{:<12}{}", case.as_str(), text.join(" "))?;
    }
    Ok(())
}

fn cmd_detect(s: &Settings, a: &DetectArgs, out: &mut dyn Write) -> Result<()> {
    let paths = if a.views.is_empty() {
        s.cfg.paths.views.clone()
    } else {
        a.views.clone()
    };
    if paths.is_empty() {
        return Err(Error::Input("detect needs at least one --view".into()));
    }
    let views = paths
        .iter()
        .map(|p| Raster::load(p))
        .collect::<Result<Vec<_>>>()?;
    for (p, v) in paths.iter().zip(&views).skip(1) {
        if (v.width(), v.height()) != (views[0].width(), views[0].height()) {
            return Err(Error::Input(format!(
                "view {} has a different size than the first view",
                p.display()
            )));
        }
    }
    let truth = match a.truth.as_ref().or(s.cfg.paths.truth.as_ref()) {
        Some(p) => {
            let t = BinaryMask::load_pgm(p)?;
            views[0].same_shape(&t)?;
            Some(t)
        }
        None => None,
    };
    let model = s.model(&a.model)?;
    let spec = build_detector(
        &model,
        s.grid()?,
        a.detector,
        &s.band(&a.band)?,
        s.cfg.alpha(),
        s.lfd_options(&a.band)?,
    )?;
    info!(
        "{:?} detector calibrated: ln gamma = {}",
        a.detector, spec.ln_gamma
    );
    let unit = s.cfg.count_unit();
    let result = run_multiview(&views, &spec, truth.as_ref(), unit)?;
    let report = RunReport::new(Some(&spec), result.report.as_ref(), unit);
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = a.out_dir.as_ref().or(s.cfg.paths.out.as_ref()) {
        std::fs::create_dir_all(dir)?;
        for (v, m) in result.masks.iter().enumerate() {
            m.save_pgm(&dir.join(format!("view_{v:02}.pgm")))?;
        }
        result.fused.save_pgm(&dir.join("fused.pgm"))?;
        write_file(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    }
    writeln!(out, "{json}")?;
    Ok(())
}

fn cmd_synth(s: &Settings, a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut scene = s
        .cfg
        .scene
        .clone()
        .unwrap_or_else(|| SceneSpec::reference(a.layout, 0));
    scene.seed = s.cfg.seed.unwrap_or(scene.seed);
    if let Some(m) = a.views {
        scene.views = m;
    }
    if let Some(f) = a.high_factor {
        scene.clutter.high_factor = f;
    }
    let (views, truth) = generate(&scene)?;
    std::fs::create_dir_all(&a.out_dir)?;
    for (v, r) in views.iter().enumerate() {
        r.save(&a.out_dir.join(format!("view_{v:02}.rlrt")))?;
    }
    truth.save_pgm(&a.out_dir.join("truth.pgm"))?;
    write_file(
        &a.out_dir.join("scene.json"),
        format!("{}\n", serde_json::to_string_pretty(&scene)?).as_bytes(),
    )?;
    writeln!(
        out,
        "wrote {} views of {}x{} and a truth mask with {} target pixels to {}",
        views.len(),
        scene.width,
        scene.height,
        truth.count_ones(),
        a.out_dir.display()
    )?;
    Ok(())
}

fn cmd_evaluate(s: &Settings, a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let fused = BinaryMask::load_pgm(&a.fused)?;
    let truth = BinaryMask::load_pgm(&a.truth)?;
    let unit = s.cfg.count_unit();
    let report = evaluate_with(&fused, &truth, unit)?;
    let json = serde_json::to_string_pretty(&RunReport::new(None, Some(&report), unit))?;
    match &a.out {
        Some(p) => write_file(p, format!("{json}\n").as_bytes())?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}
