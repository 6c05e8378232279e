//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or configuration error,
//! 3 data error.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fusion::{
    decode_request, encode_response, synthesize_case, synthesize_case_with, SubprocessGenerator, SynthesisConfig,
};
use crate::mesh::synthesize_lesion_mask;
use crate::metrics::{case_metrics, cohort_summary, pho, po, write_cases_csv, CaseRow};
use crate::prior::{build_prior, PriorMode, SpatialPrior, DEFAULT_GRID};
use crate::rng::derive_seed;
use crate::volume::{load_float, load_hu, load_mask, save_mhd, Mask3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Every tunable parameter. All keys are required in a config file; print a
/// complete one with `--dump-defaults`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub synthesis: SynthesisConfig,
    pub prior: PriorConfig,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub grid_dims: [usize; 3],
    pub mode: PriorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Lesion voxels at or above this HU count as high opacity.
    pub high_opacity_hu: i16,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            synthesis: SynthesisConfig::default(),
            prior: PriorConfig {
                grid_dims: DEFAULT_GRID,
                mode: PriorMode::FullMask,
            },
            metrics: MetricsConfig {
                high_opacity_hu: crate::metrics::HIGH_OPACITY_HU,
            },
        }
    }
}

impl Config {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        config.synthesis.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(config)
    }

    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| CliError::usage(format!("{}: {}", p.display(), e.message)))
            }
        }
    }
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) => EXIT_USAGE,
            Error::Generator(_) => EXIT_INTERNAL,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lesion-synth", version, about = "Synthetic lesion masks and lesion inpainting for chest CT")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Print a complete default configuration and exit.
    #[arg(long)]
    pub dump_defaults: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voxelize one random lesion shape.
    SynthMask(SynthMaskArgs),
    /// Build a spatial prior from a manifest of lesion/lung mask pairs.
    BuildPrior(BuildPriorArgs),
    /// Synthesize abnormal scans from a control scan.
    Inpaint(InpaintArgs),
    /// Per-case metrics and a cohort summary.
    Metrics(MetricsArgs),
    /// Echo generator for protocol testing: reads one request on stdin, answers with its samples.
    #[command(hide = true)]
    IdentityGenerator,
}

#[derive(Debug, Args)]
pub struct SynthMaskArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output MetaImage header (.mhd).
    #[arg(long)]
    pub out: PathBuf,
    /// Voxel spacing in mm, `sx,sy,sz`.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
    pub spacing: Vec<f64>,
    /// Also write the smoothed mesh as ASCII STL.
    #[arg(long)]
    pub stl: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildPriorArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tab-separated `lesion.mhd<TAB>lung.mhd` per line; relative paths are
    /// resolved against the manifest directory; `#` starts a comment.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub control: PathBuf,
    #[arg(long)]
    pub lung: PathBuf,
    #[arg(long)]
    pub prior: PathBuf,
    #[arg(long)]
    pub out_volume: PathBuf,
    #[arg(long)]
    pub out_mask: PathBuf,
    /// Number of lesions per case.
    #[arg(long, default_value_t = 3)]
    pub lesions: usize,
    /// Variants per control; outputs get a `_rep<i>` suffix when above 1.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// External generator command line, run once per window.
    #[arg(long)]
    pub generator_cmd: Option<String>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub lung: PathBuf,
    #[arg(long)]
    pub volume: PathBuf,
    /// Per-case CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Cohort JSON summary (default: the CSV path with a .json extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.dump_defaults {
        print!("{}", Config::default().to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::usage("no subcommand given (see --help)"));
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // Fails only if a pool already exists, which keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match command {
        Command::SynthMask(a) => cmd_synth_mask(&a, cli.seed),
        Command::BuildPrior(a) => cmd_build_prior(&a),
        Command::Inpaint(a) => cmd_inpaint(&a, cli.seed),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::IdentityGenerator => identity_generator(),
    }
}

pub fn cmd_synth_mask(args: &SynthMaskArgs, seed: u64) -> Result<(), CliError> {
    let config = Config::load(args.config.as_deref())?;
    let spacing: [f64; 3] = args
        .spacing
        .clone()
        .try_into()
        .map_err(|_| CliError::usage("--spacing takes three values"))?;
    let shape = crate::mesh::LesionShapeParams {
        rng_seed: seed,
        ..config.synthesis.shape
    };
    let padding = config.synthesis.assembly.padding_mm;
    let mask = synthesize_lesion_mask(&shape, spacing, padding)?;
    save_mhd(&mask, &args.out)?;
    if let Some(stl) = &args.stl {
        let mesh = crate::mesh::synthesize_shape(&shape)?;
        let mut file = fs::File::create(stl).map_err(|e| Error::io(stl, e))?;
        crate::mesh::write_ascii_stl(&mesh, "lesion", &mut file).map_err(|e| Error::io(stl, e))?;
    }
    eprintln!("wrote {} ({} voxels)", args.out.display(), mask.count());
    Ok(())
}

/// Parsed manifest entries with their 1-based line numbers.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<(usize, PathBuf, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(CliError::usage(format!(
                "manifest line {}: expected `lesion<TAB>lung`",
                i + 1
            )));
        }
        let resolve = |f: &str| {
            let p = PathBuf::from(f.trim());
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        out.push((i + 1, resolve(fields[0]), resolve(fields[1])));
    }
    if out.is_empty() {
        return Err(CliError::usage("manifest lists no cases"));
    }
    Ok(out)
}

pub fn cmd_build_prior(args: &BuildPriorArgs) -> Result<(), CliError> {
    let config = Config::load(args.config.as_deref())?;
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", args.manifest.display())))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, base)?;
    let cases: Vec<(Mask3, Mask3)> = entries
        .par_iter()
        .map(|(line, lesion, lung)| {
            let load = || -> crate::Result<(Mask3, Mask3)> {
                let lesion = load_mask(lesion)?;
                let lung = load_mask(lung)?;
                lesion.geometry().ensure_matches(lung.geometry(), "lesion vs lung")?;
                Ok((lesion, lung))
            };
            load().map_err(|e| CliError::data(format!("manifest line {line}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let prior = build_prior(&cases, config.prior.grid_dims, config.prior.mode)?;
    save_mhd(&prior.to_grid(), &args.out)?;
    eprintln!("wrote {} from {} cases", args.out.display(), cases.len());
    Ok(())
}

/// `out.mhd` -> `out_rep2.mhd`.
pub fn repeat_path(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_rep{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_rep{index}"),
    };
    path.with_file_name(name)
}

pub fn cmd_inpaint(args: &InpaintArgs, seed: u64) -> Result<(), CliError> {
    let config = Config::load(args.config.as_deref())?;
    if args.repeat == 0 {
        return Err(CliError::usage("--repeat must be at least 1"));
    }
    let control = load_hu(&args.control)?;
    let lung = load_mask(&args.lung)?;
    control.geometry().ensure_matches(lung.geometry(), "control vs lung")?;
    let prior = SpatialPrior::from_grid(&load_float(&args.prior)?)?;
    let generator = match &args.generator_cmd {
        None => None,
        Some(cmd) => {
            let mut parts = cmd.split_whitespace().map(str::to_owned);
            let program = parts.next().ok_or_else(|| CliError::usage("empty --generator-cmd"))?;
            Some(SubprocessGenerator::new(program, parts.collect()))
        }
    };

    (0..args.repeat)
        .into_par_iter()
        .map(|i| -> Result<(), CliError> {
            let case_seed = if args.repeat == 1 { seed } else { derive_seed(seed, i as u64) };
            let out = match &generator {
                None => synthesize_case(&control, &lung, &prior, &config.synthesis, args.lesions, case_seed)?,
                Some(g) => synthesize_case_with(&control, &lung, &prior, &config.synthesis, args.lesions, case_seed, g)?,
            };
            let (vol_path, mask_path) = if args.repeat == 1 {
                (args.out_volume.clone(), args.out_mask.clone())
            } else {
                (repeat_path(&args.out_volume, i), repeat_path(&args.out_mask, i))
            };
            save_mhd(&out.volume, &vol_path)?;
            save_mhd(&out.mask, &mask_path)?;
            eprintln!("wrote {} ({} lesion voxels)", vol_path.display(), out.mask.count());
            Ok(())
        })
        .collect::<Result<Vec<()>, _>>()?;
    Ok(())
}

fn case_ids(dir: &Path) -> Result<BTreeSet<String>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut ids = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mhd")) {
            if let Some(stem) = path.file_stem() {
                ids.insert(stem.to_string_lossy().into_owned());
            }
        }
    }
    Ok(ids)
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<(), CliError> {
    let config = Config::load(args.config.as_deref())?;
    let threshold = config.metrics.high_opacity_hu;
    let dirs = [&args.pred, &args.gt, &args.lung, &args.volume];
    let sets = dirs.iter().map(|d| case_ids(d)).collect::<Result<Vec<_>, _>>()?;
    let all: BTreeSet<&String> = sets.iter().flatten().collect();
    let common: Vec<String> = all
        .iter()
        .filter(|id| sets.iter().all(|s| s.contains(**id)))
        .map(|id| (*id).clone())
        .collect();
    for id in all.iter().filter(|id| !common.contains(id)) {
        eprintln!("skipping {id}: not present in every directory");
    }
    if common.is_empty() {
        return Err(CliError::data("no case id is present in all four directories"));
    }

    let rows: Vec<CaseRow> = common
        .par_iter()
        .map(|id| -> Result<CaseRow, CliError> {
            let file = |d: &Path| d.join(format!("{id}.mhd"));
            let load = || -> crate::Result<CaseRow> {
                let pred = load_mask(file(&args.pred))?;
                let gt = load_mask(file(&args.gt))?;
                let lung = load_mask(file(&args.lung))?;
                let volume = load_hu(file(&args.volume))?;
                let m = case_metrics(&pred, &gt, &lung, &volume, threshold)?;
                Ok(CaseRow {
                    id: id.clone(),
                    dsc: m.dsc,
                    po_pred: m.po,
                    po_gt: po(&gt, &lung)?,
                    pho_pred: m.pho,
                    pho_gt: pho(&gt, &volume, &lung, threshold)?,
                    lir: m.lir,
                })
            };
            load().map_err(|e| CliError::data(format!("case {id}: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let csv = fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_cases_csv(&rows, std::io::BufWriter::new(csv))?;
    let summary_path = args.summary.clone().unwrap_or_else(|| args.out.with_extension("json"));
    let json = serde_json::to_string_pretty(&cohort_summary(&rows)).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    eprintln!("wrote {} and {} ({} cases)", args.out.display(), summary_path.display(), rows.len());
    Ok(())
}

fn identity_generator() -> Result<(), CliError> {
    let mut request = Vec::new();
    std::io::stdin()
        .read_to_end(&mut request)
        .map_err(|e| CliError::data(format!("reading stdin: {e}")))?;
    let (dims, samples, _mask) = decode_request(&request)?;
    let response = encode_response(dims, &samples)?;
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(&response)
        .and_then(|_| stdout.flush())
        .map_err(|e| CliError::data(format!("writing stdout: {e}")))
}
