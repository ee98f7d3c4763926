//! `depthcrypt` command line: every pipeline stage as a subcommand, plus the
//! attack bench, over binary netpbm files.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 key-file error,
//! 4 dimension or geometry mismatch, 5 I/O failure.

pub mod pnm;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use depthcrypt::analysis::{self, OcclusionMode, SuiteSpec};
use depthcrypt::{
    cgii_pickup, ciir_reconstruct, depth_convert, depth_scan, parse_key, Cipher, EiaLayout,
    ElementalImageArray, Error, KeyMaterial, PlaneImage, StageSelection,
};

use pnm::{Image, PnmError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_KEY: i32 = 3;
pub const EXIT_GEOMETRY: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "depthcrypt",
    version,
    about = "Integral-imaging image cipher with CA masking and chaotic scrambling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record an image through the pinhole array (direct EIA).
    Pickup(Io),
    /// Rewrite a direct EIA into its depth-converted form.
    ConvertDepth(Io),
    /// Reconstruct a plane image from an EIA, optionally scanning depths.
    Reconstruct(ReconstructArgs),
    /// Pickup, depth conversion, CA mask and scramble.
    Encrypt(EncryptArgs),
    /// Undo the cipher stages and reconstruct.
    Decrypt(DecryptArgs),
    /// Occlude or add noise to a cipher image.
    Attack(AttackArgs),
    /// Per-channel entropy, chi-square and optional PSNR.
    Analyze(AnalyzeArgs),
    /// Run an attack suite and write the CSV report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Io {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub key: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Raw,
    Direct,
    Converted,
}

impl From<LayoutArg> for EiaLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Raw => EiaLayout::Raw,
            LayoutArg::Direct => EiaLayout::Direct,
            LayoutArg::Converted => EiaLayout::DepthConverted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

fn open_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not a fraction strictly between 0 and 1")),
    }
}

fn scan_range(s: &str) -> Result<ScanRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("`{s}` is not START:END:STEP"));
    };
    let (start, end, step) = (positive(a)?, positive(b)?, positive(c)?);
    if end < start {
        return Err(format!("scan end {end} precedes start {start}"));
    }
    Ok(ScanRange { start, end, step })
}

fn stages(s: &str) -> Result<StageSelection, String> {
    let (mut mask, mut scramble) = (false, false);
    for part in s.split(',').map(str::trim) {
        match part {
            "mask" => mask = true,
            "scramble" => scramble = true,
            "all" => (mask, scramble) = (true, true),
            other => {
                return Err(format!(
                    "unknown stage `{other}` (expected mask, scramble or all)"
                ))
            }
        }
    }
    StageSelection::new(mask, scramble).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub io: Io,
    /// Output-plane distance in mm. Defaults to the distance the layout focuses at.
    #[arg(long, value_parser = positive)]
    pub z: Option<f64>,
    #[arg(long, value_enum, default_value_t = LayoutArg::Converted)]
    pub layout: LayoutArg,
    /// Depth scan START:END:STEP in mm; prints one CSV line per depth.
    #[arg(long, value_parser = scan_range, requires = "reference")]
    pub scan: Option<ScanRange>,
    /// Plain image to score scan depths against.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncryptArgs {
    #[command(flatten)]
    pub io: Io,
    /// Comma-separated cipher stages: mask, scramble or all.
    #[arg(long, value_parser = stages, default_value = "all")]
    pub stages: StageSelection,
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, value_parser = positive)]
    pub z: Option<f64>,
    /// Also write the recovered depth-converted EIA.
    #[arg(long, value_name = "FILE")]
    pub eia_out: Option<PathBuf>,
    #[arg(long, value_parser = stages, default_value = "all")]
    pub stages: StageSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Block,
    Random,
}

impl From<ModeArg> for OcclusionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Block => OcclusionMode::Block,
            ModeArg::Random => OcclusionMode::Random,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("kind").required(true).args(["occlude", "noise"])))]
pub struct AttackArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fraction D of the cipher to zero.
    #[arg(long, value_parser = open_fraction)]
    pub occlude: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Block)]
    pub mode: ModeArg,
    /// Strength v of the multiplicative Gaussian noise.
    #[arg(long, value_parser = non_negative)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Image to compute PSNR against.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Standard,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::Standard)]
    pub suite: SuiteArg,
    #[arg(long, value_name = "FILE")]
    pub key: PathBuf,
    /// Colour test image; repeat for several.
    #[arg(long = "image", value_name = "FILE", required = true)]
    pub images: Vec<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Occlusion pattern; `block` zeroes a band of top rows.
    #[arg(long, value_enum, default_value_t = ModeArg::Block)]
    pub occlusion_mode: ModeArg,
}

/// Failure of one invocation, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("key file {path}: {message}")]
    Key { path: PathBuf, message: String },
    #[error("{0}")]
    Geometry(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: PnmError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Key { .. } => EXIT_KEY,
            CliError::Geometry(_) => EXIT_GEOMETRY,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ParamOutOfRange(_)
            | Error::FractionOutOfRange(_)
            | Error::NoStageSelected
            | Error::NonPositiveDistance(_) => CliError::Usage(e.to_string()),
            Error::KeyParse { .. } | Error::ZeroSeed | Error::InvalidRule(_) => CliError::Key {
                path: PathBuf::new(),
                message: e.to_string(),
            },
            _ => CliError::Geometry(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(PnmError) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_key(path: &Path) -> Result<KeyMaterial, CliError> {
    let key_err = |message: String| CliError::Key {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| key_err(e.to_string()))?;
    parse_key(&text).map_err(|e| key_err(e.to_string()))
}

fn load(path: &Path) -> Result<Image, CliError> {
    pnm::read_image(path).map_err(io_err(path))
}

fn save(path: &Path, img: &Image) -> Result<(), CliError> {
    pnm::write_image(path, img).map_err(io_err(path))
}

fn check_size(img: &Image, key: &KeyMaterial, path: &Path) -> Result<(), CliError> {
    let g = &key.geometry;
    if (img.width(), img.height()) != (g.width(), g.height()) {
        return Err(CliError::Geometry(format!(
            "{} is {}x{} but the key's pinhole array needs {}x{}",
            path.display(),
            img.width(),
            img.height(),
            g.width(),
            g.height()
        )));
    }
    Ok(())
}

/// Applies `f` to every plane of `img`, keeping the image kind. The core
/// kernels parallelise internally, so planes run one after another.
fn per_plane(
    img: &Image,
    f: impl Fn(usize, &PlaneImage) -> depthcrypt::Result<PlaneImage>,
) -> Result<Image, CliError> {
    let planes = img
        .planes()
        .into_iter()
        .enumerate()
        .map(|(c, p)| f(c, p))
        .collect::<depthcrypt::Result<Vec<_>>>()?;
    Ok(Image::from_planes(planes)?)
}

fn eia_from(
    key: &KeyMaterial,
    layout: EiaLayout,
    plane: &PlaneImage,
) -> depthcrypt::Result<ElementalImageArray> {
    ElementalImageArray::new(key.geometry, layout, plane.clone())
}

fn default_depth(key: &KeyMaterial, layout: EiaLayout) -> f64 {
    match layout {
        EiaLayout::DepthConverted => key.converted_depth_mm(),
        EiaLayout::Raw | EiaLayout::Direct => key.geometry.distance_mm(),
    }
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// Executes a parsed command, writing data (tables, CSV) to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let out_err = |e: std::io::Error| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: PnmError::Io(e),
    };
    match cli.command {
        Command::Pickup(io) => {
            let key = load_key(&io.key)?;
            let img = load(&io.input)?;
            check_size(&img, &key, &io.input)?;
            let eia = per_plane(
                &img,
                |_, p| Ok(cgii_pickup(p, &key.geometry)?.into_raster()),
            )?;
            save(&io.out, &eia)
        }
        Command::ConvertDepth(io) => {
            let key = load_key(&io.key)?;
            let img = load(&io.input)?;
            check_size(&img, &key, &io.input)?;
            let conv = per_plane(&img, |_, p| {
                Ok(depth_convert(&eia_from(&key, EiaLayout::Direct, p)?)?.into_raster())
            })?;
            save(&io.out, &conv)
        }
        Command::Reconstruct(args) => {
            let key = load_key(&args.io.key)?;
            let img = load(&args.io.input)?;
            check_size(&img, &key, &args.io.input)?;
            let layout = EiaLayout::from(args.layout);
            let mut z = args.z.unwrap_or_else(|| default_depth(&key, layout));
            if let (Some(scan), Some(ref_path)) = (args.scan, &args.reference) {
                let reference = load(ref_path)?;
                if reference.planes().len() != img.planes().len() {
                    return Err(CliError::Geometry(format!(
                        "{} has {} channel(s), the EIA has {}",
                        ref_path.display(),
                        reference.planes().len(),
                        img.planes().len()
                    )));
                }
                let scans = img
                    .planes()
                    .into_iter()
                    .zip(reference.planes())
                    .map(|(p, r)| {
                        depth_scan(
                            &eia_from(&key, layout, p)?,
                            scan.start,
                            scan.end,
                            scan.step,
                            Some(r),
                        )
                    })
                    .collect::<depthcrypt::Result<Vec<_>>>()?;
                let mut table = String::from("depth_mm,channel,psnr_db\n");
                let mut best = (f64::NEG_INFINITY, z);
                for k in 0..scans[0].entries.len() {
                    let mut total = 0.0;
                    for (c, s) in scans.iter().enumerate() {
                        let e = &s.entries[k];
                        let p = e.psnr_db.expect("scored scan");
                        total += p;
                        let name = if scans.len() == 1 {
                            "Y"
                        } else {
                            analysis::CHANNEL_NAMES[c]
                        };
                        writeln!(table, "{},{name},{}", fmt_real(e.depth_mm), fmt_real(p))
                            .expect("string write");
                    }
                    if total > best.0 {
                        best = (total, scans[0].entries[k].depth_mm);
                    }
                }
                stdout.write_all(table.as_bytes()).map_err(out_err)?;
                if args.z.is_none() {
                    z = best.1;
                }
            }
            let rec = per_plane(&img, |_, p| {
                Ok(ciir_reconstruct(&eia_from(&key, layout, p)?, z)?.image)
            })?;
            save(&args.io.out, &rec)
        }
        Command::Encrypt(args) => {
            let key = load_key(&args.io.key)?;
            let img = load(&args.io.input)?;
            check_size(&img, &key, &args.io.input)?;
            let cipher = Cipher::new(&key, args.stages)?;
            let sealed = per_plane(&img, |_, p| cipher.encrypt_channel(p))?;
            save(&args.io.out, &sealed)
        }
        Command::Decrypt(args) => {
            let key = load_key(&args.io.key)?;
            let img = load(&args.io.input)?;
            check_size(&img, &key, &args.io.input)?;
            let cipher = Cipher::new(&key, args.stages)?;
            if let Some(eia_path) = &args.eia_out {
                let eia = per_plane(&img, |_, p| cipher.open(p))?;
                save(eia_path, &eia)?;
            }
            let rec = per_plane(&img, |_, p| Ok(cipher.decrypt_channel(p, args.z)?.1))?;
            save(&args.io.out, &rec)
        }
        Command::Attack(args) => {
            let img = load(&args.input)?;
            // Each channel draws from its own stream so they are not hit identically.
            let hit = per_plane(&img, |c, p| {
                let seed = args.seed.wrapping_add(c as u64);
                match (args.occlude, args.noise) {
                    (Some(d), _) => analysis::occlude(p, d, args.mode.into(), seed),
                    (None, Some(v)) => analysis::gaussian_noise(p, v, seed),
                    (None, None) => unreachable!("clap requires one attack"),
                }
            })?;
            save(&args.out, &hit)
        }
        Command::Analyze(args) => {
            let img = load(&args.input)?;
            let reference = args.reference.as_deref().map(load).transpose()?;
            if let Some(r) = &reference {
                if (r.width(), r.height(), r.planes().len())
                    != (img.width(), img.height(), img.planes().len())
                {
                    return Err(CliError::Geometry(format!(
                        "{} and {} differ in size or channel count",
                        args.input.display(),
                        args.reference.as_ref().expect("reference given").display()
                    )));
                }
            }
            let mut table = String::from("channel,entropy_bits,chi_square");
            if reference.is_some() {
                table.push_str(",psnr_db");
            }
            table.push('\n');
            for (c, p) in img.planes().into_iter().enumerate() {
                let name = if img.planes().len() == 1 {
                    "Y"
                } else {
                    analysis::CHANNEL_NAMES[c]
                };
                write!(
                    table,
                    "{name},{},{}",
                    fmt_real(analysis::entropy(p)),
                    fmt_real(analysis::chi_square_uniform(p))
                )
                .expect("string write");
                if let Some(r) = &reference {
                    write!(table, ",{}", fmt_real(analysis::psnr(r.planes()[c], p)?))
                        .expect("string write");
                }
                table.push('\n');
            }
            stdout.write_all(table.as_bytes()).map_err(out_err)
        }
        Command::Report(args) => {
            let key = load_key(&args.key)?;
            let mut spec = match args.suite {
                SuiteArg::Standard => SuiteSpec::standard(),
            };
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            spec.occlusion_mode = args.occlusion_mode.into();
            let mut report: Option<analysis::AttackReport> = None;
            for path in &args.images {
                let Image::Color(img) = load(path)? else {
                    return Err(CliError::Geometry(format!(
                        "{}: the report suite needs a colour (P6) image",
                        path.display()
                    )));
                };
                check_size(&Image::Color(img.clone()), &key, path)?;
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                let part = analysis::run_suite(&id, &img, &key, &spec)?;
                match &mut report {
                    Some(r) => r.merge(part),
                    None => report = Some(part),
                }
            }
            let csv = report.expect("at least one image").to_csv();
            match &args.out {
                Some(path) => fs::write(path, csv).map_err(|e| CliError::Io {
                    path: path.clone(),
                    source: PnmError::Io(e),
                }),
                None => stdout.write_all(csv.as_bytes()).map_err(out_err),
            }
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Diagnostics go to `stderr`, data to `stdout`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "depthcrypt: {e}");
            e.exit_code()
        }
    }
}
