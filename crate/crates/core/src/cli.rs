//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error or invalid state,
//! 3 configuration error, 4 post-selection probability vanishes (exp1),
//! 5 degenerate calibration design.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::calibration::Outcome;
use crate::config::{resolve_state, FileConfig, StateSpec};
use crate::error::Error;
use crate::pipeline::{Experiment, Mode, SweepPath, SweepRow};
use crate::pointer::Projector;
use crate::qstate::{density_of, jones_output, stokes, trace_distance, Ket, Mat2, StokesVector};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_POSTSELECTION: i32 = 4;
pub const EXIT_DEGENERATE: i32 = 5;

const SWEEP_COLUMNS_HELP: &str = "\
CSV columns, one row per half-wave plate angle:
  hwp, qwp                 plate angles in degrees (qwp empty without a quarter-wave plate)
  p_d                      true post-selection probability for |D>
  true_ch_re .. true_cv_im Jones amplitudes of the prepared state
  true_w_re, true_w_im     exact weak value of pi_H post-selected on |D> (empty if divergent)
  w_re, w_im               measured weak value
  w_re_err, w_im_err       its standard error
  alpha_re .. beta_im      reconstructed amplitudes, rephased onto the prepared state
  true_sx .. true_sz       Stokes vector of the prepared state
  sx, sy, sz               Stokes vector of the reconstruction
  fidelity                 |<prepared|reconstructed>|^2
  flag                     ok | near_divergent (p_d < sin^2 10deg) | divergent";

#[derive(Debug, Parser)]
#[command(name = "weakpol", version, about = "Direct measurement of polarization states via weak values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the state prepared by the wave plates.
    Prepare(PrepareArgs),
    /// Run experiment 1 or 2 on a state.
    Run(RunArgs),
    /// Sweep the half-wave plate along one of the three great circles.
    #[command(after_long_help = SWEEP_COLUMNS_HELP)]
    Sweep(SweepArgs),
    /// Fit the calibration constants for both outcomes.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (TOML, or JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; a manifest.json is written alongside the results.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate the configuration and inputs without running or writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Half-wave plate angle in degrees.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub hwp: f64,
    /// Insert a quarter-wave plate after the half-wave plate.
    #[arg(long)]
    pub qwp: bool,
    /// Quarter-wave plate angle in degrees (implies --qwp).
    #[arg(long, allow_negative_numbers = true)]
    pub qwp_angle: Option<f64>,
    /// Output directory for state.json and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exp1,
    Exp2,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment to run; defaults to the configured mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// State spec (H, V, D, A, R, L, I, hwp:22.5,qwp:45, ket:re,im,re,im,
    /// rho:<8 numbers>) or a file containing one.
    #[arg(long)]
    pub state: String,
    /// Also write the first π_H-coupled camera frame as frame.pgm and frame.csv.
    #[arg(long)]
    pub export_frame: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PathArg {
    Blue,
    Red,
    Green,
}

impl From<PathArg> for SweepPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Blue => SweepPath::Blue,
            PathArg::Red => SweepPath::Red,
            PathArg::Green => SweepPath::Green,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// blue: no quarter-wave plate; red: quarter-wave plate at 0°; green: at 45°.
    #[arg(long, value_enum)]
    pub path: PathArg,
    /// Number of half-wave plate angles over [0°, 90°).
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub points: u32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_CONFIG,
            Error::InvalidState(_) | Error::InvalidArgument(_) => EXIT_USAGE,
            Error::PostselectionVanishes { .. } => EXIT_POSTSELECTION,
            Error::DegenerateDesign(_) => EXIT_DEGENERATE,
            _ => EXIT_FAILURE,
        };
        let message = match &e {
            Error::PostselectionVanishes { .. } => format!(
                "{e}: the state is (nearly) orthogonal to the post-selection |D>, so its weak value \
                 diverges and experiment 1 cannot reconstruct it; use --mode exp2"
            ),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command, returning
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.command {
        Command::Prepare(a) => cmd_prepare(&a, &recorded),
        Command::Run(a) => cmd_run(&a, &recorded),
        Command::Sweep(a) => cmd_sweep(&a, &recorded),
        Command::Calibrate(a) => cmd_calibrate(&a, &recorded),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn complex(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn ket_json(k: &Ket) -> Value {
    json!({ "h": complex(k.ch), "v": complex(k.cv) })
}

fn stokes_json(s: &StokesVector) -> Value {
    json!({ "sx": s.sx, "sy": s.sy, "sz": s.sz })
}

fn matrix_json(m: &Mat2) -> Value {
    Value::Array((0..2).map(|i| Value::Array((0..2).map(|j| complex(m[(i, j)])).collect())).collect())
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)? + "\n";
    fs::write(path, text).map_err(|e| Error::from(e).into())
}

fn io(e: impl Into<Error>) -> Failure {
    e.into().into()
}

/// Loads the config file (or defaults) and applies command-line overrides.
fn load_config(common: &Common) -> CliResult<FileConfig> {
    let mut cfg = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.noise.seed = seed;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: &'static str,
    command: &'a str,
    arguments: &'a [String],
    config_digest: String,
    seed: u64,
    timestamp: String,
    outputs: Vec<String>,
}

fn write_manifest(
    out: &Path,
    command: &str,
    arguments: &[String],
    cfg: &FileConfig,
    outputs: &[&str],
) -> CliResult<()> {
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command,
        arguments,
        config_digest: cfg.digest(),
        seed: cfg.noise.seed,
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&out.join("manifest.json"), &serde_json::to_value(manifest).map_err(Error::from)?)
}

fn prepare_out_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(io)
}

fn cmd_prepare(a: &PrepareArgs, recorded: &[String]) -> CliResult<()> {
    let qwp = a.qwp_angle.or(a.qwp.then_some(0.0));
    if !a.hwp.is_finite() || qwp.is_some_and(|q| !q.is_finite()) {
        return Err(Error::InvalidArgument("angles must be finite".into()).into());
    }
    let ket = jones_output(a.hwp, qwp).canonical();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "hwp": a.hwp,
        "qwp": qwp,
        "ket": ket_json(&ket),
        "stokes": stokes_json(&stokes(&density_of(&ket))),
    });
    println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
    if let Some(out) = &a.out {
        prepare_out_dir(out)?;
        write_json(&out.join("state.json"), &doc)?;
        write_manifest(out, "prepare", recorded, &FileConfig::default(), &["state.json"])?;
    }
    Ok(())
}

fn write_matrix_csv(path: &Path, m: &Mat2, rows: [&str; 2], cols: [&str; 2]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["row", "col", "re", "im"]).map_err(io)?;
    for i in 0..2 {
        for j in 0..2 {
            let z = m[(i, j)];
            w.write_record([rows[i], cols[j], &z.re.to_string(), &z.im.to_string()]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn cmd_run(a: &RunArgs, recorded: &[String]) -> CliResult<()> {
    let mut file_cfg = load_config(&a.common)?;
    if let Some(m) = a.mode {
        file_cfg.run.mode = match m {
            ModeArg::Exp1 => Mode::Exp1,
            ModeArg::Exp2 => Mode::Exp2,
        };
    }
    let cfg = file_cfg.experiment()?;
    let state = resolve_state(&a.state)?;
    if cfg.mode == Mode::Exp1 && state.ket.is_none() {
        return Err(Error::InvalidState("experiment 1 needs a pure state".into()).into());
    }
    if a.common.dry_run {
        println!("configuration ok (digest {})", file_cfg.digest());
        return Ok(());
    }
    let exp = Experiment::new(cfg)?;
    let header = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "state": state.label,
        "config_digest": file_cfg.digest(),
        "seed": file_cfg.noise.seed,
        "frames": exp.cfg.frames,
        "delta": exp.cfg.pointer.delta,
        "sigma": exp.cfg.pointer.sigma,
    });
    let mut outputs = vec!["result.json"];
    let (mut doc, summary) = match exp.cfg.mode {
        Mode::Exp1 => run_exp1_doc(&exp, &state, a.common.out.as_deref(), &mut outputs)?,
        Mode::Exp2 => run_exp2_doc(&exp, &state, a.common.out.as_deref(), &mut outputs)?,
    };
    if let (Value::Object(d), Value::Object(h)) = (&mut doc, header) {
        for (k, v) in h {
            d.insert(k, v);
        }
    }
    if let Some(out) = &a.common.out {
        write_json(&out.join("result.json"), &doc)?;
        if a.export_frame {
            let frame = exp.render_frame(&state.rho, Projector::H, 0)?;
            frame.write_pgm(fs::File::create(out.join("frame.pgm")).map_err(io)?)?;
            frame.write_csv(fs::File::create(out.join("frame.csv")).map_err(io)?)?;
            outputs.extend(["frame.pgm", "frame.csv"]);
        }
        write_manifest(out, "run", recorded, &file_cfg, &outputs)?;
    }
    println!("{summary}");
    Ok(())
}

fn run_exp1_doc(
    exp: &Experiment,
    state: &StateSpec,
    out: Option<&Path>,
    outputs: &mut Vec<&'static str>,
) -> CliResult<(Value, String)> {
    let truth = state.ket.expect("checked pure");
    let r = exp.run_exp1(&truth)?;
    let ket = r.ket.ket.aligned_to(&truth);
    let td = trace_distance(density_of(&ket).matrix(), state.rho.matrix());
    let centroid = |e: Option<crate::detector::CentroidEstimate>| serde_json::to_value(e).unwrap_or(Value::Null);
    let doc = json!({
        "mode": "exp1",
        "weak_value": complex(r.weak_value.value),
        "weak_value_std_error": complex(r.weak_value.std_error),
        "frames_used": r.weak_value.frames_used,
        "ket": ket_json(&ket),
        "nu": r.ket.nu,
        "stokes": stokes_json(&stokes(&density_of(&ket))),
        "centroids": { "x": centroid(r.measurement.x), "p": centroid(r.measurement.p) },
        "metrics": { "fidelity": r.fidelity_to_truth, "trace_distance": td },
    });
    if let Some(out) = out {
        prepare_out_dir(out)?;
        let mut w = csv::Writer::from_path(out.join("ket.csv")).map_err(io)?;
        w.write_record(["component", "re", "im"]).map_err(io)?;
        for (name, z) in [("H", ket.ch), ("V", ket.cv)] {
            w.write_record([name, &z.re.to_string(), &z.im.to_string()]).map_err(io)?;
        }
        w.flush().map_err(io)?;
        outputs.push("ket.csv");
    }
    let summary = format!(
        "exp1 {}: w_H = {:.6}{:+.6}i  fidelity = {:.6}  trace_distance = {:.3e}",
        state.label, r.weak_value.value.re, r.weak_value.value.im, r.fidelity_to_truth, td
    );
    Ok((doc, summary))
}

fn run_exp2_doc(
    exp: &Experiment,
    state: &StateSpec,
    out: Option<&Path>,
    outputs: &mut Vec<&'static str>,
) -> CliResult<(Value, String)> {
    let r = exp.run_exp2(&state.rho)?;
    let tomo = exp.tomography_baseline(&state.rho)?;
    let weak_values: Vec<Vec<Value>> = (0..2)
        .map(|i| {
            (0..2)
                .map(|j| match r.weak_values[i][j] {
                    Some(w) => json!({
                        "value": complex(w.value),
                        "std_error": complex(w.std_error),
                        "frames_used": w.frames_used,
                    }),
                    None => Value::Null,
                })
                .collect()
        })
        .collect();
    let doc = json!({
        "mode": "exp2",
        "dirac": matrix_json(&r.dirac.s),
        "dirac_std_error": matrix_json(&r.dirac_std_error),
        "weak_values": weak_values,
        "rho": matrix_json(&r.rho.m),
        "p_D": r.p_d,
        "p_A": r.p_a,
        "stokes": stokes_json(&r.stokes),
        "metrics": serde_json::to_value(r.metrics).map_err(Error::from)?,
        "low_signal": { "D": r.low_signal[Outcome::D.index()], "A": r.low_signal[Outcome::A.index()] },
        "tomography": {
            "rho": matrix_json(&tomo.rho.m),
            "stokes": stokes_json(&tomo.stokes),
            "metrics": serde_json::to_value(tomo.metrics).map_err(Error::from)?,
            "photons": tomo.photons,
        },
    });
    if let Some(out) = out {
        prepare_out_dir(out)?;
        write_matrix_csv(&out.join("dirac.csv"), &r.dirac.s, ["H", "V"], ["D", "A"])?;
        write_matrix_csv(&out.join("rho.csv"), &r.rho.m, ["H", "V"], ["H", "V"])?;
        outputs.extend(["dirac.csv", "rho.csv"]);
    }
    let fid = r.metrics.fidelity.map_or("n/a".to_string(), |f| format!("{f:.6}"));
    let summary = format!(
        "exp2 {}: fidelity = {}  trace_distance = {:.3e}  hermiticity_deviation = {:.3e}  p_D = {:.6}",
        state.label, fid, r.metrics.trace_distance, r.metrics.hermiticity_deviation, r.p_d
    );
    Ok((doc, summary))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes sweep rows as CSV with a header.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> crate::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "hwp", "qwp", "p_d", "true_ch_re", "true_ch_im", "true_cv_re", "true_cv_im", "true_w_re",
        "true_w_im", "w_re", "w_im", "w_re_err", "w_im_err", "alpha_re", "alpha_im", "beta_re",
        "beta_im", "true_sx", "true_sy", "true_sz", "sx", "sy", "sz", "fidelity", "flag",
    ])?;
    for r in rows {
        let m = r.measured;
        let k = r.reconstructed;
        let s = r.measured_stokes;
        out.write_record([
            r.hwp.to_string(),
            opt(r.qwp),
            r.p_d.to_string(),
            r.prepared.ch.re.to_string(),
            r.prepared.ch.im.to_string(),
            r.prepared.cv.re.to_string(),
            r.prepared.cv.im.to_string(),
            opt(r.true_weak_value.map(|w| w.re)),
            opt(r.true_weak_value.map(|w| w.im)),
            opt(m.map(|m| m.value.re)),
            opt(m.map(|m| m.value.im)),
            opt(m.map(|m| m.std_error.re)),
            opt(m.map(|m| m.std_error.im)),
            opt(k.map(|k| k.ch.re)),
            opt(k.map(|k| k.ch.im)),
            opt(k.map(|k| k.cv.re)),
            opt(k.map(|k| k.cv.im)),
            r.true_stokes.sx.to_string(),
            r.true_stokes.sy.to_string(),
            r.true_stokes.sz.to_string(),
            opt(s.map(|s| s.sx)),
            opt(s.map(|s| s.sy)),
            opt(s.map(|s| s.sz)),
            opt(r.fidelity),
            r.flag.name().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, recorded: &[String]) -> CliResult<()> {
    let file_cfg = load_config(&a.common)?;
    let mut cfg = file_cfg.experiment()?;
    cfg.mode = Mode::Exp1;
    if a.common.dry_run {
        println!("configuration ok (digest {})", file_cfg.digest());
        return Ok(());
    }
    let exp = Experiment::new(cfg)?;
    let path = SweepPath::from(a.path);
    let rows = exp.sweep_hwp(&SweepPath::angles(a.points as usize), path.qwp())?;
    match &a.common.out {
        Some(out) => {
            prepare_out_dir(out)?;
            write_sweep_csv(&rows, fs::File::create(out.join("sweep.csv")).map_err(io)?)?;
            write_manifest(out, "sweep", recorded, &file_cfg, &["sweep.csv"])?;
        }
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, recorded: &[String]) -> CliResult<()> {
    let file_cfg = load_config(&a.common)?;
    let cfg = file_cfg.experiment()?;
    let states = file_cfg.calibration_states()?;
    if a.common.dry_run {
        println!("configuration ok (digest {})", file_cfg.digest());
        return Ok(());
    }
    let exp = Experiment::uncalibrated(cfg)?;
    let cals = exp.calibrate(&states)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "calibrate",
        "config_digest": file_cfg.digest(),
        "seed": file_cfg.noise.seed,
        "states": states.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
        "constants": serde_json::to_value(cals).map_err(Error::from)?,
    });
    if let Some(out) = &a.common.out {
        prepare_out_dir(out)?;
        for cal in &cals {
            cal.save(&out.join(format!("calibration_{}.json", cal.outcome.name())))?;
        }
        write_manifest(out, "calibrate", recorded, &file_cfg, &["calibration_D.json", "calibration_A.json"])?;
    }
    println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
    Ok(())
}
