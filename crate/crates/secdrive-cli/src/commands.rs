//! Subcommand execution: parameter resolution (defaults < config file <
//! flags), computation, and output writing. Every file-producing run writes
//! the data file plus a `.meta` sidecar in the config format; re-feeding the
//! sidecar reproduces the run bit-for-bit.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use clap::Args;

use secdrive::adiabaticity::{
    adiabatic_condition_ratio, adiabatic_condition_ratio_fd, reversed_model_fidelity_loss,
};
use secdrive::algebra::{angular_momentum, commutator, frobenius_norm, inner, Axis, Spin};
use secdrive::analytic::{analytic_state, phase_breakdown, solid_angle};
use secdrive::experiments::{
    default_envelopes, default_truncation_deltas, format_number, run_bloch_path,
    run_field_and_levels, run_truncation_sweep, run_universality, SweepResult, ENVELOPE_WINDOW,
};
use secdrive::model::{
    bloch_angles, gauge_transform, hamiltonian, invariant, invariant_eigenstate, Envelope,
    PulseSpec,
};
use secdrive::numerics::{
    adaptive_quadrature, discrete_geometric_phase, integrate_schrodinger, IntegratorConfig,
};
use secdrive::algebra::dagger;

use crate::config::{parse_angle, CliError, CliResult, FileConfig, OutputFormat, Resolver};

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

/// Drive selection shared by `simulate` and `phase`.
#[derive(Args, Debug, Default)]
pub struct PulseFlags {
    /// Pulse family: secant | general
    #[arg(long)]
    pub pulse: Option<String>,
    /// Scanning frequency nu > 0 of the secant pulse
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Envelope of the general pulse: constant | gaussian | sin2
    #[arg(long)]
    pub envelope: Option<String>,
    /// Envelope amplitude (radians/time)
    #[arg(long, allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    /// Width of the gaussian envelope
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Center time of the gaussian envelope
    #[arg(long, allow_negative_numbers = true)]
    pub center: Option<f64>,
    /// Period of the sin2 envelope
    #[arg(long, allow_negative_numbers = true)]
    pub period: Option<f64>,
    /// Start time of the sin2 envelope
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<f64>,
    /// Drive-angle offset theta0 (accepts a 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<String>,
    /// Start of the general-pulse window
    #[arg(long, allow_negative_numbers = true)]
    pub window_start: Option<f64>,
    /// End of the general-pulse window
    #[arg(long, allow_negative_numbers = true)]
    pub window_end: Option<f64>,
}

/// Output destination shared by every file-producing command.
#[derive(Args, Debug, Default)]
pub struct OutputFlags {
    /// Directory for the data file and metadata sidecar
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Output format: csv | json
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Clone)]
struct PulseParams {
    kind: String,
    nu: f64,
    envelope: String,
    amplitude: f64,
    sigma: f64,
    center: f64,
    period: f64,
    start: f64,
    theta0: f64,
    window_start: f64,
    window_end: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            kind: "secant".into(),
            nu: 1.0,
            envelope: "constant".into(),
            amplitude: 1.0,
            sigma: 0.35,
            center: 0.0,
            period: 2.0,
            start: -1.0,
            theta0: 0.0,
            window_start: -1.0,
            window_end: 1.0,
        }
    }
}

impl PulseParams {
    fn apply_file(&mut self, r: &Resolver) -> CliResult<()> {
        r.string("pulse", &mut self.kind)?;
        r.f64("nu", &mut self.nu)?;
        r.string("envelope", &mut self.envelope)?;
        r.f64("amplitude", &mut self.amplitude)?;
        r.f64("sigma", &mut self.sigma)?;
        r.f64("center", &mut self.center)?;
        r.f64("period", &mut self.period)?;
        r.f64("start", &mut self.start)?;
        r.angle("theta0", &mut self.theta0)?;
        r.f64("window_start", &mut self.window_start)?;
        r.f64("window_end", &mut self.window_end)?;
        Ok(())
    }

    fn apply_flags(&mut self, f: &PulseFlags) -> CliResult<()> {
        if let Some(v) = &f.pulse {
            self.kind = v.clone();
        }
        if let Some(v) = f.nu {
            self.nu = v;
        }
        if let Some(v) = &f.envelope {
            self.envelope = v.clone();
        }
        if let Some(v) = f.amplitude {
            self.amplitude = v;
        }
        if let Some(v) = f.sigma {
            self.sigma = v;
        }
        if let Some(v) = f.center {
            self.center = v;
        }
        if let Some(v) = f.period {
            self.period = v;
        }
        if let Some(v) = f.start {
            self.start = v;
        }
        if let Some(v) = &f.theta0 {
            self.theta0 = parse_angle(v).map_err(CliError::Validation)?;
        }
        if let Some(v) = f.window_start {
            self.window_start = v;
        }
        if let Some(v) = f.window_end {
            self.window_end = v;
        }
        Ok(())
    }

    fn build(&self) -> CliResult<PulseSpec> {
        match self.kind.as_str() {
            "secant" => Ok(PulseSpec::secant(self.nu)?),
            "general" => {
                let envelope = match self.envelope.as_str() {
                    "constant" => Envelope::Constant {
                        amplitude: self.amplitude,
                    },
                    "gaussian" => Envelope::Gaussian {
                        amplitude: self.amplitude,
                        sigma: self.sigma,
                        center: self.center,
                    },
                    "sin2" => Envelope::Sin2 {
                        amplitude: self.amplitude,
                        period: self.period,
                        start: self.start,
                    },
                    other => {
                        return Err(CliError::Validation(format!(
                            "envelope must be constant | gaussian | sin2 (got '{other}')"
                        )))
                    }
                };
                Ok(PulseSpec::general(
                    envelope,
                    self.theta0,
                    (self.window_start, self.window_end),
                )?)
            }
            other => Err(CliError::Validation(format!(
                "pulse must be secant | general (got '{other}')"
            ))),
        }
    }

    /// Integration window: the delta-truncated secant window (in scaled time
    /// `q = νt`) or the full general-pulse window.
    fn window(&self, delta: f64) -> (f64, f64) {
        match self.kind.as_str() {
            "secant" => (-(PI - delta) / self.nu, (PI - delta) / self.nu),
            _ => (self.window_start, self.window_end),
        }
    }

    fn sidecar_entries(&self, out: &mut Vec<(String, String)>) {
        out.push(("pulse".into(), self.kind.clone()));
        if self.kind == "secant" {
            out.push(("nu".into(), format_number(self.nu)));
        } else {
            out.push(("envelope".into(), self.envelope.clone()));
            out.push(("amplitude".into(), format_number(self.amplitude)));
            match self.envelope.as_str() {
                "gaussian" => {
                    out.push(("sigma".into(), format_number(self.sigma)));
                    out.push(("center".into(), format_number(self.center)));
                }
                "sin2" => {
                    out.push(("period".into(), format_number(self.period)));
                    out.push(("start".into(), format_number(self.start)));
                }
                _ => {}
            }
            out.push(("theta0".into(), format_number(self.theta0)));
            out.push(("window_start".into(), format_number(self.window_start)));
            out.push(("window_end".into(), format_number(self.window_end)));
        }
    }
}

#[derive(Debug, Clone)]
struct OutputParams {
    dir: Option<PathBuf>,
    format: OutputFormat,
}

impl OutputParams {
    fn resolve(r: &Resolver, flags: &OutputFlags, default_dir: Option<&str>) -> CliResult<Self> {
        let mut dir = default_dir.map(PathBuf::from);
        let mut format_name = "csv".to_string();
        if let Some(v) = r.get("output_dir") {
            dir = Some(PathBuf::from(v));
        }
        r.string("format", &mut format_name)?;
        if let Some(v) = &flags.output_dir {
            dir = Some(v.clone());
        }
        if let Some(v) = &flags.format {
            format_name = v.clone();
        }
        Ok(Self {
            dir,
            format: OutputFormat::parse(&format_name)?,
        })
    }

    fn write(
        &self,
        command: &str,
        result: &SweepResult,
        sidecar: &[(String, String)],
    ) -> CliResult<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {dir:?}: {e}")))?;
        let data_path = dir.join(format!("{command}.{}", self.format.extension()));
        let payload = match self.format {
            OutputFormat::Csv => result.to_csv_string(),
            OutputFormat::Json => result.to_json_string(),
        };
        std::fs::write(&data_path, payload)
            .map_err(|e| CliError::Io(format!("cannot write {data_path:?}: {e}")))?;

        let meta_path = dir.join(format!("{command}.meta"));
        let mut text = String::from("# metadata sidecar; reusable as --config input\n");
        text.push_str(&format!("[{command}]\n"));
        text.push_str(&format!("command = {command}\n"));
        for (key, value) in sidecar {
            text.push_str(&format!("{key} = {value}\n"));
        }
        text.push_str(&format!("format = {}\n", self.format.name()));
        text.push_str(&format!("artifact_version = {ARTIFACT_VERSION}\n"));
        std::fs::write(&meta_path, text)
            .map_err(|e| CliError::Io(format!("cannot write {meta_path:?}: {e}")))?;

        println!("wrote {}", data_path.display());
        println!("wrote {}", meta_path.display());
        Ok(())
    }
}

fn resolver_for(
    file: Option<&FileConfig>,
    command: &str,
    keys: &[&str],
) -> CliResult<Resolver> {
    Resolver::new(file, command, keys)
}

/// Commands defined on the scaled-time grid support the secant pulse only.
fn require_secant(r: &Resolver) -> CliResult<()> {
    if let Some(kind) = r.get("pulse") {
        if kind != "secant" {
            return Err(CliError::Validation(format!(
                "this command supports only the secant pulse (got '{kind}')"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub pulse: PulseFlags,
    /// Spin label j (half-integer)
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Magnetic quantum number m of the initial invariant eigenstate
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Secant window truncation delta in scaled time (accepts 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Relative integrator tolerance
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    /// Absolute integrator tolerance
    #[arg(long, allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
    /// Number of trajectory sample times
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also evolve analytically and report the overlap fidelity
    #[arg(long)]
    pub compare: bool,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_simulate(file: Option<&FileConfig>, args: &SimulateArgs) -> CliResult<()> {
    const KEYS: [&str; 18] = [
        "pulse",
        "nu",
        "envelope",
        "amplitude",
        "sigma",
        "center",
        "period",
        "start",
        "theta0",
        "window_start",
        "window_end",
        "j",
        "m",
        "delta",
        "rel_tol",
        "abs_tol",
        "samples",
        "compare",
    ];
    let r = resolver_for(file, "simulate", &KEYS)?;
    let mut pulse_params = PulseParams::default();
    pulse_params.apply_file(&r)?;
    let mut j = 0.5;
    let mut m = 0.5;
    let mut delta = 1e-3 * PI;
    let mut rel_tol = 1e-10;
    let mut abs_tol = 1e-12;
    let mut samples = 201usize;
    let mut compare = false;
    r.f64("j", &mut j)?;
    r.f64("m", &mut m)?;
    r.angle("delta", &mut delta)?;
    r.f64("rel_tol", &mut rel_tol)?;
    r.f64("abs_tol", &mut abs_tol)?;
    r.usize("samples", &mut samples)?;
    r.bool("compare", &mut compare)?;

    pulse_params.apply_flags(&args.pulse)?;
    if let Some(v) = args.j {
        j = v;
    }
    if let Some(v) = args.m {
        m = v;
    }
    if let Some(v) = &args.delta {
        delta = parse_angle(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = args.rel_tol {
        rel_tol = v;
    }
    if let Some(v) = args.abs_tol {
        abs_tol = v;
    }
    if let Some(v) = args.samples {
        samples = v;
    }
    if args.compare {
        compare = true;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;
    if samples < 2 {
        return Err(CliError::Validation(format!(
            "samples must be >= 2 (got {samples})"
        )));
    }
    if !(delta > 0.0 && delta < PI) {
        return Err(CliError::Validation(format!(
            "delta must lie in (0, pi) (got {delta})"
        )));
    }

    let pulse = pulse_params.build()?;
    let spin = Spin::new(j).map_err(CliError::from)?;
    let (t0, tf) = pulse_params.window(delta);
    let psi0 = invariant_eigenstate(&pulse, spin, t0, m)?;
    let cfg = IntegratorConfig::with_tol(rel_tol, abs_tol);
    let sample_times: Vec<f64> = (1..samples - 1)
        .map(|k| t0 + (tf - t0) * k as f64 / (samples - 1) as f64)
        .collect();
    let record = integrate_schrodinger(&pulse, spin, &psi0, t0, tf, &cfg, &sample_times)?;

    let mut result = SweepResult {
        axis_name: "t".into(),
        axis_values: record.times.clone(),
        series: vec![("norm".into(), record.norms.clone())],
        metadata: Vec::new(),
    };
    for component in 0..spin.dim() {
        result.series.push((
            format!("amp_re_{component}"),
            record.states.iter().map(|s| s[component].re).collect(),
        ));
        result.series.push((
            format!("amp_im_{component}"),
            record.states.iter().map(|s| s[component].im).collect(),
        ));
    }
    if compare {
        let fidelities: Vec<f64> = record
            .times
            .iter()
            .zip(record.states.iter())
            .map(|(&t, state)| {
                let reference = analytic_state(&pulse, spin, m, t0, t)?;
                Ok(inner(&reference, state).norm_sqr())
            })
            .collect::<CliResult<_>>()?;
        let final_fidelity = *fidelities.last().expect("trajectory is non-empty");
        result.series.push(("fidelity".into(), fidelities));
        println!("final_fidelity = {}", format_number(final_fidelity));
    }
    println!(
        "max_norm_drift = {}",
        format_number(record.max_norm_drift())
    );
    result.metadata.push(("command".into(), "simulate".into()));
    result.validate()?;

    let mut sidecar = Vec::new();
    pulse_params.sidecar_entries(&mut sidecar);
    sidecar.push(("j".into(), format_number(j)));
    sidecar.push(("m".into(), format_number(m)));
    sidecar.push(("delta".into(), format_number(delta)));
    sidecar.push(("rel_tol".into(), format_number(rel_tol)));
    sidecar.push(("abs_tol".into(), format_number(abs_tol)));
    sidecar.push(("samples".into(), samples.to_string()));
    sidecar.push(("compare".into(), compare.to_string()));
    out.write("simulate", &result, &sidecar)
}

// ---------------------------------------------------------------------------
// phase
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub pulse: PulseFlags,
    /// Spin label j (half-integer)
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Magnetic quantum number m
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Secant window truncation delta in scaled time (accepts 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Cross-check with the discrete-overlap oracle at this sample count
    #[arg(long)]
    pub check_discrete: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_phase(file: Option<&FileConfig>, args: &PhaseArgs) -> CliResult<()> {
    const KEYS: [&str; 15] = [
        "pulse",
        "nu",
        "envelope",
        "amplitude",
        "sigma",
        "center",
        "period",
        "start",
        "theta0",
        "window_start",
        "window_end",
        "j",
        "m",
        "delta",
        "check_discrete",
    ];
    let r = resolver_for(file, "phase", &KEYS)?;
    let mut pulse_params = PulseParams::default();
    pulse_params.apply_file(&r)?;
    let mut j = 0.5;
    let mut m = 0.5;
    let mut delta = 1e-3 * PI;
    let mut check_discrete = 0usize;
    r.f64("j", &mut j)?;
    r.f64("m", &mut m)?;
    r.angle("delta", &mut delta)?;
    r.usize("check_discrete", &mut check_discrete)?;

    pulse_params.apply_flags(&args.pulse)?;
    if let Some(v) = args.j {
        j = v;
    }
    if let Some(v) = args.m {
        m = v;
    }
    if let Some(v) = &args.delta {
        delta = parse_angle(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = args.check_discrete {
        check_discrete = v;
    }
    let out = OutputParams::resolve(&r, &args.out, None)?;
    if !(delta > 0.0 && delta < PI) {
        return Err(CliError::Validation(format!(
            "delta must lie in (0, pi) (got {delta})"
        )));
    }

    let pulse = pulse_params.build()?;
    let spin = Spin::new(j).map_err(CliError::from)?;
    let (t0, tf) = pulse_params.window(delta);
    let breakdown = phase_breakdown(&pulse, spin, m, t0, tf)?;

    println!(
        "m = {} window = [{}, {}] method = {}",
        format_number(m),
        format_number(t0),
        format_number(tf),
        breakdown.method
    );
    println!("total = {}", format_number(breakdown.total));
    println!("dynamical = {}", format_number(breakdown.dynamical));
    println!("geometric = {}", format_number(breakdown.geometric));

    if check_discrete > 0 {
        if check_discrete < 3 {
            return Err(CliError::Validation(
                "check_discrete needs at least 3 samples".into(),
            ));
        }
        let states: Vec<_> = (0..check_discrete)
            .map(|k| {
                let t = t0 + (tf - t0) * k as f64 / (check_discrete - 1) as f64;
                invariant_eigenstate(&pulse, spin, t, m)
            })
            .collect::<Result<_, _>>()?;
        let discrete = discrete_geometric_phase(&states, false)?;
        println!("geometric_discrete_overlap = {}", format_number(discrete));
    }

    let result = SweepResult {
        axis_name: "tf".into(),
        axis_values: vec![tf],
        series: vec![
            ("t0".into(), vec![t0]),
            ("total".into(), vec![breakdown.total]),
            ("dynamical".into(), vec![breakdown.dynamical]),
            ("geometric".into(), vec![breakdown.geometric]),
        ],
        metadata: vec![
            ("command".into(), "phase".into()),
            ("method".into(), breakdown.method.to_string()),
        ],
    };
    let mut sidecar = Vec::new();
    pulse_params.sidecar_entries(&mut sidecar);
    sidecar.push(("j".into(), format_number(j)));
    sidecar.push(("m".into(), format_number(m)));
    sidecar.push(("delta".into(), format_number(delta)));
    sidecar.push(("check_discrete".into(), check_discrete.to_string()));
    out.write("phase", &result, &sidecar)
}

// ---------------------------------------------------------------------------
// levels / bloch / truncate / adiabaticity / universality
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct LevelsArgs {
    /// Scanning frequency (metadata only; the series are functions of q)
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Spin label (the level pair is the two-level case j = 1/2)
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_levels(file: Option<&FileConfig>, args: &LevelsArgs) -> CliResult<()> {
    let r = resolver_for(file, "levels", &["pulse", "nu", "j", "n"])?;
    require_secant(&r)?;
    let mut nu = 1.0;
    let mut j = 0.5;
    let mut n = 2001usize;
    r.f64("nu", &mut nu)?;
    r.f64("j", &mut j)?;
    r.usize("n", &mut n)?;
    if let Some(v) = args.nu {
        nu = v;
    }
    if let Some(v) = args.j {
        j = v;
    }
    if let Some(v) = args.n {
        n = v;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;
    if j != 0.5 {
        return Err(CliError::Validation(format!(
            "levels reports the two-level case; j must be 0.5 (got {j})"
        )));
    }
    let result = run_field_and_levels(nu, n)?;
    let sidecar = vec![
        ("pulse".into(), "secant".into()),
        ("nu".into(), format_number(nu)),
        ("j".into(), format_number(j)),
        ("n".into(), n.to_string()),
    ];
    out.write("levels", &result, &sidecar)
}

#[derive(Args, Debug)]
pub struct BlochArgs {
    /// Scanning frequency (metadata only; the loop is a function of q)
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Number of loop samples
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_bloch(file: Option<&FileConfig>, args: &BlochArgs) -> CliResult<()> {
    let r = resolver_for(file, "bloch", &["pulse", "nu", "n"])?;
    require_secant(&r)?;
    let mut nu = 1.0;
    let mut n = 100_001usize;
    r.f64("nu", &mut nu)?;
    r.usize("n", &mut n)?;
    if let Some(v) = args.nu {
        nu = v;
    }
    if let Some(v) = args.n {
        n = v;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;
    let result = run_bloch_path(nu, n)?;
    println!(
        "solid_angle = {} ({})",
        result.metadata_value("solid_angle").unwrap_or("?"),
        result.metadata_value("orientation").unwrap_or("?"),
    );
    let sidecar = vec![
        ("pulse".into(), "secant".into()),
        ("nu".into(), format_number(nu)),
        ("n".into(), n.to_string()),
    ];
    out.write("bloch", &result, &sidecar)
}

#[derive(Args, Debug)]
pub struct TruncateArgs {
    /// Scanning frequency (metadata only)
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Smallest truncation delta (accepts 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub delta_min: Option<String>,
    /// Largest truncation delta (accepts 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub delta_max: Option<String>,
    /// Number of log-spaced grid points
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_truncate(file: Option<&FileConfig>, args: &TruncateArgs) -> CliResult<()> {
    let r = resolver_for(file, "truncate", &["pulse", "nu", "delta_min", "delta_max", "points"])?;
    require_secant(&r)?;
    let mut nu = 1.0;
    let defaults = default_truncation_deltas();
    let mut delta_min = defaults[0];
    let mut delta_max = *defaults.last().unwrap();
    let mut points = defaults.len();
    r.f64("nu", &mut nu)?;
    r.angle("delta_min", &mut delta_min)?;
    r.angle("delta_max", &mut delta_max)?;
    r.usize("points", &mut points)?;
    if let Some(v) = args.nu {
        nu = v;
    }
    if let Some(v) = &args.delta_min {
        delta_min = parse_angle(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = &args.delta_max {
        delta_max = parse_angle(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = args.points {
        points = v;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;
    if !(delta_min > 0.0 && delta_max > delta_min && points >= 2) {
        return Err(CliError::Validation(format!(
            "need 0 < delta_min < delta_max and points >= 2 \
             (got {delta_min}, {delta_max}, {points})"
        )));
    }
    let deltas: Vec<f64> = (0..points)
        .map(|k| delta_min * (delta_max / delta_min).powf(k as f64 / (points - 1) as f64))
        .collect();
    let result = run_truncation_sweep(nu, &deltas)?;
    let sidecar = vec![
        ("pulse".into(), "secant".into()),
        ("nu".into(), format_number(nu)),
        ("delta_min".into(), format_number(delta_min)),
        ("delta_max".into(), format_number(delta_max)),
        ("points".into(), points.to_string()),
    ];
    out.write("truncate", &result, &sidecar)
}

#[derive(Args, Debug)]
pub struct AdiabaticityArgs {
    /// Scanning frequency (metadata only; the series are functions of q)
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_adiabaticity(file: Option<&FileConfig>, args: &AdiabaticityArgs) -> CliResult<()> {
    let r = resolver_for(file, "adiabaticity", &["pulse", "nu", "n"])?;
    require_secant(&r)?;
    let mut nu = 1.0;
    let mut n = 2001usize;
    r.f64("nu", &mut nu)?;
    r.usize("n", &mut n)?;
    if let Some(v) = args.nu {
        nu = v;
    }
    if let Some(v) = args.n {
        n = v;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;
    PulseSpec::secant(nu)?;
    if n < 3 {
        return Err(CliError::Validation(format!("need n >= 3 (got {n})")));
    }

    // All series depend on q = nu t only; evaluate on the unit-frequency pulse.
    let unit = PulseSpec::secant(1.0)?;
    let limit = PI - 1e-3 * PI;
    let mut grid = vec![0.0; n];
    for k in 0..n / 2 {
        let q = -limit + 2.0 * limit * k as f64 / (n - 1) as f64;
        grid[k] = q;
        grid[n - 1 - k] = -q;
    }
    let ratio: Vec<f64> = grid
        .iter()
        .map(|&q| adiabatic_condition_ratio(&unit, q))
        .collect::<Result<_, _>>()?;
    let ratio_matrix: Vec<f64> = grid
        .iter()
        .map(|&q| adiabatic_condition_ratio_fd(&unit, q))
        .collect::<Result<_, _>>()?;
    let loss: Vec<f64> = grid
        .iter()
        .map(|&q| reversed_model_fidelity_loss(&unit, q, 0.5))
        .collect::<Result<_, _>>()?;

    // Reference rows: the two matrix-element routes agree, the ratio vanishes
    // at q = 0, and the fidelity loss peaks at 1/4.
    let route_gap = ratio
        .iter()
        .zip(ratio_matrix.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if route_gap > 1e-5 {
        return Err(CliError::Numeric(format!(
            "adiabaticity: transition-ratio routes disagree by {route_gap:.3e}"
        )));
    }
    if adiabatic_condition_ratio(&unit, 0.0)? != 0.0 {
        return Err(CliError::Numeric(
            "adiabaticity: ratio does not vanish at q = 0".into(),
        ));
    }
    let peak = reversed_model_fidelity_loss(&unit, FRAC_PI_2, 0.5)?;
    if (peak - 0.25).abs() > 1e-12 {
        return Err(CliError::Numeric(format!(
            "adiabaticity: fidelity-loss peak {peak} differs from 1/4"
        )));
    }

    let result = SweepResult {
        axis_name: "q".into(),
        axis_values: grid,
        series: vec![
            ("condition_ratio".into(), ratio),
            ("condition_ratio_matrix".into(), ratio_matrix),
            ("fidelity_loss".into(), loss),
        ],
        metadata: vec![
            ("command".into(), "adiabaticity".into()),
            ("nu".into(), format_number(nu)),
            ("j".into(), format_number(0.5)),
            ("n".into(), n.to_string()),
            ("artifact_version".into(), ARTIFACT_VERSION.into()),
        ],
    };
    result.validate()?;
    let sidecar = vec![
        ("pulse".into(), "secant".into()),
        ("nu".into(), format_number(nu)),
        ("n".into(), n.to_string()),
    ];
    out.write("adiabaticity", &result, &sidecar)
}

#[derive(Args, Debug)]
pub struct UniversalityArgs {
    /// Drive-angle truncation delta' (accepts 'pi' suffix)
    #[arg(long, allow_hyphen_values = true)]
    pub delta_prime: Option<String>,
    /// Magnetic quantum number m
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Discrete-overlap samples per envelope
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub out: OutputFlags,
}

pub fn run_universality_cmd(file: Option<&FileConfig>, args: &UniversalityArgs) -> CliResult<()> {
    let r = resolver_for(file, "universality", &["delta_prime", "m", "n"])?;
    let mut delta_prime = 1e-3 * PI;
    let mut m = 0.5;
    let mut n = 10_001usize;
    r.angle("delta_prime", &mut delta_prime)?;
    r.f64("m", &mut m)?;
    r.usize("n", &mut n)?;
    if let Some(v) = &args.delta_prime {
        delta_prime = parse_angle(v).map_err(CliError::Validation)?;
    }
    if let Some(v) = args.m {
        m = v;
    }
    if let Some(v) = args.n {
        n = v;
    }
    let out = OutputParams::resolve(&r, &args.out, Some("."))?;

    let result = run_universality(&default_envelopes(), ENVELOPE_WINDOW, delta_prime, m, n)?;
    for (idx, phase) in result.series[0].1.iter().enumerate() {
        let name = result
            .metadata_value(&format!("envelope_{idx}"))
            .unwrap_or("?");
        println!("geometric_phase[{name}] = {}", format_number(*phase));
    }
    let sidecar = vec![
        ("delta_prime".into(), format_number(delta_prime)),
        ("m".into(), format_number(m)),
        ("n".into(), n.to_string()),
    ];
    out.write("universality", &result, &sidecar)
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

pub fn run_selftest() -> CliResult<()> {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        all_ok &= ok;
    };
    let pulse = PulseSpec::secant(1.0)?;
    let spin_half = Spin::new(0.5)?;
    let i = num_complex::Complex64::new(0.0, 1.0);

    // su(2) commutation and Casimir.
    let mut comm_residual = 0.0f64;
    let mut casimir_residual = 0.0f64;
    for two_j in 1..=4u32 {
        let spin = Spin::new(two_j as f64 / 2.0)?;
        let jx = angular_momentum(spin, Axis::X);
        let jy = angular_momentum(spin, Axis::Y);
        let jz = angular_momentum(spin, Axis::Z);
        comm_residual = comm_residual
            .max(frobenius_norm(&(commutator(&jx, &jy)? - jz.mapv(|z| i * z))));
        let j = spin.j();
        let casimir = jx.dot(&jx) + jy.dot(&jy) + jz.dot(&jz);
        let expected = secdrive::algebra::Operator::eye(spin.dim()).mapv(|z| z * (j * (j + 1.0)));
        casimir_residual = casimir_residual.max(frobenius_norm(&(casimir - expected)));
    }
    check(
        "su2_commutation",
        comm_residual < 1e-12,
        format!("max residual {comm_residual:.2e} (tol 1e-12)"),
    );
    check(
        "casimir",
        casimir_residual < 1e-12,
        format!("max residual {casimir_residual:.2e} (tol 1e-12)"),
    );

    // Gauge identity G J_z G† = I(t).
    let mut gauge_residual = 0.0f64;
    for &j in &[0.5, 1.0] {
        let spin = Spin::new(j)?;
        let jz = angular_momentum(spin, Axis::Z);
        for k in 0..21 {
            let t = -2.9 + 5.8 * k as f64 / 20.0;
            let g = gauge_transform(&pulse, spin, t);
            let conj = g.dot(&jz).dot(&dagger(&g));
            gauge_residual =
                gauge_residual.max(frobenius_norm(&(conj - invariant(&pulse, spin, t))));
        }
    }
    check(
        "gauge_identity",
        gauge_residual < 1e-10,
        format!("max residual {gauge_residual:.2e} (tol 1e-10)"),
    );

    // Invariant equation i dI/dt = [H, I].
    let mut invariant_residual = 0.0f64;
    for &j in &[0.5, 1.0] {
        let spin = Spin::new(j)?;
        for k in 0..30 {
            let t = -2.8 + 5.6 * k as f64 / 29.0;
            let step = pulse.fd_step(t);
            let di = (invariant(&pulse, spin, t + step) - invariant(&pulse, spin, t - step))
                .mapv(|z| z * i / (2.0 * step));
            let comm = commutator(&hamiltonian(&pulse, spin, t)?, &invariant(&pulse, spin, t))?;
            invariant_residual = invariant_residual.max(frobenius_norm(&(di - comm)));
        }
    }
    check(
        "invariant_equation",
        invariant_residual < 1e-5,
        format!("max residual {invariant_residual:.2e} (tol 1e-5)"),
    );

    // Eigen-relation I |phi_m> = m |phi_m> in the smooth gauge.
    let mut eigen_residual = 0.0f64;
    for &j in &[0.5, 1.5] {
        let spin = Spin::new(j)?;
        for k in 0..15 {
            let t = -2.7 + 5.4 * k as f64 / 14.0;
            let inv = invariant(&pulse, spin, t);
            for m in spin.m_values() {
                let state = invariant_eigenstate(&pulse, spin, t, m)?;
                let applied = inv.dot(&state);
                let res: f64 = applied
                    .iter()
                    .zip(state.iter())
                    .map(|(a, s)| (a - s * m).norm())
                    .fold(0.0, f64::max);
                eigen_residual = eigen_residual.max(res);
            }
        }
    }
    check(
        "eigen_relation",
        eigen_residual < 1e-10,
        format!("max residual {eigen_residual:.2e} (tol 1e-10)"),
    );

    // Full-loop geometric phase, closed form.
    let delta = 1e-6 * PI;
    let loop_phase = phase_breakdown(&pulse, spin_half, 0.5, -(PI - delta), PI - delta)?.geometric;
    let loop_err = (loop_phase - (PI - 2.0) / 2.0).abs();
    check(
        "loop_phase_closed_form",
        loop_err < 1e-8,
        format!("off (pi-2)/2 by {loop_err:.2e} (tol 1e-8)"),
    );

    // Full-loop geometric phase, discrete-overlap oracle.
    let n = 20_001;
    let samples: Vec<_> = (0..n)
        .map(|k| {
            let q = -(PI - 1e-4 * PI) + 2.0 * (PI - 1e-4 * PI) * k as f64 / (n - 1) as f64;
            invariant_eigenstate(&pulse, spin_half, q, 0.5)
        })
        .collect::<Result<_, _>>()?;
    let discrete = discrete_geometric_phase(&samples, true)?;
    let discrete_err = (discrete - (PI - 2.0) / 2.0).abs();
    check(
        "loop_phase_discrete_overlap",
        discrete_err < 1e-5,
        format!("off (pi-2)/2 by {discrete_err:.2e} (tol 1e-5)"),
    );

    // Solid angle of the sampled loop.
    let path: Vec<_> = (0..n)
        .map(|k| {
            let q = -(PI - 1e-4 * PI) + 2.0 * (PI - 1e-4 * PI) * k as f64 / (n - 1) as f64;
            bloch_angles(&pulse, q)
        })
        .collect();
    let geometry = solid_angle(path, true)?;
    let angle_err = (geometry.solid_angle - (PI - 2.0)).abs();
    check(
        "loop_solid_angle",
        angle_err < 1e-5,
        format!("off pi-2 by {angle_err:.2e} (tol 1e-5)"),
    );

    // ODE oracle vs the analytic propagator.
    let (t0, tf) = (-0.9 * PI, 0.9 * PI);
    let psi0 = invariant_eigenstate(&pulse, spin_half, t0, 0.5)?;
    let record = integrate_schrodinger(
        &pulse,
        spin_half,
        &psi0,
        t0,
        tf,
        &IntegratorConfig::with_tol(1e-10, 1e-12),
        &[],
    )?;
    let reference = analytic_state(&pulse, spin_half, 0.5, t0, tf)?;
    let fidelity = inner(record.final_state(), &reference).norm_sqr();
    check(
        "ode_vs_analytic",
        fidelity >= 1.0 - 1e-8,
        format!("infidelity {:.2e} (tol 1e-8)", 1.0 - fidelity),
    );

    // Adiabatic-condition ratio, closed form vs matrix route.
    let mut ratio_gap = 0.0f64;
    for k in 0..21 {
        let t = -2.9 + 5.8 * k as f64 / 20.0;
        let gap =
            (adiabatic_condition_ratio(&pulse, t)? - adiabatic_condition_ratio_fd(&pulse, t)?).abs();
        ratio_gap = ratio_gap.max(gap);
    }
    check(
        "adiabatic_ratio_routes",
        ratio_gap < 1e-5,
        format!("max gap {ratio_gap:.2e} (tol 1e-5)"),
    );

    // Fidelity-loss peak 1/4 at q = pi/2.
    let peak_err = (reversed_model_fidelity_loss(&pulse, FRAC_PI_2, 0.5)? - 0.25).abs();
    check(
        "fidelity_loss_peak",
        peak_err < 1e-12,
        format!("off 1/4 by {peak_err:.2e} (tol 1e-12)"),
    );

    // Quadrature sanity.
    let quad_err = (adaptive_quadrature(|x| x.sin(), 0.0, PI, 1e-12)?.value - 2.0).abs();
    check(
        "quadrature_sin",
        quad_err < 1e-12,
        format!("off 2 by {quad_err:.2e} (tol 1e-12)"),
    );

    // Universality of the geometric phase across envelope shapes.
    let sweep = run_universality(&default_envelopes(), ENVELOPE_WINDOW, 1e-2, 0.5, 2001)?;
    let phases = &sweep.series[0].1;
    let spread = phases
        .iter()
        .flat_map(|a| phases.iter().map(move |b| (a - b).abs()))
        .fold(0.0f64, f64::max);
    check(
        "universality_spread",
        spread < 1e-6,
        format!("max spread {spread:.2e} (tol 1e-6)"),
    );

    if all_ok {
        println!("selftest passed");
        Ok(())
    } else {
        Err(CliError::Numeric("selftest failed".into()))
    }
}
