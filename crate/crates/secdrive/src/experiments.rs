//! Reproducible sweep jobs with machine-readable output.
//!
//! Every sweep runs on a fixed grid in the scaled time `q = νt` (the model's
//! trajectories depend on `q` only), validates its reference rows before
//! returning, and serializes deterministically: fixed grids, fixed summation
//! order, 17 significant digits. Grid points are independent, so sweeps may
//! fan out over a work pool without affecting the output bytes.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::algebra::{Spin, State};
use crate::analytic::{solid_angle, Orientation};
use crate::model::{bloch_angles, invariant_eigenstate, Envelope, PulseSpec};
use crate::numerics::{adaptive_quadrature, discrete_geometric_phase};
use crate::{Error, Result};

/// One sweep: an axis, named series over it, and run metadata.
///
/// Series and metadata keep insertion order so serialization is
/// deterministic.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    fn new(axis_name: &str, axis_values: Vec<f64>) -> Self {
        Self {
            axis_name: axis_name.to_string(),
            axis_values,
            series: Vec::new(),
            metadata: Vec::new(),
        }
    }

    fn push_series(&mut self, name: &str, values: Vec<f64>) {
        self.series.push((name.to_string(), values));
    }

    fn push_metadata(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Checks the shape invariants: equal lengths and finite values.
    pub fn validate(&self) -> Result<()> {
        for (name, values) in &self.series {
            if values.len() != self.axis_values.len() {
                return Err(Error::SweepValidation(format!(
                    "series '{name}' has {} values for {} axis points",
                    values.len(),
                    self.axis_values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::SweepValidation(format!(
                    "series '{name}' contains non-finite value {bad}"
                )));
            }
        }
        Ok(())
    }

    /// CSV: header `axis,series...`, one row per axis value, LF line ends,
    /// 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.axis_name);
        for (name, _) in &self.series {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (row, axis) in self.axis_values.iter().enumerate() {
            out.push_str(&format_number(*axis));
            for (_, values) in &self.series {
                out.push(',');
                out.push_str(&format_number(values[row]));
            }
            out.push('\n');
        }
        out
    }

    /// JSON with the same number formatting as the CSV output.
    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"axis_name\": {},\n", json_string(&self.axis_name)));
        out.push_str("  \"axis_values\": ");
        out.push_str(&json_number_array(&self.axis_values));
        out.push_str(",\n  \"series\": {");
        for (i, (name, values)) in self.series.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "\n    {}: {}",
                json_string(name),
                json_number_array(values)
            ));
        }
        out.push_str("\n  },\n  \"metadata\": {");
        for (i, (key, value)) in self.metadata.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "\n    {}: {}",
                json_string(key),
                json_string(value)
            ));
        }
        out.push_str("\n  }\n}\n");
        out
    }
}

/// 17 significant digits, enough to round-trip an f64.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_number_array(values: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format_number(*v));
    }
    out.push(']');
    out
}

/// Symmetric grid on `(-limit, limit)`: mirrored halves so `grid[n-1-k]`
/// is exactly `-grid[k]`.
fn symmetric_grid(limit: f64, n: usize) -> Vec<f64> {
    let mut grid = vec![0.0; n];
    for k in 0..n / 2 {
        let v = -limit + 2.0 * limit * k as f64 / (n - 1) as f64;
        grid[k] = v;
        grid[n - 1 - k] = -v;
    }
    // Odd n leaves the exact midpoint.
    grid
}

fn base_metadata(result: &mut SweepResult, command: &str, nu: f64, j: f64, n: usize) {
    result.push_metadata("command", command);
    result.push_metadata("nu", format_number(nu));
    result.push_metadata("j", format_number(j));
    result.push_metadata("n", n.to_string());
    result.push_metadata("artifact_version", env!("CARGO_PKG_VERSION"));
}

/// Field profile `Ω_z/ν` and diabatic levels `E_±/ν` (j = 1/2) on a grid in
/// `q = νt` truncated at `δ_plot = 1e-3 π`.
pub fn run_field_and_levels(nu: f64, n: usize) -> Result<SweepResult> {
    PulseSpec::secant(nu)?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2 (got {n})")));
    }
    let delta_plot = 1e-3 * PI;
    let grid = symmetric_grid(PI - delta_plot, n);
    let omega_z_over_nu = |q: f64| -0.5 / (q / 2.0).cos();
    let level_plus_over_nu = |q: f64| {
        let c = (q / 2.0).cos();
        -0.25 * (c + 1.0 / c)
    };

    let mut result = SweepResult::new("q", grid.clone());
    result.push_series("omega_z_over_nu", grid.iter().map(|&q| omega_z_over_nu(q)).collect());
    result.push_series(
        "e_plus_over_nu",
        grid.iter().map(|&q| level_plus_over_nu(q)).collect(),
    );
    result.push_series(
        "e_minus_over_nu",
        grid.iter().map(|&q| -level_plus_over_nu(q)).collect(),
    );
    base_metadata(&mut result, "levels", nu, 0.5, n);
    result.push_metadata("pulse", "secant");
    result.push_metadata("delta_plot", format_number(delta_plot));
    result.validate()?;

    // Reference rows: the q = 0 field ratio and level splitting, evenness of
    // every series, and the divergence next to the guard.
    if (omega_z_over_nu(0.0) + 0.5).abs() > 1e-15 {
        return Err(Error::SweepValidation("Omega_z(0)/nu != -1/2".into()));
    }
    let splitting = level_plus_over_nu(0.0) - (-level_plus_over_nu(0.0));
    if (splitting + 1.0).abs() > 1e-15 {
        return Err(Error::SweepValidation(
            "E_+(0) - E_-(0) != -nu at q = 0".into(),
        ));
    }
    for (name, values) in &result.series {
        for k in 0..n / 2 {
            if (values[k] - values[n - 1 - k]).abs() > 1e-12 * values[k].abs().max(1.0) {
                return Err(Error::SweepValidation(format!(
                    "series '{name}' is not even in q at row {k}"
                )));
            }
        }
    }
    let edge = omega_z_over_nu(grid[0]).abs();
    if edge <= 100.0 {
        return Err(Error::SweepValidation(format!(
            "|Omega_z/nu| = {edge} at the grid edge; expected > 100"
        )));
    }
    Ok(result)
}

/// Bloch-sphere trajectory of the invariant direction along the loop, with
/// the enclosed solid angle in the metadata.
pub fn run_bloch_path(nu: f64, n: usize) -> Result<SweepResult> {
    PulseSpec::secant(nu)?;
    if n < 3 {
        return Err(Error::InvalidInput(format!("need n >= 3 (got {n})")));
    }
    let delta = 1e-4 * PI;
    let grid = symmetric_grid(PI - delta, n);
    let unit = PulseSpec::secant(1.0)?;
    let points: Vec<_> = grid.iter().map(|&q| bloch_angles(&unit, q)).collect();

    let mut result = SweepResult::new("q", grid.clone());
    result.push_series("theta", points.iter().map(|p| p.theta).collect());
    result.push_series("phi", points.iter().map(|p| p.phi).collect());
    for (idx, name) in ["r_x", "r_y", "r_z"].iter().enumerate() {
        result.push_series(name, points.iter().map(|p| p.unit_vector()[idx]).collect());
    }

    let geometry = solid_angle(points, true)?;
    base_metadata(&mut result, "bloch", nu, 0.5, n);
    result.push_metadata("pulse", "secant");
    result.push_metadata("delta", format_number(delta));
    result.push_metadata("solid_angle", format_number(geometry.solid_angle));
    result.push_metadata("orientation", geometry.orientation.to_string());
    result.validate()?;

    // Reference rows: endpoints at the pole, midpoint at (pi/2, pi), loop
    // orientation, and (for fine sampling) the enclosed solid angle.
    let theta_edge = result.series[0].1[0];
    if theta_edge > 1e-3 {
        return Err(Error::SweepValidation(format!(
            "endpoint theta = {theta_edge} does not approach the pole"
        )));
    }
    let mid = bloch_angles(&unit, 0.0);
    if (mid.theta - PI / 2.0).abs() > 1e-15 || (mid.phi - PI).abs() > 1e-15 {
        return Err(Error::SweepValidation(
            "midpoint is not (theta, phi) = (pi/2, pi)".into(),
        ));
    }
    if geometry.orientation != Orientation::Clockwise {
        return Err(Error::SweepValidation(
            "loop traversal is not clockwise".into(),
        ));
    }
    // Polygon discretization error is ~4.5/n^2 plus the ~3e-8 pole-gap
    // sliver; at n = 1e5 the enclosed angle must hit pi - 2 to 1e-6.
    let tol = (1e-6f64).max(50.0 / (n as f64 * n as f64));
    if (geometry.solid_angle - (PI - 2.0)).abs() > tol {
        return Err(Error::SweepValidation(format!(
            "solid angle {} differs from pi - 2 by more than {tol:.3e}",
            geometry.solid_angle
        )));
    }
    Ok(result)
}

/// Relative truncation error `1 - Φ_+^g(δ)/Φ_+^g(loop)` of the geometric
/// phase under symmetric truncation `νt = ∓(π - δ)`, by quadrature of the
/// connection kernel.
pub fn run_truncation_sweep(nu: f64, deltas: &[f64]) -> Result<SweepResult> {
    PulseSpec::secant(nu)?;
    if deltas.is_empty() {
        return Err(Error::InvalidInput("need at least one delta".into()));
    }
    for &d in deltas {
        if !(d > 0.0 && d < PI / 2.0) {
            return Err(Error::InvalidInput(format!(
                "truncation delta {d} outside (0, pi/2)"
            )));
        }
    }
    let relative_error = |delta: f64| -> Result<f64> {
        let kernel = |q: f64| {
            let (s, c) = (q / 2.0).sin_cos();
            c.powi(3) / (4.0 * (1.0 + s * s))
        };
        let phase = adaptive_quadrature(kernel, -(PI - delta), PI - delta, 1e-14)?.value;
        Ok(1.0 - phase / ((PI - 2.0) / 2.0))
    };
    let errors: Vec<f64> = deltas
        .par_iter()
        .map(|&d| relative_error(d))
        .collect::<Result<_>>()?;

    let mut result = SweepResult::new("delta", deltas.to_vec());
    result.push_series("relative_error", errors.clone());
    base_metadata(&mut result, "truncate", nu, 0.5, deltas.len());
    result.push_metadata("pulse", "secant");
    result.validate()?;

    // Reference rows: error below 1e-3 at delta = pi/10, still below 1e-2 at
    // the dramatic cutoff 0.2 pi, monotone over the requested grid.
    let at_tenth = relative_error(PI / 10.0)?;
    if at_tenth >= 1e-3 {
        return Err(Error::SweepValidation(format!(
            "relative error {at_tenth:.3e} at delta = pi/10 is not below 1e-3"
        )));
    }
    let at_fifth = relative_error(0.2 * PI)?;
    if at_fifth >= 1e-2 {
        return Err(Error::SweepValidation(format!(
            "relative error {at_fifth:.3e} at delta = 0.2 pi is not below 1e-2"
        )));
    }
    let mut sorted: Vec<(f64, f64)> = deltas.iter().copied().zip(errors).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for pair in sorted.windows(2) {
        if pair[1].1 <= pair[0].1 {
            return Err(Error::SweepValidation(format!(
                "relative error is not increasing between delta = {} and {}",
                pair[0].0, pair[1].0
            )));
        }
    }
    Ok(result)
}

/// Log-spaced default grid for the truncation sweep.
pub fn default_truncation_deltas() -> Vec<f64> {
    let (lo, hi, n) = (1e-3 * PI, 0.3 * PI, 60);
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Named envelope set used by the universality sweep, on the window `[-1, 1]`
/// before amplitude rescaling.
pub fn default_envelopes() -> Vec<(String, Envelope)> {
    vec![
        (
            "constant".to_string(),
            Envelope::Constant { amplitude: 1.0 },
        ),
        (
            "gaussian".to_string(),
            Envelope::Gaussian {
                amplitude: 1.0,
                sigma: 0.35,
                center: 0.0,
            },
        ),
        (
            "sin2".to_string(),
            Envelope::Sin2 {
                amplitude: 1.0,
                period: 2.0,
                start: -1.0,
            },
        ),
    ]
}

/// Window on which [`default_envelopes`] are defined.
pub const ENVELOPE_WINDOW: (f64, f64) = (-1.0, 1.0);

/// Rescales an envelope so its drive angle sweeps exactly
/// `(-π/2 + δ', π/2 - δ')` over `window`, and builds the pulse.
pub fn pulse_with_matched_sweep(
    envelope: &Envelope,
    window: (f64, f64),
    delta_prime: f64,
) -> Result<PulseSpec> {
    if !(delta_prime > 0.0 && delta_prime < PI / 2.0) {
        return Err(Error::InvalidInput(format!(
            "delta_prime {delta_prime} outside (0, pi/2)"
        )));
    }
    let integral = adaptive_quadrature(|t| envelope.value(t), window.0, window.1, 1e-13)?.value;
    if integral <= 0.0 {
        return Err(Error::InvalidPulse(
            "envelope integrates to a non-positive area".into(),
        ));
    }
    let span = PI - 2.0 * delta_prime;
    let scaled = envelope.scaled(2.0 * span / integral);
    PulseSpec::general(scaled, -span / 2.0, window)
}

/// Smooth-gauge eigenstates sampled uniformly in the drive angle `ϑ` over
/// `[-π/2 + δ', π/2 - δ']`.
fn states_uniform_in_drive_angle(
    pulse: &PulseSpec,
    spin: Spin,
    m: f64,
    delta_prime: f64,
    n: usize,
) -> Result<Vec<State>> {
    let lo = -PI / 2.0 + delta_prime;
    let hi = PI / 2.0 - delta_prime;
    (0..n)
        .map(|k| {
            let theta = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let t = pulse.time_at_phase_angle(theta)?;
            invariant_eigenstate(pulse, spin, t, m)
        })
        .collect()
}

/// Geometric phases of the named envelopes at a matched drive-angle
/// truncation `δ'`, against the secant reference, all by the discrete-overlap
/// oracle with `n` samples uniform in `ϑ`.
///
/// Axis value `0` is the secant reference; envelope `i` (1-based) is named in
/// the metadata key `envelope_i`.
pub fn run_universality(
    envelopes: &[(String, Envelope)],
    window: (f64, f64),
    delta_prime: f64,
    m: f64,
    n: usize,
) -> Result<SweepResult> {
    if envelopes.is_empty() {
        return Err(Error::InvalidInput("need at least one envelope".into()));
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!("need n >= 3 samples (got {n})")));
    }
    let spin = Spin::new(m.abs())?;
    spin.index_of_m(m)?;

    let secant = PulseSpec::secant(1.0)?;
    let reference_phase = {
        let samples = states_uniform_in_drive_angle(&secant, spin, m, delta_prime, n)?;
        discrete_geometric_phase(&samples, false)?
    };
    let envelope_phases: Vec<f64> = envelopes
        .par_iter()
        .map(|(_, envelope)| {
            let pulse = pulse_with_matched_sweep(envelope, window, delta_prime)?;
            let samples = states_uniform_in_drive_angle(&pulse, spin, m, delta_prime, n)?;
            discrete_geometric_phase(&samples, false)
        })
        .collect::<Result<_>>()?;

    let axis: Vec<f64> = (0..=envelopes.len()).map(|k| k as f64).collect();
    let mut phases = vec![reference_phase];
    phases.extend_from_slice(&envelope_phases);

    let mut result = SweepResult::new("envelope_index", axis);
    result.push_series("geometric_phase", phases.clone());
    base_metadata(&mut result, "universality", 1.0, spin.j(), n);
    result.push_metadata("m", format_number(m));
    result.push_metadata("delta_prime", format_number(delta_prime));
    result.push_metadata("envelope_0", "secant-reference");
    for (i, (name, _)) in envelopes.iter().enumerate() {
        result.push_metadata(&format!("envelope_{}", i + 1), name.clone());
    }
    result.validate()?;

    // Reference rows: every envelope within 1e-6 of every other, and the
    // secant discrete-overlap phase against the kernel quadrature to 1e-8.
    let spread = phases
        .iter()
        .flat_map(|a| phases.iter().map(move |b| (a - b).abs()))
        .fold(0.0f64, f64::max);
    if spread > 1e-6 {
        return Err(Error::SweepValidation(format!(
            "geometric phases spread {spread:.3e} exceeds 1e-6"
        )));
    }
    // The plain overlap product carries a bulk O(h^2) discretization error
    // (~2e-8 at n = 1e4), so the quadrature cross-check extrapolates the
    // product over a step-halved pair of grids.
    let n_odd = n | 1;
    let samples = states_uniform_in_drive_angle(&secant, spin, m, delta_prime, n_odd)?;
    let fine = discrete_geometric_phase(&samples, false)?;
    let halved: Vec<State> = samples.iter().step_by(2).cloned().collect();
    let coarse = discrete_geometric_phase(&halved, false)?;
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    let q_limit = PI - 2.0 * delta_prime;
    let kernel = |q: f64| {
        let (s, c) = (q / 2.0).sin_cos();
        2.0 * m * c.powi(3) / (4.0 * (1.0 + s * s))
    };
    let by_quadrature = adaptive_quadrature(kernel, -q_limit, q_limit, 1e-12)?.value;
    if (extrapolated - by_quadrature).abs() > 1e-8 {
        return Err(Error::SweepValidation(format!(
            "secant discrete-overlap reference {extrapolated} vs kernel quadrature {by_quadrature}"
        )));
    }
    Ok(result)
}
