//! Independent numerical oracles: adaptive Runge-Kutta integration of the
//! Schrödinger equation, adaptive Simpson quadrature with a certified error
//! estimate, and the discrete-overlap (Pancharatnam product) geometric phase.
//!
//! These routines deliberately share no code with the closed forms they are
//! used to check.

use num_complex::Complex64;

use crate::algebra::{inner, state_norm, Operator, Spin, State};
use crate::model::{hamiltonian, PulseSpec};
use crate::{Error, Result};

/// Tolerances and step bounds for the adaptive integrator.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; `0.0` picks `1e-3` of the span automatically.
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 0.0,
            h_min: 1e-13,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let tol_ok = |x: f64| x > 1e-14 && x < 1e-2;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must lie in (1e-14, 1e-2): rel_tol={}, abs_tol={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !self.h_min.is_finite() || self.h_min <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "h_min must be > 0 (got {})",
                self.h_min
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Integrated trajectory sampled at requested times.
///
/// Norms are recorded without renormalization; their drift from 1 is the
/// integrator's global error diagnostic.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub norms: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least t0 and tf")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms
            .iter()
            .map(|n| (n - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the record invariants: strictly increasing times and norm drift
    /// below `10 * rel_tol`.
    pub fn validate(&self, rel_tol: f64) -> Result<()> {
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "trajectory times are not strictly increasing".into(),
            ));
        }
        let drift = self.max_norm_drift();
        if drift >= 10.0 * rel_tol {
            return Err(Error::InvalidInput(format!(
                "norm drift {drift:.3e} exceeds 10*rel_tol"
            )));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `i ∂_t ψ = H(t) ψ` with an embedded Dormand-Prince 5(4) pair,
/// landing exactly on every requested sample time by step clamping.
///
/// `sample_times` must lie inside `[t0, tf]`; `t0` and `tf` are always
/// recorded.
pub fn integrate_with<H>(
    h_of_t: H,
    psi0: &State,
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<TrajectoryRecord>
where
    H: Fn(f64) -> Result<Operator>,
{
    cfg.validate()?;
    if !t0.is_finite() || !tf.is_finite() || tf <= t0 {
        return Err(Error::InvalidInput(format!(
            "integration window [{t0}, {tf}] must be increasing"
        )));
    }
    if (state_norm(psi0) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(
            "initial state is not normalized".into(),
        ));
    }
    let mut targets: Vec<f64> = Vec::with_capacity(sample_times.len() + 1);
    for &s in sample_times {
        if s < t0 - 1e-12 || s > tf + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "sample time {s} outside [{t0}, {tf}]"
            )));
        }
        if s > t0 && s < tf {
            targets.push(s);
        }
    }
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();
    targets.push(tf);

    let rhs = |t: f64, psi: &State| -> Result<State> {
        let h = h_of_t(t)?;
        Ok(h.dot(psi).mapv(|z| Complex64::new(0.0, -1.0) * z))
    };

    let n = psi0.len();
    let mut t = t0;
    let mut y = psi0.clone();
    let mut h = if cfg.h_init > 0.0 {
        cfg.h_init
    } else {
        (tf - t0) * 1e-3
    };
    let mut times = vec![t0];
    let mut states = vec![y.clone()];
    let mut norms = vec![state_norm(&y)];
    let mut k: Vec<State> = vec![State::zeros(n); 7];
    k[0] = rhs(t, &y)?;
    let mut steps = 0usize;
    let mut next_target = 0usize;
    let mut rejected_last = false;

    while next_target < targets.len() {
        let target = targets[next_target];
        // Already at (or within roundoff of) the sample time.
        if target - t <= 1e-14 * (1.0 + target.abs()) {
            times.push(target);
            states.push(y.clone());
            norms.push(state_norm(&y));
            next_target += 1;
            continue;
        }
        if steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(cfg.max_steps));
        }
        steps += 1;

        let mut landing = false;
        if t + h >= target - 1e-14 * (1.0 + target.abs()) {
            h = target - t;
            landing = true;
        }
        if h < cfg.h_min {
            return Err(Error::StepUnderflow {
                t,
                h,
                h_min: cfg.h_min,
            });
        }

        for stage in 1..7 {
            let mut acc = y.clone();
            for prev in 0..stage {
                let a = DP_A[stage][prev];
                if a != 0.0 {
                    acc = acc + k[prev].mapv(|z| z * (h * a));
                }
            }
            k[stage] = rhs(t + DP_C[stage] * h, &acc)?;
        }
        let mut y_new = y.clone();
        let mut err_vec = State::zeros(n);
        for stage in 0..7 {
            if DP_B5[stage] != 0.0 {
                y_new = y_new + k[stage].mapv(|z| z * (h * DP_B5[stage]));
            }
            let diff = DP_B5[stage] - DP_B4[stage];
            if diff != 0.0 {
                err_vec = err_vec + k[stage].mapv(|z| z * (h * diff));
            }
        }
        let mut err_sq = 0.0;
        for i in 0..n {
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(y_new[i].norm());
            let e = err_vec[i].norm() / scale;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            // FSAL: the last stage is the derivative at the accepted point.
            k[0] = k[6].clone();
            if landing {
                t = target;
                times.push(t);
                states.push(y.clone());
                norms.push(state_norm(&y));
                next_target += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, if rejected_last { 1.0 } else { 5.0 })
            };
            h *= factor;
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            rejected_last = true;
            if h < cfg.h_min {
                return Err(Error::StepUnderflow {
                    t,
                    h,
                    h_min: cfg.h_min,
                });
            }
        }
    }

    Ok(TrajectoryRecord {
        times,
        states,
        norms,
    })
}

/// Integrates the driven model `i ∂_t ψ = H(t) ψ` for the given pulse.
pub fn integrate_schrodinger(
    pulse: &PulseSpec,
    spin: Spin,
    psi0: &State,
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<TrajectoryRecord> {
    integrate_with(
        |t| hamiltonian(pulse, spin, t),
        psi0,
        t0,
        tf,
        cfg,
        sample_times,
    )
}

/// Integrates a time-independent Hamiltonian (reference mode for integrator
/// checks against the matrix exponential).
pub fn integrate_constant(
    h: &Operator,
    psi0: &State,
    t0: f64,
    tf: f64,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<TrajectoryRecord> {
    integrate_with(|_| Ok(h.clone()), psi0, t0, tf, cfg, sample_times)
}

/// Quadrature value with its certified error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    /// Sum of interval-halving error estimates over accepted panels.
    pub error_estimate: f64,
}

/// Adaptive Simpson quadrature with Richardson correction; the per-panel
/// interval-halving estimate certifies `error <= tol`.
pub fn adaptive_quadrature<F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "quadrature tolerance must be positive (got {tol})"
        )));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    for (x, v) in [(lo, fa), (m, fm), (hi, fb)] {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "integrand is not finite at t={x}"
            )));
        }
    }
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let (value, error_estimate) = simpson_step(&f, lo, hi, fa, fm, fb, whole, tol, 60)?;
    Ok(QuadratureResult {
        value: sign * value,
        error_estimate,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    if !flm.is_finite() || !frm.is_finite() {
        return Err(Error::InvalidInput(
            "integrand is not finite inside the interval".into(),
        ));
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a) < 1e-300 {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    if depth == 0 {
        return Err(Error::NonConvergence(60));
    }
    let (lv, le) = simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
    let (rv, re) = simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
    Ok((lv + rv, le + re))
}

/// Discrete (Pancharatnam) geometric phase `-arg Π_k ⟨φ_k|φ_{k+1}⟩`.
///
/// With `closed = true` the product includes the closing overlap
/// `⟨φ_N|φ_0⟩`, making the result gauge invariant modulo 2π. For finely
/// sampled open paths in a smooth gauge it reproduces the connection
/// integral `∫⟨φ|i∂_t|φ⟩ dt` without winding ambiguity, because the phase is
/// accumulated per overlap.
pub fn discrete_geometric_phase(samples: &[State], closed: bool) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 samples (got {})",
            samples.len()
        )));
    }
    let mut total_arg = 0.0;
    let count = samples.len() - 1 + usize::from(closed);
    for k in 0..count {
        let a = &samples[k];
        let b = &samples[(k + 1) % samples.len()];
        let ov = inner(a, b);
        let mag = ov.norm();
        if mag <= 0.9 {
            return Err(Error::OverlapTooSmall {
                index: k,
                overlap: mag,
            });
        }
        total_arg += ov.arg();
    }
    Ok(-total_arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{angular_momentum, mat_exp, Axis, Spin};
    use crate::analytic::analytic_state;
    use crate::model::invariant_eigenstate;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn fidelity(a: &State, b: &State) -> f64 {
        inner(a, b).norm_sqr()
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        assert!(IntegratorConfig::with_tol(1e-15, 1e-12).validate().is_err());
        assert!(IntegratorConfig::with_tol(1e-1, 1e-12).validate().is_err());
        let cfg = IntegratorConfig {
            h_min: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig {
            max_steps: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_hamiltonian_matches_matrix_exponential() {
        let spin = Spin::new(0.5).unwrap();
        // H = J_x with Omega_z = 0: outside the driven family, integrated in
        // the direct constant-H mode.
        let h = angular_momentum(spin, Axis::X);
        let psi0 = spin.basis_state(0.5).unwrap();
        let tf = 3.7;
        let cfg = IntegratorConfig::with_tol(1e-12, 1e-13);
        let record = integrate_constant(&h, &psi0, 0.0, tf, &cfg, &[]).unwrap();
        let u = mat_exp(&h.mapv(|z| Complex64::new(0.0, -tf) * z)).unwrap();
        let expected = u.dot(&psi0);
        assert!(fidelity(record.final_state(), &expected) >= 1.0 - 1e-10);
    }

    #[test]
    fn integrator_tracks_analytic_solution() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(0.5).unwrap();
        let (t0, tf) = (-0.95 * PI, 0.95 * PI);
        let psi0 = invariant_eigenstate(&pulse, spin, t0, 0.5).unwrap();
        let cfg = IntegratorConfig::with_tol(1e-12, 1e-12);
        let record = integrate_schrodinger(&pulse, spin, &psi0, t0, tf, &cfg, &[]).unwrap();
        let reference = analytic_state(&pulse, spin, 0.5, t0, tf).unwrap();
        let fid = fidelity(record.final_state(), &reference);
        assert!(fid >= 1.0 - 1e-8, "fidelity {fid}");
        assert!(record.max_norm_drift() < 1e-9);
    }

    #[test]
    fn integrator_lands_on_sample_times() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(0.5).unwrap();
        let psi0 = invariant_eigenstate(&pulse, spin, -2.0, 0.5).unwrap();
        let samples = [-1.5, -0.25, 0.125, 1.75];
        let record = integrate_schrodinger(
            &pulse,
            spin,
            &psi0,
            -2.0,
            2.0,
            &IntegratorConfig::default(),
            &samples,
        )
        .unwrap();
        assert_eq!(record.times.len(), samples.len() + 2);
        assert_eq!(record.times[0], -2.0);
        for (got, want) in record.times[1..].iter().zip(samples.iter()) {
            assert_eq!(got, want);
        }
        assert_eq!(*record.times.last().unwrap(), 2.0);
        record.validate(1e-9).unwrap();
    }

    #[test]
    fn integrator_under_tight_window_near_pole_underflows() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(0.5).unwrap();
        let t0 = -PI * (1.0 - 3e-9);
        let psi0 = spin.basis_state(0.5).unwrap();
        let cfg = IntegratorConfig {
            h_min: 1e-6,
            ..IntegratorConfig::with_tol(1e-10, 1e-12)
        };
        let err = integrate_schrodinger(&pulse, spin, &psi0, t0, 0.0, &cfg, &[]).unwrap_err();
        assert!(
            matches!(err, Error::StepUnderflow { .. } | Error::Singularity { .. }),
            "{err}"
        );
    }

    #[test]
    fn integrator_respects_max_steps() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(0.5).unwrap();
        let psi0 = spin.basis_state(0.5).unwrap();
        let cfg = IntegratorConfig {
            max_steps: 5,
            ..Default::default()
        };
        let err = integrate_schrodinger(&pulse, spin, &psi0, -2.0, 2.0, &cfg, &[]).unwrap_err();
        assert!(matches!(err, Error::MaxStepsExceeded(5)));
    }

    #[test]
    fn norm_drift_scales_with_tolerance() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(0.5).unwrap();
        let (t0, tf) = (-0.9 * PI, 0.9 * PI);
        let psi0 = invariant_eigenstate(&pulse, spin, t0, 0.5).unwrap();
        let drift = |rel: f64, abs: f64| {
            integrate_schrodinger(
                &pulse,
                spin,
                &psi0,
                t0,
                tf,
                &IntegratorConfig::with_tol(rel, abs),
                &[],
            )
            .unwrap()
            .max_norm_drift()
        };
        let loose = drift(1e-5, 1e-7);
        let tight = drift(1e-7, 1e-9);
        assert!(
            loose >= 10.0 * tight,
            "loose={loose:.3e} tight={tight:.3e}"
        );
    }

    #[test]
    fn quadrature_textbook_integrals() {
        let q = adaptive_quadrature(|x| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-12);
        let q = adaptive_quadrature(|_| 0.0, -1.0, 4.0, 1e-12).unwrap();
        assert_eq!(q.value, 0.0);
        // Orientation flips the sign.
        let q = adaptive_quadrature(|x| x.sin(), PI, 0.0, 1e-12).unwrap();
        assert_abs_diff_eq!(q.value, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_geometric_kernel_full_window() {
        // The loop value of the connection kernel is (pi - 2)/2.
        let kernel = |q: f64| (q / 2.0).cos().powi(3) / (4.0 * (1.0 + (q / 2.0).sin().powi(2)));
        let q = adaptive_quadrature(kernel, -PI, PI, 1e-12).unwrap();
        assert_abs_diff_eq!(q.value, (PI - 2.0) / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn quadrature_certified_error_is_monotone_in_tol() {
        let f = |x: f64| (3.0 * x).cos() * (-x).exp();
        let mut last = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8, 1e-10] {
            let q = adaptive_quadrature(f, 0.0, 5.0, tol).unwrap();
            assert!(q.error_estimate <= tol);
            assert!(q.error_estimate <= last);
            last = q.error_estimate;
        }
    }

    #[test]
    fn quadrature_rejects_non_finite() {
        let err = adaptive_quadrature(|x| 1.0 / x, 0.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn discrete_phase_zero_connection_for_m_zero() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(1.0).unwrap();
        let n = 20_001;
        let delta = 1e-4 * PI;
        let samples: Vec<State> = (0..n)
            .map(|k| {
                let q = -(PI - delta) + 2.0 * (PI - delta) * k as f64 / (n - 1) as f64;
                invariant_eigenstate(&pulse, spin, q, 0.0).unwrap()
            })
            .collect();
        let phase = discrete_geometric_phase(&samples, true).unwrap();
        assert!(phase.abs() < 1e-6, "phase {phase:.3e}");
    }

    #[test]
    fn discrete_phase_equator_loop_is_minus_pi() {
        // Spin-1/2 coherent states around the equator pick up -(1/2)(2 pi).
        let spin = Spin::new(0.5).unwrap();
        let n = 40_000;
        let samples: Vec<State> = (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                let point = crate::model::BlochPoint {
                    theta: PI / 2.0,
                    phi,
                };
                crate::model::bloch_rotation(spin, point)
                    .column(0)
                    .to_owned()
            })
            .collect();
        let phase = discrete_geometric_phase(&samples, true).unwrap();
        assert_abs_diff_eq!(phase, -PI, epsilon = 1e-4);
    }

    #[test]
    fn discrete_phase_rejects_coarse_sampling() {
        let spin = Spin::new(0.5).unwrap();
        let samples: Vec<State> = (0..4)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 4.0;
                let point = crate::model::BlochPoint {
                    theta: PI / 2.0,
                    phi,
                };
                crate::model::bloch_rotation(spin, point)
                    .column(0)
                    .to_owned()
            })
            .collect();
        assert!(matches!(
            discrete_geometric_phase(&samples, true),
            Err(Error::OverlapTooSmall { .. })
        ));
        assert!(discrete_geometric_phase(&samples[..2], false).is_err());
    }

    #[test]
    fn oracle_agreement_on_random_windows() {
        // Quadrature of the closed-form kernel vs the discrete-overlap
        // estimate, and closed form vs quadrature, over random (nu, window, m).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let nu: f64 = rng.gen_range(0.2..5.0);
            let m = if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
            let q0: f64 = rng.gen_range(-0.9 * PI..0.5 * PI);
            let q1: f64 = rng.gen_range(q0 + 0.3..0.95 * PI);
            let pulse = PulseSpec::secant(nu).unwrap();
            let spin = Spin::new(0.5).unwrap();

            let kernel = |q: f64| {
                2.0 * m * (q / 2.0).cos().powi(3) / (4.0 * (1.0 + (q / 2.0).sin().powi(2)))
            };
            let by_quad = adaptive_quadrature(kernel, q0, q1, 1e-12).unwrap().value;

            let closed_form = 2.0
                * m
                * ((q1 / 2.0).sin().atan() - (q1 / 2.0).sin() / 2.0
                    - ((q0 / 2.0).sin().atan() - (q0 / 2.0).sin() / 2.0));
            assert!((closed_form - by_quad).abs() < 1e-9);

            let n = 4001;
            let samples: Vec<State> = (0..n)
                .map(|k| {
                    let q = q0 + (q1 - q0) * k as f64 / (n - 1) as f64;
                    invariant_eigenstate(&pulse, spin, q / nu, m).unwrap()
                })
                .collect();
            let discrete = discrete_geometric_phase(&samples, false).unwrap();
            assert!(
                (discrete - by_quad).abs() < 1e-5,
                "nu={nu} m={m} window=({q0},{q1}): discrete={discrete} quad={by_quad}"
            );
        }
    }

    #[test]
    fn ode_matches_analytic_for_j_one() {
        let pulse = PulseSpec::secant(1.0).unwrap();
        let spin = Spin::new(1.0).unwrap();
        let (t0, tf) = (-0.95 * PI, 0.95 * PI);
        let psi0 = invariant_eigenstate(&pulse, spin, t0, 1.0).unwrap();
        let cfg = IntegratorConfig::with_tol(1e-12, 1e-12);
        let record = integrate_schrodinger(&pulse, spin, &psi0, t0, tf, &cfg, &[]).unwrap();
        let reference = analytic_state(&pulse, spin, 1.0, t0, tf).unwrap();
        assert!(fidelity(record.final_state(), &reference) >= 1.0 - 1e-8);
    }
}
