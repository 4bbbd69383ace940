//! The secant-pulse-driven model: Hamiltonian, gauge transformation,
//! dynamical invariant, Bloch-sphere trajectory, and the invariant
//! eigenbasis in a smooth single-valued gauge.
//!
//! Everything is parametrized by the drive angle `ϑ(t)`: for the secant pulse
//! `ϑ = νt/2` on the open window `|t| < π/ν`; for the generalized pulse
//! `ϑ(t) = ½∫Ω_x + ϑ₀` with `|ϑ| < π/2`. The field `Ω_z = -½ Ω_x sec ϑ`
//! diverges as `|ϑ| → π/2`, so operations that evaluate `sec ϑ` carry a
//! guard band of width [`SINGULARITY_GUARD`] around the poles.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::algebra::{angular_momentum, dagger, mat_exp, Axis, Operator, Spin, State};
use crate::{Error, Result};

/// Half-width of the guard band around `|ϑ| = π/2` where `sec ϑ` is treated
/// as divergent.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Named drive envelope `Ω_x(t)` for the generalized pulse, in radians/time.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    /// `Ω_x(t) = amplitude`.
    Constant { amplitude: f64 },
    /// `Ω_x(t) = amplitude · exp(-(t - center)² / (2 sigma²))`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        center: f64,
    },
    /// `Ω_x(t) = amplitude · sin²(π (t - start) / period)` for one period
    /// starting at `start`, zero outside.
    Sin2 {
        amplitude: f64,
        period: f64,
        start: f64,
    },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant { amplitude } => amplitude,
            Envelope::Gaussian {
                amplitude,
                sigma,
                center,
            } => {
                let u = (t - center) / sigma;
                amplitude * (-0.5 * u * u).exp()
            }
            Envelope::Sin2 {
                amplitude,
                period,
                start,
            } => {
                let u = (t - start) / period;
                if (0.0..=1.0).contains(&u) {
                    amplitude * (PI * u).sin().powi(2)
                } else {
                    0.0
                }
            }
        }
    }

    /// Same shape with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Envelope {
        let mut out = self.clone();
        match &mut out {
            Envelope::Constant { amplitude }
            | Envelope::Gaussian { amplitude, .. }
            | Envelope::Sin2 { amplitude, .. } => *amplitude *= factor,
        }
        out
    }
}

/// Cached drive angle `ϑ(t)` for a generalized pulse, sampled on a dense grid
/// with cubic Hermite interpolation (the derivative `ϑ' = Ω_x/2` is known
/// exactly at every node).
#[derive(Debug, Clone)]
struct ThetaCache {
    t_start: f64,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl ThetaCache {
    fn build(envelope: &Envelope, theta0: f64, window: (f64, f64)) -> Result<Self> {
        let (t0, t1) = window;
        let span = t1 - t0;
        let mut n = 4097usize;
        let mut prev: Option<ThetaCache> = None;
        loop {
            let cache = Self::build_with_nodes(envelope, theta0, window, n)?;
            if let Some(p) = &prev {
                // Nodes of the coarse grid are every second node of the fine one.
                let change = p
                    .values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (v - cache.values[2 * k]).abs())
                    .fold(0.0f64, f64::max);
                if change < 1e-10 {
                    return Ok(cache);
                }
            }
            prev = Some(cache);
            n = 2 * n - 1;
            if n > (1 << 20) {
                return Err(Error::InvalidPulse(format!(
                    "drive-angle cache did not converge on window [{t0}, {t1}] (span {span})"
                )));
            }
        }
    }

    fn build_with_nodes(
        envelope: &Envelope,
        theta0: f64,
        window: (f64, f64),
        n: usize,
    ) -> Result<Self> {
        let (t0, t1) = window;
        let step = (t1 - t0) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        let mut acc = theta0;
        values.push(acc);
        derivs.push(envelope.value(t0) / 2.0);
        for k in 1..n {
            let a = t0 + (k - 1) as f64 * step;
            let b = t0 + k as f64 * step;
            let piece =
                crate::numerics::adaptive_quadrature(|t| envelope.value(t) / 2.0, a, b, 1e-14)?;
            acc += piece.value;
            values.push(acc);
            derivs.push(envelope.value(b) / 2.0);
        }
        Ok(Self {
            t_start: t0,
            step,
            values,
            derivs,
        })
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t - self.t_start) / self.step;
        // Clamp to the edge segments; finite-difference probes may poke a
        // hair beyond the window and ride the boundary cubic.
        let seg = (x.floor() as isize).clamp(0, n as isize - 2) as usize;
        let u = x - seg as f64;
        let (y0, y1) = (self.values[seg], self.values[seg + 1]);
        let (d0, d1) = (self.derivs[seg] * self.step, self.derivs[seg + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + d0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + d1 * (u3 - u2)
    }
}

/// Generalized pulse: arbitrary non-negative envelope `Ω_x(t)` with drive
/// angle offset `ϑ₀` on a finite window.
#[derive(Debug, Clone)]
pub struct GeneralPulse {
    envelope: Envelope,
    theta0: f64,
    window: (f64, f64),
    cache: ThetaCache,
}

/// The drive definition: the secant model with scanning frequency `ν`, or the
/// generalized model with envelope `Ω_x(t)` and offset `ϑ₀`.
#[derive(Debug, Clone)]
pub enum PulseSpec {
    Secant { nu: f64 },
    General(GeneralPulse),
}

impl PulseSpec {
    /// Secant pulse with scanning frequency `nu > 0`; window `|t| < π/ν`.
    pub fn secant(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidPulse(format!("nu must be > 0 (got {nu})")));
        }
        Ok(PulseSpec::Secant { nu })
    }

    /// Generalized pulse on `window`; builds the `ϑ` cache and validates
    /// `|ϑ(t)| < π/2` on a dense grid.
    pub fn general(envelope: Envelope, theta0: f64, window: (f64, f64)) -> Result<Self> {
        let (t0, t1) = window;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidPulse(format!(
                "window [{t0}, {t1}] is not a finite increasing interval"
            )));
        }
        if !theta0.is_finite() || theta0.abs() >= FRAC_PI_2 {
            return Err(Error::InvalidPulse(format!(
                "theta0 = {theta0} must satisfy |theta0| < pi/2"
            )));
        }
        let cache = ThetaCache::build(&envelope, theta0, window)?;
        // The cache grid has >= 4097 nodes, comfortably past the 1001-point
        // validation requirement.
        for (k, &theta) in cache.values.iter().enumerate() {
            if theta.abs() >= FRAC_PI_2 {
                let t = t0 + k as f64 * cache.step;
                return Err(Error::InvalidPulse(format!(
                    "drive angle |theta({t})| = {} >= pi/2",
                    theta.abs()
                )));
            }
        }
        Ok(PulseSpec::General(GeneralPulse {
            envelope,
            theta0,
            window,
            cache,
        }))
    }

    /// Allowed (open) time window of the drive.
    pub fn window(&self) -> (f64, f64) {
        match self {
            PulseSpec::Secant { nu } => (-PI / nu, PI / nu),
            PulseSpec::General(g) => g.window,
        }
    }

    /// Drive angle `ϑ(t)`: `νt/2` for the secant pulse, the cached integral
    /// for the generalized one.
    pub fn phase_angle(&self, t: f64) -> f64 {
        match self {
            PulseSpec::Secant { nu } => nu * t / 2.0,
            PulseSpec::General(g) => g.cache.eval(t),
        }
    }

    /// Instantaneous x-drive `Ω_x(t)`.
    pub fn drive_rate(&self, t: f64) -> f64 {
        match self {
            PulseSpec::Secant { nu } => *nu,
            PulseSpec::General(g) => g.envelope.value(t),
        }
    }

    /// Offset `ϑ₀` of the generalized pulse (`0` for the secant model).
    pub fn theta0(&self) -> f64 {
        match self {
            PulseSpec::Secant { .. } => 0.0,
            PulseSpec::General(g) => g.theta0,
        }
    }

    /// Step used for centered finite differences in `t`, scaled to the local
    /// drive rate.
    pub fn fd_step(&self, t: f64) -> f64 {
        let rate = match self {
            PulseSpec::Secant { nu } => *nu,
            PulseSpec::General(g) => {
                let (t0, t1) = g.window;
                g.envelope.value(t).abs().max(2.0 * PI / (t1 - t0))
            }
        };
        1e-6 / rate
    }

    /// Inverts `ϑ(t) = theta` on the window (the drive angle is monotone
    /// non-decreasing for the supported envelopes).
    pub fn time_at_phase_angle(&self, theta: f64) -> Result<f64> {
        match self {
            PulseSpec::Secant { nu } => Ok(2.0 * theta / nu),
            PulseSpec::General(g) => {
                let (mut lo, mut hi) = g.window;
                let (th_lo, th_hi) = (self.phase_angle(lo), self.phase_angle(hi));
                if theta < th_lo - 1e-12 || theta > th_hi + 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "phase angle {theta} outside the attained range [{th_lo}, {th_hi}]"
                    )));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.phase_angle(mid) < theta {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    let mid = 0.5 * (lo + hi);
                    if hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    pub(crate) fn guard(&self, op: &'static str, t: f64) -> Result<f64> {
        let angle = self.phase_angle(t);
        if angle.abs() >= FRAC_PI_2 - SINGULARITY_GUARD {
            return Err(Error::Singularity {
                op,
                angle,
                guard: FRAC_PI_2 - SINGULARITY_GUARD,
            });
        }
        Ok(angle)
    }
}

/// Point on the unit Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPoint {
    /// Polar angle in `[0, π]`.
    pub theta: f64,
    /// Azimuth in `[0, 2π)`.
    pub phi: f64,
}

impl BlochPoint {
    /// Cartesian unit vector `(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        let (sp, cp) = (self.phi.sin(), self.phi.cos());
        [st * cp, st * sp, ct]
    }
}

/// Drive Hamiltonian `H(t) = Ω_x(t) (J_x - ½ sec ϑ(t) J_z)`.
pub fn hamiltonian(pulse: &PulseSpec, spin: Spin, t: f64) -> Result<Operator> {
    let angle = pulse.guard("hamiltonian", t)?;
    let rate = pulse.drive_rate(t);
    let jx = angular_momentum(spin, Axis::X);
    let jz = angular_momentum(spin, Axis::Z);
    let sec = 1.0 / angle.cos();
    Ok(jx.mapv(|z| z * rate) + jz.mapv(|z| z * (-0.5 * rate * sec)))
}

/// Gauge angles `α(t) = β(t) = π/2 - ϑ(t)`, both in `(0, π)`.
pub fn gauge_angles(pulse: &PulseSpec, t: f64) -> (f64, f64) {
    let a = FRAC_PI_2 - pulse.phase_angle(t);
    (a, a)
}

/// Gauge transformation `G(t) = exp(iα J_x) exp(iβ J_y)`.
pub fn gauge_transform(pulse: &PulseSpec, spin: Spin, t: f64) -> Operator {
    let (alpha, beta) = gauge_angles(pulse, t);
    let jx = angular_momentum(spin, Axis::X);
    let jy = angular_momentum(spin, Axis::Y);
    let ga = mat_exp(&jx.mapv(|z| Complex64::new(0.0, alpha) * z))
        .expect("finite angular-momentum matrix");
    let gb = mat_exp(&jy.mapv(|z| Complex64::new(0.0, beta) * z))
        .expect("finite angular-momentum matrix");
    ga.dot(&gb)
}

/// Effective Hamiltonian `G†HG - iG†(∂_t G)` in the transformed frame,
/// with `∂_t G` by centered finite difference.
///
/// Equals `-½ Ω_x(t) sec ϑ(t) J_z` up to the finite-difference error.
pub fn effective_hamiltonian(pulse: &PulseSpec, spin: Spin, t: f64) -> Result<Operator> {
    pulse.guard("effective_hamiltonian", t)?;
    let h = hamiltonian(pulse, spin, t)?;
    let g = gauge_transform(pulse, spin, t);
    let step = pulse.fd_step(t);
    let gp = gauge_transform(pulse, spin, t + step);
    let gm = gauge_transform(pulse, spin, t - step);
    let dg = (gp - gm).mapv(|z| z / (2.0 * step));
    let gd = dagger(&g);
    let i = Complex64::new(0.0, 1.0);
    Ok(gd.dot(&h).dot(&g) - gd.dot(&dg).mapv(|z| i * z))
}

/// Lewis-Riesenfeld invariant
/// `I(t) = -cos ϑ J_x + sin ϑ (cos ϑ J_y + sin ϑ J_z)`.
pub fn invariant(pulse: &PulseSpec, spin: Spin, t: f64) -> Operator {
    let angle = pulse.phase_angle(t);
    let (s, c) = angle.sin_cos();
    let jx = angular_momentum(spin, Axis::X);
    let jy = angular_momentum(spin, Axis::Y);
    let jz = angular_momentum(spin, Axis::Z);
    jx.mapv(|z| z * (-c)) + jy.mapv(|z| z * (s * c)) + jz.mapv(|z| z * (s * s))
}

/// Bloch angles of the invariant direction:
/// `θ = arccos(sin² ϑ)`, `φ = π - arctan(sin ϑ)`.
pub fn bloch_angles(pulse: &PulseSpec, t: f64) -> BlochPoint {
    let angle = pulse.phase_angle(t);
    let s = angle.sin();
    BlochPoint {
        theta: (s * s).acos(),
        phi: PI - s.atan(),
    }
}

/// Rotation `R(θ, φ) = exp(-iφ J_z) exp(-iθ J_y) exp(iφ J_z)` carrying `J_z`
/// into the Bloch direction `(θ, φ)`; smooth and exactly the identity at
/// `θ = 0`.
pub fn bloch_rotation(spin: Spin, point: BlochPoint) -> Operator {
    let jy = angular_momentum(spin, Axis::Y);
    let w = mat_exp(&jy.mapv(|z| Complex64::new(0.0, -point.theta) * z))
        .expect("finite angular-momentum matrix");
    let d = spin.dim();
    let mut out = Operator::zeros((d, d));
    for row in 0..d {
        let left = Complex64::from_polar(1.0, -point.phi * spin.m_at(row));
        for col in 0..d {
            let right = Complex64::from_polar(1.0, point.phi * spin.m_at(col));
            out[[row, col]] = left * w[[row, col]] * right;
        }
    }
    out
}

/// Eigenstate `|φ_m(t)⟩` of the invariant with eigenvalue `m`, in the smooth
/// single-valued gauge `|φ_m⟩ = R(θ(t), φ(t)) |m⟩`.
///
/// The gauge is single-valued around the loop: as `t → ±π/ν` (secant model)
/// the state returns to `|m⟩` exactly, because `R → 1` at `θ = 0`.
pub fn invariant_eigenstate(pulse: &PulseSpec, spin: Spin, t: f64, m: f64) -> Result<State> {
    let col = spin.index_of_m(m)?;
    let point = bloch_angles(pulse, t);
    let rot = bloch_rotation(spin, point);
    Ok(rot.column(col).to_owned())
}

/// Diabatic levels `E_m(t) = -(m Ω_x / 2)(cos ϑ + sec ϑ)`, indexed like the
/// basis (`m = j` first).
pub fn diabatic_levels(pulse: &PulseSpec, spin: Spin, t: f64) -> Result<Vec<f64>> {
    let angle = pulse.guard("diabatic_levels", t)?;
    let rate = pulse.drive_rate(t);
    let c = angle.cos();
    let factor = -(rate / 2.0) * (c + 1.0 / c);
    Ok(spin.m_values().iter().map(|m| m * factor).collect())
}
