//! Closed-form dynamics: the exact propagated state, the
//! total/dynamical/geometric phase decomposition, and the Berry-connection /
//! solid-angle geometry of the loop evolution.
//!
//! The total phase along the invariant eigenbasis splits as
//! `Φ_m = ∫⟨φ_m| i∂_τ - H |φ_m⟩ dτ`: the first term is the geometric phase,
//! the second the dynamical phase with the diabatic-level kernel. For the
//! secant pulse both integrals have elementary antiderivatives; generalized
//! pulses fall back to adaptive quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::algebra::{inner, Spin, State};
use crate::model::{gauge_transform, invariant_eigenstate, BlochPoint, PulseSpec};
use crate::numerics::adaptive_quadrature;
use crate::{Error, Result};

/// How a phase value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    Quadrature,
    DiscreteOverlap,
    Ode,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Analytic => "analytic",
            Method::Quadrature => "quadrature",
            Method::DiscreteOverlap => "discrete-overlap",
            Method::Ode => "ode",
        };
        f.write_str(name)
    }
}

/// Total/dynamical/geometric phase over a time window; `total` is always the
/// sum of the two parts.
#[derive(Debug, Clone, Copy)]
pub struct PhaseBreakdown {
    pub total: f64,
    pub dynamical: f64,
    pub geometric: f64,
    pub m: f64,
    pub window: (f64, f64),
    pub method: Method,
}

/// Traversal orientation of a loop on the Bloch sphere, as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Clockwise => "clockwise",
            Orientation::Counterclockwise => "counterclockwise",
        })
    }
}

/// Oriented solid angle of a sampled loop.
#[derive(Debug, Clone)]
pub struct LoopGeometry {
    /// Enclosed solid angle in `[0, 4π)`.
    pub solid_angle: f64,
    pub path_samples: Vec<BlochPoint>,
    pub orientation: Orientation,
}

impl LoopGeometry {
    /// Signed solid angle, counterclockwise positive.
    pub fn signed_solid_angle(&self) -> f64 {
        match self.orientation {
            Orientation::Counterclockwise => self.solid_angle,
            Orientation::Clockwise => -self.solid_angle,
        }
    }

    /// Geometric phase `-m · Ω_signed` of a spin state with quantum number
    /// `m` dragged around the loop; clockwise loops give `+m · Ω`.
    pub fn geometric_phase(&self, m: f64) -> f64 {
        -m * self.signed_solid_angle()
    }
}

/// Antiderivative of the gauge-frame phase kernel:
/// `∫ (Ω_x/2) sec ϑ dt = ln(sec ϑ + tan ϑ)`.
fn log_sec_tan(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    ((1.0 + s) / c).ln()
}

/// Exact solution `|ψ_m(t)⟩ = G(t) exp(-i m ∫_{t0}^{t} X₃ dτ) |m⟩` of the
/// driven Schrödinger equation, where `X₃ = -½ Ω_x sec ϑ` is the gauge-frame
/// level spacing.
pub fn analytic_state(pulse: &PulseSpec, spin: Spin, m: f64, t0: f64, t: f64) -> Result<State> {
    spin.index_of_m(m)?;
    let x3_integral = match pulse {
        PulseSpec::Secant { .. } => {
            pulse.guard("analytic_state", t0)?;
            pulse.guard("analytic_state", t)?;
            -(log_sec_tan(pulse.phase_angle(t)) - log_sec_tan(pulse.phase_angle(t0)))
        }
        PulseSpec::General(_) => {
            pulse.guard("analytic_state", t0)?;
            pulse.guard("analytic_state", t)?;
            adaptive_quadrature(
                |tau| -0.5 * pulse.drive_rate(tau) / pulse.phase_angle(tau).cos(),
                t0,
                t,
                1e-10,
            )?
            .value
        }
    };
    let phase = Complex64::from_polar(1.0, -m * x3_integral);
    let g = gauge_transform(pulse, spin, t);
    let basis = spin.basis_state(m)?;
    Ok(g.dot(&basis).mapv(|z| z * phase))
}

/// Geometric-phase kernel `⟨φ_m| i ∂_t |φ_m⟩`.
///
/// Secant pulse: the closed form `2m · ν cos³(νt/2) / [4(1 + sin²(νt/2))]`.
/// Generalized pulse: centered finite difference of the smooth-gauge
/// eigenstate.
pub fn geometric_phase_kernel(pulse: &PulseSpec, m: f64, t: f64) -> f64 {
    match pulse {
        PulseSpec::Secant { nu } => {
            let x = nu * t / 2.0;
            let (s, c) = x.sin_cos();
            2.0 * m * nu * c.powi(3) / (4.0 * (1.0 + s * s))
        }
        PulseSpec::General(_) => {
            // j = |m| always hosts m, down to the trivial j = 0 for m = 0.
            let spin = Spin::new(m.abs()).expect("|m| is a valid spin label");
            connection_by_finite_difference(pulse, spin, m, t)
        }
    }
}

/// `⟨φ_m| i ∂_t |φ_m⟩` by centered finite difference in the smooth gauge.
pub(crate) fn connection_by_finite_difference(
    pulse: &PulseSpec,
    spin: Spin,
    m: f64,
    t: f64,
) -> f64 {
    let h = pulse.fd_step(t);
    let here = invariant_eigenstate(pulse, spin, t, m).expect("validated m");
    let fwd = invariant_eigenstate(pulse, spin, t + h, m).expect("validated m");
    let bwd = invariant_eigenstate(pulse, spin, t - h, m).expect("validated m");
    let derivative = (&fwd - &bwd).mapv(|z| z / (2.0 * h));
    (Complex64::new(0.0, 1.0) * inner(&here, &derivative)).re
}

/// Splits the Lewis-Riesenfeld phase over `[t0, tf]` into geometric and
/// dynamical parts.
///
/// Secant pulse: elementary antiderivatives, `method = Analytic`
/// (`Φ^g = m[2 atan(sin ϑ) - sin ϑ]`, `Φ^d = m[sin ϑ + ln(sec ϑ + tan ϑ)]`
/// between the endpoint drive angles). Generalized pulse: adaptive quadrature
/// to 1e-10, `method = Quadrature`.
pub fn phase_breakdown(
    pulse: &PulseSpec,
    spin: Spin,
    m: f64,
    t0: f64,
    tf: f64,
) -> Result<PhaseBreakdown> {
    spin.index_of_m(m)?;
    pulse.guard("phase_breakdown", t0)?;
    pulse.guard("phase_breakdown", tf)?;
    let (geometric, dynamical, method) = match pulse {
        PulseSpec::Secant { .. } => {
            let x0 = pulse.phase_angle(t0);
            let x1 = pulse.phase_angle(tf);
            let geo = m * (2.0 * x1.sin().atan() - x1.sin() - (2.0 * x0.sin().atan() - x0.sin()));
            let dyn_ = m * (x1.sin() + log_sec_tan(x1) - (x0.sin() + log_sec_tan(x0)));
            (geo, dyn_, Method::Analytic)
        }
        PulseSpec::General(_) => {
            let geo = adaptive_quadrature(
                |t| connection_by_finite_difference(pulse, spin, m, t),
                t0,
                tf,
                1e-10,
            )?
            .value;
            // -E_m(t) with E_m = -(m Ω_x / 2)(cos ϑ + sec ϑ).
            let dyn_ = adaptive_quadrature(
                |t| {
                    let c = pulse.phase_angle(t).cos();
                    m * pulse.drive_rate(t) / 2.0 * (c + 1.0 / c)
                },
                t0,
                tf,
                1e-10,
            )?
            .value;
            (geo, dyn_, Method::Quadrature)
        }
    };
    Ok(PhaseBreakdown {
        total: dynamical + geometric,
        dynamical,
        geometric,
        m,
        window: (t0, tf),
        method,
    })
}

/// Azimuthal component of the Berry connection on the unit sphere:
/// `A_φ = -2m sin²(θ/2) / sin θ` for `m = ±1/2`.
pub fn berry_connection(point: BlochPoint, m: f64) -> Result<f64> {
    if (2.0 * m).abs() != 1.0 {
        return Err(Error::InvalidQuantumNumber { j: 0.5, m });
    }
    if point.theta == 0.0 || point.theta == PI {
        return Err(Error::CoordinateSingularity(point.theta));
    }
    let half = point.theta / 2.0;
    Ok(-2.0 * m * half.sin().powi(2) / point.theta.sin())
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed solid angle of the geodesic triangle `(a, b, c)`, counterclockwise
/// positive as seen from outside the sphere.
fn triangle_solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let numerator = dot(a, cross(b, c));
    let denominator = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * numerator.atan2(denominator)
}

/// Oriented solid angle enclosed by a sampled loop on the Bloch sphere,
/// accumulated as a fan of signed spherical-triangle excesses from the first
/// sample.
///
/// With `closed = true` a duplicated closing sample is dropped; either way
/// the polygon is closed by the geodesic from the last sample back to the
/// first. The result is normalized to `[0, 4π)` with the traversal direction
/// reported separately.
pub fn solid_angle(path: Vec<BlochPoint>, closed: bool) -> Result<LoopGeometry> {
    if path.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 path samples (got {})",
            path.len()
        )));
    }
    let mut vs: Vec<[f64; 3]> = path.iter().map(BlochPoint::unit_vector).collect();
    let chord = |a: [f64; 3], b: [f64; 3]| {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    if closed && chord(vs[0], *vs.last().unwrap()) < 1e-12 {
        vs.pop();
        if vs.len() < 3 {
            return Err(Error::InvalidInput(
                "fewer than 3 distinct samples after dropping the closing duplicate".into(),
            ));
        }
    }
    let n = vs.len();
    for k in 0..n {
        let next = (k + 1) % n;
        let dist = chord(vs[k], vs[next]);
        if next != 0 && dist < 1e-12 {
            return Err(Error::DegeneratePath(k, next));
        }
        // The implicit closing edge of an open path may be long; every
        // sampled edge (and the closing edge of a closed loop) must be fine.
        let is_sampled_edge = next != 0 || closed;
        if is_sampled_edge {
            let separation = 2.0 * (dist / 2.0).clamp(-1.0, 1.0).asin();
            if separation >= 0.1 {
                return Err(Error::PathTooCoarse {
                    index: k,
                    separation,
                });
            }
        }
    }

    let mut signed = 0.0;
    for k in 1..n - 1 {
        signed += triangle_solid_angle(vs[0], vs[k], vs[k + 1]);
    }
    let orientation = if signed < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Counterclockwise
    };
    Ok(LoopGeometry {
        solid_angle: signed.abs().rem_euclid(4.0 * PI),
        path_samples: path,
        orientation,
    })
}
