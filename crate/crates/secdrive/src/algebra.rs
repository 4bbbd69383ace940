//! Spin-j operator construction and the dense complex matrix/vector kernel.
//!
//! Matrices use the `J_z` eigenbasis ordered `m = j, j-1, …, -j` (row 0 is the
//! highest weight). Dimensions stay small (d = 2j+1 ≤ ~21), so everything is
//! dense and allocation cost is irrelevant next to clarity.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix (Hamiltonians, invariants, rotations).
pub type Operator = Array2<Complex64>;
/// Complex amplitude vector.
pub type State = Array1<Complex64>;

/// Spin representation label `j` with dimension `d = 2j + 1`.
///
/// Stored as `2j` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spin {
    two_j: u32,
}

impl Spin {
    /// Builds the spin from the label `j`; `2j` must be a non-negative integer.
    pub fn new(j: f64) -> Result<Self> {
        let two_j = 2.0 * j;
        if !two_j.is_finite() || two_j < 0.0 || (two_j - two_j.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self {
            two_j: two_j.round() as u32,
        })
    }

    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Matrix dimension `2j + 1`.
    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum numbers in basis order `j, j-1, …, -j`.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m_at(k)).collect()
    }

    /// The `m` value stored at row `k`.
    pub fn m_at(&self, k: usize) -> f64 {
        (self.two_j as f64 - 2.0 * k as f64) / 2.0
    }

    /// Row index of the magnetic quantum number `m`.
    ///
    /// `m` must differ from `j` by an integer and satisfy `|m| <= j`.
    pub fn index_of_m(&self, m: f64) -> Result<usize> {
        let err = Error::InvalidQuantumNumber { j: self.j(), m };
        let two_m = 2.0 * m;
        if !two_m.is_finite() || (two_m - two_m.round()).abs() > 1e-9 {
            return Err(err);
        }
        let two_m = two_m.round() as i64;
        let two_j = self.two_j as i64;
        if two_m.abs() > two_j || (two_j - two_m) % 2 != 0 {
            return Err(err);
        }
        Ok(((two_j - two_m) / 2) as usize)
    }

    /// Basis state `|m⟩`.
    pub fn basis_state(&self, m: f64) -> Result<State> {
        let k = self.index_of_m(m)?;
        let mut psi = State::zeros(self.dim());
        psi[k] = Complex64::new(1.0, 0.0);
        Ok(psi)
    }
}

/// Cartesian axis of an angular-momentum component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Standard `(2j+1)`-dimensional angular-momentum matrix along `axis`.
///
/// `J_z` is diagonal; `J_x` and `J_y` come from the ladder operators with
/// `⟨m±1|J_±|m⟩ = sqrt(j(j+1) - m(m±1))`.
pub fn angular_momentum(spin: Spin, axis: Axis) -> Operator {
    let d = spin.dim();
    let j = spin.j();
    let mut out = Operator::zeros((d, d));
    match axis {
        Axis::Z => {
            for k in 0..d {
                out[[k, k]] = Complex64::new(spin.m_at(k), 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // J_+ raises m, i.e. maps row k to row k-1 in this ordering.
            for k in 1..d {
                let m = spin.m_at(k);
                let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                match axis {
                    Axis::X => {
                        // (J_+ + J_-)/2; hermiticity fills the mirror entry.
                        out[[k - 1, k]] = Complex64::new(amp / 2.0, 0.0);
                        out[[k, k - 1]] = Complex64::new(amp / 2.0, 0.0);
                    }
                    Axis::Y => {
                        // (J_+ - J_-)/(2i)
                        out[[k - 1, k]] = Complex64::new(0.0, -amp / 2.0);
                        out[[k, k - 1]] = Complex64::new(0.0, amp / 2.0);
                    }
                    Axis::Z => unreachable!(),
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &Operator) -> Operator {
    a.t().mapv(|z| z.conj())
}

/// Frobenius norm.
pub fn frobenius_norm(a: &Operator) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation from `A = A†`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let (n, _) = a.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in i..n {
            let dev = (a[[i, k]] - a[[k, i]].conj()).norm();
            worst = worst.max(dev);
        }
    }
    worst
}

/// Largest entrywise deviation of `U†U` from the identity.
pub fn unitarity_defect(u: &Operator) -> f64 {
    let gram = dagger(u).dot(u);
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            let target = if i == k {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((gram[[i, k]] - target).norm());
        }
    }
    worst
}

/// Inner product `⟨a|b⟩` (conjugate-linear in the first argument).
pub fn inner(a: &State, b: &State) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a state.
pub fn state_norm(psi: &State) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Commutator `AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    Ok(a.dot(b) - b.dot(a))
}

/// Matrix exponential by scaling and squaring with a Taylor series.
///
/// Accurate to better than 1e-12 relative Frobenius error for the dimensions
/// used here (d ≤ 21, spectral radii up to a few tens).
pub fn mat_exp(a: &Operator) -> Result<Operator> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(a.nrows(), a.ncols()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    let norm = frobenius_norm(a);
    // Scale so the series argument has norm <= 0.5.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 2f64.powi(squarings as i32);
    let scaled = a.mapv(|z| z / scale);

    let mut sum = Operator::eye(n);
    let mut term = Operator::eye(n);
    for k in 1..=64u64 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        sum += &term;
        if frobenius_norm(&term) <= 1e-18 * frobenius_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    Ok(sum)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Each eigenvector is phase-fixed so its
/// largest-modulus component is real positive (ties broken by the lowest row
/// index); callers that need a smooth gauge must not rely on this output.
pub fn eigh(a: &Operator) -> Result<(Vec<f64>, Operator)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(a.nrows(), a.ncols()));
    }
    let defect = hermiticity_defect(a);
    if defect > 1e-10 {
        return Err(Error::NonHermitian(defect));
    }
    let n = a.nrows();
    // Work on the exactly Hermitian part so roundoff in the input cannot leak
    // imaginary diagonals into the iteration.
    let mut w = Operator::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            w[[i, k]] = (a[[i, k]] + a[[k, i]].conj()) / 2.0;
        }
    }
    let mut v = Operator::eye(n);
    let scale = frobenius_norm(&w).max(1.0);

    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| w[[p, q]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[[p, q]];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = w[[p, p]].re;
                let aqq = w[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary pivot G: G[p,p]=c, G[p,q]=s, G[q,p]=-s*conj(phase),
                // G[q,q]=c*conj(phase); A <- G† A G, V <- V G.
                let gpp = Complex64::new(c, 0.0);
                let gpq = Complex64::new(s, 0.0);
                let gqp = -s * phase.conj();
                let gqq = c * phase.conj();
                for i in 0..n {
                    let wp = w[[i, p]];
                    let wq = w[[i, q]];
                    w[[i, p]] = wp * gpp + wq * gqp;
                    w[[i, q]] = wp * gpq + wq * gqq;
                }
                for k in 0..n {
                    let wp = w[[p, k]];
                    let wq = w[[q, k]];
                    w[[p, k]] = gpp.conj() * wp + gqp.conj() * wq;
                    w[[q, k]] = gpq.conj() * wp + gqq.conj() * wq;
                }
                w[[p, q]] = Complex64::new(0.0, 0.0);
                w[[q, p]] = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = vp * gpp + vq * gqp;
                    v[[i, q]] = vp * gpq + vq * gqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| w[[i, i]].re.partial_cmp(&w[[k, k]].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[[i, i]].re).collect();
    let mut vectors = Operator::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        // Phase convention: largest-modulus component real positive.
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..n {
            let mag = v[[i, src]].norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = v[[best, src]];
        let fix = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[[i, col]] = v[[i, src]] * fix;
        }
    }
    Ok((eigenvalues, vectors))
}
