//! Truncated Fock-basis matrices for the CV gate set.
//!
//! Passive and Gaussian gates use exact matrix elements generated column by
//! column from the Heisenberg action of the gate on `â†`; the retained block is
//! therefore the top-left corner of the true unitary and amplitude pushed past
//! the cutoff is lost rather than folded back. Gates diagonal in `x̂` go through
//! the spectral decomposition of a padded truncated `x̂`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, C64};
use crate::symplectic::{beamsplitter_mode_matrix, Gate};

/// Extra levels used when an operator function is evaluated spectrally.
const SPECTRAL_PAD: usize = 60;

/// Column-norm tolerance for the low-photon block of a gate.
pub const LEAKAGE_TOL: f64 = 1e-3;

/// A gate realised as a dense matrix on `arity` modes of cutoff `cutoff`.
///
/// Two-mode matrices index `|n₁, n₂⟩` as `n₁ · D + n₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub arity: usize,
    pub cutoff: usize,
    pub entries: DMatrix<C64>,
    /// The elementary gate this matrix realises, `None` for fused products.
    pub gate: Option<Gate>,
}

impl GateMatrix {
    pub fn identity(arity: usize, cutoff: usize) -> Self {
        let dim = cutoff.pow(arity as u32);
        Self { arity, cutoff, entries: DMatrix::identity(dim, dim), gate: None }
    }

    /// Product `self · earlier` (apply `earlier` first).
    pub fn then_after(&self, earlier: &GateMatrix) -> Result<GateMatrix> {
        if self.arity != earlier.arity || self.cutoff != earlier.cutoff {
            return Err(Error::DimensionMismatch("cannot fuse gates of different shapes".into()));
        }
        Ok(GateMatrix {
            arity: self.arity,
            cutoff: self.cutoff,
            entries: &self.entries * &earlier.entries,
            gate: None,
        })
    }

    /// Largest column-norm deficit `1 − ‖col‖²` over inputs with total photon number `≤ D/2`.
    pub fn leakage(&self) -> f64 {
        let d = self.cutoff;
        let dim = self.entries.ncols();
        let mut worst: f64 = 0.0;
        for col in 0..dim {
            let total: usize = (0..self.arity).map(|k| (col / d.pow((self.arity - 1 - k) as u32)) % d).sum();
            let low = total <= d / 2;
            if low {
                let norm: f64 = self.entries.column(col).iter().map(|v| v.norm_sqr()).sum();
                worst = worst.max(1.0 - norm);
            }
        }
        worst
    }
}

fn check_cutoff(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::CutoffTooSmall { cutoff: d, reason: "at least two Fock levels are required".into() });
    }
    Ok(())
}

/// Matrix of the gate at cutoff `d`. Two-mode gates act on `(modes[0], modes[1])` in that order.
pub fn gate_matrix(gate: &Gate, d: usize) -> Result<GateMatrix> {
    check_cutoff(d)?;
    let entries = match *gate {
        Gate::Rotation { phi } => rotation(phi, d),
        Gate::Displacement { alpha } => displacement(alpha, d),
        Gate::Squeeze { r, phase } => squeeze(r, phase, d),
        Gate::Beamsplitter { theta, phi } => passive_two_mode(&beamsplitter_mode_matrix(theta, phi), d),
        Gate::Kerr { kappa } => kerr(kappa, d),
        Gate::CubicPhase { gamma } => {
            spectral_x_function(d, |x| C64::from_polar(1.0, gamma * x * x * x / 3.0))
        }
        Gate::ControlledX { s } => conditional_displacement(d, |x| s * x),
    };
    Ok(GateMatrix { arity: gate.arity(), cutoff: d, entries, gate: Some(*gate) })
}

/// `exp(−iφ n̂)`.
pub fn rotation(phi: f64, d: usize) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| C64::from_polar(1.0, -phi * n as f64)))
}

/// `exp(iκ n̂²)`.
pub fn kerr(kappa: f64, d: usize) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| C64::from_polar(1.0, kappa * (n * n) as f64)))
}

/// Coherent amplitudes `e^{−|β|²/2} βⁿ/√n!` for `n < len`.
pub fn coherent_amplitudes(beta: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            c = c * beta / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Displacement with phase-space amplitude `α` (`x ↦ x + Re α`); Fock amplitude `β = α/√2`.
///
/// Uses `⟨n+a|D(β)|n⟩ = √(n!/(n+a)!) β^a e^{−|β|²/2} L_n^{(a)}(|β|²)` (and its adjoint
/// counterpart above the diagonal), evaluated in log magnitude so large `|β|` stays finite.
pub fn displacement(alpha: C64, d: usize) -> DMatrix<C64> {
    let beta = alpha / std::f64::consts::SQRT_2;
    if beta == C64::new(0.0, 0.0) {
        return DMatrix::identity(d, d);
    }
    let x = beta.norm_sqr();
    let (ln_b, arg) = (beta.norm().ln(), beta.arg());
    let ln_fact = ln_factorials(d);
    let mut u = DMatrix::zeros(d, d);
    let mut lag = vec![0.0; d];
    for a in 0..d {
        let len = d - a;
        let af = a as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + af - x;
        }
        for k in 1..len.saturating_sub(1) {
            let kf = k as f64;
            lag[k + 1] = ((2.0 * kf + 1.0 + af - x) * lag[k] - (kf + af) * lag[k - 1]) / (kf + 1.0);
        }
        for k in 0..len {
            let l = lag[k];
            if l == 0.0 {
                continue;
            }
            let mag = (0.5 * (ln_fact[k] - ln_fact[k + a]) + af * ln_b - 0.5 * x + l.abs().ln()).exp();
            let v = mag * l.signum();
            u[(k + a, k)] = C64::from_polar(v, af * arg);
            if a > 0 {
                // ⟨k|D|k+a⟩ = (−β*)^a ... = (−1)^a conj of the lower entry's phase
                let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                u[(k, k + a)] = C64::from_polar(sign * v, -af * arg);
            }
        }
    }
    u
}

/// Squeezed-vacuum amplitudes of `S(r e^{iφ})|0⟩` for levels `< len`.
pub fn squeezed_vacuum(r: f64, phase: f64, len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    let ratio = -C64::from_polar(1.0, phase) * r.tanh();
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut k = 0;
    while 2 * k < len {
        out[2 * k] = c;
        // √((2k+2)!)/(2^{k+1}(k+1)!) over √((2k)!)/(2^k k!) = √((2k+1)(2k+2)) / (2(k+1))
        let step = (((2 * k + 1) * (2 * k + 2)) as f64).sqrt() / (2.0 * (k + 1) as f64);
        c = c * ratio * step;
        k += 1;
    }
    out
}

/// `S(z) = exp(½(z* â² − z â†²))` with `z = r e^{iφ}`.
pub fn squeeze(r: f64, phase: f64, d: usize) -> DMatrix<C64> {
    if r == 0.0 {
        return DMatrix::identity(d, d);
    }
    // S = exp(−t a†²/2) (cosh r)^{−(n̂+½)} exp(t* a²/2), t = e^{iφ} tanh r, summed term by
    // term in log magnitude; each term stays bounded where a column recurrence would not.
    let (r, phase) = if r < 0.0 { (-r, phase + std::f64::consts::PI) } else { (r, phase) };
    let ln_half_t = (r.tanh() / 2.0).ln();
    let ln_ch = r.cosh().ln();
    let lf = ln_factorials(d);
    let mut u = DMatrix::zeros(d, d);
    for m in 0..d {
        for n in (m % 2..d).step_by(2) {
            let mut acc = C64::new(0.0, 0.0);
            for k in (m % 2..=m.min(n)).step_by(2) {
                let (j, i) = ((m - k) / 2, (n - k) / 2);
                let ln_mag = (j + i) as f64 * ln_half_t - lf[j] - lf[i] + 0.5 * (lf[m] + lf[n]) - lf[k]
                    - (k as f64 + 0.5) * ln_ch;
                let arg = j as f64 * (phase + std::f64::consts::PI) - i as f64 * phase;
                acc += C64::from_polar(ln_mag.exp(), arg);
            }
            u[(m, n)] = acc;
        }
    }
    u
}

/// `ln k!` for `k < len`.
fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(1));
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..len {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Two-mode passive gate with Heisenberg action `â_i ↦ Σ_j u_ij â_j`.
pub fn passive_two_mode(u: &DMatrix<C64>, d: usize) -> DMatrix<C64> {
    let dim = d * d;
    let mut g = DMatrix::zeros(dim, dim);
    let idx = |a: usize, b: usize| a * d + b;
    g[(0, 0)] = C64::new(1.0, 0.0);
    // B â_i† B† = Σ_j u_ji â_j†, so √n_i U[m, n] = Σ_j u_ji √m_j U[m − e_j, n − e_i].
    for n1 in 0..d {
        for n2 in 0..d {
            if n1 + n2 == 0 {
                continue;
            }
            let (i, prev) = if n1 > 0 { (0, idx(n1 - 1, n2)) } else { (1, idx(n1, n2 - 1)) };
            let ni = if i == 0 { n1 } else { n2 } as f64;
            let col = idx(n1, n2);
            let total = n1 + n2;
            for m1 in 0..d.min(total + 1) {
                let m2 = total - m1;
                if m2 >= d {
                    continue;
                }
                let mut acc = C64::new(0.0, 0.0);
                if m1 > 0 {
                    acc += u[(0, i)] * (m1 as f64).sqrt() * g[(idx(m1 - 1, m2), prev)];
                }
                if m2 > 0 {
                    acc += u[(1, i)] * (m2 as f64).sqrt() * g[(idx(m1, m2 - 1), prev)];
                }
                g[(idx(m1, m2), col)] = acc / ni.sqrt();
            }
        }
    }
    g
}

/// Truncated `x̂ = (â + â†)/√2` on `d` levels.
pub fn x_operator(d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(d, d);
    for n in 1..d {
        let v = (n as f64 / 2.0).sqrt();
        x[(n - 1, n)] = v;
        x[(n, n - 1)] = v;
    }
    x
}

/// Truncated `p̂ = (â − â†)/(√2 i)` on `d` levels.
pub fn p_operator(d: usize) -> DMatrix<C64> {
    let mut p = DMatrix::zeros(d, d);
    for n in 1..d {
        let v = (n as f64 / 2.0).sqrt();
        p[(n - 1, n)] = C64::new(0.0, -v);
        p[(n, n - 1)] = C64::new(0.0, v);
    }
    p
}

/// Truncated annihilation operator.
pub fn annihilation(d: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

/// Eigen-decomposition of the padded truncated `x̂`.
fn x_spectrum(d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(x_operator(d + SPECTRAL_PAD));
    (eig.eigenvalues, eig.eigenvectors)
}

/// `f(x̂)` restricted to `d` levels, with `f` applied on the spectrum of a padded `x̂`.
pub fn spectral_x_function(d: usize, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let (vals, vecs) = x_spectrum(d);
    let mut out = DMatrix::zeros(d, d);
    for k in 0..vals.len() {
        let fk = f(vals[k]);
        for j in 0..d {
            let vj = vecs[(j, k)];
            if vj == 0.0 {
                continue;
            }
            let w = fk * vj;
            for i in 0..d {
                out[(i, j)] += w * vecs[(i, k)];
            }
        }
    }
    out
}

/// `exp(−i φ(x̂₁) ⊗ p̂₂)`: displaces the second mode's `x` by `φ` of the first mode's `x`.
pub fn conditional_displacement(d: usize, phi: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = x_spectrum(d);
    let dim = d * d;
    let mut out = DMatrix::zeros(dim, dim);
    for k in 0..vals.len() {
        let disp = displacement(C64::new(phi(vals[k]), 0.0), d);
        let v = vecs.column(k);
        if v.rows(0, d).iter().all(|x| x.abs() < 1e-300) {
            continue;
        }
        for i1 in 0..d {
            for j1 in 0..d {
                let w = v[i1] * v[j1];
                if w == 0.0 {
                    continue;
                }
                for i2 in 0..d {
                    for j2 in 0..d {
                        out[(i1 * d + i2, j1 * d + j2)] += disp[(i2, j2)] * w;
                    }
                }
            }
        }
    }
    out
}

/// Gate matrix from exponentiating the generator truncated at `d` levels.
///
/// Exact on the truncated space only when the generator does not couple to the
/// cutoff; used as a cross-check for the closed-form constructions.
pub fn generator_gate_matrix(gate: &Gate, d: usize) -> Result<DMatrix<C64>> {
    check_cutoff(d)?;
    let a = annihilation(d).map(|v| C64::new(v, 0.0));
    let ad = a.adjoint();
    let kron = |x: &DMatrix<C64>, y: &DMatrix<C64>| x.kronecker(y);
    let i = C64::new(0.0, 1.0);
    let gen = match *gate {
        Gate::Rotation { phi } => (&ad * &a) * (-i * phi),
        Gate::Kerr { kappa } => {
            let n = &ad * &a;
            (&n * &n) * (i * kappa)
        }
        Gate::Displacement { alpha } => {
            let beta = alpha / std::f64::consts::SQRT_2;
            &ad * beta - &a * beta.conj()
        }
        Gate::Squeeze { r, phase } => {
            let z = C64::from_polar(r, phase);
            ((&a * &a) * z.conj() - (&ad * &ad) * z) * C64::new(0.5, 0.0)
        }
        Gate::Beamsplitter { theta, phi } => {
            let e = C64::from_polar(1.0, phi);
            (kron(&a, &ad) * e - kron(&ad, &a) * e.conj()) * C64::new(theta, 0.0)
        }
        Gate::CubicPhase { gamma } => {
            let x = x_operator(d).map(|v| C64::new(v, 0.0));
            (&x * &x * &x) * (i * gamma / 3.0)
        }
        Gate::ControlledX { s } => {
            let x = x_operator(d).map(|v| C64::new(v, 0.0));
            kron(&x, &p_operator(d)) * (-i * s)
        }
    };
    Ok(expm(&gen))
}
