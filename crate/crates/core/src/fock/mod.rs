//! Truncated Fock-space states and their evolution.
//!
//! A state over `n` modes with cutoff `D` stores either `Dⁿ` amplitudes or a
//! dense `Dⁿ × Dⁿ` density matrix, with mode 0 as the most significant index.
//! The trace is tracked, never renormalised, so truncation leakage stays visible.

pub mod gates;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
pub use gates::{gate_matrix, GateMatrix};

/// Below this, a projection is treated as having failed.
pub const MIN_PROBABILITY: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Body {
    Pure(Vec<C64>),
    /// Row-major density matrix.
    Mixed(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockState {
    pub n_modes: usize,
    pub cutoff: usize,
    pub body: Body,
    pub trace: f64,
}

fn ipow(d: usize, n: usize) -> usize {
    d.pow(n as u32)
}

/// Applies `g` (arity 1 or 2, column-major) to the given modes of a tensor whose
/// `n_modes` indices each run over `d` levels.
fn apply_tensor(data: &mut [C64], n_modes: usize, d: usize, g: &DMatrix<C64>, modes: &[usize]) {
    let local = g.nrows();
    let strides: Vec<usize> = modes.iter().map(|&m| ipow(d, n_modes - 1 - m)).collect();
    let offsets: Vec<usize> = (0..local)
        .map(|k| {
            if modes.len() == 1 {
                k * strides[0]
            } else {
                (k / d) * strides[0] + (k % d) * strides[1]
            }
        })
        .collect();
    let gs = g.as_slice();
    let mut v = vec![ZERO; local];
    let mut out = vec![ZERO; local];
    let total = data.len();
    for base in 0..total {
        if strides.iter().any(|&s| (base / s) % d != 0) {
            continue;
        }
        let mut any = false;
        for k in 0..local {
            v[k] = data[base + offsets[k]];
            any |= v[k] != ZERO;
        }
        if !any {
            continue;
        }
        out.iter_mut().for_each(|o| *o = ZERO);
        for (j, &vj) in v.iter().enumerate() {
            if vj == ZERO {
                continue;
            }
            let col = &gs[j * local..(j + 1) * local];
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * vj;
            }
        }
        for k in 0..local {
            data[base + offsets[k]] = out[k];
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl FockState {
    pub fn dim(&self) -> usize {
        ipow(self.cutoff, self.n_modes)
    }

    fn check_cutoff(cutoff: usize) -> Result<()> {
        if cutoff < 2 {
            return Err(Error::CutoffTooSmall { cutoff, reason: "at least two Fock levels are required".into() });
        }
        Ok(())
    }

    /// Pure state from raw amplitudes; the trace is measured, not imposed.
    pub fn from_amplitudes(n_modes: usize, cutoff: usize, amps: Vec<C64>) -> Result<Self> {
        Self::check_cutoff(cutoff)?;
        if amps.len() != ipow(cutoff, n_modes) {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {n_modes} modes at cutoff {cutoff}",
                amps.len()
            )));
        }
        let mut s = Self { n_modes, cutoff, body: Body::Pure(amps), trace: 0.0 };
        s.trace = s.measure_trace();
        Ok(s)
    }

    /// Mixed state from a row-major density matrix.
    pub fn from_density(n_modes: usize, cutoff: usize, rho: Vec<C64>) -> Result<Self> {
        Self::check_cutoff(cutoff)?;
        let dim = ipow(cutoff, n_modes);
        if rho.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!("density of size {} for dimension {dim}", rho.len())));
        }
        let mut s = Self { n_modes, cutoff, body: Body::Mixed(rho), trace: 0.0 };
        s.trace = s.measure_trace();
        Ok(s)
    }

    pub fn vacuum(n_modes: usize, cutoff: usize) -> Result<Self> {
        Self::fock(&vec![0; n_modes], cutoff)
    }

    /// Number state `|n₁, …, n_N⟩`.
    pub fn fock(ns: &[usize], cutoff: usize) -> Result<Self> {
        Self::check_cutoff(cutoff)?;
        let mut amps = vec![ZERO; ipow(cutoff, ns.len())];
        let mut idx = 0;
        for &n in ns {
            if n >= cutoff {
                return Err(Error::CutoffTooSmall { cutoff, reason: format!("level {n} requested") });
            }
            idx = idx * cutoff + n;
        }
        amps[idx] = C64::new(1.0, 0.0);
        Self::from_amplitudes(ns.len(), cutoff, amps)
    }

    /// Product of coherent states with phase-space amplitudes `α` (`⟨x̂⟩ = Re α`, `⟨p̂⟩ = Im α`).
    pub fn coherent(alphas: &[C64], cutoff: usize) -> Result<Self> {
        let singles: Vec<Vec<C64>> = alphas
            .iter()
            .map(|&a| gates::coherent_amplitudes(a / std::f64::consts::SQRT_2, cutoff))
            .collect();
        Self::product_of(&singles, cutoff)
    }

    /// Tensor product of single-mode amplitude vectors.
    pub fn product_of(singles: &[Vec<C64>], cutoff: usize) -> Result<Self> {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for s in singles {
            if s.len() != cutoff {
                return Err(Error::DimensionMismatch("single-mode vector length differs from cutoff".into()));
            }
            let mut next = Vec::with_capacity(amps.len() * cutoff);
            for a in &amps {
                for b in s {
                    next.push(a * b);
                }
            }
            amps = next;
        }
        Self::from_amplitudes(singles.len(), cutoff, amps)
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.body, Body::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.body {
            Body::Pure(a) => Some(a),
            Body::Mixed(_) => None,
        }
    }

    /// Row-major density matrix (computed for pure states).
    pub fn density(&self) -> DMatrix<C64> {
        let dim = self.dim();
        match &self.body {
            Body::Pure(a) => DMatrix::from_fn(dim, dim, |i, j| a[i] * a[j].conj()),
            Body::Mixed(r) => DMatrix::from_row_slice(dim, dim, r),
        }
    }

    pub fn measure_trace(&self) -> f64 {
        match &self.body {
            Body::Pure(a) => a.iter().map(|v| v.norm_sqr()).sum(),
            Body::Mixed(r) => {
                let dim = self.dim();
                (0..dim).map(|i| r[i * dim + i].re).sum()
            }
        }
    }

    /// Converts to a density-matrix representation in place.
    pub fn make_mixed(&mut self) {
        if let Body::Pure(a) = &self.body {
            let dim = a.len();
            let mut rho = vec![ZERO; dim * dim];
            for i in 0..dim {
                if a[i] == ZERO {
                    continue;
                }
                for j in 0..dim {
                    rho[i * dim + j] = a[i] * a[j].conj();
                }
            }
            self.body = Body::Mixed(rho);
        }
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        for &m in modes {
            if m >= self.n_modes {
                return Err(Error::ModeOutOfRange { mode: m, n_modes: self.n_modes });
            }
        }
        if modes.len() == 2 && modes[0] == modes[1] {
            return Err(Error::InvalidArgument("gate modes must be distinct".into()));
        }
        Ok(())
    }

    /// Applies a gate matrix to `modes` in place and re-measures the trace.
    pub fn apply(&mut self, g: &GateMatrix, modes: &[usize]) -> Result<()> {
        if g.cutoff != self.cutoff {
            return Err(Error::DimensionMismatch(format!(
                "gate cutoff {} vs state cutoff {}",
                g.cutoff, self.cutoff
            )));
        }
        if modes.len() != g.arity {
            return Err(Error::DimensionMismatch(format!("{}-mode gate given {} modes", g.arity, modes.len())));
        }
        self.check_modes(modes)?;
        self.apply_unchecked(&g.entries, modes);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, g: &DMatrix<C64>, modes: &[usize]) {
        let (n, d) = (self.n_modes, self.cutoff);
        match &mut self.body {
            Body::Pure(a) => apply_tensor(a, n, d, g, modes),
            Body::Mixed(r) => {
                apply_tensor(r, 2 * n, d, g, modes);
                let conj = g.map(|v| v.conj());
                let cols: Vec<usize> = modes.iter().map(|m| m + n).collect();
                apply_tensor(r, 2 * n, d, &conj, &cols);
            }
        }
        self.trace = self.measure_trace();
    }

    /// Pure-loss channel with loss fraction `eta` (transmission `1 − eta`) on one mode.
    pub fn loss(&mut self, eta: f64, mode: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidArgument(format!("loss fraction {eta} outside [0, 1]")));
        }
        self.check_modes(&[mode])?;
        self.make_mixed();
        let (n, d) = (self.n_modes, self.cutoff);
        let t = 1.0 - eta;
        // c[a][k] = ⟨a|E_k|a+k⟩ = √C(a+k, k) t^{a/2} η^{k/2}
        let mut c = vec![vec![0.0; d]; d];
        for a in 0..d {
            for k in 0..d - a {
                c[a][k] = binomial(a + k, k).sqrt() * t.powf(a as f64 / 2.0) * eta.powf(k as f64 / 2.0);
            }
        }
        let Body::Mixed(r) = &mut self.body else { unreachable!() };
        let sr = ipow(d, 2 * n - 1 - mode);
        let sc = ipow(d, n - 1 - mode);
        let mut local = vec![ZERO; d * d];
        for base in 0..r.len() {
            if (base / sr) % d != 0 || (base / sc) % d != 0 {
                continue;
            }
            for a in 0..d {
                for b in 0..d {
                    local[a * d + b] = r[base + a * sr + b * sc];
                }
            }
            for a in 0..d {
                for b in 0..d {
                    let mut acc = ZERO;
                    for k in 0..d - a.max(b) {
                        acc += local[(a + k) * d + b + k] * (c[a][k] * c[b][k]);
                    }
                    r[base + a * sr + b * sc] = acc;
                }
            }
        }
        self.trace = self.measure_trace();
        Ok(())
    }

    /// Reduced density matrix of one mode.
    pub fn reduced(&self, mode: usize) -> Result<DMatrix<C64>> {
        self.check_modes(&[mode])?;
        let d = self.cutoff;
        let s = ipow(d, self.n_modes - 1 - mode);
        let dim = self.dim();
        let mut out = DMatrix::zeros(d, d);
        match &self.body {
            Body::Pure(a) => {
                for base in 0..dim {
                    if (base / s) % d != 0 {
                        continue;
                    }
                    for i in 0..d {
                        let ai = a[base + i * s];
                        if ai == ZERO {
                            continue;
                        }
                        for j in 0..d {
                            out[(i, j)] += ai * a[base + j * s].conj();
                        }
                    }
                }
            }
            Body::Mixed(r) => {
                for base in 0..dim {
                    if (base / s) % d != 0 {
                        continue;
                    }
                    for i in 0..d {
                        for j in 0..d {
                            out[(i, j)] += r[(base + i * s) * dim + base + j * s];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn normaliser(&self) -> Result<f64> {
        if self.trace <= 0.0 || !self.trace.is_finite() {
            return Err(Error::ZeroTrace);
        }
        Ok(self.trace)
    }

    /// `⟨â⟩` on the trace-normalised state.
    pub fn expect_a(&self, mode: usize) -> Result<C64> {
        let rho = self.reduced(mode)?;
        let tr = self.normaliser()?;
        let mut acc = ZERO;
        for i in 1..self.cutoff {
            acc += rho[(i, i - 1)] * (i as f64).sqrt();
        }
        Ok(acc / tr)
    }

    pub fn expect_x(&self, mode: usize) -> Result<f64> {
        Ok(self.expect_a(mode)?.re * std::f64::consts::SQRT_2)
    }

    pub fn expect_p(&self, mode: usize) -> Result<f64> {
        Ok(self.expect_a(mode)?.im * std::f64::consts::SQRT_2)
    }

    pub fn expect_n(&self, mode: usize) -> Result<f64> {
        let rho = self.reduced(mode)?;
        let tr = self.normaliser()?;
        Ok((0..self.cutoff).map(|i| rho[(i, i)].re * i as f64).sum::<f64>() / tr)
    }

    /// `Var(x̂)` on the trace-normalised state, using `x̂²` built from a padded `x̂`.
    pub fn variance_x(&self, mode: usize) -> Result<f64> {
        let rho = self.reduced(mode)?;
        let tr = self.normaliser()?;
        let d = self.cutoff;
        let xp = gates::x_operator(d + 1);
        let x2 = (&xp * &xp).view((0, 0), (d, d)).into_owned();
        let mut m2 = 0.0;
        for i in 0..d {
            for j in 0..d {
                m2 += (rho[(i, j)] * x2[(j, i)]).re;
            }
        }
        let mean = self.expect_x(mode)?;
        Ok(m2 / tr - mean * mean)
    }

    fn flat_index(&self, pattern: &[usize]) -> Result<usize> {
        if pattern.len() != self.n_modes {
            return Err(Error::DimensionMismatch(format!(
                "pattern of length {} for {} modes",
                pattern.len(),
                self.n_modes
            )));
        }
        let mut idx = 0;
        for &n in pattern {
            if n >= self.cutoff {
                return Err(Error::CutoffTooSmall { cutoff: self.cutoff, reason: format!("pattern level {n}") });
            }
            idx = idx * self.cutoff + n;
        }
        Ok(idx)
    }

    /// Raw probability of the photon pattern (not divided by the trace).
    pub fn photon_prob(&self, pattern: &[usize]) -> Result<f64> {
        let i = self.flat_index(pattern)?;
        Ok(match &self.body {
            Body::Pure(a) => a[i].norm_sqr(),
            Body::Mixed(r) => r[i * self.dim() + i].re,
        })
    }

    /// Projects onto the box `n_i < k` for every mode.
    ///
    /// Returns the renormalised post-selected state at cutoff `k` and the raw
    /// success probability `p = Tr[Π ρ]`.
    pub fn project_box(&self, k: usize) -> Result<(FockState, f64)> {
        if k > self.cutoff || k < 2 {
            return Err(Error::CutoffTooSmall { cutoff: self.cutoff, reason: format!("box size {k}") });
        }
        let d = self.cutoff;
        let n = self.n_modes;
        let sub = ipow(k, n);
        let map: Vec<usize> = (0..sub)
            .map(|s| {
                let mut idx = 0;
                let mut rem = s;
                for m in 0..n {
                    let digit = (rem / ipow(k, n - 1 - m)) % k;
                    rem -= digit * ipow(k, n - 1 - m);
                    idx += digit * ipow(d, n - 1 - m);
                }
                idx
            })
            .collect();
        let mut out = match &self.body {
            Body::Pure(a) => FockState::from_amplitudes(n, k, map.iter().map(|&i| a[i]).collect())?,
            Body::Mixed(r) => {
                let dim = self.dim();
                let mut rho = Vec::with_capacity(sub * sub);
                for &i in &map {
                    for &j in &map {
                        rho.push(r[i * dim + j]);
                    }
                }
                FockState::from_density(n, k, rho)?
            }
        };
        let p = out.trace;
        if p < MIN_PROBABILITY {
            return Err(Error::ZeroProbability(p));
        }
        out.scale(1.0 / p);
        Ok((out, p))
    }

    /// Multiplies the state by `factor` (amplitudes by `√factor`).
    pub fn scale(&mut self, factor: f64) {
        match &mut self.body {
            Body::Pure(a) => {
                let s = factor.sqrt();
                a.iter_mut().for_each(|v| *v *= s);
            }
            Body::Mixed(r) => r.iter_mut().for_each(|v| *v *= factor),
        }
        self.trace = self.measure_trace();
    }

    /// `⟨self|other⟩` for pure states.
    pub fn inner(&self, other: &FockState) -> Result<C64> {
        if self.n_modes != other.n_modes || self.cutoff != other.cutoff {
            return Err(Error::DimensionMismatch("states have different shapes".into()));
        }
        match (&self.body, &other.body) {
            (Body::Pure(a), Body::Pure(b)) => Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()),
            _ => Err(Error::MixedStateUnsupported),
        }
    }

    /// Overlap with a pure normalised target, computed on the trace-normalised state.
    pub fn fidelity(&self, target: &FockState) -> Result<f64> {
        let Body::Pure(t) = &target.body else {
            return Err(Error::MixedStateUnsupported);
        };
        if (target.trace - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("target has norm² {}", target.trace)));
        }
        if self.n_modes != target.n_modes || self.cutoff != target.cutoff {
            return Err(Error::DimensionMismatch("state and target have different shapes".into()));
        }
        let tr = self.normaliser()?;
        let raw = match &self.body {
            Body::Pure(a) => a.iter().zip(t).map(|(x, y)| y.conj() * x).sum::<C64>().norm_sqr(),
            Body::Mixed(r) => {
                let dim = self.dim();
                let mut acc = ZERO;
                for i in 0..dim {
                    if t[i] == ZERO {
                        continue;
                    }
                    for j in 0..dim {
                        acc += t[i].conj() * r[i * dim + j] * t[j];
                    }
                }
                acc.re
            }
        };
        Ok(raw / tr)
    }

    /// Position wavefunction `ψ(x) = Σ c_n h_n(x)` of a pure single-mode state.
    pub fn wavefunction(&self, grid: &[f64]) -> Result<Vec<C64>> {
        let Body::Pure(c) = &self.body else {
            return Err(Error::MixedStateUnsupported);
        };
        if self.n_modes != 1 {
            return Err(Error::DimensionMismatch("wavefunction needs a single mode".into()));
        }
        Ok(grid
            .iter()
            .map(|&x| {
                let h = hermite_functions(x, self.cutoff);
                c.iter().zip(&h).map(|(cn, hn)| cn * hn).sum()
            })
            .collect())
    }

    /// Partial trace keeping the listed modes, in the given order.
    pub fn keep_modes(&self, keep: &[usize]) -> Result<FockState> {
        self.check_modes(keep)?;
        let (n, d) = (self.n_modes, self.cutoff);
        let k = keep.len();
        let traced: Vec<usize> = (0..n).filter(|m| !keep.contains(m)).collect();
        let sub = ipow(d, k);
        let env = ipow(d, traced.len());
        let compose = |kept: usize, e: usize| {
            let mut digits = vec![0; n];
            for (pos, &m) in keep.iter().enumerate() {
                digits[m] = (kept / ipow(d, k - 1 - pos)) % d;
            }
            for (pos, &m) in traced.iter().enumerate() {
                digits[m] = (e / ipow(d, traced.len() - 1 - pos)) % d;
            }
            digits.iter().fold(0, |acc, &x| acc * d + x)
        };
        let dim = self.dim();
        let mut rho = vec![ZERO; sub * sub];
        for e in 0..env {
            let rows: Vec<usize> = (0..sub).map(|i| compose(i, e)).collect();
            for i in 0..sub {
                for j in 0..sub {
                    rho[i * sub + j] += match &self.body {
                        Body::Pure(a) => a[rows[i]] * a[rows[j]].conj(),
                        Body::Mixed(r) => r[rows[i] * dim + rows[j]],
                    };
                }
            }
        }
        FockState::from_density(k, d, rho)
    }

    /// Appends `extra` vacuum modes after the existing ones.
    pub fn with_vacuum_modes(&self, extra: usize) -> FockState {
        let d = self.cutoff;
        let stretch = ipow(d, extra);
        let dim = self.dim();
        let body = match &self.body {
            Body::Pure(a) => {
                let mut out = vec![ZERO; dim * stretch];
                for (i, v) in a.iter().enumerate() {
                    out[i * stretch] = *v;
                }
                Body::Pure(out)
            }
            Body::Mixed(r) => {
                let big = dim * stretch;
                let mut out = vec![ZERO; big * big];
                for i in 0..dim {
                    for j in 0..dim {
                        out[i * stretch * big + j * stretch] = r[i * dim + j];
                    }
                }
                Body::Mixed(out)
            }
        };
        FockState { n_modes: self.n_modes + extra, cutoff: d, body, trace: self.trace }
    }

    /// Largest deviation of a mixed state from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        match &self.body {
            Body::Pure(_) => 0.0,
            Body::Mixed(r) => {
                let dim = self.dim();
                let mut worst: f64 = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        worst = worst.max((r[i * dim + j] - r[j * dim + i].conj()).norm());
                    }
                }
                worst
            }
        }
    }
}

/// Applies a gate, returning the evolved copy.
pub fn apply_gate(s: &FockState, g: &GateMatrix, modes: &[usize]) -> Result<FockState> {
    let mut out = s.clone();
    out.apply(g, modes)?;
    Ok(out)
}

/// Pure-loss channel on a copy of `s`.
pub fn loss_channel(s: &FockState, eta: f64, mode: usize) -> Result<FockState> {
    let mut out = s.clone();
    out.loss(eta, mode)?;
    Ok(out)
}

/// Normalised Hermite functions `h_0..h_{len−1}` at `x` (ground state `π^{−1/4} e^{−x²/2}`).
pub fn hermite_functions(x: f64, len: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(len);
    if len == 0 {
        return h;
    }
    h.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if len > 1 {
        h.push(std::f64::consts::SQRT_2 * x * h[0]);
    }
    for n in 1..len.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Finitely squeezed surrogate for the position eigenstate `|x⟩`:
/// `D(x) S(r)|0⟩` with `⟨x̂⟩ = x` and `Var(x̂) = e^{−2r}/2`.
pub fn xeigen_approx(x: f64, r: f64, cutoff: usize) -> Result<FockState> {
    if r < 0.0 || !r.is_finite() || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("xeigen_approx needs finite x and r ≥ 0, got r = {r}")));
    }
    let single = xeigen_amplitudes(x, r, cutoff)?;
    FockState::from_amplitudes(1, cutoff, single)
}

/// Single-mode amplitudes of [`xeigen_approx`].
pub fn xeigen_amplitudes(x: f64, r: f64, cutoff: usize) -> Result<Vec<C64>> {
    if cutoff < 2 {
        return Err(Error::CutoffTooSmall { cutoff, reason: "at least two Fock levels are required".into() });
    }
    let big = 2 * cutoff + 40 + (4.0 * x * x) as usize;
    let sq = gates::squeezed_vacuum(r, 0.0, big);
    let disp = gates::displacement(C64::new(x, 0.0), big);
    let full: Vec<C64> = (0..cutoff).map(|m| (0..big).map(|n| disp[(m, n)] * sq[n]).sum()).collect();
    let kept: f64 = full.iter().map(|v| v.norm_sqr()).sum();
    if 1.0 - kept > 0.01 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            reason: format!("surrogate loses {:.2}% of its norm", 100.0 * (1.0 - kept)),
        });
    }
    Ok(full)
}
