//! Real phase-space algebra for Gaussian circuits.
//!
//! Phase-space vectors use the ordering `(x_1..x_N, p_1..p_N)` and the
//! symplectic form `Ω = [[0, I], [-I, 0]]`. Every Gaussian gate compiles to
//! an affine map `z ↦ M z + d` with `M` symplectic.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, max_abs, C64};

/// Tolerance used by [`symplectic_check`] and the orthogonal-symplectic block test.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Tolerance used by [`toeplitz_blocks_check`].
pub const TOEPLITZ_TOL: f64 = 1e-10;
/// Commutator tolerance for translation-invariant generator blocks.
pub const SHIFT_COMMUTE_TOL: f64 = 1e-12;

/// Elementary gates of the CV gate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    /// Phase rotation `exp(-i φ n̂)`, acting as a clockwise rotation of `(x, p)`.
    Rotation { phi: f64 },
    /// Displacement with `x ↦ x + Re α`, `p ↦ p + Im α`.
    Displacement { alpha: C64 },
    /// Squeezing `S(r e^{iφ})`; `phase = 0` gives `x ↦ e^{-r} x`, `p ↦ e^{r} p`.
    Squeeze { r: f64, phase: f64 },
    /// Two-mode beamsplitter; `phi = 0` is the phaseless rotation between modes.
    Beamsplitter { theta: f64, phi: f64 },
    /// Kerr interaction `exp(i κ n̂²)`.
    Kerr { kappa: f64 },
    /// Cubic phase `exp(i γ x̂³ / 3)`.
    CubicPhase { gamma: f64 },
    /// SUM gate `exp(-i s x̂_c ⊗ p̂_t)`: `x_t ↦ x_t + s x_c`.
    ControlledX { s: f64 },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Rotation { .. } => "rotation",
            Gate::Displacement { .. } => "displacement",
            Gate::Squeeze { .. } => "squeeze",
            Gate::Beamsplitter { .. } => "beamsplitter",
            Gate::Kerr { .. } => "kerr",
            Gate::CubicPhase { .. } => "cubic_phase",
            Gate::ControlledX { .. } => "controlled_x",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::Beamsplitter { .. } | Gate::ControlledX { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        !matches!(self, Gate::Kerr { .. } | Gate::CubicPhase { .. })
    }

    fn params_finite(&self) -> bool {
        match *self {
            Gate::Rotation { phi } => phi.is_finite(),
            Gate::Displacement { alpha } => alpha.re.is_finite() && alpha.im.is_finite(),
            Gate::Squeeze { r, phase } => r.is_finite() && phase.is_finite(),
            Gate::Beamsplitter { theta, phi } => theta.is_finite() && phi.is_finite(),
            Gate::Kerr { kappa } => kappa.is_finite(),
            Gate::CubicPhase { gamma } => gamma.is_finite(),
            Gate::ControlledX { s } => s.is_finite(),
        }
    }
}

/// A gate placed on specific modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: Gate,
    pub modes: Vec<usize>,
}

impl GateSpec {
    pub fn new(gate: Gate, modes: Vec<usize>) -> Self {
        Self { gate, modes }
    }
    pub fn rotation(mode: usize, phi: f64) -> Self {
        Self::new(Gate::Rotation { phi }, vec![mode])
    }
    pub fn displacement(mode: usize, alpha: C64) -> Self {
        Self::new(Gate::Displacement { alpha }, vec![mode])
    }
    pub fn squeeze(mode: usize, r: f64, phase: f64) -> Self {
        Self::new(Gate::Squeeze { r, phase }, vec![mode])
    }
    pub fn beamsplitter(a: usize, b: usize, theta: f64, phi: f64) -> Self {
        Self::new(Gate::Beamsplitter { theta, phi }, vec![a, b])
    }
    pub fn kerr(mode: usize, kappa: f64) -> Self {
        Self::new(Gate::Kerr { kappa }, vec![mode])
    }
    pub fn cubic_phase(mode: usize, gamma: f64) -> Self {
        Self::new(Gate::CubicPhase { gamma }, vec![mode])
    }
    pub fn controlled_x(control: usize, target: usize, s: f64) -> Self {
        Self::new(Gate::ControlledX { s }, vec![control, target])
    }

    /// Checks arity, distinctness and range of the target modes.
    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if self.modes.len() != self.gate.arity() {
            return Err(Error::DimensionMismatch(format!(
                "{} acts on {} modes, got {}",
                self.gate.name(),
                self.gate.arity(),
                self.modes.len()
            )));
        }
        for &m in &self.modes {
            if m >= n_modes {
                return Err(Error::ModeOutOfRange { mode: m, n_modes });
            }
        }
        if self.modes.len() == 2 && self.modes[0] == self.modes[1] {
            return Err(Error::InvalidArgument(format!(
                "{} needs two distinct modes",
                self.gate.name()
            )));
        }
        if !self.gate.params_finite() {
            return Err(Error::InvalidArgument(format!("{} has non-finite parameters", self.gate.name())));
        }
        Ok(())
    }
}

/// The symplectic form for `n` modes.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = 1.0;
        o[(n + i, i)] = -1.0;
    }
    o
}

/// Affine phase-space map `z ↦ M z + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticAffine {
    pub n_modes: usize,
    pub matrix: DMatrix<f64>,
    pub displacement: DVector<f64>,
}

impl SymplecticAffine {
    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
            displacement: DVector::zeros(2 * n_modes),
        }
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected a 2N x 2N matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows() / 2;
        Ok(Self { n_modes: n, matrix, displacement: DVector::zeros(2 * n) })
    }

    /// Applies the map to a phase-space vector.
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.matrix * z + &self.displacement
    }

    /// Exact inverse, using `M⁻¹ = -Ω Mᵀ Ω`.
    pub fn inverse(&self) -> Self {
        let o = omega(self.n_modes);
        let inv = -(&o * self.matrix.transpose() * &o);
        let d = -(&inv * &self.displacement);
        Self { n_modes: self.n_modes, matrix: inv, displacement: d }
    }

    /// Compiles a gate word (applied left to right) into one affine map.
    pub fn from_word(n_modes: usize, word: &[GateSpec]) -> Result<Self> {
        word.iter().try_fold(Self::identity(n_modes), |acc, g| {
            compose(&gate_affine(g, n_modes)?, &acc)
        })
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }
}

/// Applies `a` after `b`.
pub fn compose(a: &SymplecticAffine, b: &SymplecticAffine) -> Result<SymplecticAffine> {
    if a.n_modes != b.n_modes {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose {}-mode and {}-mode transforms",
            a.n_modes, b.n_modes
        )));
    }
    Ok(SymplecticAffine {
        n_modes: a.n_modes,
        matrix: &a.matrix * &b.matrix,
        displacement: &a.matrix * &b.displacement + &a.displacement,
    })
}

/// Real phase-space image of a passive mode transformation `α ↦ U α`.
pub fn passive_symplectic(u: &DMatrix<C64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = u[(i, j)];
            m[(i, j)] = v.re;
            m[(i, n + j)] = -v.im;
            m[(n + i, j)] = v.im;
            m[(n + i, n + j)] = v.re;
        }
    }
    m
}

/// Inverse of [`passive_symplectic`] for an orthogonal-symplectic matrix.
pub fn symplectic_to_unitary(k: &DMatrix<f64>) -> DMatrix<C64> {
    let n = k.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| C64::new(k[(i, j)], k[(n + i, j)]))
}

/// Complex single-photon (mode) matrix of a passive gate.
pub fn beamsplitter_mode_matrix(theta: f64, phi: f64) -> DMatrix<C64> {
    let (s, c) = theta.sin_cos();
    let e = C64::from_polar(1.0, phi);
    DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), -e.conj() * s, e * s, C64::new(c, 0.0)])
}

/// Phase-space action of a Gaussian gate on `n_modes` modes.
pub fn gate_affine(spec: &GateSpec, n_modes: usize) -> Result<SymplecticAffine> {
    if !spec.gate.is_gaussian() {
        return Err(Error::NonGaussianGate(spec.gate.name()));
    }
    spec.validate(n_modes)?;
    let n = n_modes;
    let mut out = SymplecticAffine::identity(n);
    let m = &mut out.matrix;
    match spec.gate {
        Gate::Rotation { phi } => {
            let k = spec.modes[0];
            let (s, c) = phi.sin_cos();
            m[(k, k)] = c;
            m[(k, n + k)] = s;
            m[(n + k, k)] = -s;
            m[(n + k, n + k)] = c;
        }
        Gate::Displacement { alpha } => {
            let k = spec.modes[0];
            out.displacement[k] = alpha.re;
            out.displacement[n + k] = alpha.im;
        }
        Gate::Squeeze { r, phase } => {
            let k = spec.modes[0];
            let (ch, sh) = (r.cosh(), r.sinh());
            let (sp, cp) = phase.sin_cos();
            m[(k, k)] = ch - sh * cp;
            m[(k, n + k)] = -sh * sp;
            m[(n + k, k)] = -sh * sp;
            m[(n + k, n + k)] = ch + sh * cp;
        }
        Gate::Beamsplitter { theta, phi } => {
            let local = passive_symplectic(&beamsplitter_mode_matrix(theta, phi));
            let idx = [spec.modes[0], spec.modes[1], n + spec.modes[0], n + spec.modes[1]];
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    m[(ia, ib)] = local[(a, b)];
                }
            }
        }
        Gate::ControlledX { s } => {
            let (c, t) = (spec.modes[0], spec.modes[1]);
            m[(t, c)] = s;
            m[(n + c, n + t)] = -s;
        }
        Gate::Kerr { .. } | Gate::CubicPhase { .. } => unreachable!(),
    }
    Ok(out)
}

/// Largest entry of `MᵀΩM − Ω`.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() || m.nrows() % 2 != 0 {
        return f64::INFINITY;
    }
    let o = omega(m.nrows() / 2);
    max_abs(&(m.transpose() * &o * m - &o))
}

/// True when `MᵀΩM = Ω` entrywise within [`SYMPLECTIC_TOL`].
pub fn symplectic_check(m: &DMatrix<f64>) -> bool {
    symplectic_residual(m) <= SYMPLECTIC_TOL
}

/// Splits a `2N x 2N` matrix into its `xx, xp, px, pp` blocks.
pub fn blocks(m: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
    let n = m.nrows() / 2;
    [
        m.view((0, 0), (n, n)).into_owned(),
        m.view((0, n), (n, n)).into_owned(),
        m.view((n, 0), (n, n)).into_owned(),
        m.view((n, n), (n, n)).into_owned(),
    ]
}

/// Largest deviation from periodic Toeplitz structure over the four blocks.
pub fn toeplitz_residual(m: &DMatrix<f64>) -> f64 {
    if !m.is_square() || m.nrows() % 2 != 0 {
        return f64::INFINITY;
    }
    let n = m.nrows() / 2;
    blocks(m)
        .iter()
        .map(|b| {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((b[(i, j)] - b[((i + 1) % n, (j + 1) % n)]).abs());
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// True when every `N x N` block satisfies `B[i][j] = B[i+1][j+1]` (indices mod N).
pub fn toeplitz_blocks_check(m: &DMatrix<f64>) -> bool {
    toeplitz_residual(m) <= TOEPLITZ_TOL
}

/// Deviation of `K` from the orthogonal-symplectic block form `[[C, D], [-D, C]]`
/// with `CDᵀ − DCᵀ = 0` and `CCᵀ + DDᵀ = I`.
pub fn orthosymplectic_residual(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows() / 2;
    let [c, d, md, c2] = blocks(k);
    let form = max_abs(&(&c - &c2)).max(max_abs(&(&d + &md)));
    let e11 = max_abs(&(&c * d.transpose() - &d * c.transpose()));
    let e12 = max_abs(&(&c * c.transpose() + &d * d.transpose() - DMatrix::identity(n, n)));
    let orth = max_abs(&(k.transpose() * k - DMatrix::identity(2 * n, 2 * n)));
    form.max(e11).max(e12).max(orth).max(symplectic_residual(k))
}

/// `M = K2 · diag(σ, σ⁻¹) · K1` with `K1`, `K2` orthogonal and symplectic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerDecomposition {
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    /// Compression factors `σ_i ≤ 1`, sorted descending.
    pub sigma: Vec<f64>,
}

impl EulerDecomposition {
    pub fn n_modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn scaling(&self) -> DMatrix<f64> {
        let n = self.sigma.len();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for (i, &v) in self.sigma.iter().enumerate() {
            s[(i, i)] = v;
            s[(n + i, n + i)] = 1.0 / v;
        }
        s
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.k2 * self.scaling() * &self.k1
    }

    /// Squeezing magnitudes `r_i = -ln σ_i` realising the diagonal stage.
    pub fn squeezing(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| -s.ln()).collect()
    }
}

const CLUSTER_TOL: f64 = 1e-9;

/// Euler (Bloch-Messiah) decomposition through the polar factorisation `M = O P`.
///
/// The positive factor is diagonalised by an orthogonal-symplectic basis built
/// from eigenvectors with eigenvalues `≤ 1`; degenerate eigenspaces are spanned
/// by projecting the standard basis in mode order, which keeps the output
/// canonical (identity for identity input).
pub fn bloch_messiah(m: &SymplecticAffine) -> Result<EulerDecomposition> {
    let res = symplectic_residual(&m.matrix);
    if !(res <= SYMPLECTIC_TOL * m.matrix.norm().max(1.0).powi(2)) {
        return Err(Error::NotSymplectic { residual: res });
    }
    let n = m.n_modes;
    let dim = 2 * n;
    let svd = m.matrix.clone().svd(true, true);
    let w = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let orth = w * vt;
    let p = vt.transpose() * DMatrix::from_diagonal(&svd.singular_values) * vt;
    let p = (&p + p.transpose()) * 0.5;

    let eig = SymmetricEigen::new(p.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    // Group eigenvalues into clusters of (numerically) equal log-value.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let li = eig.eigenvalues[i].ln();
        match clusters.last_mut() {
            Some(c) if (eig.eigenvalues[*c.last().unwrap()].ln() - li).abs() < CLUSTER_TOL => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }

    let o = omega(n);
    let mut chosen: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for cluster in &clusters {
        let mean_log: f64 =
            cluster.iter().map(|&i| eig.eigenvalues[i].ln()).sum::<f64>() / cluster.len() as f64;
        let unit = mean_log.abs() < CLUSTER_TOL * 10.0;
        if mean_log > 0.0 && !unit {
            continue;
        }
        let basis = DMatrix::from_columns(
            &cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
        );
        let projector = &basis * basis.transpose();
        let want = if unit { cluster.len() / 2 } else { cluster.len() };
        let mut local: Vec<DVector<f64>> = Vec::new();
        // constraint vectors that every new basis vector must be orthogonal to
        let mut exclude: Vec<DVector<f64>> = Vec::new();
        while local.len() < want {
            let residuals: Vec<DVector<f64>> = (0..dim)
                .map(|j| {
                    let mut v = projector.column(j).into_owned();
                    for _ in 0..2 {
                        for e in &exclude {
                            let c = e.dot(&v);
                            v -= e * c;
                        }
                    }
                    v
                })
                .collect();
            let best = residuals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if best < 1e-6 {
                return Err(Error::NotSymplectic { residual: res });
            }
            let pick = residuals.iter().position(|v| v.norm() >= 0.5 * best).unwrap();
            let mut u = residuals[pick].clone();
            u /= u.norm();
            exclude.push(u.clone());
            if unit {
                let mut w = &o * &u;
                w = &projector * w;
                for e in &exclude {
                    let c = e.dot(&w);
                    w -= e * c;
                }
                let nw = w.norm();
                if nw > 1e-6 {
                    exclude.push(w / nw);
                }
            }
            local.push(u);
        }
        for u in local {
            let s = u.dot(&(&p * &u));
            chosen.push((s, u));
        }
    }
    if chosen.len() != n {
        return Err(Error::NotSymplectic { residual: res });
    }
    // Descending σ; stable sort keeps earlier clusters / lower mode index first on ties.
    chosen.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let omega_t = o.transpose();
    let mut q = DMatrix::zeros(dim, dim);
    let mut sigma = Vec::with_capacity(n);
    for (j, (s, mut u)) in chosen.into_iter().enumerate() {
        if let Some(lead) = u.iter().find(|v| v.abs() > 1e-10) {
            if *lead < 0.0 {
                u = -u;
            }
        }
        let ou = &omega_t * &u;
        q.set_column(j, &u);
        q.set_column(n + j, &ou);
        sigma.push(s.min(1.0));
    }
    let k1 = q.transpose();
    let k2 = &orth * &q;
    Ok(EulerDecomposition { k1, k2, sigma })
}

/// Cyclic shift `T = Σ_i |i+1⟩⟨i|` with periodic boundary.
pub fn cyclic_shift(n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[((i + 1) % n, i)] = 1.0;
    }
    t
}

/// Symplectic map generated by the quadratic Hamiltonian `H = zᵀ H̃ z`
/// acting for time `t` under `exp(-i t H)`: `M = exp(2 t Ω H̃)`.
pub fn symplectic_from_hamiltonian(htilde: &DMatrix<f64>, t: f64) -> Result<SymplecticAffine> {
    if !htilde.is_square() || htilde.nrows() % 2 != 0 {
        return Err(Error::DimensionMismatch("generator must be 2N x 2N".into()));
    }
    let n = htilde.nrows() / 2;
    let gen = omega(n) * htilde * (2.0 * t);
    SymplecticAffine::linear(expm(&gen))
}

/// Assembles `H̃ = [[Hxx, Hxp], [Hpx, Hpp]]`.
pub fn assemble_generator(
    hxx: &DMatrix<f64>,
    hxp: &DMatrix<f64>,
    hpx: &DMatrix<f64>,
    hpp: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = hxx.nrows();
    for (name, b) in [("Hxx", hxx), ("Hxp", hxp), ("Hpx", hpx), ("Hpp", hpp)] {
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::DimensionMismatch(format!("{name} must be {n}x{n}")));
        }
    }
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(hxx);
    h.view_mut((0, n), (n, n)).copy_from(hxp);
    h.view_mut((n, 0), (n, n)).copy_from(hpx);
    h.view_mut((n, n), (n, n)).copy_from(hpp);
    Ok(h)
}

/// Gaussian map of a translation-invariant quadratic Hamiltonian.
///
/// Every block must commute with the cyclic shift and `H̃` must be symmetric.
/// The output blocks are periodic Toeplitz (circulant) matrices.
pub fn translation_invariant_symplectic(
    hxx: &DMatrix<f64>,
    hxp: &DMatrix<f64>,
    hpx: &DMatrix<f64>,
    hpp: &DMatrix<f64>,
    t: f64,
) -> Result<SymplecticAffine> {
    let h = assemble_generator(hxx, hxp, hpx, hpp)?;
    let n = hxx.nrows();
    let shift = cyclic_shift(n);
    for (name, b) in [("Hxx", hxx), ("Hxp", hxp), ("Hpx", hpx), ("Hpp", hpp)] {
        let residual = max_abs(&(&shift * b - b * &shift));
        if residual > SHIFT_COMMUTE_TOL {
            return Err(Error::NotTranslationInvariant { block: name, residual });
        }
    }
    if max_abs(&(&h - h.transpose())) > SHIFT_COMMUTE_TOL {
        return Err(Error::InvalidArgument("generator H̃ must be symmetric".into()));
    }
    symplectic_from_hamiltonian(&h, t)
}

/// Circulant matrix whose first row is `row`.
pub fn circulant(row: &[f64]) -> DMatrix<f64> {
    let n = row.len();
    DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n])
}
