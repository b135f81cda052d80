//! Rectangular beamsplitter meshes and their decomposition.
//!
//! An `N`-mode interferometer is `N(N−1)/2` beamsplitters on nearest-neighbour
//! pairs, arranged in `N` alternating columns, followed by one rotation per
//! mode. Any unitary mode matrix factors onto this mesh (Clements et al.,
//! Optica 3, 2016).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::symplectic::{beamsplitter_mode_matrix, GateSpec};

/// Beamsplitter pairs of the rectangular mesh in application order.
pub fn mesh_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for col in 0..n {
        let mut k = col % 2;
        while k + 1 < n {
            pairs.push((k, k + 1));
            k += 2;
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerParams {
    pub n_modes: usize,
    pub bs_theta: Vec<f64>,
    pub bs_phi: Vec<f64>,
    pub rotations: Vec<f64>,
    /// Forces `bs_phi = 0`; rotations are then restricted to `{0, π}` so the
    /// symplectic action is `C ⊕ C` with `C` orthogonal.
    pub phaseless: bool,
}

impl InterferometerParams {
    pub fn identity(n_modes: usize) -> Self {
        let k = n_modes * n_modes.saturating_sub(1) / 2;
        Self { n_modes, bs_theta: vec![0.0; k], bs_phi: vec![0.0; k], rotations: vec![0.0; n_modes], phaseless: false }
    }

    pub fn num_beamsplitters(&self) -> usize {
        self.bs_theta.len()
    }

    /// Gate word: mesh beamsplitters, then per-mode rotations.
    pub fn compile(&self) -> Vec<GateSpec> {
        let mut word = Vec::with_capacity(self.bs_theta.len() + self.n_modes);
        for (k, (a, b)) in mesh_pairs(self.n_modes).into_iter().enumerate() {
            let phi = if self.phaseless { 0.0 } else { self.bs_phi[k] };
            word.push(GateSpec::beamsplitter(a, b, self.bs_theta[k], phi));
        }
        for (m, &r) in self.rotations.iter().enumerate() {
            let r = if self.phaseless { snap_phaseless(r) } else { r };
            word.push(GateSpec::rotation(m, r));
        }
        word
    }

    /// Complex mode matrix `U` with `α ↦ U α`.
    pub fn mode_matrix(&self) -> DMatrix<C64> {
        let n = self.n_modes;
        let mut u = DMatrix::<C64>::identity(n, n);
        for spec in self.compile() {
            u = match spec.gate {
                crate::symplectic::Gate::Beamsplitter { theta, phi } => {
                    embed(&beamsplitter_mode_matrix(theta, phi), spec.modes[0], spec.modes[1], n) * u
                }
                crate::symplectic::Gate::Rotation { phi } => {
                    let mut d = DMatrix::<C64>::identity(n, n);
                    d[(spec.modes[0], spec.modes[0])] = C64::from_polar(1.0, -phi);
                    d * u
                }
                _ => unreachable!(),
            };
        }
        u
    }

    /// Mesh parameters realising a unitary mode matrix.
    pub fn from_unitary(u: &DMatrix<C64>) -> Result<Self> {
        let n = u.nrows();
        if !u.is_square() {
            return Err(Error::NonSquare { rows: u.nrows(), cols: u.ncols() });
        }
        let unitarity = (u.adjoint() * u - DMatrix::<C64>::identity(n, n)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if unitarity > 1e-8 {
            return Err(Error::InvalidArgument(format!("mode matrix is not unitary (residual {unitarity:.2e})")));
        }
        let (sequence, phases) = clements(u);
        let mut params = Self::identity(n);
        place_on_mesh(&sequence, &mut params)?;
        for (m, ph) in phases.iter().enumerate() {
            params.rotations[m] = -ph.arg();
        }
        Ok(params)
    }

    /// Phaseless mesh realising a real orthogonal matrix.
    pub fn from_orthogonal(o: &DMatrix<f64>) -> Result<Self> {
        let mut p = Self::from_unitary(&o.map(|v| C64::new(v, 0.0)))?;
        for k in 0..p.bs_theta.len() {
            let phi = wrap(p.bs_phi[k]);
            if phi.abs() > 1e-6 {
                if (phi.abs() - std::f64::consts::PI).abs() > 1e-6 {
                    return Err(Error::InvalidArgument("matrix is not real orthogonal".into()));
                }
                // BS(θ, π) = BS(−θ, 0)
                p.bs_theta[k] = -p.bs_theta[k];
            }
            p.bs_phi[k] = 0.0;
        }
        for r in p.rotations.iter_mut() {
            *r = snap_phaseless(*r);
        }
        p.phaseless = true;
        Ok(p)
    }
}

fn wrap(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = phi.rem_euclid(two_pi);
    if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Rounds an angle to the nearest of `{0, π}`.
fn snap_phaseless(phi: f64) -> f64 {
    if wrap(phi).abs() < std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        std::f64::consts::PI
    }
}

fn embed(local: &DMatrix<C64>, a: usize, b: usize, n: usize) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(n, n);
    m[(a, a)] = local[(0, 0)];
    m[(a, b)] = local[(0, 1)];
    m[(b, a)] = local[(1, 0)];
    m[(b, b)] = local[(1, 1)];
    m
}

#[derive(Debug, Clone, Copy)]
struct Placed {
    lo: usize,
    theta: f64,
    phi: f64,
}

/// Returns the beamsplitters in application order plus the final diagonal phases.
fn clements(u: &DMatrix<C64>) -> (Vec<Placed>, Vec<C64>) {
    let n = u.nrows();
    let mut v = u.clone();
    let mut right: Vec<Placed> = Vec::new();
    let mut left: Vec<Placed> = Vec::new();
    for (k, i) in (0..n.saturating_sub(1)).rev().enumerate() {
        if k % 2 == 0 {
            for j in (0..n - 1 - i).rev() {
                // null v[i+j+1, j] with T⁻¹ acting on columns (j, j+1)
                let r = i + j + 1;
                let (a, b) = (v[(r, j)], v[(r, j + 1)]);
                let theta = a.norm().atan2(b.norm());
                let phi = a.arg() - b.arg();
                let tinv = beamsplitter_mode_matrix(theta, phi).adjoint();
                apply_cols(&mut v, j, &tinv);
                right.push(Placed { lo: j, theta, phi });
            }
        } else {
            for j in 0..n - 1 - i {
                // null v[i+j+1, j] with T acting on rows (i+j, i+j+1)
                let r = i + j + 1;
                let (a, b) = (v[(r, j)], v[(r - 1, j)]);
                let theta = a.norm().atan2(b.norm());
                let phi = (-a).arg() - b.arg();
                let t = beamsplitter_mode_matrix(theta, phi);
                apply_rows(&mut v, r - 1, &t);
                left.push(Placed { lo: r - 1, theta, phi });
            }
        }
    }
    let phases: Vec<C64> = (0..n).map(|i| v[(i, i)]).collect();
    // U = L₁† ⋯ L_m† · D · R_p ⋯ R_1; move each L† through D: T(θ,φ)ᴴ D = D T(−θ, φ'),
    // with e^{iφ'} = e^{iφ} d₁/d₂.
    let mut sequence = right;
    for l in left.iter().rev() {
        let ratio = phases[l.lo] / phases[l.lo + 1];
        sequence.push(Placed { lo: l.lo, theta: -l.theta, phi: l.phi + ratio.arg() });
    }
    (sequence, phases)
}

fn apply_cols(v: &mut DMatrix<C64>, j: usize, t: &DMatrix<C64>) {
    for r in 0..v.nrows() {
        let (x, y) = (v[(r, j)], v[(r, j + 1)]);
        v[(r, j)] = x * t[(0, 0)] + y * t[(1, 0)];
        v[(r, j + 1)] = x * t[(0, 1)] + y * t[(1, 1)];
    }
}

fn apply_rows(v: &mut DMatrix<C64>, i: usize, t: &DMatrix<C64>) {
    for c in 0..v.ncols() {
        let (x, y) = (v[(i, c)], v[(i + 1, c)]);
        v[(i, c)] = t[(0, 0)] * x + t[(0, 1)] * y;
        v[(i + 1, c)] = t[(1, 0)] * x + t[(1, 1)] * y;
    }
}

/// Assigns beamsplitters (in application order) to mesh slots, keeping the
/// relative order of any two that share a mode.
fn place_on_mesh(sequence: &[Placed], params: &mut InterferometerParams) -> Result<()> {
    let pairs = mesh_pairs(params.n_modes);
    let mut used = vec![false; pairs.len()];
    // last slot index touching each mode
    let mut frontier: Vec<Option<usize>> = vec![None; params.n_modes];
    for bs in sequence {
        let after = [frontier[bs.lo], frontier[bs.lo + 1]].into_iter().flatten().max();
        let start = after.map_or(0, |s| s + 1);
        let slot = (start..pairs.len())
            .find(|&s| !used[s] && pairs[s].0 == bs.lo)
            .ok_or_else(|| Error::InvalidArgument("decomposition does not fit the rectangular mesh".into()))?;
        used[slot] = true;
        params.bs_theta[slot] = bs.theta;
        params.bs_phi[slot] = bs.phi;
        frontier[bs.lo] = Some(slot);
        frontier[bs.lo + 1] = Some(slot);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{passive_symplectic, symplectic_check, SymplecticAffine};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        // QR of a complex Gaussian matrix via Gram-Schmidt
        let mut m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        for j in 0..n {
            for k in 0..j {
                let proj: C64 = (0..n).map(|i| m[(i, k)].conj() * m[(i, j)]).sum();
                for i in 0..n {
                    let v = m[(i, k)];
                    m[(i, j)] -= v * proj;
                }
            }
            let norm = (0..n).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..n {
                m[(i, j)] /= norm;
            }
        }
        m
    }

    fn diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn mesh_sizes() {
        for n in 1..6 {
            assert_eq!(mesh_pairs(n).len(), n * (n - 1) / 2);
        }
        assert_eq!(mesh_pairs(3), vec![(0, 1), (1, 2), (0, 1)]);
    }

    #[test]
    fn zero_params_compile_to_identity() {
        let p = InterferometerParams::identity(3);
        let m = SymplecticAffine::from_word(3, &p.compile()).unwrap();
        assert_eq!(m, SymplecticAffine::identity(3));
    }

    #[test]
    fn phaseless_quarter_turn_swaps_up_to_sign() {
        let mut p = InterferometerParams::identity(2);
        p.phaseless = true;
        p.bs_theta[0] = std::f64::consts::FRAC_PI_2;
        p.bs_phi[0] = 1.0; // ignored when phaseless
        let m = SymplecticAffine::from_word(2, &p.compile()).unwrap();
        let z = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let out = m.apply(&z);
        for (a, b) in out.iter().zip([-2.0, 1.0, -4.0, 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn random_mesh_is_orthosymplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = InterferometerParams::identity(3);
        p.bs_theta.iter_mut().chain(p.bs_phi.iter_mut()).chain(p.rotations.iter_mut()).for_each(|v| *v = rng.gen::<f64>() * 6.28);
        let m = SymplecticAffine::from_word(3, &p.compile()).unwrap();
        assert!(symplectic_check(&m.matrix));
        assert!(crate::symplectic::orthosymplectic_residual(&m.matrix) < 1e-10);
        assert_eq!(m.displacement.norm(), 0.0);
        assert!((passive_symplectic(&p.mode_matrix()) - &m.matrix).abs().max() < 1e-12);
    }

    #[test]
    fn decomposition_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            for _ in 0..10 {
                let u = random_unitary(n, &mut rng);
                let p = InterferometerParams::from_unitary(&u).unwrap();
                assert!(diff(&p.mode_matrix(), &u) < 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn orthogonal_decomposition_is_phaseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            for _ in 0..10 {
                let u = random_unitary(n, &mut rng);
                // real orthogonal from the real part's polar factor
                let re = u.map(|v| v.re);
                let svd = re.svd(true, true);
                let mut o = svd.u.unwrap() * svd.v_t.unwrap();
                if rng.gen::<bool>() {
                    o.row_mut(0).neg_mut();
                }
                let p = InterferometerParams::from_orthogonal(&o).unwrap();
                assert!(p.bs_phi.iter().all(|&v| v == 0.0));
                let got = p.mode_matrix();
                assert!(got.iter().all(|v| v.im.abs() < 1e-10));
                assert!(diff(&got, &o.map(|v| C64::new(v, 0.0))) < 1e-10);
            }
        }
    }
}
