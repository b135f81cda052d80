//! End-to-end acceptance run: every check at its stated tolerance, one
//! PASS/FAIL line each. Exits non-zero if any check fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvqnn::experiments::autoencoder::run_autoencoder;
use cvqnn::experiments::curve::{run_curvefit, run_loss_sweep, run_optimizer_comparison, run_penalty_comparison, total_loss};
use cvqnn::experiments::fraud::run_fraud;
use cvqnn::experiments::tetromino::run_tetromino;
use cvqnn::experiments::{Experiment, ExperimentConfig, Preset, Session};
use cvqnn::fock::FockState;
use cvqnn::learn::finite_diff_grad;
use cvqnn::network::{Architecture, CompiledCircuit, InputEncoding, InterferometerParams, LayerParams};
use cvqnn::symplectic::{
    bloch_messiah, circulant, orthosymplectic_residual, symplectic_check, symplectic_from_hamiltonian, symplectic_residual,
    toeplitz_blocks_check, toeplitz_residual, translation_invariant_symplectic, GateSpec, SymplecticAffine,
};
use cvqnn::{Result, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn random_gaussian_word(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<GateSpec> {
    (0..len)
        .map(|_| {
            let m = rng.gen_range(0..n);
            let other = (m + rng.gen_range(1..n.max(2))) % n;
            match rng.gen_range(0..if n > 1 { 5 } else { 3 }) {
                0 => GateSpec::rotation(m, rng.gen_range(-PI..PI)),
                1 => GateSpec::displacement(m, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
                2 => GateSpec::squeeze(m, rng.gen_range(-0.8..0.8), rng.gen_range(-PI..PI)),
                3 => GateSpec::beamsplitter(m, other, rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)),
                _ => GateSpec::controlled_x(m, other, rng.gen_range(-1.0..1.0)),
            }
        })
        .collect()
}

fn symplectic_suite() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut sym, mut round, mut block) = (0.0f64, 0.0f64, 0.0f64);
    let mut all_symplectic = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4);
        let len = rng.gen_range(1..=12);
        let word = random_gaussian_word(n, len, &mut rng);
        let m = SymplecticAffine::from_word(n, &word)?;
        all_symplectic &= symplectic_check(&m.matrix);
        sym = sym.max(symplectic_residual(&m.matrix));
        let e = bloch_messiah(&m)?;
        round = round.max(max_abs(&(e.reconstruct() - &m.matrix)));
        block = block.max(orthosymplectic_residual(&e.k1)).max(orthosymplectic_residual(&e.k2));
    }
    let pass = all_symplectic && sym <= 1e-10 && round <= 1e-8 && block <= 1e-10;
    outcome(pass, format!("1000 words: symplectic {sym:.1e}, round trip {round:.1e}, K blocks {block:.1e}"))
}

fn means(s: &FockState) -> Result<Vec<f64>> {
    let n = s.n_modes;
    let mut v = Vec::with_capacity(2 * n);
    for m in 0..n {
        v.push(s.expect_x(m)?);
    }
    for m in 0..n {
        v.push(s.expect_p(m)?);
    }
    Ok(v)
}

fn fock_consistency() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let d = 20;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=2);
        let len = rng.gen_range(1..=6);
        let word: Vec<GateSpec> = random_gaussian_word(n, len, &mut rng)
            .into_iter()
            .map(|mut g| {
                // keep the states well inside the cutoff
                match &mut g.gate {
                    cvqnn::symplectic::Gate::Displacement { alpha } => *alpha *= 0.4,
                    cvqnn::symplectic::Gate::Squeeze { r, .. } => *r *= 0.3,
                    cvqnn::symplectic::Gate::ControlledX { s } => *s *= 0.4,
                    _ => {}
                }
                g
            })
            .collect();
        let alphas: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4))).collect();
        let mut s = FockState::coherent(&alphas, d)?;
        CompiledCircuit::compile(&word, n, d)?.apply(&mut s)?;
        let z = DVector::from_iterator(2 * n, alphas.iter().map(|a| a.re).chain(alphas.iter().map(|a| a.im)));
        let want = SymplecticAffine::from_word(n, &word)?.apply(&z);
        for (a, b) in means(&s)?.iter().zip(want.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(worst <= 1e-6, format!("200 circuits at D = 20: worst mean error {worst:.1e}"))
}

fn haar_orthogonal_2(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let t: f64 = rng.gen_range(-PI..PI);
    let flip = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
    DMatrix::from_row_slice(2, 2, &[t.cos(), -flip * t.sin(), t.sin(), flip * t.cos()])
}

fn classical_embedding() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (d, r) = (40, 1.5);
    let surrogates = |x: &[f64]| -> Result<FockState> {
        let singles = x.iter().map(|&v| cvqnn::fock::xeigen_amplitudes(v, r, d)).collect::<Result<Vec<_>>>()?;
        FockState::product_of(&singles, d)
    };
    let mut worst_passive: f64 = 0.0;
    for _ in 0..50 {
        let o = haar_orthogonal_2(&mut rng);
        let mut layer = LayerParams::identity(2);
        layer.u1 = InterferometerParams::from_orthogonal(&o)?;
        let mut arch = Architecture::feedforward(vec![layer], d);
        arch.encoding = InputEncoding::ClassicalEmbedded { r };
        let x = [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)];
        let out = arch.forward(&surrogates(&x)?)?;
        let want = &o * DVector::from_column_slice(&x);
        for m in 0..2 {
            worst_passive = worst_passive.max((out.expect_x(m)? - want[m]).abs());
        }
    }
    let mut worst_affine: f64 = 0.0;
    for _ in 0..10 {
        let sigma = DMatrix::from_diagonal(&DVector::from_fn(2, |_, _| rng.gen_range(1.0..2.0)));
        let w = haar_orthogonal_2(&mut rng) * sigma * haar_orthogonal_2(&mut rng);
        let b = DVector::from_fn(2, |_, _| rng.gen_range(-0.3..0.3));
        let x = [rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)];
        let arch = cvqnn::network::embed_classical(&w, &b, cvqnn::network::Nonlinearity::Kerr, d)?;
        let out = arch.forward(&surrogates(&x)?)?;
        let want = &w * DVector::from_column_slice(&x) + &b;
        for m in 0..2 {
            worst_affine = worst_affine.max((out.expect_x(m)? - want[m]).abs());
        }
    }
    outcome(
        worst_passive <= 5e-3 && worst_affine <= 5e-3,
        format!("50 phaseless interferometers {worst_passive:.1e}, 10 affine layers {worst_affine:.1e} (D = 40)"),
    )
}

fn symmetric_circulant(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut row = vec![0.0; n];
    for k in 0..=n / 2 {
        let v = rng.gen_range(-0.5..0.5);
        row[k] = v;
        row[(n - k) % n] = v;
    }
    circulant(&row)
}

fn translation_invariance() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut all_hold = true;
    let mut smallest_break = f64::INFINITY;
    for n in 2..=4 {
        for _ in 0..20 {
            let hxx = symmetric_circulant(n, &mut rng);
            let hpp = symmetric_circulant(n, &mut rng);
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let hxp = circulant(&row);
            let hpx = hxp.transpose();
            let t = rng.gen_range(0.1..1.5);
            let m = translation_invariant_symplectic(&hxx, &hxp, &hpx, &hpp, t)?;
            all_hold &= toeplitz_blocks_check(&m.matrix);
            worst = worst.max(toeplitz_residual(&m.matrix));

            let h = cvqnn::symplectic::assemble_generator(&hxx, &hxp, &hpx, &hpp)?;
            let mut e = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-1.0..1.0));
            e = &e + e.transpose();
            // drop the circulant part so the perturbation is purely non-circulant
            let shifted = cvqnn::symplectic::cyclic_shift(n);
            let mut avg = DMatrix::zeros(2 * n, 2 * n);
            for k in 0..n {
                let tk = shifted.pow(k as u32);
                let mut block_shift = DMatrix::zeros(2 * n, 2 * n);
                block_shift.view_mut((0, 0), (n, n)).copy_from(&tk);
                block_shift.view_mut((n, n), (n, n)).copy_from(&tk);
                avg += &block_shift * &e * block_shift.transpose();
            }
            e -= avg / n as f64;
            let norm = e.norm();
            if norm < 1e-9 {
                continue;
            }
            e *= 1e-3 / norm;
            let bad = symplectic_from_hamiltonian(&(h + &e), t)?;
            smallest_break = smallest_break.min(toeplitz_residual(&bad.matrix));
            let [exx, exp, epx, epp] = cvqnn::symplectic::blocks(&e);
            let rejected = translation_invariant_symplectic(&(&hxx + exx), &(&hxp + exp), &(&hpx + epx), &(&hpp + epp), t).is_err();
            all_hold &= rejected && !toeplitz_blocks_check(&bad.matrix);
        }
    }
    outcome(
        all_hold && worst <= 1e-10,
        format!("N = 2..4: Toeplitz residual {worst:.1e}; perturbed outputs break it by at least {smallest_break:.1e}"),
    )
}

fn curve_checks() -> Result<(Outcome, Outcome)> {
    let mut cfg = ExperimentConfig::preset(Experiment::Curvefit, Preset::Desk);
    cfg.depths = vec![1];
    let r = run_curvefit(&mut Session::in_memory(cfg))?;
    let deep = r.fit.test_mse;
    let shallow = r.depth_sweep[0].test_mse;
    Ok((
        Outcome {
            pass: deep <= 0.02,
            detail: format!("sine, 6 layers, D = 10, 2000 Adam steps: test MSE {deep:.4} (min trace {:.3})", r.fit.min_trace),
        },
        Outcome { pass: deep < shallow, detail: format!("test MSE 6 layers {deep:.4} vs 1 layer {shallow:.4}") },
    ))
}

fn loss_resilience() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::preset(Experiment::LossSweep, Preset::Desk);
    cfg.eta_grid = vec![0.1];
    let r = run_loss_sweep(&mut Session::in_memory(cfg))?;
    let lossy = r.points.iter().find(|p| p.eta == 0.1).expect("eta 0.1 requested");
    let book = total_loss(0.1, 6);
    let ratio = lossy.fit.test_mse / r.lossless.test_mse;
    outcome(
        ratio <= 2.0 && (book - 0.469).abs() <= 0.001,
        format!("MSE {:.4} at eta 0.1 vs {:.4} lossless (ratio {ratio:.2}); total loss {:.1}%", lossy.fit.test_mse, r.lossless.test_mse, 100.0 * book),
    )
}

fn penalties() -> Result<Outcome> {
    let r = run_penalty_comparison(&mut Session::in_memory(ExperimentConfig::preset(Experiment::Penalties, Preset::Desk)))?;
    let none = r.get("none").expect("none run");
    let trace = r.get("trace").expect("trace run");
    let pass = none.min_trace_seen < 0.5 && trace.final_trace >= 0.99 && trace.final_loss < none.final_loss;
    outcome(
        pass,
        format!(
            "no penalty min trace {:.3}; trace penalty final trace {:.4}, loss {:.4} vs {:.4}",
            none.min_trace_seen, trace.final_trace, trace.final_loss, none.final_loss
        ),
    )
}

fn tetromino() -> Result<Outcome> {
    let r = run_tetromino(&mut Session::in_memory(ExperimentConfig::preset(Experiment::Tetromino, Preset::Desk)))?;
    outcome(
        r.mean_fidelity >= 0.95 && r.gram_error_exact <= 1e-3,
        format!(
            "2x2 images, D = {}, {} layers: mean fidelity {:.4}; Gram error {:.1e} vs coherent inputs ({:.1e} vs truncated inputs)",
            r.cutoff, r.layers, r.mean_fidelity, r.gram_error_exact, r.gram_error
        ),
    )
}

fn autoencoder() -> Result<Outcome> {
    let r = run_autoencoder(&mut Session::in_memory(ExperimentConfig::preset(Experiment::Autoencoder, Preset::Desk)))?;
    let fids: Vec<f64> = r.results.iter().map(|f| f.best_fidelity).collect();
    let min_sep = r.separations.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        fids.iter().all(|&f| f >= 0.98) && min_sep >= 0.5,
        format!("best fidelities {:.4} {:.4} {:.4}; smallest separation {min_sep:.3}", fids[0], fids[1], fids[2]),
    )
}

fn fraud() -> Result<Outcome> {
    let cfg = ExperimentConfig::preset(Experiment::Fraud, Preset::Desk);
    let steps = cfg.steps;
    let r = run_fraud(&mut Session::in_memory(cfg))?;
    outcome(
        steps <= 2000 && r.auc >= 0.95 && r.roc_monotone,
        format!("synthetic blobs, {steps} batches: ROC area {:.4}, monotone {}", r.auc, r.roc_monotone),
    )
}

fn optimizers() -> Result<Outcome> {
    // gradient oracle: smooth test functions with closed-form gradients
    let f = |t: &[f64]| -> Result<f64> { Ok(t[0].sin() * t[1].exp() + t[2].powi(3) - (t[0] * t[2]).cos()) };
    let g = |t: &[f64]| {
        vec![
            t[0].cos() * t[1].exp() + t[2] * (t[0] * t[2]).sin(),
            t[0].sin() * t[1].exp(),
            3.0 * t[2] * t[2] + t[0] * (t[0] * t[2]).sin(),
        ]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut fd_err: f64 = 0.0;
    for _ in 0..50 {
        let t: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let num = finite_diff_grad(f, &t, cvqnn::learn::FD_STEP)?;
        for (a, b) in num.iter().zip(g(&t)) {
            fd_err = fd_err.max((a - b).abs());
        }
    }
    // and through the simulator: ⟨x̂⟩ of a rotated displaced vacuum is d cos φ
    let circuit = |t: &[f64]| -> Result<f64> {
        let mut s = FockState::vacuum(1, 20)?;
        let word = [GateSpec::displacement(0, C64::new(t[0], 0.0)), GateSpec::rotation(0, t[1])];
        CompiledCircuit::compile(&word, 1, 20)?.apply(&mut s)?;
        s.expect_x(0)
    };
    for _ in 0..10 {
        let t = [rng.gen_range(-0.8..0.8), rng.gen_range(-PI..PI)];
        let num = finite_diff_grad(circuit, &t, cvqnn::learn::FD_STEP)?;
        fd_err = fd_err.max((num[0] - t[1].cos()).abs()).max((num[1] + t[0] * t[1].sin()).abs());
    }
    let r = run_optimizer_comparison(&mut Session::in_memory(ExperimentConfig::preset(Experiment::Optimizers, Preset::Desk)))?;
    let cost = |name: &str| r.runs.iter().find(|x| x.optimizer == name).expect("optimizer run");
    let (sgd, adam, nm) = (cost("sgd"), cost("adam"), cost("nelder-mead"));
    outcome(
        fd_err <= 1e-6 && adam.final_cost <= sgd.final_cost && nm.monotone,
        format!(
            "gradient error {fd_err:.1e}; final cost Adam {:.4} vs SGD {:.4}; Nelder-Mead monotone {}",
            adam.final_cost, sgd.final_cost, nm.monotone
        ),
    )
}

fn report(name: &str, started: Instant, r: Result<Outcome>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match r {
        Ok(o) => {
            println!("{} {name}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("FAIL {name}: error {e} [{secs:.1} s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report("01 symplectic suite", t, symplectic_suite());
    let t = Instant::now();
    ok &= report("02 phase-space/Fock consistency", t, fock_consistency());
    let t = Instant::now();
    ok &= report("03 classical embedding", t, classical_embedding());
    let t = Instant::now();
    ok &= report("04 translation invariance", t, translation_invariance());
    let t = Instant::now();
    match curve_checks() {
        Ok((fit, depth)) => {
            ok &= report("05 sine fit", t, Ok(fit));
            ok &= report("06 depth trend", t, Ok(depth));
        }
        Err(e) => {
            let msg = e.to_string();
            report("05 sine fit", t, Err(e));
            println!("FAIL 06 depth trend: error {msg}");
            ok = false;
        }
    }
    let t = Instant::now();
    ok &= report("07 loss resilience", t, loss_resilience());
    let t = Instant::now();
    ok &= report("08 penalties", t, penalties());
    let t = Instant::now();
    ok &= report("09 tetromino images", t, tetromino());
    let t = Instant::now();
    ok &= report("10 Fock autoencoder", t, autoencoder());
    let t = Instant::now();
    ok &= report("11 fraud classifier", t, fraud());
    let t = Instant::now();
    ok &= report("12 optimizers and gradients", t, optimizers());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
