//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Reference values are computed here from closed forms, independently of
//! the library code they check.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oldroyd::diagnostics::{energy_residual, mass_drift};
use oldroyd::model::{gibbs_residual, monotone_part_min_increment, pressure_decomposition, total_pressure};
use oldroyd::scenarios::{build, run, tau_decay_error, vortex_study, RunOutput};
use oldroyd::{ModelParams, ThermoSample};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(start: Instant, limit: Duration, detail: &mut String) -> bool {
    let elapsed = start.elapsed();
    detail.push_str(&format!("; runtime {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()));
    elapsed < limit
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Euler-operator form of the Gibbs relation written out from the closed
/// forms of the free energy and the pressure.
fn gibbs_oracle(eta: f64, rho: f64, tau: f64, p: &ModelParams) -> f64 {
    let b = p.k * (p.l - 1.0);
    let (fluid, d_rho) = if (p.gamma - 1.0).abs() < 1e-14 {
        (p.a * xlogx(rho), p.a * (rho.ln() + 1.0))
    } else {
        (
            p.a / (p.gamma - 1.0) * rho.powf(p.gamma),
            p.a * p.gamma / (p.gamma - 1.0) * rho.powf(p.gamma - 1.0),
        )
    };
    let h_energy = fluid + p.z * eta * eta + b * xlogx(eta) - xlogx(tau);
    let euler = rho * d_rho + eta * (2.0 * p.z * eta + b * (eta.ln() + 1.0)) - tau * (tau.ln() + 1.0);
    let pressure = b * eta + p.z * eta * eta + p.a * rho.powf(p.gamma) - tau;
    euler - h_energy - pressure
}

fn random_params(rng: &mut ChaCha8Rng, gamma: f64) -> ModelParams {
    ModelParams {
        a: rng.gen_range(0.2..3.0),
        gamma,
        z: rng.gen_range(0.2..3.0),
        k: rng.gen_range(0.0..2.0),
        l: rng.gen_range(0.0..4.0),
        c_bar: rng.gen_range(0.5..4.0),
        ..ModelParams::default()
    }
}

fn criterion_gibbs() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_oracle, mut count) = (0.0f64, 0.0f64, 0);
    for gamma in [0.5, 1.0, 1.4, 2.0] {
        for block in 0..25 {
            let p = random_params(&mut rng, gamma);
            for _ in 0..1000 {
                let eta = 10f64.powf(rng.gen_range(-3.0..1.0));
                let rho = eta * p.c_bar * rng.gen_range(1e-6..1.0);
                let tau = eta * p.c_bar * rng.gen_range(1e-6..1.0);
                let s = ThermoSample::new(eta, rho, tau);
                assert!(s.is_admissible(&p), "sample generator broke admissibility (block {block})");
                worst = worst.max(gibbs_residual(&s, &p).map(f64::abs).unwrap_or(f64::INFINITY));
                worst_oracle = worst_oracle.max(gibbs_oracle(eta, rho, tau, &p).abs());
                count += 1;
            }
        }
    }
    let mut detail = format!("max |residual| = {worst:.3e} (independent closed form {worst_oracle:.3e}) over {count} samples");
    let fast = within(start, Duration::from_secs(5), &mut detail);
    outcome(worst < 1e-10 && worst_oracle < 1e-10 && count == 100_000 && fast, detail)
}

fn criterion_decomposition() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_identity, mut worst_abs, mut worst_tail, mut worst_increment) =
        (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for gamma in [0.5, 1.0, 1.4, 2.0] {
        for _ in 0..10 {
            let p = match random_params(&mut rng, gamma).with_auto_radii() {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("radius selection failed: {e}")),
            };
            for _ in 0..2500 {
                let eta = rng.gen_range(0.0..2.0 * p.r_bar);
                let (s_rho, s_tau) = (rng.gen_range(0.0..=p.c_bar), rng.gen_range(0.0..=p.c_bar));
                let (mono, rem) = pressure_decomposition(eta, s_rho, s_tau, &p).unwrap();
                let h = total_pressure(&ThermoSample::from_ratios(eta, s_rho, s_tau), &p).unwrap();
                // Terms reach ~1e4 here, so the gap is measured in units of their size.
                let scale = 1f64.max(mono.abs() + rem.abs() + h.abs());
                worst_abs = worst_abs.max((mono - rem - h).abs());
                worst_identity = worst_identity.max((mono - rem - h).abs() / scale);
                if eta >= p.r_bar {
                    worst_tail = worst_tail.max(rem.abs());
                }
                // The tail must vanish exactly right at the support radius too.
                let (_, at_edge) = pressure_decomposition(p.r_bar, s_rho, s_tau, &p).unwrap();
                worst_tail = worst_tail.max(at_edge.abs());
            }
            worst_increment = worst_increment.min(monotone_part_min_increment(&p, 400, 20));
        }
    }
    let mut detail = format!(
        "max |P - R - h| / max(1, |P|+|R|+|h|) = {worst_identity:.3e} (absolute {worst_abs:.3e}); max |R| beyond r_bar = {worst_tail:.1e}; \
         min forward difference = {worst_increment:.3e}"
    );
    let fast = within(start, Duration::from_secs(10), &mut detail);
    outcome(
        worst_identity < 1e-12 && worst_tail == 0.0 && worst_increment >= -1e-10 && fast,
        detail,
    )
}

fn criterion_uniform_damping() -> Outcome {
    let start = Instant::now();
    let sc = build("uniform_damping").unwrap();
    let out = match run(&sc) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let p = &sc.params;
    let r = energy_residual(&out.history);
    // tau(t) = exp(-t / (2 lambda)); the stress source integrates to -tau log tau.
    let (mut tau_err, mut source_err) = (0.0f64, 0.0f64);
    let tau_exact = (-out.state.time / (2.0 * p.lambda)).exp();
    for v in out.state.tau.values() {
        tau_err = tau_err.max((v - tau_exact).abs());
    }
    for rec in &out.history {
        let tau = (-rec.time / (2.0 * p.lambda)).exp();
        source_err = source_err.max((rec.source_cum + xlogx(tau)).abs());
    }
    let mut detail = format!(
        "|energy_residual| = {:.3e}; pointwise tau error = {tau_err:.3e}; source integral error = {source_err:.3e}",
        r.abs()
    );
    let fast = within(start, Duration::from_secs(10), &mut detail);
    outcome(r.abs() < 1e-8 && tau_err < 1e-10 && fast, detail)
}

fn criterion_domination(out: &RunOutput, elapsed: Duration) -> Outcome {
    let steps = out.verdict.metric("steps").unwrap_or(0.0);
    let worst = out
        .history
        .iter()
        .map(|r| r.domination_margin)
        .fold(f64::INFINITY, f64::min);
    let initial = out.history.first().map(|r| r.domination_margin).unwrap_or(f64::NAN);
    let mut detail = format!(
        "{} records over {steps} steps; initial margin {initial:.4}; min margin {worst:.6e}",
        out.history.len()
    );
    detail.push_str(&format!("; runtime {:.2}s (limit 60s)", elapsed.as_secs_f64()));
    outcome(
        steps == 1000.0 && initial > 0.0 && worst >= -1e-13 && elapsed < Duration::from_secs(60),
        detail,
    )
}

fn criterion_mass(out: &RunOutput, p: &ModelParams) -> Outcome {
    let d_rho = mass_drift(&out.history, |r| r.mass_rho);
    let d_eta = mass_drift(&out.history, |r| r.mass_eta);
    let tau = tau_decay_error(&out.history, p);
    let detail = format!("rho drift {d_rho:.3e}; eta drift {d_eta:.3e}; tau decay error {tau:.3e}");
    outcome(d_rho < 1e-12 && d_eta < 1e-12 && tau < 1e-10, detail)
}

fn criterion_reduction() -> Outcome {
    let start = Instant::now();
    let sc = build("reduction_twin").unwrap();
    let out = match run(&sc) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let gap = out.verdict.metric("sup_difference").unwrap_or(f64::INFINITY);
    let steps = out.verdict.metric("steps").unwrap_or(0.0);
    let mut detail = format!("sup gap {gap:.3e} after {steps} steps");
    let fast = within(start, Duration::from_secs(10), &mut detail);
    outcome(gap < 1e-12 && steps == 100.0 && fast, detail)
}

fn criterion_advection() -> Outcome {
    let start = Instant::now();
    let sc = build("advection_periodic").unwrap();
    let out = match run(&sc) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let v = &out.verdict;
    let order = |a: &str, b: &str| (v.metric(a).unwrap() / v.metric(b).unwrap()).log2();
    let smooth = order("l1_smooth_coarse", "l1_smooth_fine");
    let square = order("l1_square_coarse", "l1_square_fine");
    let mut detail = format!("128 vs 256: smooth order {smooth:.4}, square order {square:.4}");
    let fast = within(start, Duration::from_secs(60), &mut detail);
    outcome(smooth >= 0.8 && square >= 0.5 && fast, detail)
}

fn criterion_energy_refinement() -> Outcome {
    let start = Instant::now();
    let sc = build("driven_noslip").unwrap();
    let out = match run(&sc) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let coarse = out.verdict.metric("residual_coarse").unwrap();
    let fine = out.verdict.metric("residual_fine").unwrap();
    let factor = coarse.abs() / fine.abs();
    let order = factor.log2();
    let mut detail = format!("|R| {:.3e} -> {:.3e}; factor {factor:.3}; order {order:.3}", coarse.abs(), fine.abs());
    let fast = within(start, Duration::from_secs(300), &mut detail);
    outcome(factor >= 1.3 && order >= 0.5 && fast, detail)
}

fn vortex_pair() -> Result<(oldroyd::scenarios::VortexStudy, oldroyd::scenarios::VortexStudy), String> {
    let sc = build("vortex_domination").unwrap();
    let coarse = vortex_study(&sc, 64, 1.0).map_err(|e| e.to_string())?;
    let fine = vortex_study(&sc, 128, 1.0).map_err(|e| e.to_string())?;
    Ok((coarse, fine))
}

fn criterion_ratio_oracle(pair: &Result<(oldroyd::scenarios::VortexStudy, oldroyd::scenarios::VortexStudy), String>, c_bar: f64) -> Outcome {
    let (coarse, fine) = match pair {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("study failed: {e}")),
    };
    let order = (coarse.ratio_l1 / fine.ratio_l1).log2();
    let bounded = [coarse, fine]
        .iter()
        .all(|s| s.oracle_min >= 0.0 && s.oracle_max <= c_bar);
    let detail = format!(
        "L1 gap {:.4e} (64) -> {:.4e} (128), order {order:.3}; oracle range [{:.4}, {:.4}] within [0, {c_bar}]",
        coarse.ratio_l1,
        fine.ratio_l1,
        coarse.oracle_min.min(fine.oracle_min),
        coarse.oracle_max.max(fine.oracle_max)
    );
    outcome(fine.ratio_l1 < coarse.ratio_l1 && order >= 0.5 && bounded, detail)
}

fn criterion_renormalized(pair: &Result<(oldroyd::scenarios::VortexStudy, oldroyd::scenarios::VortexStudy), String>) -> Outcome {
    let (coarse, fine) = match pair {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("study failed: {e}")),
    };
    let detail = format!(
        "s_tau (b = theta^2): {:.3e} -> {:.3e}; eta (b = theta log theta): {:.3e} -> {:.3e}",
        coarse.renorm_s_tau, fine.renorm_s_tau, coarse.renorm_eta, fine.renorm_eta
    );
    outcome(
        coarse.renorm_s_tau < 0.05
            && coarse.renorm_eta < 0.05
            && fine.renorm_s_tau < coarse.renorm_s_tau
            && fine.renorm_eta < coarse.renorm_eta,
        detail,
    )
}

fn criterion_pressure_sign() -> Outcome {
    let sc = build("negative_pressure_sign").unwrap();
    match run(&sc) {
        Ok(out) => outcome(out.verdict.passed, out.verdict.summary),
        Err(e) => outcome(false, format!("run failed: {e}")),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "gibbs identity", criterion_gibbs()));
    results.push((2, "pressure decomposition", criterion_decomposition()));
    results.push((3, "uniform damping energy identity", criterion_uniform_damping()));

    let vortex = build("vortex_domination").unwrap();
    let start = Instant::now();
    match run(&vortex) {
        Ok(out) => {
            let elapsed = start.elapsed();
            results.push((4, "domination preservation", criterion_domination(&out, elapsed)));
            results.push((5, "mass laws", criterion_mass(&out, &vortex.params)));
        }
        Err(e) => {
            results.push((4, "domination preservation", outcome(false, format!("run failed: {e}"))));
            results.push((5, "mass laws", outcome(false, format!("run failed: {e}"))));
        }
    }
    results.push((6, "reduction consistency", criterion_reduction()));
    results.push((7, "transport convergence", criterion_advection()));
    results.push((8, "energy residual under refinement", criterion_energy_refinement()));
    let pair = vortex_pair();
    results.push((9, "ratio oracle agreement", criterion_ratio_oracle(&pair, vortex.params.c_bar)));
    results.push((10, "renormalized residuals", criterion_renormalized(&pair)));
    results.push((11, "negative pressure sign", criterion_pressure_sign()));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
