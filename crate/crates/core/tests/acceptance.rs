//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are evaluated at full tolerance and
//! reported as FAIL; they do not fail the target (see the README for the
//! analysis). Any other failure, or a known failure that starts passing,
//! makes the target exit non-zero.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use simlab_core::aoa_beam_training::{
    build_detection_grid, default_grid_size, train_beamformers, NoiseConfig,
};
use simlab_core::array_channel::{los_channel, ChannelRealization, RicianConfig, SystemDims};
use simlab_core::impairments::{corollary4_rate, first_order_inverse, phase_error_diagonal, theorem2_rate};
use simlab_core::linalg::{frobenius_sq, hermitian_condition, identity, invert};
use simlab_core::pilot_equalization::PilotFamily;
use simlab_core::rng::{complex_normal_matrix, seeded, substream};
use simlab_core::simlab::runner::{impairment_profile, ResultRecord};
use simlab_core::simlab::trial::{run_hybrid_trial, AnglePolicy, TrialSetup};
use simlab_core::simlab::{run_scenario, Scenario, ScenarioConfig};
use simlab_core::zf_precoding::{gram, zf_precoder};
use simlab_core::CMatrix;

const KNOWN_FAILURES: &[&str] = &["AC6"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn value(records: &[ResultRecord], x: f64, metric: &str) -> f64 {
    records
        .iter()
        .find(|r| (r.x - x).abs() < 1e-9 && r.metric == metric)
        .unwrap_or_else(|| panic!("missing {metric} at {x}"))
        .value
}

fn config(scenario: Scenario, kv: &[(&str, &str)]) -> ScenarioConfig {
    let mut c = ScenarioConfig::defaults(scenario);
    for (k, v) in kv {
        c.apply(k, v).unwrap();
    }
    c
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let c = config(
        Scenario::MseSweep,
        &[("sweep.m", "40, 100, 200"), ("dims.P", "16"), ("dims.N", "4"), ("pilot_snr_db", "10"), ("trials", "2000")],
    );
    let r = run_scenario(&c).unwrap().records;
    let secs = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for m in [40.0, 100.0, 200.0] {
        let x = m * 16.0;
        let (sim, cf) = (value(&r, x, "mse_sim"), value(&r, x, "mse_closed_form"));
        let rel = (sim / cf - 1.0).abs();
        worst = worst.max(rel);
        parts.push(format!("M={m}: {sim:.4e} vs {cf:.4e} ({:.2}%)", rel * 100.0));
    }
    Outcome {
        id: "AC1",
        pass: worst <= 0.05 && secs < 120.0,
        detail: format!("MSE vs closed form, worst {:.2}% (tol 5%), {secs:.1}s; {}", worst * 100.0, parts.join("; ")),
    }
}

fn ac2() -> Outcome {
    let dims = SystemDims::new(100, 16, 10).unwrap();
    let mut setup = TrialSetup::new(dims, RicianConfig::iid(2.0), 100.0, f64::INFINITY, PilotFamily::Dft).unwrap();
    setup.angles = AnglePolicy::Uniform;
    setup.min_cos_separation = 0.0;
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let tr = run_hybrid_trial(&setup, 2, t).unwrap();
        let rel = (frobenius_sq(&(&tr.estimate.h_eq - &tr.truth.h_eq)) / frobenius_sq(&tr.truth.h_eq)).sqrt();
        worst = worst.max(rel);
    }
    Outcome {
        id: "AC2",
        pass: worst <= 1e-10,
        detail: format!("noiseless round trip, worst relative Frobenius error {worst:.2e} over 100 realizations (tol 1e-10)"),
    }
}

fn ac3() -> Outcome {
    let dims = SystemDims::new(100, 16, 10).unwrap();
    let mut setup = TrialSetup::new(dims, RicianConfig::iid(2.0), 100.0, f64::INFINITY, PilotFamily::Dft).unwrap();
    setup.angles = AnglePolicy::Uniform;
    setup.min_cos_separation = 0.0;
    let (mut tested, mut worst_null, mut worst_leak) = (0, 0.0f64, 0.0f64);
    let mut check = |h: &CMatrix| {
        if hermitian_condition(&gram(h)) > 1e6 {
            return;
        }
        tested += 1;
        let z = zf_precoder(h).unwrap();
        let g = h.transpose() * &z.w;
        let n = h.nrows();
        worst_null = worst_null.max(frobenius_sq(&(&g - identity(n))).sqrt());
        let signal: f64 = (0..n).map(|k| g[(k, k)].norm_sqr()).sum();
        let leak = frobenius_sq(&g) - signal;
        worst_leak = worst_leak.max(leak / signal);
    };
    for t in 0..300 {
        check(&run_hybrid_trial(&setup, 3, t).unwrap().truth.h_eq);
    }
    let mut rng = seeded(3);
    for n in 2..10 {
        for _ in 0..25 {
            check(&complex_normal_matrix(&mut rng, n, n, 1.0));
        }
    }
    Outcome {
        id: "AC3",
        pass: tested > 0 && worst_null < 1e-8 && worst_leak < 1e-10,
        detail: format!("ZF nulling on {tested} realizations with cond <= 1e6: max |H^T W - I|_F {worst_null:.2e} (tol 1e-8), max interference/signal {worst_leak:.2e} (tol 1e-10)"),
    }
}

fn ac4() -> Outcome {
    let c = config(
        Scenario::RateVsSnr,
        &[("dims.M", "100"), ("dims.N", "10"), ("dims.P", "16"), ("kappa", "2"), ("snr_db", "-10:5:20"), ("trials", "1000")],
    );
    let r = run_scenario(&c).unwrap().records;
    let mut dominated = true;
    let mut worst_margin = f64::INFINITY;
    for &x in &c.snr_db {
        let margin = value(&r, x, "rate_upper") - value(&r, x, "rate_sim");
        dominated &= margin >= 0.0;
        worst_margin = worst_margin.min(margin);
    }
    let gap10 = value(&r, 10.0, "rate_upper") - value(&r, 10.0, "rate_sim");
    let outages: f64 = c.snr_db.iter().map(|&x| value(&r, x, "zf_outage")).sum::<f64>() / c.snr_db.len() as f64;
    Outcome {
        id: "AC4",
        pass: dominated && gap10 <= 1.0,
        detail: format!(
            "bound - simulation >= 0 at all SNRs (min {worst_margin:.3}); gap at 10 dB {gap10:.3} bits (tol 1.0); outage rate {outages:.4}"
        ),
    }
}

fn ac5() -> Outcome {
    let c = config(
        Scenario::RateVsKappa,
        &[("dims.M", "512"), ("dims.P", "16"), ("dims.N", "4"), ("snr_db", "40"), ("kappa", "1, 2, 10"), ("trials", "200")],
    );
    let r = run_scenario(&c).unwrap().records;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1.0, 2.0, 10.0] {
        let (g, cf) = (value(&r, k, "gap_upper"), value(&r, k, "gap_closed_form"));
        ok &= (g - cf).abs() <= 0.05;
        parts.push(format!("k={k}: {g:.4} vs {cf:.4}"));
    }
    let kappas = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let t = config(
        Scenario::RateVsKappa,
        &[("dims.M", "100"), ("dims.P", "16"), ("dims.N", "4"), ("snr_db", "20"), ("kappa", "1,2,5,10,20,50,100"), ("trials", "500")],
    );
    let rt = run_scenario(&t).unwrap().records;
    let gaps: Vec<f64> = kappas.iter().map(|&k| value(&rt, k, "gap_upper")).collect();
    let monotone = gaps.windows(2).all(|w| w[1].abs() < w[0].abs());
    let last = gaps[gaps.len() - 1].abs();
    Outcome {
        id: "AC5",
        pass: ok && monotone && last <= 0.05,
        detail: format!(
            "M=512 gaps {} (tol 0.05); trend |gap| {:?} monotone={monotone}, |gap(100)|={last:.4} (tol 0.05)",
            parts.join(", "),
            gaps.iter().map(|g| (g * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    }
}

fn impairment_run() -> (ScenarioConfig, Vec<ResultRecord>) {
    let c = config(
        Scenario::Impairments,
        &[
            ("dims.M", "100"),
            ("dims.P", "8"),
            ("dims.N", "8"),
            ("kappa", "2"),
            ("impair.a_deg", "3"),
            ("impair.b_deg", "3"),
            ("impair.var_aoa_bs", &format!("{}", 1.782 / 200.0)),
            ("impair.var_aoa_ms", "0"),
            ("impair.delta2", "0.005"),
            ("snr_db", "30:5:40"),
            ("trials", "2000"),
        ],
    );
    let r = run_scenario(&c).unwrap().records;
    (c, r)
}

fn ac6(r: &[ResultRecord]) -> Outcome {
    let gap = value(r, 40.0, "gap_sim");
    let cf = value(r, 40.0, "gap_closed_form");
    Outcome {
        id: "AC6",
        pass: (gap - 1.0).abs() <= 0.2,
        detail: format!(
            "ideal - impaired rate at 40 dB {gap:.3} bits, target 1.0 +/- 0.2 (closed form log2(1/xi_hat) = {cf:.4}, xi = {}, xi_hat = {:.4})",
            value(r, 40.0, "xi"),
            value(r, 40.0, "xi_hat")
        ),
    }
}

fn ac7(c: &ScenarioConfig, r: &[ResultRecord]) -> Outcome {
    let dims = c.dims;
    let profile = impairment_profile(c, &dims, &mut Vec::new()).unwrap();
    let scale = profile.xi_hat * dims.array_gain() * 2.0 / 3.0;
    let th2 = theorem2_rate(&(identity(dims.users) * Complex64::from(scale)), profile.delta2).unwrap();
    let cor4 = corollary4_rate(profile.delta2, profile.xi_hat, 2.0, &dims).unwrap();
    let closed_rel = th2.iter().map(|v| ((v - cor4) / cor4).abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for x in [30.0, 35.0, 40.0] {
        let (sim, cf) = (value(r, x, "rate_ideal_sim"), value(r, x, "rate_ideal_corollary4"));
        worst = worst.max((sim - cf).abs());
        parts.push(format!("{x} dB: {sim:.3} vs {cf:.3}"));
    }
    let impaired: Vec<String> = [30.0, 35.0, 40.0]
        .iter()
        .map(|&x| format!("{:.3}/{:.3}", value(r, x, "rate_impaired_sim"), value(r, x, "rate_impaired_corollary4")))
        .collect();
    Outcome {
        id: "AC7",
        pass: closed_rel <= 1e-12 && worst <= 0.5,
        detail: format!(
            "closed forms agree to {closed_rel:.1e} (tol 1e-12); CSI-error simulation vs closed form {} (max dev {worst:.3}, tol 0.5); with hardware errors sim/closed {}",
            parts.join(", "),
            impaired.join(", ")
        ),
    }
}

fn ac8() -> Outcome {
    let mut rng = seeded(8);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut trials = 0;
    while trials < 100 {
        let a = complex_normal_matrix(&mut rng, 5, 5, 1.0);
        let k = gram(&a) + identity(5) * Complex64::from(0.5);
        if hermitian_condition(&k) > 100.0 {
            continue;
        }
        trials += 1;
        let raw = complex_normal_matrix(&mut rng, 5, 5, 1.0);
        let dir = (&raw + raw.adjoint()) * Complex64::from(0.5);
        let unit = &dir * Complex64::from(frobenius_sq(&k).sqrt() / frobenius_sq(&dir).sqrt());
        let err = |eps: f64| {
            let d = &unit * Complex64::from(eps);
            frobenius_sq(&(first_order_inverse(&k, &d).unwrap() - invert(&(&k + &d)).unwrap())).sqrt()
        };
        let ratio = err(1e-2) / err(5e-3);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Outcome {
        id: "AC8",
        pass: lo >= 3.5 && hi <= 4.5,
        detail: format!("first-order inverse error ratio on halving over 100 trials in [{lo:.3}, {hi:.3}] (tol [3.5, 4.5])"),
    }
}

fn ac9() -> Outcome {
    let mut rng = seeded(9);
    let mut worst: f64 = 0.0;
    for deg in [1.0f64, 3.0, 10.0] {
        let a = deg.to_radians();
        let d = phase_error_diagonal(&mut rng, a, 1_000_000).unwrap();
        let mean = d.iter().sum::<Complex64>() / Complex64::from(1e6);
        worst = worst.max((mean - Complex64::from(a.sin() / a)).norm());
    }
    Outcome {
        id: "AC9",
        pass: worst <= 1e-3,
        detail: format!("phase-error mean vs sin(a)/a, worst deviation {worst:.2e} (tol 1e-3)"),
    }
}

fn ac10() -> Outcome {
    let m = 100;
    let dims = SystemDims::new(m, 8, 1).unwrap();
    let bs = build_detection_grid(default_grid_size(m), m, 0.5).unwrap();
    let ue = build_detection_grid(default_grid_size(8), 8, 0.5).unwrap();
    let mut exact = 0;
    for t in 0..1000u64 {
        let mut rng = substream(10, t, "ac10.los");
        let (i, j) = (rng.random_range(0..bs.len()), rng.random_range(0..ue.len()));
        let ch = ChannelRealization {
            h: los_channel(bs.angles[i], ue.angles[j], &dims).unwrap(),
            theta: bs.angles[i],
            phi: ue.angles[j],
            kappa: f64::INFINITY,
        };
        let b = train_beamformers(&[ch], &dims, &NoiseConfig::noiseless(1.0), &mut rng).unwrap();
        exact += usize::from(b.bs_grid_idx[0] == i && b.ue_grid_idx[0] == j);
    }
    let step = bs.max_cos_step();
    let mut within = 0;
    for t in 0..1000u64 {
        let mut rng = substream(10, t, "ac10.noisy");
        let theta = rng.random_range(0.0..=PI);
        let phi = rng.random_range(0.0..=PI);
        let ch = ChannelRealization::draw(&mut rng, theta, phi, &dims, &RicianConfig::iid(10.0)).unwrap();
        let b = train_beamformers(&[ch], &dims, &NoiseConfig::from_tone_snr(100.0), &mut rng).unwrap();
        within += usize::from((b.bs_angles[0].cos() - theta.cos()).abs() <= step);
    }
    Outcome {
        id: "AC10",
        pass: exact == 1000 && within >= 950,
        detail: format!(
            "noiseless on-grid recovery {exact}/1000; 20 dB, kappa 10: within one grid step ({step:.4} in cos) {within}/1000 (need 950)"
        ),
    }
}

fn ac11() -> Outcome {
    let dir = std::env::temp_dir().join(format!("simlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut ok = true;
    let mut checked = Vec::new();
    for s in [Scenario::RateVsSnr, Scenario::Impairments, Scenario::MseSweep] {
        let mut c = config(s, &[("dims.M", "48"), ("dims.P", "4"), ("dims.N", "4"), ("trials", "200")]);
        if s == Scenario::MseSweep {
            c.apply("sweep.m", "16, 48").unwrap();
        }
        let mut files = Vec::new();
        for (run, threads) in [1usize, 4, 4].iter().enumerate() {
            c.threads = Some(*threads);
            let path = dir.join(format!("{}-{run}.csv", s.name()));
            simlab_core::simlab::emit_csv(&run_scenario(&c).unwrap().records, &path).unwrap();
            files.push(std::fs::read(&path).unwrap());
        }
        ok &= files.windows(2).all(|w| w[0] == w[1]);
        checked.push(s.name());
    }
    let _ = std::fs::remove_dir_all(&dir);
    Outcome {
        id: "AC11",
        pass: ok,
        detail: format!("byte-identical CSV across reruns with 1 and 4 threads for {}", checked.join(", ")),
    }
}

fn main() -> ExitCode {
    // cargo passes harness flags such as --nocapture; this target has no filters
    let started = Instant::now();
    let mut outcomes = vec![ac1(), ac2(), ac3(), ac4(), ac5()];
    let (ci, ri) = impairment_run();
    outcomes.push(ac6(&ri));
    outcomes.push(ac7(&ci, &ri));
    outcomes.extend([ac8(), ac9(), ac10(), ac11()]);

    let mut unexpected = Vec::new();
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        let known = KNOWN_FAILURES.contains(&o.id);
        if o.pass == known {
            unexpected.push(o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass ({:.1}s); known failures: {}",
        outcomes.len(),
        started.elapsed().as_secs_f64(),
        KNOWN_FAILURES.join(", ")
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
