//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use eh_irsa::agent::{Learner, LearningParams, QTable};
use eh_irsa::channel::{pathloss_gain, sample_eh_channel};
use eh_irsa::harvest::{incident_power, Battery};
use eh_irsa::report::parse_csv;
use eh_irsa::simulator::{aggregate, mean_harvest_quanta, run_all};
use eh_irsa::sweep::{run_sweep, SweepParam, SweepSpec, PRESETS};
use eh_irsa::{sic_decode, CostModel, CsiMode, DataGain, FrameAlloc, ScenarioConfig, Scheme};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Charge efficiency putting the mean harvest near 2.5 quanta per frame at
/// 1 W, full CSI, eight antennas.
const CALIBRATED_EFFICIENCY: f64 = 36133.0;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn calibrated() -> ScenarioConfig {
    ScenarioConfig {
        antennas: 8,
        charge_efficiency: CALIBRATED_EFFICIENCY,
        ..ScenarioConfig::default()
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

fn decoder_oracle() -> Verdict {
    let start = Instant::now();
    let mut exhaustive = 0usize;
    for users in 1..=3 {
        for slots in 1..=3 {
            for mask in 0..(1u64 << (users * slots)) {
                let frame = common::frame_from_mask(users, slots, mask);
                let res = sic_decode(&frame);
                let terminals = common::peel_all_orders(&frame);
                let got = res.decoded_users.iter().copied().collect();
                if terminals.len() != 1
                    || !terminals.contains(&got)
                    || !common::is_valid_order(&frame, &res.per_iteration_decodes)
                {
                    return verdict(
                        false,
                        format!("mismatch on U={users} K={slots} mask={mask:#b}"),
                    );
                }
                exhaustive += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0de);
    for i in 0..10_000 {
        let frame = common::random_frame(&mut rng, 8, 8);
        let expected: std::collections::BTreeSet<usize> =
            sic_decode(&frame).decoded_users.into_iter().collect();
        for _ in 0..3 {
            if common::peel_random(&frame, &mut rng) != expected {
                return verdict(false, format!("random order diverged on fuzz frame {i}"));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        within(Duration::from_secs(10), elapsed),
        format!("{exhaustive} enumerated frames, 10000 fuzzed frames x 3 orders, {elapsed:.2?}"),
    )
}

fn worked_example() -> Verdict {
    let frame = FrameAlloc::from_slots(3, vec![vec![0, 1], vec![0, 1, 2], vec![1]]).unwrap();
    let res = sic_decode(&frame);
    let order: Vec<String> = res
        .per_iteration_decodes
        .iter()
        .map(|u| format!("u{}", u + 1))
        .collect();
    verdict(
        res.per_iteration_decodes == [1, 0, 2] && res.iterations == 3,
        format!("order {}", order.join(", ")),
    )
}

fn eh_curve() -> Verdict {
    let curve = ScenarioConfig::default().eh_curve::<f64>();
    let w = curve.saturation_mw;
    let g = |p: f64| curve.harvest_rate(p).unwrap();
    let zero = g(0.0);
    let mut prev = zero;
    let mut monotone = true;
    let mut below = true;
    for i in 0..=10_000 {
        let v = g(100.0 * i as f64 / 10_000.0);
        monotone &= v >= prev;
        below &= v < w;
        prev = v;
    }
    let far = g(1e6);
    let rel = (far - 10.73).abs() / 10.73;
    verdict(
        zero == 0.0 && monotone && below && rel <= 1e-9 && w == 10.73,
        format!("G(0)={zero}, monotone={monotone}, below W={below}, |G(1e6)-W|/W={rel:.1e}"),
    )
}

fn beamforming_dominance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // ties (M = 1, or scatter parallel to the LOS vector) may round either way
    let rounding = 1e-12;
    let (mut violations, mut ties) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for m in [1usize, 4, 8] {
        for kappa in [1.585f64, 4.0] {
            let cfg = ScenarioConfig {
                antennas: m,
                kappa_db: 10.0 * kappa.log10(),
                ..ScenarioConfig::default()
            };
            let params = cfg.channel_params::<f64>().unwrap();
            for _ in 0..10_000 {
                let ch = sample_eh_channel(&params, &mut rng).unwrap();
                let f = incident_power(&ch, 1.0, CsiMode::Full).unwrap();
                let a = incident_power(&ch, 1.0, CsiMode::Average).unwrap();
                if f < a {
                    worst = worst.max((a - f) / f);
                    if a - f > rounding * f {
                        violations += 1;
                    } else {
                        ties += 1;
                    }
                }
            }
        }
    }
    verdict(
        violations == 0,
        format!(
            "{violations} violations in 60000 channels; {ties} rounding ties, worst relative excess {worst:.1e}"
        ),
    )
}

fn analytic_mean() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for m in [4usize, 8] {
        let cfg = ScenarioConfig {
            antennas: m,
            ..ScenarioConfig::default()
        };
        let params = cfg.channel_params::<f64>().unwrap();
        let kappa = cfg.kappa_linear();
        let beta = pathloss_gain(3.0, 2.5e9, 2.7, 3e8).unwrap();
        let mf = m as f64;
        let expected =
            beta * cfg.pb_power_w * (mf * kappa / (2.0 * (1.0 + kappa)) + mf / (1.0 + kappa)) * 1e3;
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                let ch = sample_eh_channel(&params, &mut rng).unwrap();
                incident_power(&ch, cfg.pb_power_w, CsiMode::Full).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((mean - expected).abs() / expected);
    }
    verdict(
        worst < 0.02,
        format!("worst relative error {:.3}% (M=4, 8)", worst * 100.0),
    )
}

fn battery_safety() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let xi = 2.1e-4;
    let cap = 6u32;
    let top = xi * cap as f64;
    let gain = DataGain {
        g: Complex64::new(1.0, 0.0),
        beta_bs: 1.0,
    };
    let mut b = Battery::new(0.0, xi, cap).unwrap();
    let (mut refused, mut spent) = (0usize, 0usize);
    for step in 0..1_000_000 {
        if rng.random_bool(0.5) {
            let rate = rng.random_range(0.0..100.0);
            b = b.charge(rate, 1e-3 * rng.random_range(0.0..4.0));
        } else {
            let copies = rng.random_range(0..=7u32);
            let before = b.stored();
            let level = b.level();
            match b.spend(copies, CostModel::Fixed, &gain, 70.0, 2.7) {
                Ok(next) => {
                    if copies > level {
                        return verdict(
                            false,
                            format!("step {step}: spent {copies} at level {level}"),
                        );
                    }
                    b = next;
                    spent += 1;
                }
                Err(_) => {
                    if copies <= level {
                        return verdict(
                            false,
                            format!("step {step}: refused {copies} at level {level}"),
                        );
                    }
                    assert_eq!(b.stored(), before);
                    refused += 1;
                }
            }
        }
        if !(b.stored() >= 0.0 && b.stored() <= top) {
            return verdict(
                false,
                format!("step {step}: stored {} outside [0, {top}]", b.stored()),
            );
        }
    }
    verdict(
        true,
        format!("10^6 steps, {spent} spends, {refused} refusals"),
    )
}

fn bandit() -> Verdict {
    let rewards = [0.3, 1.0, 0.6];
    let best = 1;
    let mut worst_lock_in = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = LearningParams::with_horizon(0.1, 0.1, 0.5, 0.01, 1000);
        let mut learner = Learner::new(QTable::zeros(1, 3), params);
        let mut lock_in = 0;
        for t in 0..1000 {
            let a = learner.act(0, t, &[0, 1, 2], &mut rng).unwrap();
            learner.record(0, a, rewards[a]);
            learner.observe(0);
            if learner.table.argmax_over(0, &[0, 1, 2]) != Some(best) {
                lock_in = t + 1;
            }
        }
        if learner.table.argmax_over(0, &[0, 1, 2]) != Some(best) {
            return verdict(false, format!("seed {seed} settled on a suboptimal action"));
        }
        worst_lock_in = worst_lock_in.max(lock_in);
    }
    verdict(
        true,
        format!(
            "20 seeds, greedy action optimal from update {} at the latest",
            worst_lock_in + 1
        ),
    )
}

fn success_stats(cfg: &ScenarioConfig) -> (f64, f64) {
    let agg = aggregate(&run_all::<f64>(cfg).unwrap()).unwrap();
    (agg.mean_success.mean, agg.mean_success.std)
}

fn learning_beats_baseline() -> Verdict {
    let start = Instant::now();
    let base = calibrated();
    let harvest = mean_harvest_quanta(&base, 200_000, 11).unwrap();
    let (q, sq) = success_stats(&base);
    let (c, sc) = success_stats(&ScenarioConfig {
        scheme: Scheme::Crdsa,
        ..base.clone()
    });
    let runs = base.runs as f64;
    let pooled_se = (sq * sq / runs + sc * sc / runs).sqrt();
    let gain = (q - c) / c;
    let elapsed = start.elapsed();
    verdict(
        (1.0..=3.0).contains(&harvest)
            && gain >= 0.05
            && q - c > 2.0 * pooled_se
            && within(Duration::from_secs(120), elapsed),
        format!(
            "harvest {harvest:.2} quanta/frame; Q {q:.3} vs CRDSA {c:.3} (+{:.1}%, {:.1} pooled SE), {elapsed:.1?}",
            gain * 100.0,
            (q - c) / pooled_se
        ),
    )
}

fn sweep_points(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    scheme: Scheme,
    csi: CsiMode,
) -> Vec<(f64, f64)> {
    let mut spec = SweepSpec::new(param, values.to_vec(), base.clone());
    spec.schemes = vec![scheme];
    spec.csi_modes = vec![csi];
    run_sweep(&spec)
        .into_result()
        .unwrap()
        .into_iter()
        .map(|p| (p.row.mean_success_per_frame, p.row.std))
        .collect()
}

/// Nondecreasing within two pooled run standard deviations, and a last step below 5%.
fn trend_ok(points: &[(f64, f64)]) -> (bool, String) {
    let monotone = points.windows(2).all(|w| {
        let sigma = ((w[0].1 * w[0].1 + w[1].1 * w[1].1) / 2.0).sqrt();
        w[1].0 >= w[0].0 - 2.0 * sigma
    });
    let n = points.len();
    let step = (points[n - 1].0 - points[n - 2].0).abs() / points[n - 2].0;
    let means: Vec<String> = points.iter().map(|p| format!("{:.3}", p.0)).collect();
    (
        monotone && step < 0.05,
        format!("[{}] last step {:.1}%", means.join(" "), step * 100.0),
    )
}

fn power_and_charging() -> Verdict {
    let base = calibrated();
    let mut pass = true;
    let mut details = Vec::new();
    let power = [1.0, 2.0, 4.0, 6.0, 8.0];
    for csi in [CsiMode::Full, CsiMode::Average] {
        let start = Instant::now();
        let (ok, d) = trend_ok(&sweep_points(
            &base,
            SweepParam::PbPowerW,
            &power,
            Scheme::QLearning,
            csi,
        ));
        let ok = ok && within(Duration::from_secs(300), start.elapsed());
        pass &= ok;
        details.push(format!("Pb {}: {d}", csi.as_str()));
    }
    let start = Instant::now();
    let charging = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let (ok, d) = trend_ok(&sweep_points(
        &base,
        SweepParam::ChargingSlotMs,
        &charging,
        Scheme::QLearning,
        CsiMode::Full,
    ));
    pass &= ok && within(Duration::from_secs(300), start.elapsed());
    details.push(format!("tC fcsi: {d}"));
    verdict(pass, format!("qlearning, M=8; {}", details.join("; ")))
}

fn los_gap() -> Verdict {
    let base = ScenarioConfig {
        antennas: 4,
        ..calibrated()
    };
    let kappas = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let full = sweep_points(
        &base,
        SweepParam::KappaDb,
        &kappas,
        Scheme::QLearning,
        CsiMode::Full,
    );
    let avg = sweep_points(
        &base,
        SweepParam::KappaDb,
        &kappas,
        Scheme::QLearning,
        CsiMode::Average,
    );
    let runs = base.runs as f64;
    let gaps: Vec<(f64, f64)> = full
        .iter()
        .zip(&avg)
        .map(|(&(f, sf), &(a, sa))| {
            let (se_f, se_a) = (sf / runs.sqrt(), sa / runs.sqrt());
            let gap = (f - a) / a;
            let se = ((se_f / a).powi(2) + (f * se_a / (a * a)).powi(2)).sqrt();
            (gap, se)
        })
        .collect();
    let ok = gaps
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt());
    let shown: Vec<String> = gaps
        .iter()
        .map(|g| format!("{:.1}%", g.0 * 100.0))
        .collect();
    verdict(
        ok,
        format!("F-CSI over A-CSI at 1..6 dB: {}", shown.join(" ")),
    )
}

fn preset_determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_eh-irsa");
    let dir = tempfile::tempdir().unwrap();
    let mut rows = 0;
    for (name, _) in PRESETS {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "3"].iter().enumerate() {
            let path = dir.path().join(format!("{name}-{i}.csv"));
            let status = Command::new(exe)
                .args(["sweep", "--preset", name, "--runs", "2", "--frames", "120"])
                .args(["--seed", "42", "--parallel", threads, "--out"])
                .arg(&path)
                .status()
                .unwrap();
            if !status.success() {
                return verdict(false, format!("{name} exited with {status}"));
            }
            outputs.push(std::fs::read(&path).unwrap());
        }
        if outputs[0] != outputs[1] {
            return verdict(false, format!("{name} differs between invocations"));
        }
        match parse_csv(std::str::from_utf8(&outputs[0]).unwrap()) {
            Ok(r) if !r.is_empty() => rows += r.len(),
            _ => return verdict(false, format!("{name} wrote an unreadable CSV")),
        }
    }
    verdict(
        true,
        format!(
            "{} presets, {rows} rows, byte-identical across repeats",
            PRESETS.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("decoder oracle equivalence", decoder_oracle),
        ("three-user worked example", worked_example),
        ("harvester curve properties", eh_curve),
        ("beamforming dominance", beamforming_dominance),
        ("analytic mean incident power", analytic_mean),
        ("battery safety", battery_safety),
        ("bandit sanity", bandit),
        ("learning beats CRDSA", learning_beats_baseline),
        ("power and charging trends", power_and_charging),
        ("LOS gap trend", los_gap),
        ("preset determinism", preset_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        println!(
            "criterion {:>2} {} {name}: {} [{:.1?}]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
