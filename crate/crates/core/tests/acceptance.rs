//! Acceptance gate: one PASS/FAIL line per criterion. Tolerances and sweep
//! sizes are fixed here. The process exits 0 either way so the rest of the
//! workspace tests still run; read the lines, not the status.

mod common;

use std::sync::Mutex;
use std::time::Instant;

use salstream_core::abr::{
    mpc_plan, mpc_plan_unweighted, simulate_session, BitrateLadder, DecisionContext, NetworkTrace,
    QoeParams, RobustMpc, SessionConfig, StaticWeights, UniformWeights,
};
use salstream_core::forecast::{
    evaluate, gradient_check, loss, train, windows_from_video, ForecastInput, ForecastModel, Hyper,
    ModelKind, Sample, TrainConfig,
};
use salstream_core::live::{
    check_causality, chunk_coverage, replay_utility, required_lout, run_live_session, select_model,
    table_latency, utility, Event, LastValueForecaster, LiveConfig, LiveSession,
};
use salstream_core::model::{mean_ap, plcc, srcc, VideoRecord};
use salstream_core::perception::{raw_weights, run_perception};
use salstream_core::ranking::{
    gaussian_kernel, gaussian_smooth, rank_to_weights, rank_video, recurrence_t, sigma_sweep,
    RankingConfig,
};
use salstream_core::rater::{MockOracle, MockOracleConfig, Oracle};
use salstream_core::synth::{
    sawtooth, synthetic_corpus, synthetic_video, EmbeddingGenerator, SynthConfig,
};

// tolerances
const METRIC_TOL: f64 = 1e-12;
const KERNEL_MASS_TOL: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-4;
const LOSS_TOL: f64 = 1e-9;
const QOE_TOL: f64 = 1e-9;
const TABLE_CALLS_TOL: f64 = 0.05;
const REPAIR_RATE: f64 = 0.95;

const WINDOWS: [usize; 5] = [2, 4, 6, 8, 10];

struct Capture(Mutex<Vec<String>>);

impl log::Log for Capture {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }
    fn log(&self, r: &log::Record) {
        if self.enabled(r.metadata()) {
            self.0.lock().unwrap().push(r.args().to_string());
        }
    }
    fn flush(&self) {}
}

static WARNINGS: Capture = Capture(Mutex::new(Vec::new()));

fn video(len: usize, seed: u64) -> VideoRecord {
    let g = EmbeddingGenerator::new(
        &SynthConfig {
            embedding_dim: 8,
            ..SynthConfig::default()
        },
        11,
    );
    synthetic_video("acc", len, &g, 1.0, seed)
}

fn trusted_order(gt: &[f64]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..gt.len()).collect();
    o.sort_by(|&a, &b| gt[b].total_cmp(&gt[a]).then(a.cmp(&b)));
    o
}

type Outcome = (bool, String);

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut table = Vec::new();
    for d in [5, 21, 200] {
        for m in WINDOWS {
            let v = video(d, d as u64 * 31 + m as u64);
            let mut o = MockOracle::for_video(&v, MockOracleConfig::noiseless(1)).unwrap();
            run_perception(&v, m, &mut o).unwrap();
            let calls = o.ledger().rate_calls as usize;
            if calls != d.div_ceil(m) {
                bad.push(format!("D={d} m={m}: {calls}"));
            }
            if d == 200 && (m == 2 || m == 10) {
                table.push(format!("m={m}:{calls}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = bad.is_empty() && table == ["m=2:100", "m=10:20"] && secs < 1.0;
    (
        ok,
        format!("D=200 {} runtime {secs:.3}s {bad:?}", table.join(" ")),
    )
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let (mut runs, mut wrong, mut over) = (0, 0, 0);
    for seed in 0..100u64 {
        for d in 8..=40 {
            for m in [2, 4, 6, 10] {
                let v = video(d, seed * 1000 + d as u64);
                let mut o = MockOracle::for_video(&v, MockOracleConfig::noiseless(seed)).unwrap();
                let p = run_perception(&v, m, &mut o).unwrap();
                let r = rank_video(&p, &RankingConfig::default(), &mut o).unwrap();
                runs += 1;
                if r.global_order != trusted_order(&v.gt()) {
                    wrong += 1;
                }
                if r.sort_calls_used > recurrence_t(d.div_ceil(m) as u64) {
                    over += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        wrong == 0 && over == 0 && secs < 30.0,
        format!("{runs} runs, {wrong} mis-sorted, {over} over T(k), runtime {secs:.2}s"),
    )
}

fn ac3() -> Outcome {
    let derived = [(1, 1), (2, 5), (10, 69), (20, 177), (25, 237)];
    let exact = derived.iter().all(|&(k, t)| recurrence_t(k) == t);
    let mut notes = Vec::new();
    let mut within = true;
    for (m, reported) in [(10u64, 182u64), (8, 242)] {
        let best = [200u64, 201]
            .iter()
            .map(|&d| {
                let t = recurrence_t(d.div_ceil(m));
                (t, (reported as f64 - t as f64).abs() / t as f64)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        within &= best.1 <= TABLE_CALLS_TOL;
        notes.push(format!(
            "m={m}: reported {reported} vs T={} ({:+.1}%)",
            best.0,
            best.1 * 100.0
        ));
    }
    (
        exact && within,
        format!("T table exact={exact}; {}", notes.join("; ")),
    )
}

fn ac4() -> Outcome {
    let (mut wins, mut exact, seeds) = (0, 0, 50u64);
    for seed in 0..seeds {
        let v = video(80, 500 + seed);
        let cfg = MockOracleConfig {
            window_bias_amplitude: 0.3,
            ..MockOracleConfig::noiseless(seed)
        };
        let mut o = MockOracle::for_video(&v, cfg).unwrap();
        let p = run_perception(&v, 8, &mut o).unwrap();
        let r = rank_video(&p, &RankingConfig::default(), &mut o).unwrap();
        let gt = v.gt();
        let raw = plcc(raw_weights(&p).values(), &gt).unwrap_or(f64::NEG_INFINITY);
        if plcc(r.smoothed_weights.values(), &gt).unwrap() > raw {
            wins += 1;
        }
        if (srcc(r.normalized_weights.values(), &gt).unwrap() - 1.0).abs() < METRIC_TOL {
            exact += 1;
        }
    }
    let rate = wins as f64 / seeds as f64;
    (
        rate >= REPAIR_RATE && exact == seeds,
        format!("smoothed beats raw in {wins}/{seeds}; ranked srcc = 1 in {exact}/{seeds}"),
    )
}

fn ac5() -> Outcome {
    let mut mass_ok = true;
    for (s, k) in [(2.5, 200), (5.0, 200), (10.0, 201), (1.0, 7), (5.0, 1)] {
        mass_ok &=
            (gaussian_kernel(s, k).unwrap().iter().sum::<f64>() - 1.0).abs() <= KERNEL_MASS_TOL;
    }
    let mut const_ok = true;
    for c in [0.0, 0.3, 0.7, 1.0] {
        for s in [2.5, 5.0, 10.0] {
            const_ok &= gaussian_smooth(&[c; 50], s, 50)
                .unwrap()
                .values()
                .iter()
                .all(|&x| x == c);
        }
    }
    let gt = sawtooth(120, 12);
    let w = rank_to_weights(&trusted_order(&gt)).unwrap();
    let sweep = sigma_sweep(w.values(), &gt, &[2.5, 5.0, 10.0], 120).unwrap();
    let emitted: Vec<f64> = sweep.iter().map(|s| s.0).collect();
    let r: Vec<f64> = sweep.iter().map(|s| s.1.srcc.unwrap()).collect();
    let falls = r[2] < r[0];
    (
        mass_ok && const_ok && emitted == [2.5, 5.0, 10.0] && falls,
        format!(
            "mass={mass_ok} constant={const_ok} sawtooth srcc at sigma 2.5/5/10: {:.3}/{:.3}/{:.3}",
            r[0], r[1], r[2]
        ),
    )
}

fn random_sample(h: &Hyper, seed: u64) -> Sample {
    let mut s = seed ^ 0x5851f42d4c957f2d;
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    Sample {
        input: ForecastInput {
            series: (0..h.l_in).map(|_| next()).collect(),
            frame_embeddings: (0..h.l_in)
                .map(|_| (0..h.emb_dim).map(|_| next() * 2.0 - 1.0).collect())
                .collect(),
            text_embedding: (0..h.emb_dim).map(|_| next() * 2.0 - 1.0).collect(),
        },
        target: (0..h.l_out).map(|_| next()).collect(),
    }
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let h = Hyper {
        d_model: 16,
        heads: 4,
        ..Hyper::new(10, 10, 16)
    };
    let mut worst = 0.0f64;
    for kind in [ModelKind::MultiModal, ModelKind::UniModal] {
        for seed in 0..10 {
            let m = ForecastModel::init(kind, h, seed).unwrap();
            let r = gradient_check(&m, &[random_sample(&h, seed)], 1.0, 1e-5).unwrap();
            worst = worst.max(r.max_rel_err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < GRAD_TOL && secs < 10.0,
        format!("max rel err {worst:.2e} over 2 variants x 10 inputs, runtime {secs:.2}s"),
    )
}

fn ac7() -> Outcome {
    let p = [0.1, 0.5, 0.3, 0.9];
    let g = [0.2, 0.1, 0.6, 0.8];
    let zero = loss(&g, &g, 1.0).unwrap();
    let mse = p
        .iter()
        .zip(&g)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / 4.0;
    let l0 = loss(&p, &g, 0.0).unwrap();
    let hand = loss(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
    (
        zero == 0.0 && l0 == mse && (hand - 3.0).abs() < LOSS_TOL,
        format!(
            "loss(gt,gt)={zero:e} lambda0-mse={:e} hand={hand}",
            l0 - mse
        ),
    )
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let synth = SynthConfig {
        embedding_dim: 16,
        ..SynthConfig::default()
    };
    let h = Hyper {
        d_model: 16,
        heads: 4,
        ..Hyper::new(10, 10, 16)
    };
    let (mut corr_wins, mut modal_wins) = (0, 0);
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let videos = synthetic_corpus(12, 120, &synth, 100 + seed);
        let windows = |vs: &[VideoRecord]| -> Vec<Sample> {
            vs.iter()
                .flat_map(|v| windows_from_video(v, &v.gt(), 10, 10, 2))
                .collect()
        };
        let (tr, va) = (windows(&videos[..9]), windows(&videos[9..]));
        let val_plcc = |kind: ModelKind, lambda: f64| -> f64 {
            let init = ForecastModel::init(kind, h, seed).unwrap();
            let tc = TrainConfig {
                epochs: 60,
                rng_seed: seed,
                lambda,
                ..TrainConfig::default()
            };
            let out = train(init, &tr, &va, &tc).unwrap();
            evaluate(&out.model, &va, lambda)
                .unwrap()
                .plcc
                .unwrap_or(f64::NEG_INFINITY)
        };
        let m1 = val_plcc(ModelKind::MultiModal, 1.0);
        let m0 = val_plcc(ModelKind::MultiModal, 0.0);
        let u1 = val_plcc(ModelKind::UniModal, 1.0);
        corr_wins += usize::from(m1 >= m0);
        modal_wins += usize::from(m1 >= u1);
        rows.push(format!("{m1:.3}/{m0:.3}/{u1:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        corr_wins >= 3 && modal_wins >= 3 && secs < 300.0,
        format!(
            "lambda1>=lambda0 {corr_wins}/5, multi>=uni {modal_wins}/5; val plcc m1/m0/u1 per seed [{}]; {secs:.0}s",
            rows.join(" ")
        ),
    )
}

fn ac9() -> Outcome {
    let req = required_lout(9.83, 1.35, 1.0, 10, 5);
    let sel = select_model(req, &[10, 20, 30]);
    // short bank: the longest forecast falls short and gets padded
    let v = video(120, 9);
    let mut oc = MockOracleConfig::noiseless(9);
    oc.latency_mean_s = 9.83;
    oc.latency_std_s = 0.0;
    let mut o = MockOracle::for_video(&v, oc).unwrap();
    let mut cfg = LiveConfig::for_window(10);
    cfg.pretrained_outputs = vec![10, 20];
    WARNINGS.0.lock().unwrap().clear();
    let s = run_live_session(&v, &cfg, &mut o, &mut LastValueForecaster, 9).unwrap();
    let mut padded_ok = false;
    for e in &s.timeline {
        if let Event::ForecastCompleted {
            weights, padded, ..
        } = &e.event
        {
            padded_ok = *padded == 7 && weights[weights.len() - 7..].iter().all(|&w| w == 1.0);
            if !padded_ok {
                break;
            }
        }
    }
    let warned = WARNINGS
        .0
        .lock()
        .unwrap()
        .iter()
        .any(|w| w.contains("padded"));
    (
        req == 27 && sel.l_out == 30 && sel.shortfall == 0 && padded_ok && warned,
        format!("required {req}, selected {} from {{10,20,30}}; padding 1.0 = {padded_ok}, warned = {warned}", sel.l_out),
    )
}

fn live_runs(m: usize, outputs: Vec<usize>, seeds: u64, d: usize) -> Vec<LiveSession> {
    (0..seeds)
        .map(|seed| {
            let v = video(d, 7000 + seed);
            let lat = table_latency(m).unwrap();
            let mut oc = MockOracleConfig::noiseless(seed);
            oc.latency_mean_s = lat.mean_s;
            oc.latency_std_s = lat.std_s;
            let mut o = MockOracle::for_video(&v, oc).unwrap();
            let mut cfg = LiveConfig::for_window(m);
            cfg.pretrained_outputs = outputs.clone();
            run_live_session(&v, &cfg, &mut o, &mut LastValueForecaster, seed).unwrap()
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    s / n as f64
}

fn ac10_12() -> (Outcome, Outcome, String) {
    let dense: Vec<usize> = (1..=60).collect();
    let mut util = Vec::new();
    let mut cover = Vec::new();
    let (mut warm_ok, mut replay_ok) = (true, true);
    let (mut timelines, mut causal) = (0, 0);
    let mut default_set = Vec::new();
    for m in WINDOWS {
        let sessions = live_runs(m, dense.clone(), 20, 200);
        for s in &sessions {
            let t = &s.timeline;
            let first = t
                .iter()
                .position(|e| matches!(e.event, Event::ForecastCompleted { .. }))
                .unwrap_or(t.len());
            for e in &t[..first] {
                if let Event::WeightsQueried {
                    weights, served, ..
                } = &e.event
                {
                    warm_ok &= weights.iter().all(|&w| w == 1.0) && served.iter().all(|s| !s);
                }
            }
            replay_ok &= replay_utility(t, s.chunk_count).ok() == Some(utility(t));
            timelines += 1;
            causal += usize::from(check_causality(t).is_ok());
        }
        util.push(mean(sessions.iter().map(|s| utility(&s.timeline))));
        cover.push(mean(
            sessions
                .iter()
                .map(|s| chunk_coverage(&s.timeline, s.chunk_count)),
        ));
        let d = live_runs(m, vec![m, 2 * m, 3 * m], 20, 200);
        default_set.push(mean(d.iter().map(|s| utility(&s.timeline))));
    }
    let monotone = util.windows(2).all(|w| w[1] <= w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ac10 = (
        monotone && warm_ok && replay_ok,
        format!(
            "utility m=2..10 [{}] non-increasing={monotone}; warmup all-ones={warm_ok}; replay exact={replay_ok}",
            fmt(&util)
        ),
    );
    let ac12 = (
        causal == timelines,
        format!("{causal}/{timelines} timelines pass the causality check"),
    );
    let info = format!(
        "per-chunk coverage m=2..10 [{}]; utility with {{m,2m,3m}} models [{}]",
        fmt(&cover),
        fmt(&default_set)
    );
    (ac10, ac12, info)
}

fn ac11() -> Outcome {
    let ladder = BitrateLadder::new(vec![500.0, 2000.0]).unwrap();
    let params = QoeParams::default();
    let w = [1.0; 3];
    let (mut states, mut differ) = (0, 0);
    for b in 0..=40 {
        for last in [None, Some(0), Some(1)] {
            for t in 1..=40 {
                let ctx = DecisionContext {
                    chunk_index: 1,
                    buffer_s: b as f64 * 0.25,
                    last_level: last,
                    weights_ahead: &w,
                    harmonic_kbps: Some(t as f64 * 100.0),
                    robust_kbps: Some(t as f64 * 100.0),
                    chunk_s: 1.0,
                    ladder: &ladder,
                    params: &params,
                };
                states += 1;
                if mpc_plan(&ctx).map(|p| p.0) != mpc_plan_unweighted(&ctx).map(|p| p.0) {
                    differ += 1;
                }
            }
        }
    }

    let big = BitrateLadder::default();
    let fast = simulate_session(
        &big,
        &NetworkTrace::constant(1e12).unwrap(),
        &params,
        &SessionConfig::default(),
        &mut RobustMpc { weighted: true },
        &mut UniformWeights { len: 20 },
        &[1.0; 20],
    )
    .unwrap();
    let top = fast.rows.last().unwrap().level == big.top();

    let trace = NetworkTrace::new(
        (0..30)
            .map(|i| (i as f64 * 3.0, 400.0 + 3000.0 * ((i * 7) % 5) as f64 / 4.0))
            .collect(),
    )
    .unwrap();
    let weights: Vec<f64> = (0..60).map(|i| ((i * 13) % 10) as f64 / 9.0).collect();
    let r = simulate_session(
        &big,
        &trace,
        &params,
        &SessionConfig::default(),
        &mut RobustMpc { weighted: true },
        &mut StaticWeights(weights.clone()),
        &weights,
    )
    .unwrap();
    let (mut prev, mut recomputed) = (None::<f64>, 0.0);
    for (row, w) in r.rows.iter().zip(&weights) {
        let q = big.kbps(row.level) / 1000.0;
        recomputed += w
            * (q - params.rebuffer_penalty * row.rebuffer_s - prev.map_or(0.0, |p| (q - p).abs()));
        prev = Some(q);
    }
    let err = (recomputed - r.weighted_qoe).abs();
    (
        differ == 0 && fast.total_rebuffer_s == 0.0 && top && err < QOE_TOL,
        format!(
            "{differ}/{states} states differ; unbounded link rebuffer {} top={top}; log recompute err {err:.1e}",
            fast.total_rebuffer_s
        ),
    )
}

fn ac13() -> Outcome {
    let mut worst = 0.0f64;
    let mut undefined_mismatch = 0;
    let mut check = |x: &[f64], y: &[f64]| {
        for (a, b) in [
            (plcc(x, y).ok(), common::plcc_sums(x, y)),
            (srcc(x, y).ok(), common::srcc_counting(x, y)),
        ] {
            match (a, b) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => undefined_mismatch += 1,
            }
        }
        for f in [0.15, 0.5, 1.0] {
            worst =
                worst.max((mean_ap(x, y, f).unwrap() - common::mean_ap_definition(x, y, f)).abs());
        }
    };
    let pool = [0.1, 0.4, 0.4, 0.7, 0.9, 0.2];
    let mut small = 0;
    for n in 1..=6 {
        let gt: Vec<f64> = (0..n).map(|i| (i * 3 % 5) as f64 / 5.0).collect();
        for p in common::permutations(n) {
            let x: Vec<f64> = p.iter().map(|&i| pool[i]).collect();
            // a single element has no correlation; check() reports both sides undefined
            check(&x, &gt);
            small += 1;
        }
    }
    let mut s = 0x2545f4914f6cdd1du64;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        s
    };
    for _ in 0..1000 {
        let n = 7 + (next() % 60) as usize;
        // every other vector on a coarse grid so ties occur
        let coarse = next() % 2 == 0;
        let mut draw = || {
            let u = (next() >> 11) as f64 / (1u64 << 53) as f64;
            if coarse {
                (u * 8.0).floor() / 8.0
            } else {
                u
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw()).collect();
        let y: Vec<f64> = (0..n).map(|_| draw()).collect();
        check(&x, &y);
    }
    (
        worst < METRIC_TOL && undefined_mismatch == 0,
        format!("{small} permutations + 1000 random vectors, max abs diff {worst:.1e}"),
    )
}

fn main() {
    log::set_logger(&WARNINGS).expect("logger");
    log::set_max_level(log::LevelFilter::Warn);

    let mut failed = Vec::new();
    let mut line = |id: &str, (ok, detail): Outcome| {
        println!("{id} {} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(id.to_string());
        }
    };
    line("AC1", ac1());
    line("AC2", ac2());
    line("AC3", ac3());
    line("AC4", ac4());
    line("AC5", ac5());
    line("AC6", ac6());
    line("AC7", ac7());
    line("AC8", ac8());
    line("AC9", ac9());
    let (ac10, ac12, info) = ac10_12();
    line("AC10", ac10);
    println!("     info: {info}");
    line("AC11", ac11());
    line("AC12", ac12);
    line("AC13", ac13());
    if failed.is_empty() {
        println!("acceptance: all 13 criteria pass");
    } else {
        println!(
            "acceptance: {} of 13 fail: {}",
            failed.len(),
            failed.join(", ")
        );
    }
}
