use proptest::prelude::*;
use salstream_core::abr::{
    mpc_plan, mpc_plan_unweighted, simulate_session, BitrateLadder, DecisionContext, NetworkTrace,
    QoeParams, RobustMpc, SessionConfig, StaticWeights, UniformWeights, WeightScope,
};

fn ctx<'a>(
    buffer: f64,
    last: Option<usize>,
    kbps: f64,
    w: &'a [f64],
    ladder: &'a BitrateLadder,
    params: &'a QoeParams,
) -> DecisionContext<'a> {
    DecisionContext {
        chunk_index: 1,
        buffer_s: buffer,
        last_level: last,
        weights_ahead: w,
        harmonic_kbps: Some(kbps),
        robust_kbps: Some(kbps),
        chunk_s: 1.0,
        ladder,
        params,
    }
}

/// Score of one plan, written out step by step.
fn plan_score(plan: &[usize], c: &DecisionContext) -> f64 {
    let (mut buffer, mut prev, mut total) = (c.buffer_s, c.last_level, 0.0);
    for (j, &l) in plan.iter().enumerate() {
        let q = c.ladder.kbps(l) / 1000.0;
        let download = c.ladder.kbps(l) * c.chunk_s / c.robust_kbps.unwrap();
        let stall = (download - buffer).max(0.0);
        let smooth = prev.map_or(0.0, |p| (q - c.ladder.kbps(p) / 1000.0).abs());
        let cost = c.params.rebuffer_penalty * stall + c.params.smoothness_penalty * smooth;
        total += match c.params.weight_scope {
            WeightScope::Full => c.weights_ahead[j] * (q - cost),
            WeightScope::QualityOnly => c.weights_ahead[j] * q - cost,
        };
        buffer = (buffer - download).max(0.0) + c.chunk_s;
        prev = Some(l);
    }
    total
}

fn all_plans(levels: usize, n: usize) -> Vec<Vec<usize>> {
    (0..levels.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = code % levels;
                    code /= levels;
                    l
                })
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect()
        })
        .collect()
}

#[test]
fn unit_weights_make_both_planners_agree_on_every_state() {
    let ladder = BitrateLadder::new(vec![500.0, 2000.0]).unwrap();
    let params = QoeParams::default();
    let w = [1.0; 3];
    let mut states = 0;
    for b in 0..=40 {
        for last in [None, Some(0), Some(1)] {
            for t in 1..=40 {
                let c = ctx(
                    b as f64 * 0.25,
                    last,
                    t as f64 * 100.0,
                    &w,
                    &ladder,
                    &params,
                );
                let (pw, sw) = mpc_plan(&c).unwrap();
                let (pu, su) = mpc_plan_unweighted(&c).unwrap();
                assert_eq!(pw, pu, "buffer {b} last {last:?} kbps {t}");
                assert!((sw - su).abs() < 1e-9);
                states += 1;
            }
        }
    }
    assert_eq!(states, 41 * 3 * 40);
}

#[test]
fn unbounded_link_never_stalls_and_reaches_the_top() {
    let ladder = BitrateLadder::default();
    let trace = NetworkTrace::constant(1e12).unwrap();
    for weighted in [true, false] {
        let r = simulate_session(
            &ladder,
            &trace,
            &QoeParams::default(),
            &SessionConfig::default(),
            &mut RobustMpc { weighted },
            &mut UniformWeights { len: 30 },
            &[1.0; 30],
        )
        .unwrap();
        assert_eq!(r.total_rebuffer_s, 0.0);
        assert!(r.rows[1..].iter().all(|c| c.level == ladder.top()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn planner_finds_the_best_plan(
        buffer in 0.0f64..8.0,
        last in prop::option::of(0usize..3),
        kbps in 100.0f64..5000.0,
        w in prop::collection::vec(0.0f64..1.0, 1..4),
        quality_only in any::<bool>(),
    ) {
        let ladder = BitrateLadder::new(vec![300.0, 1200.0, 2850.0]).unwrap();
        let params = QoeParams {
            weight_scope: if quality_only { WeightScope::QualityOnly } else { WeightScope::Full },
            ..QoeParams::default()
        };
        let c = ctx(buffer, last, kbps, &w, &ladder, &params);
        let (plan, score) = mpc_plan(&c).unwrap();
        let best = all_plans(3, w.len())
            .iter()
            .map(|p| plan_score(p, &c))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((score - best).abs() < 1e-9, "{} vs {}", score, best);
        prop_assert!((plan_score(&plan, &c) - score).abs() < 1e-9);
    }

    #[test]
    fn session_qoe_recomputes_from_its_log(
        samples in prop::collection::vec(200.0f64..6000.0, 1..20),
        weights in prop::collection::vec(0.0f64..1.0, 1..60),
        weighted in any::<bool>(),
    ) {
        let trace = NetworkTrace::new(
            samples.iter().enumerate().map(|(i, &k)| (i as f64 * 2.0, k)).collect(),
        ).unwrap();
        let ladder = BitrateLadder::default();
        let params = QoeParams::default();
        let cfg = SessionConfig { buffer_cap_s: 10.0, ..SessionConfig::default() };
        let r = simulate_session(
            &ladder,
            &trace,
            &params,
            &cfg,
            &mut RobustMpc { weighted },
            &mut StaticWeights(weights.clone()),
            &weights,
        ).unwrap();
        prop_assert_eq!(r.rows.len(), weights.len());
        let mut prev: Option<f64> = None;
        let (mut wq, mut uq) = (0.0, 0.0);
        for row in &r.rows {
            prop_assert!(row.rebuffer_s >= 0.0 && row.download_s > 0.0);
            prop_assert!(row.buffer_s <= cfg.buffer_cap_s + 1e-9);
            let q = row.bitrate_kbps / 1000.0;
            let v = q - 4.3 * row.rebuffer_s - prev.map_or(0.0, |p| (q - p).abs());
            prop_assert!((v - row.q).abs() < 1e-9);
            wq += row.weight * v;
            uq += v;
            prev = Some(q);
        }
        prop_assert!((wq - r.weighted_qoe).abs() < 1e-9);
        prop_assert!((uq - r.unweighted_qoe).abs() < 1e-9);
        prop_assert_eq!(r.rows[0].rebuffer_s, 0.0);
    }

    #[test]
    fn trace_round_trips_through_text(samples in prop::collection::vec((0.0f64..10.0, 1.0f64..1e5), 1..30)) {
        let mut t = 0.0;
        let pts: Vec<(f64, f64)> = samples.iter().map(|&(dt, k)| { t += dt + 0.001; (t, k) }).collect();
        let a = NetworkTrace::new(pts).unwrap();
        let b = NetworkTrace::parse(&a.to_text()).unwrap();
        prop_assert_eq!(a.to_text(), b.to_text());
        prop_assert!((a.mean_kbps() - b.mean_kbps()).abs() < 1e-9 * a.mean_kbps());
    }
}
