use proptest::prelude::*;
use salstream_core::model::srcc;
use salstream_core::perception::run_perception;
use salstream_core::ranking::{
    gaussian_kernel, gaussian_smooth, global_sort, rank_to_weights, rank_video, recurrence_t,
    seed_groups, RankingConfig,
};
use salstream_core::rater::{MockOracle, MockOracleConfig, Oracle};
use salstream_core::synth::{synthetic_video, EmbeddingGenerator, SynthConfig};

/// Distinct ground truth in a seeded order.
fn shuffled_gt(d: usize, seed: u64) -> Vec<f64> {
    let mut gt: Vec<f64> = (0..d).map(|i| (i as f64 + 0.5) / d as f64).collect();
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    for i in (1..d).rev() {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        gt.swap(i, (s >> 33) as usize % (i + 1));
    }
    gt
}

fn truth_order(gt: &[f64]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..gt.len()).collect();
    o.sort_by(|&a, &b| gt[b].total_cmp(&gt[a]));
    o
}

#[test]
fn recurrence_table() {
    let t: Vec<u64> = [1, 2, 10, 20, 25]
        .iter()
        .map(|&k| recurrence_t(k))
        .collect();
    assert_eq!(t, vec![1, 5, 69, 177, 237]);
}

#[test]
fn sawtooth_oversmoothing_costs_rank_agreement() {
    let gt = salstream_core::synth::sawtooth(120, 12);
    let w = rank_to_weights(&truth_order(&gt)).unwrap();
    let r: Vec<f64> = [0.5, 2.5, 40.0]
        .iter()
        .map(|&s| srcc(gaussian_smooth(w.values(), s, 120).unwrap().values(), &gt).unwrap())
        .collect();
    assert!(r[2] < r[0], "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn noiseless_sort_is_exact_and_within_budget(
        d in 2usize..60,
        m in prop::sample::select(vec![2usize, 3, 4, 6, 8, 10]),
        seed in any::<u64>(),
    ) {
        let gt = shuffled_gt(d, seed);
        let g = EmbeddingGenerator::new(&SynthConfig { embedding_dim: 4, ..SynthConfig::default() }, 0);
        let mut v = synthetic_video("p", d, &g, 1.0, seed);
        for (c, x) in v.chunks.iter_mut().zip(&gt) {
            c.gt_saliency = *x;
        }
        let mut o = MockOracle::for_video(&v, MockOracleConfig::noiseless(seed)).unwrap();
        let p = run_perception(&v, m, &mut o).unwrap();
        let r = rank_video(&p, &RankingConfig::default(), &mut o).unwrap();
        prop_assert_eq!(&r.global_order, &truth_order(&gt));
        if m % 2 == 0 {
            prop_assert!(r.sort_calls_used <= recurrence_t(d.div_ceil(m) as u64));
        }
        // the weights are a permutation of the evenly spaced ranks
        let mut w = r.normalized_weights.values().to_vec();
        w.sort_by(f64::total_cmp);
        for (i, x) in w.iter().enumerate() {
            let want = if d == 1 { 1.0 } else { i as f64 / (d - 1) as f64 };
            prop_assert!((x - want).abs() < 1e-12);
        }
    }

    #[test]
    fn presorted_groups_merge_exactly(
        d in 2usize..50,
        m in prop::sample::select(vec![2usize, 4, 6, 10]),
        seed in any::<u64>(),
    ) {
        let gt = shuffled_gt(d, seed);
        let mut o = MockOracle::new("p", gt.clone(), MockOracleConfig::noiseless(seed)).unwrap();
        let groups: Vec<_> = (0..d)
            .collect::<Vec<_>>()
            .chunks(m)
            .map(|c| {
                let mut g = c.to_vec();
                g.sort_by(|&a, &b| gt[b].total_cmp(&gt[a]));
                salstream_core::ranking::SortedGroup(g)
            })
            .collect();
        let (order, calls) = global_sort(&groups, "", m, &mut o).unwrap();
        prop_assert_eq!(order, truth_order(&gt));
        prop_assert!(calls <= recurrence_t(groups.len() as u64));
    }

    #[test]
    fn smoothing_keeps_constants_and_range(
        c in 0.0f64..1.0,
        w in prop::collection::vec(0.0f64..1.0, 1..80),
        sigma in 0.5f64..20.0,
        size in 1usize..100,
    ) {
        let k = gaussian_kernel(sigma, size).unwrap();
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let flat = gaussian_smooth(&vec![c; w.len()], sigma, size).unwrap();
        prop_assert!(flat.values().iter().all(|&x| x == c));
        let s = gaussian_smooth(&w, sigma, size).unwrap();
        let (lo, hi) = w.iter().fold((1.0f64, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        for x in s.values() {
            prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
    }

    #[test]
    fn seed_groups_partition_the_video(d in 1usize..80, m in 1usize..12, seed in any::<u64>()) {
        let g = EmbeddingGenerator::new(&SynthConfig { embedding_dim: 4, ..SynthConfig::default() }, 0);
        let v = synthetic_video("p", d, &g, 1.0, seed);
        let mut o = MockOracle::for_video(&v, MockOracleConfig::noiseless(seed)).unwrap();
        let p = run_perception(&v, m, &mut o).unwrap();
        let groups = seed_groups(&p);
        prop_assert_eq!(groups.len(), d.div_ceil(m));
        prop_assert_eq!(o.ledger().rate_calls as usize, d.div_ceil(m));
        let mut all: Vec<usize> = groups.iter().flat_map(|g| g.0.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d).collect::<Vec<_>>());
    }
}
