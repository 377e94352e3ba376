use ddsc_core::bench::metrics::classwise_accuracy;
use ddsc_core::data::{Dataset, Sample};
use ddsc_core::engine::CurriculumState;
use ddsc_core::fake::{toy_dataset, ScriptedTrainer};
use ddsc_core::invariance::{
    device_posterior, l2_norm, normalized_entropy, smooth_invariance, DevicePosterior, PrototypeBank, UnitEmbedding,
};
use ddsc_core::progress::SampleLedger;
use ddsc_core::schedule::{batch_weighted_loss, lambda_at, scores_to_weights, ScheduleConfig};
use proptest::prelude::*;

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_filter("nonzero", |v| l2_norm(v) > 1e-3)
}

fn unit(v: &[f64]) -> UnitEmbedding {
    UnitEmbedding::normalize(v).unwrap()
}

fn seeded_bank(protos: &[Vec<f64>], gamma: f64) -> PrototypeBank {
    let mut bank = PrototypeBank::new(protos.len(), protos[0].len(), gamma).unwrap();
    let grouped: Vec<Vec<UnitEmbedding>> = protos.iter().map(|p| vec![unit(p)]).collect();
    bank.update(&grouped, 1).unwrap();
    bank
}

fn posterior_entropy(probs: &[f64]) -> f64 {
    let p = DevicePosterior { probs: probs.to_vec(), temperature: 1.0 };
    normalized_entropy(&p, probs.len()).unwrap()
}

proptest! {
    #[test]
    fn weights_lie_on_the_simplex(scores in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let w = scores_to_weights(&scores).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn softmax_preserves_score_order(scores in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let w = scores_to_weights(&scores).unwrap();
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(w[i] >= w[j]);
                }
            }
        }
    }

    #[test]
    fn entropy_is_normalized(
        protos in prop::collection::vec(vec_strategy(5), 2..6),
        z in vec_strategy(5),
        tau in 0.01f64..2.0,
    ) {
        let bank = seeded_bank(&protos, 0.3);
        let post = device_posterior(&unit(&z), &bank, tau).unwrap();
        prop_assert!((post.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let h = normalized_entropy(&post, bank.seen_count()).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn mixing_toward_uniform_raises_entropy(
        raw in prop::collection::vec(0.01f64..1.0, 2..8),
        a in 0.0f64..1.0,
    ) {
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let m = p.len() as f64;
        let mixed: Vec<f64> = p.iter().map(|x| (1.0 - a) * x + a / m).collect();
        prop_assert!(posterior_entropy(&mixed) >= posterior_entropy(&p) - 1e-12);
    }

    #[test]
    fn prototypes_stay_unit_norm(
        rounds in prop::collection::vec(prop::collection::vec(prop::collection::vec(vec_strategy(4), 0..4), 3), 1..6),
        gamma in 0.01f64..1.0,
    ) {
        let mut bank = PrototypeBank::new(3, 4, gamma).unwrap();
        for (e, round) in rounds.iter().enumerate() {
            let grouped: Vec<Vec<UnitEmbedding>> =
                round.iter().map(|device| device.iter().map(|v| unit(v)).collect()).collect();
            // opposite embeddings may cancel; a rejected update must leave the bank intact
            let before = bank.clone();
            if bank.update(&grouped, e + 1).is_err() {
                prop_assert_eq!(&bank, &before);
            }
            for m in 0..3 {
                if let Some(p) = bank.prototype(m) {
                    prop_assert!((l2_norm(p) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn smoothing_contracts_toward_fresh_entropy(prev in 0.0f64..1.0, h in 0.0f64..1.0, eta in 0.01f64..0.99) {
        let s = smooth_invariance(Some(prev), h, eta);
        prop_assert!((s - h).abs() <= (prev - h).abs() + 1e-15);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn lambda_decays_monotonically(total in 1usize..200, lambda_min in 0.0f64..1.0) {
        let mut prev = 1.0;
        for e in 1..=total {
            let l = lambda_at(e, total, lambda_min).unwrap();
            prop_assert!(l <= prev);
            prop_assert!(l >= lambda_min && l <= 1.0);
            prev = l;
        }
        prop_assert_eq!(lambda_at(total, total, lambda_min).unwrap(), lambda_min);
    }

    #[test]
    fn progress_matches_closed_form(
        losses in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 4), 1..12),
        beta in 0.01f64..0.99,
    ) {
        let mut ledger = SampleLedger::new(4);
        for epoch in &losses {
            ledger.begin_epoch();
            for (i, l) in epoch.iter().enumerate() {
                ledger.record_loss(i, *l).unwrap();
            }
            ledger.finalize_epoch_losses(beta).unwrap();
        }
        ledger.normalize_progress(1e-12).unwrap();
        let t = losses.len();
        for i in 0..4 {
            let mut want = 0.0;
            for (k, pair) in losses.windows(2).enumerate() {
                let h = (pair[1][i] - pair[0][i]).abs();
                want += beta.powi((t - 2 - k) as i32) * (1.0 - beta) * h;
            }
            prop_assert!((ledger.record(i).progress - want).abs() < 1e-12);
        }
        prop_assert!(ledger.progress_norm().iter().all(|d| (0.0..=1.0).contains(d)));
    }

    #[test]
    fn batch_partition_recovers_full_objective(
        items in prop::collection::vec((0.01f64..1.0, 0.0f64..4.0), 2..30),
        cut in 1usize..29,
    ) {
        let cut = cut.min(items.len() - 1);
        let weights: Vec<f64> = items.iter().map(|(w, _)| *w).collect();
        let batch: Vec<(usize, f64)> = items.iter().enumerate().map(|(i, (_, l))| (i, *l)).collect();
        let (whole, whole_mass) = batch_weighted_loss(&weights, &batch).unwrap();
        let (a, ma) = batch_weighted_loss(&weights, &batch[..cut]).unwrap();
        let (b, mb) = batch_weighted_loss(&weights, &batch[cut..]).unwrap();
        prop_assert!(((ma * a + mb * b) / whole_mass - whole).abs() < 1e-12);
    }

    #[test]
    fn classwise_accuracy_ignores_order_and_names(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 3..50),
        rotate in 0usize..50,
    ) {
        let mut pairs = pairs;
        pairs.extend([(0, 0), (1, 1), (2, 2)]);
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let base = classwise_accuracy(&pred, &truth, 3).unwrap();

        let mut shuffled = pairs.clone();
        let r = rotate % shuffled.len();
        shuffled.rotate_left(r);
        let (p2, t2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        prop_assert!((classwise_accuracy(&p2, &t2, 3).unwrap() - base).abs() < 1e-12);

        let relabel = |c: usize| (c + 1) % 3;
        let p3: Vec<usize> = pred.iter().map(|c| relabel(*c)).collect();
        let t3: Vec<usize> = truth.iter().map(|c| relabel(*c)).collect();
        prop_assert!((classwise_accuracy(&p3, &t3, 3).unwrap() - base).abs() < 1e-12);
    }
}

fn full_batch_weights(data: &Dataset, epochs: usize) -> Vec<f64> {
    let mut trainer = ScriptedTrainer::new(data.samples[0].features.len(), 0.05);
    let config = ScheduleConfig { epochs, ..Default::default() };
    let mut state = CurriculumState::for_dataset(config, data, &trainer, data.len(), 0).unwrap();
    for _ in 0..epochs {
        state.run_epoch(&mut trainer, data).unwrap();
    }
    state.ledger.weights()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weights_follow_sample_permutations(seed in 0u64..1000, rotate in 1usize..15) {
        let data = toy_dataset(15, 3, 4, seed);
        let mut permuted: Vec<(usize, Sample)> = data.samples.iter().cloned().enumerate().collect();
        permuted.rotate_left(rotate);
        let moved = Dataset {
            samples: permuted.iter().map(|(_, s)| s.clone()).collect(),
            ..data.clone()
        };
        let base = full_batch_weights(&data, 4);
        let other = full_batch_weights(&moved, 4);
        for (k, (orig, _)) in permuted.iter().enumerate() {
            prop_assert!((other[k] - base[*orig]).abs() < 1e-12);
        }
    }
}
