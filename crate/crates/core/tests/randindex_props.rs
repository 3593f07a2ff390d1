use dsm_core::cooccur::{extract_window, ContextSpec};
use dsm_core::corpus::{build_vocabulary, Sentence};
use dsm_core::randindex::{make_index_vectors, train_ri, RiConfig, Side};
use dsm_core::vecspace::cosine;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_corpus(seed: u64, n_sent: usize, vocab: u32) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sent)
        .map(|_| {
            let len = rng.random_range(1..15);
            let words: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
            Sentence::new(&words, 0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plain_ri_equals_counts_times_index_vectors(seed in any::<u64>(), r in 1usize..4) {
        let corpus = toy_corpus(seed, 30, 25);
        let v = build_vocabulary(&corpus, 1).unwrap();
        let idx = make_index_vectors(&v, 64, 6, seed).unwrap();
        let cfg = RiConfig { window_radius: r, ..RiConfig::default() };
        let space = train_ri(&corpus, &v, &idx, cfg).unwrap();
        let m = extract_window(&corpus, &v, ContextSpec::window(r)).unwrap();
        let mut oracle = vec![0.0; v.len() * 64];
        for (t, c, n) in m.entries() {
            let (t, c) = (v.id(t).unwrap() as usize, v.id(c).unwrap());
            for (k, x) in idx.dense(c, None).iter().enumerate() {
                oracle[t * 64 + k] += n * x;
            }
        }
        prop_assert_eq!(space.data(), &oracle[..]);
    }

    #[test]
    fn plain_ri_ignores_sentence_order(seed in any::<u64>()) {
        let corpus = toy_corpus(seed, 20, 15);
        let v = build_vocabulary(&corpus, 1).unwrap();
        let idx = make_index_vectors(&v, 32, 4, 1).unwrap();
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        for permute in [false, true] {
            let cfg = RiConfig { window_radius: 2, permute, ..RiConfig::default() };
            let a = train_ri(&corpus, &v, &idx, cfg).unwrap();
            let b = train_ri(&shuffled, &v, &idx, cfg).unwrap();
            prop_assert_eq!(a.data(), b.data());
        }
    }
}

#[test]
fn random_index_vectors_are_nearly_orthogonal() {
    let words: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let v = build_vocabulary(&[Sentence::new(&words, 0)], 1).unwrap();
    let idx = make_index_vectors(&v, 2000, 10, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for _ in 0..1000 {
        let a = rng.random_range(0..2000u32);
        let mut b = rng.random_range(0..2000u32);
        while b == a {
            b = rng.random_range(0..2000u32);
        }
        total += cosine(&idx.dense(a, None), &idx.dense(b, None)).unwrap().abs();
    }
    assert!(total / 1000.0 < 0.05);
}

#[test]
fn sides_are_decorrelated_by_permutation() {
    let mut total = 0.0;
    for trial in 0..100u64 {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let v = build_vocabulary(&[Sentence::new(&words, 0)], 1).unwrap();
        let idx = make_index_vectors(&v, 2000, 10, trial).unwrap();
        // the same bag of context words seen only on the left vs only on the right
        let mut left = vec![0.0; 2000];
        let mut right = vec![0.0; 2000];
        for c in 0..20 {
            for (k, x) in idx.dense(c, Some(Side::Left)).iter().enumerate() {
                left[k] += x;
            }
            for (k, x) in idx.dense(c, Some(Side::Right)).iter().enumerate() {
                right[k] += x;
            }
        }
        total += cosine(&left, &right).unwrap().abs();
    }
    assert!(total / 100.0 < 0.05);
}

#[test]
fn more_dimensions_preserve_count_cosines_better() {
    let corpus = toy_corpus(42, 400, 60);
    let v = build_vocabulary(&corpus, 1).unwrap();
    let m = extract_window(&corpus, &v, ContextSpec::window(2)).unwrap();
    let n = v.len();
    let counts = m.counts().to_dense();
    let exact = |a: usize, b: usize| cosine(&counts[a * n..(a + 1) * n], &counts[b * n..(b + 1) * n]).ok();
    let error_at = |k: usize| {
        let mut err = 0.0;
        let mut pairs = 0;
        for seed in 0..5 {
            let idx = make_index_vectors(&v, k, 10, seed).unwrap();
            let space = train_ri(&corpus, &v, &idx, RiConfig::default()).unwrap();
            for a in 0..n {
                for b in a + 1..n {
                    if let (Some(e), Some(r)) = (exact(a, b), space.cosine_ids(a, b)) {
                        err += (e - r).abs();
                        pairs += 1;
                    }
                }
            }
        }
        err / pairs as f64
    };
    let (e300, e2000) = (error_at(300), error_at(2000));
    assert!(e2000 < e300, "k=2000 error {e2000} vs k=300 error {e300}");
}
