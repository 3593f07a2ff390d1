use dsm_core::evalsuite::{
    eval_analogy, eval_categorization, eval_choice, eval_correlation, AnalogyItem, BenchmarkDataset,
    CategoryItem, ChoiceItem, Items, KmeansOptions, RatingItem, Task,
};
use dsm_core::vecspace::{cosine, pool_tokens, EmbeddingSpace, SpaceMeta, TokenRecord, TokenVectorFile};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

fn random_space(n: usize, dim: usize, seed: u64) -> EmbeddingSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| (format!("w{i}"), (0..dim).map(|_| rng.sample(StandardNormal)).collect()))
        .collect();
    EmbeddingSpace::from_rows(rows, SpaceMeta::new("rand")).unwrap()
}

fn rotate(s: &EmbeddingSpace, q: &DMatrix<f64>) -> EmbeddingSpace {
    s.map_vectors(|_, v| (q * nalgebra::DVector::from_column_slice(v)).iter().copied().collect())
        .unwrap()
}

fn rescale(s: &EmbeddingSpace, seed: u64) -> EmbeddingSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.map_vectors(|_, v| {
        let k: f64 = rng.random_range(0.1..10.0);
        v.iter().map(|x| x * k).collect()
    })
    .unwrap()
}

fn datasets(n: usize, seed: u64) -> Vec<BenchmarkDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = |rng: &mut ChaCha8Rng| format!("w{}", rng.random_range(0..n + 5));
    // distinct words within an item and distinct pairs, so that exact cosine
    // ties cannot arise and then be split by rounding
    let distinct = |rng: &mut ChaCha8Rng, k: usize| loop {
        let ws: Vec<String> = (0..k).map(|_| w(rng)).collect();
        if (0..k).all(|i| (i + 1..k).all(|j| ws[i] != ws[j])) {
            return ws;
        }
    };
    let choice = (0..30)
        .map(|_| {
            let ws = distinct(&mut rng, 5);
            ChoiceItem {
                target: ws[0].clone(),
                options: ws[1..].to_vec(),
                answer: rng.random_range(0..4),
            }
        })
        .collect();
    let mut pairs = std::collections::BTreeSet::new();
    while pairs.len() < 40 {
        let ws = distinct(&mut rng, 2);
        pairs.insert((ws[0].clone().min(ws[1].clone()), ws[0].clone().max(ws[1].clone())));
    }
    let rating = pairs
        .into_iter()
        .map(|(w1, w2)| RatingItem {
            w1,
            w2,
            gold: rng.random_range(0.0..10.0),
        })
        .collect();
    let cat = (0..n)
        .map(|i| CategoryItem {
            word: format!("w{i}"),
            class: format!("k{}", i % 4),
        })
        .collect();
    let analogy = (0..20)
        .map(|_| {
            let ws = distinct(&mut rng, 4);
            AnalogyItem {
                a: ws[0].clone(),
                b: ws[1].clone(),
                c: ws[2].clone(),
                d: ws[3].clone(),
            }
        })
        .collect();
    vec![
        BenchmarkDataset::new("C", Task::Synonymy, Items::Choice(choice)).unwrap(),
        BenchmarkDataset::new("R", Task::Similarity, Items::Rating(rating)).unwrap(),
        BenchmarkDataset::new("K", Task::Categorization, Items::Categorization(cat)).unwrap(),
        BenchmarkDataset::new("A", Task::Analogy, Items::Analogy(analogy)).unwrap(),
    ]
}

fn scores(s: &EmbeddingSpace, ds: &[BenchmarkDataset]) -> Vec<(f64, f64)> {
    let opts = KmeansOptions { restarts: 5, ..KmeansOptions::default() };
    let r = [
        eval_choice(s, &ds[0]).unwrap(),
        eval_correlation(s, &ds[1]).unwrap(),
        eval_categorization(s, &ds[2], opts).unwrap(),
        eval_analogy(s, &ds[3]).unwrap(),
    ];
    r.iter().map(|r| (r.score, r.coverage)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nearest_is_invariant_under_scaling_and_rotation(seed in any::<u64>(), k in 0.01f64..100.0) {
        let s = random_space(40, 6, seed);
        let q = random_orthogonal(6, seed ^ 9);
        let rotated = rotate(&s, &q);
        let query: Vec<f64> = s.vector(3).to_vec();
        let scaled: Vec<f64> = query.iter().map(|x| x * k).collect();
        let rq: Vec<f64> = (&q * nalgebra::DVector::from_column_slice(&query)).iter().copied().collect();
        let base: Vec<String> = s.nearest(&query, 10, &[]).unwrap().into_iter().map(|h| h.word).collect();
        let by_scale: Vec<String> = s.nearest(&scaled, 10, &[]).unwrap().into_iter().map(|h| h.word).collect();
        let by_rot: Vec<String> = rotated.nearest(&rq, 10, &[]).unwrap().into_iter().map(|h| h.word).collect();
        prop_assert_eq!(&base, &by_scale);
        prop_assert_eq!(&base, &by_rot);
    }

    #[test]
    fn nearest_matches_brute_force(seed in any::<u64>(), k in 1usize..50) {
        let s = random_space(30, 4, seed);
        let query = s.vector(0).to_vec();
        let mut brute: Vec<(f64, String)> = (1..s.len())
            .map(|i| (cosine(&query, s.vector(i)).unwrap(), s.word(i).to_string()))
            .collect();
        brute.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        brute.truncate(k);
        let hits = s.nearest(&query, k, &["w0"]).unwrap();
        prop_assert_eq!(hits.len(), brute.len());
        for (h, b) in hits.iter().zip(&brute) {
            prop_assert_eq!(&h.word, &b.1);
        }
    }

    #[test]
    fn pooling_commutes_with_linear_maps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<TokenRecord> = (0..40)
            .map(|i| TokenRecord {
                word: format!("w{}", i % 7),
                occurrence: i as u64,
                vector: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        let l = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
        let apply = |v: &[f64]| -> Vec<f64> { (&l * nalgebra::DVector::from_column_slice(v)).iter().copied().collect() };
        let mapped: Vec<TokenRecord> = records
            .iter()
            .map(|r| TokenRecord { vector: apply(&r.vector), ..r.clone() })
            .collect();
        let a = pool_tokens(&TokenVectorFile::new(records).unwrap()).unwrap();
        let b = pool_tokens(&TokenVectorFile::new(mapped).unwrap()).unwrap();
        for w in a.words() {
            for (x, y) in apply(a.get(w).unwrap()).iter().zip(b.get(w).unwrap()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn evaluators_ignore_rotation_and_rescaling(seed in any::<u64>()) {
        let s = random_space(30, 5, seed);
        let ds = datasets(30, seed);
        let base = scores(&s, &ds);
        let rotated = scores(&rotate(&s, &random_orthogonal(5, seed ^ 3)), &ds);
        let scaled = scores(&rescale(&s, seed ^ 4), &ds);
        for ((a, b), c) in base.iter().zip(&rotated).zip(&scaled) {
            prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.0 - c.0).abs() < 1e-9, "{:?} {:?} {:?}", a, b, c);
            prop_assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn text_export_round_trips(seed in any::<u64>()) {
        let s = random_space(12, 5, seed);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.vec");
        s.export_text(&p).unwrap();
        let back = EmbeddingSpace::import_text(&p).unwrap();
        prop_assert_eq!(back.words(), s.words());
        for (x, y) in back.data().iter().zip(s.data()) {
            prop_assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
        let p2 = dir.path().join("t.vec");
        back.export_text(&p2).unwrap();
        prop_assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }
}

#[test]
fn coverage_matches_membership_scan() {
    let s = random_space(20, 4, 1);
    for ds in datasets(20, 2) {
        let total = ds.items.len() as f64;
        let covered = match &ds.items {
            Items::Choice(v) => v.iter().filter(|i| s.contains(&i.target) && s.contains(&i.options[i.answer])).count(),
            Items::Rating(v) => v.iter().filter(|i| s.contains(&i.w1) && s.contains(&i.w2)).count(),
            Items::Categorization(v) => v.iter().filter(|i| s.contains(&i.word)).count(),
            Items::Analogy(v) => v
                .iter()
                .filter(|i| [&i.a, &i.b, &i.c, &i.d].iter().all(|w| s.contains(w)))
                .count(),
        };
        let r = dsm_core::evalsuite::evaluate(&s, &ds, KmeansOptions::default()).unwrap();
        assert_eq!(r.coverage, covered as f64 / total, "{}", ds.name);
    }
}

#[test]
fn perfect_clusters_have_unit_purity() {
    let rows = (0..12)
        .map(|i| {
            let mut v = vec![0.01 * i as f64; 3];
            v[i % 3] += 10.0;
            (format!("w{i}"), v)
        })
        .collect();
    let s = EmbeddingSpace::from_rows(rows, SpaceMeta::new("c")).unwrap();
    let items = (0..12)
        .map(|i| CategoryItem {
            word: format!("w{i}"),
            class: format!("k{}", i % 3),
        })
        .collect();
    let ds = BenchmarkDataset::new("K", Task::Categorization, Items::Categorization(items)).unwrap();
    assert_eq!(eval_categorization(&s, &ds, KmeansOptions::default()).unwrap().score, 1.0);
}
