mod support;

use proptest::prelude::*;

use ragcov::cluster::ClusterModel;
use ragcov::corpus::{chunk_document, chunk_document_with, reconstruct, CharTokenizer, ChunkingConfig, RawDocument};
use ragcov::coverage::{basic_coverage, compute_coverage, weighted_coverage, MultiCoverageConfig};
use ragcov::geometry::{cosine_distance, min_distances, pairwise_distances, Role};
use ragcov::outliers::{lof_assess, LofConfig};
use ragcov::viz::{project_2d, PointLabels, PointRole, ProjectionMethod};
use support::*;

fn text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-z]{1,12}",
        Just("naïve".to_string()),
        Just("\n".to_string()),
        Just("\n\n".to_string()),
        Just(", ".to_string()),
    ];
    prop::collection::vec(piece, 1..60).prop_map(|ps| ps.join(" ")).prop_filter("needs a word", |s| {
        s.chars().any(char::is_alphabetic)
    })
}

fn size_and_overlap() -> impl Strategy<Value = (usize, usize)> {
    (1usize..30).prop_flat_map(|size| (Just(size), 0..size))
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn rows(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(vector(dim), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn chunks_tile_the_document(t in text(), (size, overlap) in size_and_overlap(), chars in any::<bool>()) {
        let doc = RawDocument::new("d", &t).unwrap();
        let cfg = ChunkingConfig::new(size, overlap).unwrap();
        let chunks = if chars {
            chunk_document_with(&doc, &cfg, &CharTokenizer, 0).unwrap()
        } else {
            chunk_document(&doc, &cfg).unwrap()
        };
        prop_assert!(!chunks.is_empty());
        prop_assert_eq!(reconstruct(&chunks), doc.text.clone());
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.index, i);
            prop_assert_eq!(&doc.text[c.start..c.end], c.text.as_str());
            prop_assert!(c.token_count <= size, "chunk {} has {} tokens", i, c.token_count);
        }
        for w in chunks.windows(2) {
            prop_assert!(w[0].start < w[1].start && w[0].end < w[1].end);
        }
    }

    #[test]
    fn single_spaced_words_follow_sliding_windows(n in 1usize..80, (size, overlap) in size_and_overlap()) {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let doc = RawDocument::new("d", &words.join(" ")).unwrap();
        let chunks = chunk_document(&doc, &ChunkingConfig::new(size, overlap).unwrap()).unwrap();
        let got: Vec<(usize, usize)> = chunks
            .iter()
            .map(|c| {
                let ws: Vec<&str> = c.text.split_whitespace().collect();
                let first = ws[0][1..].parse().unwrap();
                let last = ws[ws.len() - 1][1..].parse().unwrap();
                (first, last)
            })
            .collect();
        prop_assert_eq!(got, sliding_windows(n, size, overlap));
    }

    #[test]
    fn cosine_is_symmetric_and_scale_free(u in vector(6), v in vector(6), a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let d = cosine_distance(&u, &v).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert_eq!(d, cosine_distance(&v, &u).unwrap());
        let su: Vec<f64> = u.iter().map(|x| x * a).collect();
        let sv: Vec<f64> = v.iter().map(|x| x * b).collect();
        prop_assert!((cosine_distance(&su, &sv).unwrap() - d).abs() < 1e-12);
        prop_assert!(cosine_distance(&u, &u).unwrap() < 1e-12);
    }

    #[test]
    fn coverage_bounds_and_shares(docs in rows(2..40, 5), qs in rows(1..8, 5), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(docs.len());
        let assignment = random_assignment(&mut rng(seed), docs.len(), k);
        let (e_d, e_q) = (matrix(&docs), matrix(&qs));
        let model = ClusterModel::from_assignments(&e_d, assignment, 0).unwrap();
        let scores = compute_coverage(&e_q, &e_d, &model, &MultiCoverageConfig::default()).unwrap();
        for s in [scores.basic, scores.weighted, scores.multi_threshold] {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
        let shares: f64 = scores.per_cluster.iter().map(|c| c.share).sum();
        prop_assert!((shares - 1.0).abs() < 1e-12);
        // weighted coverage is the share-weighted mean of per-chunk scores
        prop_assert!((scores.weighted - scores.basic).abs() < 1e-9);
    }

    #[test]
    fn coverage_ignores_question_order_and_duplicates(docs in rows(2..30, 4), qs in rows(2..8, 4)) {
        let e_d = matrix(&docs);
        let base = {
            let d = pairwise_distances(&e_d, Role::Chunk, &matrix(&qs), Role::Question).unwrap();
            basic_coverage(&min_distances(&d).unwrap()).unwrap()
        };
        let mut shuffled = qs.clone();
        shuffled.reverse();
        shuffled.push(qs[0].clone());
        let d = pairwise_distances(&e_d, Role::Chunk, &matrix(&shuffled), Role::Question).unwrap();
        let mind = min_distances(&d).unwrap();
        prop_assert!((basic_coverage(&mind).unwrap() - base).abs() < 1e-12);
        let single = ClusterModel::trivial(&e_d).unwrap();
        prop_assert!((weighted_coverage(&mind, &single).unwrap().0 - base).abs() < 1e-12);
    }

    #[test]
    fn lof_scores_are_per_question(docs in rows(6..40, 4), qs in rows(1..6, 4)) {
        let cfg = LofConfig::default();
        let all = lof_assess(&matrix(&qs), &matrix(&docs), &cfg).unwrap();
        for (i, q) in qs.iter().enumerate() {
            let alone = lof_assess(&matrix(std::slice::from_ref(q)), &matrix(&docs), &cfg).unwrap();
            prop_assert_eq!(alone[0].lof_raw, all[i].lof_raw);
            prop_assert!((all[i].reported_score - (all[i].lof_raw - 1.0)).abs() < 1e-12);
            prop_assert_eq!(all[i].is_outlier, all[i].reported_score > cfg.outlier_threshold);
        }
    }
}

#[test]
fn tsne_separates_two_blobs() {
    let mut r = rng(31);
    let dim = 12;
    let centres = gaussian_rows(&mut r, 2, dim);
    let noise = gaussian_rows(&mut r, 60, dim);
    let points: Vec<Vec<f64>> = noise
        .iter()
        .enumerate()
        .map(|(i, z)| centres[i / 30].iter().zip(z).map(|(c, e)| c + 0.05 * e).collect())
        .collect();
    let labels = PointLabels {
        roles: vec![PointRole::Chunk; 60],
        cluster_of: (0..60).map(|i| i / 30).collect(),
        question_index: Vec::new(),
    };
    for method in [ProjectionMethod::Tsne, ProjectionMethod::Pca] {
        let proj = project_2d(&matrix(&points), labels.clone(), Some(method), 5, None).unwrap();
        let s = silhouette(&proj.points, &labels.cluster_of);
        assert!(s > 0.5, "{method:?} silhouette {s}");
    }
}
