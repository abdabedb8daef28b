use std::collections::HashSet;
use std::io::Write;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routefit::data::{
    difficulty_histogram, load_outcomes, load_problems, read_embedding_store, split, write_embedding_store,
    EmbeddingStore, OutcomeMatrix, OutcomeRecord, SplitSpec,
};

/// Size from the layout: magic, version, embedder id, layer, dim, count,
/// records (length-prefixed id plus payload), CRC.
fn expected_size(embedder: &str, ids: &[String], dim: usize) -> usize {
    let header = 6 + 2 + 4 + embedder.len() + 4 + 4 + 4;
    let id_bytes: usize = ids.iter().map(|id| 4 + id.len()).sum();
    header + id_bytes + ids.len() * dim * 4 + 4
}

#[test]
fn full_width_store_round_trips_with_predicted_size() {
    let (n, dim) = (3136, 5120);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = EmbeddingStore::new("test-embedder", 45, dim).unwrap();
    let ids: Vec<String> = (0..n).map(|i| format!("math-{i}")).collect();
    for id in &ids {
        store.insert(id.clone(), (0..dim).map(|_| rng.random::<f32>() - 0.5).collect()).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("layer45.rfemb");
    write_embedding_store(&store, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    assert_eq!(size, expected_size("test-embedder", &ids, dim));
    let back = read_embedding_store(&path).unwrap();
    assert_eq!(back.dim(), dim);
    assert_eq!(back.layer_index(), 45);
    for id in ids.iter().step_by(97) {
        let (a, b) = (store.get(id).unwrap(), back.get(id).unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back, store);
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

#[test]
fn difficulty_training_split_sizes() {
    let all = ids(7500);
    let s = split(&all, &SplitSpec::counts(42, 6000, 1500, 0)).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.eval.len()), (6000, 1500, 0));
    let train: HashSet<_> = s.train.iter().collect();
    assert!(s.val.iter().all(|id| !train.contains(id)));
    assert_eq!(train.len() + s.val.len(), 7500);
}

#[test]
fn histogram_matches_independent_line_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("math.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..7500 {
        let level = 1 + (rng.random::<f64>().powf(0.7) * 5.0).floor().min(4.0) as u8;
        writeln!(f, r#"{{"id":"m{i}","text":"problem {i}","source":"math","difficulty":{level}}}"#).unwrap();
    }
    drop(f);
    let problems = load_problems(&path).unwrap();
    assert_eq!(problems.len(), 7500);
    let mut recount = [0usize; 5];
    for line in std::fs::read_to_string(&path).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        recount[v["difficulty"].as_u64().unwrap() as usize - 1] += 1;
    }
    assert_eq!(difficulty_histogram(&problems), recount);
}

fn outcomes_csv(rows: &[(String, String, bool, f64)]) -> String {
    let mut s = String::from("problem_id,model_id,correct,latency_s\n");
    for (p, m, c, l) in rows {
        s.push_str(&format!("{p},{m},{},{l}\n", u8::from(*c)));
    }
    s
}

#[test]
fn per_model_accuracy_matches_spreadsheet_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let models = ["small", "mid", "large"];
    let rows: Vec<(String, String, bool, f64)> = (0..200)
        .flat_map(|p| models.map(|m| (format!("p{p}"), m.to_string(), false, 0.0)))
        .map(|(p, m, _, _)| (p, m, rng.random_bool(0.6), rng.random_range(0.1..9.0)))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outcomes.csv");
    std::fs::write(&path, outcomes_csv(&rows)).unwrap();
    let matrix = load_outcomes(&path, true).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    for m in models {
        let (mut hits, mut n) = (0, 0);
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols[1] == m {
                n += 1;
                hits += usize::from(cols[2] == "1");
            }
        }
        assert_eq!(matrix.accuracy(m).unwrap(), hits as f64 / n as f64);
    }
}

proptest! {
    #[test]
    fn accuracy_and_latency_ignore_row_order(
        cells in proptest::collection::vec((any::<bool>(), 0.0f64..100.0), 3 * 8),
        seed in any::<u64>(),
    ) {
        let mut recs: Vec<OutcomeRecord> = cells.iter().enumerate().map(|(i, &(c, l))| OutcomeRecord {
            problem_id: format!("p{}", i / 3),
            model_id: format!("m{}", i % 3),
            correct: c,
            latency_s: l,
        }).collect();
        let a = OutcomeMatrix::from_records(recs.clone()).unwrap();
        use rand::seq::SliceRandom;
        recs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = OutcomeMatrix::from_records(recs).unwrap();
        for m in ["m0", "m1", "m2"] {
            prop_assert_eq!(a.accuracy(m), b.accuracy(m));
            prop_assert_eq!(a.mean_latency(m), b.mean_latency(m));
        }
    }

    #[test]
    fn store_round_trip_is_identity(
        dim in 1usize..16,
        layer in any::<u32>(),
        n in 0usize..20,
        values in proptest::collection::vec(proptest::num::f32::NORMAL | proptest::num::f32::ZERO | proptest::num::f32::SUBNORMAL, 16 * 20),
    ) {
        let mut store = EmbeddingStore::new("emb/ü", layer, dim).unwrap();
        for i in 0..n {
            store.insert(format!("id-{i}"), values[i * dim..(i + 1) * dim].to_vec()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.rfemb");
        write_embedding_store(&store, &path).unwrap();
        let back = read_embedding_store(&path).unwrap();
        prop_assert_eq!(back.embedder_id(), store.embedder_id());
        prop_assert_eq!(back.layer_index(), layer);
        let bits = |s: &EmbeddingStore| s.iter().map(|(k, v)| (k.to_string(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&store));
    }
}
