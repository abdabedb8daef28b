//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines show up under `cargo test`.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routefit::data::{split, synth_pool, OutcomeMatrix, OutcomeRecord, SplitSpec, SynthConfig};
use routefit::eval::{
    advantage_matrix, baseline_point, default_cascade_grid, default_difficulty_grid, dominance_report, perfect_correctness, simulate,
    threshold_sweep, BaselineSegment,
};
use routefit::predictors::{read_predictor, write_correctness_predictor, write_difficulty_predictor, CorrectnessNet, Predictor};
use routefit::tensor::{grad_check, Matrix, Mlp, Targets};
use routefit::{CorrectnessConfig, CorrectnessPredictor, DifficultyConfig, DifficultyPredictor, ModelPool, ModelProfile, Policy, Replay, Scores};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed <= limit, || format!("took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn gradient_correctness() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let (hidden, out): (&[usize], usize) = if seed % 2 == 0 { (&[32, 16], 5) } else { (&[128, 64, 16], 8) };
        let model = Mlp::init(64, hidden, out, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let rows = 3;
        let batch = Matrix::from_vec(rows, 64, (0..rows * 64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let classes = Targets::Classes((0..rows).map(|_| rng.random_range(0..out)).collect());
        let mut mask: Vec<f64> = (0..rows * out).map(|_| f64::from(u8::from(rng.random_bool(0.7)))).collect();
        mask[0] = 1.0;
        let binary = Targets::Binary {
            targets: Matrix::from_vec(rows, out, (0..rows * out).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect()).unwrap(),
            mask: Matrix::from_vec(rows, out, mask).unwrap(),
        };
        for targets in [&classes, &binary] {
            let r = grad_check(&model, targets, &batch, 1e-5).map_err(|e| e.to_string())?;
            check(r.max_relative_error < 1e-4, || format!("seed {seed} {:?}: max relative error {:e} at {:?}", targets.kind(), r.max_relative_error, r.worst))?;
            worst = worst.max(r.max_relative_error);
        }
    }
    within(t0.elapsed(), Duration::from_secs(30))?;
    Ok(format!("40 checks, worst relative error {worst:.2e}"))
}

fn partition_exact(n: usize, sizes: (usize, usize, usize)) -> Result<(), String> {
    let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
    let s = split(&ids, &SplitSpec::counts(17, sizes.0, sizes.1, sizes.2)).map_err(|e| e.to_string())?;
    check((s.train.len(), s.val.len(), s.eval.len()) == sizes, || format!("sizes {:?}", (s.train.len(), s.val.len(), s.eval.len())))?;
    let mut all: Vec<&String> = s.train.iter().chain(&s.val).chain(&s.eval).collect();
    all.sort();
    all.dedup();
    check(all.len() == sizes.0 + sizes.1 + sizes.2, || "partitions overlap".into())?;
    check(sizes.0 + sizes.1 + sizes.2 != n || all.len() == n, || "partitions do not cover".into())
}

fn exact_splits() -> Outcome {
    let t0 = Instant::now();
    partition_exact(7500, (6000, 1500, 0))?;
    partition_exact(3136, (1882, 626, 628))?;
    within(t0.elapsed(), Duration::from_secs(1))?;
    Ok("7500 -> 6000/1500, 3136 -> 1882/626/628".into())
}

fn same_bits(a: &Mlp, b: &Mlp) -> bool {
    a.dims() == b.dims()
        && a.layers().iter().zip(b.layers()).all(|(x, y)| {
            x.activation() == y.activation()
                && x.weights().data().iter().zip(y.weights().data()).all(|(p, q)| p.to_bits() == q.to_bits())
                && x.bias().iter().zip(y.bias()).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

fn architecture_fidelity(dir: &Path) -> Outcome {
    let d = DifficultyPredictor::new(5120, "emb", 45, DifficultyConfig::default()).map_err(|e| e.to_string())?;
    check(d.mlp.dims() == [5120, 256, 64, 5], || format!("difficulty dims {:?}", d.mlp.dims()))?;
    let path = write_difficulty_predictor(dir.join("difficulty"), &d).map_err(|e| e.to_string())?;
    let Predictor::Difficulty(back) = read_predictor(&path).map_err(|e| e.to_string())? else { return Err("wrong kind".into()) };
    check(same_bits(&d.mlp, &back.mlp), || "difficulty checkpoint changed".into())?;
    drop((d, back));

    let models: Vec<String> = (0..8).map(|k| format!("m{k}")).collect();
    let c = CorrectnessPredictor::new(5120, models, "emb", 45, CorrectnessConfig::default()).map_err(|e| e.to_string())?;
    let CorrectnessNet::Shared(net) = &c.net else { return Err("expected one shared network".into()) };
    check(net.dims() == [5120, 8192, 2048, 128, 8], || format!("correctness dims {:?}", net.dims()))?;
    let path = write_correctness_predictor(dir.join("correctness"), &c).map_err(|e| e.to_string())?;
    let bytes = std::fs::metadata(dir.join("correctness.rfmlp")).map(|m| m.len()).unwrap_or(0);
    let Predictor::Correctness(back) = read_predictor(&path).map_err(|e| e.to_string())? else { return Err("wrong kind".into()) };
    let CorrectnessNet::Shared(back_net) = &back.net else { return Err("shape changed".into()) };
    check(same_bits(net, back_net), || "correctness checkpoint changed".into())?;
    Ok(format!("5120-256-64-5 and 5120-8192-2048-128-8 round-trip bit-exact ({} params, {} MB)", net.param_count(), bytes >> 20))
}

fn planted_sweep(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let mut picks = Vec::new();
    for seed in 0..5u64 {
        let root = dir.join(format!("sweep{seed}"));
        std::fs::create_dir_all(&root).unwrap();
        let p = Pipeline::synth(&root, seed, r#""n_layers": 6, "best_layer": 3, "embed_noise": 1.5"#);
        let cfg = p.write_config(
            "sweep.json",
            &format!(
                r#"{{"stores": {:?}, "problems": {:?}, "split": {{"file": {:?}}}, "out": {:?}, "seed": {seed}, "difficulty": {DIFFICULTY_PROBE}}}"#,
                s(&p.pool.join("layers")),
                s(&p.file("problems.jsonl")),
                s(&p.file("split.json")),
                s(&root.join("sweep.csv"))
            ),
        );
        picks.push(ok(&["sweep-layers", "--config", s(&cfg)]).trim().to_string());
    }
    within(t0.elapsed(), Duration::from_secs(120))?;
    let hits = picks.iter().filter(|l| *l == "best_layer 3").count();
    check(hits == 5, || format!("{hits}/5 seeds picked layer 3: {picks:?}"))?;
    Ok("layer 3 chosen in 5/5 seeds at embed_noise 1.5".into())
}

fn random_instance(seed: u64, n: usize, m: usize) -> (OutcomeMatrix, ModelPool, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut recs = Vec::new();
    for id in &ids {
        for k in 0..m {
            recs.push(OutcomeRecord {
                problem_id: id.clone(),
                model_id: format!("m{k}"),
                correct: rng.random_bool(0.5),
                latency_s: (k + 1) as f64 * rng.random_range(0.5..1.5),
            });
        }
    }
    let pool = ModelPool::new((0..m).map(|k| ModelProfile::new(format!("m{k}"), k as u32)).collect()).unwrap();
    (OutcomeMatrix::from_records(recs).unwrap(), pool, ids)
}

fn router_degeneracy() -> Outcome {
    let mut checked = 0;
    for seed in 0..20u64 {
        let (outcomes, pool, ids) = random_instance(seed, 60, 3);
        let replay = Replay::new(&outcomes, &pool, &ids).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        let small = baseline_point("m0", &ids, &outcomes).map_err(|e| e.to_string())?;
        let large = baseline_point("m2", &ids, &outcomes).map_err(|e| e.to_string())?;

        let probs = Scores::Correctness((0..60).map(|_| (0..3).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect()).collect());
        let sweep = threshold_sweep(&Policy::Cascade, &probs, &[0.0, 1.0], &replay).map_err(|e| e.to_string())?;
        let scores = Scores::Difficulty((0..60).map(|_| rng.random_range(1.0..=5.0)).collect());
        let policy = Policy::Difficulty { small: "m0".into(), large: "m2".into() };
        let dsweep = threshold_sweep(&policy, &scores, &[0.9, 5.0], &replay).map_err(|e| e.to_string())?;
        let same = |p: &routefit::SystemPoint, b: &routefit::SystemPoint| p.accuracy == b.accuracy && p.mean_latency_s == b.mean_latency_s;
        check(same(&sweep[0].0, &small) && same(&sweep[1].0, &large), || format!("cascade endpoints differ on seed {seed}"))?;
        check(same(&dsweep[0].0, &large) && same(&dsweep[1].0, &small), || format!("difficulty endpoints differ on seed {seed}"))?;
        checked += 4;
    }
    Ok(format!("{checked} endpoint systems equal their baselines exactly"))
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let (m, n) = (3usize, 6usize);
    let pool = ModelPool::new((0..m).map(|k| ModelProfile::new(format!("m{k}"), k as u32)).collect()).unwrap();
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let assignments = m.pow(n as u32);
    let mut recs: Vec<OutcomeRecord> = ids
        .iter()
        .flat_map(|id| (0..m).map(move |k| OutcomeRecord { problem_id: id.clone(), model_id: format!("m{k}"), correct: false, latency_s: (k + 1) as f64 }))
        .collect();
    for bits in 0u32..1 << (m * n) {
        let cell = |i: usize, k: usize| bits >> (i * m + k) & 1 == 1;
        for (j, r) in recs.iter_mut().enumerate() {
            r.correct = cell(j / m, j % m);
        }
        let outcomes = OutcomeMatrix::from_records(recs.iter().cloned()).unwrap();
        let replay = Replay::new(&outcomes, &pool, &ids).map_err(|e| e.to_string())?;
        let (cascade, _) = simulate(&Policy::Cascade, &perfect_correctness(&replay), Some(0.5), &replay).map_err(|e| e.to_string())?;
        let (oracle, _) = simulate(&Policy::Oracle, &Scores::None, None, &replay).map_err(|e| e.to_string())?;
        check(cascade.accuracy == oracle.accuracy, || format!("matrix {bits:#x}: cascade {} vs oracle {}", cascade.accuracy, oracle.accuracy))?;
        let mut best = 0;
        for code in 0..assignments {
            let (mut c, mut hits) = (code, 0);
            for i in 0..n {
                hits += usize::from(cell(i, c % m));
                c /= m;
            }
            best = best.max(hits);
        }
        check(oracle.n_correct() == best, || format!("matrix {bits:#x}: a fixed assignment scores {best}, oracle {}", oracle.n_correct()))?;
    }
    within(t0.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} matrices, {assignments} assignments each", 1u32 << (m * n)))
}

fn dominance() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..10 {
        let pool = synth_pool(&SynthConfig { outcome_noise: 0.0, seed, ..SynthConfig::default() }).map_err(|e| e.to_string())?;
        let models = ModelPool::from_latency(&pool.outcomes, &pool.model_ids).map_err(|e| e.to_string())?;
        let ids: Vec<String> = pool.problems.iter().map(|p| p.id.clone()).collect();
        let replay = Replay::new(&pool.outcomes, &models, &ids).map_err(|e| e.to_string())?;
        let seg = BaselineSegment::new(
            replay.baseline(&models.cheapest().model_id).map_err(|e| e.to_string())?,
            replay.baseline(&models.largest().model_id).map_err(|e| e.to_string())?,
        );
        let points: Vec<_> = threshold_sweep(&Policy::Cascade, &perfect_correctness(&replay), &default_cascade_grid(), &replay)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        for row in dominance_report(&points, &seg) {
            check(row.margin >= -1e-12, || format!("seed {seed}: {row:?}"))?;
            worst = worst.min(row.margin);
        }
    }
    Ok(format!("10 seeds, smallest margin {worst:+.4}"))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dgrid = vec![0.5];
    dgrid.extend(default_difficulty_grid());
    dgrid.extend([3.5, 5.5]);
    let mut cgrid = vec![0.0];
    cgrid.extend(default_cascade_grid());
    cgrid.push(1.0);
    for inst in 0..100u64 {
        let (n, m) = (rng.random_range(1..40), rng.random_range(2..6));
        let (outcomes, pool, ids) = random_instance(inst, n, m);
        let replay = Replay::new(&outcomes, &pool, &ids).map_err(|e| e.to_string())?;
        let probs = Scores::Correctness((0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect());
        let sweep = threshold_sweep(&Policy::Cascade, &probs, &cgrid, &replay).map_err(|e| e.to_string())?;
        for w in sweep.windows(2) {
            check(w[0].1.iter().zip(&w[1].1).all(|(a, b)| a.cost_rank <= b.cost_rank), || format!("cascade instance {inst}"))?;
        }
        let scores = Scores::Difficulty((0..n).map(|_| rng.random_range(1.0..=5.0)).collect());
        let policy = Policy::Difficulty { small: "m0".into(), large: format!("m{}", m - 1) };
        let sweep = threshold_sweep(&policy, &scores, &dgrid, &replay).map_err(|e| e.to_string())?;
        for w in sweep.windows(2) {
            // a higher difficulty bar sends fewer problems to the large model
            check(w[0].1.iter().zip(&w[1].1).all(|(a, b)| a.cost_rank >= b.cost_rank), || format!("difficulty instance {inst}"))?;
        }
    }
    Ok("100 instances: cascade rank non-decreasing, difficulty rank non-increasing in threshold".into())
}

fn advantage_algebra(dir: &Path) -> Outcome {
    for seed in 0..100u64 {
        let m = 2 + (seed % 5) as usize;
        let (outcomes, _, ids) = random_instance(seed, 30, m);
        let models: Vec<String> = (0..m).map(|k| format!("m{k}")).collect();
        let a = advantage_matrix(&outcomes, &models).map_err(|e| e.to_string())?;
        let d = a.differences();
        for i in 0..m {
            check(d[i][i] == 0 && a.counts[i][i] == 0, || format!("seed {seed}: diagonal"))?;
            for j in 0..m {
                check(d[i][j] == -d[j][i], || format!("seed {seed}: not antisymmetric at {i},{j}"))?;
                let recount = ids.iter().filter(|p| outcomes.get(p, &models[i]).unwrap().correct && !outcomes.get(p, &models[j]).unwrap().correct).count();
                check(a.counts[i][j] == recount, || format!("seed {seed}: count {i},{j}"))?;
            }
        }
    }
    let csv = dir.join("hand.csv");
    std::fs::write(&csv, "problem_id,model_id,correct,latency_s\n1,A,1,1\n1,B,0,1\n2,A,1,1\n2,B,1,1\n3,A,0,1\n3,B,1,1\n").unwrap();
    let out = ok(&["advantage", "--outcomes", s(&csv), "--out", &format!("{}/hand_", s(dir))]);
    check(out == "A\t0\t1\nB\t1\t0\n", || format!("hand case printed {out:?}"))?;
    let rows = csv_rows(&dir.join("hand_advantage.csv"));
    check(rows[2] == ["A", "B", "1", "1", "0"], || format!("hand case row {:?}", rows[2]))?;
    Ok("100 random matrices antisymmetric with zero diagonal; hand case 1/1, difference 0".into())
}

fn end_to_end(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let p = Pipeline::synth(dir, 0, r#""n_models": 4, "outcome_noise": 0.1"#);
    let (d, c) = (dir.join("difficulty"), dir.join("correctness"));
    p.train_difficulty(3, &d);
    p.train_correctness(3, &c);
    let rd = format!("{}/route_difficulty/", s(dir));
    ok(&p.route_args("difficulty", &d.with_extension("json"), &p.layer(3), Path::new(&rd)).iter().map(String::as_str).collect::<Vec<_>>());
    let rc = format!("{}/route_cascade/", s(dir));
    ok(&p.route_args("cascade", &c.with_extension("json"), &p.layer(3), Path::new(&rc)).iter().map(String::as_str).collect::<Vec<_>>());
    within(t0.elapsed(), Duration::from_secs(300))?;

    let rows = csv_rows(&dir.join("route_cascade/points.csv"));
    let num = |r: &Vec<String>, k: usize| r[k].parse::<f64>().unwrap();
    let strongest = rows[1..]
        .iter()
        .filter(|r| r[0].starts_with("baseline:"))
        .max_by(|a, b| num(a, 2).total_cmp(&num(b, 2)))
        .ok_or("no baselines")?;
    let (acc, lat) = (num(strongest, 2), num(strongest, 3));
    let best = rows[1..]
        .iter()
        .filter(|r| r[0] == "cascade" && num(r, 3) <= 0.75 * lat)
        .max_by(|a, b| num(a, 2).total_cmp(&num(b, 2)))
        .ok_or("no cascade point within 75% of the strongest latency")?;
    check(num(best, 2) >= 0.98 * acc, || {
        format!("best cascade point within budget: accuracy {} at {:.3}s vs {} accuracy {acc} at {lat:.3}s", best[2], num(best, 3), strongest[0])
    })?;
    Ok(format!(
        "cascade θ={} reaches {:.1}% of {} accuracy at {:.1}% of its latency",
        best[1],
        100.0 * num(best, 2) / acc,
        strongest[0].trim_start_matches("baseline:"),
        100.0 * num(best, 3) / lat
    ))
}

fn determinism(dir: &Path) -> Outcome {
    let p = Pipeline::synth(dir, 11, r#""outcome_noise": 0.05"#);
    let (d, c) = (dir.join("difficulty"), dir.join("correctness"));
    p.train_difficulty(3, &d);
    p.train_correctness(3, &c);
    let sweep_cfg = p.write_config(
        "sweep.json",
        &format!(
            r#"{{"stores": {:?}, "problems": {:?}, "split": {{"file": {:?}}}, "out": {:?}, "difficulty": {DIFFICULTY_PROBE}}}"#,
            s(&p.pool.join("layers")),
            s(&p.file("problems.jsonl")),
            s(&p.file("split.json")),
            s(&dir.join("sweep.csv"))
        ),
    );
    ok(&["sweep-layers", "--config", s(&sweep_cfg)]);
    let rd = format!("{}/rd/", s(dir));
    ok(&p.route_args("difficulty", &d.with_extension("json"), &p.layer(3), Path::new(&rd)).iter().map(String::as_str).collect::<Vec<_>>());
    let rc = format!("{}/rc/", s(dir));
    ok(&p.route_args("cascade", &c.with_extension("json"), &p.layer(3), Path::new(&rc)).iter().map(String::as_str).collect::<Vec<_>>());
    let ro = format!("{}/ro/", s(dir));
    ok(&["route-eval", "--policy", "oracle", "--outcomes", s(&p.file("outcomes.csv")), "--split", s(&p.file("split.json")), "--out", &ro]);
    let rr = format!("{}/rr/", s(dir));
    ok(&["report", "--from", s(&dir.join("rc/manifest.json")), "--out", &rr]);
    let ra = format!("{}/ra/", s(dir));
    ok(&["advantage", "--outcomes", s(&p.file("outcomes.csv")), "--out", &ra]);

    let before = tree(dir);
    let snapshots = [
        ("synth", p.pool.join("resolved_config.json")),
        ("train-difficulty", dir.join("difficulty.resolved_config.json")),
        ("train-correctness", dir.join("correctness.resolved_config.json")),
        ("sweep-layers", dir.join("sweep.resolved_config.json")),
        ("route-eval", dir.join("rd/resolved_config.json")),
        ("route-eval", dir.join("rc/resolved_config.json")),
        ("route-eval", dir.join("ro/resolved_config.json")),
        ("report", dir.join("rr/resolved_config.json")),
        ("advantage", dir.join("ra/resolved_config.json")),
    ];
    for (cmd, snap) in &snapshots {
        check(snap.exists(), || format!("{cmd}: no snapshot at {}", snap.display()))?;
        ok(&[cmd, "--config", s(snap)]);
    }
    let after = tree(dir);
    check(before.keys().eq(after.keys()), || "rerun changed the set of files".into())?;
    let changed: Vec<_> = before.iter().filter(|(k, v)| after[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    check(changed.is_empty(), || format!("files differ after rerun: {changed:?}"))?;
    Ok(format!("9 commands rerun from snapshots, {} files byte-identical", before.len()))
}

fn main() {
    let work = tempfile::tempdir().expect("tempdir");
    let sub = |name: &str| {
        let p = work.path().join(name);
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("exact split fidelity", Box::new(exact_splits)),
        ("architecture fidelity", Box::new({
            let d = sub("arch");
            move || architecture_fidelity(&d)
        })),
        ("planted layer sweep", Box::new({
            let d = sub("sweep");
            move || planted_sweep(&d)
        })),
        ("router degeneracy", Box::new(router_degeneracy)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("dominance over random assignment", Box::new(dominance)),
        ("threshold monotonicity", Box::new(monotonicity)),
        ("advantage matrix algebra", Box::new({
            let d = sub("advantage");
            move || advantage_algebra(&d)
        })),
        ("end-to-end synthetic reproduction", Box::new({
            let d = sub("e2e");
            move || end_to_end(&d)
        })),
        ("determinism from snapshots", Box::new({
            let d = sub("determinism");
            move || determinism(&d)
        })),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name:<36} {secs:>7.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<36} {secs:>7.2}s  {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
