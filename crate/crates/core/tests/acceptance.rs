//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{doc_id, rng, LinearWorld};
use headline_rank::cli::{self, AblateArgs, BoostArgs, DrawPolicyArg, MethodArg};
use headline_rank::data::{self, build_training_pairs, split_validation, DrawPolicy, Label, PairDataset};
use headline_rank::ensemble::{decide_label, predict_dataset, BlendMember, BlendSpec, Normalization, PairScores};
use headline_rank::evaluation::weighted_accuracy;
use headline_rank::pooling::{self, TokenFile};
use headline_rank::ranker::{self, pair_logit_gradients, pair_logit_loss, HyperParams, RankerModel};
use headline_rank::EmbeddingStore;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("{what} took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

// ---------------------------------------------------------------------------

fn metric_oracle() -> Outcome {
    use Label::*;
    let start = Instant::now();
    // Agreement table written out cell by cell.
    let expected = |g: Label, p: Label| -> Option<f64> {
        match (g, p) {
            (Bad, _) => None,
            (Left, Left) | (Right, Right) | (Draw, Draw) => Some(1.0),
            (Left, Right) | (Right, Left) => Some(0.0),
            _ => Some(0.5),
        }
    };
    let mut checked = 0;
    for g in [Left, Right, Draw, Bad] {
        for p in [Left, Right, Draw] {
            let got = weighted_accuracy(&[g], &[p]);
            match expected(g, p) {
                Some(w) => ensure(got.as_ref().ok() == Some(&w), || {
                    format!("gold {g} pred {p}: got {got:?}, want {w}")
                })?,
                None => {
                    ensure(got.is_err(), || {
                        format!("gold bad alone must be undefined, got {got:?}")
                    })?;
                    // with one scorable row alongside, the bad row is omitted
                    let with_row = weighted_accuracy(&[g, Left], &[p, Left]);
                    ensure(with_row.as_ref().ok() == Some(&1.0), || {
                        format!("bad row not omitted: {with_row:?}")
                    })?;
                }
            }
            checked += 1;
        }
    }
    within(start.elapsed(), 1.0, "metric oracle")?;
    Ok(format!("{checked} combinations match"))
}

fn loss_values() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let zero = pair_logit_loss(&[0.7, 0.7], &[(0, 1)]);
    ensure((zero - ln2).abs() <= 1e-9, || format!("zero difference: {zero}"))?;
    let l3 = pair_logit_loss(&[3f64.ln(), 0.0], &[(0, 1)]);
    ensure((l3 - (4.0f64 / 3.0).ln()).abs() <= 1e-9, || {
        format!("difference ln 3: {l3}")
    })?;
    let hi = pair_logit_loss(&[1000.0, 0.0], &[(0, 1)]);
    let lo = pair_logit_loss(&[-1000.0, 0.0], &[(0, 1)]);
    ensure(hi.is_finite() && lo.is_finite(), || {
        format!("non-finite at ±1000: {hi}, {lo}")
    })?;
    ensure((lo - 1000.0).abs() <= 1e-9, || {
        format!("loss at -1000 should be 1000, got {lo}")
    })?;
    Ok(format!(
        "ln2 err {:.1e}, ln(4/3) err {:.1e}, ±1000 -> {hi:e}, {lo}",
        (zero - ln2).abs(),
        (l3 - (4.0f64 / 3.0).ln()).abs()
    ))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut r = rng(7);
    let h = 1e-4;
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let scores: Vec<f64> = (0..20).map(|_| 2.0 * common::gaussian(&mut r)).collect();
        let pairs: Vec<(usize, usize)> = (0..30)
            .map(|_| loop {
                let (p, n) = (r.gen_range(0..20), r.gen_range(0..20));
                if p != n {
                    break (p, n);
                }
            })
            .collect();
        let analytic = pair_logit_gradients(&scores, &pairs);
        let base = pair_logit_loss(&scores, &pairs);
        let mut fd_grad = Vec::with_capacity(20);
        let mut fd_hess = Vec::with_capacity(20);
        for i in 0..20 {
            let mut up = scores.clone();
            let mut dn = scores.clone();
            up[i] += h;
            dn[i] -= h;
            let (lu, ld) = (pair_logit_loss(&up, &pairs), pair_logit_loss(&dn, &pairs));
            fd_grad.push((lu - ld) / (2.0 * h));
            fd_hess.push((lu - 2.0 * base + ld) / (h * h));
        }
        worst_g = worst_g.max(rel_err(&analytic.grad, &fd_grad));
        worst_h = worst_h.max(rel_err(&analytic.hess, &fd_hess));
    }
    ensure(worst_g < 1e-6, || format!("gradient relative error {worst_g:.2e}"))?;
    ensure(worst_h < 1e-4, || format!("hessian relative error {worst_h:.2e}"))?;
    within(start.elapsed(), 10.0, "gradient check")?;
    Ok(format!("max rel err grad {worst_g:.2e}, hess {worst_h:.2e}"))
}

struct Recovery {
    world: LinearWorld,
    store: EmbeddingStore,
    model: RankerModel,
    held_out: Vec<(usize, usize)>,
}

fn train_recovery_model() -> Recovery {
    let world = LinearWorld::new(512, 16, 0.1, 2024);
    let store = world.store();
    let train_pairs = world.random_pairs(2000, 1);
    let held_out = world.random_pairs(500, 2);
    let dataset = world.labelled_by_noisy(&train_pairs);
    let (train, valid) = split_validation(&dataset, 0.2, 42).unwrap();
    let train_set = build_training_pairs(&train, &store, DrawPolicy::Exclude).unwrap();
    let valid_set = build_training_pairs(&valid, &store, DrawPolicy::Exclude).unwrap();
    let model = ranker::train(&train_set, &valid_set, &HyperParams::default()).unwrap();
    Recovery {
        world,
        store,
        model,
        held_out,
    }
}

fn synthetic_recovery() -> Outcome {
    let start = Instant::now();
    let rec = single_threaded(train_recovery_model);
    let elapsed = start.elapsed();

    let score = |d: usize| rec.model.score(&rec.world.features[d]).unwrap();
    let ordered = rec
        .held_out
        .iter()
        .filter(|&&(a, b)| (score(a) - score(b)) * (rec.world.true_score[a] - rec.world.true_score[b]) > 0.0)
        .count();
    let order_acc = ordered as f64 / rec.held_out.len() as f64;

    let gold = rec.world.gold_three_way(&rec.held_out, 0.1);
    let dataset = PairDataset::new(
        rec.held_out
            .iter()
            .zip(&gold)
            .map(|(&(a, b), &g)| data::PairRecord::new(doc_id(a), doc_id(b), g).unwrap())
            .collect(),
    );
    let spec = BlendSpec::new(
        vec![BlendMember {
            model: rec.model.clone(),
            store: rec.store.clone(),
        }],
        Normalization::ZScore,
        0.1,
    )
    .unwrap();
    let preds: Vec<Label> = predict_dataset(&spec, &dataset)
        .unwrap()
        .iter()
        .map(|p| p.label)
        .collect();
    let wacc = weighted_accuracy(&gold, &preds).unwrap();

    ensure(order_acc >= 0.90, || {
        format!("held-out ordering accuracy {order_acc:.4} < 0.90")
    })?;
    ensure(wacc >= 0.85, || format!("weighted accuracy {wacc:.4} < 0.85"))?;
    within(elapsed, 60.0, "training")?;
    Ok(format!(
        "ordering acc {order_acc:.4}, weighted acc {wacc:.4}, {} trees, {:.1}s single-threaded",
        rec.model.trees.len(),
        elapsed.as_secs_f64()
    ))
}

fn ensemble_identity() -> Outcome {
    let world = LinearWorld::new(300, 8, 0.3, 99);
    let store = world.store();
    let dataset = world.labelled_by_noisy(&world.random_pairs(900, 3));
    let (train, valid) = split_validation(&dataset, 0.2, 5).unwrap();
    let params = HyperParams {
        n_trees: 200,
        ..HyperParams::default()
    };
    let model = ranker::train(
        &build_training_pairs(&train, &store, DrawPolicy::Exclude).unwrap(),
        &build_training_pairs(&valid, &store, DrawPolicy::Exclude).unwrap(),
        &params,
    )
    .unwrap();
    let member = BlendMember {
        model,
        store: store.clone(),
    };
    let mut compared = 0;
    for norm in [Normalization::ZScore, Normalization::None] {
        let single = BlendSpec::new(vec![member.clone()], norm, 0.1).unwrap();
        let five = BlendSpec::new(vec![member.clone(); 5], norm, 0.1).unwrap();
        for seed in 10..15 {
            let eval = world.labelled_by_noisy(&world.random_pairs(400, seed));
            let a = predict_dataset(&single, &eval).unwrap();
            let b = predict_dataset(&five, &eval).unwrap();
            for (x, y) in a.iter().zip(&b) {
                ensure(x.label == y.label, || format!("label differs on {:?}", x.record))?;
            }
            compared += a.len();
        }
    }
    Ok(format!("{compared} predictions identical"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let world = LinearWorld::new(200, 8, 0.1, 11);
    let pairs = dir.path().join("pairs.jsonl");
    let emb = dir.path().join("emb.hse");
    data::write_pairs(&world.labelled_by_noisy(&world.random_pairs(800, 4)), &pairs).unwrap();
    data::write_embeddings(&world.store(), &emb).unwrap();

    let run = |out: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_headline-rank"))
            .args(["train", "--pairs"])
            .arg(&pairs)
            .arg("--embeddings")
            .arg(&emb)
            .args(["--trees", "300", "--seed", "42", "--log-every", "0", "--out"])
            .arg(out)
            .output()
            .expect("run headline-rank");
        status.status.success()
    };
    let (m1, m2) = (dir.path().join("m1.json"), dir.path().join("m2.json"));
    ensure(run(&m1) && run(&m2), || "train exited non-zero".into())?;
    let (b1, b2) = (std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
    ensure(b1 == b2, || "model files differ".into())?;

    let model = ranker::load_model(&m1).unwrap();
    let m3 = dir.path().join("m3.json");
    ranker::save_model(&model, &m3).unwrap();
    ensure(std::fs::read(&m3).unwrap() == b1, || {
        "save(load(file)) changed bytes".into()
    })?;
    let reloaded = ranker::load_model(&m3).unwrap();
    for x in &world.features {
        let (a, b) = (model.score(x).unwrap(), reloaded.score(x).unwrap());
        ensure(a.to_bits() == b.to_bits(), || format!("score bits differ: {a} vs {b}"))?;
    }
    Ok(format!(
        "{} byte model files identical; {} scores bit-exact",
        b1.len(),
        world.features.len()
    ))
}

fn decision_boundary() -> Outcome {
    use Label::*;
    let ds = [-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2];
    let want = [Left, Draw, Draw, Draw, Draw, Draw, Right];
    for (&d, &w) in ds.iter().zip(&want) {
        let got = decide_label(
            PairScores {
                r_left: 0.0,
                r_right: d,
            },
            0.1,
        );
        ensure(got == w, || format!("d = {d}: got {got}, want {w}"))?;
    }
    let mut r = rng(3);
    for _ in 0..1000 {
        let (a, b) = (common::gaussian(&mut r), common::gaussian(&mut r));
        let fwd = decide_label(PairScores { r_left: a, r_right: b }, 0.1);
        let back = decide_label(PairScores { r_left: b, r_right: a }, 0.1);
        ensure(back == fwd.mirror(), || format!("antisymmetry broken at ({a}, {b})"))?;
    }
    Ok("7 boundary values, 1000 antisymmetric pairs".into())
}

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for n in [0usize, 1, 10_000] {
        let store = if n == 0 {
            EmbeddingStore::empty(16).unwrap()
        } else {
            common::random_store(n, 16, n as u64)
        };
        let (p1, p2) = (
            dir.path().join(format!("a{n}.hse")),
            dir.path().join(format!("b{n}.hse")),
        );
        data::write_embeddings(&store, &p1).unwrap();
        let back = data::load_embeddings(&p1).map_err(|e| e.to_string())?;
        data::write_embeddings(&back, &p2).unwrap();
        ensure(std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap(), || {
            format!("HSE1 {n} rows differ")
        })?;
        ensure(back == store, || format!("HSE1 {n} rows: contents differ"))?;

        let tokens = if n == 0 {
            TokenFile::new(16, vec![]).unwrap()
        } else {
            common::random_token_file(n, 16, n as u64 + 1)
        };
        let (t1, t2) = (
            dir.path().join(format!("a{n}.hst")),
            dir.path().join(format!("b{n}.hst")),
        );
        pooling::write_tokens(&tokens, &t1).unwrap();
        let back = pooling::load_tokens(&t1).map_err(|e| e.to_string())?;
        pooling::write_tokens(&back, &t2).unwrap();
        ensure(std::fs::read(&t1).unwrap() == std::fs::read(&t2).unwrap(), || {
            format!("HST1 {n} rows differ")
        })?;
        ensure(back == tokens, || format!("HST1 {n} rows: contents differ"))?;
        report.push(n.to_string());
    }
    Ok(format!("HSE1 + HST1 byte-identical at {} rows", report.join("/")))
}

fn ablation_sanity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let world = LinearWorld::new(300, 8, 0.1, 77);
    let pairs = dir.path().join("pairs.jsonl");
    data::write_pairs(&world.labelled_by_noisy(&world.random_pairs(1200, 8)), &pairs).unwrap();
    let signal = dir.path().join("signal.hst");
    let noise = dir.path().join("noise.hst");
    pooling::write_tokens(&common::token_layer(&world, true, 1), &signal).unwrap();
    pooling::write_tokens(&common::token_layer(&world, false, 2), &noise).unwrap();

    let repeats = 3;
    let args = AblateArgs {
        pairs,
        token_files: vec![
            format!("signal={}", signal.display()),
            format!("noise={}", noise.display()),
        ],
        methods: vec![MethodArg::Mean, MethodArg::Cls],
        seed: 42,
        repeats,
        test_frac: 0.2,
        boost: BoostArgs {
            trees: 200,
            depth: 6,
            lr: 0.1,
            bins: 256,
            min_leaf: 20,
            early_stop: 50,
            l2: 3.0,
            draw_policy: DrawPolicyArg::Exclude,
            valid_frac: 0.2,
        },
        draw_threshold: 0.1,
        out: None,
    };
    let grid = cli::cmd_ablate(&args).map_err(|e| e.to_string())?;
    let again = cli::cmd_ablate(&args).map_err(|e| e.to_string())?;
    ensure(grid == again, || "grid not reproducible under a fixed seed".into())?;
    ensure(grid.rows.len() == 4, || {
        format!("expected 4 cells, got {:?}", grid.rows)
    })?;
    // rows: signal mean, signal cls, noise mean, noise cls
    for m in 0..2 {
        for r in 0..repeats as usize {
            let (s, n) = (grid.runs[m][r], grid.runs[2 + m][r]);
            ensure(s > n, || {
                format!("{} run {}: signal {s:.4} <= noise {n:.4}", grid.rows[m], r + 1)
            })?;
        }
    }
    Ok(format!(
        "signal mean/cls {:.3}/{:.3} vs noise {:.3}/{:.3} over {repeats} runs",
        grid.mean(0),
        grid.mean(1),
        grid.mean(2),
        grid.mean(3)
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("metric oracle (12 weight-table cells)", metric_oracle),
        ("pair logit loss values", loss_values),
        ("gradient/hessian finite-difference check", gradient_check),
        ("synthetic ranking recovery", synthetic_recovery),
        ("ensemble identity (k = 5 copies)", ensemble_identity),
        ("training determinism and model round trip", determinism),
        ("decision-rule boundary and antisymmetry", decision_boundary),
        ("HSE1/HST1 byte-level round trips", format_round_trips),
        ("ablation harness ranks signal layer higher", ablation_sanity),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
