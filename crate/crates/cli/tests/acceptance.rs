//! Acceptance report: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs as a plain binary (`harness = false`). A failing criterion is
//! reported but does not fail the target unless `LRCL_ACCEPTANCE_STRICT=1`,
//! so known, documented shortfalls stay visible without breaking the build.
//! Panics and setup errors always fail. `LRCL_ACCEPTANCE_ONLY=3,7` runs a
//! subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use lrcl_core::contrastive::nt_xent_loss;
use lrcl_core::data::{
    canonical, mmfit::adapt_mmfit, mmfit::MmfitConfig, synth_generate, Side, SynthConfig, WindowedDataset,
};
use lrcl_core::eval::{evaluate, label_subset, metrics, run_pipeline, ConfusionMatrix, ExperimentData, Method, PipelineConfig};
use lrcl_core::model::{
    count_parameters, encoder_forward, head_forward, Checkpoint, ClassifierParams, EncoderParams, EncoderVars, HeadParams,
    HeadVars, LayerVars, ACCEL_CHANNELS,
};
use lrcl_core::tensor::{grad_check, GradCheckOptions, Graph, Var};
use lrcl_core::training::{
    cosine_lr, finetune, finetune_with_monitor, pretrain_lr_ssl, FinetuneConfig, FreezePolicy,
};
use lrcl_core::{Element, Result, Rng, Tensor};
use serde_json::{json, Value};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

// ---------------------------------------------------------------- 1

fn randn<F: Element>(shape: &[usize], scale: f64, rng: &mut Rng) -> Tensor<F> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| F::of(scale * rng.normal())).collect()).unwrap()
}

type OpCase<F> = (Vec<Tensor<F>>, Box<dyn Fn(&mut Graph<F>, &[Var]) -> Result<Var>>, usize);

fn op_case<F: Element>(op: &str, seed: u64) -> OpCase<F> {
    let mut rng = Rng::new(seed);
    let all = 64;
    match op {
        "conv1d" => (
            vec![randn(&[2, 3, 12], 1.0, &mut rng), randn(&[4, 3, 5], 0.5, &mut rng), randn(&[4], 0.5, &mut rng)],
            Box::new(|g, v| g.conv1d(v[0], v[1], v[2])),
            all,
        ),
        "relu" => (vec![randn(&[4, 7], 1.0, &mut rng)], Box::new(|g, v| Ok(g.relu(v[0]))), all),
        "dropout" => (
            vec![randn(&[3, 10], 1.0, &mut rng)],
            Box::new(move |g, v| g.dropout(v[0], 0.3, true, &mut Rng::new(seed + 1))),
            all,
        ),
        "max_pool_time" => (vec![randn(&[2, 3, 9], 1.0, &mut rng)], Box::new(|g, v| g.max_pool_time(v[0])), all),
        "dense" => (
            vec![randn(&[4, 6], 1.0, &mut rng), randn(&[5, 6], 0.5, &mut rng), randn(&[5], 0.5, &mut rng)],
            Box::new(|g, v| g.dense(v[0], v[1], v[2])),
            all,
        ),
        "l2_normalize" => (vec![randn(&[4, 5], 1.0, &mut rng)], Box::new(|g, v| g.l2_normalize(v[0])), all),
        "softmax_cross_entropy" => {
            let labels: Vec<usize> = (0..6).map(|_| rng.below(4)).collect();
            (
                vec![randn(&[6, 4], 2.0, &mut rng)],
                Box::new(move |g, v| g.softmax_cross_entropy(v[0], &labels)),
                all,
            )
        }
        "nt_xent" => {
            let n = 1 + rng.below(4);
            (
                vec![randn(&[2 * n, 4], 1.0, &mut rng)],
                Box::new(|g, v| {
                    let z = g.l2_normalize(v[0])?;
                    g.nt_xent(z, 0.5)
                }),
                all,
            )
        }
        "interleave" => (
            vec![randn(&[3, 4], 1.0, &mut rng), randn(&[3, 4], 1.0, &mut rng)],
            Box::new(|g, v| g.interleave(v[0], v[1])),
            all,
        ),
        "encoder+head+nt_xent" => {
            let enc = EncoderParams::<F>::init(3, 0.1, &mut rng);
            let head = HeadParams::<F>::init(8, &mut rng);
            let mut inputs = vec![randn(&[4, 3, 48], 1.0, &mut rng)];
            for c in [&enc.conv1, &enc.conv2, &enc.conv3] {
                inputs.extend([c.weight.clone(), c.bias.clone()]);
            }
            for d in [&head.dense1, &head.dense2, &head.dense3] {
                inputs.extend([d.weight.clone(), d.bias.clone()]);
            }
            let layer = |v: &[Var], i: usize| LayerVars {
                weight: v[i],
                bias: v[i + 1],
            };
            let f = move |g: &mut Graph<F>, v: &[Var]| {
                let ev = EncoderVars {
                    layers: [layer(v, 1), layer(v, 3), layer(v, 5)],
                    dropout_rate: 0.1,
                };
                let hv = HeadVars {
                    layers: [layer(v, 7), layer(v, 9), layer(v, 11)],
                };
                let h = encoder_forward(g, &ev, v[0], true, &mut Rng::new(seed ^ 7))?;
                let z = head_forward(g, &hv, h)?;
                g.nt_xent(z, 0.5)
            };
            (inputs, Box::new(f), 8)
        }
        _ => unreachable!("unknown op {op}"),
    }
}

const OPS: [&str; 10] = [
    "conv1d",
    "relu",
    "dropout",
    "max_pool_time",
    "dense",
    "l2_normalize",
    "softmax_cross_entropy",
    "nt_xent",
    "interleave",
    "encoder+head+nt_xent",
];

fn worst_error<F: Element>(op: &str, seeds: u64, base: GradCheckOptions) -> Result<f64> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let (inputs, f, coords) = op_case::<F>(op, seed);
        let opts = base.clone().with_seed(seed).with_max_coords(coords);
        let report = grad_check(f, &inputs, &opts)?;
        if report.checked == 0 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(report.max_rel_error);
    }
    Ok(worst)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let seeds = 20;
    let mut failures = Vec::new();
    let (mut w32, mut w64) = (0.0f64, 0.0f64);
    for op in OPS {
        let e32 = worst_error::<f32>(op, seeds, GradCheckOptions::f32()).unwrap();
        let e64 = worst_error::<f64>(op, seeds, GradCheckOptions::f64()).unwrap();
        w32 = w32.max(e32);
        w64 = w64.max(e64);
        if e32 >= 1e-3 || e64 >= 1e-6 {
            failures.push(format!("{op} (f32 {e32:.2e}, f64 {e64:.2e})"));
        }
    }
    let took = start.elapsed();
    let ok = failures.is_empty() && took < Duration::from_secs(60);
    verdict(
        ok,
        format!(
            "{} ops x {seeds} seeds, worst rel error f32 {w32:.2e} f64 {w64:.2e}, {:.1}s{}",
            OPS.len(),
            took.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------- 2

fn brute_force(z: &[Vec<f64>], tau: f64) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sim = |i: usize, j: usize| dot(&z[i], &z[j]) / (dot(&z[i], &z[i]).sqrt() * dot(&z[j], &z[j]).sqrt());
    let two_n = z.len();
    let mut total = 0.0;
    for i in 0..two_n {
        let j = if i % 2 == 0 { i + 1 } else { i - 1 };
        let mut denom = 0.0;
        for k in 0..two_n {
            if k != i {
                denom += (sim(i, k) / tau).exp();
            }
        }
        total += -((sim(i, j) / tau).exp() / denom).ln();
    }
    total / two_n as f64
}

fn rows_tensor(rows: &[Vec<f64>]) -> Tensor<f64> {
    Tensor::new([rows.len(), rows[0].len()], rows.iter().flatten().copied().collect()).unwrap()
}

fn criterion_2() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = Rng::new(seed);
        for n in 1..=8 {
            for s in [2, 8, 32] {
                let z: Vec<Vec<f64>> = (0..2 * n).map(|_| (0..s).map(|_| rng.normal()).collect()).collect();
                for tau in [0.05, 0.5, 1.0] {
                    let got = nt_xent_loss(&rows_tensor(&z), tau).unwrap().0;
                    worst = worst.max((got - brute_force(&z, tau)).abs());
                }
            }
        }
    }
    let mut closed = 0.0f64;
    for n in 1..=8 {
        let mut rng = Rng::new(n as u64);
        let pair: Vec<Vec<f64>> = (0..2).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
        for tau in [0.05, 0.5, 1.0] {
            closed = closed.max(nt_xent_loss(&rows_tensor(&pair), tau).unwrap().0.abs());
            let same = vec![vec![0.3, -0.4, 1.2]; 2 * n];
            let l = nt_xent_loss(&rows_tensor(&same), tau).unwrap().0;
            closed = closed.max((l - ((2 * n - 1) as f64).ln()).abs());
        }
    }
    verdict(
        worst < 1e-5 && closed < 1e-6,
        format!("max |loss - reference| {worst:.2e} over 50 seeds; closed forms within {closed:.2e}"),
    )
}

// ---------------------------------------------------------------- 3, 4

struct SeedResult {
    ssl_f1: f64,
    sup_f1: f64,
    alignment: f64,
}

/// Mean cosine of true left/right partners minus that of all other pairs.
fn alignment(encoder: &EncoderParams, head: &HeadParams, ds: &WindowedDataset) -> f64 {
    let embed = |side: Side| -> Vec<Vec<f64>> {
        let windows: Vec<&Tensor> = ds.pairs.iter().map(|p| p.side(side)).collect();
        let x = Tensor::stack(&windows).unwrap();
        let h = encoder.forward(&x, false, &mut Rng::new(0)).unwrap();
        let z = head.forward(&h).unwrap();
        (0..z.rows())
            .map(|i| {
                let r: Vec<f64> = z.row(i).iter().map(|&v| v as f64).collect();
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.into_iter().map(|v| v / n).collect()
            })
            .collect()
    };
    let (l, r) = (embed(Side::Left), embed(Side::Right));
    let n = l.len();
    let (mut pos, mut neg) = (0.0, 0.0);
    for (i, li) in l.iter().enumerate() {
        for (j, rj) in r.iter().enumerate() {
            let c: f64 = li.iter().zip(rj).map(|(a, b)| a * b).sum();
            if i == j {
                pos += c;
            } else {
                neg += c;
            }
        }
    }
    pos / n as f64 - neg / (n * (n - 1)) as f64
}

fn synth_noisy(windows: usize, seed: u64) -> WindowedDataset {
    let cfg = SynthConfig {
        num_windows: windows,
        noise_std: 0.75,
        ..SynthConfig::default()
    };
    synth_generate(&cfg, &mut Rng::new(seed)).unwrap()
}

fn run_seed(seed: u64) -> SeedResult {
    let pool = synth_noisy(2000, 1000 + seed);
    let validation = synth_noisy(600, 2000 + seed);
    let test = synth_noisy(1200, 3000 + seed);
    let data = ExperimentData {
        pretrain: &pool,
        train: &pool,
        validation: &validation,
        test: &test,
    };
    let mut cfg = PipelineConfig {
        labels_per_class: Some(10),
        ..PipelineConfig::default()
    };
    cfg.pretrain.epochs = 50;
    cfg.pretrain.seed = seed;
    cfg.finetune.seed = seed;

    // Same steps as run_pipeline for LrSsl, kept open to reach the head.
    let labeled = label_subset(&pool, cfg.labels_per_class, seed).unwrap();
    let mut rng = Rng::new(seed);
    let encoder = EncoderParams::init(ACCEL_CHANNELS, cfg.dropout, &mut rng);
    let head = HeadParams::init(cfg.latent_size, &mut rng);
    let pre = pretrain_lr_ssl(&pool, encoder, head, &cfg.pretrain).unwrap();
    let align = alignment(&pre.encoder, &pre.head, &test);
    let classifier = ClassifierParams::init(labeled.num_classes(), &mut rng);
    let ft = finetune(pre.encoder, classifier, &labeled, &validation, &cfg.finetune).unwrap();
    let ssl = evaluate(&ft.model, &test, cfg.side, seed).unwrap();

    let sup = run_pipeline(&data, &cfg, Method::Supervised, seed).unwrap();
    SeedResult {
        ssl_f1: ssl.macro_f1,
        sup_f1: sup.macro_f1,
        alignment: align,
    }
}

fn criteria_3_and_4() -> (Verdict, Verdict) {
    let start = Instant::now();
    let results: Vec<SeedResult> = (0..5).map(run_seed).collect();
    let took = start.elapsed();
    let mean = |f: fn(&SeedResult) -> f64| results.iter().map(f).sum::<f64>() / results.len() as f64;
    let (ssl, sup) = (mean(|r| r.ssl_f1), mean(|r| r.sup_f1));
    let gap = 100.0 * (ssl - sup);
    let per_seed: Vec<String> =
        results.iter().map(|r| format!("{:.3}/{:.3}", r.ssl_f1, r.sup_f1)).collect();
    let c3 = verdict(
        gap >= 10.0 && took < Duration::from_secs(600),
        format!(
            "macro F1 SSL {ssl:.4} vs supervised {sup:.4} ({gap:+.1} pp; per seed {}), {:.0}s",
            per_seed.join(" "),
            took.as_secs_f64()
        ),
    );
    let align = mean(|r| r.alignment);
    let worst = results.iter().map(|r| r.alignment).fold(f64::INFINITY, f64::min);
    let c4 = verdict(
        align >= 0.2,
        format!("partner minus non-partner cosine {align:.3} (lowest seed {worst:.3}) on held-out pairs"),
    );
    (c3, c4)
}

// ---------------------------------------------------------------- 5, 6

fn criterion_5() -> Verdict {
    let mut rng = Rng::new(0);
    let enc = EncoderParams::<f32>::init(3, 0.1, &mut rng);
    let head = HeadParams::<f32>::init(96, &mut rng);
    let cls = ClassifierParams::<f32>::init(11, &mut rng);
    let table = count_parameters(Some(&enc), Some(&head), Some(&cls));
    let got = (table.component("encoder"), table.component("head"), table.component("classifier"));
    let want = (84_512, 70_112, 110_603);
    let noted = table.to_string().contains("not reproducible");
    verdict(
        got == want && noted,
        format!(
            "encoder {} (target {}), head {} (target {}), classifier {} (target {}); 146k note present: {noted}",
            got.0, want.0, got.1, want.1, got.2, want.2
        ),
    )
}

fn criterion_6() -> Verdict {
    let m = metrics(&ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]).unwrap()).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-4;
    let mut diag_ok = true;
    for c in 1..=6 {
        let counts = (0..c).map(|i| (0..c).map(|j| if i == j { 1 + i as u64 * 3 } else { 0 }).collect()).collect();
        let d = metrics(&ConfusionMatrix::from_counts(counts).unwrap()).unwrap();
        diag_ok &= (d.accuracy, d.macro_f1, d.weighted_f1) == (1.0, 1.0, 1.0);
    }
    verdict(
        close(m.accuracy, 0.8333) && close(m.macro_f1, 0.8286) && close(m.weighted_f1, 0.8286) && diag_ok,
        format!(
            "accuracy {:.4}, macro F1 {:.4}, weighted F1 {:.4}; diagonal -> (1,1,1): {diag_ok}",
            m.accuracy, m.macro_f1, m.weighted_f1
        ),
    )
}

// ---------------------------------------------------------------- 7, 8

fn lrcl(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lrcl"))
        .args(args)
        .env("LRCL_LOG", "error")
        .output()
        .expect("spawn lrcl");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn write_config(path: &Path, value: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

/// synth -> pretrain 5 -> finetune 5 -> evaluate in `dir`.
fn cli_pipeline(dir: &Path) -> std::result::Result<(), String> {
    let s = |p: PathBuf| p.to_string_lossy().to_string();
    let cfg = dir.join("config.json");
    write_config(
        &cfg,
        &json!({
            "data": {"path": s(dir.join("train.lrw")), "test_path": s(dir.join("test.lrw"))},
            "finetune": {"checkpoint": s(dir.join("pretrain.lrck")), "labels_per_class": 10},
            "eval": {"checkpoint": s(dir.join("finetune.lrck"))},
            "output": {"directory": s(dir.to_path_buf())},
        }),
    );
    let cfg = s(cfg);
    let steps: [Vec<String>; 5] = [
        vec!["synth".into(), "--config".into(), cfg.clone(), "--seed".into(), "7".into(), "--out".into(), s(dir.join("train.lrw"))],
        vec!["synth".into(), "--config".into(), cfg.clone(), "--seed".into(), "8".into(), "--out".into(), s(dir.join("test.lrw"))],
        vec!["pretrain".into(), "--config".into(), cfg.clone(), "--seed".into(), "3".into(), "--epochs".into(), "5".into()],
        vec!["finetune".into(), "--config".into(), cfg.clone(), "--seed".into(), "3".into(), "--epochs".into(), "5".into()],
        vec!["evaluate".into(), "--config".into(), cfg],
    ];
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        let (code, text) = lrcl(&args);
        if code != 0 {
            return Err(format!("`lrcl {}` exited {code}: {}", step[0], text.trim()));
        }
    }
    Ok(())
}

const PIPELINE_FILES: [&str; 8] = [
    "train.lrw",
    "pretrain.lrck",
    "pretrain_loss.csv",
    "finetune.lrck",
    "finetune_loss.csv",
    "finetune_report.json",
    "evaluate_report.json",
    "evaluate_confusion.csv",
];

fn criterion_7(a: &Path, b: &Path) -> Verdict {
    for dir in [a, b] {
        if let Err(e) = cli_pipeline(dir) {
            return Fail(e);
        }
    }
    let differing: Vec<&str> = PIPELINE_FILES
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok() || !a.join(f).exists())
        .collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", PIPELINE_FILES.len())
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}

fn criterion_8(run: &Path, scratch: &Path) -> Verdict {
    let mut problems = Vec::new();
    // Library round trips.
    let ck = Checkpoint::load(run.join("finetune.lrck")).unwrap();
    let bytes = std::fs::read(run.join("finetune.lrck")).unwrap();
    if ck.to_bytes().unwrap() != bytes {
        problems.push("checkpoint re-encode differs".to_string());
    }
    let ds_bytes = std::fs::read(run.join("train.lrw")).unwrap();
    let ds = canonical::from_bytes(&ds_bytes).unwrap();
    if canonical::to_bytes(&ds).unwrap() != ds_bytes {
        problems.push("dataset re-encode differs".to_string());
    }

    // CLI exit codes on damaged files.
    let s = |p: PathBuf| p.to_string_lossy().to_string();
    let mut bad_magic = bytes.clone();
    bad_magic[..4].copy_from_slice(b"XXXX");
    std::fs::write(scratch.join("magic.lrck"), &bad_magic).unwrap();
    std::fs::write(scratch.join("short.lrck"), &bytes[..bytes.len() - 17]).unwrap();
    let mut bad_ds = ds_bytes.clone();
    bad_ds[0] = b'X';
    std::fs::write(scratch.join("magic.lrw"), &bad_ds).unwrap();
    std::fs::write(scratch.join("short.lrw"), &ds_bytes[..ds_bytes.len() - 5]).unwrap();

    let mut codes = Vec::new();
    for (name, ck_file, data_file) in [
        ("checkpoint magic", "magic.lrck", None),
        ("checkpoint truncation", "short.lrck", None),
        ("dataset magic", "", Some("magic.lrw")),
        ("dataset truncation", "", Some("short.lrw")),
    ] {
        let cfg_path = scratch.join(format!("{}.json", name.replace(' ', "_")));
        let (cmd, cfg) = match data_file {
            None => (
                "evaluate",
                json!({"data": {"test_path": s(run.join("test.lrw"))}, "eval": {"checkpoint": s(scratch.join(ck_file))},
                       "output": {"directory": s(scratch.to_path_buf())}}),
            ),
            Some(d) => (
                "pretrain",
                json!({"data": {"path": s(scratch.join(d))}, "output": {"directory": s(scratch.to_path_buf())}}),
            ),
        };
        write_config(&cfg_path, &cfg);
        let (code, _) = lrcl(&[cmd, "--config", &s(cfg_path), "--epochs", "1"]);
        codes.push(format!("{name} -> {code}"));
        if code != 3 {
            problems.push(format!("{name} exited {code}, expected 3"));
        }
    }
    verdict(
        problems.is_empty(),
        format!("checkpoint and dataset re-encode bit-exact; {}{}", codes.join(", "), if problems.is_empty() {
            String::new()
        } else {
            format!("; problems: {}", problems.join("; "))
        }),
    )
}

// ---------------------------------------------------------------- 9, 10

fn criterion_9() -> Verdict {
    let ds = synth_generate(
        &SynthConfig {
            num_windows: 60,
            ..SynthConfig::default()
        },
        &mut Rng::new(1),
    )
    .unwrap();
    let (train, val) = lrcl_core::data::stratified_split(&ds, 0.25, &mut Rng::new(2)).unwrap();
    let mut rng = Rng::new(3);
    let enc = EncoderParams::init(3, 0.1, &mut rng);
    let cls = ClassifierParams::init(ds.num_classes(), &mut rng);
    let cfg = FinetuneConfig {
        epochs: 3,
        lr: 1e-3,
        freeze_policy: FreezePolicy::AllButLast,
        ..FinetuneConfig::default()
    };
    let out = finetune(enc.clone(), cls.clone(), &train, &val, &cfg).unwrap();
    let e = &out.model.encoder;
    let frozen = e.conv1 == enc.conv1 && e.conv2 == enc.conv2;
    let trained = e.conv3 != enc.conv3 && out.model.classifier != cls;

    let losses = [5.0, 4.0, 3.0, 3.1, 3.2, 3.3, 3.4, 3.5];
    let snapshots = std::cell::RefCell::new(Vec::new());
    let mut monitor = |epoch: usize, e: &EncoderParams, c: &ClassifierParams| {
        snapshots.borrow_mut().push((e.clone(), c.clone()));
        Ok(losses[epoch - 1])
    };
    let cfg = FinetuneConfig {
        epochs: 30,
        patience: 5,
        lr: 1e-3,
        ..FinetuneConfig::default()
    };
    let stop = finetune_with_monitor(enc, cls, &train, &val, &cfg, &mut monitor).unwrap();
    let snaps = snapshots.borrow();
    let restored = snaps.len() == 8 && stop.model.encoder == snaps[2].0 && stop.model.classifier == snaps[2].1;
    verdict(
        frozen && trained && stop.epochs_run == 8 && stop.best_epoch == 3 && restored,
        format!(
            "conv1/conv2 unchanged: {frozen}, conv3+classifier updated: {trained}; stopped after epoch {}, best epoch {}, epoch-3 weights restored: {restored}",
            stop.epochs_run, stop.best_epoch
        ),
    )
}

fn criterion_10() -> Verdict {
    let base = 0.004;
    let total = 31 * 200;
    let first = cosine_lr(0, total, base).unwrap();
    let last = cosine_lr(total, total, base).unwrap();
    let lrs: Vec<f64> = (0..=total).map(|s| cosine_lr(s, total, base).unwrap()).collect();
    let monotone = lrs.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        (first - base).abs() <= 1e-12 && last.abs() <= 1e-12 && monotone,
        format!("lr(0) = {first}, lr({total}) = {last:.1e}, non-increasing: {monotone}"),
    )
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Verdict {
    let Some(root) = std::env::var_os("MMFIT_ROOT") else {
        return Skip("MMFIT_ROOT not set; MM-Fit not available".into());
    };
    let cfg = MmfitConfig {
        root: PathBuf::from(root),
        ..MmfitConfig::default()
    };
    match adapt_mmfit(&cfg) {
        Ok(ds) => {
            let target = 29_175.0;
            let dev = (ds.len() as f64 - target) / target;
            verdict(dev.abs() <= 0.02, format!("{} windows ({:+.2}% from 29175)", ds.len(), 100.0 * dev))
        }
        Err(e) => Fail(format!("ingest failed: {e}")),
    }
}

fn main() {
    let strict = std::env::var("LRCL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let runs = tempfile::tempdir().expect("tempdir");
    let (a, b, scratch) = (runs.path().join("a"), runs.path().join("b"), runs.path().join("scratch"));
    for d in [&a, &b, &scratch] {
        std::fs::create_dir_all(d).unwrap();
    }

    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut report = |n: usize, v: Verdict| {
        let (tag, detail) = match &v {
            Pass(d) => ("PASS", d),
            Fail(d) => ("FAIL", d),
            Skip(d) => ("SKIP", d),
        };
        println!("criterion {n:>2}: {tag}  {detail}");
        results.push((n, v));
    };
    let only: Option<Vec<usize>> = std::env::var("LRCL_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    if wanted(1) {
        report(1, criterion_1());
    }
    if wanted(2) {
        report(2, criterion_2());
    }
    if wanted(3) || wanted(4) {
        let (c3, c4) = criteria_3_and_4();
        report(3, c3);
        report(4, c4);
    }
    if wanted(5) {
        report(5, criterion_5());
    }
    if wanted(6) {
        report(6, criterion_6());
    }
    if wanted(7) || wanted(8) {
        report(7, criterion_7(&a, &b));
        report(8, criterion_8(&a, &scratch));
    }
    if wanted(9) {
        report(9, criterion_9());
    }
    if wanted(10) {
        report(10, criterion_10());
    }
    if wanted(11) {
        report(11, criterion_11());
    }

    let count = |f: fn(&Verdict) -> bool| results.iter().filter(|(_, v)| f(v)).count();
    let failed = count(|v| matches!(v, Fail(_)));
    println!(
        "acceptance: {} passed, {failed} failed, {} skipped",
        count(|v| matches!(v, Pass(_))),
        count(|v| matches!(v, Skip(_)))
    );
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
