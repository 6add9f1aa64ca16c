//! Acceptance suite on the Adult data. Prints one line per criterion and
//! exits nonzero if any hard criterion fails. Soft bands are reported but
//! do not affect the exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use alpp_core::experiment::{oracle_report, run_experiment, run_strategy, RepetitionSetup};
use alpp_core::linear_model::loss_and_gradient;
use alpp_core::rationale::{kendall_tau, WeightVector};
use alpp_core::sampling::kl_divergence;
use alpp_core::dataset::load_dataset;
use alpp_core::{ExperimentConfig, LinearModel, Ranking, Strategy};
use alpp_service::{AppState, CreatedSession, MetricsDocument, QueryDocument, Status};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const ORACLE_ACCURACY: f64 = 0.8422;
const ORACLE_ACCURACY_TOL: f64 = 0.02;
const ORACLE_F1: f64 = 0.65;
const ORACLE_F1_TOL: f64 = 0.05;
const ORACLE_BUDGET: Duration = Duration::from_secs(120);

const PAPER_ALPP_F1: f64 = 0.594;
const PAPER_QBC_F1: f64 = 0.568;
const F1_BAND: f64 = 0.04;
const SIGNIFICANCE: f64 = 0.05;
const SIMULATION_BUDGET: Duration = Duration::from_secs(30 * 60);

const ALPP_MAX_QUERIES: f64 = 20.0;
const QUERY_GAP: f64 = 5.0;

const TAU_RANDOM_PAIRS: usize = 1000;
const TAU_TOL: f64 = 1e-12;
const KL_EQUAL_TOL: f64 = 1e-12;
const WEIGHT_SUM_TOL: f64 = 1e-9;
const GRADIENT_REL_TOL: f64 = 1e-5;

#[derive(Default)]
struct Report {
    hard_failures: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, id: &'static str, hard: bool, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let kind = if hard { "" } else { " (soft)" };
        let mut err = std::io::stderr();
        let _ = writeln!(err, "{id}{kind}: {verdict} {detail}");
        if hard && !pass {
            self.hard_failures.push(id);
        }
    }
}

fn adult_config() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/adult.toml");
    ExperimentConfig::load(path).expect("configs/adult.toml")
}

fn a1(report: &mut Report, cfg: &ExperimentConfig) {
    let start = Instant::now();
    let reports = oracle_report(cfg).expect("oracle report");
    let elapsed = start.elapsed();
    let n = reports.len() as f64;
    let acc = reports.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let f1 = reports.iter().map(|r| r.f1).sum::<f64>() / n;
    let pass = (acc - ORACLE_ACCURACY).abs() <= ORACLE_ACCURACY_TOL
        && (f1 - ORACLE_F1).abs() <= ORACLE_F1_TOL
        && elapsed < ORACLE_BUDGET;
    report.line(
        "A1",
        true,
        pass,
        format!(
            "oracle accuracy {:.2}% (want {:.2} ± {:.1}), F1 {:.4} (want {} ± {}), mean of {} splits, {:.1}s",
            acc * 100.0,
            ORACLE_ACCURACY * 100.0,
            ORACLE_ACCURACY_TOL * 100.0,
            f1,
            ORACLE_F1,
            ORACLE_F1_TOL,
            reports.len(),
            elapsed.as_secs_f64()
        ),
    );
}

fn a2_a3(report: &mut Report, cfg: &ExperimentConfig) {
    let start = Instant::now();
    let output = run_experiment(cfg).expect("simulation");
    let elapsed = start.elapsed();
    let r = &output.result;
    let alpp = r.strategy(Strategy::Alpp).expect("alpp summary");
    let qbc = r.strategy(Strategy::Qbc).expect("qbc summary");
    let cmp = r.comparison(Strategy::Alpp, Strategy::Qbc).expect("alpp vs qbc");
    let t = cmp.per_query.expect("per-query t-test");
    let per_rep = cmp
        .per_repetition
        .map(|t| format!("{:.3}", t.p_value))
        .unwrap_or_else(|| "n/a".into());

    report.line(
        "A2",
        true,
        alpp.mean_f1 > qbc.mean_f1 && t.p_value < SIGNIFICANCE && elapsed < SIMULATION_BUDGET,
        format!(
            "mean F1 alpp {:.4} vs qbc {:.4}, paired t over {} queries t = {:.3}, p = {:.3e} (want alpp > qbc, p < {}); per-repetition p = {}; {:.0}s",
            alpp.mean_f1,
            qbc.mean_f1,
            r.queries,
            t.statistic,
            t.p_value,
            SIGNIFICANCE,
            per_rep,
            elapsed.as_secs_f64()
        ),
    );
    report.line(
        "A2",
        false,
        (alpp.mean_f1 - PAPER_ALPP_F1).abs() <= F1_BAND && (qbc.mean_f1 - PAPER_QBC_F1).abs() <= F1_BAND,
        format!(
            "alpp {:.4} vs {PAPER_ALPP_F1} ± {F1_BAND}, qbc {:.4} vs {PAPER_QBC_F1} ± {F1_BAND}",
            alpp.mean_f1, qbc.mean_f1
        ),
    );

    let qa = alpp.queries_to_threshold.mean_queries;
    let qq = qbc.queries_to_threshold.mean_queries;
    report.line(
        "A3",
        true,
        qa < qq,
        format!(
            "mean queries to F1 {}: alpp {:.1} vs qbc {:.1} (want alpp strictly lower)",
            cfg.threshold, qa, qq
        ),
    );
    report.line(
        "A3",
        false,
        qa <= ALPP_MAX_QUERIES && qq >= qa + QUERY_GAP,
        format!("want alpp <= {ALPP_MAX_QUERIES} and qbc >= alpp + {QUERY_GAP}"),
    );
}

fn a4(report: &mut Report, cfg: &ExperimentConfig) {
    let mut uniform = cfg.clone();
    uniform.variants.force_uniform_weights = true;
    let (ds, _) = load_dataset(&uniform.dataset.path, &uniform.dataset.schema).expect("dataset");
    let mut mismatched = Vec::new();
    for (rep, &seed) in uniform.seeds().iter().enumerate() {
        let setup = RepetitionSetup::prepare(&uniform, &ds, rep, seed).expect("setup");
        let qbc = run_strategy(&uniform, &setup, Strategy::Qbc).expect("qbc");
        let alpp = run_strategy(&uniform, &setup, Strategy::Alpp).expect("alpp");
        if qbc.points != alpp.points {
            mismatched.push(seed);
        }
    }
    report.line(
        "A4",
        true,
        mismatched.is_empty(),
        format!(
            "forced-uniform alpp vs qbc over {} seeds x {} queries: {} seeds differ {:?}",
            uniform.seeds().len(),
            uniform.queries,
            mismatched.len(),
            mismatched
        ),
    );
}

/// (C - D) / (n (n - 1) / 2) over the items of `a`, with `b` restricted to them.
fn brute_force_tau(a: &[usize], b: &[usize]) -> f64 {
    let restricted: Vec<usize> = b.iter().copied().filter(|x| a.contains(x)).collect();
    let pos = |r: &[usize], x: usize| r.iter().position(|&y| y == x).unwrap() as i64;
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let s = (pos(a, a[i]) - pos(a, a[j])) * (pos(&restricted, a[i]) - pos(&restricted, a[j]));
            if s > 0 {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c - d) as f64 / (n * (n - 1) / 2) as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for x in 0..n {
            if !prefix.contains(&x) {
                prefix.push(x);
                go(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), n, &mut out);
    out
}

fn a5(report: &mut Report) {
    let mut exhaustive = 0usize;
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        let perms = permutations(n);
        for a in &perms {
            for b in &perms {
                let got = kendall_tau(&Ranking::new(a.clone(), n).unwrap(), &Ranking::new(b.clone(), n).unwrap()).unwrap();
                worst = worst.max((got - brute_force_tau(a, b)).abs());
                exhaustive += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut items: Vec<usize> = (0..8).collect();
    for _ in 0..TAU_RANDOM_PAIRS {
        items.shuffle(&mut rng);
        let k = rng.random_range(1..=8);
        let a = items[..k].to_vec();
        let mut b = items.clone();
        b.shuffle(&mut rng);
        let got = kendall_tau(&Ranking::new(a.clone(), 8).unwrap(), &Ranking::new(b.clone(), 8).unwrap()).unwrap();
        worst = worst.max((got - brute_force_tau(&a, &b)).abs());
    }
    report.line(
        "A5",
        true,
        worst <= TAU_TOL,
        format!(
            "{exhaustive} exhaustive pairs (n <= 5) + {TAU_RANDOM_PAIRS} random top-k pairs (n = 8), max |tau - brute force| = {worst:e}"
        ),
    );
}

fn a6(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let mut kl_ok = true;
    for _ in 0..10_000 {
        let p: f64 = rng.random_range(0.0..=1.0);
        let q: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let d = kl_divergence(&[1.0 - p, p], &[1.0 - q, q]).unwrap();
        let same = kl_divergence(&[1.0 - q, q], &[1.0 - q, q]).unwrap();
        kl_ok &= d >= 0.0 && same.abs() <= KL_EQUAL_TOL;
        if (p - q).abs() > 1e-6 {
            kl_ok &= d > KL_EQUAL_TOL;
        }
    }

    let mut weights_ok = true;
    for _ in 0..2_000 {
        let k = rng.random_range(2..=12);
        let taus: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let w = WeightVector::from_mean_taus(&taus);
        let s = w.as_slice();
        weights_ok &= s.iter().all(|&x| x >= 0.0) && (s.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL;
        for i in 0..k {
            for j in 0..k {
                if taus[i] >= taus[j] {
                    weights_ok &= s[i] >= s[j];
                }
            }
        }
    }

    let mut worst_rel: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=20);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b = rng.random_range(-2.0..2.0);
        let l2 = rng.random_range(0.0..0.1);
        let model = LinearModel::new(w.clone(), b).unwrap();
        let (_, grad, _) = loss_and_gradient(&model, &refs, &labels, l2).unwrap();
        let h = 1e-5;
        for j in 0..d {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            let f = |v: Vec<f64>| loss_and_gradient(&LinearModel::new(v, b).unwrap(), &refs, &labels, l2).unwrap().0;
            let fd = (f(up) - f(down)) / (2.0 * h);
            let scale = grad[j].abs().max(fd.abs()).max(1e-3);
            worst_rel = worst_rel.max((grad[j] - fd).abs() / scale);
        }
    }

    report.line(
        "A6",
        true,
        kl_ok && weights_ok && worst_rel <= GRADIENT_REL_TOL,
        format!(
            "KL >= 0 and zero iff equal: {kl_ok}; weights valid and order-preserving: {weights_ok}; max relative gradient error {worst_rel:.2e} (want <= {GRADIENT_REL_TOL:e})"
        ),
    );
}

fn a7(report: &mut Report, cfg: &ExperimentConfig) {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut small = cfg.clone();
    small.repetitions = 3;
    small.queries = 25;
    small.seeds = None;
    let config_path = dir.path().join("determinism.toml");
    std::fs::write(&config_path, small.to_toml_string().expect("toml")).expect("write config");

    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_alpp"))
            .arg("simulate")
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .env("RUST_LOG", "warn")
            .stderr(Stdio::null())
            .status()
            .expect("run alpp");
        assert!(status.success(), "alpp simulate failed");
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let mut same = true;
    let mut sizes = Vec::new();
    for f in ["results.csv", "summary.json"] {
        let x = std::fs::read(a.join(f)).expect("read a");
        let y = std::fs::read(b.join(f)).expect("read b");
        sizes.push(format!("{f} {} bytes", x.len()));
        same &= x == y;
    }
    report.line(
        "A7",
        true,
        same,
        format!(
            "two `alpp simulate` runs ({} repetitions x {} queries x 3 strategies): byte-identical = {same} ({})",
            small.repetitions,
            small.queries,
            sizes.join(", ")
        ),
    );
}

async fn a8_session(cfg: &ExperimentConfig, strategy: Strategy, seed: u64) -> (Vec<(usize, usize, f64, f64)>, Vec<(usize, usize, f64, f64)>) {
    let (ds, _) = load_dataset(&cfg.dataset.path, &cfg.dataset.schema).expect("dataset");
    let setup = RepetitionSetup::prepare(cfg, &ds, 0, seed).expect("setup");
    let expected = run_strategy(cfg, &setup, strategy).expect("in-process run");
    let (pools, oracle) = (&setup.pools, &setup.oracle);
    let names = ds.schema().feature_names();

    let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await.expect("bind");
    let base = format!("http://{}", listener.local_addr().unwrap());
    let server = tokio::spawn(alpp_service::serve_listener(listener, AppState::in_memory(cfg.clone())));
    let client = reqwest::Client::new();

    let created: CreatedSession = client
        .post(format!("{base}/sessions"))
        .json(&json!({"strategy": strategy, "seed": seed}))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let mut query = created.query;
    let mut curve = Vec::new();
    while let Some(q) = query {
        let answer = oracle.answer(pools.train.row(q.instance_index), cfg.oracle_top_k).unwrap();
        let m: MetricsDocument = client
            .post(format!("{base}/sessions/{}/annotations", created.id))
            .json(&json!({
                "label": answer.label,
                "ranking": answer.ranking.names(&names),
                "query_number": q.query_number,
            }))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        query = if m.status == Status::Finished {
            None
        } else {
            let q: QueryDocument = client
                .get(format!("{base}/sessions/{}/query", created.id))
                .send()
                .await
                .unwrap()
                .json()
                .await
                .unwrap();
            Some(q)
        };
        curve = m.curve.iter().map(|p| (p.query, p.selected_index, p.f1, p.accuracy)).collect();
    }
    server.abort();
    let expected = expected
        .points
        .iter()
        .map(|p| (p.query, p.selected_index, p.f1, p.accuracy))
        .collect();
    (curve, expected)
}

fn a8(report: &mut Report, cfg: &ExperimentConfig) {
    let seed = cfg.seeds()[0];
    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let (served, expected) = runtime.block_on(a8_session(cfg, Strategy::Alpp, seed));
    let first_diff = served.iter().zip(&expected).position(|(a, b)| a != b);
    report.line(
        "A8",
        true,
        served == expected,
        format!(
            "HTTP session with scripted oracle, alpp seed {seed}: {} served points vs {} in-process, first difference at {:?}",
            served.len(),
            expected.len(),
            first_diff
        ),
    );
}

fn main() -> ExitCode {
    // Let `cargo test -- <filter>` runs for other targets skip this one.
    if std::env::args().skip(1).any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let cfg = adult_config();
    let mut report = Report::default();
    a5(&mut report);
    a6(&mut report);
    a1(&mut report, &cfg);
    a2_a3(&mut report, &cfg);
    a4(&mut report, &cfg);
    a7(&mut report, &cfg);
    a8(&mut report, &cfg);
    if report.hard_failures.is_empty() {
        let _ = writeln!(std::io::stderr(), "acceptance: all hard criteria passed");
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(std::io::stderr(), "acceptance: hard criteria failed: {:?}", report.hard_failures);
        ExitCode::FAILURE
    }
}
