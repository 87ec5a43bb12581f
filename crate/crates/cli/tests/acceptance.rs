//! Acceptance suite: one PASS/FAIL line per criterion. Runs every criterion
//! even after a failure and exits non-zero if any failed.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use resamplab::analysis::{decompose, identity_residual, PairedPerformanceSample};
use resamplab::combinatorics::{pmf_unseen_count, verify_identities, ExactRational, VerifyOptions};
use resamplab::estimators::*;
use resamplab::resampling::{decode_multiset, random_permutation, SamplingModel};
use resamplab::rng::{derive_seed, stream};
use resamplab::simlab::{
    gen_multinormal, run_ratio_curve, run_weak_correlation, true_conditional_performance, MultinormalSpec,
    PerformanceMetric, RatioCurveConfig, Role, WeakCorrConfig, WeakCorrOutcome,
};
use resamplab::{StratifiedDataset, Trainer, TrainerSpec, TrainingSet};

const NM: TrainerSpec = TrainerSpec::NearestMean;
const LDA: TrainerSpec = TrainerSpec::Lda { ridge: 1e-6 };
const DROP: CoveragePolicy = CoveragePolicy::DropAndCount;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn pick(seed: u64, tag: &str, i: u64, choices: &[usize]) -> usize {
    choices[(derive_seed(seed, tag, i) % choices.len() as u64) as usize]
}

fn unit(seed: u64, tag: &str, i: u64) -> f64 {
    (derive_seed(seed, tag, i) >> 11) as f64 / (1u64 << 53) as f64
}

fn divisors(n: usize) -> Vec<usize> {
    (2..=n).filter(|k| n.is_multiple_of(*k)).collect()
}

fn random_dataset(i: u64, n1: usize, n2: usize) -> StratifiedDataset {
    let p = pick(1, "p", i, &[1, 2, 3]);
    let delta = 0.3 + 1.5 * unit(1, "delta", i);
    gen_multinormal(&MultinormalSpec::new(p, delta, n1, n2).unwrap(), derive_seed(1, "data", i)).unwrap()
}

// 1 -------------------------------------------------------------------------

fn variant_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..200u64 {
        let k = pick(2, "k", i, &[3, 4, 6]);
        let n = k * pick(2, "mult", i, &(12usize.div_ceil(k)..=60 / k).collect::<Vec<_>>());
        let n1 = n / 2;
        let ds = random_dataset(i, n1, n - n1);
        let trainer = if i % 2 == 0 { NM } else { LDA };
        let perm = random_permutation(n, &mut stream(3, "perm", i));
        let m = 2 + (i as usize % 9);
        let k1 = pick(4, "k1", i, &divisors(n1));
        let k2 = pick(4, "k2", i, &divisors(n - n1));
        let pairs = [
            (
                err_cvk(&ds, &trainer, 0.0, k, Variant::Pooled, Some(&perm)),
                err_cvk(&ds, &trainer, 0.0, k, Variant::Partitioned, Some(&perm)),
            ),
            (
                err_cvkr(&ds, &trainer, 0.0, k, m, i, Variant::Pooled),
                err_cvkr(&ds, &trainer, 0.0, k, m, i, Variant::Partitioned),
            ),
            (
                auc_cvk(&ds, &trainer, k1, k2, Variant::Pooled, None),
                auc_cvk(&ds, &trainer, k1, k2, Variant::Partitioned, None),
            ),
            (
                auc_cvkr(&ds, &trainer, k1, k2, m.min(4), i, Variant::Pooled),
                auc_cvkr(&ds, &trainer, k1, k2, m.min(4), i, Variant::Partitioned),
            ),
        ];
        for (a, b) in pairs {
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max((a.value - b.value).abs());
                    checked += 1;
                }
                (a, b) => return outcome(false, format!("dataset {i}: estimator error {:?} / {:?}", a.err(), b.err())),
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checked} pairs over 200 datasets, max |pooled - partitioned| = {worst:e}"))
}

// 2 -------------------------------------------------------------------------

fn special_case_collapse() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let n1 = pick(5, "n1", i, &[3, 4, 5, 6]);
        let n2 = pick(5, "n2", i, &[3, 4, 5, 6]);
        let ds = random_dataset(1000 + i, n1, n2);
        let trainer = if i % 2 == 0 { NM } else { LDA };
        let cvn = err_cvn(&ds, &trainer, 0.0).unwrap().value;
        for v in [Variant::Pooled, Variant::Partitioned] {
            worst = worst.max((err_cvk(&ds, &trainer, 0.0, n1 + n2, v, None).unwrap().value - cvn).abs());
            let a = auc_cvk(&ds, &trainer, n1, n2, v, None).unwrap().value;
            worst = worst.max((a - auc_cvn(&ds, &trainer).unwrap().value).abs());
        }
    }
    outcome(worst <= 1e-12, format!("50 datasets, max deviation {worst:e}"))
}

// 3 -------------------------------------------------------------------------

fn non_equivalence_witnesses() -> Outcome {
    let mut cvkm = None;
    let mut lpobs = None;
    for seed in 0..50u64 {
        let ds = random_dataset(2000 + seed, 10, 10);
        if cvkm.is_none() {
            let a = err_cvkm(&ds, &LDA, 0.0, 5, 50, seed, Variant::Pooled, DROP);
            let b = err_cvkm(&ds, &LDA, 0.0, 5, 50, seed, Variant::Partitioned, DROP);
            if let (Ok(a), Ok(b)) = (a, b) {
                if (a.value - b.value).abs() > 1e-6 {
                    cvkm = Some((seed, (a.value - b.value).abs()));
                }
            }
        }
        if lpobs.is_none() {
            let a = auc_lpobs(&ds, &LDA, 50, seed, SamplingModel::Ordered, Variant::Pooled, DROP).unwrap();
            let b = auc_lpobs(&ds, &LDA, 50, seed, SamplingModel::Ordered, Variant::Partitioned, DROP).unwrap();
            if (a.value - b.value).abs() > 1e-6 {
                lpobs = Some((seed, (a.value - b.value).abs()));
            }
        }
    }
    outcome(cvkm.is_some() && lpobs.is_some(), format!("CVKM M=50 witness {cvkm:?}; LPOBS B=50 witness {lpobs:?}"))
}

// 4 -------------------------------------------------------------------------

fn exact_combinatorics() -> Outcome {
    let t = Instant::now();
    let report = verify_identities(200, VerifyOptions::default());
    let elapsed = t.elapsed();
    let failed = report.failures().count();
    outcome(
        failed == 0 && elapsed < Duration::from_secs(30),
        format!("{} exact checks for 2 <= n <= 200, {failed} failed, {:.1}s", report.checks.len(), elapsed.as_secs_f64()),
    )
}

// 5 -------------------------------------------------------------------------

/// Visits every ascending `n`-subset of `0..2n-1`.
fn for_each_subset(n: usize, mut visit: impl FnMut(&[usize])) {
    let top = 2 * n - 1;
    let mut s: Vec<usize> = (0..n).collect();
    loop {
        visit(&s);
        let Some(i) = (0..n).rev().find(|&i| s[i] < top - n + i) else { return };
        s[i] += 1;
        for j in i + 1..n {
            s[j] = s[j - 1] + 1;
        }
    }
}

fn enumeration_oracle() -> Outcome {
    for n in 1..=6usize {
        let mut counts = vec![0u64; n + 1];
        let mut total = 0u64;
        for_each_subset(n, |s| {
            let c = decode_multiset(n, s).unwrap();
            counts[c.iter().filter(|&&x| x == 0).count()] += 1;
            total += 1;
        });
        for (k, &c) in counts.iter().enumerate() {
            let exact = pmf_unseen_count(n as u64, n as u64, k as i64);
            if ExactRational::new(c, total) != exact {
                return outcome(false, format!("n={n}, k={k}: enumerated {c}/{total} vs pmf {exact}"));
            }
        }
    }
    outcome(true, "sampler decoding over all subsets reproduces the pmf exactly for n <= 6")
}

// 6 -------------------------------------------------------------------------

fn ratio_curve() -> Outcome {
    let multiset = RatioCurveConfig {
        n1_grid: vec![5],
        trainer: LDA,
        b: 50_000,
        model: SamplingModel::UnorderedMultiset,
        replicates: 100,
        th: 0.0,
        seed: 6,
    };
    let t = Instant::now();
    let m = &run_ratio_curve(&multiset).unwrap()[0];
    let ordered = RatioCurveConfig {
        n1_grid: vec![5, 10, 20, 50],
        b: 200,
        model: SamplingModel::Ordered,
        ..multiset.clone()
    };
    let rows = run_ratio_curve(&ordered).unwrap();
    let elapsed = t.elapsed();
    let target = 18.0 / 19.0;
    let multiset_ok = (m.ratio_empirical - target).abs() <= 0.02;
    let ordered_ok = rows.iter().all(|r| r.ratio_empirical.is_finite() && r.ratio_empirical > 0.8 && r.ratio_empirical < 1.05);
    let curve: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.n1, r.ratio_empirical)).collect();
    outcome(
        multiset_ok && ordered_ok && elapsed < Duration::from_secs(300),
        format!(
            "multiset n1=5 ratio {:.4} (target {target:.4} +/- 0.02); ordered B=200 [{}]; {:.0}s",
            m.ratio_empirical,
            curve.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// 7, 9, 10 ------------------------------------------------------------------

fn campaign(n1: usize, seed: u64) -> WeakCorrOutcome {
    let spec = MultinormalSpec::new(5, 0.8, n1, n1).unwrap();
    run_weak_correlation(&WeakCorrConfig::new(spec, seed)).unwrap()
}

fn in_band(x: f64, center: f64, tol: f64) -> bool {
    (x - center).abs() <= tol
}

fn rms_gap(o: &WeakCorrOutcome) -> f64 {
    let r = o.row.role(Role::Shat);
    (r.rms_cond - r.rms_mean).abs() / r.rms_mean
}

fn describe(o: &WeakCorrOutcome) -> String {
    let (s, sb, sh) = (o.row.role(Role::S), o.row.role(Role::Sbar), o.row.role(Role::Shat));
    format!(
        "n1=n2={}: E S {:.4} (sd {:.4}), E Sbar {:.4}, E Shat {:.4}, rho {:.4}, RMS(Shat,S) {:.4}, RMS(Shat,ES) {:.4}",
        o.row.n1,
        s.mean,
        s.sigma,
        sb.mean,
        sh.mean,
        sh.rho.unwrap_or(f64::NAN),
        sh.rms_cond,
        sh.rms_mean
    )
}

fn table1_replication(total: &WeakCorrOutcome, per_class: &WeakCorrOutcome, elapsed: Duration) -> (Outcome, usize) {
    let candidates = [("n = n1 + n2", total), ("n = n1 = n2", per_class)];
    let matching: Vec<_> = candidates.iter().filter(|(_, o)| in_band(o.row.role(Role::S).mean, 0.618, 0.025)).collect();
    let chosen = matching.first().copied().unwrap_or_else(|| {
        candidates
            .iter()
            .min_by(|a, b| {
                let d = |o: &WeakCorrOutcome| (o.row.role(Role::S).mean - 0.618).abs();
                d(a.1).total_cmp(&d(b.1))
            })
            .unwrap()
    });
    let o = chosen.1;
    let (sb, sh) = (o.row.role(Role::Sbar), o.row.role(Role::Shat));
    let rho = sh.rho.unwrap_or(f64::NAN);
    let checks = [
        ("E S", !matching.is_empty()),
        ("E Sbar", in_band(sb.mean, 0.890, 0.04)),
        ("E Shat", in_band(sh.mean, 0.591, 0.04)),
        ("rho", in_band(rho, 0.255, 0.12)),
        ("RMS(Shat,S)", (0.07..=0.13).contains(&sh.rms_cond)),
        ("RMS(Shat,ES)", (0.07..=0.13).contains(&sh.rms_mean)),
        ("RMS ratio", rms_gap(o) < 0.15),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let pass = failed.is_empty() && elapsed < Duration::from_secs(1200);
    let detail = format!(
        "interpretation `{}` [{}]; other: [{}]; out of band: {:?}",
        chosen.0,
        describe(o),
        describe(if chosen.0 == candidates[0].0 { per_class } else { total }),
        failed
    );
    (outcome(pass, detail), o.row.n1)
}

fn asymptotic_anchor() -> Outcome {
    let spec = MultinormalSpec::new(5, 0.8, 100, 100).unwrap();
    let s: Vec<f64> = (0..1000u64)
        .map(|t| {
            let seed = derive_seed(8, "trial", t);
            let train = gen_multinormal(&spec, derive_seed(seed, "train", 0)).unwrap();
            let rule = LDA.train(&TrainingSet::full(&train)).unwrap();
            true_conditional_performance(&rule, &spec, 1000, derive_seed(seed, "test", 0), PerformanceMetric::Auc).unwrap()
        })
        .collect();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    outcome(
        in_band(mean, 0.714, 0.01),
        format!("1000 trials, E S = {mean:.4} (target 0.714 +/- 0.01; Bayes AUC {:.4})", spec.population_auc()),
    )
}

fn identity_check(campaigns: &[&WeakCorrOutcome]) -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..1000u64 {
        let t = 2 + (derive_seed(9, "len", i) % 200) as usize;
        let s: Vec<f64> = (0..t).map(|j| unit(9, "s", i * 1000 + j as u64)).collect();
        let sh: Vec<f64> = (0..t).map(|j| 3.0 * unit(9, "sh", i * 1000 + j as u64) - 1.0).collect();
        worst = worst.max(identity_residual(&PairedPerformanceSample::new(s, sh).unwrap()).unwrap());
    }
    let mut worst_campaign = 0.0f64;
    for o in campaigns {
        let s: Vec<f64> = o.triples.iter().map(|t| t.s).collect();
        for column in [|t: &resamplab::simlab::Triple| t.sbar, |t: &resamplab::simlab::Triple| t.shat] {
            let v: Vec<f64> = o.triples.iter().map(column).collect();
            let d = decompose(&PairedPerformanceSample::new(s.clone(), v).unwrap());
            worst_campaign = worst_campaign.max(d.residual.map_or(f64::INFINITY, f64::abs));
        }
    }
    outcome(
        worst <= 1e-12 && worst_campaign <= 1e-12,
        format!("random pairs max residual {worst:e}; {} campaign outputs max residual {worst_campaign:e}", campaigns.len() * 2),
    )
}

fn weak_correlation_grid(rows: &[&WeakCorrOutcome]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for o in rows {
        let sh = o.row.role(Role::Shat);
        let rho = sh.rho.unwrap_or(f64::NAN);
        let gap = rms_gap(o);
        ok &= rho < 0.45 && gap < 0.15;
        parts.push(format!("n1={}: rho {rho:.3}, rms gap {:.1}%", o.row.n1, 100.0 * gap));
    }
    outcome(ok, parts.join("; "))
}

// 11 ------------------------------------------------------------------------

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_multinormal(&MultinormalSpec::new(2, 1.0, 8, 8).unwrap(), 11).unwrap();
    let mut csv = Vec::new();
    data.write_csv(&mut csv).unwrap();
    fs::write(dir.path().join("data.csv"), csv).unwrap();
    let pairs: String = (0..40)
        .map(|i| format!("{},{}\n", 0.6 + 0.1 * (i as f64 * 0.7).sin(), 0.58 + 0.08 * (i as f64 * 1.3).cos()))
        .collect();
    fs::write(dir.path().join("pairs.csv"), format!("s,s_hat\n{pairs}")).unwrap();
    let configs = [
        ("estimate", "seed = 4\noutput_dir = \"est\"\n[estimate]\ndata = \"data.csv\"\n[estimator]\nversion = \"LOOB\"\nvariant = \"Pooled\"\nmetric = \"AUC\"\nb = 40\n"),
        ("estimate", "seed = 4\noutput_dir = \"cvkm\"\n[estimate]\ndata = \"data.csv\"\n[estimator]\nversion = \"CVKM\"\nvariant = \"Pooled\"\nmetric = \"Error\"\nk = 4\nm = 30\n"),
        ("simulate", "seed = 4\noutput_dir = \"sim\"\n[simulate]\np = 2\ndelta = 0.8\nn1 = 8\nn2 = 8\ntrials = 20\ntest_per_class = 200\n[estimator]\nversion = \"LOOB\"\nvariant = \"Partitioned\"\nmetric = \"AUC\"\nb = 20\n"),
        ("ratio-curve", "seed = 4\noutput_dir = \"ratio\"\n[ratio_curve]\nn1_grid = [5, 8]\nb = 30\nreplicates = 5\n"),
        ("verify", "output_dir = \"verify\"\n[verify]\nn_max = 30\n"),
        ("decompose", "output_dir = \"dec\"\n[decompose]\ninput = \"pairs.csv\"\n"),
    ];
    let snapshot = |sub: &str| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(dir.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let mut compared = 0;
    for (i, (sub, cfg)) in configs.iter().enumerate() {
        let cfg_path = dir.path().join(format!("run{i}.toml"));
        fs::write(&cfg_path, cfg).unwrap();
        let out_dir = cfg.split("output_dir = \"").nth(1).unwrap().split('"').next().unwrap();
        let mut runs = Vec::new();
        for _ in 0..2 {
            let o = Command::new(env!("CARGO_BIN_EXE_resamplab")).arg(sub).arg(&cfg_path).output().unwrap();
            if !o.status.success() {
                return outcome(false, format!("{sub} failed: {}", String::from_utf8_lossy(&o.stderr)));
            }
            runs.push((o.stdout, snapshot(out_dir)));
        }
        if runs[0] != runs[1] {
            return outcome(false, format!("{sub} ({out_dir}) differed between identical runs"));
        }
        compared += runs[0].1.len();
    }
    outcome(true, format!("{} runs repeated; {compared} output files byte-identical", configs.len()))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, Duration)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let d = t.elapsed();
        println!("{} [{id}] {name}: {} ({:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, d.as_secs_f64());
        results.push((id, name, o, d));
    };
    record(1, "variant equivalence", &mut variant_equivalence);
    record(2, "special-case collapse", &mut special_case_collapse);
    record(3, "non-equivalence witnesses", &mut non_equivalence_witnesses);
    record(4, "exact combinatorics", &mut exact_combinatorics);
    record(5, "enumeration oracle", &mut enumeration_oracle);
    record(6, "bootstrap ratio curve", &mut ratio_curve);

    let t = Instant::now();
    let total_n = campaign(10, 7);
    let per_class_n = campaign(20, 7);
    let elapsed = t.elapsed();
    let (table1, chosen_n1) = table1_replication(&total_n, &per_class_n, elapsed);
    record(7, "Table-1 replication (n=20 row)", &mut || Outcome { pass: table1.pass, detail: table1.detail.clone() });
    record(8, "asymptotic anchor", &mut asymptotic_anchor);

    // Remaining grid rows under the interpretation chosen above.
    let scale = chosen_n1 as f64 / 20.0;
    let n40 = campaign((40.0 * scale).round() as usize, 10);
    let n100 = campaign((100.0 * scale).round() as usize, 10);
    let n20 = if chosen_n1 == 10 { &total_n } else { &per_class_n };
    let all = [&total_n, &per_class_n, &n40, &n100];
    record(9, "decomposition identity", &mut || identity_check(&all));
    record(10, "weak correlation across n-grid", &mut || weak_correlation_grid(&[n20, &n40, &n100]));
    record(11, "CLI determinism", &mut cli_determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed; failed: {failed:?}", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
