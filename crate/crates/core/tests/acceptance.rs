//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use common::*;
use fbde::data::{generate_mixture, write_mixture_csv, CsvSpec, MixtureParams, RawTable};
use fbde::engine::{kl_or_infinite, FitConfig, LeveragingScheme, SchemeKind};
use fbde::guarantees::{
    dc_from_rr, delta_bounds, delta_upper, kl_drop_bound, sr_from_rr, verify_eo,
};
use fbde::pipeline::{run, FoldOutcome, RunConfig};
use fbde::tabular::{
    discrimination_control, joint_representation_rate, statistical_rate, AttributeSchema,
    TabularDensity,
};
use fbde::weak_learner::Regime;
use fbde::{BoostedDensity, ExpectationMode};

const EPS: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct SyntheticRuns {
    raw_rr: f64,
    exact7: Vec<FoldOutcome>,
    exact9: Vec<FoldOutcome>,
    relative7: Vec<FoldOutcome>,
    secs: f64,
}

fn synthetic_runs() -> SyntheticRuns {
    let start = Instant::now();
    let params = MixtureParams::default();
    assert_eq!(
        (params.mu, params.sigma, params.s, params.n),
        ([-0.5, 0.7], [0.4, 0.2], 0.9, 5000)
    );
    let points = generate_mixture(&params).unwrap();
    let ones = points.iter().filter(|p| p.a == 1).count() as f64;
    let zeros = points.len() as f64 - ones;
    let mut csv = Vec::new();
    write_mixture_csv(&points, &mut csv).unwrap();
    let table = RawTable::read(&csv[..]).unwrap();
    let spec = CsvSpec::new("synthetic.csv", "a");
    let fit = |scheme: LeveragingScheme| {
        let cfg = RunConfig {
            fit: FitConfig::new(10, scheme, 0),
            q0_smoothing: 1.0,
            folds: Some(5),
        };
        run(&table, &spec, &cfg).unwrap()
    };
    SyntheticRuns {
        raw_rr: zeros.min(ones) / zeros.max(ones),
        exact7: fit(LeveragingScheme::exact(0.7, LN_2).unwrap()),
        exact9: fit(LeveragingScheme::exact(0.9, LN_2).unwrap()),
        relative7: fit(LeveragingScheme::relative(0.7, LN_2).unwrap()),
        secs: start.elapsed().as_secs_f64(),
    }
}

fn final_rr(folds: &[FoldOutcome]) -> Vec<f64> {
    folds
        .iter()
        .map(|f| f.result.trace.final_row().unwrap().rr)
        .collect()
}

fn final_kl_test(folds: &[FoldOutcome]) -> Vec<f64> {
    folds
        .iter()
        .map(|f| f.result.trace.final_row().unwrap().kl_test.unwrap())
        .collect()
}

fn initial_kl_test(folds: &[FoldOutcome]) -> Vec<f64> {
    folds
        .iter()
        .map(|f| f.result.trace.kl_test_initial.unwrap())
        .collect()
}

fn criterion_1(r: &SyntheticRuns) -> Outcome {
    let raw_ok = (r.raw_rr - 0.111).abs() <= 0.005;
    let q0_ok = r
        .exact7
        .iter()
        .chain(&r.exact9)
        .chain(&r.relative7)
        .all(|f| {
            f.q0.representation_rate() == 1.0
                && f.result
                    .density
                    .prefix(0)
                    .representation_rate_via_normalizers()
                    .unwrap()
                    == 1.0
        });
    let rr7 = mean(&final_rr(&r.exact7));
    let rr9 = mean(&final_rr(&r.exact9));
    let kl_final = mean(&final_kl_test(&r.exact7));
    let kl_q0 = mean(&initial_kl_test(&r.exact7));
    let pass = raw_ok
        && q0_ok
        && (0.70..=0.80).contains(&rr7)
        && (0.90..=0.95).contains(&rr9)
        && kl_final < kl_q0
        && r.secs < 120.0;
    outcome(
        pass,
        format!(
            "raw RR {:.4}, Q0 RR exactly 1: {q0_ok}, final RR tau=0.7 {rr7:.4}, tau=0.9 {rr9:.4}, \
             test KL {kl_final:.4} vs Q0 {kl_q0:.4}, {:.1}s",
            r.raw_rr, r.secs
        ),
    )
}

fn criterion_2(r: &SyntheticRuns) -> Outcome {
    let rr = mean(&final_rr(&r.relative7));
    let kl_rel = mean(&final_kl_test(&r.relative7));
    let kl_exact = mean(&final_kl_test(&r.exact7));
    let train = |f: &[FoldOutcome]| {
        mean(
            &f.iter()
                .map(|o| o.result.trace.final_row().unwrap().kl_train.unwrap())
                .collect::<Vec<_>>(),
        )
    };
    let pass = (0.30..=0.45).contains(&rr) && kl_rel < kl_exact;
    outcome(
        pass,
        format!(
            "final RR {rr:.4} (floor {:.4}), test KL {kl_rel:.4} vs exact {kl_exact:.4} (train {:.4} vs {:.4})",
            0.7f64.powf(1.0 + 10f64.ln()),
            train(&r.relative7),
            train(&r.exact7)
        ),
    )
}

/// Adversarial fits shared by criteria 3, 4 and 8.
struct Trial {
    tau: f64,
    rounds: usize,
    p: fbde::tabular::Dataset,
    exact: BoostedDensity,
    exact_scheme: LeveragingScheme,
    relative: BoostedDensity,
    relative_scheme: LeveragingScheme,
}

fn adversarial_trials() -> Vec<Trial> {
    (0..200u64)
        .map(|i| {
            let mut r = rng(1000 + i);
            let tau = TAUS[(i % 3) as usize];
            let c = C_BOUNDS[r.gen_range(0..C_BOUNDS.len())];
            let rounds = r.gen_range(1..=30);
            let exact_scheme = LeveragingScheme::exact(tau, c).unwrap();
            let relative_scheme = LeveragingScheme::relative(tau, c).unwrap();
            // same population for both schemes: identical instance stream
            let (p, exact) = adversarial_fit(&mut r.clone(), exact_scheme, rounds, i);
            let (_, relative) = adversarial_fit(&mut r, relative_scheme, rounds, i);
            Trial {
                tau,
                rounds,
                p,
                exact,
                exact_scheme,
                relative,
                relative_scheme,
            }
        })
        .collect()
}

/// Worst margin `RR(Q_t) − bound(t)` over every prefix of every trial.
fn worst_slack(
    trials: &[Trial],
    pick: impl Fn(&Trial) -> (&BoostedDensity, LeveragingScheme),
) -> (f64, usize) {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for trial in trials {
        let (bd, scheme) = pick(trial);
        for t in 1..=trial.rounds {
            let rr = bd.prefix(t).representation_rate().unwrap();
            worst = worst.min(rr - scheme.rr_lower_bound(t));
            checked += 1;
        }
    }
    (worst, checked)
}

fn criterion_3(trials: &[Trial], secs: f64) -> Outcome {
    let (worst, checked) = worst_slack(trials, |t| (&t.exact, t.exact_scheme));
    let min_rr = trials
        .iter()
        .map(|t| t.exact.representation_rate().unwrap() - t.tau)
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst >= -EPS && secs < 30.0,
        format!("{} trials, {checked} prefixes, min RR - tau {min_rr:.3e}, worst prefix slack {worst:.3e}, {secs:.1}s", trials.len()),
    )
}

fn criterion_4(trials: &[Trial]) -> Outcome {
    let (worst, checked) = worst_slack(trials, |t| (&t.relative, t.relative_scheme));
    outcome(
        worst >= -EPS,
        format!(
            "{} trials, {checked} prefixes, worst slack over tau^(1+ln t) {worst:.3e}",
            trials.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_rr = 0.0f64;
    let mut worst_marg = 0.0f64;
    for i in 0..100u64 {
        let mut r = rng(5000 + i);
        let tau = TAUS[r.gen_range(0..3)];
        let c = C_BOUNDS[r.gen_range(0..C_BOUNDS.len())];
        let scheme = match i % 3 {
            0 => LeveragingScheme::exact(tau, c),
            1 => LeveragingScheme::relative(tau, c),
            _ => LeveragingScheme::constant(r.gen_range(0.05..0.6), tau, c),
        }
        .unwrap();
        let rounds = r.gen_range(1..=30);
        let (_, bd) = adversarial_fit(&mut r, scheme, rounds, i);
        let table = brute_force_table(&bd);
        let marg: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
        worst_rr =
            worst_rr.max((bd.representation_rate_via_normalizers().unwrap() - rr_of(&marg)).abs());
        // q_T(a) = q₀(a) Π Z_k(a) / Z_k from the frozen normalizers
        let groups = marg.len();
        for (a, &m) in marg.iter().enumerate() {
            let mut q = 1.0 / groups as f64;
            for round in bd.rounds() {
                q *= round.z_by_group[a] / round.z;
            }
            worst_marg = worst_marg.max((q - m).abs());
        }
    }
    outcome(
        worst_rr <= 1e-10 && worst_marg <= 1e-10,
        format!("100 stacks, max |RR normalizers - table| {worst_rr:.2e}, max |recursion - table| {worst_marg:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_exact = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..50u64 {
        let mut r = rng(6000 + i);
        let tau = TAUS[r.gen_range(0..3)];
        let scheme = if i % 2 == 0 {
            LeveragingScheme::exact(tau, LN_2)
        } else {
            LeveragingScheme::relative(tau, LN_2)
        }
        .unwrap();
        let rounds = r.gen_range(1..=20);
        let (_, bd) = adversarial_fit(&mut r, scheme, rounds, i);
        let nx = bd.schema().num_x_cells();
        let groups = bd.schema().num_groups();
        let g: Vec<f64> = (0..nx * groups).map(|_| r.gen_range(-1.0..1.0)).collect();
        let table = brute_force_table(&bd);
        let direct: f64 = (0..groups)
            .flat_map(|a| (0..nx).map(move |x| (a, x)))
            .map(|(a, x)| table[a][x] * g[x * groups + a])
            .sum();
        let exact = bd
            .expectation(|x, a| g[x * groups + a], ExpectationMode::Exact)
            .unwrap();
        worst_exact = worst_exact.max((exact.value - direct).abs());
        let mc = bd
            .expectation(
                |x, a| g[x * groups + a],
                ExpectationMode::MonteCarlo {
                    samples: 100_000,
                    seed: 60 + i,
                },
            )
            .unwrap();
        worst_z = worst_z.max((mc.value - direct).abs() / mc.std_error);
    }
    outcome(
        worst_exact <= 1e-10 && worst_z <= 3.0,
        format!("50 instances, max |exact - direct| {worst_exact:.2e}, max MC deviation {worst_z:.2} standard errors"),
    )
}

fn criterion_7(r: &SyntheticRuns) -> Outcome {
    let mut rounds = 0;
    let mut checked = 0;
    let mut regimes = [0usize; 3];
    let mut worst = f64::INFINITY;
    for fold in r.exact7.iter().chain(&r.exact9).chain(&r.relative7) {
        let trace = &fold.result.trace;
        let mut prev = trace.kl_train_initial.unwrap();
        for row in &trace.rows {
            rounds += 1;
            let kl = row.kl_train.unwrap();
            let regime = Regime::classify(row.gamma_p, row.gamma_q);
            regimes[match regime {
                Regime::Hbs => 0,
                Regime::Lbs => 1,
                Regime::Fail => 2,
            }] += 1;
            if regime == Regime::Hbs {
                let b = kl_drop_bound(row.theta, row.gamma_p, row.gamma_q).unwrap();
                if b.lambda > 0.0 {
                    checked += 1;
                    worst = worst.min((prev - kl) - b.bound);
                }
            }
            prev = kl;
        }
    }
    let pass = checked == 0 || worst >= -EPS;
    let slack = if checked == 0 {
        "n/a".to_string()
    } else {
        format!("{worst:.3e}")
    };
    outcome(
        pass,
        format!(
            "{rounds} rounds: {} HBS, {} LBS, {} outside the weak learning assumption; \
             {checked} rounds qualify, worst slack {slack}",
            regimes[0], regimes[1], regimes[2]
        ),
    )
}

fn delta_of(p: &TabularDensity, bd: &BoostedDensity) -> Option<f64> {
    let k0 = kl_or_infinite(p, &bd.initial().joint()).unwrap();
    let kt = kl_or_infinite(p, &bd.joint()).unwrap();
    (k0.is_finite() && kt.is_finite()).then_some(k0 - kt)
}

/// `p` restricted to the support of `Q₀` (shared by every `Q_t`), or `Q_T`
/// itself when nothing is left.
fn on_support(p: &TabularDensity, bd: &BoostedDensity) -> TabularDensity {
    let q0 = bd.initial().joint();
    let mass: Vec<f64> = p
        .mass()
        .iter()
        .zip(q0.mass())
        .map(|(&m, &q)| if q > 0.0 { m } else { 0.0 })
        .collect();
    if mass.iter().sum::<f64>() > 0.0 {
        TabularDensity::from_weights(p.schema().clone(), mass).unwrap()
    } else {
        bd.joint()
    }
}

fn criterion_8(r: &SyntheticRuns, trials: &[Trial]) -> Outcome {
    let mut models = 0;
    let mut skipped = 0;
    let mut worst = f64::INFINITY;
    let mut lowers = Vec::new();
    let runs = [
        (&r.exact7, 0.7, SchemeKind::Exact),
        (&r.exact9, 0.9, SchemeKind::Exact),
        (&r.relative7, 0.7, SchemeKind::Relative),
    ];
    for (folds, tau, kind) in runs {
        let scheme = LeveragingScheme::new(kind, tau, LN_2).unwrap();
        for f in folds.iter() {
            let p = TabularDensity::fit_empirical(&f.train, 0.0).unwrap();
            let d = delta_of(&p, &f.result.density).unwrap();
            models += 1;
            worst = worst.min(delta_upper(&scheme, 10) - d);
            let rows = &f.result.trace.rows;
            let gp = rows.iter().map(|r| r.gamma_p).fold(f64::INFINITY, f64::min);
            let gq = rows.iter().map(|r| r.gamma_q).fold(f64::INFINITY, f64::min);
            match delta_bounds(&scheme, 10, gp, gq) {
                Ok(b) => lowers.push(format!("{:.3}", b.lower)),
                Err(_) => lowers.push("n/a".into()),
            }
        }
    }
    for t in trials {
        let p = on_support(&TabularDensity::fit_empirical(&t.p, 0.0).unwrap(), &t.exact);
        for (bd, scheme) in [(&t.exact, t.exact_scheme), (&t.relative, t.relative_scheme)] {
            match delta_of(&p, bd) {
                Some(d) => {
                    models += 1;
                    worst = worst.min(delta_upper(&scheme, t.rounds) - d);
                }
                None => skipped += 1,
            }
        }
    }
    lowers.dedup();
    outcome(
        worst >= -EPS,
        format!(
            "{models} models, worst upper-bound slack {worst:.3e}, {skipped} skipped; lower bounds on synthetic folds: [{}]",
            lowers.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    // Equal opportunity: binary Y and A, random feature, random predictor.
    let mut eo_tables = 0;
    let mut eo_premise = 0;
    let mut eo_bad = 0;
    let mut r = rng(9000);
    while eo_premise < 1000 && eo_tables < 200_000 {
        let nx = r.gen_range(1..=3);
        let schema =
            AttributeSchema::categorical(&[("x", nx), ("y", 2), ("a", 2)], 2, Some(1)).unwrap();
        let density = random_density(&mut r, &schema);
        let sharp = r.gen_range(0.0..6.0);
        let predictor: Vec<f64> = (0..schema.num_cells())
            .map(|_| 1.0 - r.gen::<f64>().powf(1.0 + sharp) * r.gen::<f64>())
            .collect();
        let rho = r.gen::<f64>();
        let Ok(rep) = verify_eo(&density, &predictor, rho) else {
            continue;
        };
        eo_tables += 1;
        eo_premise += rep.premise as usize;
        eo_bad += !rep.holds as usize;
    }
    // Statistical rate and discrimination control: 𝒴×𝒜 tables with joint RR ≥ τ.
    let mut sr_tables = 0;
    let mut sr_bad = 0;
    let mut dc_bad = 0;
    let mut r = rng(9100);
    while sr_tables < 1000 {
        let ny = r.gen_range(2..=4);
        let na = r.gen_range(2..=4);
        let with_x = r.gen_bool(0.5);
        let schema = if with_x {
            AttributeSchema::categorical(&[("y", ny), ("x", 2), ("a", na)], 2, Some(0)).unwrap()
        } else {
            AttributeSchema::categorical(&[("y", ny), ("a", na)], 1, Some(0)).unwrap()
        };
        let tau = r.gen_range(0.05..1.0);
        // every (y, a) cell mass within a factor 1/τ of the others; vertices included
        let pair: Vec<f64> = (0..ny * na)
            .map(|_| match r.gen_range(0..4) {
                0 => 1.0,
                1 => 1.0 / tau,
                _ => r.gen_range(1.0..=1.0 / tau),
            })
            .collect();
        let mut mass = vec![0.0; schema.num_cells()];
        for (cell, m) in mass.iter_mut().enumerate() {
            let coords = schema.cell_coords(cell);
            let (y, a) = (
                coords[0] as usize,
                coords[schema.sensitive_index()] as usize,
            );
            let split = if with_x {
                if coords[1] == 0 {
                    0.3
                } else {
                    0.7
                }
            } else {
                1.0
            };
            *m = pair[y * na + a] * split;
        }
        let density = TabularDensity::from_weights(schema, mass).unwrap();
        let jrr = joint_representation_rate(&density).unwrap();
        if jrr < tau {
            continue;
        }
        sr_tables += 1;
        for y in 0..ny {
            sr_bad += (statistical_rate(&density, y).unwrap() < sr_from_rr(tau) - EPS) as usize;
            dc_bad +=
                (discrimination_control(&density, y).unwrap() > dc_from_rr(tau) + EPS) as usize;
        }
    }
    outcome(
        eo_premise >= 1000 && eo_bad == 0 && sr_bad == 0 && dc_bad == 0,
        format!(
            "equal opportunity: {eo_tables} tables, {eo_premise} meeting the premise, {eo_bad} counterexamples; \
             statistical rate: {sr_tables} tables, {sr_bad} counterexamples; discrimination control: {dc_bad} counterexamples"
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_fbde"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_10() -> Outcome {
    let base = std::env::temp_dir().join(format!("fbde-acceptance-{}", std::process::id()));
    let dirs = [base.join("a"), base.join("b")];
    let commands: [&[&str]; 6] = [
        &["synth", "--n", "2000", "--seed", "3", "--out", "data.csv"],
        &[
            "fit",
            "--data",
            "data.csv",
            "--sensitive",
            "a",
            "--tau",
            "0.7",
            "--rounds",
            "6",
            "--seed",
            "5",
            "--out",
            "m.json",
        ],
        &[
            "fit",
            "--data",
            "data.csv",
            "--sensitive",
            "a",
            "--tau",
            "0.8",
            "--scheme",
            "relative",
            "--rounds",
            "4",
            "--folds",
            "3",
            "--seed",
            "5",
            "--out",
            "k.json",
        ],
        &[
            "eval",
            "--model",
            "m.json",
            "--data",
            "data.csv",
            "--out",
            "metrics.json",
        ],
        &[
            "eval",
            "--model",
            "k.fold1.json",
            "--data",
            "data.csv",
            "--out",
            "metrics.fold1.json",
        ],
        &[
            "guarantees",
            "--model",
            "m.json",
            "--trace",
            "m.trace.csv",
            "--data",
            "data.csv",
            "--out",
            "report.json",
        ],
    ];
    let mut ok = true;
    for d in &dirs {
        std::fs::create_dir_all(d).unwrap();
        for args in commands {
            ok &= cli(d, args);
        }
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        let n = name.to_string_lossy().into_owned();
        // manifests carry wall-clock timings
        if n.ends_with(".manifest.json") {
            continue;
        }
        compared += 1;
        let a = std::fs::read(dirs[0].join(&name)).unwrap();
        let b = std::fs::read(dirs[1].join(&name)).ok();
        if b.as_deref() != Some(&a[..]) {
            differing.push(n);
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    outcome(
        ok && compared >= 12 && differing.is_empty(),
        format!(
            "{} commands twice, {compared} output files compared, differing: {differing:?}",
            commands.len()
        ),
    )
}

fn main() {
    let runs = synthetic_runs();
    let start = Instant::now();
    let trials = adversarial_trials();
    let trial_secs = start.elapsed().as_secs_f64();
    let results = [
        criterion_1(&runs),
        criterion_2(&runs),
        criterion_3(&trials, trial_secs),
        criterion_4(&trials),
        criterion_5(),
        criterion_6(),
        criterion_7(&runs),
        criterion_8(&runs, &trials),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!(
            "criterion {:>2}: {} - {}",
            i + 1,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        failed += !r.pass as usize;
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
