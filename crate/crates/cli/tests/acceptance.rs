//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines reach the output even when every check passes.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use dff::harness::{
    analysis_checks, discovery_checks, hard_setup, noise_independence, theorem1, theorem2,
    theorem3, three_stage_checks, zero_exception_equivalence, Check, EndToEnd, SuiteConfig,
    SuiteOutcome,
};
use dff::learners::{run_session, LearnerSpec};
use dff::model::{Example, FeatureId, Label};
use dff::protocol::{decode, encode, loopback, WireMessage};
use dff::rng::derive;
use dff::stochastic::{erm_decision_list, ErmConfig};
use dff::world::{generate_world, stochastic_stream, CorruptionKind, StochasticSource, WorldGenParams};

const SEED: u64 = 0xACCE;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn failing_checks(checks: &[Check], names: &[&str]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| names.contains(&c.name.as_str()) && !c.pass)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect()
}

fn bound_summary(out: &SuiteOutcome) -> (usize, usize, usize) {
    let cells = out.reports.len();
    let bad_cells = out.reports.iter().filter(|r| !r.summary.pass).count();
    let bad_trials = out
        .reports
        .iter()
        .map(|r| r.trials.iter().filter(|t| !t.pass).count())
        .sum();
    (cells, bad_cells, bad_trials)
}

fn within(elapsed: Duration, limit: u64) -> bool {
    elapsed <= Duration::from_secs(limit)
}

fn hard_bound(t1: &SuiteOutcome, elapsed: Duration) -> Verdict {
    let (cells, bad_cells, bad_trials) = bound_summary(t1);
    let trials: usize = t1.reports.iter().map(|r| r.trials.len()).sum();
    let worst = t1
        .reports
        .iter()
        .flat_map(|r| r.trials.iter())
        .filter_map(|t| t.bound.map(|b| t.mistakes as f64 - b))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        bad_trials == 0 && cells == 36 && trials == 36_000 && within(elapsed, 60),
        format!(
            "{bad_trials} of {trials} runs above m(m-1)+mk in {bad_cells} of {cells} cells, worst excess {worst}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn lemma_suite(t1: &SuiteOutcome) -> Verdict {
    let mut by_kind = std::collections::BTreeMap::new();
    for v in &t1.violations {
        *by_kind.entry(v.violation.invariant.to_string()).or_insert(0usize) += 1;
    }
    verdict(
        t1.violations.is_empty(),
        format!("{} per-round violations {by_kind:?}", t1.violations.len()),
    )
}

fn expectation_bound() -> Verdict {
    let start = Instant::now();
    let out = match theorem3(&SuiteConfig::expectation_default()) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let (cells, bad_cells, _) = bound_summary(&out);
    let worst = out
        .reports
        .iter()
        .map(|r| r.summary.mean + 3.0 * r.summary.stderr - r.summary.bound.unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        bad_cells == 0 && cells == 20 && out.violations.is_empty() && within(elapsed, 180),
        format!(
            "{bad_cells} of {cells} cells over 2m(m-1)+6k + 3 stderr (largest mean+3se-bound {worst:.2}); {} update-counter violations; {:.1}s",
            out.violations.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn wrapper_bound() -> Verdict {
    let start = Instant::now();
    let out = match theorem2(&SuiteConfig::hard_default()) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let (cells, _, bad_trials) = bound_summary(&out);
    let terminal = failing_checks(&out.checks, &["pfrdff-terminal-phase"]);
    verdict(
        bad_trials == 0 && cells == 36 && terminal.is_empty() && within(elapsed, 120),
        format!(
            "{bad_trials} runs above 32 UB log2^2(8 UB); terminal phase: {}; {:.1}s",
            if terminal.is_empty() { "ok".to_string() } else { terminal.join("; ") },
            elapsed.as_secs_f64()
        ),
    )
}

fn zero_exception() -> Verdict {
    match zero_exception_equivalence(500, SEED) {
        Ok(c) => verdict(c.pass, c.detail),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn analysis_exactness() -> Verdict {
    match analysis_checks(200, 100, SEED) {
        Ok(checks) => {
            let bad: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.detail.clone()).collect();
            let all: Vec<_> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
            verdict(bad.is_empty(), all.join("; "))
        }
        Err(e) => verdict(false, e.to_string()),
    }
}

fn discovery() -> Verdict {
    let start = Instant::now();
    let checks = match discovery_checks(500, SEED, 0.1, 0.1) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let wanted = ["discovery-finds-heavy-features", "discovery-mistake-allowance"];
    let shown: Vec<_> = checks
        .iter()
        .filter(|c| wanted.contains(&c.name.as_str()))
        .map(|c| c.detail.clone())
        .collect();
    verdict(
        failing_checks(&checks, &wanted).is_empty() && within(elapsed, 120),
        format!("{}; {:.1}s", shown.join("; "), elapsed.as_secs_f64()),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let out = match three_stage_checks(&EndToEnd::default()) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let wanted = ["stage3-exact-without-exceptions", "class-size-within-capacity"];
    let rates: Vec<_> = out
        .reports
        .iter()
        .map(|r| format!("eps={}: {:.1}% within eps+2alpha", r.k_or_eps, 100.0 * r.pass_fraction()))
        .collect();
    let shown: Vec<_> = out
        .checks
        .iter()
        .filter(|c| wanted.contains(&c.name.as_str()))
        .map(|c| c.detail.clone())
        .collect();
    verdict(
        out.bounds_pass() && failing_checks(&out.checks, &wanted).is_empty() && within(elapsed, 300),
        format!("{}; {}; {:.1}s", rates.join(", "), shown.join("; "), elapsed.as_secs_f64()),
    )
}

/// Every list of at most `m` rules, each a set of at most `m - 1`
/// literals over `features`, scored on `sample`; returns the fewest errors.
fn brute_force_min(features: &[u32], sample: &[(Vec<bool>, usize)], labels: usize, m: usize) -> u64 {
    let literals: Vec<(u32, bool)> = features.iter().flat_map(|&f| [(f, true), (f, false)]).collect();
    let mut conjs: Vec<Vec<(u32, bool)>> = vec![vec![]];
    for size in 1..m {
        let mut next = Vec::new();
        for c in conjs.iter().filter(|c| c.len() == size - 1) {
            let from = c.last().map_or(0, |l| literals.iter().position(|x| x == l).unwrap() + 1);
            for l in &literals[from..] {
                let mut d = c.clone();
                d.push(*l);
                next.push(d);
            }
        }
        conjs.extend(next);
    }
    let holds = |c: &[(u32, bool)], x: &[bool]| c.iter().all(|&(f, s)| x[f as usize] == s);
    // fires[c][i]: conjunction c matches example i
    let fires: Vec<Vec<bool>> = conjs
        .iter()
        .map(|c| sample.iter().map(|(x, _)| holds(c, x)).collect())
        .collect();
    let rules: Vec<(usize, usize)> = (0..conjs.len())
        .flat_map(|c| (0..labels).map(move |y| (c, y)))
        .collect();
    let mut best = u64::MAX;
    let mut list: Vec<(usize, usize)> = Vec::new();
    fn walk(
        list: &mut Vec<(usize, usize)>,
        m: usize,
        rules: &[(usize, usize)],
        fires: &[Vec<bool>],
        sample: &[(Vec<bool>, usize)],
        labels: usize,
        best: &mut u64,
    ) {
        for default in 0..labels {
            let mut errors = 0u64;
            for (i, (_, y)) in sample.iter().enumerate() {
                let guess = list
                    .iter()
                    .find(|&&(c, _)| fires[c][i])
                    .map_or(default, |&(_, l)| l);
                errors += u64::from(guess != *y);
            }
            *best = (*best).min(errors);
        }
        if list.len() < m {
            for &r in rules {
                list.push(r);
                walk(list, m, rules, fires, sample, labels, best);
                list.pop();
            }
        }
    }
    walk(&mut list, m, &rules, &fires, sample, labels, &mut best);
    best
}

fn erm_oracle() -> Verdict {
    let mut mismatches = Vec::new();
    let mut sizes = Vec::new();
    for i in 0..50u64 {
        let s = derive(SEED ^ 0xE4, i);
        let m = 2 + (s % 2) as usize;
        let world = match generate_world(&WorldGenParams {
            m,
            label_count: m,
            noise_features: 1,
            pool_size: 2,
            seed: s,
            ..WorldGenParams::default()
        }) {
            Ok(w) => w,
            Err(e) => return verdict(false, e.to_string()),
        };
        let source = StochasticSource::from_f64(&vec![1.0 / m as f64; m], 0.2, CorruptionKind::WrongLabel);
        let source = match source {
            Ok(x) => x,
            Err(e) => return verdict(false, e.to_string()),
        };
        let n = 10 + (derive(s, 1) % 21) as usize;
        let stream = match stochastic_stream(&world, &source, n, derive(s, 2)) {
            Ok(x) => x,
            Err(e) => return verdict(false, e.to_string()),
        };
        let labels: Vec<Label> = world.labels();
        let mut names: Vec<Label> = labels.clone();
        let mut sample = Vec::new();
        let mut plain = Vec::new();
        for e in &stream {
            let y = match dff::world::teacher_label(&world, e) {
                Ok(y) => y,
                Err(err) => return verdict(false, err.to_string()),
            };
            if !names.contains(&y) {
                names.push(y.clone());
            }
            let idx = names.iter().position(|l| *l == y).unwrap();
            plain.push((e.example.to_bools(), idx));
            sample.push((Arc::clone(&e.example), y));
        }
        let nfeat = if m == 2 { 3 } else { 2 };
        let features: Vec<u32> = (0..nfeat.min(world.universe()) as u32).collect();
        let fset: BTreeSet<FeatureId> = features.iter().map(|&f| FeatureId(f)).collect();
        let erm = match erm_decision_list(&fset, &sample, m, &labels, ErmConfig::default()) {
            Ok(r) => r,
            Err(e) => return verdict(false, e.to_string()),
        };
        let brute = brute_force_min(&features, &plain, names.len(), m);
        sizes.push(n);
        if erm.loss != brute || !erm.certified {
            mismatches.push((i, erm.loss, brute));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} of 50 instances (m in 2..=3, {}-{} examples) differ {:?}",
            mismatches.len(),
            sizes.iter().min().unwrap_or(&0),
            sizes.iter().max().unwrap_or(&0),
            mismatches
        ),
    )
}

fn noise_features() -> Verdict {
    match noise_independence(200, SEED, (0, 50)) {
        Ok(c) => verdict(c.pass, c.detail),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn label() -> impl Strategy<Value = Label> {
    "[A-Za-z0-9 ~_\"\\\\\u{e9}\u{4e2d}-]{1,8}".prop_map(|s| Label::new(&s))
}

fn param_value() -> impl Strategy<Value = serde_json::Value> {
    prop_oneof![
        any::<i64>().prop_map(serde_json::Value::from),
        any::<u64>().prop_map(serde_json::Value::from),
        any::<f64>()
            .prop_filter("finite", |x| x.is_finite())
            .prop_map(serde_json::Value::from),
        any::<bool>().prop_map(serde_json::Value::from),
        "[a-z\"\\\\ ]{0,6}".prop_map(serde_json::Value::from),
        Just(serde_json::Value::Null),
    ]
}

fn message() -> impl Strategy<Value = WireMessage> {
    let t = 0usize..1_000_000;
    prop_oneof![
        (t.clone(), prop::collection::vec(any::<bool>(), 0..64)).prop_map(|(t, b)| WireMessage::Example {
            t,
            assignment: Example::from_bools(&b),
        }),
        (t.clone(), prop::option::of(label()), prop::option::of(0usize..1_000_000))
            .prop_map(|(t, label, explanation_id)| WireMessage::Prediction {
                t,
                label,
                explanation_id
            }),
        (t.clone(), label(), prop::option::of(any::<u32>()), prop::option::of(any::<bool>()))
            .prop_map(|(t, label, feature, polarity)| WireMessage::Feedback {
                t,
                label,
                feature,
                polarity
            }),
        t.prop_map(|t| WireMessage::Ack { t }),
        ("[a-z_]{1,12}", prop::collection::btree_map("[a-z]{1,4}", param_value(), 0..4)).prop_map(
            |(learner, params)| WireMessage::SessionInit {
                learner,
                params: params.into_iter().collect(),
            }
        ),
        (any::<u64>(), prop::option::of("[ -~\n]{0,20}"))
            .prop_map(|(mistakes, error)| WireMessage::SessionEnd { mistakes, error }),
    ]
}

fn transparency() -> Verdict {
    let mut differ = Vec::new();
    let mut sessions = 0;
    for i in 0..100u64 {
        let s = derive(SEED ^ 0x11, i);
        let m = 1 + (i % 6) as usize;
        let k = (i % 4) as usize;
        let setup = match hard_setup(m, k, i as usize, s) {
            Ok(x) => x,
            Err(e) => return verdict(false, e.to_string()),
        };
        let specs = [
            LearnerSpec::Srdff { m },
            LearnerSpec::Dff18,
            LearnerSpec::Pfrdff,
            LearnerSpec::UniqueLabel {
                p: if m > 1 { 1.0 / (m - 1) as f64 } else { 1.0 },
                l: (m.max(2) - 1) as u32,
                seed: derive(s, 7),
                m: Some(m.max(2)),
            },
        ];
        for spec in specs {
            sessions += 1;
            let local = spec
                .build()
                .map_err(|e| e.to_string())
                .and_then(|mut l| run_session(&mut l, &setup.stream, &setup.world).map_err(|e| e.to_string()));
            let remote = loopback(&spec, &setup.stream, &setup.world).map_err(|e| e.to_string());
            match (local, remote) {
                (Ok(a), Ok((b, _))) if a.to_jsonl() == b.to_jsonl() => {}
                (a, b) => differ.push(format!(
                    "stream {i} {}: {:?}",
                    spec.label(),
                    a.err().or(b.err()).unwrap_or_else(|| "transcripts differ".into())
                )),
            }
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let codec = runner.run(&message(), |msg| {
        let frame = encode(&msg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(frame.iter().filter(|&&b| b == b'\n').count(), 1);
        prop_assert_eq!(frame.last(), Some(&b'\n'));
        let back = decode(&frame).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, msg);
        Ok(())
    });
    let codec_detail = match &codec {
        Ok(()) => "10000 generated messages round-trip".to_string(),
        Err(e) => format!("codec: {e}"),
    };
    verdict(
        differ.is_empty() && codec.is_ok(),
        format!(
            "{} of {sessions} served sessions differ from in-process {:?}; {codec_detail}",
            differ.len(),
            differ.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

fn report(n: usize, v: &Verdict) {
    println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the libtest CLI are ignored
    // beyond this.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut verdicts = Vec::new();

    let start = Instant::now();
    let t1 = theorem1(&SuiteConfig::hard_default());
    let elapsed = start.elapsed();
    match &t1 {
        Ok(t1) => {
            verdicts.push((1, hard_bound(t1, elapsed)));
            report(1, &verdicts[0].1);
            verdicts.push((2, lemma_suite(t1)));
        }
        Err(e) => {
            verdicts.push((1, verdict(false, e.to_string())));
            report(1, &verdicts[0].1);
            verdicts.push((2, verdict(false, e.to_string())));
        }
    }
    report(2, &verdicts[1].1);

    let rest: [(usize, fn() -> Verdict); 9] = [
        (3, expectation_bound),
        (4, wrapper_bound),
        (5, zero_exception),
        (6, analysis_exactness),
        (7, discovery),
        (8, end_to_end),
        (9, erm_oracle),
        (10, noise_features),
        (11, transparency),
    ];
    for (n, f) in rest {
        let v = f();
        report(n, &v);
        verdicts.push((n, v));
    }

    let failed: Vec<usize> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
