use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use dff::harness::{
    hard_setup, random_source, read_results, theorem1, write_results, Invariant, LemmaMonitor,
    SuiteConfig,
};
use dff::learners::{run_session, Learner, LearnerError, Move, Prediction, Session, SrDff, Update};
use dff::model::{validate_representation, Conjunction, Example, Label, Literal, Representation};
use dff::stochastic::{
    analyze_distribution, eval_error_exact, eval_error_sample, phi_beta, RestrictedDecisionList,
};
use dff::world::{
    adversarial_stream, count_min_exceptions, generate_world, ExceptionSpec, ScriptRound, stochastic_stream, CorruptionKind, Feedback, Instance,
    StochasticSource, WorldGenParams,
};

fn world_params() -> impl Strategy<Value = WorldGenParams> {
    (1usize..=6, 0usize..=4, 1usize..=4, 0usize..=2, any::<bool>(), any::<u64>()).prop_flat_map(
        |(m, noise, pool, overlap, unique, seed)| {
            (1..=m).prop_map(move |labels| WorldGenParams {
                m,
                label_count: if unique { m } else { labels },
                unique_labels: unique,
                pool_size: pool,
                noise_features: noise,
                overlap,
                seed,
                ..WorldGenParams::default()
            })
        },
    )
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_worlds_satisfy_the_axioms(p in world_params()) {
        let w = generate_world(&p).unwrap();
        let report = validate_representation(&w, &[]);
        prop_assert!(report.is_valid(), "{:?}", report.violations);
        for i in 0..w.m() {
            for j in 0..w.m() {
                match w.phi(i, j) {
                    Some(l) => {
                        prop_assert!(w.label(i) != w.label(j));
                        prop_assert_eq!(w.phi(j, i), Some(l.negate()));
                        for x in &w.components()[i].pool {
                            prop_assert!(x.satisfies(l).unwrap());
                        }
                        for x in &w.components()[j].pool {
                            prop_assert!(!x.satisfies(l).unwrap());
                        }
                    }
                    None => prop_assert!(i == j || w.label(i) == w.label(j)),
                }
            }
        }
    }

    #[test]
    fn concept_label_agrees_with_every_member(p in world_params()) {
        let w = generate_world(&p).unwrap();
        for (c, comp) in w.components().iter().enumerate() {
            for x in &comp.pool {
                prop_assert_eq!(&w.concept_label(x).unwrap(), w.label(c));
                prop_assert!(w.members(x).contains(&c));
            }
        }
    }

    #[test]
    fn adding_a_literal_never_grows_the_satisfying_set(
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 6), 1..20),
        lits in prop::collection::vec((0u32..6, any::<bool>()), 0..5),
        extra in (0u32..6, any::<bool>()),
    ) {
        let mut c = Conjunction::new();
        for (f, s) in lits {
            c.insert(Literal::new(f, s));
        }
        let mut d = c.clone();
        d.insert(Literal::new(extra.0, extra.1));
        prop_assert!(c.is_subset(&d));
        for b in &bits {
            let x = Example::from_bools(b);
            if d.satisfied_by(&x).unwrap() {
                prop_assert!(c.satisfied_by(&x).unwrap());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn valid_rounds_follow_the_table(m in 1usize..=6, k in 0usize..=5, trial in 0usize..1000, seed in any::<u64>()) {
        let setup = hard_setup(m, k, trial, seed).unwrap();
        let w = &setup.world;
        let tr = run_session(&mut SrDff::new(m).unwrap(), &setup.stream, w).unwrap();
        for r in &tr.rounds {
            if r.injected || !r.mistake {
                continue;
            }
            let fb = r.feedback.as_ref().unwrap();
            prop_assert_eq!(&fb.label, w.label(r.hidden.component));
            let b = &tr.rounds[r.explanation_id.unwrap()];
            if b.hidden.exception {
                continue;
            }
            if let Some(l) = w.phi(r.hidden.component, b.hidden.component) {
                prop_assert_eq!(fb.literal, Some(l));
                prop_assert!(r.example.satisfies(l).unwrap());
                prop_assert!(!b.example.satisfies(l).unwrap());
            }
        }
    }

    #[test]
    fn certified_exceptions_never_exceed_the_planted_ones(m in 1usize..=6, k in 0usize..=5, trial in 0usize..1000, seed in any::<u64>()) {
        let setup = hard_setup(m, k, trial, seed).unwrap();
        let planted = setup.stream.iter().filter(|e| e.injected()).count();
        prop_assert!(planted <= k);
        let tr = run_session(&mut SrDff::new(m).unwrap(), &setup.stream, &setup.world).unwrap();
        prop_assert!(count_min_exceptions(&tr, &setup.world) <= planted);
    }

    #[test]
    fn replays_are_deterministic(m in 1usize..=6, k in 0usize..=5, trial in 0usize..1000, seed in any::<u64>()) {
        let a = hard_setup(m, k, trial, seed).unwrap();
        let b = hard_setup(m, k, trial, seed).unwrap();
        prop_assert_eq!(&a.stream, &b.stream);
        let ta = run_session(&mut SrDff::new(m).unwrap(), &a.stream, &a.world).unwrap();
        let tb = run_session(&mut SrDff::new(m).unwrap(), &b.stream, &b.world).unwrap();
        prop_assert_eq!(ta.to_jsonl(), tb.to_jsonl());
    }

    #[test]
    fn srdff_monitor_stays_quiet(m in 1usize..=6, k in 0usize..=5, trial in 0usize..1000, seed in any::<u64>()) {
        let setup = hard_setup(m, k, trial, seed).unwrap();
        let mut learner = SrDff::new(m).unwrap();
        let mut mon = LemmaMonitor::for_srdff();
        let mut session = Session::new(&setup.world);
        for e in &setup.stream {
            let step = session.step(&mut learner, e).unwrap();
            mon.observe(&step, session.transcript(), learner.rules(), &setup.world);
        }
        prop_assert!(mon.ok(), "{:?}", mon.violations);
        prop_assert!(mon.created() <= m + k);
    }

    #[test]
    fn feature_masses_are_bounded(seed in any::<u64>()) {
        let (w, s) = random_source(seed).unwrap();
        let a = analyze_distribution(&w, &s).unwrap();
        prop_assert!(a.total() <= q(1, 2));
        for beta in [q(1, 50), q(1, 10), q(1, 3)] {
            let kept = phi_beta(&a, &beta);
            let cap = BigRational::one() / (q(2, 1) * &beta);
            prop_assert!(BigRational::from_integer(BigInt::from(kept.len())) <= cap);
            for l in &kept {
                prop_assert!(a.beta[l] >= beta);
            }
        }
    }
}

/// Label probabilities written out by hand for label flips only.
fn naive_exact_error(h: &RestrictedDecisionList, w: &Representation, s: &StochasticSource) -> BigRational {
    let labels = w.labels();
    let mut err = BigRational::zero();
    for (c, comp) in w.components().iter().enumerate() {
        let truth = w.label(c);
        let others = labels.iter().filter(|l| *l != truth).count() as i64;
        let per = &s.weights[c] / BigRational::from_integer(BigInt::from(comp.pool.len()));
        for x in &comp.pool {
            let y = h.predict(x).unwrap();
            let right = if y == truth {
                BigRational::one() - &s.epsilon[c]
            } else if others > 0 && labels.contains(y) {
                &s.epsilon[c] / BigRational::from_integer(BigInt::from(others))
            } else {
                BigRational::zero()
            };
            err += &per * (BigRational::one() - right);
        }
    }
    err
}

fn lists(w: &Representation) -> impl Strategy<Value = RestrictedDecisionList> {
    let features = w.universe() as u32;
    let labels = w.labels();
    let n = labels.len();
    (
        prop::collection::vec(
            (prop::collection::vec((0..features, any::<bool>()), 0..3), 0..n),
            0..4,
        ),
        0..n,
    )
        .prop_map(move |(rules, d)| RestrictedDecisionList {
            rules: rules
                .into_iter()
                .map(|(lits, y)| {
                    let mut c = Conjunction::new();
                    for (f, s) in lits {
                        c.insert(Literal::new(f, s));
                    }
                    (c, labels[y].clone())
                })
                .collect(),
            default: labels[d].clone(),
        })
}

fn flip_world() -> impl Strategy<Value = (Representation, StochasticSource)> {
    (2usize..=4, any::<u64>(), prop::collection::vec(1u64..6, 4), 0i64..4).prop_map(|(m, seed, counts, e)| {
        let w = generate_world(&WorldGenParams {
            m,
            label_count: m,
            noise_features: 1,
            seed,
            ..WorldGenParams::default()
        })
        .unwrap();
        let s = StochasticSource::from_counts(&counts[..m], q(e, 10), CorruptionKind::WrongLabel).unwrap();
        (w, s)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exact_error_matches_a_naive_sum(
        (w, s, h) in flip_world().prop_flat_map(|(w, s)| {
            lists(&w).prop_map(move |h| (w.clone(), s.clone(), h))
        })
    ) {
        prop_assert_eq!(eval_error_exact(&h, &w, &s).unwrap(), naive_exact_error(&h, &w, &s));
    }

    #[test]
    fn sample_error_matches_a_recount(
        rows in prop::collection::vec((prop::collection::vec(any::<bool>(), 4), 0usize..3), 0..40),
        rule in prop::collection::vec((0u32..4, any::<bool>()), 0..3),
    ) {
        let labels = [Label::nth(0), Label::nth(1), Label::nth(2)];
        let mut c = Conjunction::new();
        for (f, s) in rule {
            c.insert(Literal::new(f, s));
        }
        let h = RestrictedDecisionList { rules: vec![(c.clone(), labels[1].clone())], default: labels[0].clone() };
        let sample: Vec<(Arc<Example>, Label)> = rows
            .iter()
            .map(|(b, y)| (Arc::new(Example::from_bools(b)), labels[*y].clone()))
            .collect();
        let mut wrong = 0i64;
        for (b, y) in &rows {
            let ok = c.iter().all(|l| b[l.feature.0 as usize] == l.polarity);
            let guess = if ok { 1 } else { 0 };
            wrong += i64::from(guess != *y);
        }
        let expect = if rows.is_empty() { BigRational::zero() } else { q(wrong, rows.len() as i64) };
        prop_assert_eq!(eval_error_sample(&h, &sample).unwrap(), expect);
    }
}

#[test]
fn stream_frequencies_pass_a_chi_square_test() {
    let w = generate_world(&WorldGenParams {
        m: 4,
        label_count: 4,
        seed: 2,
        ..WorldGenParams::default()
    })
    .unwrap();
    let s = StochasticSource::from_counts(&[1, 2, 3, 4], q(1, 10), CorruptionKind::Mixed).unwrap();
    let n = 100_000;
    let events = stochastic_stream(&w, &s, n, 77).unwrap();
    let mut counts = [0f64; 4];
    for e in &events {
        counts[e.hidden.component] += 1.0;
    }
    let chi: f64 = counts
        .iter()
        .enumerate()
        .map(|(c, &o)| {
            let e = n as f64 * (c + 1) as f64 / 10.0;
            (o - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom, p = 0.001
    assert!(chi < 16.27, "chi-square {chi} for counts {counts:?}");
    let flips = events.iter().filter(|e| e.injected()).count() as f64;
    let sd = (n as f64 * 0.1 * 0.9).sqrt();
    assert!((flips - n as f64 * 0.1).abs() < 4.0 * sd, "{flips} exceptions");
}

#[test]
fn csv_export_replays_exactly() {
    let cfg = SuiteConfig {
        trials: 5,
        seed: 9,
        ms: vec![1, 3],
        ks: vec![0, 2],
    };
    let write = |cfg: &SuiteConfig| {
        let mut buf = Vec::new();
        write_results(&theorem1(cfg).unwrap().reports, &mut buf).unwrap();
        buf
    };
    let a = write(&cfg);
    assert_eq!(a, write(&cfg));
    let out = theorem1(&cfg).unwrap();
    let records: Vec<_> = out.reports.iter().flat_map(|r| r.to_records()).collect();
    assert_eq!(read_results(&a[..]).unwrap(), records);
}

/// Predicts the anchor's label and creates a fresh rule on every mistake,
/// never keeping any.
struct Hoarder {
    anchor: Option<Label>,
    next: u64,
}

impl Learner for Hoarder {
    fn name(&self) -> &'static str {
        "hoarder"
    }

    fn predict(&mut self, _: &Instance) -> Result<Move, LearnerError> {
        Ok(match &self.anchor {
            None => Move::Query,
            Some(label) => Move::Predict(Prediction {
                label: label.clone(),
                explanation: 0,
            }),
        })
    }

    fn absorb(&mut self, _: &Instance, mv: &Move, fb: Option<&Feedback>) -> Result<Update, LearnerError> {
        match (mv, fb) {
            (Move::Query, Some(fb)) => {
                self.anchor = Some(fb.label.clone());
                Ok(Update::Anchored)
            }
            (Move::Predict(_), Some(_)) => {
                self.next += 1;
                Ok(Update::Created { rule: self.next })
            }
            _ => Ok(Update::None),
        }
    }
}

#[test]
fn monitor_names_the_round_and_rule() {
    let w = generate_world(&WorldGenParams {
        m: 2,
        label_count: 2,
        seed: 5,
        ..WorldGenParams::default()
    })
    .unwrap();
    let script: Vec<_> = (0..8).map(|t| ScriptRound::component(t % 2)).collect();
    let stream = adversarial_stream(&w, &script, &ExceptionSpec::none(), 1).unwrap();
    let mut learner = Hoarder { anchor: None, next: 0 };
    let mut mon = LemmaMonitor::new([Invariant::CreationBound]);
    let mut session = Session::new(&w);
    for e in &stream {
        let step = session.step(&mut learner, e).unwrap();
        assert!(step.consistent);
        mon.observe(&step, session.transcript(), learner.rules(), &w);
    }
    // Mistakes on rounds 1, 3, 5, 7; the third rule exceeds m = 2.
    let rounds: Vec<_> = mon.violations.iter().map(|v| (v.round, v.rule)).collect();
    assert_eq!(rounds, vec![(5, Some(3)), (7, Some(4))]);
    let v = &mon.violations[0];
    assert_eq!(v.invariant, Invariant::CreationBound);
    let text = v.to_string();
    assert!(text.contains("round 5") && text.contains("rule 3"), "{text}");
}
