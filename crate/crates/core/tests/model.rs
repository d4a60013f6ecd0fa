use editflow::model::{
    read_checkpoint, write_checkpoint, Gradient, ModelKind, ModelParams, PredictionCache,
    RatePrediction,
};
use editflow::{EditOp, Error, Exec, RateModel, Sequence, Token, Vocab};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_seq<R: Rng>(vocab: Vocab, max: usize, rng: &mut R) -> Sequence {
    let n = rng.gen_range(0..=max);
    let c: Vec<Token> = (0..n)
        .map(|_| rng.gen_range(0..vocab.size()) as Token)
        .collect();
    Sequence::new(vocab, &c).unwrap()
}

fn random_model(kind: u8, m: usize, rng: &mut ChaCha8Rng) -> ModelParams {
    let vocab = Vocab::new(m).unwrap();
    let mut p = match kind {
        0 => ModelParams::tabular(vocab, 3, 4).unwrap(),
        _ => ModelParams::featurized(vocab),
    };
    p.randomize(2.0, rng);
    p
}

fn dot(cot: &RatePrediction, p: &RatePrediction) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    d(&cot.lam_ins, &p.lam_ins)
        + d(&cot.lam_del, &p.lam_del)
        + d(&cot.lam_sub, &p.lam_sub)
        + d(&cot.q_ins, &p.q_ins)
        + d(&cot.q_sub, &p.q_sub)
}

fn random_cotangent(n: usize, m: usize, rng: &mut ChaCha8Rng) -> RatePrediction {
    let mut c = RatePrediction::zeros(n, m);
    for v in c
        .lam_ins
        .iter_mut()
        .chain(&mut c.lam_del)
        .chain(&mut c.lam_sub)
        .chain(&mut c.q_ins)
        .chain(&mut c.q_sub)
    {
        *v = rng.gen_range(-1.0..1.0);
    }
    c
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn exit_rate_is_the_sum_over_all_edits() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in [0, 1] {
        for m in [1, 2, 3] {
            let p = random_model(kind, m, &mut rng);
            for _ in 0..30 {
                let x = random_seq(p.vocab(), 3, &mut rng).with_max_len(8).unwrap();
                let pred = p.predict(&x, rng.gen(), None).unwrap();
                pred.validate(1e-9).unwrap();
                let total: f64 = x
                    .neighbors()
                    .iter()
                    .map(|(op, _)| pred.rate_of_edit(op).unwrap())
                    .sum();
                assert!((total - pred.exit_rate()).abs() < 1e-9 * pred.exit_rate().max(1.0));
                if !x.is_empty() {
                    assert_eq!(
                        pred.rate_of_edit(&EditOp::Delete { pos: 1 }).unwrap(),
                        pred.lam_del[1]
                    );
                }
            }
        }
    }
}

#[test]
fn zero_probability_insertion_has_zero_rate() {
    let x = Sequence::new(Vocab::new(2).unwrap(), &[0]).unwrap();
    let mut pred = RatePrediction::silent(&x);
    pred.lam_ins[0] = 3.0;
    pred.q_ins_row_mut(0).copy_from_slice(&[1.0, 0.0]);
    assert_eq!(
        pred.rate_of_edit(&EditOp::Insert { pos: 0, token: 1 })
            .unwrap(),
        0.0
    );
    assert_eq!(
        pred.rate_of_edit(&EditOp::Insert { pos: 0, token: 0 })
            .unwrap(),
        3.0
    );
    assert!(pred.rate_of_edit(&EditOp::Delete { pos: 0 }).is_err());
}

#[test]
fn saturated_negative_logits_silence_the_model() {
    let vocab = Vocab::new(2).unwrap();
    for kind in [
        ModelKind::Tabular {
            max_len: 3,
            buckets: 2,
        },
        ModelKind::Featurized,
    ] {
        let mut p = match kind {
            ModelKind::Featurized => ModelParams::featurized(vocab),
            _ => ModelParams::tabular(vocab, 3, 2).unwrap(),
        };
        p.values_mut().iter_mut().for_each(|v| *v = -1e6);
        let x = Sequence::new(vocab, &[0, 1, 1]).unwrap();
        let pred = p.predict(&x, 0.3, None).unwrap();
        assert!(pred.exit_rate() < 1e-11, "{kind:?}");
    }
}

#[test]
fn predictions_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_model(1, 3, &mut rng);
    let x = random_seq(p.vocab(), 5, &mut rng);
    let c = random_seq(p.vocab(), 3, &mut rng);
    let a = p.predict(&x, 0.42, Some(&c)).unwrap();
    let b = p.predict(&x, 0.42, Some(&c)).unwrap();
    assert_eq!(a, b);
    assert!(a
        .lam_ins
        .iter()
        .zip(&b.lam_ins)
        .all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn tabular_rejects_states_outside_its_table_and_conditions() {
    let vocab = Vocab::new(2).unwrap();
    let p = ModelParams::tabular(vocab, 2, 3).unwrap();
    let long = Sequence::new(vocab, &[0, 0, 0]).unwrap();
    assert!(matches!(
        p.predict(&long, 0.5, None),
        Err(Error::StateOutsideSpace)
    ));
    let x = Sequence::new(vocab, &[0]).unwrap();
    assert!(p.predict(&x, 0.5, Some(&x)).is_err());
    assert!(p.predict(&x, 1.5, None).is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    for kind in [0, 1] {
        for _ in 0..20 {
            let m = rng.gen_range(1..=3);
            let mut p = random_model(kind, m, &mut rng);
            let x = random_seq(p.vocab(), 3, &mut rng);
            let cond = (kind == 1 && rng.gen_bool(0.5)).then(|| random_seq(p.vocab(), 2, &mut rng));
            let t = rng.gen::<f64>();
            let cot = random_cotangent(x.len(), m, &mut rng);
            let g = p.grad_predict(&x, t, cond.as_ref(), &cot).unwrap();
            for k in 0..p.len() {
                let orig = p.values()[k];
                p.values_mut()[k] = orig + h;
                let up = dot(&cot, &p.predict(&x, t, cond.as_ref()).unwrap());
                p.values_mut()[k] = orig - h;
                let down = dot(&cot, &p.predict(&x, t, cond.as_ref()).unwrap());
                p.values_mut()[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = g.get(&k).copied().unwrap_or(0.0);
                assert!(
                    rel_err(an, fd) < 1e-4,
                    "kind {kind} param {k}: {an} vs {fd}"
                );
            }
        }
    }
}

#[test]
fn zero_cotangent_and_exponential_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_model(0, 2, &mut rng);
    let x = Sequence::new(p.vocab(), &[1, 0]).unwrap();
    let zero = RatePrediction::zeros(2, 2);
    let g: Gradient = p.grad_predict(&x, 0.3, None, &zero).unwrap();
    assert!(g.values().all(|&v| v == 0.0));

    let mut ones = RatePrediction::zeros(2, 2);
    ones.lam_ins.iter_mut().for_each(|v| *v = 1.0);
    let g = p.grad_predict(&x, 0.3, None, &ones).unwrap();
    let pred = p.predict(&x, 0.3, None).unwrap();
    let mut lam: Vec<f64> = pred.lam_ins.clone();
    let mut got: Vec<f64> = g.values().copied().filter(|v| *v != 0.0).collect();
    lam.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    assert_eq!(got.len(), lam.len());
    for (a, b) in got.iter().zip(&lam) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [0, 1] {
        let p = random_model(kind, 2, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let q = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert!(p
            .values()
            .iter()
            .zip(q.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    assert!(read_checkpoint("not a checkpoint\n".as_bytes()).is_err());
}

#[test]
fn cache_agrees_with_direct_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_model(0, 2, &mut rng);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let cache = PredictionCache::new(&p, exec).unwrap();
        for _ in 0..100 {
            let x = random_seq(p.vocab(), 3, &mut rng);
            let t = rng.gen::<f64>();
            assert_eq!(
                *cache.predict(&x, t).unwrap(),
                p.predict(&x, t, None).unwrap()
            );
            assert!(cache.constant_until(t).unwrap() > t);
        }
    }
}

proptest! {
    #[test]
    fn rate_conditions_hold_for_any_parameters(
        seed in any::<u64>(),
        kind in 0u8..2,
        m in 1usize..4,
        t in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_model(kind, m, &mut rng);
        p.randomize(40.0, &mut rng);
        let x = random_seq(p.vocab(), 3, &mut rng);
        let pred = p.predict(&x, t, None).unwrap();
        prop_assert!(pred.validate(1e-9).is_ok());
        let all = pred.lam_ins.iter().chain(&pred.lam_del).chain(&pred.lam_sub);
        prop_assert!(all.clone().all(|v| v.is_finite() && *v >= 0.0));
        let total: f64 = all.sum();
        prop_assert!((pred.exit_rate() - total).abs() <= 1e-12 * total.max(1.0));
        for i in 1..=x.len() {
            prop_assert_eq!(pred.q_sub_row(i)[x.token(i) as usize], if m == 1 { 1.0 } else { 0.0 });
        }
    }
}
