use editflow::oracle::{
    enumerate_marginal_p, total_variation, EnumeratedSpace, ExactRateTable, TableDirection,
};
use editflow::sampler::{
    apply_cfg, corrector_step, euler_step, run_many, CfgVariant, Method, Restricted, Restriction,
    SamplerConfig, StepOptions,
};
use editflow::verify::{
    corrector_histogram, flux_identity_residual, toy_coupling, toy_tables, VerifyOptions,
};
use editflow::{Exec, ModelParams, RateModel, RatePrediction, Scheduler, Sequence, Vocab};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn histogram(space: &EnumeratedSpace, states: impl Iterator<Item = Sequence>) -> Vec<f64> {
    let mut h = vec![0.0; space.len()];
    let mut n = 0.0;
    for s in states {
        h[space
            .index_of_sequence(&s)
            .expect("state inside the toy space")] += 1.0;
        n += 1.0;
    }
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn starts(space: &EnumeratedSpace, p0: &[f64], count: usize, seed: u64) -> Vec<Sequence> {
    let dist = WeightedIndex::new(p0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| space.sequence(dist.sample(&mut rng)))
        .collect()
}

#[test]
fn exact_rates_transport_the_toy_coupling() {
    let (space, coupling) = toy_coupling().unwrap();
    let sched = Scheduler::cubic();
    let table = ExactRateTable::new(
        space.clone(),
        coupling.clone(),
        sched,
        TableDirection::Forward,
    );
    let p0 = coupling.source_distribution(&space).unwrap();
    let q = coupling.target_distribution(&space).unwrap();
    let count = 20_000;
    let x0 = starts(&space, &p0, count, 1);
    let opts = StepOptions::plain(space.max_len());
    let checkpoints = [500, 1000, 1500, 2000];
    // States after each checkpoint step of a 2000-step Euler run.
    let snapshots: Vec<Vec<Sequence>> = Exec::Parallel.map_range(count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        rng.set_stream(i as u64);
        let mut x = x0[i].clone();
        let mut out = Vec::new();
        for step in 0..2000 {
            let t = step as f64 / 2000.0;
            let next = (step + 1) as f64 / 2000.0;
            x = euler_step(&table, &x, t, next - t, &opts, &mut rng)
                .unwrap()
                .x;
            if checkpoints.contains(&(step + 1)) {
                out.push(x.clone());
            }
        }
        out
    });
    let tv_end = total_variation(
        &histogram(&space, snapshots.iter().map(|s| s[3].clone())),
        &q,
    );
    println!("terminal TV against the coupling target {tv_end:.4}");
    assert!(tv_end < 0.03);
    for (k, t) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let exact = enumerate_marginal_p(&space, &coupling, &sched, t).unwrap();
        let tv = total_variation(
            &histogram(&space, snapshots.iter().map(|s| s[k].clone())),
            &exact,
        );
        println!("TV against p_t at t = {t}: {tv:.4}");
        assert!(tv < 0.03);
    }
}

#[test]
fn event_driven_and_euler_simulation_agree() {
    let (space, coupling) = toy_coupling().unwrap();
    let table = ExactRateTable::new(
        space.clone(),
        coupling.clone(),
        Scheduler::cubic(),
        TableDirection::Forward,
    );
    let p0 = coupling.source_distribution(&space).unwrap();
    let count = 20_000;
    let x0 = starts(&space, &p0, count, 3);
    let mut cfg = SamplerConfig {
        steps: 2000,
        max_len: space.max_len(),
        seed: 4,
        ..SamplerConfig::default()
    };
    let euler = run_many(
        &table,
        None,
        &|i| x0[i].clone(),
        &cfg,
        count,
        0,
        false,
        Exec::Parallel,
    )
    .unwrap();
    cfg.method = Method::Gillespie { slice: 1e-3 };
    let exact = run_many(
        &table,
        None,
        &|i| x0[i].clone(),
        &cfg,
        count,
        0,
        false,
        Exec::Parallel,
    )
    .unwrap();
    let tv = total_variation(
        &histogram(&space, euler.into_iter().map(|r| r.x)),
        &histogram(&space, exact.into_iter().map(|r| r.x)),
    );
    println!("TV between Euler and event-driven terminal laws {tv:.4}");
    assert!(tv < 0.02);
}

#[test]
fn reverse_table_satisfies_the_flux_identity() {
    let (fwd, rev) = toy_tables().unwrap();
    for k in 1..10 {
        let r = flux_identity_residual(&fwd, &rev, k as f64 / 10.0).unwrap();
        assert!(r < 1e-12, "{r}");
    }
}

#[test]
fn corrector_step_preserves_the_marginal() {
    let (fwd, rev) = toy_tables().unwrap();
    let opts = VerifyOptions {
        seed: 9,
        samples: 100_000,
        exec: Exec::Parallel,
    };
    // Advance zero: forward to t + 0.02 and back, which must leave p_t intact.
    let t = 0.5;
    let h = corrector_histogram(&fwd, &rev, t, 0.0, 0.02, &opts, 0).unwrap();
    let tv = total_variation(&h, &fwd.marginal(t).unwrap().p);
    println!("corrector round trip TV {tv:.4}");
    assert!(tv < 0.02);
}

#[test]
fn corrector_without_a_reverse_model_is_an_error() {
    let (fwd, _) = toy_tables().unwrap();
    let x = fwd.space().sequence(0);
    let opts = StepOptions::plain(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(corrector_step(&fwd, None, &x, 0.2, 0.01, 0.01, &opts, &mut rng).is_err());
    assert!(corrector_step(&fwd, None, &x, 0.2, 0.01, 0.0, &opts, &mut rng).is_ok());
}

#[test]
fn insert_only_traces_never_shrink() {
    let vocab = Vocab::new(3).unwrap();
    let mut params = ModelParams::featurized(vocab);
    params.randomize(1.5, &mut ChaCha8Rng::seed_from_u64(5));
    let model = Restricted {
        inner: params,
        restriction: Restriction::InsertOnly,
    };
    let cfg = SamplerConfig {
        steps: 200,
        max_len: 12,
        seed: 6,
        ..SamplerConfig::default()
    };
    let x0 = Sequence::new(vocab, &[2, 0]).unwrap();
    let runs = run_many(
        &model,
        None,
        &|_| x0.clone(),
        &cfg,
        64,
        0,
        true,
        Exec::Parallel,
    )
    .unwrap();
    for r in &runs {
        let trace = r.trace.as_ref().unwrap();
        let lens: Vec<usize> = trace.lengths().collect();
        assert!(lens.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(trace.replay(vocab).unwrap(), r.x);
    }
    assert!(runs.iter().any(|r| r.x.len() > 2));
}

#[test]
fn silent_model_from_empty_stays_empty() {
    let vocab = Vocab::new(2).unwrap();
    let mut params = ModelParams::featurized(vocab);
    params.values_mut().iter_mut().for_each(|v| *v = -1e6);
    let cfg = SamplerConfig {
        steps: 100,
        seed: 1,
        ..SamplerConfig::default()
    };
    let x0 = Sequence::empty(vocab);
    let runs = run_many(
        &params,
        None,
        &|_| x0.clone(),
        &cfg,
        8,
        0,
        true,
        Exec::Sequential,
    )
    .unwrap();
    for r in runs {
        let trace = r.trace.unwrap();
        assert_eq!(trace.records.len(), 101);
        assert!(trace
            .records
            .iter()
            .all(|rec| rec.tokens.is_empty() && rec.edits.is_empty()));
    }
}

#[test]
fn runs_are_reproducible_across_execution_modes() {
    let (fwd, _) = toy_tables().unwrap();
    let cfg = SamplerConfig {
        steps: 50,
        max_len: 2,
        seed: 12,
        ..SamplerConfig::default()
    };
    let x0 = Sequence::empty(fwd.vocab());
    let a = run_many(
        &fwd,
        None,
        &|_| x0.clone(),
        &cfg,
        32,
        0,
        true,
        Exec::Sequential,
    )
    .unwrap();
    let b = run_many(
        &fwd,
        None,
        &|_| x0.clone(),
        &cfg,
        32,
        0,
        true,
        Exec::Parallel,
    )
    .unwrap();
    assert_eq!(a, b);
}

fn random_prediction(n: usize, m: usize, rng: &mut ChaCha8Rng) -> RatePrediction {
    let x = Sequence::new(Vocab::new(m).unwrap(), &vec![0; n]).unwrap();
    let mut p = RatePrediction::silent(&x);
    for i in 0..=n {
        p.lam_ins[i] = rng.gen_range(0.1..3.0);
        let row = p.q_ins_row_mut(i);
        row.iter_mut().for_each(|v| *v = rng.gen_range(0.05..1.0));
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        if i > 0 {
            p.lam_del[i] = rng.gen_range(0.1..3.0);
            p.lam_sub[i] = rng.gen_range(0.1..3.0);
            let row = p.q_sub_row_mut(i);
            row.iter_mut().for_each(|v| *v = rng.gen_range(0.05..1.0));
            row[0] = 0.0;
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    p
}

fn max_abs_diff(a: &RatePrediction, b: &RatePrediction) -> f64 {
    let pairs = [
        (&a.lam_ins, &b.lam_ins),
        (&a.lam_del, &b.lam_del),
        (&a.lam_sub, &b.lam_sub),
        (&a.q_ins, &b.q_ins),
        (&a.q_sub, &b.q_sub),
    ];
    pairs
        .iter()
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn guidance_special_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let cond = random_prediction(3, 3, &mut rng);
        let uncond = random_prediction(3, 3, &mut rng);
        for variant in [CfgVariant::Weighted, CfgVariant::Fixed] {
            let g = apply_cfg(&cond, &uncond, 1.0, variant).unwrap();
            assert!(max_abs_diff(&g, &cond) < 1e-12, "{variant:?}");
        }
        let g = apply_cfg(&cond, &uncond, 0.0, CfgVariant::Naive).unwrap();
        assert_eq!(g.lam_ins, cond.lam_ins);
        assert_eq!(g.lam_del, cond.lam_del);
        assert_eq!(g.lam_sub, cond.lam_sub);
        let w = rng.gen_range(-2.0..4.0);
        let f = apply_cfg(&cond, &uncond, w, CfgVariant::Fixed).unwrap();
        assert_eq!(f.lam_ins, cond.lam_ins);
        assert_eq!(f.lam_del, cond.lam_del);
        assert_eq!(f.lam_sub, cond.lam_sub);
        for variant in [CfgVariant::Weighted, CfgVariant::Fixed, CfgVariant::Naive] {
            apply_cfg(&cond, &uncond, w, variant)
                .unwrap()
                .validate(1e-9)
                .unwrap();
        }
        assert_eq!(apply_cfg(&cond, &uncond, w, CfgVariant::Off).unwrap(), cond);
    }
}
