use editflow::alignment::{
    align, align_optimal, align_pad_right, align_uniform_x0, align_worst_case, UniformX0,
};
use editflow::oracle::{edit_distance, EnumeratedSpace};
use editflow::{AlignedSequence, CouplingMode, Error, Sequence, Token, Vocab};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn word(s: &str) -> Sequence {
    let content: Vec<Token> = s.bytes().map(|b| (b - b'a') as Token).collect();
    Sequence::new(Vocab::new(26).unwrap(), &content).unwrap()
}

fn seq(m: usize, content: &[Token]) -> Sequence {
    Sequence::new(Vocab::new(m).unwrap(), content).unwrap()
}

#[test]
fn rm_blanks_examples() {
    let v = Vocab::new(26).unwrap();
    let bos = Some(v.bos());
    let (k, i) = (Some(10), Some(8));
    let z = AlignedSequence::new(v, vec![bos, k, None, i]).unwrap();
    assert_eq!(z.rm_blanks().unwrap().content(), &[10, 8]);
    let z = AlignedSequence::new(v, vec![bos, None, None]).unwrap();
    assert!(z.rm_blanks().unwrap().is_empty());
    let z = AlignedSequence::new(v, vec![bos, k, i]).unwrap();
    assert_eq!(z.rm_blanks().unwrap().content(), &[10, 8]);
    assert!(matches!(
        AlignedSequence::new(v, vec![k, bos]),
        Err(Error::MalformedAlignment(_))
    ));
}

#[test]
fn kitten_smitten_alignments() {
    let (a, b) = (word("kitten"), word("smitten"));
    let opt = align_optimal(&a, &b).unwrap();
    assert_eq!(opt.disagreements(), 2);
    let script = opt.edit_script();
    assert_eq!(script.len(), 2);
    assert!(matches!(
        script[0],
        editflow::EditOp::Substitute { pos: 1, token: 18 }
    ));
    assert!(matches!(
        script[1],
        editflow::EditOp::Insert { pos: 1, token: 12 }
    ));

    let pad = align_pad_right(&a, &b).unwrap();
    let both = pad
        .cells()
        .skip(1)
        .filter(|(x, y)| x.is_some() && y.is_some())
        .count();
    let ins = pad
        .cells()
        .filter(|(x, y)| x.is_none() && y.is_some())
        .count();
    assert_eq!((both, ins), (6, 1));

    let worst = align_worst_case(&a, &b).unwrap();
    assert_eq!(worst.disagreements(), 13);
    assert_eq!(
        align_optimal(&word("kitten"), &word("sitting"))
            .unwrap()
            .disagreements(),
        3
    );
    assert_eq!(align_optimal(&a, &a).unwrap().disagreements(), 0);
}

#[test]
fn worst_case_extremes() {
    let e = seq(2, &[]);
    let x = seq(2, &[0, 1, 1]);
    let ins = align_worst_case(&e, &x).unwrap();
    assert!(ins.cells().skip(1).all(|(a, b)| a.is_none() && b.is_some()));
    let del = align_worst_case(&x, &e).unwrap();
    assert!(del.cells().skip(1).all(|(a, b)| a.is_some() && b.is_none()));
    assert!(
        align_pad_right(&x, &seq(2, &[1, 1, 0]))
            .unwrap()
            .z0
            .num_blanks()
            == 0
    );
}

#[test]
fn uniform_x0_degenerate_and_clipped() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x1 = seq(3, &[2, 0, 1]);
    let none = UniformX0::default();
    let p = align_uniform_x0(&x1, &none, &mut rng).unwrap();
    let w = align_worst_case(&seq(3, &[]), &x1).unwrap();
    assert_eq!((p.z0.clone(), p.z1.clone()), (w.z0, w.z1));

    let cfg = UniformX0 {
        num_delete: 2,
        num_substitute: 5,
        source: None,
    };
    assert_eq!(cfg.cell_counts(3), (0, 4, 3));
    for _ in 0..50 {
        let p = align_uniform_x0(&x1, &cfg, &mut rng).unwrap();
        let (ni, nd, ns) = cfg.cell_counts(x1.len());
        assert_eq!(p.len() - 1, ni + nd + ns);
        assert_eq!(p.len() - 1, (x1.len() - ns) + nd + ns);
        let subs = p
            .cells()
            .skip(1)
            .filter(|(a, b)| a.is_some() && b.is_some())
            .count();
        assert_eq!(subs, 3);
        assert_eq!(p.z1.rm_blanks().unwrap(), x1);
        assert_eq!(p.z0.rm_blanks().unwrap().len(), nd + ns);
    }
}

#[test]
fn uniform_x0_respects_source_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = UniformX0 {
        num_delete: 4,
        num_substitute: 0,
        source: Some(vec![0.0, 1.0, 0.0]),
    };
    let p = align_uniform_x0(&seq(3, &[0]), &cfg, &mut rng).unwrap();
    assert_eq!(p.z0.rm_blanks().unwrap().content(), &[1, 1, 1, 1]);
    let bad = UniformX0 {
        source: Some(vec![1.0]),
        ..cfg
    };
    assert!(align_uniform_x0(&seq(3, &[0]), &bad, &mut rng).is_err());
}

#[test]
fn optimal_matches_edit_distance_exhaustively() {
    let space = EnumeratedSpace::new(2, 8).unwrap();
    let seqs: Vec<Sequence> = (0..space.len()).map(|i| space.sequence(i)).collect();
    for a in &seqs {
        for b in &seqs {
            let pair = align_optimal(a, b).unwrap();
            assert_eq!(
                pair.disagreements(),
                edit_distance(a.content(), b.content()),
                "{a} / {b}"
            );
        }
    }
}

#[test]
fn edit_distance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let a: Vec<u32> = (0..rng.gen_range(0..12))
            .map(|_| rng.gen_range(0..3))
            .collect();
        let b: Vec<u32> = (0..rng.gen_range(0..12))
            .map(|_| rng.gen_range(0..3))
            .collect();
        assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
        assert_eq!(edit_distance(&a, &a), 0);
    }
}

fn arb_seq(max: usize) -> impl Strategy<Value = Sequence> {
    prop::collection::vec(0..3 as Token, 0..=max).prop_map(|c| seq(3, &c))
}

fn replay(x0: &Sequence, ops: &[editflow::EditOp]) -> Sequence {
    let mut x = x0.clone().with_max_len(64).unwrap();
    for op in ops {
        x = x.apply(op).unwrap();
    }
    x
}

proptest! {
    #[test]
    fn deterministic_modes_round_trip(a in arb_seq(8), b in arb_seq(8)) {
        for mode in [CouplingMode::Optimal, CouplingMode::PadRight, CouplingMode::WorstCase] {
            let p = align(mode, &a, &b).unwrap();
            prop_assert_eq!(p.mode, mode);
            prop_assert_eq!(&p.z0.rm_blanks().unwrap(), &a);
            prop_assert_eq!(&p.z1.rm_blanks().unwrap(), &b);
            prop_assert!(p.cells().all(|(x, y)| x.is_some() || y.is_some()));
            prop_assert_eq!(&replay(&a, &p.edit_script()), &b);
            prop_assert_eq!(&replay(&b, &p.swapped().edit_script()), &a);
        }
    }

    #[test]
    fn uniform_x0_round_trips(b in arb_seq(8), nd in 0usize..4, ns in 0usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = UniformX0 { num_delete: nd, num_substitute: ns, source: None };
        let p = align_uniform_x0(&b, &cfg, &mut rng).unwrap();
        let x0 = p.z0.rm_blanks().unwrap();
        prop_assert_eq!(&p.z1.rm_blanks().unwrap(), &b);
        prop_assert_eq!(&replay(&x0, &p.edit_script()), &b);
        prop_assert!(p.cells().all(|(x, y)| x.is_some() || y.is_some()));
    }

    #[test]
    fn optimal_never_beaten_by_other_modes(a in arb_seq(10), b in arb_seq(10)) {
        let d = align_optimal(&a, &b).unwrap().disagreements();
        prop_assert_eq!(d, edit_distance(a.content(), b.content()));
        prop_assert!(align_pad_right(&a, &b).unwrap().disagreements() >= d);
        prop_assert_eq!(align_worst_case(&a, &b).unwrap().disagreements(), a.len() + b.len());
    }
}
