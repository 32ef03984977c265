use filterscope_core::agreement::{
    agreement_report, cohens_kappa, confusion_counts, partition_quadrants, raw_agreement, ConfusionCounts, Kappa,
};
use filterscope_core::labeling::{Label, LabelPair, PairedLabelSet};
use filterscope_core::seed;
use rand::Rng;

fn random_pairs(rng: &mut impl Rng, n: usize, p_a: f64, p_b: f64) -> Vec<(Label, Label)> {
    let pick = |rng: &mut _, p| if Rng::gen_bool(rng, p) { Label::Relevant } else { Label::NonRelevant };
    (0..n).map(|_| (pick(rng, p_a), pick(rng, p_b))).collect()
}

fn random_pairs_any(rng: &mut impl Rng, n: usize) -> Vec<(Label, Label)> {
    let (p_a, p_b) = (rng.gen(), rng.gen());
    random_pairs(rng, n, p_a, p_b)
}

fn paired(labels: &[(Label, Label)]) -> PairedLabelSet {
    let pairs = labels
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| LabelPair { doc_id: format!("d{i:04}"), topic: "3".into(), label_a: a, label_b: b })
        .collect();
    PairedLabelSet::new("a", "b", pairs).unwrap()
}

/// kappa from the raw label list as an exact fraction, divided once.
fn kappa_oracle(labels: &[(Label, Label)]) -> Option<f64> {
    let n = labels.len() as i128;
    let agree = labels.iter().filter(|(a, b)| a == b).count() as i128;
    let ra = labels.iter().filter(|(a, _)| *a == Label::Relevant).count() as i128;
    let rb = labels.iter().filter(|(_, b)| *b == Label::Relevant).count() as i128;
    // p_o = agree/n, p_e = (ra*rb + (n-ra)(n-rb)) / n^2
    let pe_num = ra * rb + (n - ra) * (n - rb);
    let num = agree * n - pe_num;
    let den = n * n - pe_num;
    (den != 0).then(|| num as f64 / den as f64)
}

#[test]
fn counts_and_raw_agreement_match_recount() {
    let mut rng = seed::rng(1);
    for case in 0..1500 {
        let n = rng.gen_range(1..=120);
        let labels = random_pairs_any(&mut rng, n);
        let cc = confusion_counts(&paired(&labels)).unwrap();
        let count = |a, b| labels.iter().filter(|&&p| p == (a, b)).count() as u64;
        use Label::{NonRelevant as N, Relevant as R};
        assert_eq!(cc, ConfusionCounts::new(count(R, R), count(R, N), count(N, R), count(N, N)), "case {case}");
        assert_eq!(cc.total(), n as u64);
        let agree = labels.iter().filter(|(a, b)| a == b).count();
        assert_eq!(raw_agreement(&cc).unwrap(), agree as f64 / n as f64);
    }
}

#[test]
fn kappa_matches_exact_fraction() {
    let mut rng = seed::rng(2);
    let mut undefined = 0;
    for case in 0..2000 {
        let n = rng.gen_range(1..=60);
        // Skewed marginals now and then to reach the degenerate cases.
        let (pa, pb) = if case % 10 == 0 { (1.0, 1.0) } else { (rng.gen(), rng.gen()) };
        let labels = random_pairs(&mut rng, n, pa, pb);
        let cc = confusion_counts(&paired(&labels)).unwrap();
        match (cohens_kappa(&cc).unwrap(), kappa_oracle(&labels)) {
            (Kappa::Defined(k), Some(o)) => {
                assert!((k - o).abs() <= 1e-12, "case {case}: {k} vs {o}");
                assert!((-1.0..=1.0).contains(&k));
                assert_eq!(Kappa::Defined(k), cohens_kappa(&cc.transposed()).unwrap());
            }
            (Kappa::Undefined, None) => undefined += 1,
            (got, want) => panic!("case {case}: {got:?} vs {want:?}"),
        }
    }
    assert!(undefined > 0);
}

#[test]
fn kappa_is_one_iff_off_diagonal_empty() {
    for (cc, one) in [
        (ConfusionCounts::new(5, 0, 0, 3), true),
        (ConfusionCounts::new(5, 1, 0, 3), false),
        (ConfusionCounts::new(0, 0, 0, 3), false), // undefined
    ] {
        assert_eq!(cohens_kappa(&cc).unwrap() == Kappa::Defined(1.0), one, "{cc:?}");
    }
}

#[test]
fn quadrants_partition_the_pairs() {
    let mut rng = seed::rng(3);
    for _ in 0..300 {
        let n = rng.gen_range(0..80);
        let labels = random_pairs_any(&mut rng, n);
        let p = paired(&labels);
        let q = partition_quadrants(&p);
        let cells = [&q.both_relevant, &q.a_only, &q.b_only, &q.both_nonrelevant];
        for pair in p.pairs() {
            let key = (pair.doc_id.clone(), pair.topic.clone());
            assert_eq!(cells.iter().filter(|c| c.contains(&key)).count(), 1);
        }
        assert_eq!(cells.iter().map(|c| c.len()).sum::<usize>(), n);
        assert!(q.a_only.is_disjoint(&q.b_only));
    }
}

#[test]
fn report_fractions_sum_to_one_and_swap_transposes() {
    let mut rng = seed::rng(4);
    for _ in 0..200 {
        let labels = {
            let n = rng.gen_range(1..50);
            random_pairs(&mut rng, n, 0.7, 0.6)
        };
        let p = paired(&labels);
        let r = agreement_report(&p).unwrap();
        let f = r.quadrant_fractions;
        assert!((f.both_relevant + f.a_only_relevant + f.b_only_relevant + f.both_nonrelevant - 1.0).abs() < 1e-12);
        let s = agreement_report(&p.swapped()).unwrap();
        assert_eq!(s.counts, r.counts.transposed());
        assert_eq!((s.raw_agreement, s.kappa), (r.raw_agreement, r.kappa));
    }
}
