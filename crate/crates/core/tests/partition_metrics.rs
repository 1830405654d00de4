use std::collections::HashMap;

use rand::Rng;
use semipar::eval::{confusion_matrix, partition_metrics, partition_metrics_with, NmiNormalization};
use semipar::rng::seeded;

/// Every set partition of `n` elements as a restricted growth string.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

struct Brute {
    ari: f64,
    nmi: f64,
    vi: f64,
    jaccard: f64,
}

/// Pair counting over all element pairs, entropies from label frequencies.
fn brute(a: &[usize], b: &[usize]) -> Brute {
    let n = a.len();
    let (mut same_both, mut same_a, mut same_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => same_both += 1.0,
                (true, false) => same_a += 1.0,
                (false, true) => same_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (same_both + same_a) * (same_a + neither) + (same_both + same_b) * (same_b + neither);
    let ari = if denom == 0.0 { 1.0 } else { 2.0 * (same_both * neither - same_a * same_b) / denom };
    let union = same_both + same_a + same_b;
    let jaccard = if union == 0.0 { 1.0 } else { same_both / union };

    let entropy = |keys: Vec<(usize, usize)>| {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for k in keys {
            *counts.entry(k).or_default() += 1;
        }
        counts.values().map(|&c| -(c as f64 / n as f64) * (c as f64 / n as f64).ln()).sum::<f64>()
    };
    let ha = entropy(a.iter().map(|&x| (x, 0)).collect());
    let hb = entropy(b.iter().map(|&x| (x, 0)).collect());
    let hab = entropy(a.iter().zip(b).map(|(&x, &y)| (x, y)).collect());
    let mi = ha + hb - hab;
    let nmi = if ha == 0.0 && hb == 0.0 { 1.0 } else { mi / (0.5 * (ha + hb)) };
    Brute { ari, nmi, vi: 2.0 * hab - ha - hb, jaccard }
}

#[test]
fn matches_brute_force_on_every_small_partition_pair() {
    for n in 2..=6 {
        let parts = set_partitions(n);
        for a in &parts {
            for b in &parts {
                let m = partition_metrics(a, b).unwrap();
                let o = brute(a, b);
                assert!((m.ari - o.ari).abs() <= 1e-12, "ari {a:?} {b:?}: {} vs {}", m.ari, o.ari);
                assert!((m.nmi - o.nmi).abs() <= 1e-12, "nmi {a:?} {b:?}");
                assert!((m.vi - o.vi).abs() <= 1e-12, "vi {a:?} {b:?}");
                assert!((m.jaccard - o.jaccard).abs() <= 1e-12, "jaccard {a:?} {b:?}");
            }
        }
    }
}

#[test]
fn bell_numbers() {
    let counts: Vec<usize> = (1..=6).map(|n| set_partitions(n).len()).collect();
    assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
}

fn random_partition(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

#[test]
fn variation_of_information_is_a_metric() {
    let mut rng = seeded(11);
    for _ in 0..100 {
        let n = rng.gen_range(5..40);
        let a = random_partition(n, rng.gen_range(1..6), &mut rng);
        let b = random_partition(n, rng.gen_range(1..6), &mut rng);
        let c = random_partition(n, rng.gen_range(1..6), &mut rng);
        let ab = partition_metrics(&a, &b).unwrap().vi;
        let bc = partition_metrics(&b, &c).unwrap().vi;
        let ac = partition_metrics(&a, &c).unwrap().vi;
        assert!(ac <= ab + bc + 1e-12);
        assert!((ab - partition_metrics(&b, &a).unwrap().vi).abs() < 1e-12);
    }
}

#[test]
fn relabeling_changes_nothing() {
    let mut rng = seeded(5);
    for _ in 0..50 {
        let a = random_partition(30, 4, &mut rng);
        let b = random_partition(30, 3, &mut rng);
        let perm = [7usize, 2, 9, 4];
        let a2: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
        let m1 = partition_metrics(&a, &b).unwrap();
        let m2 = partition_metrics(&a2, &b).unwrap();
        assert!((m1.ari - m2.ari).abs() < 1e-12);
        assert!((m1.nmi - m2.nmi).abs() < 1e-12);
        assert!((m1.vi - m2.vi).abs() < 1e-12);
        assert!((m1.jaccard - m2.jaccard).abs() < 1e-12);
    }
}

#[test]
fn bounds_hold() {
    let mut rng = seeded(8);
    for _ in 0..200 {
        let n = rng.gen_range(2..25);
        let a = random_partition(n, rng.gen_range(1..5), &mut rng);
        let b = random_partition(n, rng.gen_range(1..5), &mut rng);
        for norm in [NmiNormalization::Arithmetic, NmiNormalization::Geometric] {
            let m = partition_metrics_with(&a, &b, norm).unwrap();
            assert!(m.ari <= 1.0 + 1e-12);
            assert!((0.0..=1.0).contains(&m.nmi));
            assert!(m.vi >= 0.0);
            assert!((0.0..=1.0).contains(&m.jaccard));
        }
    }
}

#[test]
fn confusion_marginals_match_class_sizes() {
    let mut rng = seeded(2);
    let a = random_partition(60, 4, &mut rng);
    let b = random_partition(60, 6, &mut rng);
    let c = confusion_matrix(&a, &b).unwrap();
    let size = |p: &[usize], l: usize| p.iter().filter(|&&x| x == l).count();
    for (i, &l) in c.row_labels.iter().enumerate() {
        assert_eq!(c.row_sums()[i], size(&a, l));
    }
    for (j, &l) in c.col_labels.iter().enumerate() {
        assert_eq!(c.col_sums()[j], size(&b, l));
    }
    let ident = confusion_matrix(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap();
    assert_eq!(ident.counts, vec![vec![2, 0], vec![0, 2]]);
}
