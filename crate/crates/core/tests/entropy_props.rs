use proptest::prelude::*;
use qdent::entropy::{
    cesaro_means, conditional_entropy, entropy, eta, is_coarser, join, limit_estimate,
    JointDistribution, Partition, ProbVector,
};

mod common;
use common::weights;

const CASES: u32 = 256;

fn joint_from(pairs: &[f64], nc: usize) -> JointDistribution {
    JointDistribution::new(
        pairs
            .iter()
            .enumerate()
            .map(|(i, &w)| (vec![i % nc, i / nc], w)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn chain_rule((nc, nd, w) in (1usize..5, 1usize..5).prop_flat_map(|(a, b)| (Just(a), Just(b), weights(a * b)))) {
        let _ = nd;
        let joint = joint_from(&w, nc);
        let d = joint.marginal(&[1]).unwrap();
        let lhs = joint.entropy();
        let rhs = d.entropy() + conditional_entropy(&joint).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn conditioning_on_coarser_raises_entropy(
        (nc, nd, w, g) in (1usize..4, 2usize..6).prop_flat_map(|(a, b)| {
            (Just(a), Just(b), weights(a * b), prop::collection::vec(0usize..3, b))
        })
    ) {
        let _ = nd;
        let fine = joint_from(&w, nc);
        // B = g(D) is coarser than D.
        let mut coarse = std::collections::BTreeMap::new();
        for (k, &p) in fine.support() {
            *coarse.entry(vec![k[0], g[k[1]]]).or_insert(0.0) += p;
        }
        let coarse = JointDistribution::new(coarse).unwrap();
        let h_fine = conditional_entropy(&fine).unwrap();
        let h_coarse = conditional_entropy(&coarse).unwrap();
        prop_assert!(h_fine <= h_coarse + 1e-12, "{h_fine} > {h_coarse}");
    }

    #[test]
    fn entropy_bounded_by_log_len(w in (1usize..12).prop_flat_map(weights)) {
        let n = w.len();
        let h = entropy(&ProbVector::new(w).unwrap());
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (n as f64).ln() + 1e-12);
    }

    #[test]
    fn eta_is_subadditive(raw in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let s: f64 = raw.iter().sum();
        let scale = if s > 1.0 { 1.0 / s } else { 1.0 };
        let a: Vec<f64> = raw.iter().map(|x| x * scale).collect();
        let total: f64 = a.iter().sum();
        let lhs = eta(total.min(1.0)).unwrap();
        let rhs: f64 = a.iter().map(|&x| eta(x).unwrap()).sum();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn cesaro_tracks_geometric_limits(a in -2.0f64..2.0, c in -1.0f64..1.0, r in -0.9f64..0.9) {
        let seq: Vec<f64> = (0..400).map(|n| a + c * r.powi(n)).collect();
        let b = cesaro_means(&seq);
        // |b_n − a| ≤ |c| / ((n+1)(1−|r|)).
        for (n, bn) in b.iter().enumerate() {
            let bound = c.abs() / ((n + 1) as f64 * (1.0 - r.abs())) + 1e-12;
            prop_assert!((bn - a).abs() <= bound);
        }
        let rep = limit_estimate(&seq, 1e-9, 3).unwrap();
        prop_assert!(rep.converged);
        prop_assert!((rep.converged_value.unwrap() - a).abs() < 1e-8);
        for (n, bn) in rep.cesaro_sequence.iter().enumerate() {
            let mean = seq[..=n].iter().sum::<f64>() / (n + 1) as f64;
            prop_assert!((bn - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn join_refines_its_parts(
        (n, ka, kb) in (2usize..9).prop_flat_map(|n| {
            (Just(n), prop::collection::vec(0usize..3, n), prop::collection::vec(0usize..3, n))
        })
    ) {
        let a = Partition::from_key_fn(n, |i| ka[i]).unwrap();
        let b = Partition::from_key_fn(n, |i| kb[i]).unwrap();
        let j = join(&[a.clone(), b.clone()]).unwrap();
        prop_assert!(is_coarser(&a, &j).unwrap());
        prop_assert!(is_coarser(&b, &j).unwrap());
        prop_assert_eq!(join(&[j.clone(), j.clone()]).unwrap(), j.clone());
        let mu = ProbVector::uniform(n).unwrap();
        prop_assert!(j.entropy(&mu).unwrap() + 1e-12 >= a.entropy(&mu).unwrap());
    }
}
