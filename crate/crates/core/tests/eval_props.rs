mod common;

use proptest::prelude::*;
use signhash::eval::{auc, edge_features, fit_logistic, EdgeOperator, LabeledEdgeSet};
use signhash::model::Matrix;
use signhash::synth::PlantedPartition;
use signhash::HashCode;

use common::{brute_auc, brute_feature};

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..300).prop_flat_map(|n| {
        (
            proptest::collection::vec((0i32..20).prop_map(f64::from), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
    .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
}

fn signs(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|d| {
        let v = || proptest::collection::vec(prop_oneof![Just(-1.0), Just(1.0)], d);
        (v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auc_equals_pair_count((s, l) in scored()) {
        prop_assert_eq!(auc(&s, &l).unwrap(), brute_auc(&s, &l));
    }

    #[test]
    fn auc_ignores_increasing_transforms((s, l) in scored(), a in 0.5f64..4.0, b in -10f64..10.0) {
        let t: Vec<f64> = s.iter().map(|x| a * x.powi(3) + b).collect();
        prop_assert_eq!(auc(&t, &l).unwrap(), auc(&s, &l).unwrap());
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((auc(&neg, &l).unwrap() - (1.0 - auc(&s, &l).unwrap())).abs() < 1e-12);
    }

    #[test]
    fn features_take_expected_values((u, v) in signs(1..64)) {
        for op in EdgeOperator::ALL {
            let f = edge_features(&u, &v, op).unwrap();
            prop_assert_eq!(&f, &brute_feature(&u, &v, op));
            let allowed: &[f64] = match op {
                EdgeOperator::Hadamard => &[-1.0, 1.0],
                EdgeOperator::Average => &[-1.0, 0.0, 1.0],
                EdgeOperator::L1Weight => &[0.0, 2.0],
                EdgeOperator::L2Weight => &[0.0, 4.0],
            };
            prop_assert!(f.iter().all(|x| allowed.contains(x)));
        }
        let h = edge_features(&u, &v, EdgeOperator::Hadamard).unwrap();
        let l1 = edge_features(&u, &v, EdgeOperator::L1Weight).unwrap();
        let l2 = edge_features(&u, &v, EdgeOperator::L2Weight).unwrap();
        for m in 0..u.len() {
            prop_assert_eq!(l2[m], l1[m] * l1[m]);
            prop_assert_eq!(h[m], 1.0 - l2[m] / 2.0);
        }
    }
}

#[test]
fn identical_and_complement_codes() {
    let u = vec![1.0, -1.0, -1.0, 1.0];
    let neg: Vec<f64> = u.iter().map(|x| -x).collect();
    assert_eq!(edge_features(&u, &u, EdgeOperator::Hadamard).unwrap(), vec![1.0; 4]);
    assert_eq!(edge_features(&u, &u, EdgeOperator::L1Weight).unwrap(), vec![0.0; 4]);
    assert_eq!(edge_features(&u, &u, EdgeOperator::L2Weight).unwrap(), vec![0.0; 4]);
    assert_eq!(edge_features(&u, &neg, EdgeOperator::Hadamard).unwrap(), vec![-1.0; 4]);
    assert_eq!(edge_features(&u, &neg, EdgeOperator::Average).unwrap(), vec![0.0; 4]);
    assert_eq!(edge_features(&u, &neg, EdgeOperator::L1Weight).unwrap(), vec![2.0; 4]);
    assert_eq!(edge_features(&u, &neg, EdgeOperator::L2Weight).unwrap(), vec![4.0; 4]);
}

#[test]
fn folds_are_stratified_and_shared() {
    let g = PlantedPartition::default().generate().unwrap().to_graph().unwrap();
    let set = LabeledEdgeSet::from_graph(&g).unwrap();
    let folds = set.stratified_folds(10, 3).unwrap();
    assert_eq!(folds, set.stratified_folds(10, 3).unwrap());
    for class in [true, false] {
        let mut per = [0usize; 10];
        for (e, &f) in set.edges.iter().zip(&folds) {
            if e.2 == class {
                per[f] += 1;
            }
        }
        assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
    }
}

#[test]
fn doubling_regularization_never_grows_weights() {
    let mut rng = common::rng(6);
    let codes: Vec<HashCode> = (0..200).map(|_| common::random_code(&mut rng, 8)).collect();
    let data: Vec<f64> = codes.iter().flat_map(|c| c.to_signs()).collect();
    let x = Matrix::from_vec(200, 8, data).unwrap();
    let y: Vec<bool> = codes.iter().map(|c| c.bit(0) ^ c.bit(1)).collect();
    let mut last = f64::INFINITY;
    for reg in [1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2, 3.2e-2] {
        let norm = fit_logistic(&x, &y, reg, 2000).unwrap().weight_norm();
        assert!(norm <= last + 1e-9, "reg {reg}: {norm} > {last}");
        last = norm;
    }
}
