use std::collections::BTreeSet;

use phnmf::hierarchy::{
    child_id, hnmf_topdown, phnmf, sorted_row_order, to_dot, write_pgm, Alpha, HnmfConfig,
    LeafReason, RankPolicy, TreeExport,
};
use phnmf::linalg::{Matrix, SeededRng};
use phnmf::model_select::{feature_similarity_with_seeds, run_seeds};
use phnmf::nmf::NmfConfig;

/// Rows in `groups` equal blocks, each block loading on its own column band.
fn blocks(groups: usize, rows_per: usize, cols_per: usize, noise: f64, seed: u64) -> Matrix<f64> {
    let mut rng = SeededRng::new(seed, 11);
    Matrix::from_fn(groups * rows_per, groups * cols_per, |i, j| {
        let on = i / rows_per == j / cols_per;
        let base = if on { 3.0 + rng.uniform() } else { 0.0 };
        base + noise * rng.uniform()
    })
}

fn noise(n: usize, m: usize, seed: u64) -> Matrix<f64> {
    let mut rng = SeededRng::new(seed, 12);
    Matrix::from_fn(n, m, |_, _| rng.uniform())
}

fn fixed2(beta: f64) -> HnmfConfig {
    HnmfConfig::phnmf(beta).with_rank_policy(RankPolicy::Fixed { k: 2 })
}

fn check_partition(leaves: &[(String, Vec<usize>)], residuals: &[usize], n: usize) {
    let mut seen = BTreeSet::new();
    for &i in leaves.iter().flat_map(|(_, m)| m).chain(residuals) {
        assert!(seen.insert(i), "row {i} appears twice");
    }
    assert_eq!(seen.len(), n, "rows missing from leaves and residuals");
}

#[test]
fn node_ids_follow_the_path_scheme() {
    assert_eq!(child_id("root", 1, 0), "1");
    assert_eq!(child_id("1", 2, 1), "1b");
    assert_eq!(child_id("1b", 3, 0), "1b.1");
    assert_eq!(child_id("1b.1", 4, 2), "1b.1c");
    assert_eq!(child_id("1b.1c", 5, 1), "1b.1c.2");
}

#[test]
fn noise_with_high_beta_stays_at_the_root() {
    let x = noise(60, 20, 1);
    let cfg = fixed2(0.99).with_seed(9);
    let oracle = feature_similarity_with_seeds(
        &x,
        2,
        &run_seeds(9, cfg.n_seeds),
        &NmfConfig { seed: 9, ..cfg.nmf.clone() },
    )
    .unwrap();
    assert!(oracle.score < 0.99, "oracle score {}", oracle.score);

    let tree = phnmf(&x, &cfg).unwrap();
    assert!(tree.root.is_leaf());
    assert_eq!(tree.root.leaf_reason, Some(LeafReason::SimilarityAtOrBelowBeta));
    assert_eq!(tree.root.similarity_score, Some(oracle.score));
    assert_eq!(tree.leaves(), vec![("root".to_string(), (0..60).collect())]);
}

#[test]
fn beta_zero_is_capped_by_max_depth() {
    let x = blocks(4, 10, 5, 0.5, 2);
    let tree = phnmf(&x, &fixed2(0.0).with_max_depth(2)).unwrap();
    for node in tree.nodes() {
        assert!(node.depth <= 2);
        if node.depth == 2 {
            assert_eq!(node.leaf_reason, Some(LeafReason::MaxDepth));
        }
    }
    assert!(tree.nodes().iter().any(|n| n.depth == 2));
    check_partition(&tree.leaves(), &tree.all_residuals(), x.n_rows());
}

#[test]
fn leaves_partition_rows_with_residuals() {
    for seed in 0..4 {
        let x = blocks(3, 12, 4, 1.0, seed);
        let cfg = fixed2(0.5)
            .with_alpha(Alpha::Relative(0.3))
            .with_max_depth(3)
            .with_seed(seed);
        let tree = phnmf(&x, &cfg).unwrap();
        check_partition(&tree.leaves(), &tree.all_residuals(), x.n_rows());
        for node in tree.nodes() {
            if !node.is_leaf() {
                let child_rows: usize = node.children.iter().map(|c| c.members.len()).sum();
                assert_eq!(child_rows + node.residual_members.len(), node.members.len());
            }
        }
    }
}

#[test]
fn two_blocks_split_once_into_pure_leaves() {
    let x = blocks(2, 20, 6, 0.0, 3);
    let tree = phnmf(&x, &fixed2(0.9).with_max_depth(1)).unwrap();
    let leaves = tree.leaves();
    assert_eq!(leaves.len(), 2);
    let sets: BTreeSet<Vec<usize>> = leaves.into_iter().map(|(_, m)| m).collect();
    let expected: BTreeSet<Vec<usize>> = [(0..20).collect(), (20..40).collect()].into_iter().collect();
    assert_eq!(sets, expected);
}

#[test]
fn row_permutation_permutes_leaves() {
    let x = blocks(2, 15, 5, 0.0, 4);
    let mut perm: Vec<usize> = (0..30).collect();
    SeededRng::new(77, 0).shuffle(&mut perm);
    let px = x.select_rows(&perm);
    let cfg = fixed2(0.9).with_max_depth(1);
    let sets = |tree: &phnmf::hierarchy::PopulationTree<f64>, map: &dyn Fn(usize) -> usize| {
        tree.leaves()
            .into_iter()
            .map(|(_, m)| {
                let mut v: Vec<usize> = m.into_iter().map(map).collect();
                v.sort_unstable();
                v
            })
            .collect::<BTreeSet<_>>()
    };
    let a = sets(&phnmf(&x, &cfg).unwrap(), &|i| i);
    let b = sets(&phnmf(&px, &cfg).unwrap(), &|i| perm[i]);
    assert_eq!(a, b);
}

#[test]
fn same_seed_same_tree() {
    let x = blocks(3, 10, 4, 0.8, 5);
    let cfg = fixed2(0.7).with_max_depth(3).with_seed(21);
    let a = phnmf(&x, &cfg).unwrap();
    let b = phnmf(&x, &cfg).unwrap();
    assert_eq!(a.leaves(), b.leaves());
    assert_eq!(
        TreeExport::from_node(&a.root, None).to_json(),
        TreeExport::from_node(&b.root, None).to_json()
    );
}

#[test]
fn too_few_members_stop_early() {
    let x = noise(1, 5, 2);
    let tree = phnmf(&x, &fixed2(0.0)).unwrap();
    assert_eq!(tree.root.leaf_reason, Some(LeafReason::TooFewMembers));
    assert!(phnmf(&Matrix::<f64>::zeros(0, 3), &fixed2(0.5)).unwrap_err().is_validation());
}

#[test]
fn f32_tree_builds() {
    let x = blocks(2, 10, 4, 0.0, 6).cast::<f32>();
    let tree = phnmf(&x, &fixed2(0.9).with_max_depth(1)).unwrap();
    assert_eq!(tree.leaves().len(), 2);
}

#[test]
fn topdown_respects_min_docs_and_may_overlap() {
    let x = blocks(2, 20, 6, 0.3, 7);
    let cfg = HnmfConfig::topdown(15)
        .with_rank_policy(RankPolicy::Fixed { k: 2 })
        .with_alpha(Alpha::Relative(0.01))
        .with_max_depth(3);
    let tree = hnmf_topdown(&x, &cfg).unwrap();
    assert_eq!(tree.root.children.len(), 2);
    for node in tree.nodes() {
        if node.is_leaf() && node.members.len() < 15 {
            assert_eq!(node.leaf_reason, Some(LeafReason::BelowMinDocs));
        }
        assert!(node.depth <= 3);
    }
    // a low threshold lets most rows join both topics
    let total: usize = tree.root.children.iter().map(|c| c.members.len()).sum();
    assert!(total > x.n_rows());

    let single = hnmf_topdown(&x, &HnmfConfig::topdown(41)).unwrap();
    assert!(single.root.is_leaf());
}

#[test]
fn exports_render() {
    let x = blocks(2, 6, 3, 0.0, 8);
    let tree = phnmf(&x, &fixed2(0.9).with_max_depth(1)).unwrap();
    let names: Vec<String> = (0..6).map(|j| format!("f{j}")).collect();
    let json = TreeExport::from_node(&tree.root, Some(&names)).to_json();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["node_id"], "root");
    assert_eq!(v["children"].as_array().unwrap().len(), 2);
    assert_eq!(v["child_features"][0]["top_features"].as_array().unwrap().len(), 6);
    let dot = to_dot(&tree.root);
    assert!(dot.starts_with("digraph") && dot.contains("\"1\"") && dot.contains("\"2\""));

    let order = sorted_row_order(&tree.root);
    let mut sorted = order.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..12).collect::<Vec<_>>());

    let mut pgm = Vec::new();
    write_pgm(&x.select_rows(&order), &mut pgm).unwrap();
    assert!(pgm.starts_with(b"P5 6 12 255\n"));
    assert_eq!(pgm.len(), "P5 6 12 255\n".len() + 72);
}
