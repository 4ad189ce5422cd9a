use std::collections::{BTreeSet, VecDeque};

use hippo::dataio::{synth_generate, EdgeRecord, SynthSpec};
use hippo::numcore::Rng;
use hippo::splitbench::{split_bfs, split_edges, split_random, SplitMethod, SplitSpec};
use proptest::prelude::*;

mod common;
use common::{brute_force_tags, is_partition, random_edges};

const METHODS: [SplitMethod; 3] = [SplitMethod::Random, SplitMethod::Bfs, SplitMethod::Dfs];

fn assert_partition(s: &SplitSpec, m: usize) {
    assert!(is_partition(s, m));
    s.validate(m).unwrap();
}

#[test]
fn two_hundred_splits_partition_and_tag_correctly() {
    let root = Rng::new(17);
    for k in 0..200 {
        let mut rng = root.split_n("graph", k);
        let n = 6 + rng.below(30);
        let m = (n + rng.below(2 * n)).min(n * (n - 1) / 2);
        let edges = random_edges(&mut rng, n, m);
        let method = METHODS[k as usize % 3];
        let s = split_edges(method, &edges, 0.2, 0.16, &mut rng).unwrap();
        assert_partition(&s, m);
        assert_eq!(s.test_edges.len(), (0.2 * m as f64).round() as usize);
        assert_eq!(s.val_edges.len(), (0.16 * m as f64).round() as usize);
        assert_eq!(s.difficulty, brute_force_tags(&s, &edges), "split {k}");
    }
}

#[test]
fn traversal_splits_are_harder_than_random() {
    let corpus = synth_generate(&SynthSpec::default()).unwrap();
    let mean_hard = |method| {
        (1..=20u64)
            .map(|seed| {
                split_edges(method, &corpus.edges, 0.2, 0.16, &mut Rng::new(seed))
                    .unwrap()
                    .hard_fraction()
            })
            .sum::<f64>()
            / 20.0
    };
    let random = mean_hard(SplitMethod::Random);
    assert!(mean_hard(SplitMethod::Bfs) > random);
    assert!(mean_hard(SplitMethod::Dfs) > random);
}

#[test]
fn ten_edges_at_one_fifth_give_two_test_edges() {
    let edges = random_edges(&mut Rng::new(4), 8, 10);
    for method in METHODS {
        let s = split_edges(method, &edges, 0.2, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(s.test_edges.len(), 2);
        assert_partition(&s, 10);
    }
}

/// Straight-line BFS from the root the split draws, taking edges back to
/// visited nodes as each node is dequeued.
fn bfs_oracle(edges: &[EdgeRecord], quota: usize, seed: u64) -> Vec<usize> {
    let ids: Vec<String> = edges
        .iter()
        .flat_map(|e| [e.a.clone(), e.b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |s: &str| ids.iter().position(|i| i == s).unwrap();
    let root = Rng::new(seed).below(ids.len());
    let mut visited = vec![false; ids.len()];
    let mut queue = VecDeque::from([root]);
    let mut test = Vec::new();
    while let Some(v) = queue.pop_front() {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        let mut incident: Vec<(usize, usize)> = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            let (a, b) = (pos(&e.a), pos(&e.b));
            if a == v {
                incident.push((b, k));
            } else if b == v {
                incident.push((a, k));
            }
        }
        incident.sort();
        for (u, k) in incident {
            if visited[u] && test.len() < quota {
                test.push(k);
            } else if !visited[u] {
                queue.push_back(u);
            }
        }
        if test.len() == quota {
            break;
        }
    }
    test.sort_unstable();
    test
}

#[test]
fn bfs_on_toy_graph_matches_straight_line_oracle() {
    let pairs = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (9, 4), (2, 6)];
    let edges: Vec<EdgeRecord> = pairs
        .iter()
        .map(|&(a, b)| EdgeRecord::new(&format!("v{a}"), &format!("v{b}"), vec![true]).unwrap())
        .collect();
    for quota in 1..=4 {
        let frac = quota as f64 / edges.len() as f64;
        let s = split_bfs(&edges, frac, 0.0, &mut Rng::new(7)).unwrap();
        assert_eq!(s.test_edges, bfs_oracle(&edges, quota, 7), "quota {quota}");
    }
}

#[test]
fn single_root_bfs_test_set_is_connected() {
    let root = Rng::new(23);
    for k in 0..30 {
        let mut rng = root.split_n("conn", k);
        // A spanning path keeps the graph connected so one root suffices.
        let n = 10 + rng.below(20);
        let mut edges: Vec<EdgeRecord> = (0..n - 1)
            .map(|i| EdgeRecord::new(&format!("n{i}"), &format!("n{}", i + 1), vec![true]).unwrap())
            .collect();
        for e in random_edges(&mut rng, n, n) {
            if !edges.iter().any(|f| (f.a == e.a && f.b == e.b) || (f.a == e.b && f.b == e.a)) {
                edges.push(e);
            }
        }
        let s = split_bfs(&edges, 0.2, 0.0, &mut rng).unwrap();
        let nodes: BTreeSet<&str> = s.test_edges.iter().flat_map(|&e| [edges[e].a.as_str(), edges[e].b.as_str()]).collect();
        let mut reached = BTreeSet::from([*nodes.iter().next().unwrap()]);
        loop {
            let before = reached.len();
            for &e in &s.test_edges {
                let (a, b) = (edges[e].a.as_str(), edges[e].b.as_str());
                if reached.contains(a) || reached.contains(b) {
                    reached.insert(a);
                    reached.insert(b);
                }
            }
            if reached.len() == before {
                break;
            }
        }
        assert_eq!(reached, nodes, "graph {k}");
    }
}

proptest! {
    #[test]
    fn splits_are_deterministic_in_the_seed(seed in any::<u64>(), method in 0usize..3) {
        let edges = random_edges(&mut Rng::new(seed ^ 0x5eed), 15, 30);
        let a = split_edges(METHODS[method], &edges, 0.2, 0.16, &mut Rng::new(seed)).unwrap();
        let b = split_edges(METHODS[method], &edges, 0.2, 0.16, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        assert_partition(&a, edges.len());
    }

    #[test]
    fn random_split_sizes_follow_rounding(m in 5usize..60, test in 0.0f64..0.4, val in 0.0f64..0.4) {
        let edges = random_edges(&mut Rng::new(m as u64), 40, m);
        let n_test = (test * m as f64).round() as usize;
        let n_val = (val * m as f64).round() as usize;
        let s = split_random(&edges, test, val, &mut Rng::new(1));
        if n_test + n_val < m {
            let s = s.unwrap();
            prop_assert_eq!(s.test_edges.len(), n_test);
            prop_assert_eq!(s.val_edges.len(), n_val);
        } else {
            prop_assert!(s.is_err());
        }
    }
}
