use std::collections::BTreeSet;

use neurofeed_core::maze::{advance, generate_maze, plan_route, CaterpillarState, Direction, MazeGrid};
use proptest::prelude::*;

/// Connected and acyclic, checked with a union-find over open edges.
fn is_spanning_tree(m: &MazeGrid) -> bool {
    let n = m.cell_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut edges = 0;
    for c in 0..n {
        for d in [Direction::East, Direction::South] {
            if let Some(nb) = m.neighbor(c, d) {
                if m.is_open(c, d) {
                    let (a, b) = (find(&mut parent, c), find(&mut parent, nb));
                    if a == b {
                        return false;
                    }
                    parent[a] = b;
                    edges += 1;
                }
            }
        }
    }
    edges == n - 1
}

fn route_is_valid(m: &MazeGrid, route: &[usize]) -> bool {
    let visited: BTreeSet<usize> = route.iter().copied().collect();
    visited.len() == m.cell_count()
        && route.len() == 2 * (m.cell_count() - 1) + 1
        && route.windows(2).all(|w| m.connects(w[0], w[1]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mazes_are_perfect(w in 2usize..20, h in 2usize..20, seed in any::<u64>()) {
        let m = generate_maze(w, h, seed).unwrap();
        prop_assert!(is_spanning_tree(&m));
        for c in 0..m.cell_count() {
            for d in Direction::ALL {
                if m.neighbor(c, d).is_none() {
                    prop_assert!(!m.is_open(c, d));
                }
            }
        }
        prop_assert!(route_is_valid(&m, &plan_route(&m)));
    }

    #[test]
    fn head_moves_along_open_edges(seed in any::<u64>(), speeds in prop::collection::vec(0.0f64..8.0, 1..300)) {
        // At 8 Hz, speeds below 8 cells/s stay within one cell per tick.
        let m = generate_maze(12, 12, seed).unwrap();
        let route = plan_route(&m);
        let mut s = CaterpillarState::default();
        for v in speeds {
            let before = s.head_cell(&route);
            s = advance(s, v, 125, &route);
            let after = s.head_cell(&route);
            prop_assert!(before == after || m.connects(before, after));
        }
    }

    #[test]
    fn distance_is_independent_of_partition(
        speed in 0.0f64..12.0,
        splits in prop::collection::vec(1u64..400, 1..50),
    ) {
        let route = plan_route(&generate_maze(6, 6, 1).unwrap());
        let total: u64 = splits.iter().sum();
        let mut stepped = CaterpillarState::default();
        for &dt in &splits {
            stepped = advance(stepped, speed, dt, &route);
        }
        let once = advance(CaterpillarState::default(), speed, total, &route);
        let expected = speed * total as f64 / 1000.0;
        prop_assert!((stepped.distance - expected).abs() < 1e-9);
        prop_assert!((once.distance - expected).abs() < 1e-9);
        let steps = (route.len() - 1) as f64;
        prop_assert!((stepped.path_position - expected % steps).abs() < 1e-9
            || (stepped.path_position - expected % steps).abs() > steps - 1e-9);
    }

    #[test]
    fn same_seed_and_speeds_same_state(seed in any::<u64>(), speeds in prop::collection::vec(0.0f64..12.0, 1..100)) {
        let run = || {
            let route = plan_route(&generate_maze(12, 12, seed).unwrap());
            speeds.iter().fold(CaterpillarState::default(), |s, &v| advance(s, v, 125, &route))
        };
        prop_assert_eq!(run(), run());
    }
}
