use rand::Rng;

use super::tree::{MicroSegment, NodeId, PlannerState, SearchTree};
use super::{Checker, NearRadius, Query};
use crate::cspace::{euclidean, Scene};
use crate::error::{Error, Result};

/// Extra work per node returned by a radius query.
const RADIUS_HIT_COST: usize = 2;

/// Work per neighbour for each pass of [`rewire`].
const NEIGHBOUR_PASS_COST: usize = 6;

/// Uniform choice over the tree's non-terminal nodes.
pub fn select_node<R: Rng + ?Sized>(tree: &SearchTree, rng: &mut R) -> Result<NodeId> {
    let pool = tree.expandable();
    if pool.is_empty() {
        return Err(Error::NoExpandableNode);
    }
    Ok(pool[rng.gen_range(0..pool.len())])
}

/// Nodes within the rewiring radius of `q`.
pub fn near(tree: &SearchTree, q: &[f64], policy: &NearRadius, scene: &Scene) -> Vec<NodeId> {
    tree.within(q, policy.radius(tree.len(), scene))
}

pub(crate) fn charged_near(
    tree: &SearchTree,
    q: &[f64],
    policy: &NearRadius,
    checker: &Checker<'_>,
) -> Vec<NodeId> {
    let found = near(tree, q, policy, checker.scene());
    checker.scan(tree.len() + RADIUS_HIT_COST * found.len());
    found
}

/// Lower bound on the cost of any solution passing through `q`.
pub fn heuristic_cost(q: &[f64], start: &[f64], goal: &[f64]) -> f64 {
    euclidean(start, q) + euclidean(q, goal)
}

/// Whether a candidate at `q` is outside the informed set of `best_cost`.
pub fn reject_sample(q: &[f64], best_cost: f64, query: &Query) -> bool {
    heuristic_cost(q, &query.start, &query.goal) > best_cost
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    Advanced(NodeId),
    Failed,
}

/// Inserts `target` below `parent` through `segment`, choosing a cheaper
/// parent among `neighbours` first and then rerouting neighbours through the
/// new node when that lowers their cost. Rewired edges are straight motions.
///
/// Returns the chosen parent and the id of the inserted node.
pub fn rewire(
    tree: &mut SearchTree,
    parent: NodeId,
    target: PlannerState,
    segment: MicroSegment,
    neighbours: &[NodeId],
    checker: &Checker<'_>,
) -> (NodeId, NodeId) {
    let m = tree.divisions();
    checker.scan(2 * NEIGHBOUR_PASS_COST * neighbours.len());

    // choose parent: cheapest collision-free candidate, ties to the lowest id
    let incumbent = tree.cost(parent) + segment.cost;
    let mut candidates: Vec<(f64, NodeId)> = neighbours
        .iter()
        .map(|&s| (tree.cost(s) + euclidean(&tree.state(s).q, &target.q), s))
        .filter(|(c, _)| *c < incumbent)
        .collect();
    let mut best = (parent, segment);
    while !candidates.is_empty() {
        checker.scan(candidates.len());
        let (i, &(_, s)) = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .unwrap();
        if checker.motion(&tree.state(s).q, &target.q) {
            best = (s, MicroSegment::straight(tree.state(s), &target, m));
            break;
        }
        candidates.swap_remove(i);
    }
    let (parent, segment) = best;
    let new = tree.add(target, parent, segment);

    // reroute neighbours through the new node
    for &s in neighbours {
        if s == parent || s == tree.root() {
            continue;
        }
        let via_new = tree.cost(new) + euclidean(&tree.state(new).q, &tree.state(s).q);
        if via_new < tree.cost(s) && checker.motion(&tree.state(new).q, &tree.state(s).q) {
            let edge = MicroSegment::straight(tree.state(new), tree.state(s), m);
            checker.scan(tree.set_parent(s, new, edge));
        }
    }
    (parent, new)
}

/// Attaches `segment` (running from node `init` to `target`) to the tree.
///
/// Fails if the segment collides. In exploratory mode the segment is replaced
/// by the straight motion when that is collision-free, and the insertion goes
/// through [`rewire`]. Otherwise the segment is stored as given.
pub fn extend(
    tree: &mut SearchTree,
    segment: MicroSegment,
    init: NodeId,
    target: PlannerState,
    explore: bool,
    checker: &Checker<'_>,
    policy: &NearRadius,
) -> Extension {
    if !checker.segment(&segment.waypoints) {
        return Extension::Failed;
    }
    if !explore {
        return Extension::Advanced(tree.add(target, init, segment));
    }
    let m = tree.divisions();
    let mut segment = segment;
    if segment.waypoints.len() > 2 && checker.motion(&tree.state(init).q, &target.q) {
        segment = MicroSegment::straight(tree.state(init), &target, m);
    }
    let neighbours = charged_near(tree, &target.q, policy, checker);
    let (_, new) = rewire(tree, init, target, segment, &neighbours, checker);
    Extension::Advanced(new)
}

/// Removes from both trees every node whose heuristic cost exceeds
/// `best_cost`, together with its descendants. Roots are kept. Returns the
/// number of nodes removed.
pub fn prune(trees: [&mut SearchTree; 2], best_cost: f64, query: &Query) -> usize {
    if !best_cost.is_finite() {
        return 0;
    }
    let mut removed = 0;
    for tree in trees {
        let doomed: Vec<NodeId> = tree
            .ids()
            .filter(|&id| {
                id != tree.root()
                    && heuristic_cost(&tree.state(id).q, &query.start, &query.goal) > best_cost
            })
            .collect();
        removed += tree.remove_subtrees(&doomed);
    }
    removed
}

#[cfg(test)]
mod tests {
    use super::super::tree::Orientation;
    use super::*;
    use crate::clock::{Clock, Stopwatch};
    use crate::cspace::{ConfigSpace, Obstacle, RobotModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_scene() -> Scene {
        Scene::with_default_resolution(
            ConfigSpace::cube(2, -5.0, 5.0).unwrap(),
            RobotModel::PointRobot,
            vec![],
        )
        .unwrap()
    }

    fn st(x: f64, y: f64, phase: usize) -> PlannerState {
        PlannerState::new(vec![x, y], phase)
    }

    fn straight(a: &PlannerState, b: &PlannerState) -> MicroSegment {
        MicroSegment::straight(a, b, 10)
    }

    #[test]
    fn select_node_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        assert_eq!(select_node(&t, &mut rng).unwrap(), t.root());
        let root = t.state(t.root()).clone();
        let end = st(1.0, 0.0, 10);
        t.add(end.clone(), t.root(), straight(&root, &end));
        for _ in 0..50 {
            assert_eq!(select_node(&t, &mut rng).unwrap(), t.root());
        }
        let g = SearchTree::new(vec![0.0, 0.0], Orientation::FromGoal, 0);
        assert!(matches!(
            select_node(&g, &mut rng),
            Err(Error::NoExpandableNode)
        ));
    }

    #[test]
    fn select_node_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        let mut prev = t.root();
        for i in 1..4 {
            let s = st(i as f64, 0.0, i);
            let e = straight(t.state(prev), &s);
            prev = t.add(s, prev, e);
        }
        let mut counts = std::collections::HashMap::new();
        for _ in 0..10_000 {
            *counts
                .entry(select_node(&t, &mut rng).unwrap())
                .or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            let f = *c as f64 / 10_000.0;
            assert!((0.20..=0.30).contains(&f), "{f}");
        }
    }

    #[test]
    fn near_examples() {
        let scene = open_scene();
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        let pts = [(1.0, 0.0), (0.0, 1.4), (1.2, 1.2), (3.0, 0.0)];
        let mut ids = vec![t.root()];
        for (i, p) in pts.iter().enumerate() {
            let s = st(p.0, p.1, i + 1);
            let e = straight(t.state(t.root()), &s);
            ids.push(t.add(s, t.root(), e));
        }
        let q = [0.0, 0.0];
        let all = near(&t, &q, &NearRadius::Fixed { radius: 100.0 }, &scene);
        assert_eq!(all.len(), 5);
        assert_eq!(
            near(&t, &q, &NearRadius::Fixed { radius: 0.0 }, &scene),
            vec![t.root()]
        );
        let got = near(&t, &q, &NearRadius::Fixed { radius: 1.5 }, &scene);
        let expected: Vec<NodeId> = ids
            .iter()
            .copied()
            .filter(|&id| euclidean(&t.state(id).q, &q) <= 1.5)
            .collect();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn shrinking_ball_radius() {
        let scene = Scene::with_default_resolution(
            ConfigSpace::cube(2, 0.0, 1.0).unwrap(),
            RobotModel::PointRobot,
            vec![],
        )
        .unwrap();
        let policy = NearRadius::ShrinkingBall { gamma: None };
        // unit square over the unit disc
        let gamma = 2.0 * 1.5f64.sqrt() / std::f64::consts::PI.sqrt();
        assert_eq!(policy.radius(1, &scene), 0.0);
        assert!((policy.radius(10, &scene) - 0.1 * 2f64.sqrt()).abs() < 1e-12);
        let r = policy.radius(1000, &scene);
        assert!((r - gamma * (1000f64.ln() / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn heuristic_and_rejection() {
        let q = Query::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(heuristic_cost(&[0.0, 0.0], &q.start, &q.goal), 1.0);
        assert_eq!(heuristic_cost(&[0.5, 0.0], &q.start, &q.goal), 1.0);
        let h = heuristic_cost(&[0.5, 1.0], &q.start, &q.goal);
        assert!((h - 2.0 * 1.25f64.sqrt()).abs() < 1e-12);
        assert!((h - 2.236).abs() < 1e-3);
        assert!(reject_sample(&[0.5, 1.0], 2.0, &q));
        assert!(!reject_sample(&[0.3, 0.0], 1.0, &q));
        assert!(!reject_sample(&[0.5, 1.0], f64::INFINITY, &q));
    }

    #[test]
    fn rewire_choose_parent_and_reroute() {
        let scene = open_scene();
        let watch = Stopwatch::start(Clock::Wall);
        let checker = Checker::new(&scene, &watch);
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        let root = t.root();
        let a_state = st(2.0, 0.0, 2);
        let a = t.add(a_state.clone(), root, straight(t.state(root), &a_state));
        let target = st(1.0, 0.0, 3);
        let proposed = straight(&a_state, &target);
        assert_eq!(t.cost(a) + proposed.cost, 3.0);
        let (parent, new) = rewire(&mut t, a, target, proposed, &[root, a], &checker);
        assert_eq!(parent, root);
        assert_eq!(t.parent(new), Some(root));
        assert_eq!(t.cost(new), 1.0);
        // 1 + 1 is not below 2: a keeps its parent
        assert_eq!(t.parent(a), Some(root));
        assert_eq!(t.cost(a), 2.0);
        t.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn rewire_with_no_neighbours_keeps_segment() {
        let scene = open_scene();
        let watch = Stopwatch::start(Clock::Wall);
        let checker = Checker::new(&scene, &watch);
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        let root = t.root();
        let target = st(1.0, 1.0, 4);
        let curved = MicroSegment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0.0, 0.2, 0.4],
            0,
            4,
        );
        let (parent, new) = rewire(&mut t, root, target, curved.clone(), &[], &checker);
        assert_eq!(parent, root);
        assert_eq!(t.edge(new), Some(&curved));
    }

    #[test]
    fn reroute_propagates_to_descendants() {
        let scene = open_scene();
        let watch = Stopwatch::start(Clock::Wall);
        let checker = Checker::new(&scene, &watch);
        let mut t = SearchTree::new(vec![0.0, 0.0], Orientation::FromStart, 10);
        let root = t.root();
        let far = st(0.0, 3.0, 1);
        let far_id = t.add(far.clone(), root, straight(t.state(root), &far));
        let b = st(1.0, 3.0, 2);
        let b_id = t.add(b.clone(), far_id, straight(&far, &b));
        let c = st(2.0, 3.0, 3);
        let c_id = t.add(c.clone(), b_id, straight(&b, &c));
        // detour edge to b costs 3 + 1 = 4; node at (1, 2) reaches b for sqrt(5) + 1
        let hub = st(1.0, 2.0, 4);
        let seg = straight(t.state(root), &hub);
        let (_, hub_id) = rewire(&mut t, root, hub.clone(), seg, &[b_id], &checker);
        assert_eq!(t.parent(b_id), Some(hub_id));
        assert!((t.cost(b_id) - (5f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!((t.cost(c_id) - (5f64.sqrt() + 2.0)).abs() < 1e-12);
        t.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn extend_examples() {
        let scene = Scene::with_default_resolution(
            ConfigSpace::cube(2, -2.0, 2.0).unwrap(),
            RobotModel::PointRobot,
            vec![Obstacle::AxisBox {
                min: vec![-0.1, -0.1],
                max: vec![0.1, 0.1],
            }],
        )
        .unwrap();
        let watch = Stopwatch::start(Clock::Wall);
        let checker = Checker::new(&scene, &watch);
        let policy = NearRadius::Fixed { radius: 0.5 };
        let mut t = SearchTree::new(vec![-1.0, 0.0], Orientation::FromStart, 10);
        let root = t.root();

        let blocked =
            MicroSegment::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0.0, 0.5], 0, 5);
        assert_eq!(
            extend(
                &mut t,
                blocked,
                root,
                st(1.0, 0.0, 5),
                true,
                &checker,
                &policy
            ),
            Extension::Failed
        );
        assert_eq!(t.len(), 1);

        let curved = MicroSegment::new(
            vec![vec![-1.0, 0.0], vec![-1.0, 1.0], vec![-0.5, 1.0]],
            vec![0.0, 0.1, 0.2],
            0,
            2,
        );
        let target = st(-0.5, 1.0, 2);
        let Extension::Advanced(id) = extend(
            &mut t,
            curved.clone(),
            root,
            target.clone(),
            true,
            &checker,
            &policy,
        ) else {
            panic!("extension failed")
        };
        let edge = t.edge(id).unwrap();
        assert_eq!(edge.waypoints.len(), 2);
        assert!((edge.cost - euclidean(&[-1.0, 0.0], &[-0.5, 1.0])).abs() < 1e-12);
        assert!(edge.cost <= curved.cost);

        let Extension::Advanced(id) = extend(
            &mut t,
            curved.clone(),
            root,
            target,
            false,
            &checker,
            &policy,
        ) else {
            panic!("extension failed")
        };
        assert_eq!(t.edge(id), Some(&curved));
        t.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn prune_examples() {
        let query = Query::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let mut a = SearchTree::new(query.start.clone(), Orientation::FromStart, 10);
        let mut b = SearchTree::new(query.goal.clone(), Orientation::FromGoal, 10);
        let root = a.root();
        let far = st(0.5, 2.0, 3);
        let far_id = a.add(far.clone(), root, straight(a.state(root), &far));
        let child = st(0.5, 0.1, 4);
        let child_id = a.add(child.clone(), far_id, straight(&far, &child));
        let on_line = st(0.5, 0.0, 2);
        let on_id = a.add(on_line.clone(), root, straight(a.state(root), &on_line));

        assert_eq!(prune([&mut a, &mut b], f64::INFINITY, &query), 0);
        assert!(
            (heuristic_cost(&far.q, &query.start, &query.goal) - 2.0 * 4.25f64.sqrt()).abs()
                < 1e-12
        );
        assert_eq!(prune([&mut a, &mut b], 2.0, &query), 2);
        assert!(!a.contains(far_id) && !a.contains(child_id));
        assert!(a.contains(on_id) && a.contains(root));
        assert_eq!(b.len(), 1);
        a.check_invariants(1e-12).unwrap();
    }
}
