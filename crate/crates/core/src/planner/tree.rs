use serde::{Deserialize, Serialize};

use crate::cspace::{euclidean, polyline_length};

/// A configuration paired with a phase, stored as an index into the planner's
/// phase grid (`phase / m` is the phase value).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub q: Vec<f64>,
    pub phase: usize,
}

impl PlannerState {
    pub fn new(q: Vec<f64>, phase: usize) -> Self {
        PlannerState { q, phase }
    }
}

/// Polyline edge between two planner states, stored in travel order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroSegment {
    pub waypoints: Vec<Vec<f64>>,
    /// Phase value of every waypoint.
    pub phases: Vec<f64>,
    pub start_phase: usize,
    pub end_phase: usize,
    pub cost: f64,
}

impl MicroSegment {
    /// Builds a segment, computing its cost from the waypoints.
    pub fn new(
        waypoints: Vec<Vec<f64>>,
        phases: Vec<f64>,
        start_phase: usize,
        end_phase: usize,
    ) -> Self {
        debug_assert_eq!(waypoints.len(), phases.len());
        let cost = polyline_length(&waypoints);
        MicroSegment {
            waypoints,
            phases,
            start_phase,
            end_phase,
            cost,
        }
    }

    /// The straight motion between two states.
    pub fn straight(from: &PlannerState, to: &PlannerState, m: usize) -> Self {
        let phase = |i: usize| i as f64 / m as f64;
        MicroSegment {
            cost: euclidean(&from.q, &to.q),
            waypoints: vec![from.q.clone(), to.q.clone()],
            phases: vec![phase(from.phase), phase(to.phase)],
            start_phase: from.phase,
            end_phase: to.phase,
        }
    }

    pub fn first(&self) -> &[f64] {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &[f64] {
        self.waypoints.last().unwrap()
    }

    pub fn reversed(&self) -> MicroSegment {
        let mut waypoints = self.waypoints.clone();
        waypoints.reverse();
        let mut phases = self.phases.clone();
        phases.reverse();
        MicroSegment {
            waypoints,
            phases,
            start_phase: self.end_phase,
            end_phase: self.start_phase,
            cost: self.cost,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Direction of phase growth in a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rooted at the start, phase increases away from the root.
    FromStart,
    /// Rooted at the goal, phase decreases away from the root.
    FromGoal,
}

impl Orientation {
    pub fn root_phase(self, m: usize) -> usize {
        match self {
            Orientation::FromStart => 0,
            Orientation::FromGoal => m,
        }
    }

    pub fn terminal_phase(self, m: usize) -> usize {
        match self {
            Orientation::FromStart => m,
            Orientation::FromGoal => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Node {
    state: PlannerState,
    parent: Option<NodeId>,
    edge: Option<MicroSegment>,
    cost: f64,
    children: Vec<NodeId>,
}

/// Rooted tree of planner states. Node ids stay stable across removals.
#[derive(Clone, Debug)]
pub struct SearchTree {
    slots: Vec<Option<Node>>,
    root: NodeId,
    orientation: Orientation,
    m: usize,
    live: usize,
    // nodes not at the terminal phase; rebuilt after removals
    expandable: Vec<NodeId>,
    // live configurations packed for neighbour scans, with their ids and
    // each slot's position in the packing
    points: Vec<f64>,
    packed: Vec<NodeId>,
    position: Vec<usize>,
    dim: usize,
}

impl SearchTree {
    pub fn new(root: Vec<f64>, orientation: Orientation, m: usize) -> Self {
        let dim = root.len();
        let points = root.clone();
        let state = PlannerState::new(root, orientation.root_phase(m));
        let mut tree = SearchTree {
            slots: vec![Some(Node {
                state,
                parent: None,
                edge: None,
                cost: 0.0,
                children: Vec::new(),
            })],
            root: NodeId(0),
            orientation,
            m,
            live: 1,
            expandable: Vec::new(),
            points,
            packed: vec![NodeId(0)],
            position: vec![0],
            dim,
        };
        if m > 0 {
            tree.expandable.push(NodeId(0));
        }
        tree
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn divisions(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.slots.get(id.0).is_some_and(|s| s.is_some())
    }

    fn node(&self, id: NodeId) -> &Node {
        self.slots[id.0].as_ref().expect("node was removed")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.slots[id.0].as_mut().expect("node was removed")
    }

    pub fn state(&self, id: NodeId) -> &PlannerState {
        &self.node(id).state
    }

    pub fn cost(&self, id: NodeId) -> f64 {
        self.node(id).cost
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    pub fn edge(&self, id: NodeId) -> Option<&MicroSegment> {
        self.node(id).edge.as_ref()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.node(id).children
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| NodeId(i))
    }

    /// Nodes whose phase is not the terminal phase of this tree.
    pub fn expandable(&self) -> &[NodeId] {
        &self.expandable
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.state(id).phase == self.orientation.terminal_phase(self.m)
    }

    /// Adds `state` as a child of `parent` reached through `edge`.
    pub fn add(&mut self, state: PlannerState, parent: NodeId, edge: MicroSegment) -> NodeId {
        let id = NodeId(self.slots.len());
        let cost = self.cost(parent) + edge.cost;
        let terminal = state.phase == self.orientation.terminal_phase(self.m);
        self.points.extend_from_slice(&state.q);
        self.position.push(self.packed.len());
        self.packed.push(id);
        self.slots.push(Some(Node {
            state,
            parent: Some(parent),
            edge: Some(edge),
            cost,
            children: Vec::new(),
        }));
        self.node_mut(parent).children.push(id);
        self.live += 1;
        if !terminal {
            self.expandable.push(id);
        }
        id
    }

    /// Moves `child` under `new_parent` and refreshes the cost of its whole
    /// subtree, returning the number of nodes updated. The caller guarantees
    /// `new_parent` is not a descendant of `child`.
    pub fn set_parent(&mut self, child: NodeId, new_parent: NodeId, edge: MicroSegment) -> usize {
        debug_assert_ne!(child, self.root);
        if let Some(old) = self.node(child).parent {
            self.node_mut(old).children.retain(|c| *c != child);
        }
        self.node_mut(new_parent).children.push(child);
        let node = self.node_mut(child);
        node.parent = Some(new_parent);
        node.edge = Some(edge);
        self.propagate_cost(child)
    }

    /// Recomputes cost-to-come for `id` and every descendant, depth first.
    fn propagate_cost(&mut self, id: NodeId) -> usize {
        let mut stack = vec![id];
        let mut visited = 0;
        while let Some(n) = stack.pop() {
            visited += 1;
            let node = self.node(n);
            let cost = match (node.parent, &node.edge) {
                (Some(p), Some(e)) => self.cost(p) + e.cost,
                _ => 0.0,
            };
            let node = self.node_mut(n);
            node.cost = cost;
            stack.extend(node.children.iter().copied());
        }
        visited
    }

    /// Removes `id` and all of its descendants. The root cannot be removed.
    /// Returns the number of nodes removed.
    pub fn remove_subtree(&mut self, id: NodeId) -> usize {
        self.remove_subtrees(&[id])
    }

    /// Removes every listed node together with its descendants. Ids already
    /// removed (for instance as a descendant of an earlier entry) and the
    /// root are skipped.
    pub fn remove_subtrees(&mut self, ids: &[NodeId]) -> usize {
        let mut removed = 0;
        for &id in ids {
            if id == self.root || !self.contains(id) {
                continue;
            }
            if let Some(p) = self.node(id).parent {
                self.node_mut(p).children.retain(|c| *c != id);
            }
            let mut stack = vec![id];
            while let Some(n) = stack.pop() {
                if let Some(node) = self.slots[n.0].take() {
                    removed += 1;
                    self.unpack(n);
                    stack.extend(node.children);
                }
            }
        }
        if removed > 0 {
            self.live -= removed;
            let slots = &self.slots;
            self.expandable.retain(|n| slots[n.0].is_some());
        }
        removed
    }

    fn unpack(&mut self, id: NodeId) {
        let at = self.position[id.0];
        let last = self.packed.len() - 1;
        let d = self.dim;
        if at != last {
            let moved = self.packed[last];
            self.points.copy_within(last * d..(last + 1) * d, at * d);
            self.packed[at] = moved;
            self.position[moved.0] = at;
        }
        self.points.truncate(last * d);
        self.packed.pop();
        self.position[id.0] = usize::MAX;
    }

    /// Waypoints from the root to `id`, concatenating edge polylines.
    pub fn path_from_root(&self, id: NodeId) -> Vec<Vec<f64>> {
        let mut edges = Vec::new();
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            edges.push(self.node(cur).edge.as_ref().unwrap());
            cur = p;
        }
        let mut path = vec![self.state(self.root).q.clone()];
        for e in edges.iter().rev() {
            path.extend(e.waypoints.iter().skip(1).cloned());
        }
        path
    }

    /// Nearest live node by configuration distance. Ties go to the lowest id.
    pub fn nearest(&self, q: &[f64]) -> NodeId {
        let mut best = (self.root, f64::INFINITY);
        for (&id, p) in self.packed.iter().zip(self.points.chunks_exact(self.dim)) {
            let d = squared_distance(p, q);
            if d < best.1 || (d == best.1 && id < best.0) {
                best = (id, d);
            }
        }
        best.0
    }

    /// Live nodes within `radius` of `q`. The order is deterministic but is
    /// id order only until the first removal.
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<NodeId> {
        // loose prefilter; the exact test decides
        let r2 = radius * radius * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        self.packed
            .iter()
            .zip(self.points.chunks_exact(self.dim))
            .filter(|(_, p)| squared_distance(p, q) <= r2 && euclidean(p, q) <= radius)
            .map(|(&id, _)| id)
            .collect()
    }

    /// Checks the structural invariants: one root with the orientation's root
    /// phase, acyclic parent links, child lists matching parent links, and
    /// cost-to-come consistent with edge costs within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let root = self.node(self.root);
        if root.parent.is_some() || root.cost != 0.0 {
            return Err("root has a parent or nonzero cost".into());
        }
        if root.state.phase != self.orientation.root_phase(self.m) {
            return Err("root phase does not match orientation".into());
        }
        let mut count = 0;
        for id in self.ids() {
            count += 1;
            let n = self.node(id);
            if id == self.root {
                continue;
            }
            let p = n
                .parent
                .ok_or_else(|| format!("node {} has no parent", id.0))?;
            if !self.contains(p) {
                return Err(format!("node {} has a removed parent", id.0));
            }
            if !self.node(p).children.contains(&id) {
                return Err(format!("node {} missing from its parent's children", id.0));
            }
            let e = n
                .edge
                .as_ref()
                .ok_or_else(|| format!("node {} has no edge", id.0))?;
            if (e.cost - polyline_length(&e.waypoints)).abs() > tol {
                return Err(format!("edge cost of node {} is stale", id.0));
            }
            if euclidean(e.first(), &self.node(p).state.q) > tol
                || euclidean(e.last(), &n.state.q) > tol
            {
                return Err(format!("edge of node {} does not join its endpoints", id.0));
            }
            let expected = self.node(p).cost + e.cost;
            if (n.cost - expected).abs() > tol {
                return Err(format!("node {} cost {} != {}", id.0, n.cost, expected));
            }
            // walking up must reach the root within `len` steps
            let mut cur = id;
            let mut steps = 0;
            while let Some(up) = self.node(cur).parent {
                cur = up;
                steps += 1;
                if steps > self.live {
                    return Err(format!("cycle through node {}", id.0));
                }
            }
            if cur != self.root {
                return Err(format!("node {} is not connected to the root", id.0));
            }
        }
        if count != self.live {
            return Err("live count is stale".into());
        }
        Ok(())
    }
}
