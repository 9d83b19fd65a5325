//! Union-find with a proof forest.
//!
//! Every successful union records one forest edge carrying a justification.
//! Forest edges join distinct classes only, so each class is a tree and the
//! path between two members is unique; replaying that path explains why they
//! are equal.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct CongruenceState<J> {
    parent: Vec<usize>,
    size: Vec<usize>,
    edges: Vec<(usize, usize, J)>,
    adjacent: Vec<Vec<usize>>,
}

/// One step along a forest path: the edge id and whether it is walked from
/// its first endpoint to its second.
pub type Step = (usize, bool);

impl<J> Default for CongruenceState<J> {
    fn default() -> Self {
        CongruenceState { parent: Vec::new(), size: Vec::new(), edges: Vec::new(), adjacent: Vec::new() }
    }
}

impl<J> CongruenceState<J> {
    pub fn new(n: usize) -> Self {
        let mut s = Self::default();
        for _ in 0..n {
            s.push();
        }
        s
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Adds a singleton class and returns its index.
    pub fn push(&mut self) -> usize {
        let i = self.parent.len();
        self.parent.push(i);
        self.size.push(1);
        self.adjacent.push(Vec::new());
        i
    }

    pub fn find(&self, mut a: usize) -> usize {
        while self.parent[a] != a {
            a = self.parent[a];
        }
        a
    }

    fn find_compress(&mut self, a: usize) -> usize {
        let root = self.find(a);
        let mut cur = a;
        while self.parent[cur] != root {
            cur = std::mem::replace(&mut self.parent[cur], root);
        }
        root
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Merges the classes of `a` and `b`. Returns false, dropping `why`, when
    /// they already coincide.
    pub fn union(&mut self, a: usize, b: usize, why: J) -> bool {
        let (ra, rb) = (self.find_compress(a), self.find_compress(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if (self.size[ra], rb) >= (self.size[rb], ra) { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        let id = self.edges.len();
        self.edges.push((a, b, why));
        self.adjacent[a].push(id);
        self.adjacent[b].push(id);
        true
    }

    pub fn edge(&self, id: usize) -> (usize, usize, &J) {
        let (a, b, j) = &self.edges[id];
        (*a, *b, j)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The forest path from `a` to `b`, or `None` when they are in different classes.
    pub fn path(&self, a: usize, b: usize) -> Option<Vec<Step>> {
        if !self.same(a, b) {
            return None;
        }
        let mut came_from: Vec<Option<Step>> = vec![None; self.len()];
        let mut visited = vec![false; self.len()];
        let mut queue = VecDeque::from([a]);
        visited[a] = true;
        while let Some(x) = queue.pop_front() {
            if x == b {
                break;
            }
            for &id in &self.adjacent[x] {
                let (p, q, _) = &self.edges[id];
                let (next, forward) = if *p == x { (*q, true) } else { (*p, false) };
                if !visited[next] {
                    visited[next] = true;
                    came_from[next] = Some((id, forward));
                    queue.push_back(next);
                }
            }
        }
        let mut steps = Vec::new();
        let mut cur = b;
        while cur != a {
            let (id, forward) = came_from[cur].expect("forest connects every class");
            steps.push((id, forward));
            let (p, q, _) = &self.edges[id];
            cur = if forward { *p } else { *q };
        }
        steps.reverse();
        Some(steps)
    }

    /// Classes as sorted member lists, ordered by their least member.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for i in 0..self.len() {
            by_root[self.find(i)].push(i);
        }
        let mut out: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        out.sort_by_key(|c| c[0]);
        out
    }

    pub fn class_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.parent[i] == i).count()
    }
}
