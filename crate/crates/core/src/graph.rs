//! Directed acyclic graphs over named variables.

use std::collections::VecDeque;

use crate::data::Variable;
use crate::error::{Error, Result};

/// True iff the directed graph on `0..n` with the given edges has a topological order.
pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    topological_sort(n, edges).is_some()
}

fn topological_sort(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return None;
        }
        indeg[v] += 1;
        children[u].push(v);
    }
    // Kahn's algorithm, smallest index first so the order is stable.
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &children[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(std::cmp::Reverse(v));
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// A DAG `G = (V, E)`. Parent lists are kept sorted by node index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    nodes: Vec<Variable>,
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(nodes: Vec<Variable>) -> Self {
        let n = nodes.len();
        Dag {
            nodes,
            parents: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(nodes: Vec<Variable>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = Dag::empty(nodes);
        for &(p, c) in edges {
            dag.add_edge(p, c)?;
        }
        Ok(dag)
    }

    pub fn from_named_edges(nodes: Vec<Variable>, edges: &[(&str, &str)]) -> Result<Self> {
        let mut dag = Dag::empty(nodes);
        for (p, c) in edges {
            let p = dag.require(p)?;
            let c = dag.require(c)?;
            dag.add_edge(p, c)?;
        }
        Ok(dag)
    }

    pub fn nodes(&self) -> &[Variable] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|v| v.name == name)
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| {
            let valid: Vec<&str> = self.nodes.iter().map(|v| v.name.as_str()).collect();
            Error::Argument(format!(
                "unknown node {name:?}; valid names: {}",
                valid.join(", ")
            ))
        })
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&i)).collect()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Edges as (parent, child), sorted by parent index then child index.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Whether `to` is reachable from `from` along directed edges (trivially true when equal).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        self.descendants(from)[to]
    }

    /// Membership mask of strict descendants of `i`.
    pub fn descendants(&self, i: usize) -> Vec<bool> {
        let children: Vec<Vec<usize>> = (0..self.len()).map(|u| self.children(u)).collect();
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            for &v in &children[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn topological_order(&self) -> Vec<usize> {
        topological_sort(self.len(), &self.edges()).expect("Dag invariant: acyclic")
    }

    /// Adds `parent → child`, rejecting self-loops, duplicates and cycles.
    pub fn add_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        let n = self.len();
        if parent >= n || child >= n {
            return Err(Error::Argument("edge endpoint out of range".into()));
        }
        if parent == child {
            return Err(Error::Argument(format!("self-loop on {}", self.name(parent))));
        }
        if self.has_edge(parent, child) {
            return Err(Error::Argument(format!(
                "duplicate edge {} -> {}",
                self.name(parent),
                self.name(child)
            )));
        }
        if self.reaches(child, parent) {
            return Err(Error::Cycle {
                parent: self.name(parent).to_owned(),
                child: self.name(child).to_owned(),
            });
        }
        let ps = &mut self.parents[child];
        let at = ps.binary_search(&parent).unwrap_err();
        ps.insert(at, parent);
        Ok(())
    }

    pub fn remove_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        match self.parents.get(child).map(|ps| ps.binary_search(&parent)) {
            Some(Ok(at)) => {
                self.parents[child].remove(at);
                Ok(())
            }
            _ => Err(Error::Argument(format!(
                "edge {parent} -> {child} not present"
            ))),
        }
    }

    pub fn reverse_edge(&mut self, parent: usize, child: usize) -> Result<()> {
        self.remove_edge(parent, child)?;
        if let Err(e) = self.add_edge(child, parent) {
            self.add_edge(parent, child).expect("restoring a removed edge");
            return Err(e);
        }
        Ok(())
    }

    pub fn set_parents(&mut self, child: usize, parents: Vec<usize>) -> Result<()> {
        let old = std::mem::take(&mut self.parents[child]);
        for &p in &parents {
            if let Err(e) = self.add_edge(p, child) {
                self.parents[child] = old;
                return Err(e);
            }
        }
        Ok(())
    }

    /// Undirected skeleton as sorted (min, max) index pairs.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut s: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        s.sort_unstable();
        s
    }
}

/// Every DAG over `nodes`, found by filtering all subsets of ordered pairs.
///
/// Practical only for a handful of nodes (3 nodes → 25 DAGs, 4 → 543).
pub fn enumerate_dags(nodes: &[Variable]) -> Vec<Dag> {
    let n = nodes.len();
    assert!(n <= 5, "exhaustive DAG enumeration is limited to 5 nodes");
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<_> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        if is_acyclic(n, &edges) {
            out.push(Dag::from_edges(nodes.to_vec(), &edges).expect("acyclic edge set"));
        }
    }
    out
}
