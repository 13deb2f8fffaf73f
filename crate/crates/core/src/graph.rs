//! Mixed graphs over named nodes: directed and undirected edges, at most one
//! edge per pair. DAGs, CPDAGs and partially directed graphs share this one
//! representation; learners and orientation passes operate on it in place.
//!
//! Undirected edges can carry a conflict mark (two colliders demanded
//! opposite directions). Marked edges are left alone by Meek closure and by
//! later orientation passes, and they never contribute to ancestry.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelativeSet {
    Parents,
    Children,
    Neighbors,
    Ancestors,
    Descendants,
}

/// Directed-edge constraints by node name. `forbidden` bans a specific
/// direction; `required` pins it. The default learner setup forbids every
/// edge out of the outcome so it can only ever be a sink.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructuralConstraints {
    pub forbidden: BTreeSet<(String, String)>,
    pub required: BTreeSet<(String, String)>,
}

impl StructuralConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn outcome_sink(outcome: &str, columns: &[String]) -> Self {
        let mut forbidden = BTreeSet::new();
        for c in columns {
            if c != outcome {
                forbidden.insert((outcome.to_string(), c.clone()));
            }
        }
        StructuralConstraints { forbidden, required: BTreeSet::new() }
    }

    pub fn resolve(&self, names: &[String]) -> Result<ResolvedConstraints> {
        let index: HashMap<&str, usize> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let look = |name: &str| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::config(format!("constraint names unknown column {name}")))
        };
        let mut forbidden = HashSet::new();
        for (a, b) in &self.forbidden {
            forbidden.insert((look(a)?, look(b)?));
        }
        let mut required = BTreeSet::new();
        for (a, b) in &self.required {
            let e = (look(a)?, look(b)?);
            if forbidden.contains(&e) {
                return Err(Error::config(format!("edge {a} -> {b} both required and forbidden")));
            }
            required.insert(e);
        }
        Ok(ResolvedConstraints { forbidden, required })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ResolvedConstraints {
    pub forbidden: HashSet<(usize, usize)>,
    pub required: BTreeSet<(usize, usize)>,
}

impl ResolvedConstraints {
    pub fn is_forbidden(&self, from: usize, to: usize) -> bool {
        self.forbidden.contains(&(from, to))
    }
}

/// Outcome of a hypothetical directed edge `from -> to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdditionCheck {
    pub creates_cycle: bool,
    pub creates_new_unshielded_collider: bool,
}

impl AdditionCheck {
    pub fn ok(&self) -> bool {
        !self.creates_cycle && !self.creates_new_unshielded_collider
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    neigh: Vec<BTreeSet<usize>>,
    locked: BTreeSet<(usize, usize)>,
}

fn ukey(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MixedGraph {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::data(format!("invalid node name {name:?}")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate node name {name}")));
            }
        }
        let n = names.len();
        Ok(MixedGraph {
            names,
            index,
            parents: vec![BTreeSet::new(); n],
            children: vec![BTreeSet::new(); n],
            neigh: vec![BTreeSet::new(); n],
            locked: BTreeSet::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn try_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::data(format!("unknown node {name}")))
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::data(format!("self loop at {}", self.names[a])));
        }
        if a >= self.n() || b >= self.n() {
            return Err(Error::internal("node index out of range".to_string()));
        }
        Ok(())
    }

    pub fn add_directed(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_pair(from, to)?;
        if self.adjacent(from, to) {
            return Err(Error::data(format!(
                "edge between {} and {} already present",
                self.names[from], self.names[to]
            )));
        }
        self.children[from].insert(to);
        self.parents[to].insert(from);
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        if self.adjacent(a, b) {
            return Err(Error::data(format!(
                "edge between {} and {} already present",
                self.names[a], self.names[b]
            )));
        }
        self.neigh[a].insert(b);
        self.neigh[b].insert(a);
        Ok(())
    }

    /// Removes whatever edge connects the pair.
    pub fn remove_edge(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        if !self.adjacent(a, b) {
            return Err(Error::data(format!(
                "no edge between {} and {}",
                self.names[a], self.names[b]
            )));
        }
        self.children[a].remove(&b);
        self.children[b].remove(&a);
        self.parents[a].remove(&b);
        self.parents[b].remove(&a);
        self.neigh[a].remove(&b);
        self.neigh[b].remove(&a);
        self.locked.remove(&ukey(a, b));
        Ok(())
    }

    /// Turns the undirected edge a - b into a -> b. Conflict-marked edges
    /// refuse orientation.
    pub fn orient(&mut self, a: usize, b: usize) -> Result<()> {
        if !self.has_undirected(a, b) {
            return Err(Error::data(format!(
                "no undirected edge between {} and {}",
                self.names[a], self.names[b]
            )));
        }
        if self.is_locked(a, b) {
            return Err(Error::data(format!(
                "edge {} - {} is conflict-marked",
                self.names[a], self.names[b]
            )));
        }
        self.neigh[a].remove(&b);
        self.neigh[b].remove(&a);
        self.children[a].insert(b);
        self.parents[b].insert(a);
        Ok(())
    }

    /// Turns the directed edge a -> b back into an undirected edge.
    pub fn unorient(&mut self, a: usize, b: usize) -> Result<()> {
        if !self.has_directed(a, b) {
            return Err(Error::data(format!(
                "no directed edge {} -> {}",
                self.names[a], self.names[b]
            )));
        }
        self.children[a].remove(&b);
        self.parents[b].remove(&a);
        self.neigh[a].insert(b);
        self.neigh[b].insert(a);
        Ok(())
    }

    pub fn set_conflict(&mut self, a: usize, b: usize) -> Result<()> {
        if !self.has_undirected(a, b) {
            return Err(Error::data("conflict mark requires an undirected edge".to_string()));
        }
        self.locked.insert(ukey(a, b));
        Ok(())
    }

    pub fn clear_conflict(&mut self, a: usize, b: usize) {
        self.locked.remove(&ukey(a, b));
    }

    pub fn is_locked(&self, a: usize, b: usize) -> bool {
        self.locked.contains(&ukey(a, b))
    }

    pub fn conflicts(&self) -> &BTreeSet<(usize, usize)> {
        &self.locked
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.children[from].contains(&to)
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.neigh[a].contains(&b)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }

    pub fn parents(&self, v: usize) -> &BTreeSet<usize> {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    pub fn undirected_neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.neigh[v]
    }

    /// All nodes connected to v by any edge.
    pub fn adjacents(&self, v: usize) -> BTreeSet<usize> {
        let mut s = self.neigh[v].clone();
        s.extend(self.parents[v].iter().copied());
        s.extend(self.children[v].iter().copied());
        s
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ch) in self.children.iter().enumerate() {
            for &b in ch {
                out.push((a, b));
            }
        }
        out
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.neigh.iter().enumerate() {
            for &b in ns {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.directed_edges().len() + self.undirected_edges().len()
    }

    pub fn is_fully_directed(&self) -> bool {
        self.neigh.iter().all(|s| s.is_empty())
    }

    /// True iff a directed path from -> ... -> to exists (length >= 1),
    /// following directed edges only.
    pub fn directed_path_exists(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::new();
        for &c in &self.children[from] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
        while let Some(v) = queue.pop_front() {
            if v == to {
                return true;
            }
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    /// Ancestors/descendants follow directed edges only and exclude the node
    /// itself; neighbors are the undirected-adjacent nodes.
    pub fn relatives(&self, v: usize, kind: RelativeSet) -> BTreeSet<usize> {
        match kind {
            RelativeSet::Parents => self.parents[v].clone(),
            RelativeSet::Children => self.children[v].clone(),
            RelativeSet::Neighbors => self.neigh[v].clone(),
            RelativeSet::Ancestors => self.reach(v, true),
            RelativeSet::Descendants => self.reach(v, false),
        }
    }

    fn reach(&self, v: usize, backwards: bool) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(v);
        while let Some(u) = queue.pop_front() {
            let next = if backwards { &self.parents[u] } else { &self.children[u] };
            for &w in next {
                if w != v && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Acyclicity of the directed part (undirected edges ignored).
    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Kahn's algorithm over directed edges; ties by node index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut ready: BTreeSet<usize> =
            (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::data("directed part contains a cycle"));
        }
        Ok(order)
    }

    /// Unshielded colliders (a, c, b): a -> c <- b with a < b and a, b
    /// nonadjacent.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.n() {
            let ps: Vec<usize> = self.parents[c].iter().copied().collect();
            for i in 0..ps.len() {
                for j in (i + 1)..ps.len() {
                    let (a, b) = (ps[i], ps[j]);
                    if !self.adjacent(a, b) {
                        out.insert((a, c, b));
                    }
                }
            }
        }
        out
    }

    /// What committing `from -> to` would do: a cycle exists iff a directed
    /// path to -> ... -> from already exists; a new unshielded collider iff
    /// `to` has a parent nonadjacent to `from`.
    pub fn validate_edge_addition(&self, from: usize, to: usize) -> AdditionCheck {
        let creates_cycle = self.directed_path_exists(to, from);
        let creates_new_unshielded_collider = self.parents[to]
            .iter()
            .any(|&p| p != from && !self.adjacent(p, from));
        AdditionCheck { creates_cycle, creates_new_unshielded_collider }
    }

    /// Skeleton plus v-structure orientations of a DAG.
    pub fn pattern_of_dag(&self) -> Result<MixedGraph> {
        if !self.is_fully_directed() {
            return Err(Error::data("pattern requires a fully directed graph"));
        }
        self.topological_order()?;
        let mut pat = MixedGraph::new(self.names.clone())?;
        for (a, b) in self.directed_edges() {
            pat.add_undirected(a, b)?;
        }
        for (a, c, b) in self.v_structures() {
            if pat.has_undirected(a, c) {
                pat.orient(a, c)?;
            }
            if pat.has_undirected(b, c) {
                pat.orient(b, c)?;
            }
        }
        Ok(pat)
    }

    /// Meek's orientation rules to fixpoint. Conflict-marked edges and
    /// forbidden directions are never oriented.
    pub fn apply_meek_rules(&mut self, constraints: Option<&ResolvedConstraints>) {
        let allowed = |g: &Self, a: usize, b: usize| -> bool {
            if g.is_locked(a, b) {
                return false;
            }
            match constraints {
                Some(c) => !c.is_forbidden(a, b),
                None => true,
            }
        };
        loop {
            let mut oriented = None;
            'scan: for (x, y) in self.undirected_edges() {
                for (a, b) in [(x, y), (y, x)] {
                    if !allowed(self, a, b) {
                        continue;
                    }
                    if self.meek_fires(a, b) {
                        oriented = Some((a, b));
                        break 'scan;
                    }
                }
            }
            match oriented {
                Some((a, b)) => self.orient(a, b).expect("undirected edge vanished"),
                None => break,
            }
        }
    }

    /// Any of rules R1..R4 demands orienting the undirected edge a - b as
    /// a -> b.
    fn meek_fires(&self, a: usize, b: usize) -> bool {
        // R1: c -> a, c and b nonadjacent
        for &c in &self.parents[a] {
            if c != b && !self.adjacent(c, b) {
                return true;
            }
        }
        // R2: a -> c -> b
        for &c in &self.children[a] {
            if self.has_directed(c, b) {
                return true;
            }
        }
        // R3: a - c -> b and a - d -> b with c, d nonadjacent
        let mid: Vec<usize> = self.neigh[a]
            .iter()
            .copied()
            .filter(|&c| c != b && self.has_directed(c, b))
            .collect();
        for i in 0..mid.len() {
            for j in (i + 1)..mid.len() {
                if !self.adjacent(mid[i], mid[j]) {
                    return true;
                }
            }
        }
        // R4: d -> c -> b with a adjacent to d and d, b nonadjacent.
        // Orienting b -> a would either close a cycle through a's edge to d
        // or build a new unshielded collider at a, so a -> b is forced.
        for &c in &self.parents[b] {
            if c == a {
                continue;
            }
            for &d in &self.parents[c] {
                if d != a && d != b && self.adjacent(a, d) && !self.adjacent(d, b) {
                    return true;
                }
            }
        }
        false
    }

    /// Induced subgraph on y and its ancestors; only directed edges are kept
    /// (undirected edges never certify ancestry).
    pub fn ancestral_subgraph(&self, y: usize) -> Result<MixedGraph> {
        if y >= self.n() {
            return Err(Error::data("ancestral_subgraph: node out of range".to_string()));
        }
        let mut keep: Vec<usize> = self.relatives(y, RelativeSet::Ancestors).into_iter().collect();
        keep.push(y);
        keep.sort_unstable();
        let names: Vec<String> = keep.iter().map(|&i| self.names[i].clone()).collect();
        let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut sub = MixedGraph::new(names)?;
        for (u, v) in self.directed_edges() {
            if let (Some(&pu), Some(&pv)) = (pos.get(&u), pos.get(&v)) {
                sub.add_directed(pu, pv)?;
            }
        }
        Ok(sub)
    }

    /// Dor-Tarsi: orient every undirected edge into a DAG with the same
    /// skeleton and v-structures, or fail if none exists.
    pub fn extend_to_dag(&self) -> Result<MixedGraph> {
        let n = self.n();
        let mut work = self.clone();
        work.locked.clear();
        let mut out = MixedGraph::new(self.names.clone())?;
        for (a, b) in self.directed_edges() {
            out.add_directed(a, b)?;
        }
        let mut alive: BTreeSet<usize> = (0..n).collect();
        while !alive.is_empty() {
            let mut pick = None;
            for &x in &alive {
                if !work.children[x].is_empty() {
                    continue;
                }
                let adj = work.adjacents(x);
                let ok = work.neigh[x].iter().all(|&y| {
                    adj.iter().all(|&z| z == y || work.adjacent(y, z))
                });
                if ok {
                    pick = Some(x);
                    break;
                }
            }
            let x = pick.ok_or_else(|| Error::data("graph admits no consistent extension"))?;
            // undirected y - x becomes y -> x in the extension
            for y in work.neigh[x].clone() {
                out.add_directed(y, x)?;
            }
            for y in work.adjacents(x) {
                work.remove_edge(x, y)?;
            }
            alive.remove(&x);
        }
        debug_assert!(out.is_fully_directed());
        debug_assert!(out.is_acyclic());
        Ok(out)
    }

    /// Every orientation of the undirected edges that yields an acyclic graph
    /// without new unshielded colliders (relative to self). Exponential in the
    /// number of undirected edges, hence the budget.
    pub fn enumerate_consistent_extensions(&self, max_undirected: usize) -> Result<Vec<MixedGraph>> {
        let und = self.undirected_edges();
        if und.len() > max_undirected {
            return Err(Error::config(format!(
                "{} undirected edges exceed enumeration budget {}",
                und.len(),
                max_undirected
            )));
        }
        let base = self.v_structures();
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << und.len()) {
            let mut cand = self.clone();
            cand.locked.clear();
            for (i, &(a, b)) in und.iter().enumerate() {
                let (from, to) = if mask >> i & 1 == 1 { (b, a) } else { (a, b) };
                cand.neigh[a].remove(&b);
                cand.neigh[b].remove(&a);
                cand.children[from].insert(to);
                cand.parents[to].insert(from);
            }
            if !cand.is_acyclic() {
                continue;
            }
            if !cand.v_structures().is_subset(&base) {
                continue;
            }
            out.push(cand);
        }
        Ok(out)
    }

    /// Edge-list text: every node declared, then directed and undirected
    /// edges in sorted order. `#` starts a comment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for name in &self.names {
            s.push_str("node ");
            s.push_str(name);
            s.push('\n');
        }
        let mut dir = self.directed_edges();
        dir.sort_by(|&(a1, b1), &(a2, b2)| {
            (&self.names[a1], &self.names[b1]).cmp(&(&self.names[a2], &self.names[b2]))
        });
        for (a, b) in dir {
            s.push_str(&format!("{} -> {}\n", self.names[a], self.names[b]));
        }
        let mut und = self.undirected_edges();
        und.sort_by(|&(a1, b1), &(a2, b2)| {
            (&self.names[a1], &self.names[b1]).cmp(&(&self.names[a2], &self.names[b2]))
        });
        for (a, b) in und {
            s.push_str(&format!("{} -- {}\n", self.names[a], self.names[b]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<MixedGraph> {
        let mut names: Vec<String> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut directed: Vec<(String, String)> = Vec::new();
        let mut undirected: Vec<(String, String)> = Vec::new();
        let intern = |name: &str, names: &mut Vec<String>, seen: &mut HashMap<String, usize>| {
            if !seen.contains_key(name) {
                seen.insert(name.to_string(), names.len());
                names.push(name.to_string());
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["node", name] => intern(name, &mut names, &mut seen),
                [a, "->", b] => {
                    intern(a, &mut names, &mut seen);
                    intern(b, &mut names, &mut seen);
                    directed.push((a.to_string(), b.to_string()));
                }
                [a, "--", b] => {
                    intern(a, &mut names, &mut seen);
                    intern(b, &mut names, &mut seen);
                    undirected.push((a.to_string(), b.to_string()));
                }
                _ => {
                    return Err(Error::data(format!(
                        "bad edge-list line {}: {raw:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let mut g = MixedGraph::new(names)?;
        for (a, b) in directed {
            let (a, b) = (g.try_index(&a)?, g.try_index(&b)?);
            g.add_directed(a, b)?;
        }
        for (a, b) in undirected {
            let (a, b) = (g.try_index(&a)?, g.try_index(&b)?);
            g.add_undirected(a, b)?;
        }
        Ok(g)
    }
}

/// CPDAG of a DAG: skeleton plus v-structures, closed under Meek's rules.
/// With constraints, undirected pattern edges whose one direction is
/// forbidden get forced the other way before closure.
pub fn cpdag_of_dag(dag: &MixedGraph, constraints: Option<&ResolvedConstraints>) -> Result<MixedGraph> {
    let mut pat = dag.pattern_of_dag()?;
    if let Some(c) = constraints {
        for (a, b) in pat.undirected_edges() {
            let fab = c.is_forbidden(a, b);
            let fba = c.is_forbidden(b, a);
            if fab && !fba {
                pat.orient(b, a)?;
            } else if fba && !fab {
                pat.orient(a, b)?;
            }
        }
        for &(a, b) in &c.required {
            if pat.has_undirected(a, b) {
                pat.orient(a, b)?;
            }
        }
    }
    pat.apply_meek_rules(constraints);
    Ok(pat)
}
