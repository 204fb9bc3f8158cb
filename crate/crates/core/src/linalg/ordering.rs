//! Fill-reducing symmetric orderings computed on the pattern of `A + A^T`.

use std::collections::VecDeque;

use super::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    ReverseCuthillMcKee,
    #[default]
    NestedDissection,
}

impl Ordering {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub fn compute(self, a: &SparseMatrix) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..a.dim()).collect(),
            Ordering::ReverseCuthillMcKee => reverse_cuthill_mckee(a),
            Ordering::NestedDissection => nested_dissection(a),
        }
    }
}

/// Symmetrised adjacency without self loops, in compressed form.
struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    fn new(a: &SparseMatrix) -> Graph {
        let n = a.dim();
        let mut deg = vec![0usize; n + 1];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    deg[i + 1] += 1;
                    deg[j + 1] += 1;
                }
            }
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let mut next = deg.clone();
        let mut adj = vec![0usize; deg[n]];
        for i in 0..n {
            for &j in a.row(i).0 {
                if i != j {
                    adj[next[i]] = j;
                    next[i] += 1;
                    adj[next[j]] = i;
                    next[j] += 1;
                }
            }
        }
        // drop duplicates from the symmetric union
        let mut ptr = vec![0usize; n + 1];
        let mut out = Vec::with_capacity(adj.len());
        for i in 0..n {
            let nb = &mut adj[deg[i]..deg[i + 1]];
            nb.sort_unstable();
            let mut last = usize::MAX;
            for &j in nb.iter() {
                if j != last {
                    out.push(j);
                    last = j;
                }
            }
            ptr[i + 1] = out.len();
        }
        Graph { ptr, adj: out }
    }

    fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }

    fn n(&self) -> usize {
        self.ptr.len() - 1
    }
}

/// Breadth-first level structure of the vertices with `region[v] == id`
/// reachable from `root`. Returns vertices in visit order and their levels.
fn bfs(g: &Graph, root: usize, region: &[usize], id: usize, level: &mut [usize]) -> Vec<usize> {
    let mut order = vec![root];
    level[root] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in g.neighbours(v) {
            if region[w] == id && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                order.push(w);
            }
        }
    }
    order
}

fn reset(order: &[usize], level: &mut [usize]) {
    for &v in order {
        level[v] = usize::MAX;
    }
}

/// Pseudo-peripheral vertex of the component containing `start`.
fn peripheral(g: &Graph, start: usize, region: &[usize], id: usize, level: &mut [usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let order = bfs(g, root, region, id, level);
        let last = *order.last().unwrap();
        let depth = level[last];
        // among the deepest vertices pick one of minimal degree
        let cand = order
            .iter()
            .rev()
            .take_while(|&&v| level[v] == depth)
            .copied()
            .min_by_key(|&v| (g.neighbours(v).len(), v))
            .unwrap_or(last);
        reset(&order, level);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        root = cand;
    }
    root
}

pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let g = Graph::new(a);
    let n = g.n();
    let region = vec![0usize; n];
    let mut level = vec![usize::MAX; n];
    let mut placed = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for s in 0..n {
        if placed[s] {
            continue;
        }
        let root = peripheral(&g, s, &region, 0, &mut level);
        let mut queue = VecDeque::from([root]);
        placed[root] = true;
        while let Some(v) = queue.pop_front() {
            perm.push(v);
            let mut nb: Vec<usize> = g.neighbours(v).iter().copied().filter(|&w| !placed[w]).collect();
            nb.sort_by_key(|&w| (g.neighbours(w).len(), w));
            for w in nb {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    perm.reverse();
    perm
}

const LEAF_SIZE: usize = 48;

/// Smallest fraction of a component allowed on either side of a separator.
const BALANCE: f64 = 0.2;

/// Nested dissection with level-structure separators. Each connected
/// component is split at the middle level of a breadth-first search from a
/// pseudo-peripheral vertex; the two halves are ordered first (recursively)
/// and the separator last.
pub fn nested_dissection(a: &SparseMatrix) -> Vec<usize> {
    let g = Graph::new(a);
    let n = g.n();
    let mut region = vec![0usize; n];
    let mut level = vec![usize::MAX; n];
    let mut next_id = 1;
    let mut perm = Vec::with_capacity(n);
    // work items: (vertices, region id); separators are emitted when popped
    enum Task {
        Split(Vec<usize>, usize),
        Emit(Vec<usize>),
    }
    let mut stack = vec![Task::Split((0..n).collect(), 0)];
    while let Some(task) = stack.pop() {
        let (verts, id) = match task {
            Task::Emit(v) => {
                perm.extend(v);
                continue;
            }
            Task::Split(v, id) => (v, id),
        };
        if verts.is_empty() {
            continue;
        }
        // split off connected components first
        let mut components: Vec<Vec<usize>> = Vec::new();
        for &s in &verts {
            if level[s] != usize::MAX {
                continue;
            }
            let comp = bfs(&g, s, &region, id, &mut level);
            components.push(comp);
        }
        for comp in &components {
            reset(comp, &mut level);
        }
        if components.len() > 1 {
            // emit later components after earlier ones
            for comp in components.into_iter().rev() {
                let cid = next_id;
                next_id += 1;
                for &v in &comp {
                    region[v] = cid;
                }
                stack.push(Task::Split(comp, cid));
            }
            continue;
        }
        let comp = components.pop().unwrap();
        if comp.len() <= LEAF_SIZE {
            let root = peripheral(&g, comp[0], &region, id, &mut level);
            let order = bfs(&g, root, &region, id, &mut level);
            reset(&order, &mut level);
            perm.extend(order.into_iter().rev());
            continue;
        }
        let root = peripheral(&g, comp[0], &region, id, &mut level);
        let order = bfs(&g, root, &region, id, &mut level);
        let depth = level[*order.last().unwrap()];
        if depth < 2 {
            reset(&order, &mut level);
            perm.extend(order);
            continue;
        }
        // separator level: the smallest level that leaves at least
        // `BALANCE` of the vertices on either side, else the median level
        let mut counts = vec![0usize; depth + 1];
        for &v in &order {
            counts[level[v]] += 1;
        }
        let total = order.len();
        let min_side = (BALANCE * total as f64).ceil() as usize;
        let mut below = counts[0];
        let mut mid = None;
        let mut median = None;
        for l in 1..depth {
            let above = total - below - counts[l];
            if median.is_none() && below + counts[l] > total / 2 {
                median = Some(l);
            }
            if below >= min_side && above >= min_side && mid.map_or(true, |m: usize| counts[l] < counts[m]) {
                mid = Some(l);
            }
            below += counts[l];
        }
        let mid = mid.or(median).unwrap_or(depth / 2).clamp(1, depth - 1);
        let (mut low, mut sep, mut high) = (Vec::new(), Vec::new(), Vec::new());
        for &v in &order {
            match level[v].cmp(&mid) {
                std::cmp::Ordering::Less => low.push(v),
                std::cmp::Ordering::Greater => high.push(v),
                std::cmp::Ordering::Equal => {
                    if g.neighbours(v).iter().any(|&w| region[w] == id && level[w] == mid + 1) {
                        sep.push(v);
                    } else {
                        low.push(v);
                    }
                }
            }
        }
        reset(&order, &mut level);
        let (lid, hid, sid) = (next_id, next_id + 1, next_id + 2);
        next_id += 3;
        for &v in &low {
            region[v] = lid;
        }
        for &v in &high {
            region[v] = hid;
        }
        for &v in &sep {
            region[v] = sid;
        }
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(high, hid));
        stack.push(Task::Split(low, lid));
    }
    perm
}
