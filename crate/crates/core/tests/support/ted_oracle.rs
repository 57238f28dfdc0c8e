//! Exhaustive ordered tree edit distance by enumerating edit mappings.
//! Only for small trees.

use ten_core::metrics::{NodeLabel, TableTree};

struct Tree {
    labels: Vec<NodeLabel>,
    /// `anc[a][b]` is true when `a` is a proper ancestor of `b`.
    anc: Vec<Vec<bool>>,
}

impl Tree {
    fn new(t: &TableTree) -> Self {
        let nodes = t.preorder();
        let n = nodes.len();
        let mut anc = vec![vec![false; n]; n];
        for b in 0..n {
            let mut p = nodes[b].1;
            while let Some(a) = p {
                anc[a][b] = true;
                p = nodes[a].1;
            }
        }
        Tree { labels: nodes.into_iter().map(|(l, _)| l).collect(), anc }
    }
}

struct Search<'a> {
    a: &'a Tree,
    b: &'a Tree,
    pairs: Vec<(usize, usize)>,
    best: usize,
}

impl Search<'_> {
    // Nodes of `a` are decided in preorder. A valid mapping preserves
    // ancestry and sibling order, so its `b` images increase in preorder and
    // only ancestry needs checking against earlier pairs.
    fn go(&mut self, i: usize, last: Option<usize>, cost: usize) {
        let (n1, n2) = (self.a.labels.len(), self.b.labels.len());
        let next = last.map_or(0, |j| j + 1);
        let rem1 = n1 - i;
        let rem2 = n2 - next;
        if cost + rem1.abs_diff(rem2) >= self.best {
            return;
        }
        if i == n1 {
            self.best = cost + rem2;
            return;
        }
        for j in next..n2 {
            let ok = self
                .pairs
                .iter()
                .all(|&(pi, pj)| self.a.anc[pi][i] == self.b.anc[pj][j]);
            if !ok {
                continue;
            }
            let relabel = usize::from(self.a.labels[i] != self.b.labels[j]);
            self.pairs.push((i, j));
            self.go(i + 1, Some(j), cost + relabel + (j - next));
            self.pairs.pop();
        }
        self.go(i + 1, last, cost + 1);
    }
}

pub fn brute_force_distance(a: &TableTree, b: &TableTree) -> usize {
    let (ta, tb) = (Tree::new(a), Tree::new(b));
    let mut s = Search { best: ta.labels.len() + tb.labels.len() + 1, a: &ta, b: &tb, pairs: Vec::new() };
    s.go(0, None, 0);
    s.best
}
