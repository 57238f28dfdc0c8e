//! Ordered tree edit distance for the two-level trees tables induce:
//! a root whose children are rows, whose children are cells.

use std::collections::HashMap;

use crate::table::{normalize_text, Table};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeLabel {
    Root,
    HeaderRow,
    Row,
    Cell(String),
}

/// `root -> rows -> cells` over the expanded grid, cell labels normalized.
/// The first `header_rows` rows carry a distinct label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableTree {
    pub header_rows: usize,
    pub rows: Vec<Vec<String>>,
}

impl TableTree {
    pub fn from_table(t: &Table) -> Self {
        let rows = t
            .grid()
            .into_iter()
            .map(|row| row.into_iter().map(normalize_text).collect())
            .collect();
        TableTree { header_rows: t.header_rows().len(), rows }
    }

    fn row_label(&self, r: usize) -> NodeLabel {
        if r < self.header_rows {
            NodeLabel::HeaderRow
        } else {
            NodeLabel::Row
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.rows.len() + self.rows.iter().map(Vec::len).sum::<usize>()
    }

    /// Nodes in preorder with their parent index (the root has none).
    pub fn preorder(&self) -> Vec<(NodeLabel, Option<usize>)> {
        let mut out = vec![(NodeLabel::Root, None)];
        for (r, row) in self.rows.iter().enumerate() {
            let row_index = out.len();
            out.push((self.row_label(r), Some(0)));
            out.extend(row.iter().map(|c| (NodeLabel::Cell(c.clone()), Some(row_index))));
        }
        out
    }
}

/// A node of the root's child forest in postorder: either a cell (leaf) or a
/// row closing over the cells just before it.
#[derive(Clone, Copy)]
enum Post {
    Cell(u32),
    Row { row: usize },
}

struct Flat {
    post: Vec<Post>,
    rows: Vec<Vec<u32>>,
    header_rows: usize,
}

impl Flat {
    fn new(tree: &TableTree, intern: &mut HashMap<String, u32>) -> Self {
        let mut post = Vec::new();
        let mut rows = Vec::with_capacity(tree.rows.len());
        for (r, row) in tree.rows.iter().enumerate() {
            let ids: Vec<u32> = row
                .iter()
                .map(|text| {
                    let next = intern.len() as u32;
                    *intern.entry(text.clone()).or_insert(next)
                })
                .collect();
            post.extend(ids.iter().map(|&id| Post::Cell(id)));
            post.push(Post::Row { row: r });
            rows.push(ids);
        }
        Flat { post, rows, header_rows: tree.header_rows }
    }

    fn size(&self, p: Post) -> usize {
        match p {
            Post::Cell(_) => 1,
            Post::Row { row } => self.rows[row].len() + 1,
        }
    }
}

fn sequence_distance(a: &[u32], b: &[u32]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Distance between a lone cell and a row subtree.
fn cell_vs_row(cell: u32, row: &[u32]) -> usize {
    row.len() + usize::from(!row.contains(&cell))
}

/// Unit-cost ordered tree edit distance.
pub fn tree_distance(a: &TableTree, b: &TableTree) -> usize {
    if a == b {
        return 0;
    }
    let mut intern = HashMap::new();
    let fa = Flat::new(a, &mut intern);
    let fb = Flat::new(b, &mut intern);
    let (n1, n2) = (fa.post.len(), fb.post.len());

    let sizes_b: Vec<usize> = fb.post.iter().map(|&p| fb.size(p)).collect();
    let subtree = |p: Post, q: Post| -> u32 {
        let d = match (p, q) {
            (Post::Cell(x), Post::Cell(y)) => usize::from(x != y),
            (Post::Cell(x), Post::Row { row }) => cell_vs_row(x, &fb.rows[row]),
            (Post::Row { row }, Post::Cell(y)) => cell_vs_row(y, &fa.rows[row]),
            (Post::Row { row: r1 }, Post::Row { row: r2 }) => {
                let relabel = (r1 < fa.header_rows) != (r2 < fb.header_rows);
                sequence_distance(&fa.rows[r1], &fb.rows[r2]) + usize::from(relabel)
            }
        };
        d as u32
    };

    // Row s1 of the forest table depends on rows s1-1 and s1-size(v), so a
    // ring of max subtree size + 1 rows suffices.
    let window = fa.post.iter().map(|&p| fa.size(p)).max().unwrap_or(1) + 1;
    let mut ring = vec![vec![0u32; n2 + 1]; window];
    for (j, slot) in ring[0].iter_mut().enumerate() {
        *slot = j as u32;
    }
    for s1 in 1..=n1 {
        let v = fa.post[s1 - 1];
        let mut cur = std::mem::take(&mut ring[s1 % window]);
        let prev = &ring[(s1 - 1) % window];
        let back = &ring[(s1 - fa.size(v)) % window];
        cur[0] = s1 as u32;
        for s2 in 1..=n2 {
            let w = fb.post[s2 - 1];
            let del = prev[s2] + 1;
            let ins = cur[s2 - 1] + 1;
            let matched = back[s2 - sizes_b[s2 - 1]] + subtree(v, w);
            cur[s2] = del.min(ins).min(matched);
        }
        ring[s1 % window] = cur;
    }
    ring[n1 % window][n2] as usize
}

/// Edit distance normalized by the larger node count.
pub fn tree_edit_distance(pred: &Table, gold: &Table) -> f64 {
    let (a, b) = (TableTree::from_table(pred), TableTree::from_table(gold));
    let d = tree_distance(&a, &b);
    d as f64 / a.node_count().max(b.node_count()) as f64
}
