//! Enumerated and sampled small tables over a two-symbol alphabet.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use ten_core::table::Table;

const SYMBOLS: [&str; 2] = ["x", "y"];

fn build(rows: usize, cols: usize, bits: usize, header_rows: usize) -> Table {
    let grid: Vec<Vec<&str>> = (0..rows)
        .map(|r| (0..cols).map(|c| SYMBOLS[(bits >> (r * cols + c)) & 1]).collect())
        .collect();
    let (head, body) = grid.split_at(header_rows);
    Table::from_text(head, body)
}

/// Every table with at most `max_cells` cells, at most 3 rows and 3
/// columns, plus the empty table.
pub fn all_small_tables(max_cells: usize) -> Vec<Table> {
    let mut out = vec![Table::default()];
    for rows in 1..=3 {
        for cols in 1..=3 {
            if rows * cols > max_cells {
                continue;
            }
            for bits in 0..(1usize << (rows * cols)) {
                out.push(build(rows, cols, bits, 0));
            }
        }
    }
    out
}

/// A random table up to 3x3, sometimes with a header row.
pub fn random_table(rng: &mut StdRng) -> Table {
    let rows = rng.gen_range(0..=3);
    if rows == 0 {
        return Table::default();
    }
    let cols = rng.gen_range(1..=3);
    let bits = rng.gen_range(0..(1usize << (rows * cols)));
    let header_rows = usize::from(rng.gen_bool(0.25));
    build(rows, cols, bits, header_rows)
}

pub fn sampled_pairs(seed: u64, n: usize) -> Vec<(Table, Table)> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| (random_table(&mut rng), random_table(&mut rng))).collect()
}
