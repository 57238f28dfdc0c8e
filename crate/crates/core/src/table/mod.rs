//! Canonical table representation and the formats it travels through.
//!
//! A [`Table`] is a list of header rows followed by a list of body rows. Cells
//! keep their text verbatim; any cleanup (whitespace collapsing for metrics,
//! padding to a rectangle) is an explicit, separate step.

mod csv_io;
mod extraction;
mod flatten;
mod html;

pub use csv_io::{parse_csv_table, serialize_csv};
pub use extraction::{concat_partial_tables, parse_extraction_json, ExtractionResult, PartialTable};
pub use flatten::{flatten_table, FlattenStyle};
pub use html::{parse_html_table, serialize_html};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no parseable JSON object in model output")]
    MalformedJson,
    #[error("JSON object has no \"tables\" array")]
    MissingTablesKey,
    #[error("table entry {index}: {reason}")]
    HtmlParseFailure { index: usize, reason: String },
    #[error("extraction result contains no tables")]
    EmptyExtraction,
    #[error("csv: {0}")]
    Csv(String),
}

/// The unstructured input text together with the derived views the checker
/// and metrics need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct SourceText {
    raw: String,
    alnum: String,
    tokens: Vec<String>,
}

impl SourceText {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let alnum = alnum_projection(&raw);
        let tokens = raw.split_whitespace().map(str::to_owned).collect();
        SourceText { raw, alnum, tokens }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Alphanumeric characters of the raw text, in order.
    pub fn alnum(&self) -> &str {
        &self.alnum
    }

    pub fn alnum_len(&self) -> usize {
        self.alnum.chars().count()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl From<String> for SourceText {
    fn from(raw: String) -> Self {
        SourceText::new(raw)
    }
}

impl From<&str> for SourceText {
    fn from(raw: &str) -> Self {
        SourceText::new(raw)
    }
}

impl From<SourceText> for String {
    fn from(s: SourceText) -> String {
        s.raw
    }
}

pub(crate) fn alnum_projection(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    /// Row index counting header rows first, then body rows.
    pub row: usize,
    /// Grid column where the cell starts, after earlier row and column spans
    /// have been accounted for.
    pub col: usize,
    pub rowspan: usize,
    pub colspan: usize,
}

impl Cell {
    pub fn new(text: impl Into<String>) -> Self {
        Cell::spanning(text, 1, 1)
    }

    pub fn spanning(text: impl Into<String>, rowspan: usize, colspan: usize) -> Self {
        Cell {
            text: text.into(),
            row: 0,
            col: 0,
            rowspan: rowspan.max(1),
            colspan: colspan.max(1),
        }
    }

    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

pub type Row = Vec<Cell>;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Table {
    header_rows: Vec<Row>,
    body_rows: Vec<Row>,
    width: usize,
}

impl Table {
    /// Builds a table and assigns grid coordinates to every cell.
    pub fn new(header_rows: Vec<Row>, body_rows: Vec<Row>) -> Self {
        let mut t = Table {
            header_rows,
            body_rows,
            width: 0,
        };
        t.place_cells();
        t
    }

    /// Convenience constructor from plain strings, one cell per string.
    pub fn from_text<S: AsRef<str>>(header: &[Vec<S>], body: &[Vec<S>]) -> Self {
        let conv = |rows: &[Vec<S>]| -> Vec<Row> {
            rows.iter()
                .map(|r| r.iter().map(|s| Cell::new(s.as_ref())).collect())
                .collect()
        };
        Table::new(conv(header), conv(body))
    }

    pub fn header_rows(&self) -> &[Row] {
        &self.header_rows
    }

    pub fn body_rows(&self) -> &[Row] {
        &self.body_rows
    }

    /// Number of grid columns, counting spans.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_empty(&self) -> bool {
        self.header_rows.is_empty() && self.body_rows.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.header_rows.len() + self.body_rows.len()
    }

    /// All rows, header rows first.
    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.header_rows.iter().chain(self.body_rows.iter())
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.rows().flat_map(|r| r.iter())
    }

    pub fn body_cells(&self) -> impl Iterator<Item = &Cell> {
        self.body_rows.iter().flat_map(|r| r.iter())
    }

    pub fn cell_count(&self) -> usize {
        self.cells().count()
    }

    /// Row index (in [`Table::rows`] order) of the first body row.
    pub fn body_offset(&self) -> usize {
        self.header_rows.len()
    }

    pub fn into_parts(self) -> (Vec<Row>, Vec<Row>) {
        (self.header_rows, self.body_rows)
    }

    /// Body column `col` as one entry per body row: the text of the cell that
    /// starts at that column, or `None` where the position is covered by a
    /// span or missing.
    pub fn body_column(&self, col: usize) -> Vec<Option<&str>> {
        self.body_rows
            .iter()
            .map(|row| row.iter().find(|c| c.col == col).map(|c| c.text.as_str()))
            .collect()
    }

    /// Expanded `rows × width` grid of cell texts. A spanning cell's text is
    /// placed at its anchor position; the positions it covers hold `""`.
    pub fn grid(&self) -> Vec<Vec<&str>> {
        let mut grid = vec![vec![""; self.width]; self.row_count()];
        for cell in self.cells() {
            if cell.col < self.width {
                grid[cell.row][cell.col] = cell.text.as_str();
            }
        }
        grid
    }

    /// Same shape and same cell texts, ignoring a trailing `\r` on any cell.
    pub fn same_content(&self, other: &Table) -> bool {
        fn rows_eq(a: &[Row], b: &[Row]) -> bool {
            a.len() == b.len()
                && a.iter().zip(b).all(|(ra, rb)| {
                    ra.len() == rb.len()
                        && ra.iter().zip(rb).all(|(ca, cb)| {
                            ca.text.trim_end_matches('\r') == cb.text.trim_end_matches('\r')
                                && ca.rowspan == cb.rowspan
                                && ca.colspan == cb.colspan
                        })
                })
        }
        rows_eq(&self.header_rows, &other.header_rows) && rows_eq(&self.body_rows, &other.body_rows)
    }

    /// Assigns `row`/`col` to every cell using HTML placement rules: each cell
    /// goes to the first grid column of its row not already occupied by a
    /// row span from above. Row spans do not cross the header/body boundary.
    fn place_cells(&mut self) {
        let mut width = 0;
        let mut row_index = 0;
        for section in [&mut self.header_rows, &mut self.body_rows] {
            let occupancy = place_section(section, row_index);
            width = width.max(occupancy.iter().map(|occ| occ.len()).max().unwrap_or(0));
            row_index += section.len();
        }
        self.width = width;
    }

    /// Columns occupied in each row (own cells and row spans from above).
    fn occupancy(&self) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
        let mut header = self.header_rows.clone();
        let mut body = self.body_rows.clone();
        let h = place_section(&mut header, 0);
        let b = place_section(&mut body, self.header_rows.len());
        (h, b)
    }
}

/// Places one row group, returning per-row occupancy vectors.
fn place_section(rows: &mut [Row], first_row: usize) -> Vec<Vec<bool>> {
    let mut occupancy: Vec<Vec<bool>> = vec![Vec::new(); rows.len()];
    for r in 0..rows.len() {
        let mut next = 0;
        for c in 0..rows[r].len() {
            while occupancy[r].get(next).copied().unwrap_or(false) {
                next += 1;
            }
            let (rowspan, colspan) = (rows[r][c].rowspan, rows[r][c].colspan);
            let cell = &mut rows[r][c];
            cell.row = first_row + r;
            cell.col = next;
            let last_row = (r + rowspan).min(rows.len());
            for occ in occupancy.iter_mut().take(last_row).skip(r) {
                if occ.len() < next + colspan {
                    occ.resize(next + colspan, false);
                }
                for slot in occ.iter_mut().skip(next).take(colspan) {
                    *slot = true;
                }
            }
            next += colspan;
        }
    }
    occupancy
}

/// Pads every row on the right with empty cells so that every row covers
/// exactly `width` grid columns. Spanning cells are kept intact.
pub fn normalize_rectangular(t: &Table) -> Table {
    let (head_occ, body_occ) = t.occupancy();
    let width = head_occ
        .iter()
        .chain(body_occ.iter())
        .map(|occ| occ.len())
        .max()
        .unwrap_or(0);
    let pad = |rows: &[Row], occ: &[Vec<bool>]| -> Vec<Row> {
        rows.iter()
            .zip(occ)
            .map(|(row, occ)| {
                let filled = occ.iter().filter(|&&o| o).count();
                let mut row = row.clone();
                row.extend((filled..width).map(|_| Cell::new("")));
                row
            })
            .collect()
    };
    Table::new(pad(&t.header_rows, &head_occ), pad(&t.body_rows, &body_occ))
}

impl Table {
    pub fn is_rectangular(&self) -> bool {
        let (h, b) = self.occupancy();
        h.iter()
            .chain(b.iter())
            .all(|occ| occ.len() == self.width && occ.iter().all(|&o| o))
    }
}

/// Trim and collapse internal whitespace runs to a single space.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
