//! A small reader and writer for the HTML table dialect models emit:
//! `<table>`, optional `<thead>`/`<tbody>`/`<tfoot>`, `<tr>`, `<th>`, `<td>`
//! with `rowspan`/`colspan`. Other inline tags inside cells are dropped and
//! their text kept; `<br>` becomes a newline.

use super::{Cell, Row, Table, TableError};

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open { name: String, attrs: &'a str },
    Close(String),
    Text(&'a str),
}

fn tokenize(html: &str) -> Result<Vec<Token<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = html;
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix("<!--") {
            let end = after.find("-->").ok_or("unterminated comment")?;
            rest = &after[end + 3..];
            continue;
        }
        if rest.starts_with('<') {
            let is_tag = rest[1..]
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '/' || c == '!');
            if is_tag {
                let end = rest.find('>').ok_or("unterminated tag")?;
                let inner = &rest[1..end];
                rest = &rest[end + 1..];
                if inner.starts_with('!') {
                    continue;
                }
                if let Some(name) = inner.strip_prefix('/') {
                    out.push(Token::Close(name.trim().to_ascii_lowercase()));
                } else {
                    let inner = inner.trim_end_matches('/');
                    let split = inner
                        .find(|c: char| c.is_whitespace())
                        .unwrap_or(inner.len());
                    out.push(Token::Open {
                        name: inner[..split].to_ascii_lowercase(),
                        attrs: &inner[split..],
                    });
                }
                continue;
            }
        }
        let first = rest.chars().next().map_or(1, char::len_utf8);
        let end = rest[first..].find('<').map(|i| i + first).unwrap_or(rest.len());
        out.push(Token::Text(&rest[..end]));
        rest = &rest[end..];
    }
    Ok(out)
}

/// Reads an integer attribute such as `colspan="2"`; absent or invalid values
/// give 1.
fn span_attr(attrs: &str, key: &str) -> usize {
    let lower = attrs.to_ascii_lowercase();
    let mut search = 0;
    while let Some(pos) = lower[search..].find(key) {
        let start = search + pos;
        search = start + key.len();
        let boundary_ok = start == 0
            || !lower.as_bytes()[start - 1].is_ascii_alphanumeric();
        let rest = lower[search..].trim_start();
        if !boundary_ok || !rest.starts_with('=') {
            continue;
        }
        let value = rest[1..].trim_start().trim_start_matches(['"', '\'']);
        let digits: String = value.chars().take_while(char::is_ascii_digit).collect();
        return digits.parse::<usize>().ok().filter(|&n| n > 0).unwrap_or(1);
    }
    1
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Section {
    None,
    Head,
    Body,
}

struct Builder {
    header: Vec<Row>,
    body: Vec<Row>,
    section: Section,
    saw_thead: bool,
    row: Option<(Row, bool)>,
    cell: Option<(Cell, bool)>,
}

impl Builder {
    fn close_cell(&mut self) {
        if let Some((cell, is_th)) = self.cell.take() {
            if let Some((row, all_th)) = self.row.as_mut() {
                row.push(cell);
                *all_th &= is_th;
            }
        }
    }

    fn close_row(&mut self) {
        self.close_cell();
        if let Some((row, all_th)) = self.row.take() {
            match self.section {
                Section::Head => self.header.push(row),
                Section::Body => self.body.push(row),
                // Bare rows directly under <table>: leading all-<th> rows act
                // as the header when the table has no <thead>.
                Section::None => {
                    if !self.saw_thead && all_th && self.body.is_empty() && !row.is_empty() {
                        self.header.push(row)
                    } else {
                        self.body.push(row)
                    }
                }
            }
        }
    }
}

/// Parses the first `<table>` element in `html`.
pub fn parse_html_table(html: &str) -> Result<Table, TableError> {
    parse_inner(html).map_err(|reason| TableError::HtmlParseFailure { index: 0, reason })
}

fn parse_inner(html: &str) -> Result<Table, String> {
    let tokens = tokenize(html)?;
    let start = tokens
        .iter()
        .position(|t| matches!(t, Token::Open { name, .. } if name == "table"))
        .ok_or("no <table> element")?;
    let mut b = Builder {
        header: Vec::new(),
        body: Vec::new(),
        section: Section::None,
        saw_thead: false,
        row: None,
        cell: None,
    };
    let mut closed = false;
    for tok in &tokens[start + 1..] {
        match tok {
            Token::Text(text) => {
                if let Some((cell, _)) = b.cell.as_mut() {
                    cell.text.push_str(&html_escape::decode_html_entities(text));
                }
            }
            Token::Open { name, attrs } => match name.as_str() {
                "table" => return Err("nested <table> is not supported".into()),
                "thead" | "tbody" | "tfoot" => {
                    b.close_row();
                    if b.section != Section::None {
                        return Err(format!("<{name}> opened inside an unclosed section"));
                    }
                    if name == "thead" {
                        b.section = Section::Head;
                        b.saw_thead = true;
                    } else {
                        b.section = Section::Body;
                    }
                }
                "tr" => {
                    b.close_row();
                    b.row = Some((Vec::new(), true));
                }
                "td" | "th" => {
                    b.close_cell();
                    if b.row.is_none() {
                        b.row = Some((Vec::new(), true));
                    }
                    let cell =
                        Cell::spanning("", span_attr(attrs, "rowspan"), span_attr(attrs, "colspan"));
                    b.cell = Some((cell, name == "th"));
                }
                "br" => {
                    if let Some((cell, _)) = b.cell.as_mut() {
                        cell.text.push('\n');
                    }
                }
                _ => {}
            },
            Token::Close(name) => match name.as_str() {
                "table" => {
                    b.close_row();
                    if b.section != Section::None {
                        return Err("<table> closed while a row group is still open".into());
                    }
                    closed = true;
                    break;
                }
                "thead" | "tbody" | "tfoot" => {
                    b.close_row();
                    let expected = if name == "thead" { Section::Head } else { Section::Body };
                    if b.section != expected {
                        return Err(format!("unexpected </{name}>"));
                    }
                    b.section = Section::None;
                }
                "tr" => b.close_row(),
                "td" | "th" => b.close_cell(),
                _ => {}
            },
        }
    }
    if !closed {
        return Err("<table> is never closed".into());
    }
    Ok(Table::new(b.header, b.body))
}

fn escape_cell(text: &str) -> String {
    html_escape::encode_text(text).replace('\n', "<br>")
}

/// Writes the table in the same dialect [`parse_html_table`] reads.
pub fn serialize_html(t: &Table) -> String {
    let mut out = String::from("<table>");
    let write_rows = |out: &mut String, rows: &[Row], tag: &str| {
        for row in rows {
            out.push_str("<tr>");
            for cell in row {
                out.push('<');
                out.push_str(tag);
                if cell.rowspan > 1 {
                    out.push_str(&format!(" rowspan=\"{}\"", cell.rowspan));
                }
                if cell.colspan > 1 {
                    out.push_str(&format!(" colspan=\"{}\"", cell.colspan));
                }
                out.push('>');
                out.push_str(&escape_cell(&cell.text));
                out.push_str("</");
                out.push_str(tag);
                out.push('>');
            }
            out.push_str("</tr>");
        }
    };
    if !t.header_rows().is_empty() {
        out.push_str("<thead>");
        write_rows(&mut out, t.header_rows(), "th");
        out.push_str("</thead>");
    }
    out.push_str("<tbody>");
    write_rows(&mut out, t.body_rows(), "td");
    out.push_str("</tbody></table>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multibyte_text() {
        let t = parse_html_table("<table><tr><td>€720</td><td>¥ 5 < 6</td></tr></table>").unwrap();
        assert_eq!(t.body_rows()[0][0].text, "€720");
        assert_eq!(t.body_rows()[0][1].text, "¥ 5 < 6");
    }
    use crate::table::normalize_rectangular;

    fn texts(rows: &[Row]) -> Vec<Vec<&str>> {
        rows.iter().map(|r| r.iter().map(|c| c.text.as_str()).collect()).collect()
    }

    #[test]
    fn minimal_table() {
        let t = parse_html_table(
            "<table><thead><tr><th>A</th></tr></thead><tbody><tr><td>1</td></tr></tbody></table>",
        )
        .unwrap();
        assert_eq!(texts(t.header_rows()), vec![vec!["A"]]);
        assert_eq!(texts(t.body_rows()), vec![vec!["1"]]);
    }

    #[test]
    fn decodes_entities_and_keeps_whitespace() {
        let t = parse_html_table("<table><tr><td> &lt;0.001 &amp; x\r</td><td>a<br/>b</td></tr></table>")
            .unwrap();
        assert_eq!(texts(t.body_rows()), vec![vec![" <0.001 & x\r", "a\nb"]]);
    }

    #[test]
    fn th_and_td_accepted_anywhere() {
        let t = parse_html_table(
            "<table><thead><tr><td>h</td></tr></thead><tbody><tr><th>row head</th><td>1</td></tr></tbody></table>",
        )
        .unwrap();
        assert_eq!(texts(t.header_rows()), vec![vec!["h"]]);
        assert_eq!(texts(t.body_rows()), vec![vec!["row head", "1"]]);
    }

    #[test]
    fn bare_th_row_becomes_header() {
        let t = parse_html_table("<table><tr><th>N</th><th>Age</th></tr><tr><td>J</td><td>2</td></tr></table>")
            .unwrap();
        assert_eq!(t.header_rows().len(), 1);
        assert_eq!(t.body_rows().len(), 1);
    }

    #[test]
    fn spans_and_width() {
        // Manual grid:
        //   [ x  x ][ y ]
        //   [ a ][ b ][ c ]
        let t = parse_html_table(
            "<table><tbody><tr><td colspan=\"2\">x</td><td>y</td></tr><tr><td>a</td><td>b</td><td>c</td></tr></tbody></table>",
        )
        .unwrap();
        let n = normalize_rectangular(&t);
        assert_eq!(n.width(), 3);
        assert_eq!(n.body_rows()[0][0].colspan, 2);
        assert_eq!(n.grid(), vec![vec!["x", "", "y"], vec!["a", "b", "c"]]);

        let t = parse_html_table("<table><tr><td ROWSPAN=3 colspan='bad'>z</td></tr></table>").unwrap();
        assert_eq!((t.body_rows()[0][0].rowspan, t.body_rows()[0][0].colspan), (3, 1));
    }

    #[test]
    fn structural_errors() {
        for bad in [
            "no table here",
            "<table><tr><td>1</td></tr>",
            "<table><thead><tr><th>a</th></tr></table>",
            "<table><tbody><tr><td>1</td></tr></thead></table>",
            "<table><tr><td><table></table></td></tr></table>",
            "<table><tr><td>1</td",
        ] {
            assert!(
                matches!(parse_html_table(bad), Err(TableError::HtmlParseFailure { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn serialize_escapes_and_round_trips() {
        let t = normalize_rectangular(&Table::from_text(
            &[vec!["<h>", "a&b"]],
            &[vec!["1 < 2", "x\ny"], vec!["\"q\"", ""]],
        ));
        let html = serialize_html(&t);
        assert!(html.starts_with("<table><thead>"));
        assert!(html.contains("1 &lt; 2"));
        assert!(!html.contains("1 < 2"));
        assert_eq!(parse_html_table(&html).unwrap(), t);
    }

    #[test]
    fn stray_less_than_is_text() {
        let t = parse_html_table("<table><tr><td>a < b</td></tr></table>").unwrap();
        assert_eq!(t.body_rows()[0][0].text, "a < b");
    }
}
