//! Parsing of the JSON envelope the extraction and regeneration prompts ask
//! the model to return, and merging of its partial tables.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{normalize_rectangular, parse_html_table, Cell, Row, SourceText, Table, TableError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTable {
    pub starting_token: Option<String>,
    pub table: Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub tables: Vec<PartialTable>,
    pub row_delimiter: Option<String>,
}

impl ExtractionResult {
    /// Starting tokens that do not occur verbatim in `source`.
    pub fn unknown_starting_tokens<'a>(&'a self, source: &SourceText) -> Vec<&'a str> {
        self.tables
            .iter()
            .filter_map(|p| p.starting_token.as_deref())
            .filter(|tok| !source.raw().contains(tok))
            .collect()
    }

    /// Drops starting tokens that do not occur in `source`, so a label row is
    /// never invented from a hallucinated partition marker.
    pub fn retain_known_starting_tokens(&mut self, source: &SourceText) {
        for p in &mut self.tables {
            if p.starting_token.as_deref().is_some_and(|t| !source.raw().contains(t)) {
                p.starting_token = None;
            }
        }
    }
}

/// Looks a key up under both its `$key$` and plain spelling.
fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(&format!("${key}$")).or_else(|| obj.get(key))
}

fn optional_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::Null => None,
        Value::String(s) if s.trim().is_empty() || s.trim() == "null" => None,
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Removes a surrounding markdown code fence if the text contains one.
fn strip_code_fence(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after = &text[open + 3..];
    // Skip an info string such as `json` up to the end of the line.
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.rfind("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Every balanced `{...}` span, in order of their opening brace, respecting
/// JSON string literals.
fn balanced_objects(text: &str) -> impl Iterator<Item = &str> {
    let bytes = text.as_bytes();
    (0..bytes.len()).filter(move |&i| bytes[i] == b'{').filter_map(move |start| {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &b) in bytes[start..].iter().enumerate() {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(&text[start..start + offset + 1]);
                    }
                }
                _ => {}
            }
        }
        None
    })
}

fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    let candidates = [strip_code_fence(text), text];
    candidates.iter().find_map(|t| {
        balanced_objects(t).find_map(|span| match serde_json::from_str::<Value>(span) {
            Ok(Value::Object(map)) => Some(map),
            _ => None,
        })
    })
}

/// Parses a model response into partial tables. Code fences and prose around
/// the JSON object are ignored.
pub fn parse_extraction_json(text: &str) -> Result<ExtractionResult, TableError> {
    let obj = first_json_object(text).ok_or(TableError::MalformedJson)?;
    let tables = match obj.get("tables") {
        Some(Value::Array(entries)) => entries,
        _ => return Err(TableError::MissingTablesKey),
    };
    let mut out = ExtractionResult {
        tables: Vec::with_capacity(tables.len()),
        row_delimiter: optional_string(field(&obj, "row_delimiter")),
    };
    for (index, entry) in tables.iter().enumerate() {
        let fail = |reason: String| TableError::HtmlParseFailure { index, reason };
        let entry = entry
            .as_object()
            .ok_or_else(|| fail("entry is not an object".into()))?;
        let html = field(entry, "html_output")
            .and_then(Value::as_str)
            .ok_or_else(|| fail("missing html_output".into()))?;
        let table = parse_html_table(html).map_err(|e| match e {
            TableError::HtmlParseFailure { reason, .. } => fail(reason),
            other => other,
        })?;
        out.tables.push(PartialTable {
            starting_token: optional_string(field(entry, "starting_token")),
            table,
        });
    }
    Ok(out)
}

fn is_label_row(row: &Row, label: &str) -> bool {
    let mut non_blank = row.iter().filter(|c| !c.is_blank());
    matches!((non_blank.next(), non_blank.next()), (Some(c), None) if c.text.trim() == label.trim())
}

/// Joins partial tables into one. The first table's header is kept; each
/// partition's starting token becomes a single full-width label row ahead of
/// its body rows unless the body already opens with that label.
pub fn concat_partial_tables(r: &ExtractionResult) -> Result<Table, TableError> {
    let first = r.tables.first().ok_or(TableError::EmptyExtraction)?;
    let width = r
        .tables
        .iter()
        .map(|p| normalize_rectangular(&p.table).width())
        .max()
        .unwrap_or(0)
        .max(1);
    let header = first.table.header_rows().to_vec();
    let mut body = Vec::new();
    for part in &r.tables {
        let rows = part.table.body_rows();
        if let Some(label) = &part.starting_token {
            if !rows.first().is_some_and(|row| is_label_row(row, label)) {
                body.push(vec![Cell::spanning(label.clone(), 1, width)]);
            }
        }
        body.extend(rows.iter().cloned());
    }
    Ok(normalize_rectangular(&Table::new(header, body)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_col(rows: &[[&str; 2]]) -> Table {
        Table::from_text(&[vec!["h1", "h2"]], &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn empty_tables_array() {
        let r = parse_extraction_json(r#"{"tables": []}"#).unwrap();
        assert!(r.tables.is_empty());
        assert_eq!(r.row_delimiter, None);
        assert_eq!(concat_partial_tables(&r), Err(TableError::EmptyExtraction));
    }

    #[test]
    fn fenced_with_prose_and_dollar_keys() {
        let text = "Sure! Here you go:\n```json\n{\n  \"tables\": [{\"$starting_token$\": null, \"$html_output$\": \"<table><tr><td>a}</td></tr></table>\"}],\n  \"$row_delimiter$\": \"\\\\r\\\\n\"\n}\n```\nLet me know.";
        let r = parse_extraction_json(text).unwrap();
        assert_eq!(r.tables.len(), 1);
        assert_eq!(r.tables[0].starting_token, None);
        assert_eq!(r.tables[0].table.body_rows()[0][0].text, "a}");
        assert_eq!(r.row_delimiter.as_deref(), Some("\\r\\n"));
    }

    #[test]
    fn error_kinds() {
        assert_eq!(parse_extraction_json("no json"), Err(TableError::MalformedJson));
        assert_eq!(parse_extraction_json("{\"tables\": [1, 2]"), Err(TableError::MalformedJson));
        assert_eq!(parse_extraction_json("{\"rows\": []}"), Err(TableError::MissingTablesKey));
        let bad = r#"{"tables": [{"html_output": "<table><tr><td>1</td></tr></table>"}, {"html_output": "<p>x</p>"}]}"#;
        assert!(matches!(
            parse_extraction_json(bad),
            Err(TableError::HtmlParseFailure { index: 1, .. })
        ));
    }

    #[test]
    fn single_table_without_token_is_just_normalized() {
        let t = Table::from_text(&[vec!["a", "b"]], &[vec!["1"], vec!["2", "3"]]);
        let r = ExtractionResult {
            tables: vec![PartialTable { starting_token: None, table: t.clone() }],
            row_delimiter: None,
        };
        assert_eq!(concat_partial_tables(&r).unwrap(), normalize_rectangular(&t));
    }

    #[test]
    fn widths_unify_with_padding() {
        // Hand grid: the second table is 3 wide, so the first table's rows
        // gain one empty cell each.
        let a = two_col(&[["a1", "a2"]]);
        let b = Table::from_text(&[vec!["x", "y", "z"]], &[vec!["b1", "b2", "b3"]]);
        let r = ExtractionResult {
            tables: vec![
                PartialTable { starting_token: None, table: a },
                PartialTable { starting_token: Some("Part B".into()), table: b },
            ],
            row_delimiter: None,
        };
        let t = concat_partial_tables(&r).unwrap();
        assert_eq!(t.width(), 3);
        assert_eq!(
            t.grid(),
            vec![
                vec!["h1", "h2", ""],
                vec!["a1", "a2", ""],
                vec!["Part B", "", ""],
                vec!["b1", "b2", "b3"],
            ]
        );
        assert_eq!(t.body_rows()[1][0].colspan, 3);
        assert!(t.is_rectangular());
    }

    #[test]
    fn label_row_count_matches_tokens() {
        let r = ExtractionResult {
            tables: vec![
                PartialTable { starting_token: Some("One".into()), table: two_col(&[["1", "2"], ["3", "4"]]) },
                PartialTable { starting_token: None, table: two_col(&[["5", "6"]]) },
                PartialTable { starting_token: Some("Three".into()), table: two_col(&[["7", "8"]]) },
            ],
            row_delimiter: None,
        };
        let t = concat_partial_tables(&r).unwrap();
        assert_eq!(t.body_rows().len(), 4 + 2);
        assert_eq!(t.header_rows().len(), 1);
    }

    #[test]
    fn existing_label_row_is_not_duplicated() {
        let table = two_col(&[["Group", ""], ["1", "2"]]);
        let r = ExtractionResult {
            tables: vec![PartialTable { starting_token: Some("Group".into()), table }],
            row_delimiter: None,
        };
        assert_eq!(concat_partial_tables(&r).unwrap().body_rows().len(), 2);
    }

    #[test]
    fn hallucinated_tokens_dropped() {
        let mut r = ExtractionResult {
            tables: vec![
                PartialTable { starting_token: Some("Alpha".into()), table: two_col(&[]) },
                PartialTable { starting_token: Some("Omega".into()), table: two_col(&[]) },
            ],
            row_delimiter: None,
        };
        let src = SourceText::new("Alpha 1 2");
        assert_eq!(r.unknown_starting_tokens(&src), vec!["Omega"]);
        r.retain_known_starting_tokens(&src);
        assert_eq!(r.tables[1].starting_token, None);
    }
}
