//! Turning gold tables back into the kind of flat text a copy-paste or OCR
//! pass produces. Used to synthesize benchmark inputs.

use serde::{Deserialize, Serialize};

use super::{serialize_csv, SourceText, Table};

pub const ROW_SEPARATOR: &str = "\r\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlattenStyle {
    /// Non-empty cell texts joined by a single space, rows by `\r\n`.
    Ocr,
    /// RFC 4180 rows joined by `\r\n`, one field per grid column.
    Csv,
}

pub fn flatten_table(t: &Table, style: FlattenStyle) -> SourceText {
    match style {
        FlattenStyle::Ocr => {
            let lines: Vec<String> = t
                .rows()
                .map(|row| {
                    row.iter()
                        .filter(|c| !c.text.is_empty())
                        .map(|c| c.text.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .filter(|line| !line.is_empty())
                .collect();
            SourceText::new(lines.join(ROW_SEPARATOR))
        }
        FlattenStyle::Csv => SourceText::new(serialize_csv(t)),
    }
}
