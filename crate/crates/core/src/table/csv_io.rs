use super::{normalize_rectangular, Cell, Table, TableError};

/// Reads a CSV table. The first record is the header row; short records are
/// padded.
pub fn parse_csv_table(text: &str) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
        rows.push(record.iter().map(Cell::new).collect::<Vec<_>>());
    }
    let body = if rows.is_empty() { Vec::new() } else { rows.split_off(1) };
    Ok(normalize_rectangular(&Table::new(rows, body)))
}

/// Writes the expanded grid as CSV with `\r\n` between records and no
/// trailing terminator.
pub fn serialize_csv(t: &Table) -> String {
    let records: Vec<String> = t
        .grid()
        .iter()
        .map(|row| {
            // A one-field record holding "" would be written as an empty line
            // and lost on read.
            if row.len() == 1 && row[0].is_empty() {
                return "\"\"".to_string();
            }
            let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
            writer.write_record(row).expect("writing to memory");
            let bytes = writer.into_inner().expect("flush to memory");
            let line = String::from_utf8(bytes).expect("csv of utf-8 input is utf-8");
            line.trim_end_matches("\r\n").to_string()
        })
        .collect();
    records.join("\r\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_round_trip() {
        let t = normalize_rectangular(&Table::from_text(
            &[vec!["name", "note"]],
            &[vec!["a,b", "say \"hi\""], vec!["line\nbreak", ""]],
        ));
        let text = serialize_csv(&t);
        assert_eq!(parse_csv_table(&text).unwrap().grid(), t.grid());
    }

    #[test]
    fn ragged_csv_is_padded() {
        let t = parse_csv_table("a,b,c\r\n1\r\n2,3").unwrap();
        assert_eq!(t.width(), 3);
        assert!(t.is_rectangular());
        assert_eq!(t.header_rows().len(), 1);
        assert_eq!(t.body_rows().len(), 2);
    }
}
