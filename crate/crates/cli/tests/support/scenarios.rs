//! Scripted model answers behind the checked-in transcript store.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ten_core::bench::{ingest_dataset, DatasetFormat, Task};
use ten_core::llm::{BackendConfig, ScriptedBackend};
use ten_core::table::{serialize_html, Table};

pub fn replay_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay")
}

pub fn transcript_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/transcripts")
}

pub fn replay_tasks() -> Vec<Task> {
    ingest_dataset(&replay_dir(), DatasetFormat::PairedText).expect("replay fixtures load")
}

pub fn task(id: &str) -> Task {
    replay_tasks().into_iter().find(|t| t.id == id).expect("known task")
}

/// A chat answer the way models tend to send it: prose around a fenced block.
pub fn extraction_response(t: &Table) -> String {
    let json = serde_json::json!({
        "tables": [{"$starting_token$": null, "$row_delimiter$": "\r\n", "$html_output$": serialize_html(t)}]
    });
    format!(
        "Here is the reconstructed table.\n\n```json\n{}\n```\n",
        serde_json::to_string_pretty(&json).unwrap()
    )
}

/// Note numbers glued onto the first value column.
pub fn balance_sheet_first_draft(gold: &Table) -> Table {
    let (header, mut body) = gold.clone().into_parts();
    for row in &mut body {
        if !row[1].text.is_empty() && !row[2].text.is_empty() {
            row[2].text = format!("{} {}", row[1].text, row[2].text);
            row[1].text.clear();
        }
    }
    Table::new(header, body)
}

pub fn fruit_first_draft() -> Table {
    Table::from_text(&[vec!["Fruit", "Qty"]], &[vec!["apples pears", "102, 205"]])
}

pub struct Scenario {
    pub id: &'static str,
    pub generator: Vec<String>,
    pub critic: Vec<String>,
}

pub fn scenarios() -> Vec<Scenario> {
    let bs = task("balance_sheet");
    vec![
        Scenario {
            id: "balance_sheet",
            generator: vec![
                extraction_response(&balance_sheet_first_draft(&bs.gold)),
                extraction_response(&bs.gold),
            ],
            critic: vec![
                "The \"As at March 31,2024\" column holds two values per cell: the note number and the amount \
                 (for example \"3 513.49\"). Move each leading note number into the \"Note No.\" column and keep \
                 only the amount. Section labels such as \"Non-Current Assets\" are fine as label rows."
                    .into(),
            ],
        },
        Scenario {
            id: "fruit",
            generator: vec![extraction_response(&fruit_first_draft()), extraction_response(&task("fruit").gold)],
            critic: vec!["Row 1 merges two records: \"apples pears\" and \"102, 205\". Split them into two rows.".into()],
        },
        Scenario { id: "orders", generator: vec![extraction_response(&task("orders").gold)], critic: vec![] },
    ]
}

pub fn scripted(responses: &[String]) -> ScriptedBackend {
    let cfg = BackendConfig::default();
    ScriptedBackend::new(responses.to_vec()).with_model(cfg.model_id.clone(), cfg.params())
}
