//! Related database contents: the feedback component that shows the model
//! which concrete values live in the columns its SQL touched, plus any cell
//! values the question itself mentions.

use serde::{Deserialize, Serialize};
use sqlrev_sqlite::Connection;

use crate::schema::{quote_ident, value_to_text, DatabaseSchema};
use crate::skeleton::question_ngrams;

/// Sample values shown for one referenced column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentEntry {
    pub table: String,
    pub column: String,
    pub values: Vec<String>,
}

/// A question span found verbatim (or as a long prefix) among a column's
/// stored values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueMatch {
    pub question_span: String,
    pub table: String,
    pub column: String,
    pub cell_value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub entries: Vec<ContentEntry>,
    pub value_matches: Vec<ValueMatch>,
    /// Referenced tables/columns that do not exist; kept for the report.
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ContentConfig {
    /// Maximum sample values per entry.
    pub max_values_per_entry: usize,
    /// Distinct values scanned per text column when matching the question.
    pub value_scan_limit: usize,
}

impl Default for ContentConfig {
    fn default() -> Self {
        ContentConfig {
            max_values_per_entry: 5,
            value_scan_limit: 2000,
        }
    }
}

impl ContentBlock {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.value_matches.is_empty()
    }

    /// Deterministic text form for the revision prompt.
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        if !self.entries.is_empty() {
            lines.push("Column values:".to_string());
            for entry in &self.entries {
                let values: Vec<String> =
                    entry.values.iter().map(|v| format!("'{v}'")).collect();
                lines.push(format!(
                    "  {}.{}: {}",
                    entry.table,
                    entry.column,
                    if values.is_empty() {
                        "(no values)".to_string()
                    } else {
                        values.join(", ")
                    }
                ));
            }
        }
        if !self.value_matches.is_empty() {
            lines.push("Question terms found in the database:".to_string());
            for m in &self.value_matches {
                lines.push(format!(
                    "  '{}' matches {}.{} value '{}'",
                    m.question_span, m.table, m.column, m.cell_value
                ));
            }
        }
        lines.join("\n")
    }
}

fn is_text_type(declared: &str) -> bool {
    let upper = declared.to_uppercase();
    upper.contains("CHAR") || upper.contains("TEXT") || upper.contains("CLOB")
}

/// Collects sample values for the referenced columns and scans text columns
/// for values the question mentions.
///
/// This is a total function: unknown tables or columns (a wrong predicted
/// SQL is normal input here) are skipped and noted in `diagnostics`, and a
/// missing or unopenable source database degrades to the values sampled at
/// schema load time.
pub fn collect_related_content(
    schema: &DatabaseSchema,
    referenced: &[(String, String)],
    question: &str,
    cfg: &ContentConfig,
) -> ContentBlock {
    let conn = schema
        .source
        .as_deref()
        .and_then(|p| Connection::open_read_only(p).ok());

    let mut block = ContentBlock::default();

    let mut seen = std::collections::HashSet::new();
    for (table_name, column_name) in referenced {
        let key = (table_name.to_lowercase(), column_name.to_lowercase());
        if !seen.insert(key) {
            continue;
        }
        let Some(table) = schema.table(table_name) else {
            block
                .diagnostics
                .push(format!("unknown table referenced: {table_name}"));
            continue;
        };
        let Some(column) = table.column(column_name) else {
            block.diagnostics.push(format!(
                "unknown column referenced: {}.{}",
                table.name, column_name
            ));
            continue;
        };

        let values = match &conn {
            Some(conn) => distinct_values(conn, &table.name, &column.name, cfg.max_values_per_entry)
                .unwrap_or_else(|| column.sample_values.clone()),
            None => column.sample_values.clone(),
        };
        block.entries.push(ContentEntry {
            table: table.name.clone(),
            column: column.name.clone(),
            values: values.into_iter().take(cfg.max_values_per_entry).collect(),
        });
    }

    let ngrams = question_ngrams(question);
    if !ngrams.is_empty() {
        let mut reported = std::collections::HashSet::new();
        for table in &schema.tables {
            for column in &table.columns {
                if !is_text_type(&column.declared_type) {
                    continue;
                }
                let values = match &conn {
                    Some(conn) => {
                        distinct_values(conn, &table.name, &column.name, cfg.value_scan_limit)
                            .unwrap_or_else(|| column.sample_values.clone())
                    }
                    None => column.sample_values.clone(),
                };
                for value in &values {
                    let value_lower = value.to_lowercase();
                    for (display, lower) in &ngrams {
                        let matched = *lower == value_lower
                            || (lower.chars().count() >= 4 && value_lower.starts_with(lower));
                        if matched
                            && reported.insert((
                                lower.clone(),
                                table.name.to_lowercase(),
                                column.name.to_lowercase(),
                                value_lower.clone(),
                            ))
                        {
                            block.value_matches.push(ValueMatch {
                                question_span: display.clone(),
                                table: table.name.clone(),
                                column: column.name.clone(),
                                cell_value: value.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    block
}

fn distinct_values(
    conn: &Connection,
    table: &str,
    column: &str,
    limit: usize,
) -> Option<Vec<String>> {
    let rows = conn
        .query(&format!(
            "SELECT DISTINCT {col} FROM {table} WHERE {col} IS NOT NULL ORDER BY 1 LIMIT {limit}",
            col = quote_ident(column),
            table = quote_ident(table),
        ))
        .ok()?;
    Some(
        rows.rows
            .iter()
            .filter_map(|r| r.first().and_then(value_to_text))
            .collect(),
    )
}
