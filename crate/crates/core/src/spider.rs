//! Spider-format benchmark ingestion: the examples JSON (question, query,
//! db_id), the `tables.json` catalog, and the per-database directory layout
//! `<db_dir>/<db_id>/<db_id>.sqlite`. Spider, Spider-SYN, and Spider-DK all
//! share this format.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::question::Question;
use crate::schema::DatabaseSchema;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} is not valid JSON: {message}")]
    Json { path: PathBuf, message: String },
    #[error("dataset entry {index} is missing or malforms field `{field}`")]
    Malformed { index: usize, field: &'static str },
    #[error("database {db_id} not found under the database directory")]
    MissingDatabase { db_id: String },
    #[error("database {db_id} is not listed in tables.json")]
    UnknownDbId { db_id: String },
}

/// SQL difficulty label, consumed from dataset metadata when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Difficulty {
    pub fn parse(label: &str) -> Option<Self> {
        match label.trim().to_lowercase().as_str() {
            "easy" => Some(Difficulty::Easy),
            "medium" => Some(Difficulty::Medium),
            "hard" => Some(Difficulty::Hard),
            "extra" | "extra hard" => Some(Difficulty::Extra),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
            Difficulty::Extra => "extra",
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone)]
pub struct BenchmarkExample {
    pub question: Question,
    pub gold_sql: String,
    pub db_id: String,
    pub difficulty: Option<Difficulty>,
}

/// One entry of `tables.json`.
#[derive(Debug, Clone, Deserialize)]
pub struct TablesEntry {
    pub db_id: String,
    pub table_names_original: Vec<String>,
    /// `[table_index, column_name]` pairs; index -1 marks the `*` column.
    pub column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    pub column_types: Vec<String>,
    #[serde(default)]
    pub foreign_keys: Vec<(i64, i64)>,
}

pub fn load_tables_json(path: &Path) -> Result<Vec<TablesEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Canonical location of a database in the Spider layout.
pub fn database_path(db_dir: &Path, db_id: &str) -> PathBuf {
    db_dir.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Loads a Spider-format examples file, validating each entry against
/// `tables.json` and checking the database file exists.
pub fn load_spider_dataset(
    examples_file: &Path,
    tables_file: &Path,
    db_dir: &Path,
) -> Result<Vec<BenchmarkExample>, DatasetError> {
    let known_dbs: HashSet<String> = load_tables_json(tables_file)?
        .into_iter()
        .map(|t| t.db_id)
        .collect();

    let text = std::fs::read_to_string(examples_file).map_err(|source| DatasetError::Io {
        path: examples_file.to_path_buf(),
        source,
    })?;
    let entries: Vec<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| DatasetError::Json {
            path: examples_file.to_path_buf(),
            message: e.to_string(),
        })?;

    let mut examples = Vec::with_capacity(entries.len());
    for (index, entry) in entries.iter().enumerate() {
        let question_text = entry
            .get("question")
            .and_then(|v| v.as_str())
            .filter(|s| !s.trim().is_empty())
            .ok_or(DatasetError::Malformed {
                index,
                field: "question",
            })?;
        let gold_sql = entry
            .get("query")
            .and_then(|v| v.as_str())
            .filter(|s| !s.trim().is_empty())
            .ok_or(DatasetError::Malformed {
                index,
                field: "query",
            })?;
        let db_id = entry
            .get("db_id")
            .and_then(|v| v.as_str())
            .filter(|s| !s.is_empty())
            .ok_or(DatasetError::Malformed {
                index,
                field: "db_id",
            })?;

        if !known_dbs.contains(db_id) {
            return Err(DatasetError::UnknownDbId {
                db_id: db_id.to_string(),
            });
        }
        if !database_path(db_dir, db_id).is_file() {
            return Err(DatasetError::MissingDatabase {
                db_id: db_id.to_string(),
            });
        }

        let difficulty = entry
            .get("difficulty")
            .and_then(|v| v.as_str())
            .and_then(Difficulty::parse);

        examples.push(BenchmarkExample {
            question: Question::new(question_text, db_id).expect("non-empty checked above"),
            gold_sql: gold_sql.to_string(),
            db_id: db_id.to_string(),
            difficulty,
        });
    }
    Ok(examples)
}

/// Compares a loaded catalog against its `tables.json` entry, returning one
/// diagnostic line per mismatch. Empty means the two agree on table and
/// column names (case-insensitive).
pub fn cross_check_schema(schema: &DatabaseSchema, entry: &TablesEntry) -> Vec<String> {
    let mut diagnostics = Vec::new();

    for (idx, table_name) in entry.table_names_original.iter().enumerate() {
        match schema.table(table_name) {
            None => diagnostics.push(format!(
                "tables.json table `{table_name}` missing from database catalog"
            )),
            Some(table) => {
                for (table_idx, column_name) in &entry.column_names_original {
                    if *table_idx == idx as i64 && table.column(column_name).is_none() {
                        diagnostics.push(format!(
                            "tables.json column `{table_name}.{column_name}` missing from catalog"
                        ));
                    }
                }
            }
        }
    }
    for table in &schema.tables {
        if !entry
            .table_names_original
            .iter()
            .any(|t| t.eq_ignore_ascii_case(&table.name))
        {
            diagnostics.push(format!(
                "catalog table `{}` not listed in tables.json",
                table.name
            ));
        }
    }
    diagnostics
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqlrev_sqlite::Connection;

    fn write_fixture(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let db_dir = dir.join("database");
        std::fs::create_dir_all(db_dir.join("tiny")).unwrap();
        Connection::open_or_create(&database_path(&db_dir, "tiny"))
            .unwrap()
            .execute_batch("CREATE TABLE t(a INT)")
            .unwrap();

        let tables = dir.join("tables.json");
        std::fs::write(
            &tables,
            r#"[{"db_id":"tiny","table_names_original":["t"],
                "column_names_original":[[-1,"*"],[0,"a"]],
                "column_types":["text","number"],"foreign_keys":[]}]"#,
        )
        .unwrap();

        let examples = dir.join("examples.json");
        std::fs::write(
            &examples,
            r#"[{"question":"How many rows?","query":"SELECT COUNT(*) FROM t","db_id":"tiny"},
                {"question":"List a","query":"SELECT a FROM t","db_id":"tiny","difficulty":"easy"}]"#,
        )
        .unwrap();
        (examples, tables, db_dir)
    }

    #[test]
    fn loads_wellformed_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let (examples, tables, db_dir) = write_fixture(dir.path());
        let loaded = load_spider_dataset(&examples, &tables, &db_dir).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].db_id, "tiny");
        assert_eq!(loaded[0].difficulty, None);
        assert_eq!(loaded[1].difficulty, Some(Difficulty::Easy));
    }

    #[test]
    fn missing_query_field_names_index_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let (_, tables, db_dir) = write_fixture(dir.path());
        let examples = dir.path().join("bad.json");
        std::fs::write(
            &examples,
            r#"[{"question":"ok","query":"SELECT 1","db_id":"tiny"},
                {"question":"broken","db_id":"tiny"}]"#,
        )
        .unwrap();
        match load_spider_dataset(&examples, &tables, &db_dir) {
            Err(DatasetError::Malformed { index, field }) => {
                assert_eq!(index, 1);
                assert_eq!(field, "query");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_db_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (_, tables, db_dir) = write_fixture(dir.path());
        let examples = dir.path().join("unknown.json");
        std::fs::write(
            &examples,
            r#"[{"question":"q","query":"SELECT 1","db_id":"ghost"}]"#,
        )
        .unwrap();
        assert!(matches!(
            load_spider_dataset(&examples, &tables, &db_dir),
            Err(DatasetError::UnknownDbId { .. })
        ));
    }

    #[test]
    fn missing_database_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (examples, tables, db_dir) = write_fixture(dir.path());
        std::fs::remove_file(database_path(&db_dir, "tiny")).unwrap();
        assert!(matches!(
            load_spider_dataset(&examples, &tables, &db_dir),
            Err(DatasetError::MissingDatabase { .. })
        ));
    }

    #[test]
    fn difficulty_labels_parse_including_extra_hard() {
        assert_eq!(Difficulty::parse("easy"), Some(Difficulty::Easy));
        assert_eq!(Difficulty::parse("Extra Hard"), Some(Difficulty::Extra));
        assert_eq!(Difficulty::parse("extra"), Some(Difficulty::Extra));
        assert_eq!(Difficulty::parse("unknown"), None);
    }

    #[test]
    fn cross_check_reports_mismatches_and_agreements() {
        let dir = tempfile::tempdir().unwrap();
        let (_, tables, db_dir) = write_fixture(dir.path());
        let entry = &load_tables_json(&tables).unwrap()[0];
        let schema = crate::schema::load_schema(&database_path(&db_dir, "tiny"), 0).unwrap();
        assert!(cross_check_schema(&schema, entry).is_empty());

        let mut wrong = entry.clone();
        wrong.table_names_original.push("phantom".to_string());
        let diags = cross_check_schema(&schema, &wrong);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("phantom"));
    }
}
