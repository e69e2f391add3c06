//! Database schema catalog: loading SQLite catalogs and rendering them as
//! CREATE TABLE prompt blocks.
//!
//! A loaded [`DatabaseSchema`] is immutable and safe to share across
//! threads; anything that needs live table contents opens its own read-only
//! session against [`DatabaseSchema::source`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqlrev_sqlite::{codes, Connection, SqliteError, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read database file: {0}")]
    FileNotReadable(PathBuf),
    #[error("not a SQLite database: {0}")]
    NotADatabase(PathBuf),
    #[error("duplicate table name (case-insensitive): {0}")]
    DuplicateTable(String),
    #[error("duplicate column name (case-insensitive): {table}.{column}")]
    DuplicateColumn { table: String, column: String },
    #[error("foreign key references unknown {side}: {table}.{column}")]
    DanglingForeignKey {
        side: &'static str,
        table: String,
        column: String,
    },
    #[error("database error: {0}")]
    Engine(#[from] SqliteError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub declared_type: String,
    /// Up to `max_sample_values` distinct non-null values, rendered as text.
    pub sample_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    pub columns: Vec<ColumnInfo>,
    pub row_count: u64,
}

impl TableInfo {
    pub fn column(&self, name: &str) -> Option<&ColumnInfo> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub table: String,
    pub column: String,
    pub referenced_table: String,
    pub referenced_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableInfo>,
    pub foreign_keys: Vec<ForeignKey>,
    /// File the schema was loaded from, when it came from disk. Content
    /// collection reopens this path for live value scans.
    pub source: Option<PathBuf>,
}

impl DatabaseSchema {
    /// Builds a schema and checks its structural invariants: unique table
    /// names, unique column names per table, and resolvable foreign keys.
    pub fn new(
        db_id: impl Into<String>,
        tables: Vec<TableInfo>,
        foreign_keys: Vec<ForeignKey>,
    ) -> Result<Self, SchemaError> {
        let schema = DatabaseSchema {
            db_id: db_id.into(),
            tables,
            foreign_keys,
            source: None,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = std::collections::HashSet::new();
        for table in &self.tables {
            if !seen.insert(table.name.to_lowercase()) {
                return Err(SchemaError::DuplicateTable(table.name.clone()));
            }
            let mut cols = std::collections::HashSet::new();
            for column in &table.columns {
                if !cols.insert(column.name.to_lowercase()) {
                    return Err(SchemaError::DuplicateColumn {
                        table: table.name.clone(),
                        column: column.name.clone(),
                    });
                }
            }
        }
        for fk in &self.foreign_keys {
            for (side, table, column) in [
                ("column", &fk.table, &fk.column),
                ("referenced column", &fk.referenced_table, &fk.referenced_column),
            ] {
                let ok = self
                    .table(table)
                    .map(|t| t.column(column).is_some())
                    .unwrap_or(false);
                if !ok {
                    return Err(SchemaError::DanglingForeignKey {
                        side,
                        table: table.clone(),
                        column: column.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }
}

/// Double-quotes an identifier for direct embedding in SQL text.
pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn quote_literal(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}

/// Renders a cell for sample lists and prompt text.
pub(crate) fn value_to_text(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::Integer(i) => Some(i.to_string()),
        Value::Real(r) => Some(format!("{r}")),
        Value::Text(t) => Some(t.clone()),
        Value::Blob(_) => None,
    }
}

/// Reads the full catalog of a SQLite database file.
///
/// `db_id` is the file stem. Row counts and up to `max_sample_values`
/// distinct values per column are materialized so later stages never need
/// the file for schema-only work. Foreign keys whose endpoints cannot be
/// resolved are dropped with a warning rather than failing the load.
pub fn load_schema(path: &Path, max_sample_values: usize) -> Result<DatabaseSchema, SchemaError> {
    if !path.is_file() {
        return Err(SchemaError::FileNotReadable(path.to_path_buf()));
    }
    let conn = Connection::open_read_only(path).map_err(|e| match e.code {
        codes::CANTOPEN => SchemaError::FileNotReadable(path.to_path_buf()),
        _ => SchemaError::Engine(e),
    })?;

    let table_names = conn
        .query(
            "SELECT name FROM sqlite_master \
             WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
        )
        .map_err(|e| match e.code {
            codes::NOTADB => SchemaError::NotADatabase(path.to_path_buf()),
            _ => SchemaError::Engine(e),
        })?;

    let mut tables = Vec::new();
    let mut foreign_keys = Vec::new();

    for row in &table_names.rows {
        let name = match row.first() {
            Some(Value::Text(name)) => name.clone(),
            _ => continue,
        };

        let cols = conn.query(&format!(
            "SELECT name, type, pk FROM pragma_table_info({})",
            quote_literal(&name)
        ))?;
        let mut columns = Vec::new();
        for col_row in &cols.rows {
            let col_name = match col_row.first() {
                Some(Value::Text(n)) => n.clone(),
                _ => continue,
            };
            let declared_type = match col_row.get(1) {
                Some(Value::Text(t)) => t.clone(),
                _ => String::new(),
            };
            let sample_values = if max_sample_values > 0 {
                sample_column_values(&conn, &name, &col_name, max_sample_values)?
            } else {
                Vec::new()
            };
            columns.push(ColumnInfo {
                name: col_name,
                declared_type,
                sample_values,
            });
        }

        let count = conn.query(&format!("SELECT COUNT(*) FROM {}", quote_ident(&name)))?;
        let row_count = match count.rows.first().and_then(|r| r.first()) {
            Some(Value::Integer(n)) => (*n).max(0) as u64,
            _ => 0,
        };

        let fks = conn.query(&format!(
            "SELECT \"table\", \"from\", \"to\" FROM pragma_foreign_key_list({})",
            quote_literal(&name)
        ))?;
        for fk_row in &fks.rows {
            let referenced_table = match fk_row.first() {
                Some(Value::Text(t)) => t.clone(),
                _ => continue,
            };
            let column = match fk_row.get(1) {
                Some(Value::Text(c)) => c.clone(),
                _ => continue,
            };
            let referenced_column = match fk_row.get(2) {
                Some(Value::Text(c)) => c.clone(),
                // An omitted target column means the referenced table's
                // primary key; resolved after all tables are read.
                _ => String::new(),
            };
            foreign_keys.push(ForeignKey {
                table: name.clone(),
                column,
                referenced_table,
                referenced_column,
            });
        }

        tables.push(TableInfo {
            name,
            columns,
            row_count,
        });
    }

    // Resolve implicit primary-key targets and drop unresolvable keys.
    for fk in &mut foreign_keys {
        if fk.referenced_column.is_empty() {
            if let Some(pk) = primary_key_column(&conn, &fk.referenced_table)? {
                fk.referenced_column = pk;
            }
        }
    }
    let mut schema = DatabaseSchema {
        db_id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        tables,
        foreign_keys: Vec::new(),
        source: Some(path.to_path_buf()),
    };
    for fk in foreign_keys {
        let resolved = schema
            .table(&fk.table)
            .map(|t| t.column(&fk.column).is_some())
            .unwrap_or(false)
            && schema
                .table(&fk.referenced_table)
                .map(|t| t.column(&fk.referenced_column).is_some())
                .unwrap_or(false);
        if resolved {
            schema.foreign_keys.push(fk);
        } else {
            log::warn!(
                "{}: dropping unresolvable foreign key {}.{} -> {}.{}",
                schema.db_id,
                fk.table,
                fk.column,
                fk.referenced_table,
                fk.referenced_column
            );
        }
    }
    schema.validate()?;
    Ok(schema)
}

fn sample_column_values(
    conn: &Connection,
    table: &str,
    column: &str,
    limit: usize,
) -> Result<Vec<String>, SchemaError> {
    let rows = conn.query(&format!(
        "SELECT DISTINCT {col} FROM {table} WHERE {col} IS NOT NULL ORDER BY 1 LIMIT {limit}",
        col = quote_ident(column),
        table = quote_ident(table),
    ))?;
    Ok(rows
        .rows
        .iter()
        .filter_map(|r| r.first().and_then(value_to_text))
        .collect())
}

fn primary_key_column(conn: &Connection, table: &str) -> Result<Option<String>, SchemaError> {
    let rows = conn.query(&format!(
        "SELECT name FROM pragma_table_info({}) WHERE pk > 0 ORDER BY pk LIMIT 1",
        quote_literal(table)
    ))?;
    Ok(rows.rows.first().and_then(|r| match r.first() {
        Some(Value::Text(name)) => Some(name.clone()),
        _ => None,
    }))
}

/// Renders the schema as CREATE TABLE statements.
///
/// Tables are emitted in case-insensitive name order and foreign keys in a
/// canonical sort, so the same catalog always produces byte-identical text
/// regardless of source ordering.
pub fn render_schema_prompt(schema: &DatabaseSchema) -> String {
    let mut tables: Vec<&TableInfo> = schema.tables.iter().collect();
    tables.sort_by(|a, b| a.name.to_lowercase().cmp(&b.name.to_lowercase()));

    let mut blocks = Vec::with_capacity(tables.len());
    for table in tables {
        let mut lines = Vec::new();
        for column in &table.columns {
            if column.declared_type.is_empty() {
                lines.push(format!("  {}", quote_ident(&column.name)));
            } else {
                lines.push(format!(
                    "  {} {}",
                    quote_ident(&column.name),
                    column.declared_type
                ));
            }
        }
        let mut fks: Vec<&ForeignKey> = schema
            .foreign_keys
            .iter()
            .filter(|fk| fk.table.eq_ignore_ascii_case(&table.name))
            .collect();
        fks.sort_by_key(|fk| {
            (
                fk.column.to_lowercase(),
                fk.referenced_table.to_lowercase(),
                fk.referenced_column.to_lowercase(),
            )
        });
        for fk in fks {
            lines.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {}({})",
                quote_ident(&fk.column),
                quote_ident(&fk.referenced_table),
                quote_ident(&fk.referenced_column)
            ));
        }
        blocks.push(format!(
            "CREATE TABLE {} (\n{}\n);",
            quote_ident(&table.name),
            lines.join(",\n")
        ));
    }
    blocks.join("\n\n")
}
