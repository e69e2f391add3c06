//! SQL execution against SQLite files and the result-equality predicate
//! used both by the revision chain's termination test and by execution
//! accuracy scoring.

use std::path::Path;
use std::time::{Duration, Instant};

use sqlrev_sqlite::{codes, Connection, Value};

use crate::sql_analysis::has_top_level_order_by;

/// Materialized rows of a successful execution. Comparison is positional;
/// column names are informational only.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Table(ResultTable),
    Error(String),
}

/// What happened when a SQL string hit the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    pub elapsed: Duration,
}

impl ExecutionResult {
    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, Outcome::Table(_))
    }

    pub fn table(&self) -> Option<&ResultTable> {
        match &self.outcome {
            Outcome::Table(t) => Some(t),
            Outcome::Error(_) => None,
        }
    }

    pub fn error_message(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Error(m) => Some(m),
            Outcome::Table(_) => None,
        }
    }
}

/// How two result tables are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualityPolicy {
    /// Compare rows as sequences instead of multisets.
    pub order_sensitive: bool,
    /// Absolute tolerance for numeric cells.
    pub float_tolerance: f64,
}

impl Default for EqualityPolicy {
    fn default() -> Self {
        EqualityPolicy {
            order_sensitive: false,
            float_tolerance: 1e-6,
        }
    }
}

impl EqualityPolicy {
    /// Order sensitivity follows the reference SQL: on exactly when it has
    /// a top-level ORDER BY.
    pub fn for_gold_sql(gold_sql: &str) -> Self {
        EqualityPolicy {
            order_sensitive: has_top_level_order_by(gold_sql),
            ..EqualityPolicy::default()
        }
    }
}

/// Runs `sql` read-only against the database at `db_path`.
///
/// Total: every failure — unreadable file, engine error, write attempt,
/// exceeding `timeout` — comes back as an error result, never a panic or an
/// `Err`. The error message is the engine's verbatim text; timeouts read
/// exactly "timeout".
pub fn execute(sql: &str, db_path: &Path, timeout: Duration) -> ExecutionResult {
    let start = Instant::now();
    let finish = |outcome: Outcome, start: Instant| ExecutionResult {
        outcome,
        elapsed: start.elapsed(),
    };

    if sql.trim().is_empty() {
        return finish(Outcome::Error("no SQL statement found".to_string()), start);
    }
    let conn = match Connection::open_read_only(db_path) {
        Ok(conn) => conn,
        Err(e) => return finish(Outcome::Error(e.message), start),
    };
    let deadline = start + timeout;
    match conn.query_with_deadline(sql, deadline) {
        Ok(rows) => finish(
            Outcome::Table(ResultTable {
                column_names: rows.columns,
                rows: rows.rows,
            }),
            start,
        ),
        Err(e) if e.code == codes::INTERRUPT && Instant::now() >= deadline => {
            finish(Outcome::Error("timeout".to_string()), start)
        }
        Err(e) => finish(Outcome::Error(e.message), start),
    }
}

/// Equality of two execution results under `policy`.
///
/// An error result equals nothing, including itself: the revision chain
/// must not terminate on two consecutive failures, and a failed prediction
/// can never score as correct.
pub fn results_equal(a: &ExecutionResult, b: &ExecutionResult, policy: &EqualityPolicy) -> bool {
    let (Some(ta), Some(tb)) = (a.table(), b.table()) else {
        return false;
    };
    tables_equal(ta, tb, policy)
}

pub fn tables_equal(a: &ResultTable, b: &ResultTable, policy: &EqualityPolicy) -> bool {
    if a.column_names.len() != b.column_names.len() || a.rows.len() != b.rows.len() {
        return false;
    }
    if policy.order_sensitive {
        a.rows
            .iter()
            .zip(&b.rows)
            .all(|(ra, rb)| row_equal(ra, rb, policy.float_tolerance))
    } else {
        let mut sa: Vec<&Vec<Value>> = a.rows.iter().collect();
        let mut sb: Vec<&Vec<Value>> = b.rows.iter().collect();
        sa.sort_by(|x, y| row_key(x).cmp(&row_key(y)));
        sb.sort_by(|x, y| row_key(x).cmp(&row_key(y)));
        sa.iter()
            .zip(&sb)
            .all(|(ra, rb)| row_equal(ra, rb, policy.float_tolerance))
    }
}

fn row_equal(a: &[Value], b: &[Value], tolerance: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| cell_equal(x, y, tolerance))
}

fn cell_equal(a: &Value, b: &Value, tolerance: f64) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Integer(x), Value::Integer(y)) => x == y,
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::Blob(x), Value::Blob(y)) => x == y,
        _ => match (numeric(a), numeric(b)) {
            (Some(x), Some(y)) => (x - y).abs() <= tolerance,
            _ => false,
        },
    }
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Real(r) => Some(*r),
        _ => None,
    }
}

/// Canonical sort key so multiset comparison aligns equivalent rows.
/// Integers and reals share one numeric class, letting `1` line up with
/// `1.0` before the tolerant pairwise pass.
fn row_key(row: &[Value]) -> Vec<(u8, u64, i64, Vec<u8>)> {
    row.iter()
        .map(|cell| match cell {
            Value::Null => (0u8, 0u64, 0i64, Vec::new()),
            Value::Integer(i) => (1, ordered_f64_bits(*i as f64), *i, Vec::new()),
            Value::Real(r) => (1, ordered_f64_bits(*r), 0, Vec::new()),
            Value::Text(t) => (2, 0, 0, t.as_bytes().to_vec()),
            Value::Blob(b) => (3, 0, 0, b.clone()),
        })
        .collect()
}

/// Monotone map from f64 to u64 (total order, NaN sorts last).
fn ordered_f64_bits(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 0 {
        bits | (1 << 63)
    } else {
        !bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    const T: Duration = Duration::from_secs(5);

    fn fixture_db() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.sqlite");
        Connection::open_or_create(&path)
            .unwrap()
            .execute_batch(
                "CREATE TABLE t(a INT, d TEXT);
                 INSERT INTO t VALUES (1, '2020-01-01');
                 INSERT INTO t VALUES (2, '2021-06-30');
                 INSERT INTO t VALUES (3, '2022-12-31');",
            )
            .unwrap();
        (dir, path)
    }

    fn ok_table(rows: Vec<Vec<Value>>) -> ExecutionResult {
        ExecutionResult {
            outcome: Outcome::Table(ResultTable {
                column_names: vec!["c".into(); rows.first().map(|r| r.len()).unwrap_or(0)],
                rows,
            }),
            elapsed: Duration::ZERO,
        }
    }

    #[test]
    fn select_one() {
        let (_dir, path) = fixture_db();
        let result = execute("SELECT 1", &path, T);
        assert_eq!(result.table().unwrap().rows, vec![vec![Value::Integer(1)]]);
    }

    #[test]
    fn missing_table_error_verbatim() {
        let (_dir, path) = fixture_db();
        let result = execute("SELECT * FROM nonexistent", &path, T);
        assert!(result
            .error_message()
            .unwrap()
            .contains("no such table: nonexistent"));
    }

    #[test]
    fn missing_function_error_verbatim() {
        let (_dir, path) = fixture_db();
        let result = execute("SELECT YEAR(d) FROM t", &path, T);
        assert!(result
            .error_message()
            .unwrap()
            .contains("no such function: YEAR"));
    }

    #[test]
    fn aggregate_misuse_error_verbatim() {
        let (_dir, path) = fixture_db();
        let result = execute("SELECT a FROM t WHERE COUNT(*) > 1", &path, T);
        assert!(result
            .error_message()
            .unwrap()
            .contains("misuse of aggregate"));
    }

    #[test]
    fn writes_are_rejected_and_database_unchanged() {
        let (_dir, path) = fixture_db();
        let before = execute("SELECT COUNT(*) FROM t", &path, T);
        let write = execute("INSERT INTO t VALUES (9, 'x')", &path, T);
        assert!(!write.is_ok());
        let after = execute("SELECT COUNT(*) FROM t", &path, T);
        assert!(results_equal(&before, &after, &EqualityPolicy::default()));
    }

    #[test]
    fn runaway_query_times_out() {
        let (_dir, path) = fixture_db();
        let result = execute(
            "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM c) \
             SELECT count(*) FROM c",
            &path,
            Duration::from_millis(50),
        );
        assert_eq!(result.error_message(), Some("timeout"));
    }

    #[test]
    fn unreadable_database_is_an_error_result() {
        let result = execute("SELECT 1", Path::new("/no/such/file.sqlite"), T);
        assert!(!result.is_ok());
    }

    #[test]
    fn identical_tables_are_equal() {
        let a = ok_table(vec![vec![Value::Integer(1)], vec![Value::Integer(2)]]);
        assert!(results_equal(&a, &a.clone(), &EqualityPolicy::default()));
    }

    #[test]
    fn permuted_rows_equal_only_without_order() {
        let a = ok_table(vec![vec![Value::Integer(1)], vec![Value::Integer(2)]]);
        let b = ok_table(vec![vec![Value::Integer(2)], vec![Value::Integer(1)]]);
        let unordered = EqualityPolicy::default();
        let ordered = EqualityPolicy {
            order_sensitive: true,
            ..EqualityPolicy::default()
        };
        assert!(results_equal(&a, &b, &unordered));
        assert!(!results_equal(&a, &b, &ordered));
    }

    #[test]
    fn duplicates_matter_in_multiset_mode() {
        let a = ok_table(vec![vec![Value::Integer(1)], vec![Value::Integer(1)]]);
        let b = ok_table(vec![vec![Value::Integer(1)]]);
        assert!(!results_equal(&a, &b, &EqualityPolicy::default()));
    }

    #[test]
    fn errors_equal_nothing_even_themselves() {
        let err = ExecutionResult {
            outcome: Outcome::Error("boom".into()),
            elapsed: Duration::ZERO,
        };
        let ok = ok_table(vec![]);
        let policy = EqualityPolicy::default();
        assert!(!results_equal(&err, &err.clone(), &policy));
        assert!(!results_equal(&err, &ok, &policy));
        assert!(!results_equal(&ok, &err, &policy));
    }

    #[test]
    fn numeric_cells_compare_with_tolerance() {
        let a = ok_table(vec![vec![Value::Real(1.0)]]);
        let b = ok_table(vec![vec![Value::Real(1.0 + 5e-7)]]);
        let c = ok_table(vec![vec![Value::Real(1.1)]]);
        let policy = EqualityPolicy::default();
        assert!(results_equal(&a, &b, &policy));
        assert!(!results_equal(&a, &c, &policy));
    }

    #[test]
    fn integer_and_real_cells_can_match() {
        let a = ok_table(vec![vec![Value::Integer(1)], vec![Value::Integer(3)]]);
        let b = ok_table(vec![vec![Value::Real(3.0)], vec![Value::Real(1.0)]]);
        assert!(results_equal(&a, &b, &EqualityPolicy::default()));
    }

    #[test]
    fn text_never_coerces_to_number() {
        let a = ok_table(vec![vec![Value::Text("1".into())]]);
        let b = ok_table(vec![vec![Value::Integer(1)]]);
        assert!(!results_equal(&a, &b, &EqualityPolicy::default()));
    }

    #[test]
    fn policy_follows_gold_order_by() {
        assert!(EqualityPolicy::for_gold_sql("SELECT a FROM t ORDER BY a").order_sensitive);
        assert!(!EqualityPolicy::for_gold_sql("SELECT a FROM t").order_sensitive);
    }

    #[test]
    fn symmetry_on_random_tables() {
        // Sorted-multiset oracle: symmetric by construction; spot-check the
        // implementation agrees both ways on a few shuffled tables.
        let a = ok_table(vec![
            vec![Value::Integer(1), Value::Text("x".into())],
            vec![Value::Null, Value::Real(2.5)],
            vec![Value::Integer(1), Value::Text("x".into())],
        ]);
        let b = ok_table(vec![
            vec![Value::Null, Value::Real(2.5)],
            vec![Value::Integer(1), Value::Text("x".into())],
            vec![Value::Integer(1), Value::Text("x".into())],
        ]);
        let policy = EqualityPolicy::default();
        assert_eq!(results_equal(&a, &b, &policy), results_equal(&b, &a, &policy));
        assert!(results_equal(&a, &b, &policy));
    }
}
