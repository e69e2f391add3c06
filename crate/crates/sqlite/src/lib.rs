//! Minimal safe wrapper over the system SQLite C library.
//!
//! Exposes exactly what the engine needs: read-only and read-write
//! connections, single-statement queries with typed cells, batch execution
//! for building fixture databases, and deadline-based interruption via the
//! progress handler. Error messages are the engine's verbatim strings.

use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::fmt;
use std::path::Path;
use std::time::Instant;

#[allow(non_camel_case_types)]
mod ffi {
    use std::ffi::{c_char, c_int, c_void};

    #[repr(C)]
    pub struct sqlite3 {
        _private: [u8; 0],
    }
    #[repr(C)]
    pub struct sqlite3_stmt {
        _private: [u8; 0],
    }

    extern "C" {
        pub fn sqlite3_open_v2(
            filename: *const c_char,
            db: *mut *mut sqlite3,
            flags: c_int,
            vfs: *const c_char,
        ) -> c_int;
        pub fn sqlite3_close(db: *mut sqlite3) -> c_int;
        pub fn sqlite3_errmsg(db: *mut sqlite3) -> *const c_char;
        pub fn sqlite3_prepare_v2(
            db: *mut sqlite3,
            sql: *const c_char,
            n_byte: c_int,
            stmt: *mut *mut sqlite3_stmt,
            tail: *mut *const c_char,
        ) -> c_int;
        pub fn sqlite3_step(stmt: *mut sqlite3_stmt) -> c_int;
        pub fn sqlite3_finalize(stmt: *mut sqlite3_stmt) -> c_int;
        pub fn sqlite3_column_count(stmt: *mut sqlite3_stmt) -> c_int;
        pub fn sqlite3_column_name(stmt: *mut sqlite3_stmt, col: c_int) -> *const c_char;
        pub fn sqlite3_column_type(stmt: *mut sqlite3_stmt, col: c_int) -> c_int;
        pub fn sqlite3_column_int64(stmt: *mut sqlite3_stmt, col: c_int) -> i64;
        pub fn sqlite3_column_double(stmt: *mut sqlite3_stmt, col: c_int) -> f64;
        pub fn sqlite3_column_text(stmt: *mut sqlite3_stmt, col: c_int) -> *const u8;
        pub fn sqlite3_column_blob(stmt: *mut sqlite3_stmt, col: c_int) -> *const c_void;
        pub fn sqlite3_column_bytes(stmt: *mut sqlite3_stmt, col: c_int) -> c_int;
        pub fn sqlite3_progress_handler(
            db: *mut sqlite3,
            ops: c_int,
            handler: Option<unsafe extern "C" fn(*mut c_void) -> c_int>,
            arg: *mut c_void,
        );
        pub fn sqlite3_libversion() -> *const c_char;
    }
}

const SQLITE_OK: c_int = 0;
const SQLITE_ROW: c_int = 100;
const SQLITE_DONE: c_int = 101;

const SQLITE_OPEN_READONLY: c_int = 0x0000_0001;
const SQLITE_OPEN_READWRITE: c_int = 0x0000_0002;
const SQLITE_OPEN_CREATE: c_int = 0x0000_0004;

const SQLITE_INTEGER: c_int = 1;
const SQLITE_FLOAT: c_int = 2;
const SQLITE_TEXT: c_int = 3;
const SQLITE_BLOB: c_int = 4;

/// Result codes the engine layers above care about.
pub mod codes {
    /// The file exists but is not a database (surfaces on first read).
    pub const NOTADB: i32 = 26;
    /// Operation interrupted, here always by the progress handler deadline.
    pub const INTERRUPT: i32 = 9;
    /// Unable to open the database file.
    pub const CANTOPEN: i32 = 14;
}

/// A single SQLite cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

/// Materialized result of one statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqliteError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for SqliteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for SqliteError {}

pub struct Connection {
    db: *mut ffi::sqlite3,
}

struct DeadlineState {
    deadline: Instant,
    fired: bool,
}

unsafe extern "C" fn deadline_handler(arg: *mut c_void) -> c_int {
    let state = &mut *(arg as *mut DeadlineState);
    if Instant::now() >= state.deadline {
        state.fired = true;
        1
    } else {
        0
    }
}

impl Connection {
    fn open(path: &Path, flags: c_int) -> Result<Self, SqliteError> {
        let cpath = path_to_cstring(path)?;
        let mut db: *mut ffi::sqlite3 = std::ptr::null_mut();
        let rc = unsafe { ffi::sqlite3_open_v2(cpath.as_ptr(), &mut db, flags, std::ptr::null()) };
        if rc != SQLITE_OK {
            let message = if db.is_null() {
                "unable to allocate database handle".to_string()
            } else {
                let msg = errmsg(db);
                unsafe { ffi::sqlite3_close(db) };
                msg
            };
            return Err(SqliteError { code: rc, message });
        }
        Ok(Connection { db })
    }

    /// Opens an existing database for reading only. Writes through this
    /// connection are rejected by the engine itself.
    pub fn open_read_only(path: &Path) -> Result<Self, SqliteError> {
        Self::open(path, SQLITE_OPEN_READONLY)
    }

    /// Opens a database for reading and writing, creating it if absent.
    pub fn open_or_create(path: &Path) -> Result<Self, SqliteError> {
        Self::open(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE)
    }

    fn last_error(&self, code: c_int) -> SqliteError {
        SqliteError {
            code,
            message: errmsg(self.db),
        }
    }

    /// Executes the first statement in `sql` and materializes its rows.
    /// Anything after the first statement is ignored.
    pub fn query(&self, sql: &str) -> Result<Rows, SqliteError> {
        self.query_inner(sql, None)
    }

    /// Like [`query`](Self::query) but aborts once `deadline` passes. An
    /// aborted run fails with [`codes::INTERRUPT`].
    pub fn query_with_deadline(&self, sql: &str, deadline: Instant) -> Result<Rows, SqliteError> {
        self.query_inner(sql, Some(deadline))
    }

    fn query_inner(&self, sql: &str, deadline: Option<Instant>) -> Result<Rows, SqliteError> {
        let csql = CString::new(sql).map_err(|_| SqliteError {
            code: 1,
            message: "SQL text contains an interior NUL byte".to_string(),
        })?;

        let mut stmt: *mut ffi::sqlite3_stmt = std::ptr::null_mut();
        let mut tail: *const c_char = std::ptr::null();
        let rc = unsafe {
            ffi::sqlite3_prepare_v2(self.db, csql.as_ptr(), -1, &mut stmt, &mut tail)
        };
        if rc != SQLITE_OK {
            return Err(self.last_error(rc));
        }
        if stmt.is_null() {
            return Err(SqliteError {
                code: 1,
                message: "no SQL statement found".to_string(),
            });
        }

        let mut state = DeadlineState {
            deadline: deadline.unwrap_or_else(Instant::now),
            fired: false,
        };
        if deadline.is_some() {
            // Check roughly every few thousand VM ops; cheap enough and
            // responsive enough for a per-query timeout.
            unsafe {
                ffi::sqlite3_progress_handler(
                    self.db,
                    4000,
                    Some(deadline_handler),
                    &mut state as *mut DeadlineState as *mut c_void,
                );
            }
        }

        let result = unsafe { collect_rows(stmt) };

        if deadline.is_some() {
            unsafe { ffi::sqlite3_progress_handler(self.db, 0, None, std::ptr::null_mut()) };
        }
        let rc = unsafe { ffi::sqlite3_finalize(stmt) };

        match result {
            Ok(rows) => {
                if rc != SQLITE_OK {
                    Err(self.last_error(rc))
                } else {
                    Ok(rows)
                }
            }
            Err(code) => Err(self.last_error(code)),
        }
    }

    /// Executes every statement in `sql`, stopping at the first error.
    pub fn execute_batch(&self, sql: &str) -> Result<(), SqliteError> {
        let csql = CString::new(sql).map_err(|_| SqliteError {
            code: 1,
            message: "SQL text contains an interior NUL byte".to_string(),
        })?;
        let mut next: *const c_char = csql.as_ptr();
        loop {
            let mut stmt: *mut ffi::sqlite3_stmt = std::ptr::null_mut();
            let mut tail: *const c_char = std::ptr::null();
            let rc = unsafe { ffi::sqlite3_prepare_v2(self.db, next, -1, &mut stmt, &mut tail) };
            if rc != SQLITE_OK {
                return Err(self.last_error(rc));
            }
            if stmt.is_null() {
                return Ok(()); // only whitespace or comments remained
            }
            let mut rc = unsafe { ffi::sqlite3_step(stmt) };
            while rc == SQLITE_ROW {
                rc = unsafe { ffi::sqlite3_step(stmt) };
            }
            let step_failed = rc != SQLITE_DONE;
            let step_code = rc;
            let rc = unsafe { ffi::sqlite3_finalize(stmt) };
            if step_failed {
                return Err(self.last_error(step_code));
            }
            if rc != SQLITE_OK {
                return Err(self.last_error(rc));
            }
            next = tail;
        }
    }

    /// Version string of the linked SQLite library.
    pub fn libversion() -> String {
        unsafe { CStr::from_ptr(ffi::sqlite3_libversion()) }
            .to_string_lossy()
            .into_owned()
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        unsafe { ffi::sqlite3_close(self.db) };
    }
}

/// Steps the statement to completion, copying every row out. Returns the
/// failing result code on error so the caller can read the message off the
/// connection.
unsafe fn collect_rows(stmt: *mut ffi::sqlite3_stmt) -> Result<Rows, c_int> {
    let ncols = ffi::sqlite3_column_count(stmt);
    let mut columns = Vec::with_capacity(ncols as usize);
    for i in 0..ncols {
        let name = ffi::sqlite3_column_name(stmt, i);
        let name = if name.is_null() {
            String::new()
        } else {
            CStr::from_ptr(name).to_string_lossy().into_owned()
        };
        columns.push(name);
    }

    let mut rows = Vec::new();
    loop {
        let rc = ffi::sqlite3_step(stmt);
        match rc {
            SQLITE_ROW => {
                let mut row = Vec::with_capacity(ncols as usize);
                for i in 0..ncols {
                    row.push(read_cell(stmt, i));
                }
                rows.push(row);
            }
            SQLITE_DONE => return Ok(Rows { columns, rows }),
            code => return Err(code),
        }
    }
}

unsafe fn read_cell(stmt: *mut ffi::sqlite3_stmt, col: c_int) -> Value {
    match ffi::sqlite3_column_type(stmt, col) {
        SQLITE_INTEGER => Value::Integer(ffi::sqlite3_column_int64(stmt, col)),
        SQLITE_FLOAT => Value::Real(ffi::sqlite3_column_double(stmt, col)),
        SQLITE_TEXT => {
            let ptr = ffi::sqlite3_column_text(stmt, col);
            let len = ffi::sqlite3_column_bytes(stmt, col) as usize;
            if ptr.is_null() {
                Value::Text(String::new())
            } else {
                let bytes = std::slice::from_raw_parts(ptr, len);
                Value::Text(String::from_utf8_lossy(bytes).into_owned())
            }
        }
        SQLITE_BLOB => {
            let ptr = ffi::sqlite3_column_blob(stmt, col);
            let len = ffi::sqlite3_column_bytes(stmt, col) as usize;
            if ptr.is_null() || len == 0 {
                Value::Blob(Vec::new())
            } else {
                Value::Blob(std::slice::from_raw_parts(ptr as *const u8, len).to_vec())
            }
        }
        _ => Value::Null,
    }
}

fn errmsg(db: *mut ffi::sqlite3) -> String {
    unsafe {
        let ptr = ffi::sqlite3_errmsg(db);
        if ptr.is_null() {
            "unknown SQLite error".to_string()
        } else {
            CStr::from_ptr(ptr).to_string_lossy().into_owned()
        }
    }
}

#[cfg(unix)]
fn path_to_cstring(path: &Path) -> Result<CString, SqliteError> {
    use std::os::unix::ffi::OsStrExt;
    CString::new(path.as_os_str().as_bytes()).map_err(|_| SqliteError {
        code: codes::CANTOPEN,
        message: format!("path contains a NUL byte: {}", path.display()),
    })
}

#[cfg(not(unix))]
fn path_to_cstring(path: &Path) -> Result<CString, SqliteError> {
    CString::new(path.to_string_lossy().as_bytes()).map_err(|_| SqliteError {
        code: codes::CANTOPEN,
        message: format!("path contains a NUL byte: {}", path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn scratch_db() -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sqlite");
        (dir, path)
    }

    #[test]
    fn create_query_roundtrip() {
        let (_dir, path) = scratch_db();
        let conn = Connection::open_or_create(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE t(a INT, b TEXT);
             INSERT INTO t VALUES (1, 'x');
             INSERT INTO t VALUES (2, NULL);",
        )
        .unwrap();
        let rows = conn.query("SELECT a, b FROM t ORDER BY a").unwrap();
        assert_eq!(rows.columns, vec!["a", "b"]);
        assert_eq!(
            rows.rows,
            vec![
                vec![Value::Integer(1), Value::Text("x".into())],
                vec![Value::Integer(2), Value::Null],
            ]
        );
    }

    #[test]
    fn missing_table_error_is_verbatim() {
        let (_dir, path) = scratch_db();
        let conn = Connection::open_or_create(&path).unwrap();
        let err = conn.query("SELECT * FROM nonexistent").unwrap_err();
        assert!(err.message.contains("no such table: nonexistent"), "{}", err.message);
    }

    #[test]
    fn read_only_rejects_writes() {
        let (_dir, path) = scratch_db();
        Connection::open_or_create(&path)
            .unwrap()
            .execute_batch("CREATE TABLE t(a)")
            .unwrap();
        let ro = Connection::open_read_only(&path).unwrap();
        let err = ro.query("INSERT INTO t VALUES (1)").unwrap_err();
        assert!(err.message.contains("readonly"), "{}", err.message);
    }

    #[test]
    fn garbage_file_fails_with_notadb() {
        let (_dir, path) = scratch_db();
        std::fs::write(&path, b"this is not a database file at all............").unwrap();
        let conn = Connection::open_read_only(&path).unwrap();
        let err = conn.query("SELECT count(*) FROM sqlite_master").unwrap_err();
        assert_eq!(err.code, codes::NOTADB);
    }

    #[test]
    fn deadline_interrupts_runaway_query() {
        let (_dir, path) = scratch_db();
        let conn = Connection::open_or_create(&path).unwrap();
        let deadline = Instant::now() + Duration::from_millis(50);
        let err = conn
            .query_with_deadline(
                "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM c) \
                 SELECT count(*) FROM c",
                deadline,
            )
            .unwrap_err();
        assert_eq!(err.code, codes::INTERRUPT);
    }

    #[test]
    fn only_first_statement_runs() {
        let (_dir, path) = scratch_db();
        let conn = Connection::open_or_create(&path).unwrap();
        conn.execute_batch("CREATE TABLE t(a); INSERT INTO t VALUES (7)").unwrap();
        let rows = conn.query("SELECT a FROM t; SELECT 999").unwrap();
        assert_eq!(rows.rows, vec![vec![Value::Integer(7)]]);
    }
}
