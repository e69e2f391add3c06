//! Lexical analysis of SQL text: identifier extraction for feedback,
//! top-level ORDER BY detection for result comparison, and cleanup of model
//! completions into bare SQL.
//!
//! Extraction is deliberately a tokenizer plus clause tracking, not a full
//! parser — predicted SQL is frequently malformed and the contract is
//! best-effort recovery, never an error.

use std::collections::HashSet;

/// One SQL token.
#[derive(Debug, Clone, PartialEq)]
enum Token {
    /// Bare or quoted identifier (quotes removed).
    Ident(String),
    /// String literal, quotes removed.
    StringLit(String),
    Number(String),
    Punct(char),
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Tokenizes SQL text, dropping comments and whitespace. Never fails;
/// unrecognized characters come through as punctuation.
fn tokenize(sql: &str) -> Vec<Token> {
    let chars: Vec<char> = sql.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // -- line comment
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        // /* block comment */
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                i += 1;
            }
            i = (i + 2).min(chars.len());
            continue;
        }
        if c == '\'' {
            let (lit, next) = scan_quoted(&chars, i, '\'');
            tokens.push(Token::StringLit(lit));
            i = next;
            continue;
        }
        if c == '"' || c == '`' {
            let (lit, next) = scan_quoted(&chars, i, c);
            tokens.push(Token::Ident(lit));
            i = next;
            continue;
        }
        if c == '[' {
            // Bracket-quoted identifier.
            if let Some(end) = chars[i + 1..].iter().position(|&x| x == ']') {
                let lit: String = chars[i + 1..i + 1 + end].iter().collect();
                tokens.push(Token::Ident(lit));
                i += end + 2;
                continue;
            }
        }
        if is_ident_start(c) {
            let mut ident = String::new();
            while i < chars.len() && is_ident_char(chars[i]) {
                ident.push(chars[i]);
                i += 1;
            }
            tokens.push(Token::Ident(ident));
            continue;
        }
        if c.is_ascii_digit() {
            let mut num = String::new();
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                num.push(chars[i]);
                i += 1;
            }
            tokens.push(Token::Number(num));
            continue;
        }
        tokens.push(Token::Punct(c));
        i += 1;
    }
    tokens
}

/// Scans a quoted span starting at `start`, handling doubled quotes as
/// escapes. Returns the unquoted text and the index after the close.
fn scan_quoted(chars: &[char], start: usize, quote: char) -> (String, usize) {
    let mut out = String::new();
    let mut i = start + 1;
    while i < chars.len() {
        if chars[i] == quote {
            if chars.get(i + 1) == Some(&quote) {
                out.push(quote);
                i += 2;
                continue;
            }
            return (out, i + 1);
        }
        out.push(chars[i]);
        i += 1;
    }
    (out, i)
}

const KEYWORDS: &[&str] = &[
    "select", "from", "where", "group", "order", "by", "having", "limit", "offset", "join",
    "inner", "left", "right", "full", "outer", "cross", "natural", "on", "as", "and", "or",
    "not", "in", "exists", "between", "like", "glob", "is", "null", "distinct", "all", "union",
    "intersect", "except", "case", "when", "then", "else", "end", "asc", "desc", "with",
    "recursive", "values", "cast", "collate", "using", "escape",
];

fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word.to_lowercase().as_str())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Clause {
    None,
    Select,
    From,
    Where,
    GroupBy,
    Having,
    OrderBy,
    On,
    Limit,
}

/// Best-effort extraction of the `(table, column)` pairs a SQL query
/// touches.
///
/// Tables come from FROM/JOIN clauses, with aliases resolved; columns come
/// from qualified `alias.column` references anywhere and bare identifiers in
/// column positions. A bare column attaches to every table in scope, and a
/// qualifier that is neither a known alias nor a seen table is kept as a
/// table name verbatim. Pairs are deduplicated in first-appearance order.
/// Malformed SQL yields whatever is recoverable.
pub fn referenced_identifiers(sql: &str) -> Vec<(String, String)> {
    let tokens = tokenize(sql);

    // Pass 1: collect table names and aliases from FROM/JOIN ranges.
    let mut tables: Vec<String> = Vec::new();
    let mut aliases: Vec<(String, String)> = Vec::new(); // alias -> table
    let mut clause = Clause::None;
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i] {
            Token::Ident(word) => {
                let lower = word.to_lowercase();
                if let Some(next) = clause_for(&lower, &tokens, i) {
                    clause = next;
                    i += clause_len(&lower);
                    continue;
                }
                if clause == Clause::From && !is_keyword(word) {
                    // Table name, unless it is a qualified column used in a
                    // later clause; FROM scope only sees "name [AS] alias".
                    if tokens.get(i + 1) == Some(&Token::Punct('(')) {
                        // Function call in FROM (table-valued); skip name.
                        i += 1;
                        continue;
                    }
                    let table = word.clone();
                    if !tables.iter().any(|t| t.eq_ignore_ascii_case(&table)) {
                        tables.push(table.clone());
                    }
                    // Optional alias: "t AS a" or "t a".
                    let mut j = i + 1;
                    if let Some(Token::Ident(next)) = tokens.get(j) {
                        if next.eq_ignore_ascii_case("as") {
                            j += 1;
                        }
                    }
                    if let Some(Token::Ident(alias)) = tokens.get(j) {
                        if !is_keyword(alias) && tokens.get(j + 1) != Some(&Token::Punct('.')) {
                            aliases.push((alias.clone(), table.clone()));
                            i = j + 1;
                            continue;
                        }
                    }
                    i += 1;
                    continue;
                }
                i += 1;
            }
            _ => {
                if let Token::Punct(',') = tokens[i] {
                    // stay in clause; commas separate FROM items
                }
                i += 1;
            }
        }
    }

    let resolve = |qualifier: &str| -> String {
        for (alias, table) in &aliases {
            if alias.eq_ignore_ascii_case(qualifier) {
                return table.clone();
            }
        }
        qualifier.to_string()
    };

    // Pass 2: collect column references.
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push_pair = |table: String, column: String| {
        if !pairs
            .iter()
            .any(|(t, c)| t.eq_ignore_ascii_case(&table) && c.eq_ignore_ascii_case(&column))
        {
            pairs.push((table, column));
        }
    };

    let mut clause = Clause::None;
    let mut i = 0;
    while i < tokens.len() {
        let Token::Ident(word) = &tokens[i] else {
            i += 1;
            continue;
        };
        let lower = word.to_lowercase();
        if let Some(next) = clause_for(&lower, &tokens, i) {
            clause = next;
            i += clause_len(&lower);
            continue;
        }
        if is_keyword(word) {
            i += 1;
            continue;
        }

        // Qualified reference: qualifier.column (column may be *).
        if tokens.get(i + 1) == Some(&Token::Punct('.')) {
            if let Some(Token::Ident(column)) = tokens.get(i + 2) {
                if !is_keyword(column) {
                    push_pair(resolve(word), column.clone());
                }
                i += 3;
                continue;
            }
            // qualifier.* — the star names no column.
            i += 3;
            continue;
        }

        let column_position = matches!(
            clause,
            Clause::Select | Clause::Where | Clause::GroupBy | Clause::Having | Clause::OrderBy | Clause::On
        );
        if column_position {
            // Skip function names and anything FROM scope already claimed.
            let is_function = tokens.get(i + 1) == Some(&Token::Punct('('));
            let is_table = tables.iter().any(|t| t.eq_ignore_ascii_case(word));
            let is_alias = aliases.iter().any(|(a, _)| a.eq_ignore_ascii_case(word));
            if !is_function && !is_table && !is_alias {
                for table in &tables {
                    push_pair(table.clone(), word.clone());
                }
            }
        }
        i += 1;
    }

    pairs
}

/// Recognizes a clause-introducing keyword at position `i`.
fn clause_for(lower: &str, tokens: &[Token], i: usize) -> Option<Clause> {
    let followed_by_by = matches!(tokens.get(i + 1), Some(Token::Ident(w)) if w.eq_ignore_ascii_case("by"));
    match lower {
        "select" => Some(Clause::Select),
        "from" => Some(Clause::From),
        "where" => Some(Clause::Where),
        "group" if followed_by_by => Some(Clause::GroupBy),
        "order" if followed_by_by => Some(Clause::OrderBy),
        "having" => Some(Clause::Having),
        "on" => Some(Clause::On),
        "limit" | "offset" => Some(Clause::Limit),
        "join" => Some(Clause::From),
        _ => None,
    }
}

fn clause_len(lower: &str) -> usize {
    match lower {
        "group" | "order" => 2,
        _ => 1,
    }
}

/// True when the query has an ORDER BY at nesting depth zero, i.e. the
/// result order is semantically significant.
pub fn has_top_level_order_by(sql: &str) -> bool {
    let tokens = tokenize(sql);
    let mut depth = 0usize;
    for (i, token) in tokens.iter().enumerate() {
        match token {
            Token::Punct('(') => depth += 1,
            Token::Punct(')') => depth = depth.saturating_sub(1),
            Token::Ident(w) if depth == 0 && w.eq_ignore_ascii_case("order") => {
                if matches!(tokens.get(i + 1), Some(Token::Ident(n)) if n.eq_ignore_ascii_case("by"))
                {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

/// Extracts bare SQL from a model completion.
///
/// Strips markdown fences and any prose before the first SELECT or WITH,
/// then cuts the statement at its first top-level semicolon or at a blank
/// line after the statement started. Returns `None` when no statement
/// keyword is present.
pub fn clean_completion_sql(completion: &str) -> Option<String> {
    let mut text = completion.trim();

    // Prefer fenced content when a fence exists.
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let after = after.strip_prefix("sql").or(after.strip_prefix("SQL")).unwrap_or(after);
        let inner = match after.find("```") {
            Some(end) => &after[..end],
            None => after,
        };
        text = inner.trim();
    }

    // Find the first statement keyword at a word boundary.
    let lower = text.to_lowercase();
    let mut start = None;
    for keyword in ["select", "with"] {
        let mut offset = 0;
        while let Some(pos) = lower[offset..].find(keyword) {
            let abs = offset + pos;
            let before_ok = abs == 0
                || !lower[..abs]
                    .chars()
                    .next_back()
                    .map(|c| c.is_alphanumeric() || c == '_')
                    .unwrap_or(false);
            let after = lower[abs + keyword.len()..].chars().next();
            let after_ok = after.map(|c| !(c.is_alphanumeric() || c == '_')).unwrap_or(true);
            if before_ok && after_ok {
                start = Some(match start {
                    Some(existing) if existing <= abs => existing,
                    _ => abs,
                });
                break;
            }
            offset = abs + keyword.len();
        }
    }
    let start = start?;
    let statement = &text[start..];

    // Cut at the first semicolon outside quotes, or at a blank line.
    let mut end = statement.len();
    let mut in_single = false;
    let mut in_double = false;
    let bytes = statement.as_bytes();
    for (idx, &b) in bytes.iter().enumerate() {
        match b {
            b'\'' if !in_double => in_single = !in_single,
            b'"' if !in_single => in_double = !in_double,
            b';' if !in_single && !in_double => {
                end = idx;
                break;
            }
            b'\n' if !in_single && !in_double => {
                let rest = &statement[idx..];
                if rest.starts_with("\n\n") || rest.starts_with("\n\r\n") {
                    end = idx;
                    break;
                }
            }
            _ => {}
        }
    }
    let sql = statement[..end].trim();
    if sql.is_empty() {
        None
    } else {
        Some(sql.to_string())
    }
}

/// Collects every identifier-like token, for checks that extraction never
/// invents names.
#[cfg(test)]
fn identifier_tokens(sql: &str) -> HashSet<String> {
    tokenize(sql)
        .into_iter()
        .filter_map(|t| match t {
            Token::Ident(w) => Some(w.to_lowercase()),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(sql: &str) -> Vec<(String, String)> {
        referenced_identifiers(sql)
    }

    fn pair(t: &str, c: &str) -> (String, String) {
        (t.to_string(), c.to_string())
    }

    #[test]
    fn simple_select_attaches_column_to_table() {
        assert_eq!(pairs("SELECT name FROM singer"), vec![pair("singer", "name")]);
    }

    #[test]
    fn aliases_resolve_and_order_is_first_appearance() {
        assert_eq!(
            pairs("SELECT T1.a FROM t AS T1 JOIN u ON T1.id = u.id"),
            vec![pair("t", "a"), pair("t", "id"), pair("u", "id")]
        );
    }

    #[test]
    fn alias_without_as_keyword() {
        assert_eq!(
            pairs("SELECT x.a FROM things x WHERE x.b = 1"),
            vec![pair("things", "a"), pair("things", "b")]
        );
    }

    #[test]
    fn unqualified_columns_attach_to_every_table_in_scope() {
        let got = pairs("SELECT name FROM singer JOIN concert ON 1=1 WHERE age > 5");
        assert!(got.contains(&pair("singer", "name")));
        assert!(got.contains(&pair("concert", "name")));
        assert!(got.contains(&pair("singer", "age")));
        assert!(got.contains(&pair("concert", "age")));
    }

    #[test]
    fn functions_and_literals_are_not_columns() {
        let got = pairs("SELECT COUNT(*) FROM t WHERE name = 'French' AND n > 3");
        assert_eq!(got, vec![pair("t", "name"), pair("t", "n")]);
    }

    #[test]
    fn garbage_yields_nothing() {
        assert_eq!(pairs("garbage tokens ((("), vec![]);
        assert_eq!(pairs(""), vec![]);
    }

    #[test]
    fn star_invents_no_columns() {
        assert_eq!(pairs("SELECT * FROM singer"), vec![]);
        assert_eq!(pairs("SELECT T1.* FROM t AS T1"), vec![]);
    }

    #[test]
    fn extraction_never_invents_names() {
        let samples = [
            "SELECT T1.a FROM t AS T1 JOIN u ON T1.id = u.id",
            "SELECT name, age FROM singer WHERE country = 'France' ORDER BY age",
            "SELECT * FROM a JOIN b ON a.x = b.y WHERE ((",
        ];
        for sql in samples {
            let tokens = identifier_tokens(sql);
            for (table, column) in pairs(sql) {
                assert!(tokens.contains(&table.to_lowercase()), "invented table {table}");
                assert!(tokens.contains(&column.to_lowercase()), "invented column {column}");
            }
        }
    }

    #[test]
    fn group_and_order_columns_are_collected() {
        let got = pairs("SELECT city FROM stadium GROUP BY city ORDER BY capacity DESC");
        assert!(got.contains(&pair("stadium", "city")));
        assert!(got.contains(&pair("stadium", "capacity")));
    }

    #[test]
    fn top_level_order_by_detection() {
        assert!(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
        assert!(!has_top_level_order_by("SELECT a FROM t"));
        assert!(!has_top_level_order_by(
            "SELECT a FROM t WHERE x IN (SELECT y FROM u ORDER BY y LIMIT 1)"
        ));
        assert!(has_top_level_order_by(
            "SELECT a FROM (SELECT a FROM t) ORDER BY a"
        ));
    }

    #[test]
    fn clean_strips_fences() {
        assert_eq!(
            clean_completion_sql("```sql\nSELECT 1\n```").as_deref(),
            Some("SELECT 1")
        );
        assert_eq!(
            clean_completion_sql("```\nSELECT 2\n```").as_deref(),
            Some("SELECT 2")
        );
    }

    #[test]
    fn clean_strips_leading_prose_and_trailing_chatter() {
        assert_eq!(
            clean_completion_sql("Sure! The query is:\nSELECT a FROM t;\nHope that helps.")
                .as_deref(),
            Some("SELECT a FROM t")
        );
        assert_eq!(
            clean_completion_sql("SELECT a FROM t\n\nThis query selects a.").as_deref(),
            Some("SELECT a FROM t")
        );
    }

    #[test]
    fn clean_keeps_with_statements_and_multiline_sql() {
        assert_eq!(
            clean_completion_sql("WITH c AS (SELECT 1) SELECT * FROM c").as_deref(),
            Some("WITH c AS (SELECT 1) SELECT * FROM c")
        );
        assert_eq!(
            clean_completion_sql("SELECT a\nFROM t\nWHERE x = 1").as_deref(),
            Some("SELECT a\nFROM t\nWHERE x = 1")
        );
    }

    #[test]
    fn clean_rejects_completions_without_sql() {
        assert_eq!(clean_completion_sql("I cannot answer that."), None);
        assert_eq!(clean_completion_sql(""), None);
        // "selection" must not count as SELECT.
        assert_eq!(clean_completion_sql("my selection is final"), None);
    }

    #[test]
    fn clean_keeps_semicolons_inside_strings() {
        assert_eq!(
            clean_completion_sql("SELECT ';' FROM t; extra").as_deref(),
            Some("SELECT ';' FROM t")
        );
    }
}
