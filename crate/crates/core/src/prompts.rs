//! Prompt templates. Every prompt the pipeline sends is rendered here, in
//! one place, so tests can pin exact text and section order.

/// Instruction for question simplification; the question is appended.
pub const SIMPLIFY_INSTRUCTION: &str = "Replace the words as far as possible to simplify the \
                                        question, making it syntactically clear, common and easy \
                                        to understand: ";

/// Instruction asking the model to explain its previous SQL against the
/// question.
pub const EXPLAIN_INSTRUCTION: &str = "What does this SQL query mean? What are the differences \
                                       between the predicted meaning and the question meanings \
                                       above?";

pub fn simplify_prompt(question: &str) -> String {
    format!("{SIMPLIFY_INSTRUCTION}{question}")
}

/// Context (question + SQL) followed by the explanation instruction.
pub fn explain_prompt(question: &str, sql: &str) -> String {
    format!("Question: {question}\nSQL: {sql}\n{EXPLAIN_INSTRUCTION}")
}

/// Initial generation prompt: schema block, demonstrations, then the
/// question, ending with an open `SQL:` line for the model to complete.
pub fn initial_sql_prompt(schema_prompt: &str, demonstration: &str, question: &str) -> String {
    format!("{schema_prompt}\n\n{demonstration}\n\nQuestion: {question}\nSQL:")
}

/// Revision prompt. Fixed section order: schema, demonstrations, question,
/// previous SQL, execution error, explanation, related database contents,
/// then the instruction to output corrected SQL only. Empty feedback
/// components are omitted entirely.
pub fn revise_sql_prompt(
    schema_prompt: &str,
    demonstration: Option<&str>,
    question: &str,
    previous_sql: &str,
    f_error: &str,
    f_nl: &str,
    f_db: &str,
) -> String {
    let mut sections: Vec<String> = Vec::new();
    sections.push(schema_prompt.to_string());
    if let Some(demo) = demonstration {
        if !demo.is_empty() {
            sections.push(demo.to_string());
        }
    }
    sections.push(format!("Question: {question}"));
    sections.push(format!("Previous SQL: {previous_sql}"));
    if !f_error.is_empty() {
        sections.push(format!("Execution error:\n{f_error}"));
    }
    if !f_nl.is_empty() {
        sections.push(format!("Explanation:\n{f_nl}"));
    }
    if !f_db.is_empty() {
        sections.push(format!("Related database contents:\n{f_db}"));
    }
    sections.push("Output only the corrected SQL query.\nSQL:".to_string());
    sections.join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplify_prompt_matches_template() {
        assert_eq!(
            simplify_prompt("Show all singers."),
            "Replace the words as far as possible to simplify the question, making it \
             syntactically clear, common and easy to understand: Show all singers."
        );
    }

    #[test]
    fn explain_prompt_ends_with_verbatim_instruction() {
        let p = explain_prompt("How many singers?", "SELECT 1");
        assert!(p.ends_with(EXPLAIN_INSTRUCTION));
        assert!(p.contains("How many singers?"));
        assert!(p.contains("SELECT 1"));
    }

    #[test]
    fn initial_prompt_orders_schema_demos_question() {
        let p = initial_sql_prompt("SCHEMA", "DEMOS", "QUESTION");
        let (s, d, q) = (
            p.find("SCHEMA").unwrap(),
            p.find("DEMOS").unwrap(),
            p.find("QUESTION").unwrap(),
        );
        assert!(s < d && d < q);
        assert!(p.ends_with("SQL:"));
    }

    #[test]
    fn revise_prompt_fixed_section_order() {
        let p = revise_sql_prompt(
            "SCHEMA",
            Some("DEMOS"),
            "QUESTION",
            "PREV_SQL",
            "ERR",
            "NL",
            "DB",
        );
        let positions: Vec<usize> = ["SCHEMA", "DEMOS", "QUESTION", "PREV_SQL", "ERR", "NL", "DB"]
            .iter()
            .map(|s| p.find(s).unwrap())
            .collect();
        for w in positions.windows(2) {
            assert!(w[0] < w[1], "sections out of order in:\n{p}");
        }
    }

    #[test]
    fn revise_prompt_omits_empty_components() {
        let p = revise_sql_prompt("S", None, "Q", "PREV", "", "", "");
        assert!(!p.contains("Execution error"));
        assert!(!p.contains("Explanation"));
        assert!(!p.contains("Related database contents"));
        assert!(p.contains("Previous SQL: PREV"));
    }
}
