//! The dynamic revision chain: generate an initial SQL query, execute it,
//! and keep revising with fine-grained feedback until two consecutive
//! executions return the same result or the iteration cap is reached.
//!
//! Nodes are the generated SQL queries; the prompt that produced each node
//! is retained as a digest into the trace store. All SQL-level failures are
//! data for the next iteration — only gateway failures abort a chain.

use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::content::{collect_related_content, ContentConfig};
use crate::executor::{execute, results_equal, EqualityPolicy, ExecutionResult};
use crate::gateway::{Gateway, GatewayError, GenerationParams, TemplateId};
use crate::prompts;
use crate::question::Question;
use crate::schema::DatabaseSchema;
use crate::sql_analysis::{clean_completion_sql, referenced_identifiers};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("completion contains no SQL statement ({template})")]
    NoSqlFound { template: &'static str },
}

/// The three feedback components assembled from one node. Empty strings
/// mean "absent" (component disabled, or nothing to report).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeedbackBundle {
    /// Engine error text from executing the previous SQL.
    pub f_error: String,
    /// Explanation exchange: the instruction plus the model's answer.
    pub f_nl: String,
    /// Related database contents, rendered.
    pub f_db: String,
}

impl FeedbackBundle {
    pub fn is_empty(&self) -> bool {
        self.f_error.is_empty() && self.f_nl.is_empty() && self.f_db.is_empty()
    }
}

/// One iteration of the chain.
#[derive(Debug, Clone)]
pub struct ChainNode {
    pub index: usize,
    pub sql: String,
    pub result: ExecutionResult,
    /// Feedback that produced this node's SQL; empty for node 0.
    pub feedback: FeedbackBundle,
    /// Digest of the prompt that generated this node's SQL.
    pub prompt_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ResultFixpoint,
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ResultFixpoint => "result_fixpoint",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Maximum number of revision iterations after the initial query.
    pub n_max: usize,
    pub equality_policy: EqualityPolicy,
    /// Feedback component switches, for ablations.
    pub include_error: bool,
    pub include_nl: bool,
    pub include_db: bool,
    /// Re-include the demonstration block in revision prompts.
    pub demos_in_revision: bool,
    pub content: ContentConfig,
    pub exec_timeout: Duration,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_max: 3,
            equality_policy: EqualityPolicy::default(),
            include_error: true,
            include_nl: true,
            include_db: true,
            demos_in_revision: true,
            content: ContentConfig::default(),
            exec_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub nodes: Vec<ChainNode>,
    pub final_sql: String,
    pub terminated_by: Termination,
    /// Whether the final node executed without error.
    pub executable: bool,
}

/// SQL text extracted from a completion, plus the digest of the prompt that
/// produced it.
#[derive(Debug, Clone)]
pub struct GeneratedSql {
    pub sql: String,
    pub prompt_digest: String,
}

/// Generates the initial SQL from the retrieval-augmented prompt
/// (schema block, demonstrations, question — in that order).
pub fn generate_initial_sql(
    question: &Question,
    demonstration: &str,
    schema_prompt: &str,
    gateway: &Gateway,
    params: &GenerationParams,
) -> Result<GeneratedSql, ChainError> {
    let prompt = prompts::initial_sql_prompt(schema_prompt, demonstration, question.text());
    let request = params.request(TemplateId::InitialSql, prompt);
    let digest = request.digest();
    let completion = gateway.complete(&request)?;
    let sql = clean_completion_sql(&completion.text).ok_or(ChainError::NoSqlFound {
        template: TemplateId::InitialSql.as_str(),
    })?;
    Ok(GeneratedSql {
        sql,
        prompt_digest: digest,
    })
}

/// Assembles the feedback bundle for the next revision from the previous
/// node's SQL and execution result.
///
/// The explanation is a separate model call; if it fails the component is
/// left empty and the chain continues.
pub fn build_feedback(
    previous_sql: &str,
    previous_result: &ExecutionResult,
    question: &Question,
    schema: &DatabaseSchema,
    gateway: &Gateway,
    params: &GenerationParams,
    config: &ChainConfig,
) -> FeedbackBundle {
    let f_error = if config.include_error {
        previous_result.error_message().unwrap_or("").to_string()
    } else {
        String::new()
    };

    let f_nl = if config.include_nl {
        let request = params.request(
            TemplateId::ExplainSql,
            prompts::explain_prompt(question.text(), previous_sql),
        );
        match gateway.complete(&request) {
            Ok(completion) => {
                let answer = completion.text.trim();
                if answer.is_empty() {
                    String::new()
                } else {
                    format!("{}\n{}", prompts::EXPLAIN_INSTRUCTION, answer)
                }
            }
            Err(e) => {
                log::warn!("explanation call failed, continuing without it: {e}");
                String::new()
            }
        }
    } else {
        String::new()
    };

    let f_db = if config.include_db {
        let referenced = referenced_identifiers(previous_sql);
        collect_related_content(schema, &referenced, question.text(), &config.content).render()
    } else {
        String::new()
    };

    FeedbackBundle {
        f_error,
        f_nl,
        f_db,
    }
}

/// One revision call: previous SQL plus feedback in, corrected SQL out.
///
/// A completion with no recognizable SQL keeps the previous SQL for this
/// node rather than failing the chain.
pub fn revise_once(
    previous_sql: &str,
    feedback: &FeedbackBundle,
    question: &Question,
    demonstration: Option<&str>,
    schema_prompt: &str,
    gateway: &Gateway,
    params: &GenerationParams,
) -> Result<GeneratedSql, ChainError> {
    let prompt = prompts::revise_sql_prompt(
        schema_prompt,
        demonstration,
        question.text(),
        previous_sql,
        &feedback.f_error,
        &feedback.f_nl,
        &feedback.f_db,
    );
    let request = params.request(TemplateId::ReviseSql, prompt);
    let digest = request.digest();
    let completion = gateway.complete(&request)?;
    let sql = match clean_completion_sql(&completion.text) {
        Some(sql) => sql,
        None => {
            log::warn!("revision completion had no SQL; keeping previous query");
            previous_sql.to_string()
        }
    };
    Ok(GeneratedSql {
        sql,
        prompt_digest: digest,
    })
}

/// Runs the full chain for one question.
///
/// Node 0 is the initial generation; each following node revises the last
/// one. The chain stops when two consecutive results compare equal under
/// the configured policy (errors never do) or after `n_max` revisions.
pub fn run_chain(
    question: &Question,
    demonstration: &str,
    schema: &DatabaseSchema,
    db_path: &Path,
    gateway: &Gateway,
    params: &GenerationParams,
    config: &ChainConfig,
) -> Result<ChainOutcome, ChainError> {
    let schema_prompt = crate::schema::render_schema_prompt(schema);
    let n_max = config.n_max.max(1);

    let initial = generate_initial_sql(question, demonstration, &schema_prompt, gateway, params)?;
    let result = execute(&initial.sql, db_path, config.exec_timeout);
    let mut nodes = vec![ChainNode {
        index: 0,
        sql: initial.sql,
        result,
        feedback: FeedbackBundle::default(),
        prompt_digest: initial.prompt_digest,
    }];

    let mut terminated_by = Termination::MaxIterations;
    for index in 1..=n_max {
        let previous = nodes.last().expect("chain has node 0");
        let feedback = build_feedback(
            &previous.sql,
            &previous.result,
            question,
            schema,
            gateway,
            params,
            config,
        );
        let revised = revise_once(
            &previous.sql,
            &feedback,
            question,
            config.demos_in_revision.then_some(demonstration),
            &schema_prompt,
            gateway,
            params,
        )?;
        let result = execute(&revised.sql, db_path, config.exec_timeout);
        let reached_fixpoint = results_equal(&previous.result, &result, &config.equality_policy);
        nodes.push(ChainNode {
            index,
            sql: revised.sql,
            result,
            feedback,
            prompt_digest: revised.prompt_digest,
        });
        if reached_fixpoint {
            terminated_by = Termination::ResultFixpoint;
            break;
        }
    }

    let last = nodes.last().expect("chain is non-empty");
    Ok(ChainOutcome {
        final_sql: last.sql.clone(),
        executable: last.result.is_ok(),
        terminated_by,
        nodes,
    })
}
