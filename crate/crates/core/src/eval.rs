//! Execution-accuracy evaluation over Spider-format benchmarks.
//!
//! A prediction scores correct when both it and the gold query execute and
//! their results compare equal — as multisets normally, as sequences when
//! the gold query has a top-level ORDER BY. Gold queries that fail to
//! execute mark the example invalid and leave the denominator.
//!
//! Report serialization carries no timings, so a replayed run writes
//! byte-identical bytes every time.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    generate_initial_sql, run_chain, ChainConfig, ChainError, ChainNode, Termination,
};
use crate::embed::Embedder;
use crate::executor::{execute, results_equal, EqualityPolicy, ExecutionResult};
use crate::gateway::{Gateway, GenerationParams};
use crate::question::simplify_question;
use crate::repository::{
    assemble_demonstration, retrieve, Repository, RetrievalConfig, RetrievalResult,
};
use crate::schema::{render_schema_prompt, DatabaseSchema};
use crate::skeleton::{extract_skeleton, SkeletonOptions, SkeletonOrigin};
use crate::spider::{database_path, BenchmarkExample};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no schema loaded for database {0}")]
    MissingSchema(String),
    #[error("report I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Repository(#[from] crate::repository::RepositoryError),
}

/// Per-difficulty aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBucket {
    pub total: usize,
    pub correct: usize,
    pub ex: f64,
}

/// One node of a revision chain, timing-free for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub index: usize,
    pub sql: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub prompt_digest: String,
}

impl NodeReport {
    fn from_node(node: &ChainNode) -> Self {
        NodeReport {
            index: node.index,
            sql: node.sql.clone(),
            status: if node.result.is_ok() { "ok" } else { "error" }.to_string(),
            error: node.result.error_message().map(str::to_string),
            rows: node.result.table().map(|t| t.rows.len()),
            prompt_digest: node.prompt_digest.clone(),
        }
    }
}

/// One retrieved demonstration, for ablation-visible reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub item_index: usize,
    pub question: String,
    pub query_origin: String,
    pub score: f64,
}

impl DemoReport {
    fn from_result(result: &RetrievalResult) -> Self {
        DemoReport {
            item_index: result.item_index,
            question: result.item.original_question.clone(),
            query_origin: match result.query_origin {
                SkeletonOrigin::Original => "original".to_string(),
                SkeletonOrigin::Simplified => "simplified".to_string(),
            },
            score: result.score,
        }
    }
}

/// Full record for one benchmark example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub index: usize,
    pub db_id: String,
    pub question: String,
    pub predicted_sql: String,
    pub gold_sql: String,
    /// "correct", "incorrect", "invalid_gold", or "error: <reason>".
    pub verdict: String,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demonstrations: Vec<DemoReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Examples with executable gold SQL.
    pub total: usize,
    pub correct: usize,
    /// correct / total (0 when total is 0).
    pub ex: f64,
    /// Examples excluded because the gold SQL failed to execute.
    pub invalid: usize,
    pub per_difficulty: BTreeMap<String, DifficultyBucket>,
    pub per_example: Vec<ExampleReport>,
}

fn ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

fn aggregate(mut per_example: Vec<ExampleReport>) -> EvalReport {
    per_example.sort_by_key(|e| e.index);
    let mut total = 0;
    let mut correct = 0;
    let mut invalid = 0;
    let mut buckets: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for example in &per_example {
        if example.verdict == "invalid_gold" {
            invalid += 1;
            continue;
        }
        total += 1;
        if example.correct {
            correct += 1;
        }
        if let Some(difficulty) = &example.difficulty {
            let bucket = buckets.entry(difficulty.clone()).or_insert((0, 0));
            bucket.0 += 1;
            if example.correct {
                bucket.1 += 1;
            }
        }
    }

    EvalReport {
        total,
        correct,
        ex: ratio(correct, total),
        invalid,
        per_difficulty: buckets
            .into_iter()
            .map(|(name, (t, c))| {
                (
                    name,
                    DifficultyBucket {
                        total: t,
                        correct: c,
                        ex: ratio(c, t),
                    },
                )
            })
            .collect(),
        per_example,
    }
}

/// Scores one prediction against its gold query.
fn score_prediction(
    predicted_sql: &str,
    example: &BenchmarkExample,
    db_dir: &Path,
    base_policy: EqualityPolicy,
    timeout: Duration,
) -> (String, bool) {
    let db = database_path(db_dir, &example.db_id);
    let gold = execute(&example.gold_sql, &db, timeout);
    if !gold.is_ok() {
        return ("invalid_gold".to_string(), false);
    }
    let policy = EqualityPolicy {
        order_sensitive: crate::sql_analysis::has_top_level_order_by(&example.gold_sql),
        ..base_policy
    };
    let predicted: ExecutionResult = execute(predicted_sql, &db, timeout);
    if results_equal(&predicted, &gold, &policy) {
        ("correct".to_string(), true)
    } else {
        ("incorrect".to_string(), false)
    }
}

/// Execution accuracy over bare (prediction, example) pairs.
pub fn execution_accuracy(
    predictions: &[(String, &BenchmarkExample)],
    db_dir: &Path,
    base_policy: EqualityPolicy,
    timeout: Duration,
) -> EvalReport {
    let per_example = predictions
        .iter()
        .enumerate()
        .map(|(index, (predicted_sql, example))| {
            let (verdict, correct) =
                score_prediction(predicted_sql, example, db_dir, base_policy, timeout);
            ExampleReport {
                index,
                db_id: example.db_id.clone(),
                question: example.question.text().to_string(),
                predicted_sql: predicted_sql.clone(),
                gold_sql: example.gold_sql.clone(),
                verdict,
                correct,
                difficulty: example.difficulty.map(|d| d.as_str().to_string()),
                termination: None,
                demonstrations: Vec::new(),
                nodes: Vec::new(),
            }
        })
        .collect();
    aggregate(per_example)
}

/// End-to-end pipeline settings for a benchmark run.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub retrieval: RetrievalConfig,
    pub chain: ChainConfig,
    pub params: GenerationParams,
    pub skeleton: SkeletonOptions,
    /// Simplify the question and retrieve with both skeletons. Off mirrors
    /// the "direct skeleton retrieval" ablation: k2 moves to the original
    /// side and no simplification call is made.
    pub simplify: bool,
    /// Run the revision chain. Off stops after the initial generation.
    pub revise: bool,
    /// Restrict retrieval to items from the question's own database.
    pub same_db_only: bool,
    /// Worker threads for independent examples.
    pub jobs: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            retrieval: RetrievalConfig::default(),
            chain: ChainConfig::default(),
            params: GenerationParams::default(),
            skeleton: SkeletonOptions::default(),
            simplify: true,
            revise: true,
            same_db_only: false,
            jobs: 1,
        }
    }
}

/// Everything `translate_question` produced for one example.
pub struct PipelineOutput {
    pub final_sql: String,
    pub termination: String,
    pub demonstrations: Vec<DemoReport>,
    pub nodes: Vec<NodeReport>,
}

/// Runs the full pipeline (simplify, skeletons, retrieve, chain) for one
/// question.
pub fn translate_question(
    example: &BenchmarkExample,
    repository: &Repository,
    schemas: &HashMap<String, DatabaseSchema>,
    db_dir: &Path,
    gateway: &Gateway,
    encoder: &dyn Embedder,
    options: &PipelineOptions,
) -> Result<PipelineOutput, String> {
    let schema = schemas
        .get(&example.db_id)
        .ok_or_else(|| format!("no schema loaded for database {}", example.db_id))?;
    let question = &example.question;

    let simplified_text = if options.simplify {
        match simplify_question(question, gateway, &options.params) {
            Ok(simplified) => simplified.text,
            Err(e) => return Err(format!("simplification failed: {e}")),
        }
    } else {
        question.text().to_string()
    };

    let s_o = extract_skeleton(
        question.text(),
        schema,
        SkeletonOrigin::Original,
        options.skeleton,
    );
    let s_r = extract_skeleton(
        &simplified_text,
        schema,
        SkeletonOrigin::Simplified,
        options.skeleton,
    );

    let mut retrieval = options.retrieval.clone();
    if !options.simplify {
        retrieval.k1 += retrieval.k2;
        retrieval.k2 = 0;
    }
    if options.same_db_only {
        retrieval.restrict_to_db = Some(example.db_id.clone());
    }
    let results = retrieve(repository, &s_o, &s_r, &retrieval, encoder)
        .map_err(|e| format!("retrieval failed: {e}"))?;
    let demonstrations: Vec<DemoReport> = results.iter().map(DemoReport::from_result).collect();
    let demo_text = if results.is_empty() {
        String::new()
    } else {
        assemble_demonstration(&results).map_err(|e| format!("assembly failed: {e}"))?
    };

    let db = database_path(db_dir, &example.db_id);
    if options.revise {
        let outcome = run_chain(
            question,
            &demo_text,
            schema,
            &db,
            gateway,
            &options.params,
            &options.chain,
        )
        .map_err(|e| chain_failure(e))?;
        Ok(PipelineOutput {
            final_sql: outcome.final_sql,
            termination: outcome.terminated_by.as_str().to_string(),
            demonstrations,
            nodes: outcome.nodes.iter().map(NodeReport::from_node).collect(),
        })
    } else {
        let schema_prompt = render_schema_prompt(schema);
        let initial =
            generate_initial_sql(question, &demo_text, &schema_prompt, gateway, &options.params)
                .map_err(|e| chain_failure(e))?;
        let result = execute(&initial.sql, &db, options.chain.exec_timeout);
        let node = ChainNode {
            index: 0,
            sql: initial.sql.clone(),
            result,
            feedback: Default::default(),
            prompt_digest: initial.prompt_digest,
        };
        Ok(PipelineOutput {
            final_sql: initial.sql,
            termination: "revision_disabled".to_string(),
            demonstrations,
            nodes: vec![NodeReport::from_node(&node)],
        })
    }
}

fn chain_failure(e: ChainError) -> String {
    match &e {
        ChainError::Gateway(crate::gateway::GatewayError::ReplayMiss { .. }) => {
            format!("ReplayMiss: {e}")
        }
        _ => e.to_string(),
    }
}

/// Runs the pipeline over a whole benchmark and scores it.
///
/// Per-example gateway failures score as incorrect with the reason in the
/// verdict; only configuration-level problems abort the run. Examples are
/// independent and may run on `options.jobs` threads; the report is
/// assembled by example index either way.
pub fn run_benchmark(
    dataset: &[BenchmarkExample],
    repository: &Repository,
    schemas: &HashMap<String, DatabaseSchema>,
    db_dir: &Path,
    gateway: &Gateway,
    encoder: &dyn Embedder,
    options: &PipelineOptions,
) -> Result<EvalReport, EvalError> {
    for example in dataset {
        if !schemas.contains_key(&example.db_id) {
            return Err(EvalError::MissingSchema(example.db_id.clone()));
        }
    }

    let jobs = options.jobs.max(1).min(dataset.len().max(1));
    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ExampleReport>>> = Mutex::new(vec![None; dataset.len()]);

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::SeqCst);
                if index >= dataset.len() {
                    break;
                }
                let example = &dataset[index];
                let report = match translate_question(
                    example, repository, schemas, db_dir, gateway, encoder, options,
                ) {
                    Ok(output) => {
                        let (verdict, correct) = score_prediction(
                            &output.final_sql,
                            example,
                            db_dir,
                            options.chain.equality_policy,
                            options.chain.exec_timeout,
                        );
                        ExampleReport {
                            index,
                            db_id: example.db_id.clone(),
                            question: example.question.text().to_string(),
                            predicted_sql: output.final_sql,
                            gold_sql: example.gold_sql.clone(),
                            verdict,
                            correct,
                            difficulty: example.difficulty.map(|d| d.as_str().to_string()),
                            termination: Some(output.termination),
                            demonstrations: output.demonstrations,
                            nodes: output.nodes,
                        }
                    }
                    Err(reason) => ExampleReport {
                        index,
                        db_id: example.db_id.clone(),
                        question: example.question.text().to_string(),
                        predicted_sql: String::new(),
                        gold_sql: example.gold_sql.clone(),
                        verdict: format!("error: {reason}"),
                        correct: false,
                        difficulty: example.difficulty.map(|d| d.as_str().to_string()),
                        termination: None,
                        demonstrations: Vec::new(),
                        nodes: Vec::new(),
                    },
                };
                slots.lock().expect("report slots poisoned")[index] = Some(report);
            });
        }
    });

    let per_example: Vec<ExampleReport> = slots
        .into_inner()
        .expect("report slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every example produced a report"))
        .collect();
    Ok(aggregate(per_example))
}

/// Writes the report JSON atomically (temp file + rename), so a failed run
/// never leaves a partial report behind.
pub fn write_report(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    let tmp = path.with_extension("json.tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(json.as_bytes())?;
        file.write_all(b"\n")?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Plain-text summary: overall EX and one line per difficulty level.
pub fn summary_text(report: &EvalReport) -> String {
    let mut lines = vec![format!(
        "overall EX: {:.1}% ({}/{}){}",
        report.ex * 100.0,
        report.correct,
        report.total,
        if report.invalid > 0 {
            format!(", {} invalid gold excluded", report.invalid)
        } else {
            String::new()
        }
    )];
    for level in ["easy", "medium", "hard", "extra"] {
        if let Some(bucket) = report.per_difficulty.get(level) {
            lines.push(format!(
                "{level:>8}: EX {:.1}% ({}/{})",
                bucket.ex * 100.0,
                bucket.correct,
                bucket.total
            ));
        }
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spider::Difficulty;
    use sqlrev_sqlite::Connection;
    use std::path::PathBuf;

    const T: Duration = Duration::from_secs(5);

    fn fixture_db_dir() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let db_dir = dir.path().join("database");
        std::fs::create_dir_all(db_dir.join("shop")).unwrap();
        Connection::open_or_create(&database_path(&db_dir, "shop"))
            .unwrap()
            .execute_batch(
                "CREATE TABLE item(id INTEGER PRIMARY KEY, price INT);
                 INSERT INTO item VALUES (1, 10);
                 INSERT INTO item VALUES (2, 20);
                 INSERT INTO item VALUES (3, 30);",
            )
            .unwrap();
        (dir, db_dir)
    }

    fn example(question: &str, gold: &str, difficulty: Option<Difficulty>) -> BenchmarkExample {
        BenchmarkExample {
            question: crate::question::Question::new(question, "shop").unwrap(),
            gold_sql: gold.to_string(),
            db_id: "shop".to_string(),
            difficulty,
        }
    }

    #[test]
    fn self_scoring_is_perfect() {
        let (_dir, db_dir) = fixture_db_dir();
        let e1 = example("count items", "SELECT COUNT(*) FROM item", Some(Difficulty::Easy));
        let e2 = example("all prices", "SELECT price FROM item", Some(Difficulty::Medium));
        let preds = vec![(e1.gold_sql.clone(), &e1), (e2.gold_sql.clone(), &e2)];
        let report = execution_accuracy(&preds, &db_dir, EqualityPolicy::default(), T);
        assert_eq!(report.ex, 1.0);
        assert_eq!(report.total, 2);
        assert_eq!(report.per_difficulty.len(), 2);
        assert_eq!(report.per_difficulty["easy"].ex, 1.0);
    }

    #[test]
    fn half_correct_scores_half() {
        let (_dir, db_dir) = fixture_db_dir();
        let e1 = example("count", "SELECT COUNT(*) FROM item", None);
        let e2 = example("prices", "SELECT price FROM item", None);
        let preds = vec![
            (e1.gold_sql.clone(), &e1),
            ("SELECT id FROM item".to_string(), &e2),
        ];
        let report = execution_accuracy(&preds, &db_dir, EqualityPolicy::default(), T);
        assert_eq!(report.ex, 0.5);
        assert_eq!(report.per_example[1].verdict, "incorrect");
    }

    #[test]
    fn order_by_gold_makes_order_significant() {
        let (_dir, db_dir) = fixture_db_dir();
        // Descending prediction vs ascending gold: same multiset.
        let ordered = example("ordered", "SELECT price FROM item ORDER BY price", None);
        let unordered = example("plain", "SELECT price FROM item", None);
        let desc = "SELECT price FROM item ORDER BY price DESC".to_string();
        let report = execution_accuracy(
            &[(desc.clone(), &ordered), (desc, &unordered)],
            &db_dir,
            EqualityPolicy::default(),
            T,
        );
        assert!(!report.per_example[0].correct, "order-sensitive must fail");
        assert!(report.per_example[1].correct, "multiset mode must pass");
    }

    #[test]
    fn invalid_gold_is_excluded_from_denominator() {
        let (_dir, db_dir) = fixture_db_dir();
        let good = example("count", "SELECT COUNT(*) FROM item", None);
        let broken = example("broken", "SELECT * FROM missing_table", None);
        let report = execution_accuracy(
            &[
                (good.gold_sql.clone(), &good),
                ("SELECT 1".to_string(), &broken),
            ],
            &db_dir,
            EqualityPolicy::default(),
            T,
        );
        assert_eq!(report.total, 1);
        assert_eq!(report.invalid, 1);
        assert_eq!(report.ex, 1.0);
        assert_eq!(report.per_example[1].verdict, "invalid_gold");
    }

    #[test]
    fn ex_is_permutation_invariant() {
        let (_dir, db_dir) = fixture_db_dir();
        let e1 = example("count", "SELECT COUNT(*) FROM item", None);
        let e2 = example("prices", "SELECT price FROM item", None);
        let e3 = example("ids", "SELECT id FROM item", None);
        let forward = vec![
            (e1.gold_sql.clone(), &e1),
            ("SELECT 99".to_string(), &e2),
            (e3.gold_sql.clone(), &e3),
        ];
        let backward: Vec<_> = forward.iter().cloned().rev().collect();
        let a = execution_accuracy(&forward, &db_dir, EqualityPolicy::default(), T);
        let b = execution_accuracy(&backward, &db_dir, EqualityPolicy::default(), T);
        assert_eq!(a.ex, b.ex);
        assert_eq!(a.correct, b.correct);
    }

    #[test]
    fn summary_prints_one_decimal() {
        let (_dir, db_dir) = fixture_db_dir();
        let e1 = example("count", "SELECT COUNT(*) FROM item", Some(Difficulty::Easy));
        let e2 = example("prices", "SELECT price FROM item", Some(Difficulty::Hard));
        let e3 = example("ids", "SELECT id FROM item", Some(Difficulty::Hard));
        let preds = vec![
            (e1.gold_sql.clone(), &e1),
            (e2.gold_sql.clone(), &e2),
            ("SELECT 0".to_string(), &e3),
        ];
        let report = execution_accuracy(&preds, &db_dir, EqualityPolicy::default(), T);
        let summary = summary_text(&report);
        assert!(summary.contains("overall EX: 66.7% (2/3)"), "{summary}");
        assert!(summary.contains("hard: EX 50.0% (1/2)"), "{summary}");
    }

    #[test]
    fn report_write_is_atomic_and_deterministic() {
        let (_dir, db_dir) = fixture_db_dir();
        let e1 = example("count", "SELECT COUNT(*) FROM item", None);
        let preds = vec![(e1.gold_sql.clone(), &e1)];
        let report = execution_accuracy(&preds, &db_dir, EqualityPolicy::default(), T);
        let out_dir = tempfile::tempdir().unwrap();
        let p1 = out_dir.path().join("r1.json");
        let p2 = out_dir.path().join("r2.json");
        write_report(&report, &p1).unwrap();
        write_report(&report, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let parsed: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(&p1).unwrap()).unwrap();
        assert_eq!(parsed, report);
    }
}
