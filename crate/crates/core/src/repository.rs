//! The retrieval repository: skeleton-keyed (question, SQL) items built over
//! a training set, searched by cosine similarity of skeleton embeddings.
//!
//! Each training pair contributes two items — one keyed by the original
//! question's skeleton and one by the simplified question's skeleton — so a
//! complete build holds twice as many items as the training set. Retrieval
//! runs two queries (original-question skeleton and simplified-question
//! skeleton), takes the top k1 and k2 respectively, and backfills any item
//! both sides selected.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::embed::{cosine_similarity, Embedder, EmbeddingVector};
use crate::gateway::{Gateway, GenerationParams};
use crate::question::{simplify_question, Question};
use crate::schema::DatabaseSchema;
use crate::skeleton::{
    extract_with_vocabulary, MaskVocabulary, QuestionSkeleton, SkeletonOptions, SkeletonOrigin,
};

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error(transparent)]
    Encoder(#[from] crate::embed::EmbedError),
    #[error("no schema loaded for database {db_id} (training pair {index})")]
    UnknownDatabase { db_id: String, index: usize },
    #[error("cannot assemble a demonstration from zero retrieval results")]
    EmptyResults,
    #[error("invalid retrieval configuration: {0}")]
    InvalidConfig(String),
    #[error("repository I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed repository file: {0}")]
    Format(String),
}

/// One retrievable (skeleton -> SQL) entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RepositoryItem {
    pub key_skeleton: QuestionSkeleton,
    pub sql: String,
    pub original_question: String,
    pub db_id: String,
    pub embedding: EmbeddingVector,
}

impl RepositoryItem {
    pub fn origin(&self) -> SkeletonOrigin {
        self.key_skeleton.origin
    }
}

/// Frozen, searchable collection of repository items.
pub struct Repository {
    encoder_id: String,
    dim: usize,
    items: Vec<RepositoryItem>,
}

/// How many demonstrations each query side contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    pub k1: usize,
    pub k2: usize,
    /// When set, only items from this database are candidates. Default is
    /// cross-database retrieval, matching the cross-domain setting.
    pub restrict_to_db: Option<String>,
}

impl RetrievalConfig {
    pub fn new(k1: usize, k2: usize) -> Result<Self, RepositoryError> {
        if k1 + k2 == 0 {
            return Err(RepositoryError::InvalidConfig(
                "k1 + k2 must be at least 1".to_string(),
            ));
        }
        Ok(RetrievalConfig {
            k1,
            k2,
            restrict_to_db: None,
        })
    }
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k1: 4,
            k2: 4,
            restrict_to_db: None,
        }
    }
}

/// One retrieved demonstration candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub item: RepositoryItem,
    pub item_index: usize,
    /// Cosine similarity between the query embedding and the item's.
    pub score: f64,
    /// Which query side selected this item.
    pub query_origin: SkeletonOrigin,
}

/// Settings for a repository build.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    pub skeleton: SkeletonOptions,
    pub params: GenerationParams,
}

impl Repository {
    pub fn new(encoder_id: impl Into<String>, dim: usize) -> Self {
        Repository {
            encoder_id: encoder_id.into(),
            dim,
            items: Vec::new(),
        }
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[RepositoryItem] {
        &self.items
    }

    /// Full descending ranking of all candidate items against one query
    /// embedding. Ties break toward the lower item index, so rankings are
    /// total and deterministic.
    pub fn rank_items(
        &self,
        query: &EmbeddingVector,
        restrict_to_db: Option<&str>,
    ) -> Result<Vec<(usize, f64)>, RepositoryError> {
        let mut scored = Vec::new();
        for (index, item) in self.items.iter().enumerate() {
            if let Some(db) = restrict_to_db {
                if !item.db_id.eq_ignore_ascii_case(db) {
                    continue;
                }
            }
            scored.push((index, cosine_similarity(query, &item.embedding)?));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored)
    }
}

/// Builds the repository over `train_pairs`.
///
/// Every pair inserts an original-skeleton item; a simplified-skeleton item
/// follows unless the simplification call fails, in which case the failure
/// is logged and that pair contributes a single entry. Encoder failures
/// abort the build.
pub fn build_repository(
    train_pairs: &[(Question, String)],
    schemas: &HashMap<String, DatabaseSchema>,
    gateway: &Gateway,
    encoder: &dyn Embedder,
    options: &BuildOptions,
) -> Result<Repository, RepositoryError> {
    let mut repo = Repository::new(encoder.id(), encoder.dim());
    let mut vocabularies: HashMap<String, MaskVocabulary> = HashMap::new();

    for (index, (question, sql)) in train_pairs.iter().enumerate() {
        let schema = schemas
            .get(question.db_id())
            .ok_or_else(|| RepositoryError::UnknownDatabase {
                db_id: question.db_id().to_string(),
                index,
            })?;
        let vocabulary = vocabularies
            .entry(question.db_id().to_string())
            .or_insert_with(|| MaskVocabulary::from_schema(schema, options.skeleton));

        let original =
            extract_with_vocabulary(question.text(), vocabulary, SkeletonOrigin::Original);
        let embedding = encoder.embed(&original.text)?;
        repo.items.push(RepositoryItem {
            key_skeleton: original,
            sql: sql.clone(),
            original_question: question.text().to_string(),
            db_id: question.db_id().to_string(),
            embedding,
        });

        match simplify_question(question, gateway, &options.params) {
            Ok(simplified) => {
                let skeleton = extract_with_vocabulary(
                    &simplified.text,
                    vocabulary,
                    SkeletonOrigin::Simplified,
                );
                let embedding = encoder.embed(&skeleton.text)?;
                repo.items.push(RepositoryItem {
                    key_skeleton: skeleton,
                    sql: sql.clone(),
                    original_question: question.text().to_string(),
                    db_id: question.db_id().to_string(),
                    embedding,
                });
            }
            Err(e) => {
                log::warn!(
                    "simplification failed for training pair {index} ({}): {e}; \
                     keeping the original-skeleton entry only",
                    question.db_id()
                );
            }
        }
    }
    Ok(repo)
}

/// Retrieves up to `k1 + k2` demonstrations for the two query skeletons.
///
/// Each side contributes its top-ranked items; an item already taken by the
/// original side is skipped on the simplified side and replaced by the next
/// candidate in that side's ranking. The combined list is ordered by
/// ascending score so the most similar demonstration sits last, closest to
/// the question in the assembled prompt.
pub fn retrieve(
    repo: &Repository,
    original: &QuestionSkeleton,
    simplified: &QuestionSkeleton,
    config: &RetrievalConfig,
    encoder: &dyn Embedder,
) -> Result<Vec<RetrievalResult>, RepositoryError> {
    if config.k1 + config.k2 == 0 {
        return Err(RepositoryError::InvalidConfig(
            "k1 + k2 must be at least 1".to_string(),
        ));
    }
    if repo.is_empty() {
        return Ok(Vec::new());
    }
    let restrict = config.restrict_to_db.as_deref();

    let mut results: Vec<RetrievalResult> = Vec::new();
    let mut taken: std::collections::HashSet<usize> = std::collections::HashSet::new();

    if config.k1 > 0 {
        let query = encoder.embed(&original.text)?;
        for (index, score) in repo.rank_items(&query, restrict)?.into_iter().take(config.k1) {
            taken.insert(index);
            results.push(RetrievalResult {
                item: repo.items[index].clone(),
                item_index: index,
                score,
                query_origin: SkeletonOrigin::Original,
            });
        }
    }
    if config.k2 > 0 {
        let query = encoder.embed(&simplified.text)?;
        let mut accepted = 0;
        for (index, score) in repo.rank_items(&query, restrict)? {
            if accepted == config.k2 {
                break;
            }
            if !taken.insert(index) {
                continue; // duplicate of an original-side pick; backfill next
            }
            accepted += 1;
            results.push(RetrievalResult {
                item: repo.items[index].clone(),
                item_index: index,
                score,
                query_origin: SkeletonOrigin::Simplified,
            });
        }
    }

    results.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.item_index.cmp(&b.item_index)));
    Ok(results)
}

/// Concatenates retrieved samples into the demonstration block: question
/// line then SQL line per sample, blank line between samples, order as
/// given.
pub fn assemble_demonstration(results: &[RetrievalResult]) -> Result<String, RepositoryError> {
    if results.is_empty() {
        return Err(RepositoryError::EmptyResults);
    }
    let blocks: Vec<String> = results
        .iter()
        .map(|r| format!("Question: {}\nSQL: {}", r.item.original_question, r.item.sql))
        .collect();
    Ok(blocks.join("\n\n"))
}

const MAGIC: &[u8; 8] = b"SQRREPO1";

impl Repository {
    /// Serializes to a single file: header (encoder id, dimension, item
    /// count), then per item the skeleton, SQL, original question, database
    /// id, and the embedding as little-endian f32s. The write goes to a
    /// temporary file renamed into place, so failures leave no partial file.
    pub fn save(&self, path: &Path) -> Result<(), RepositoryError> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        write_str(&mut buf, &self.encoder_id);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.items.len() as u64).to_le_bytes());
        for item in &self.items {
            write_str(&mut buf, &item.key_skeleton.text);
            buf.extend_from_slice(&(item.key_skeleton.mask_count as u32).to_le_bytes());
            buf.push(match item.key_skeleton.origin {
                SkeletonOrigin::Original => 0,
                SkeletonOrigin::Simplified => 1,
            });
            write_str(&mut buf, &item.sql);
            write_str(&mut buf, &item.original_question);
            write_str(&mut buf, &item.db_id);
            for v in item.embedding.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }

        let tmp = path.with_extension("tmp");
        {
            let mut file = std::fs::File::create(&tmp)?;
            file.write_all(&buf)?;
            file.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RepositoryError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;

        let magic = take(&bytes, &mut cursor, 8)?;
        if magic != MAGIC {
            return Err(RepositoryError::Format("bad magic".to_string()));
        }
        let encoder_id = read_str(&bytes, &mut cursor)?;
        let dim = read_u32(&bytes, &mut cursor)? as usize;
        if dim == 0 {
            return Err(RepositoryError::Format("zero dimension".to_string()));
        }
        let count = read_u64(&bytes, &mut cursor)? as usize;

        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            let text = read_str(&bytes, &mut cursor)?;
            let mask_count = read_u32(&bytes, &mut cursor)? as usize;
            let origin = match take(&bytes, &mut cursor, 1)?[0] {
                0 => SkeletonOrigin::Original,
                1 => SkeletonOrigin::Simplified,
                other => {
                    return Err(RepositoryError::Format(format!(
                        "unknown skeleton origin tag {other}"
                    )))
                }
            };
            let sql = read_str(&bytes, &mut cursor)?;
            let original_question = read_str(&bytes, &mut cursor)?;
            let db_id = read_str(&bytes, &mut cursor)?;
            let raw = take(&bytes, &mut cursor, dim * 4)?;
            let mut values = Vec::with_capacity(dim);
            for chunk in raw.chunks_exact(4) {
                values.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
            }
            let embedding = EmbeddingVector::new(values)
                .map_err(|e| RepositoryError::Format(e.to_string()))?;
            items.push(RepositoryItem {
                key_skeleton: QuestionSkeleton {
                    text,
                    mask_count,
                    origin,
                },
                sql,
                original_question,
                db_id,
                embedding,
            });
        }
        if cursor != bytes.len() {
            return Err(RepositoryError::Format("trailing bytes".to_string()));
        }
        Ok(Repository {
            encoder_id,
            dim,
            items,
        })
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn take<'a>(bytes: &'a [u8], cursor: &mut usize, n: usize) -> Result<&'a [u8], RepositoryError> {
    if *cursor + n > bytes.len() {
        return Err(RepositoryError::Format("unexpected end of file".to_string()));
    }
    let slice = &bytes[*cursor..*cursor + n];
    *cursor += n;
    Ok(slice)
}

fn read_u32(bytes: &[u8], cursor: &mut usize) -> Result<u32, RepositoryError> {
    let b = take(bytes, cursor, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

fn read_u64(bytes: &[u8], cursor: &mut usize) -> Result<u64, RepositoryError> {
    let b = take(bytes, cursor, 8)?;
    Ok(u64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
}

fn read_str(bytes: &[u8], cursor: &mut usize) -> Result<String, RepositoryError> {
    let len = read_u32(bytes, cursor)? as usize;
    let raw = take(bytes, cursor, len)?;
    String::from_utf8(raw.to_vec()).map_err(|e| RepositoryError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::gateway::TraceStore;
    use crate::schema::{ColumnInfo, DatabaseSchema, TableInfo};

    fn toy_schema(db_id: &str) -> DatabaseSchema {
        DatabaseSchema::new(
            db_id,
            vec![TableInfo {
                name: "singer".to_string(),
                columns: vec![ColumnInfo {
                    name: "name".to_string(),
                    declared_type: "text".to_string(),
                    sample_values: vec![],
                }],
                row_count: 0,
            }],
            vec![],
        )
        .unwrap()
    }

    fn schemas() -> HashMap<String, DatabaseSchema> {
        let mut map = HashMap::new();
        map.insert("db".to_string(), toy_schema("db"));
        map
    }

    fn pairs(texts: &[(&str, &str)]) -> Vec<(Question, String)> {
        texts
            .iter()
            .map(|(q, sql)| (Question::new(*q, "db").unwrap(), sql.to_string()))
            .collect()
    }

    fn build(pairs: &[(Question, String)]) -> Repository {
        build_repository(
            pairs,
            &schemas(),
            &Gateway::mock_echo(),
            &HashEmbedder::default(),
            &BuildOptions::default(),
        )
        .unwrap()
    }

    fn skeleton(text: &str, origin: SkeletonOrigin) -> QuestionSkeleton {
        QuestionSkeleton {
            text: text.to_string(),
            mask_count: 0,
            origin,
        }
    }

    #[test]
    fn each_pair_yields_two_items() {
        let repo = build(&pairs(&[
            ("How many singers?", "SELECT COUNT(*) FROM singer"),
            ("List singer names", "SELECT name FROM singer"),
        ]));
        assert_eq!(repo.len(), 4);
        let origins: Vec<SkeletonOrigin> = repo.items().iter().map(|i| i.origin()).collect();
        assert_eq!(
            origins,
            vec![
                SkeletonOrigin::Original,
                SkeletonOrigin::Simplified,
                SkeletonOrigin::Original,
                SkeletonOrigin::Simplified,
            ]
        );
    }

    #[test]
    fn empty_training_set_builds_empty_repository() {
        assert!(build(&[]).is_empty());
    }

    #[test]
    fn repeated_pairs_insert_repeatedly() {
        let repo = build(&pairs(&[
            ("How many singers?", "SELECT COUNT(*) FROM singer"),
            ("How many singers?", "SELECT COUNT(*) FROM singer"),
        ]));
        assert_eq!(repo.len(), 4);
    }

    #[test]
    fn embeddings_are_encoder_output_for_skeleton_text() {
        let repo = build(&pairs(&[("How many singers?", "SELECT 1")]));
        let encoder = HashEmbedder::default();
        for item in repo.items() {
            assert_eq!(item.embedding, encoder.embed(&item.key_skeleton.text).unwrap());
        }
    }

    #[test]
    fn simplification_failure_degrades_to_single_entry() {
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("empty.jsonl");
        std::fs::write(&trace, "").unwrap();
        // An empty replay store fails every simplify call.
        let gateway = Gateway::replay(TraceStore::load(&trace).unwrap());
        let repo = build_repository(
            &pairs(&[("How many singers?", "SELECT 1"), ("List names", "SELECT 2")]),
            &schemas(),
            &gateway,
            &HashEmbedder::default(),
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(repo.len(), 2);
        assert!(repo.items().iter().all(|i| i.origin() == SkeletonOrigin::Original));
    }

    #[test]
    fn unknown_database_aborts_build() {
        let err = build_repository(
            &[(Question::new("q", "missing_db").unwrap(), "SELECT 1".to_string())],
            &schemas(),
            &Gateway::mock_echo(),
            &HashEmbedder::default(),
            &BuildOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RepositoryError::UnknownDatabase { .. }));
    }

    #[test]
    fn retrieve_returns_k1_plus_k2_results() {
        let texts: Vec<(String, String)> = (0..50)
            .map(|i| (format!("question number {i} about topic {}", i % 7), format!("SELECT {i}")))
            .collect();
        let as_pairs: Vec<(Question, String)> = texts
            .iter()
            .map(|(q, s)| (Question::new(q.clone(), "db").unwrap(), s.clone()))
            .collect();
        let repo = build(&as_pairs);
        let cfg = RetrievalConfig::default();
        let results = retrieve(
            &repo,
            &skeleton("question number 3 about topic 3", SkeletonOrigin::Original),
            &skeleton("question 3 topic 3", SkeletonOrigin::Simplified),
            &cfg,
            &HashEmbedder::default(),
        )
        .unwrap();
        assert_eq!(results.len(), 8);
        // Ascending score order, most similar last.
        for pair in results.windows(2) {
            assert!(pair[0].score <= pair[1].score);
        }
        // No duplicates.
        let mut indices: Vec<usize> = results.iter().map(|r| r.item_index).collect();
        indices.sort_unstable();
        indices.dedup();
        assert_eq!(indices.len(), 8);
    }

    #[test]
    fn identical_skeleton_scores_one() {
        let repo = build(&pairs(&[
            ("How many singers do we have?", "SELECT COUNT(*) FROM singer"),
            ("Show me everything", "SELECT 1"),
        ]));
        let stored = repo.items()[0].key_skeleton.clone();
        let cfg = RetrievalConfig {
            k1: 1,
            k2: 0,
            restrict_to_db: None,
        };
        let results = retrieve(&repo, &stored, &stored, &cfg, &HashEmbedder::default()).unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].item_index, 0);
        assert!((results[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_repository_returns_what_it_has() {
        let repo = build(&pairs(&[("only one question here", "SELECT 1")]));
        let cfg = RetrievalConfig::default();
        let results = retrieve(
            &repo,
            &skeleton("anything", SkeletonOrigin::Original),
            &skeleton("at all", SkeletonOrigin::Simplified),
            &cfg,
            &HashEmbedder::default(),
        )
        .unwrap();
        assert_eq!(results.len(), 2);
    }

    #[test]
    fn duplicate_selections_backfill_from_simplified_side() {
        // One pair whose original and simplified skeletons are identical
        // (echo mock), so both queries rank the same items on top.
        let repo = build(&pairs(&[
            ("alpha beta gamma", "SELECT 1"),
            ("delta epsilon zeta", "SELECT 2"),
            ("eta theta iota", "SELECT 3"),
        ]));
        let cfg = RetrievalConfig {
            k1: 2,
            k2: 2,
            restrict_to_db: None,
        };
        let q = skeleton("alpha beta gamma", SkeletonOrigin::Original);
        let results = retrieve(&repo, &q, &q, &cfg, &HashEmbedder::default()).unwrap();
        assert_eq!(results.len(), 4);
        let mut indices: Vec<usize> = results.iter().map(|r| r.item_index).collect();
        indices.sort_unstable();
        indices.dedup();
        assert_eq!(indices.len(), 4, "backfill must avoid duplicates");
    }

    #[test]
    fn zero_k_side_is_allowed_but_both_zero_is_not() {
        assert!(RetrievalConfig::new(0, 1).is_ok());
        assert!(RetrievalConfig::new(1, 0).is_ok());
        assert!(RetrievalConfig::new(0, 0).is_err());
    }

    #[test]
    fn demonstration_block_layout() {
        let repo = build(&pairs(&[("q one", "SELECT 1"), ("q two", "SELECT 2")]));
        let cfg = RetrievalConfig::default();
        let results = retrieve(
            &repo,
            &skeleton("q one", SkeletonOrigin::Original),
            &skeleton("q two", SkeletonOrigin::Simplified),
            &cfg,
            &HashEmbedder::default(),
        )
        .unwrap();
        let demo = assemble_demonstration(&results).unwrap();
        assert_eq!(demo.matches("Question: ").count(), results.len());
        assert_eq!(demo.matches("\n\n").count(), results.len() - 1);
        assert_eq!(demo, assemble_demonstration(&results).unwrap());
        assert!(assemble_demonstration(&[]).is_err());
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let repo = build(&pairs(&[
            ("How many singers?", "SELECT COUNT(*) FROM singer"),
            ("List all names", "SELECT name FROM singer"),
        ]));
        let p1 = dir.path().join("a.repo");
        let p2 = dir.path().join("b.repo");
        repo.save(&p1).unwrap();
        let loaded = Repository::load(&p1).unwrap();
        assert_eq!(loaded.len(), repo.len());
        assert_eq!(loaded.encoder_id(), repo.encoder_id());
        assert_eq!(loaded.items(), repo.items());
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.repo");
        std::fs::write(&path, b"not a repository").unwrap();
        assert!(matches!(
            Repository::load(&path),
            Err(RepositoryError::Format(_))
        ));
    }

    #[test]
    fn restricting_to_db_filters_candidates() {
        let mut all_schemas = schemas();
        all_schemas.insert("other".to_string(), toy_schema("other"));
        let mut train = pairs(&[("alpha beta", "SELECT 1")]);
        train.push((Question::new("alpha beta", "other").unwrap(), "SELECT 2".to_string()));
        let repo = build_repository(
            &train,
            &all_schemas,
            &Gateway::mock_echo(),
            &HashEmbedder::default(),
            &BuildOptions::default(),
        )
        .unwrap();
        let cfg = RetrievalConfig {
            k1: 4,
            k2: 4,
            restrict_to_db: Some("other".to_string()),
        };
        let q = skeleton("alpha beta", SkeletonOrigin::Original);
        let results = retrieve(&repo, &q, &q, &cfg, &HashEmbedder::default()).unwrap();
        assert_eq!(results.len(), 2);
        assert!(results.iter().all(|r| r.item.db_id == "other"));
    }
}
