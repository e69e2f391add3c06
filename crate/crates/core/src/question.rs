//! Natural-language questions and LLM-backed simplification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenerationParams, TemplateId};
use crate::prompts;

#[derive(Debug, Error)]
pub enum QuestionError {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A natural-language question bound to a target database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    text: String,
    db_id: String,
}

impl Question {
    pub fn new(text: impl Into<String>, db_id: impl Into<String>) -> Result<Self, QuestionError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(QuestionError::EmptyQuestion);
        }
        Ok(Question {
            text,
            db_id: db_id.into(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn db_id(&self) -> &str {
        &self.db_id
    }
}

/// A question rewritten by the model into plainer phrasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplifiedQuestion {
    pub text: String,
    pub source: Question,
}

/// Renders the simplification instruction with the question substituted in.
pub fn render_simplify_prompt(question: &Question) -> String {
    prompts::simplify_prompt(question.text())
}

/// Asks the model to simplify `question`, trimming the completion.
///
/// The request uses the simplification temperature (1.0 by default).
pub fn simplify_question(
    question: &Question,
    gateway: &Gateway,
    params: &GenerationParams,
) -> Result<SimplifiedQuestion, QuestionError> {
    let request = params.request(TemplateId::Simplify, render_simplify_prompt(question));
    let completion = gateway.complete(&request)?;
    let text = completion.text.trim().to_string();
    if text.is_empty() {
        return Err(QuestionError::EmptyCompletion);
    }
    Ok(SimplifiedQuestion {
        text,
        source: question.clone(),
    })
}
