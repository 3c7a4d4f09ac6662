//! Objective-tailored mutation through a text-completion model.

mod prompt;
mod provider;

pub use prompt::{build_prompt, extract_replacement, locate_function, FunctionSite, PromptSpec};
pub use provider::{
    CompletionParams, CompletionProvider, CompletionRequest, CompletionResponse, HttpProvider,
    MockProvider, ProviderError, ProviderErrorKind, ProviderInfo, RetryPolicy, API_KEY_ENV,
};

use crate::objective::Objective;
use crate::patch::EditOp;
use crate::source::SourceUnit;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("function `{0}` not found in source")]
    FunctionNotFound(String),
    #[error("completion is empty")]
    EmptyCompletion,
    #[error("completion has no indented body line")]
    UnparsableBody,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Prompt, query and extract in one step.
pub fn llm_propose(
    unit: &SourceUnit,
    fn_name: &str,
    objective: Objective,
    client: &dyn CompletionProvider,
    params: &CompletionParams,
) -> Result<EditOp, LlmError> {
    let prompt = build_prompt(unit.text(), fn_name, objective)?;
    let response = client.complete(&params.request(&prompt.rendered))?;
    extract_replacement(&response.text, &prompt)
}
