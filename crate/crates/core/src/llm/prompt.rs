//! Objective-tailored rewrite prompts and extraction of the rewritten
//! function from a completion.

use regex::Regex;

use crate::digest::ContentHash;
use crate::objective::Objective;
use crate::patch::{EditOp, Provenance};

use super::LlmError;

/// A rendered prompt plus what is needed to splice the answer back in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    /// The original function, dedented to column 0.
    pub original_code: String,
    pub function_name: String,
    pub objective: Objective,
    pub rendered: String,
    /// Parameter list of the original definition, verbatim.
    pub params: String,
    /// Byte region of the function definition in the source it was built from.
    pub region: (usize, usize),
    /// Indentation of the original `def` line.
    pub indent: String,
}

impl PromptSpec {
    pub fn digest(&self) -> ContentHash {
        ContentHash::of(&self.rendered)
    }

    /// Name the prompt asks the model to define.
    pub fn generated_name(&self) -> String {
        format!("{}{}", self.function_name, self.objective.fast_suffix())
    }
}

/// Location of a `def` block inside a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSite {
    pub start: usize,
    /// End of the last body line, terminator excluded.
    pub end: usize,
    pub indent: String,
    pub params: String,
}

/// Finds `def name(...)` and the extent of its indented body.
pub fn locate_function(source: &str, name: &str) -> Option<FunctionSite> {
    let header = Regex::new(&format!(r"^([ \t]*)def[ \t]+{}[ \t]*\(", regex::escape(name)))
        .expect("valid header regex");

    let mut offset = 0;
    let mut lines = source.split_inclusive('\n');
    for raw in lines.by_ref() {
        let line_start = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        let Some(caps) = header.captures(line) else {
            continue;
        };
        let indent = caps[1].to_string();
        let open = caps.get(0).unwrap().end();
        let params = matching_params(&line[open..])?;

        let mut end = None;
        for body in lines {
            let body_start = offset;
            offset += body.len();
            let body_line = body.trim_end_matches(['\n', '\r']);
            let trimmed = body_line.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if body_line.len() - trimmed.len() <= indent.len() {
                break;
            }
            end = Some(body_start + body_line.len());
        }
        return end.map(|end| FunctionSite {
            start: line_start,
            end,
            indent,
            params: params.to_string(),
        });
    }
    None
}

fn matching_params(after_open: &str) -> Option<&str> {
    let mut depth = 1;
    for (i, ch) in after_open.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&after_open[..i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Renders the rewrite prompt for `fn_name` found in `code`.
///
/// The prompt is the original function under an "original, inefficient"
/// header comment, a blank line, a "fixed, efficient" comment, and the
/// signature of a renamed function for the model to complete.
pub fn build_prompt(code: &str, fn_name: &str, objective: Objective) -> Result<PromptSpec, LlmError> {
    let site = locate_function(code, fn_name)
        .ok_or_else(|| LlmError::FunctionNotFound(fn_name.to_string()))?;
    let original_code = dedent(&code[site.start..site.end], &site.indent);
    let rendered = format!(
        "# original, {inefficient} code\n{original_code}\n\n# fixed, {efficient} code\ndef {fn_name}{suffix}({params}):\n",
        inefficient = objective.inefficient_adjective(),
        efficient = objective.efficient_adjective(),
        suffix = objective.fast_suffix(),
        params = site.params,
    );
    Ok(PromptSpec {
        original_code,
        function_name: fn_name.to_string(),
        objective,
        rendered,
        params: site.params,
        region: (site.start, site.end),
        indent: site.indent,
    })
}

fn dedent(text: &str, indent: &str) -> String {
    text.lines()
        .map(|l| l.strip_prefix(indent).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Turns a completion of `prompt` into a `Replace` over the original function.
///
/// The body runs until the first non-empty line at column 0 that follows at
/// least one indented line. The generated signature is prepended and the
/// generated name is renamed back to the original one.
pub fn extract_replacement(completion: &str, prompt: &PromptSpec) -> Result<EditOp, LlmError> {
    if completion.trim().is_empty() {
        return Err(LlmError::EmptyCompletion);
    }

    let mut body: Vec<&str> = Vec::new();
    for line in completion.lines() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            body.push("");
            continue;
        }
        if trimmed.len() == line.len() {
            break;
        }
        body.push(line.trim_end());
    }
    while body.last().is_some_and(|l| l.is_empty()) {
        body.pop();
    }
    if body.is_empty() {
        return Err(LlmError::UnparsableBody);
    }

    let generated = prompt.generated_name();
    let renamer = Regex::new(&format!(r"\b{}\b", regex::escape(&generated))).expect("valid rename regex");
    let mut function = format!("def {generated}({}):\n{}", prompt.params, body.join("\n"));
    function = renamer.replace_all(&function, prompt.function_name.as_str()).into_owned();

    let new_text = function
        .lines()
        .map(|l| if l.is_empty() { String::new() } else { format!("{}{}", prompt.indent, l) })
        .collect::<Vec<_>>()
        .join("\n");

    Ok(EditOp::Replace {
        start: prompt.region.0,
        end: prompt.region.1,
        new_text,
        provenance: Provenance::Llm,
        prompt_sha256: Some(prompt.digest()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    const TIME_PROMPT: &str = "# original, time-inefficient code
def fibonacci(n):
  if n == 1 or n == 2:
    return 1
  else:
    return fibonacci(n-1)+fibonacci(n-2)

# fixed, time-efficient code
def fibonacci_fast(n):
";

    const MEMORY_PROMPT: &str = "# original, memory-inefficient code
def fibonacci(n):
  l = [1, 1]
  while len(l) < n:
    l.append(l[-1]+l[-2])
  return l[-1]

# fixed, memory-efficient code
def fibonacci_efficient(n):
";

    #[test]
    fn time_prompt_golden() {
        let spec = build_prompt(FIB_TIME, "fibonacci", Objective::Time).unwrap();
        assert_eq!(spec.rendered, TIME_PROMPT);
        assert_eq!(spec.region, (0, FIB_TIME.trim_end().len()));
    }

    #[test]
    fn memory_prompt_golden() {
        let spec = build_prompt(FIB_MEMORY, "fibonacci", Objective::Memory).unwrap();
        assert_eq!(spec.rendered, MEMORY_PROMPT);
    }

    #[test]
    fn missing_function_is_reported() {
        let err = build_prompt("def lucas(n):\n  return n\n", "fibonacci", Objective::Time).unwrap_err();
        assert!(matches!(err, LlmError::FunctionNotFound(ref n) if n == "fibonacci"));
        // a prefix match is not a definition
        assert!(build_prompt("def fibonacci2(n):\n  return n\n", "fibonacci", Objective::Time).is_err());
    }

    #[test]
    fn parameter_list_is_copied_verbatim() {
        let src = "def fibonacci(n, memo = None):\n    return n\n";
        let spec = build_prompt(src, "fibonacci", Objective::Time).unwrap();
        assert!(spec.rendered.ends_with("def fibonacci_fast(n, memo = None):\n"));
    }

    #[test]
    fn locate_function_skips_following_code() {
        let src = "import sys\n\ndef fibonacci(n):\n  # comment\n  return n\n\nprint(fibonacci(3))\n";
        let site = locate_function(src, "fibonacci").unwrap();
        assert_eq!(&src[site.start..site.end], "def fibonacci(n):\n  # comment\n  return n");
    }

    #[test]
    fn time_completion_becomes_iterative_fibonacci() {
        let spec = build_prompt(FIB_TIME, "fibonacci", Objective::Time).unwrap();
        let edit = extract_replacement(COMPLETION_TIME, &spec).unwrap();
        let EditOp::Replace { start, end, new_text, provenance, prompt_sha256 } = edit else {
            panic!("expected replace");
        };
        assert_eq!((start, end), spec.region);
        assert_eq!(new_text, FIB_TIME_ITERATIVE.trim_end());
        assert_eq!(provenance, Provenance::Llm);
        assert_eq!(prompt_sha256, Some(ContentHash::of(TIME_PROMPT)));
    }

    #[test]
    fn memory_completion_becomes_two_variable_fibonacci() {
        let spec = build_prompt(FIB_MEMORY, "fibonacci", Objective::Memory).unwrap();
        let edit = extract_replacement(COMPLETION_MEMORY, &spec).unwrap();
        let EditOp::Replace { new_text, .. } = edit else { panic!() };
        assert_eq!(new_text, FIB_MEMORY_TWO_VARS.trim_end());
    }

    #[test]
    fn recursive_calls_to_generated_name_are_renamed() {
        let spec = build_prompt(FIB_TIME, "fibonacci", Objective::Time).unwrap();
        let edit = extract_replacement("  return fibonacci_fast(n-1) + 0\n", &spec).unwrap();
        let EditOp::Replace { new_text, .. } = edit else { panic!() };
        assert_eq!(new_text, "def fibonacci(n):\n  return fibonacci(n-1) + 0");
    }

    #[test]
    fn empty_and_unindented_completions_fail() {
        let spec = build_prompt(FIB_TIME, "fibonacci", Objective::Time).unwrap();
        assert!(matches!(extract_replacement("", &spec), Err(LlmError::EmptyCompletion)));
        assert!(matches!(extract_replacement("\n \n", &spec), Err(LlmError::EmptyCompletion)));
        assert!(matches!(
            extract_replacement("a, b = 1, 1\nreturn a\n", &spec),
            Err(LlmError::UnparsableBody)
        ));
    }

    #[test]
    fn nested_method_is_reindented() {
        let src = "class F:\n    def fib(self, n):\n        return n\n\n    def other(self):\n        pass\n";
        let spec = build_prompt(src, "fib", Objective::Memory).unwrap();
        assert!(spec.original_code.starts_with("def fib(self, n):\n    return n"));
        let edit = extract_replacement("    return 0\n", &spec).unwrap();
        let EditOp::Replace { start, end, new_text, .. } = edit else { panic!() };
        assert_eq!(&src[start..end], "    def fib(self, n):\n        return n");
        assert_eq!(new_text, "    def fib(self, n):\n        return 0");
    }
}
