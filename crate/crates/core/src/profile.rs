//! Toolchain profiles: how to check, run and segment programs of one language.

use serde::{Deserialize, Serialize};

/// Command templates and line syntax for a target language.
///
/// `syntax_check_cmd` and `run_cmd` are split shell-style; the token `{file}`
/// is replaced by the variant path and `{args}` expands to the test arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainProfile {
    /// Opaque language tag carried by every `SourceUnit`.
    #[serde(default = "default_language")]
    pub language: String,
    /// File extension for materialized variants, without the dot.
    #[serde(default = "default_extension")]
    pub extension: String,
    #[serde(default = "default_comment_prefix")]
    pub comment_prefix: String,
    #[serde(default = "default_syntax_check_cmd")]
    pub syntax_check_cmd: String,
    #[serde(default = "default_run_cmd")]
    pub run_cmd: String,
    /// Appended to the variant before running tests; `{entry}` names the
    /// function under improvement.
    #[serde(default = "default_driver")]
    pub driver: String,
    /// Subtract the interpreter's own startup time from timing measurements.
    #[serde(default = "default_true")]
    pub subtract_startup: bool,
}

fn default_language() -> String {
    "python".into()
}
fn default_extension() -> String {
    "py".into()
}
fn default_comment_prefix() -> String {
    "#".into()
}
fn default_syntax_check_cmd() -> String {
    "python3 -m py_compile {file}".into()
}
fn default_run_cmd() -> String {
    "python3 {file} {args}".into()
}
fn default_driver() -> String {
    PYTHON_DRIVER.into()
}
fn default_true() -> bool {
    true
}

const PYTHON_DRIVER: &str = "\n\nif __name__ == \"__main__\":\n    import sys\n    if hasattr(sys, \"set_int_max_str_digits\"):\n        sys.set_int_max_str_digits(0)\n    print({entry}(*[int(a) for a in sys.argv[1:]]))\n";

impl Default for ToolchainProfile {
    fn default() -> Self {
        Self::python()
    }
}

impl ToolchainProfile {
    pub fn python() -> Self {
        Self {
            language: default_language(),
            extension: default_extension(),
            comment_prefix: default_comment_prefix(),
            syntax_check_cmd: default_syntax_check_cmd(),
            run_cmd: default_run_cmd(),
            driver: default_driver(),
            subtract_startup: true,
        }
    }

    /// Checks that both command templates mention `{file}` and parse as shell words.
    pub fn validate(&self) -> Result<(), String> {
        for (name, template) in [
            ("syntax_check_cmd", &self.syntax_check_cmd),
            ("run_cmd", &self.run_cmd),
        ] {
            let words = shlex::split(template)
                .ok_or_else(|| format!("{name}: unbalanced quoting in {template:?}"))?;
            if words.is_empty() {
                return Err(format!("{name}: empty command"));
            }
            if !words.iter().any(|w| w.contains("{file}")) {
                return Err(format!("{name}: template must contain {{file}}"));
            }
        }
        Ok(())
    }

    pub fn syntax_command(&self, file: &str) -> Vec<String> {
        expand(&self.syntax_check_cmd, file, &[])
    }

    pub fn run_command(&self, file: &str, args: &[String]) -> Vec<String> {
        expand(&self.run_cmd, file, args)
    }

    pub fn driver_for(&self, entry: &str) -> String {
        self.driver.replace("{entry}", entry)
    }
}

fn expand(template: &str, file: &str, args: &[String]) -> Vec<String> {
    let words = shlex::split(template).unwrap_or_default();
    let mut out = Vec::with_capacity(words.len() + args.len());
    for word in words {
        if word == "{args}" {
            out.extend(args.iter().cloned());
        } else {
            out.push(word.replace("{file}", file));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_expand_file_and_args() {
        let p = ToolchainProfile::python();
        assert_eq!(
            p.run_command("/tmp/v.py", &["10".into(), "3".into()]),
            ["python3", "/tmp/v.py", "10", "3"]
        );
        assert_eq!(
            p.syntax_command("/tmp/v.py"),
            ["python3", "-m", "py_compile", "/tmp/v.py"]
        );
    }

    #[test]
    fn template_without_file_placeholder_is_rejected() {
        let mut p = ToolchainProfile::python();
        assert!(p.validate().is_ok());
        p.run_cmd = "python3 main.py {args}".into();
        assert!(p.validate().unwrap_err().contains("run_cmd"));
    }
}
