//! Line-granular segmentation of target source text.

use crate::digest::ContentHash;
use crate::profile::ToolchainProfile;

/// One statement: a non-empty, non-comment physical line.
///
/// `start..end` covers the whole line including its indentation but not the
/// line terminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub indent_columns: usize,
}

/// Target source split into ordered statement spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    text: String,
    spans: Vec<Span>,
    language_tag: String,
    hash: ContentHash,
}

#[derive(Debug, thiserror::Error)]
#[error("source is not valid UTF-8 (first invalid byte at offset {offset})")]
pub struct EncodingError {
    pub offset: usize,
}

/// Segments raw bytes into a `SourceUnit` using the profile's comment syntax.
pub fn segment(source: &[u8], profile: &ToolchainProfile) -> Result<SourceUnit, EncodingError> {
    let text = std::str::from_utf8(source).map_err(|e| EncodingError {
        offset: e.valid_up_to(),
    })?;
    Ok(SourceUnit::new(text, &profile.language, &profile.comment_prefix))
}

impl SourceUnit {
    pub fn new(text: &str, language_tag: &str, comment_prefix: &str) -> Self {
        let mut spans = Vec::new();
        let mut offset = 0;
        for raw in text.split_inclusive('\n') {
            let line = raw.trim_end_matches(['\n', '\r']);
            let trimmed = line.trim_start();
            let is_comment = !comment_prefix.is_empty() && trimmed.starts_with(comment_prefix);
            if !trimmed.trim_end().is_empty() && !is_comment {
                spans.push(Span {
                    start: offset,
                    end: offset + line.len(),
                    indent_columns: line.len() - trimmed.len(),
                });
            }
            offset += raw.len();
        }
        Self {
            hash: ContentHash::of(text),
            text: text.to_string(),
            spans,
            language_tag: language_tag.to_string(),
        }
    }

    /// Python-flavoured unit, mostly for tests and fixtures.
    pub fn python(text: &str) -> Self {
        Self::new(text, "python", "#")
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn hash(&self) -> ContentHash {
        self.hash
    }

    /// Text of span `index`, indentation included.
    pub fn line(&self, index: usize) -> &str {
        let s = self.spans[index];
        &self.text[s.start..s.end]
    }

    pub fn indent_of(&self, index: usize) -> &str {
        let s = self.spans[index];
        &self.text[s.start..s.start + s.indent_columns]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIB_TIME;

    #[test]
    fn recursive_fibonacci_has_five_statements() {
        let unit = SourceUnit::python(FIB_TIME);
        assert_eq!(unit.len(), 5);
        assert_eq!(unit.line(0), "def fibonacci(n):");
        assert_eq!(unit.spans()[4].indent_columns, 4);
        assert_eq!(unit.indent_of(1), "  ");
    }

    #[test]
    fn empty_and_comment_only_sources_have_no_spans() {
        assert!(SourceUnit::python("").is_empty());
        assert!(SourceUnit::python("# hi").is_empty());
        assert!(SourceUnit::python("\n   \n\t# indented comment\n").is_empty());
    }

    #[test]
    fn crlf_terminators_are_not_part_of_spans() {
        let unit = SourceUnit::python("a = 1\r\nb = 2\r\n");
        assert_eq!(unit.line(0), "a = 1");
        assert_eq!(unit.line(1), "b = 2");
    }

    #[test]
    fn invalid_utf8_is_an_encoding_error() {
        let err = segment(b"ok\n\xff\xfe", &ToolchainProfile::python()).unwrap_err();
        assert_eq!(err.offset, 3);
    }
}
