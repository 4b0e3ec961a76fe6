//! Line-oriented parser for English Gherkin `.feature` sources.
//!
//! The parser only extracts what duplicate detection needs: the block
//! structure (features, backgrounds, scenarios, outlines, examples) and the
//! phrasing line of every step. DocString and DataTable arguments are
//! consumed and recorded as flags on the step they belong to.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKeyword {
    Given,
    When,
    Then,
    And,
    But,
}

impl StepKeyword {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKeyword::Given => "Given",
            StepKeyword::When => "When",
            StepKeyword::Then => "Then",
            StepKeyword::And => "And",
            StepKeyword::But => "But",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Given" => Some(StepKeyword::Given),
            "When" => Some(StepKeyword::When),
            "Then" => Some(StepKeyword::Then),
            "And" | "*" => Some(StepKeyword::And),
            "But" => Some(StepKeyword::But),
            _ => None,
        }
    }
}

impl fmt::Display for StepKeyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub keyword: StepKeyword,
    /// Phrasing line with the keyword removed; inner spacing is untouched.
    pub raw_text: String,
    pub line_no: usize,
    pub has_docstring: bool,
    pub has_datatable: bool,
    pub is_background: bool,
    pub is_outline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Background,
    Scenario,
    ScenarioOutline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplesTable {
    pub line_no: usize,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub name: String,
    pub line_no: usize,
    /// Name of the enclosing `Rule:`, if any.
    pub rule: Option<String>,
    pub steps: Vec<Step>,
    pub examples: Vec<ExamplesTable>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub line_no: usize,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub line_no: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub repo_id: String,
    pub path: String,
    pub features: Vec<Feature>,
    pub parse_errors: Vec<ParseError>,
}

impl FeatureFile {
    /// All steps of the file in source order.
    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.features
            .iter()
            .flat_map(|f| f.blocks.iter())
            .flat_map(|b| b.steps.iter())
    }

    pub fn step_count(&self) -> usize {
        self.steps().count()
    }
}

/// Parse from raw bytes, replacing invalid UTF-8 sequences.
pub fn parse_feature_bytes(bytes: &[u8], repo_id: &str, path: &str) -> FeatureFile {
    parse_feature(&String::from_utf8_lossy(bytes), repo_id, path)
}

pub fn parse_feature(source: &str, repo_id: &str, path: &str) -> FeatureFile {
    let mut parser = Parser::new(source);
    parser.run();
    FeatureFile {
        repo_id: repo_id.to_string(),
        path: path.to_string(),
        features: parser.features,
        parse_errors: parser.errors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    /// Before any `Feature:` header.
    Preamble,
    /// Directly under `Feature:` or `Rule:`, no scenario open.
    FeatureBody,
    Block,
    Examples,
}

struct Parser<'a> {
    lines: Vec<&'a str>,
    pos: usize,
    section: Section,
    rule: Option<String>,
    /// Whether the last consumed content line was a step (or one of its
    /// arguments), so that a DocString/DataTable may attach to it.
    step_open: bool,
    features: Vec<Feature>,
    errors: Vec<ParseError>,
}

fn header<'l>(line: &'l str, keywords: &[&str]) -> Option<&'l str> {
    keywords
        .iter()
        .find_map(|kw| {
            line.strip_prefix(kw)
                .and_then(|rest| rest.strip_prefix(':'))
        })
        .map(str::trim)
}

fn split_step(line: &str) -> Option<(StepKeyword, &str)> {
    let (word, rest) = match line.find(char::is_whitespace) {
        Some(idx) => (&line[..idx], &line[idx..]),
        None => (line, ""),
    };
    StepKeyword::parse(word).map(|kw| (kw, rest.trim()))
}

fn table_cells(line: &str) -> Vec<String> {
    let inner = line.trim();
    let inner = inner.strip_prefix('|').unwrap_or(inner);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

impl<'a> Parser<'a> {
    fn new(source: &'a str) -> Self {
        let source = source.strip_prefix('\u{feff}').unwrap_or(source);
        Parser {
            lines: source.lines().collect(),
            pos: 0,
            section: Section::Preamble,
            rule: None,
            step_open: false,
            features: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn error(&mut self, line_no: usize, message: impl Into<String>) {
        self.errors.push(ParseError {
            line_no,
            message: message.into(),
        });
    }

    fn current_block(&mut self) -> Option<&mut Block> {
        self.features.last_mut().and_then(|f| f.blocks.last_mut())
    }

    fn run(&mut self) {
        while self.pos < self.lines.len() {
            let line_no = self.pos + 1;
            let line = self.lines[self.pos].trim();
            self.pos += 1;

            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if self.section == Section::Preamble && self.features.is_empty() {
                    if let Some(lang) = language_directive(comment) {
                        if lang != "en" {
                            self.error(
                                line_no,
                                format!("unsupported language `{lang}`; file skipped"),
                            );
                            return;
                        }
                    }
                }
                continue;
            }
            if line.starts_with('@') {
                self.step_open = false;
                continue;
            }
            if line.starts_with("\"\"\"") || line.starts_with("```") {
                self.docstring(line_no, &line[..3]);
                continue;
            }
            if line.starts_with('|') {
                self.table_row(line_no, line);
                continue;
            }
            self.keyword_line(line_no, line);
        }
    }

    fn docstring(&mut self, open_line: usize, delimiter: &str) {
        let start = self.pos;
        let close = self.lines[start..]
            .iter()
            .position(|l| l.trim_start().starts_with(delimiter));
        match close {
            Some(offset) => self.pos = start + offset + 1,
            None => {
                self.error(open_line, "unterminated DocString");
                self.pos = self.lines.len();
            }
        }
        if self.section == Section::Block && self.step_open {
            if let Some(step) = self.current_block().and_then(|b| b.steps.last_mut()) {
                step.has_docstring = true;
                return;
            }
        }
        self.error(open_line, "DocString without a preceding step");
    }

    fn table_row(&mut self, line_no: usize, line: &str) {
        match self.section {
            Section::Examples => {
                let cells = table_cells(line);
                if let Some(table) = self.current_block().and_then(|b| b.examples.last_mut()) {
                    if table.header.is_empty() {
                        table.header = cells;
                    } else {
                        table.rows.push(cells);
                    }
                }
            }
            Section::Block if self.step_open => {
                if let Some(step) = self.current_block().and_then(|b| b.steps.last_mut()) {
                    step.has_datatable = true;
                }
            }
            _ => self.error(line_no, "DataTable row without a preceding step"),
        }
    }

    fn open_block(&mut self, line_no: usize, kind: BlockKind, name: &str) {
        let rule = self.rule.clone();
        match self.features.last_mut() {
            Some(feature) if self.section != Section::Preamble => {
                feature.blocks.push(Block {
                    kind,
                    name: name.to_string(),
                    line_no,
                    rule,
                    steps: Vec::new(),
                    examples: Vec::new(),
                });
                self.section = Section::Block;
            }
            _ => {
                self.error(line_no, "scenario block outside of a Feature");
                self.section = Section::Preamble;
            }
        }
        self.step_open = false;
    }

    fn keyword_line(&mut self, line_no: usize, line: &str) {
        if let Some(name) = header(line, &["Feature"]) {
            if !self.features.is_empty() {
                self.error(line_no, "more than one Feature in file");
            }
            self.features.push(Feature {
                name: name.to_string(),
                line_no,
                blocks: Vec::new(),
            });
            self.section = Section::FeatureBody;
            self.rule = None;
            self.step_open = false;
            return;
        }
        if let Some(name) = header(line, &["Rule"]) {
            if self.section == Section::Preamble {
                self.error(line_no, "Rule outside of a Feature");
            } else {
                self.rule = Some(name.to_string());
                self.section = Section::FeatureBody;
            }
            self.step_open = false;
            return;
        }
        if let Some(name) = header(line, &["Background"]) {
            self.open_block(line_no, BlockKind::Background, name);
            return;
        }
        // Outline headers first: "Scenario Outline:" also starts with "Scenario".
        if let Some(name) = header(line, &["Scenario Outline", "Scenario Template"]) {
            self.open_block(line_no, BlockKind::ScenarioOutline, name);
            return;
        }
        if let Some(name) = header(line, &["Scenario", "Example"]) {
            self.open_block(line_no, BlockKind::Scenario, name);
            return;
        }
        if header(line, &["Examples", "Scenarios"]).is_some() {
            self.examples_header(line_no);
            return;
        }
        if let Some((keyword, text)) = split_step(line) {
            self.step(line_no, keyword, text);
            return;
        }
        // Free-form description text is legal right after a header.
        let in_description = match self.section {
            Section::FeatureBody => true,
            Section::Block => self
                .features
                .last()
                .and_then(|f| f.blocks.last())
                .is_some_and(|b| b.steps.is_empty()),
            Section::Examples => self
                .features
                .last()
                .and_then(|f| f.blocks.last())
                .and_then(|b| b.examples.last())
                .is_some_and(|t| t.header.is_empty()),
            Section::Preamble => false,
        };
        if !in_description {
            self.error(line_no, format!("unrecognised line: {line}"));
        }
        self.step_open = false;
    }

    fn examples_header(&mut self, line_no: usize) {
        self.step_open = false;
        let in_outline = self.section != Section::Preamble
            && self.section != Section::FeatureBody
            && self
                .current_block()
                .is_some_and(|b| b.kind == BlockKind::ScenarioOutline);
        if !in_outline {
            self.error(line_no, "Examples outside of a Scenario Outline");
            return;
        }
        if let Some(block) = self.current_block() {
            block.examples.push(ExamplesTable {
                line_no,
                header: Vec::new(),
                rows: Vec::new(),
            });
        }
        self.section = Section::Examples;
    }

    fn step(&mut self, line_no: usize, keyword: StepKeyword, text: &str) {
        self.step_open = false;
        if self.section != Section::Block {
            let msg = match self.section {
                Section::Examples => "step inside an Examples section",
                _ => "step outside of a scenario block",
            };
            self.error(line_no, msg);
            return;
        }
        if text.is_empty() {
            self.error(line_no, format!("`{keyword}` step without text"));
            return;
        }
        let Some(block) = self.current_block() else {
            return;
        };
        let kind = block.kind;
        block.steps.push(Step {
            keyword,
            raw_text: text.to_string(),
            line_no,
            has_docstring: false,
            has_datatable: false,
            is_background: kind == BlockKind::Background,
            is_outline: kind == BlockKind::ScenarioOutline,
        });
        self.step_open = true;
    }
}

fn language_directive(comment: &str) -> Option<&str> {
    let rest = comment.trim().strip_prefix("language")?;
    let rest = rest.trim_start().strip_prefix(':')?;
    Some(rest.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(src: &str) -> Vec<Step> {
        parse_feature(src, "r", "f.feature")
            .steps()
            .cloned()
            .collect()
    }

    #[test]
    fn single_when_step() {
        let file = parse_feature(
            "Feature: F\n  Scenario: S\n    When the request is sent",
            "r",
            "a.feature",
        );
        assert!(file.parse_errors.is_empty());
        let s: Vec<_> = file.steps().collect();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].keyword, StepKeyword::When);
        assert_eq!(s[0].raw_text, "the request is sent");
        assert_eq!(s[0].line_no, 3);
    }

    #[test]
    fn empty_source() {
        let file = parse_feature("", "r", "a.feature");
        assert!(file.features.is_empty());
        assert_eq!(file.step_count(), 0);
        assert!(file.parse_errors.is_empty());
    }

    #[test]
    fn datatable_is_attached_not_phrased() {
        let src = "Feature: F\n\
                   Scenario: S\n\
                   Given the branches\n\
                   | BRANCH | LOCATION |\n\
                   | main   | local    |\n\
                   | dev    | origin   |\n\
                   Then it works\n";
        let s = steps(src);
        assert_eq!(s.len(), 2);
        assert!(s[0].has_datatable);
        assert!(!s[0].has_docstring);
        assert_eq!(s[0].raw_text, "the branches");
        assert!(!s[1].has_datatable);
    }

    #[test]
    fn docstring_is_attached() {
        let src = "Feature: F\nScenario: S\n  When I post\n    \"\"\"\n    Then not a step\n    | nor a table |\n    \"\"\"\n  Then done\n";
        let file = parse_feature(src, "r", "f");
        assert!(file.parse_errors.is_empty(), "{:?}", file.parse_errors);
        let s: Vec<_> = file.steps().collect();
        assert_eq!(s.len(), 2);
        assert!(s[0].has_docstring);
        assert_eq!(s[1].raw_text, "done");
        assert_eq!(s[1].line_no, 8);
    }

    #[test]
    fn backtick_docstring() {
        let s = steps("Feature: F\nScenario: S\nGiven a payload\n```json\n{}\n```\n");
        assert_eq!(s.len(), 1);
        assert!(s[0].has_docstring);
    }

    #[test]
    fn background_and_outline_flags() {
        let src = "Feature: F
  Background:
    Given a user
  Scenario Outline: O
    When I log in as <role>
    Then I see <page>
    Examples:
      | role  | page  |
      | admin | admin |
      | guest | home  |
  Scenario: plain
    Then nothing
";
        let file = parse_feature(src, "r", "f");
        assert!(file.parse_errors.is_empty(), "{:?}", file.parse_errors);
        let s: Vec<_> = file.steps().collect();
        assert_eq!(s.len(), 4);
        assert!(s[0].is_background && !s[0].is_outline);
        assert!(s[1].is_outline && s[2].is_outline);
        assert_eq!(s[1].raw_text, "I log in as <role>");
        assert!(!s[3].is_outline && !s[3].is_background);
        let outline = &file.features[0].blocks[1];
        assert_eq!(outline.examples.len(), 1);
        assert_eq!(outline.examples[0].header, vec!["role", "page"]);
        assert_eq!(outline.examples[0].rows.len(), 2);
    }

    #[test]
    fn comments_tags_and_descriptions_skipped() {
        let src = "# a comment\n@tag\nFeature: F\n  Some description\n  more text\n\n  @smoke @wip\n  Scenario: S\n    A scenario description\n    # Given commented out\n    Given real step\n";
        let file = parse_feature(src, "r", "f");
        assert!(file.parse_errors.is_empty(), "{:?}", file.parse_errors);
        assert_eq!(file.step_count(), 1);
    }

    #[test]
    fn asterisk_maps_to_and() {
        let s = steps("Feature: F\nScenario: S\n* I have cukes\n");
        assert_eq!(s[0].keyword, StepKeyword::And);
        assert_eq!(s[0].raw_text, "I have cukes");
    }

    #[test]
    fn rule_is_transparent() {
        let src = "Feature: F\nRule: R1\n  Background:\n    Given b\n  Scenario: S\n    When w\nRule: R2\n  Example: E\n    Then t\n";
        let file = parse_feature(src, "r", "f");
        assert!(file.parse_errors.is_empty(), "{:?}", file.parse_errors);
        assert_eq!(file.step_count(), 3);
        let blocks = &file.features[0].blocks;
        assert_eq!(blocks[1].rule.as_deref(), Some("R1"));
        assert_eq!(blocks[2].rule.as_deref(), Some("R2"));
        assert_eq!(blocks[2].kind, BlockKind::Scenario);
    }

    #[test]
    fn non_english_language_is_skipped() {
        let file = parse_feature(
            "# language: fr\nFonctionnalité: F\nScénario: S\nSoit x\n",
            "r",
            "f",
        );
        assert_eq!(file.step_count(), 0);
        assert_eq!(file.parse_errors.len(), 1);
        assert!(file.parse_errors[0].message.contains("fr"));

        let en = parse_feature(
            "# language: en\nFeature: F\nScenario: S\nGiven x\n",
            "r",
            "f",
        );
        assert!(en.parse_errors.is_empty());
        assert_eq!(en.step_count(), 1);
    }

    #[test]
    fn malformed_lines_recover() {
        let src = "Given orphan step\nFeature: F\nScenario: S\n  Given ok\n  random junk\n  Then also ok\nScenario: S2\n| stray |\n  Then fine\n";
        let file = parse_feature(src, "r", "f");
        let lines: Vec<usize> = file.parse_errors.iter().map(|e| e.line_no).collect();
        assert_eq!(lines, vec![1, 5, 8]);
        let s: Vec<_> = file.steps().map(|s| s.raw_text.as_str()).collect();
        assert_eq!(s, vec!["ok", "also ok", "fine"]);
    }

    #[test]
    fn unterminated_docstring() {
        let file = parse_feature("Feature: F\nScenario: S\nGiven x\n\"\"\"\nbody\n", "r", "f");
        assert_eq!(file.parse_errors.len(), 1);
        assert_eq!(file.parse_errors[0].line_no, 4);
        assert!(file.steps().next().unwrap().has_docstring);
    }

    #[test]
    fn keyword_needs_word_boundary() {
        // "Givenness" is not a step keyword.
        let file = parse_feature(
            "Feature: F\nScenario: S\nGiven a\nGivenness is a word\n",
            "r",
            "f",
        );
        assert_eq!(file.step_count(), 1);
        assert_eq!(file.parse_errors.len(), 1);
    }

    #[test]
    fn invalid_utf8_replaced() {
        let mut bytes = b"Feature: F\nScenario: S\nGiven caf".to_vec();
        bytes.push(0xff);
        bytes.extend_from_slice(b" open\n");
        let file = parse_feature_bytes(&bytes, "r", "f");
        let s: Vec<_> = file.steps().collect();
        assert_eq!(s[0].raw_text, "caf\u{fffd} open");
    }

    #[test]
    fn crlf_line_endings() {
        let s = steps("Feature: F\r\nScenario: S\r\nGiven x  \r\nThen y\r\n");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].raw_text, "x");
    }
}
