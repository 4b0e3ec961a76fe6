//! Score-free pair labelling.
//!
//! Structural negative rules run first and any of them firing labels the
//! pair not-duplicate. Otherwise the positive rules are tried in order on
//! canonicalised token sequences. No similarity score is consulted: the
//! only measures used are token-set and token-sequence overlaps.

use crate::calibration::agreement::{cohen_kappa, Agreement};
use crate::calibration::pairs::{Label, LabeledPair, Protocol};
use crate::identity::{canonicalize, tokenize, ParamMode, SynonymTable, TokenSequence};
use crate::similarity::token::{subsequence_containment, token_jaccard};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    R4,
    R5,
    R6,
    R7,
    R8,
    P1,
    P2,
    P3,
    P4,
    #[serde(rename = "DEFAULT_NEG")]
    DefaultNeg,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
        Rule::R8,
        Rule::P1,
        Rule::P2,
        Rule::P3,
        Rule::P4,
        Rule::DefaultNeg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::R6 => "R6",
            Rule::R7 => "R7",
            Rule::R8 => "R8",
            Rule::P1 => "P1",
            Rule::P2 => "P2",
            Rule::P3 => "P3",
            Rule::P4 => "P4",
            Rule::DefaultNeg => "DEFAULT_NEG",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub label: Label,
    pub rule: Rule,
    pub evidence: String,
}

/// Word lists and cut-offs behind the rules. The defaults are a
/// reconstruction of the rule intents and can be overridden from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleLists {
    /// Matched case-sensitively.
    pub framework_keywords: Vec<String>,
    /// Matched case-sensitively.
    pub http_verbs: Vec<String>,
    /// Entries starting with `n'` match as word suffixes.
    pub negations: Vec<String>,
    pub presence_phrases: Vec<String>,
    pub content_markers: Vec<String>,
    /// Copulas that constrain a value when followed by a quoted argument.
    pub content_copulas: Vec<String>,
    pub action_verbs: Vec<String>,
    pub assertion_markers: Vec<String>,
    pub containment_threshold: f64,
    pub jaccard_threshold: f64,
}

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for RuleLists {
    fn default() -> Self {
        RuleLists {
            framework_keywords: strings(&["Given", "When", "Then", "And", "But"]),
            http_verbs: strings(&["GET", "POST", "PUT", "DELETE", "PATCH", "HEAD", "OPTIONS"]),
            negations: strings(&["not", "no", "never", "n't", "without"]),
            presence_phrases: strings(&[
                "exists",
                "exist",
                "is present",
                "are present",
                "is displayed",
                "are displayed",
                "is shown",
                "is visible",
            ]),
            content_markers: strings(&["equals", "equal", "contains", "contain"]),
            content_copulas: strings(&["is", "be", "are"]),
            action_verbs: strings(&[
                "click",
                "clicks",
                "press",
                "presses",
                "tap",
                "taps",
                "enter",
                "enters",
                "type",
                "types",
                "fill",
                "fills",
                "select",
                "selects",
                "choose",
                "chooses",
                "submit",
                "submits",
                "send",
                "sends",
                "open",
                "opens",
                "navigate",
                "navigates",
                "go",
                "goes",
                "visit",
                "visits",
                "upload",
                "uploads",
                "download",
                "downloads",
                "drag",
                "drags",
                "scroll",
                "scrolls",
                "hover",
                "hovers",
                "login",
                "logout",
                "sign",
                "signs",
            ]),
            assertion_markers: strings(&[
                "should",
                "must",
                "expect",
                "expects",
                "expected",
                "see",
                "sees",
                "displayed",
                "shown",
                "visible",
                "contains",
                "equals",
                "exists",
                "present",
            ]),
            containment_threshold: 0.70,
            jaccard_threshold: 0.80,
        }
    }
}

/// Surface words with quote characters trimmed, original case.
fn raw_words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Lower-cased words outside double-quoted arguments. A quoted span becomes
/// the single word `"` so a following-argument check still sees it.
fn plain_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let (head, tail) = match rest.find('"') {
            Some(i) => match rest[i + 1..].find('"') {
                Some(j) => (&rest[..i], Some(&rest[i + 1 + j + 1..])),
                None => (rest, None),
            },
            None => (rest, None),
        };
        for w in head.split_whitespace() {
            let w = w.replace(['\u{2019}', '\u{2018}'], "'").to_lowercase();
            let w = w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'');
            if !w.is_empty() {
                out.push(w.to_string());
            }
        }
        match tail {
            Some(t) => {
                out.push("\"".to_string());
                rest = t;
            }
            None => return out,
        }
    }
}

fn matched<'a>(words: &[&str], list: &'a [String]) -> BTreeSet<&'a str> {
    list.iter()
        .filter(|k| words.contains(&k.as_str()))
        .map(String::as_str)
        .collect()
}

fn contains_phrase(words: &[String], phrase: &str) -> bool {
    let p: Vec<&str> = phrase.split_whitespace().collect();
    !p.is_empty()
        && words
            .windows(p.len())
            .any(|w| w.iter().zip(&p).all(|(a, b)| a == b))
}

fn negation(words: &[String], lists: &RuleLists) -> Option<String> {
    for w in words {
        for n in &lists.negations {
            let hit = if n.starts_with("n'") {
                w.ends_with(n.as_str())
            } else {
                w == n
            };
            if hit {
                return Some(w.clone());
            }
        }
    }
    None
}

fn presence(words: &[String], lists: &RuleLists) -> Option<String> {
    lists
        .presence_phrases
        .iter()
        .find(|p| contains_phrase(words, p))
        .cloned()
}

fn content(words: &[String], lists: &RuleLists) -> Option<String> {
    if let Some(m) = words.iter().find(|w| lists.content_markers.contains(w)) {
        return Some(m.clone());
    }
    words.windows(2).find_map(|w| {
        (lists.content_copulas.contains(&w[0]) && w[1] == "\"").then(|| format!("{} \"…\"", w[0]))
    })
}

fn has_any(words: &[String], list: &[String]) -> Option<String> {
    words.iter().find(|w| list.contains(w)).cloned()
}

/// Mere existence claim: a presence phrase with no value constraint.
fn mere_presence(words: &[String], lists: &RuleLists) -> Option<String> {
    presence(words, lists).filter(|_| content(words, lists).is_none())
}

fn assertion(words: &[String], lists: &RuleLists) -> Option<String> {
    has_any(words, &lists.assertion_markers)
}

fn action(words: &[String], lists: &RuleLists) -> Option<String> {
    if assertion(words, lists).is_some() {
        return None;
    }
    has_any(words, &lists.action_verbs)
}

fn verdict(label: Label, rule: Rule, evidence: String) -> RuleVerdict {
    RuleVerdict {
        label,
        rule,
        evidence,
    }
}

fn join(set: &BTreeSet<&str>) -> String {
    set.iter().copied().collect::<Vec<_>>().join(",")
}

fn negative(a: &str, b: &str, lists: &RuleLists) -> Option<RuleVerdict> {
    let neg = |rule, evidence| Some(verdict(Label::NotDuplicate, rule, evidence));

    let (ra, rb) = (raw_words(a), raw_words(b));
    let (ka, kb) = (
        matched(&ra, &lists.framework_keywords),
        matched(&rb, &lists.framework_keywords),
    );
    if !ka.is_empty() && !kb.is_empty() && ka != kb {
        return neg(Rule::R4, format!("{} vs {}", join(&ka), join(&kb)));
    }
    let (va, vb) = (
        matched(&ra, &lists.http_verbs),
        matched(&rb, &lists.http_verbs),
    );
    if !va.is_empty() && !vb.is_empty() && va != vb {
        return neg(Rule::R5, format!("{} vs {}", join(&va), join(&vb)));
    }

    let (wa, wb) = (plain_words(a), plain_words(b));
    match (negation(&wa, lists), negation(&wb, lists)) {
        (Some(n), None) | (None, Some(n)) => {
            return neg(Rule::R6, format!("negation `{n}` on one side"))
        }
        _ => {}
    }
    let r7 = |x: &[String], y: &[String]| {
        let p = mere_presence(x, lists)?;
        let c = content(y, lists)?;
        Some(format!("presence `{p}` vs content `{c}`"))
    };
    if let Some(e) = r7(&wa, &wb).or_else(|| r7(&wb, &wa)) {
        return neg(Rule::R7, e);
    }
    let r8 = |x: &[String], y: &[String]| {
        let act = action(x, lists)?;
        let asr = assertion(y, lists)?;
        Some(format!("action `{act}` vs assertion `{asr}`"))
    };
    if let Some(e) = r8(&wa, &wb).or_else(|| r8(&wb, &wa)) {
        return neg(Rule::R8, e);
    }
    None
}

fn multiset(t: &TokenSequence) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for tok in t.iter() {
        *m.entry(tok).or_insert(0) += 1;
    }
    m
}

fn positive(a: &str, b: &str, synonyms: &SynonymTable, lists: &RuleLists) -> Option<RuleVerdict> {
    let ta = canonicalize(&tokenize(a, ParamMode::Full), synonyms);
    let tb = canonicalize(&tokenize(b, ParamMode::Full), synonyms);
    let pos = |rule, evidence| Some(verdict(Label::Duplicate, rule, evidence));
    if ta == tb {
        return pos(Rule::P1, "identical canonical token sequence".into());
    }
    if multiset(&ta) == multiset(&tb) {
        return pos(Rule::P2, "identical canonical token multiset".into());
    }
    let c = subsequence_containment(&ta, &tb);
    if c >= lists.containment_threshold {
        return pos(Rule::P3, format!("subsequence containment {c:.3}"));
    }
    let j = token_jaccard(&ta, &tb);
    if j >= lists.jaccard_threshold {
        return pos(Rule::P4, format!("token jaccard {j:.3}"));
    }
    None
}

/// Label one pair with the default rule lists.
pub fn score_free_label(a: &str, b: &str, synonyms: &SynonymTable) -> RuleVerdict {
    score_free_label_with(a, b, synonyms, &RuleLists::default())
}

pub fn score_free_label_with(
    a: &str,
    b: &str,
    synonyms: &SynonymTable,
    lists: &RuleLists,
) -> RuleVerdict {
    negative(a, b, lists)
        .or_else(|| positive(a, b, synonyms, lists))
        .unwrap_or_else(|| {
            verdict(
                Label::NotDuplicate,
                Rule::DefaultNeg,
                "no positive rule fired".into(),
            )
        })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelabelSummary {
    pub pairs: usize,
    pub positives: usize,
    pub negatives: usize,
    /// `None` for an empty input.
    pub positive_rate: Option<f64>,
    pub rule_counts: BTreeMap<Rule, usize>,
    /// Agreement with the incoming labels; `None` for an empty input.
    pub agreement: Option<Agreement>,
}

/// Relabel every pair under the score-free protocol and compare with the
/// labels it arrived with.
pub fn relabel_benchmark(
    pairs: &[LabeledPair],
    synonyms: &SynonymTable,
    lists: &RuleLists,
) -> (Vec<LabeledPair>, RelabelSummary) {
    let out: Vec<LabeledPair> = pairs
        .par_iter()
        .map(|p| {
            let v = score_free_label_with(&p.text_a, &p.text_b, synonyms, lists);
            LabeledPair {
                label: v.label,
                rule_fired: v.rule.to_string(),
                protocol: Protocol::ScoreFree,
                ..p.clone()
            }
        })
        .collect();
    let mut rule_counts = BTreeMap::new();
    for p in &out {
        let rule = Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == p.rule_fired)
            .expect("rule names round-trip");
        *rule_counts.entry(rule).or_insert(0) += 1;
    }
    let positives = out.iter().filter(|p| p.label.is_duplicate()).count();
    let before: Vec<bool> = pairs.iter().map(|p| p.label.is_duplicate()).collect();
    let after: Vec<bool> = out.iter().map(|p| p.label.is_duplicate()).collect();
    let summary = RelabelSummary {
        pairs: out.len(),
        positives,
        negatives: out.len() - positives,
        positive_rate: (!out.is_empty()).then(|| positives as f64 / out.len() as f64),
        rule_counts,
        agreement: cohen_kappa(&before, &after).ok(),
    };
    (out, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::pairs::CosineBand;
    use crate::identity::default_synonyms;
    use proptest::prelude::*;

    fn label(a: &str, b: &str) -> RuleVerdict {
        score_free_label(a, b, &default_synonyms())
    }

    #[test]
    fn http_verbs_differ() {
        let v = label(
            r#"I send a GET request to "/x""#,
            r#"I send a POST request to "/x""#,
        );
        assert_eq!((v.label, v.rule), (Label::NotDuplicate, Rule::R5));
        assert!(v.evidence.contains("GET"));
    }

    #[test]
    fn numeric_params_identical() {
        let v = label("the response status is 200", "the response status is 404");
        assert_eq!((v.label, v.rule), (Label::Duplicate, Rule::P1));
    }

    #[test]
    fn identity_is_p1() {
        for x in [
            "",
            "I log in",
            "the user should see \"x\"",
            "I do not click",
        ] {
            assert_eq!(label(x, x).rule, Rule::P1, "{x}");
        }
    }

    #[test]
    fn framework_keyword_conflict() {
        let v = label("Given I am on the page", "Then I am on the page");
        assert_eq!(v.rule, Rule::R4);
        // One side without keywords does not fire.
        assert_eq!(
            label("Given I am on the page", "I am on the page").rule,
            Rule::P3
        );
    }

    #[test]
    fn polarity_conflict() {
        assert_eq!(
            label("the button is enabled", "the button is not enabled").rule,
            Rule::R6
        );
        assert_eq!(label("I can log in", "I can't log in").rule, Rule::R6);
        assert_eq!(
            label("I can log in", "I can\u{2019}t log in").rule,
            Rule::R6
        );
        // Both negated: no conflict.
        assert_eq!(label("I do not log in", "I did not log in").rule, Rule::P3);
        // Negation inside a quoted argument is data.
        assert_eq!(
            label(r#"I see "Not found""#, r#"I see "Found""#).rule,
            Rule::P1
        );
    }

    #[test]
    fn presence_vs_content() {
        let v = label("the banner is displayed", r#"the banner is "Welcome""#);
        assert_eq!(v.rule, Rule::R7);
        assert_eq!(
            label("the file exists", "the file contains the header").rule,
            Rule::R7
        );
        // Presence qualified by content is not mere presence.
        assert_ne!(
            label(
                r#"the banner is displayed and contains "a""#,
                r#"the banner contains "b""#
            )
            .rule,
            Rule::R7
        );
    }

    #[test]
    fn action_vs_assertion() {
        let v = label(
            "I press the login button",
            "the login button should be enabled",
        );
        assert_eq!(v.rule, Rule::R8);
        assert_eq!(label("I open the menu", "I see the menu").rule, Rule::R8);
    }

    #[test]
    fn synonyms_and_positive_tiers() {
        assert_eq!(
            label("I click the button", "I tap the button").rule,
            Rule::P1
        );
        assert_eq!(
            label("I click the red button", "the red button I click").rule,
            Rule::P2
        );
        assert_eq!(
            label(
                "I fill the name field",
                "I fill the name field quickly and carefully"
            )
            .rule,
            Rule::P3
        );
        assert_eq!(
            label("alpha beta gamma", "delta epsilon zeta").rule,
            Rule::DefaultNeg
        );
    }

    #[test]
    fn module_imports_no_score_engines() {
        let src = include_str!("relabel.rs");
        let imports: Vec<&str> = src
            .lines()
            .filter(|l| l.trim_start().starts_with("use "))
            .collect();
        assert!(!imports.is_empty());
        for l in imports {
            for banned in ["levenshtein", "embedding", "tfidf", "cosine", "detect"] {
                assert!(!l.contains(banned), "forbidden import: {l}");
            }
        }
    }

    fn pair(a: &str, b: &str, dup: bool) -> LabeledPair {
        LabeledPair {
            pair_id: "x".into(),
            text_a: a.into(),
            text_b: b.into(),
            cosine_band: CosineBand::From95To100,
            label: Label::from_bool(dup),
            rule_fired: "R1".into(),
            annotator: "a".into(),
            protocol: Protocol::Primary,
        }
    }

    #[test]
    fn benchmark_summary() {
        let pairs = vec![pair("a b", "a b", true), pair("x y", "x y", false)];
        let (out, s) = relabel_benchmark(&pairs, &default_synonyms(), &RuleLists::default());
        assert!(out
            .iter()
            .all(|p| p.label.is_duplicate() && p.protocol == Protocol::ScoreFree));
        assert_eq!(s.positive_rate, Some(1.0));
        assert_eq!(s.rule_counts.get(&Rule::P1), Some(&2));
        assert_eq!(s.agreement.unwrap().disagreements, 1);
        let (out, s) = relabel_benchmark(&[], &default_synonyms(), &RuleLists::default());
        assert!(out.is_empty());
        assert_eq!(s, RelabelSummary::default());
    }

    proptest! {
        #[test]
        fn symmetric_and_deterministic(
            a in r#"[A-Za-z"' ]{0,30}"#,
            b in r#"[A-Za-z"' ]{0,30}"#,
        ) {
            let s = default_synonyms();
            let ab = score_free_label(&a, &b, &s);
            let ba = score_free_label(&b, &a, &s);
            prop_assert_eq!(ab.label, ba.label);
            prop_assert_eq!(ab.rule, ba.rule);
            prop_assert_eq!(&ab, &score_free_label(&a, &b, &s));
        }
    }
}
