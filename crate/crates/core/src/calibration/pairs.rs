//! Labelled step-text pairs, one JSON object per line.

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

/// Cosine-similarity stratum a pair was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CosineBand {
    From50To70,
    From70To80,
    From80To85,
    From85To90,
    From90To95,
    From95To100,
}

impl CosineBand {
    pub const ALL: [CosineBand; 6] = [
        CosineBand::From50To70,
        CosineBand::From70To80,
        CosineBand::From80To85,
        CosineBand::From85To90,
        CosineBand::From90To95,
        CosineBand::From95To100,
    ];

    /// Half-open `[low, high)` bounds in hundredths.
    pub fn bounds_percent(self) -> (u32, u32) {
        match self {
            CosineBand::From50To70 => (50, 70),
            CosineBand::From70To80 => (70, 80),
            CosineBand::From80To85 => (80, 85),
            CosineBand::From85To90 => (85, 90),
            CosineBand::From90To95 => (90, 95),
            CosineBand::From95To100 => (95, 100),
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        let (lo, hi) = self.bounds_percent();
        (f64::from(lo) / 100.0, f64::from(hi) / 100.0)
    }

    pub fn for_cosine(cos: f64) -> Option<CosineBand> {
        Self::ALL.into_iter().find(|b| {
            let (lo, hi) = b.bounds();
            lo <= cos && cos < hi
        })
    }
}

impl fmt::Display for CosineBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.bounds_percent();
        write!(
            f,
            "[{}.{:02},{}.{:02})",
            lo / 100,
            lo % 100,
            hi / 100,
            hi % 100
        )
    }
}

impl FromStr for CosineBand {
    type Err = Error;

    /// Accepts `[0.50,0.70)`, `[0.50, 0.70)` and `0.50-0.70`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("unknown cosine band `{s}`"));
        let inner: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = inner.trim_start_matches('[').trim_end_matches(')');
        let (lo, hi) = inner
            .split_once(',')
            .or_else(|| inner.split_once('-'))
            .ok_or_else(bad)?;
        let pct = |x: &str| -> Result<u32> {
            let v: f64 = x.parse().map_err(|_| bad())?;
            Ok((v * 100.0).round() as u32)
        };
        let (lo, hi) = (pct(lo)?, pct(hi)?);
        Self::ALL
            .into_iter()
            .find(|b| b.bounds_percent() == (lo, hi))
            .ok_or_else(bad)
    }
}

impl Serialize for CosineBand {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CosineBand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Duplicate,
    NotDuplicate,
}

impl Label {
    pub fn is_duplicate(self) -> bool {
        self == Label::Duplicate
    }

    pub fn from_bool(duplicate: bool) -> Self {
        if duplicate {
            Label::Duplicate
        } else {
            Label::NotDuplicate
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(b) => Ok(Label::from_bool(b)),
            Raw::Int(1) => Ok(Label::Duplicate),
            Raw::Int(0) => Ok(Label::NotDuplicate),
            Raw::Str(s) => match s.as_str() {
                "duplicate" => Ok(Label::Duplicate),
                "not_duplicate" => Ok(Label::NotDuplicate),
                other => Err(serde::de::Error::custom(format!("unknown label `{other}`"))),
            },
            Raw::Int(other) => Err(serde::de::Error::custom(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Primary,
    ScoreFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair_id: String,
    pub text_a: String,
    pub text_b: String,
    pub cosine_band: CosineBand,
    pub label: Label,
    pub rule_fired: String,
    #[serde(default)]
    pub annotator: String,
    #[serde(default)]
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
}

impl LabelCounts {
    pub fn of(pairs: &[LabeledPair]) -> Self {
        let positive = pairs.iter().filter(|p| p.label.is_duplicate()).count();
        LabelCounts {
            positive,
            negative: pairs.len() - positive,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

/// Parse newline-delimited pair records; blank lines are skipped. `source`
/// names the input in error messages.
pub fn parse_pairs<R: Read>(reader: R, source: &str) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Record {
            path: source.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: LabeledPair = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: source.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        if pair.rule_fired.trim().is_empty() {
            return Err(Error::Record {
                path: source.to_string(),
                line: line_no,
                message: "empty rule_fired".into(),
            });
        }
        out.push(pair);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(file, &path.display().to_string())
}

pub fn write_pairs<W: Write>(mut writer: W, pairs: &[LabeledPair]) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW: &str = r#"{"pair_id":"p1","text_a":"a","text_b":"b","cosine_band":"[0.80,0.85)","label":"duplicate","rule_fired":"R1","annotator":"x","protocol":"primary"}"#;

    #[test]
    fn band_boundaries() {
        assert_eq!(CosineBand::for_cosine(0.5), Some(CosineBand::From50To70));
        assert_eq!(CosineBand::for_cosine(0.7), Some(CosineBand::From70To80));
        assert_eq!(CosineBand::for_cosine(0.8499), Some(CosineBand::From80To85));
        assert_eq!(CosineBand::for_cosine(0.95), Some(CosineBand::From95To100));
        assert_eq!(CosineBand::for_cosine(1.0), None);
        assert_eq!(CosineBand::for_cosine(0.49), None);
        for b in CosineBand::ALL {
            assert_eq!(b.to_string().parse::<CosineBand>().unwrap(), b);
        }
        assert_eq!(
            "0.50-0.70".parse::<CosineBand>().unwrap(),
            CosineBand::From50To70
        );
        assert_eq!(
            "[0.90, 0.95)".parse::<CosineBand>().unwrap(),
            CosineBand::From90To95
        );
        assert!("[0.60,0.70)".parse::<CosineBand>().is_err());
    }

    #[test]
    fn parse_rows() {
        let text = format!(
            "{ROW}\n\n{}\n",
            ROW.replace("\"duplicate\"", "false").replace("p1", "p2")
        );
        let pairs = parse_pairs(text.as_bytes(), "mem").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].cosine_band, CosineBand::From80To85);
        assert_eq!(
            LabelCounts::of(&pairs),
            LabelCounts {
                positive: 1,
                negative: 1
            }
        );
        let mut buf = Vec::new();
        write_pairs(&mut buf, &pairs).unwrap();
        assert_eq!(parse_pairs(buf.as_slice(), "mem").unwrap(), pairs);
    }

    #[test]
    fn empty_input() {
        assert!(parse_pairs("".as_bytes(), "mem").unwrap().is_empty());
    }

    #[test]
    fn missing_label_reports_line() {
        let bad = ROW.replace(r#""label":"duplicate","#, "");
        let text = format!("{ROW}\n{bad}\n");
        match parse_pairs(text.as_bytes(), "pairs.jsonl") {
            Err(Error::Record { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("label"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_band_and_garbage() {
        let bad = ROW.replace("[0.80,0.85)", "[0.10,0.20)");
        assert!(matches!(
            parse_pairs(bad.as_bytes(), "m"),
            Err(Error::Record { line: 1, .. })
        ));
        assert!(matches!(
            parse_pairs("{not json".as_bytes(), "m"),
            Err(Error::Record { line: 1, .. })
        ));
        let no_rule = ROW.replace(r#""rule_fired":"R1""#, r#""rule_fired":"""#);
        assert!(parse_pairs(no_rule.as_bytes(), "m").is_err());
    }
}
