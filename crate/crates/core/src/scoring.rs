//! Relative error scores, sums, means and completeness.
//!
//! Everything is kept as an exact fraction; rounding only happens in
//! [`display`] and [`round_half_up`].

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub type Score = Ratio<i128>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("triple count is zero")]
    ZeroTriples,
    #[error("mean of an empty list")]
    EmptyMean,
    #[error("incompleteness {0} outside [0, 1]")]
    OutOfRange(String),
}

/// Absolute error tallies for one generated ontology.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorCounts {
    #[serde(rename = "S")]
    pub syntax: u64,
    #[serde(rename = "C")]
    pub contradictions: u64,
    #[serde(rename = "H")]
    pub hallucinations: u64,
    #[serde(rename = "I")]
    pub incompleteness: u64,
    pub triples: u64,
}

impl ErrorCounts {
    pub fn new(s: u64, c: u64, h: u64, i: u64, triples: u64) -> Self {
        ErrorCounts {
            syntax: s,
            contradictions: c,
            hallucinations: h,
            incompleteness: i,
            triples,
        }
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.syntax, self.contradictions, self.hallucinations, self.incompleteness]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorScores {
    pub s_rel: Score,
    pub c_rel: Score,
    pub h_rel: Score,
    pub i_rel: Score,
    pub sum: Score,
}

impl ErrorScores {
    pub fn components(&self) -> [Score; 4] {
        [self.s_rel, self.c_rel, self.h_rel, self.i_rel]
    }

    pub fn completeness(&self) -> Score {
        Score::from_integer(1) - self.i_rel
    }
}

fn ser_score<S: Serializer>(x: &Score, s: S) -> Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Score", 3)?;
    st.serialize_field("exact", &format!("{}/{}", x.numer(), x.denom()))?;
    st.serialize_field("value", &to_f64(x))?;
    st.serialize_field("display", &display(x))?;
    st.end()
}

struct Scored<'a>(&'a Score);

impl Serialize for Scored<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ser_score(self.0, s)
    }
}

impl Serialize for ErrorScores {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ErrorScores", 5)?;
        st.serialize_field("S", &Scored(&self.s_rel))?;
        st.serialize_field("C", &Scored(&self.c_rel))?;
        st.serialize_field("H", &Scored(&self.h_rel))?;
        st.serialize_field("I", &Scored(&self.i_rel))?;
        st.serialize_field("sum", &Scored(&self.sum))?;
        st.end()
    }
}

pub fn relative_scores(counts: &ErrorCounts) -> Result<ErrorScores, ScoreError> {
    if counts.triples == 0 {
        return Err(ScoreError::ZeroTriples);
    }
    let t = counts.triples as i128;
    let rel = |n: u64| Score::new(n as i128, t);
    let mut s = ErrorScores {
        s_rel: rel(counts.syntax),
        c_rel: rel(counts.contradictions),
        h_rel: rel(counts.hallucinations),
        i_rel: rel(counts.incompleteness),
        sum: Score::zero(),
    };
    s.sum = sum_score(&s);
    Ok(s)
}

pub fn sum_score(s: &ErrorScores) -> Score {
    s.s_rel + s.c_rel + s.h_rel + s.i_rel
}

pub fn mean_error(sums: &[Score]) -> Result<Score, ScoreError> {
    if sums.is_empty() {
        return Err(ScoreError::EmptyMean);
    }
    let total: Score = sums.iter().copied().fold(Score::zero(), |a, b| a + b);
    Ok(total / Score::from_integer(sums.len() as i128))
}

pub fn completeness(i_rel: Score) -> Result<Score, ScoreError> {
    if i_rel.is_negative() || i_rel > Score::from_integer(1) {
        return Err(ScoreError::OutOfRange(display(&i_rel)));
    }
    Ok(Score::from_integer(1) - i_rel)
}

/// Round to `places` decimals, ties away from zero.
pub fn round_half_up(x: &Score, places: u32) -> Score {
    let scale = Score::from_integer(10i128.pow(places));
    let half = Score::new(1, 2);
    let scaled = x.abs() * scale;
    let r = (scaled + half).floor() / scale;
    if x.is_negative() {
        -r
    } else {
        r
    }
}

/// Two-decimal display string, e.g. `0.42`.
pub fn display(x: &Score) -> String {
    let r = round_half_up(x, 2);
    let hundredths = (r * Score::from_integer(100)).to_integer();
    let sign = if hundredths < 0 { "-" } else { "" };
    let h = hundredths.abs();
    format!("{sign}{}.{:02}", h / 100, h % 100)
}

pub fn to_f64(x: &Score) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Mean error and completeness series of one (provider, technique) column.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateScores {
    pub technique: String,
    pub provider: String,
    pub mean_error: Score,
    pub completeness_by_capability: BTreeMap<String, Score>,
}

impl Serialize for AggregateScores {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let comp: BTreeMap<&str, Scored> = self
            .completeness_by_capability
            .iter()
            .map(|(k, v)| (k.as_str(), Scored(v)))
            .collect();
        let mut st = s.serialize_struct("AggregateScores", 4)?;
        st.serialize_field("technique", &self.technique)?;
        st.serialize_field("provider", &self.provider)?;
        st.serialize_field("mean_error", &Scored(&self.mean_error))?;
        st.serialize_field("completeness", &comp)?;
        st.end()
    }
}

pub fn aggregate(
    provider: &str,
    technique: &str,
    cells: &[(String, ErrorScores)],
) -> Result<AggregateScores, ScoreError> {
    let sums: Vec<Score> = cells.iter().map(|(_, s)| s.sum).collect();
    Ok(AggregateScores {
        technique: technique.to_string(),
        provider: provider.to_string(),
        mean_error: mean_error(&sums)?,
        completeness_by_capability: cells
            .iter()
            .map(|(id, s)| Ok((id.clone(), completeness(s.i_rel)?)))
            .collect::<Result<_, ScoreError>>()?,
    })
}
