//! Line-delimited JSON prediction files.
//!
//! Line 1 is a header declaring the format and the label universe of every
//! domain in the file:
//!
//! ```text
//! {"format":"dualsig-predictions/1","label_universe":{"scotus":["A","B"]}}
//! {"case_id":"c1","model_id":"gpt","domain_id":"scotus","predicted_label":"A","risk":0.62,"true_label":"A"}
//! ```
//!
//! The header may instead live in a sidecar file named `<file>.schema.json`.
//! `true_label` is optional. Blank lines are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dualsig_core::model::{RISK_MAX, RISK_MIN};
use dualsig_core::{CaseAggregate, LabelUniverse, PredictionRecord};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Context, Error, Result};

pub const FORMAT: &str = "dualsig-predictions/1";

const FIELDS: [&str; 6] = [
    "case_id",
    "model_id",
    "domain_id",
    "predicted_label",
    "risk",
    "true_label",
];

/// Where a record came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub path: PathBuf,
    pub line: usize,
}

/// Validated records plus the label universe of each domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub universes: BTreeMap<String, LabelUniverse>,
    pub records: Vec<PredictionRecord>,
    origins: Vec<Origin>,
}

impl PredictionSet {
    pub fn new(universes: BTreeMap<String, LabelUniverse>) -> Self {
        Self {
            universes,
            ..Self::default()
        }
    }

    /// Wraps records produced in memory. Their origin is the position in
    /// `records` under the given pseudo-path.
    pub fn from_records(
        universes: BTreeMap<String, LabelUniverse>,
        records: Vec<PredictionRecord>,
        path: &Path,
    ) -> Result<Self> {
        let located = records.into_iter().enumerate().map(|(i, r)| {
            let origin = Origin {
                path: path.to_path_buf(),
                line: i + 1,
            };
            (r, origin)
        });
        Self::collect(universes, located)
    }

    /// Builds a set from located records, rejecting duplicates.
    pub(crate) fn collect(
        universes: BTreeMap<String, LabelUniverse>,
        located: impl IntoIterator<Item = (PredictionRecord, Origin)>,
    ) -> Result<Self> {
        let mut set = Self::new(universes);
        let mut seen: BTreeMap<(String, String, String), usize> = BTreeMap::new();
        for (record, origin) in located {
            if let Some(&i) = seen.get(&key(&record)) {
                return Err(duplicate(&set.origins[i], &origin, &record));
            }
            seen.insert(key(&record), set.records.len());
            set.records.push(record);
            set.origins.push(origin);
        }
        Ok(set)
    }

    pub fn origin(&self, index: usize) -> Option<&Origin> {
        self.origins.get(index)
    }

    /// Appends `other`. Universes declared in both must agree.
    pub fn merge(&mut self, other: PredictionSet) -> Result<()> {
        for (domain, universe) in other.universes {
            match self.universes.get(&domain) {
                Some(existing) if *existing != universe => {
                    let path = other.origins.first().map(|o| o.path.clone()).unwrap_or_default();
                    return Err(Error::schema(
                        &path,
                        format!("label universe for domain `{domain}` differs from an earlier input"),
                    ));
                }
                Some(_) => {}
                None => {
                    self.universes.insert(domain, universe);
                }
            }
        }
        let mut seen: BTreeMap<(String, String, String), usize> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (key(r), i))
            .collect();
        for (record, origin) in other.records.into_iter().zip(other.origins) {
            if let Some(&i) = seen.get(&key(&record)) {
                return Err(duplicate(&self.origins[i], &origin, &record));
            }
            seen.insert(key(&record), self.records.len());
            self.records.push(record);
            self.origins.push(origin);
        }
        Ok(())
    }

    /// Domains that have at least one record, sorted.
    pub fn domains(&self) -> Vec<String> {
        let mut d: Vec<String> = self.records.iter().map(|r| r.domain_id().to_string()).collect();
        d.sort();
        d.dedup();
        d
    }

    pub fn domain_records(&self, domain: &str) -> Vec<PredictionRecord> {
        self.records.iter().filter(|r| r.domain_id() == domain).cloned().collect()
    }

    pub fn universe(&self, domain: &str) -> Option<&LabelUniverse> {
        self.universes.get(domain)
    }

    /// Per-domain case aggregates.
    pub fn aggregate(&self) -> Result<BTreeMap<String, Vec<CaseAggregate>>> {
        self.domains()
            .into_iter()
            .map(|domain| {
                let universe = &self.universes[&domain];
                let aggs = dualsig_core::signal::aggregate_cases(&self.domain_records(&domain), universe)
                    .context(|| format!("domain `{domain}`"))?;
                Ok((domain, aggs))
            })
            .collect()
    }
}

fn key(r: &PredictionRecord) -> (String, String, String) {
    (r.domain_id().to_string(), r.case_id().to_string(), r.model_id().to_string())
}

fn duplicate(first: &Origin, second: &Origin, record: &PredictionRecord) -> Error {
    let first = if first.path == second.path {
        format!("line {}", first.line)
    } else {
        format!("{}:{}", first.path.display(), first.line)
    };
    Error::input(
        &second.path,
        second.line,
        None,
        format!(
            "duplicate prediction for case `{}` by model `{}` (first seen at {first})",
            record.case_id(),
            record.model_id()
        ),
    )
}

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
    label_universe: BTreeMap<&'a str, &'a [String]>,
}

#[derive(Serialize)]
struct Line<'a> {
    case_id: &'a str,
    model_id: &'a str,
    domain_id: &'a str,
    predicted_label: &'a str,
    risk: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_label: Option<&'a str>,
}

/// Serializes a prediction file. Records keep their order; floats are written
/// in shortest round-trip form so reloading is exact.
pub fn to_string(set: &PredictionSet) -> String {
    let header = Header {
        format: FORMAT,
        label_universe: set.universes.iter().map(|(d, u)| (d.as_str(), u.labels())).collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &set.records {
        let line = Line {
            case_id: r.case_id(),
            model_id: r.model_id(),
            domain_id: r.domain_id(),
            predicted_label: r.predicted_label(),
            risk: r.risk(),
            true_label: r.true_label(),
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_predictions(path: &Path, set: &PredictionSet) -> Result<()> {
    crate::write_atomic(path, to_string(set).as_bytes())
}

pub fn load_predictions(path: &Path) -> Result<PredictionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".schema.json");
    path.with_file_name(name)
}

/// Parses prediction-file text; `path` is used for diagnostics and to locate a
/// sidecar schema.
pub fn parse(path: &Path, text: &str) -> Result<PredictionSet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let first_is_header = match lines.peek() {
        Some((_, l)) => serde_json::from_str::<Value>(l)
            .ok()
            .and_then(|v| v.as_object().map(|o| o.contains_key("format")))
            .unwrap_or(false),
        None => false,
    };
    let universes = if first_is_header {
        let (n, l) = lines.next().expect("peeked");
        parse_header(path, n, l)?
    } else {
        let side = sidecar(path);
        match fs::read_to_string(&side) {
            Ok(t) => parse_header(&side, 1, t.trim())?,
            Err(_) => {
                return Err(Error::schema(
                    path,
                    format!(
                        "missing label universe: no `{FORMAT}` header on line 1 and no sidecar {}",
                        side.display()
                    ),
                ))
            }
        }
    };

    let mut located = Vec::new();
    for (n, l) in lines {
        let record = parse_record(path, n, l, &universes)?;
        let origin = Origin {
            path: path.to_path_buf(),
            line: n,
        };
        located.push((record, origin));
    }
    PredictionSet::collect(universes, located)
}

fn parse_header(path: &Path, line: usize, text: &str) -> Result<BTreeMap<String, LabelUniverse>> {
    let bad = |field: Option<&str>, msg: String| Error::input(path, line, field, msg);
    let value: Value =
        serde_json::from_str(text).map_err(|e| bad(None, format!("malformed header: {e}")))?;
    let obj = value.as_object().ok_or_else(|| bad(None, "header must be a JSON object".into()))?;
    match obj.get("format").and_then(Value::as_str) {
        Some(FORMAT) => {}
        Some(other) => return Err(bad(Some("format"), format!("unsupported format `{other}`, expected `{FORMAT}`"))),
        None => return Err(bad(Some("format"), "expected a string".into())),
    }
    let Some(domains) = obj.get("label_universe") else {
        return Err(Error::schema(path, "missing label universe: header has no `label_universe`"));
    };
    let domains = domains
        .as_object()
        .ok_or_else(|| bad(Some("label_universe"), "expected an object of domain -> labels".into()))?;
    let mut out = BTreeMap::new();
    for (domain, labels) in domains {
        let field = format!("label_universe.{domain}");
        let labels = labels
            .as_array()
            .and_then(|a| a.iter().map(|v| v.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
            .ok_or_else(|| bad(Some(&field), "expected an array of strings".into()))?;
        let universe = LabelUniverse::new(labels).map_err(|e| bad(Some(&field), e.to_string()))?;
        out.insert(domain.clone(), universe);
    }
    Ok(out)
}

fn string_field<'a>(path: &Path, line: usize, obj: &'a Map<String, Value>, name: &str) -> Result<&'a str> {
    match obj.get(name) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s),
        Some(Value::String(_)) => Err(Error::input(path, line, Some(name), "must not be empty")),
        Some(_) => Err(Error::input(path, line, Some(name), "expected a string")),
        None => Err(Error::input(path, line, Some(name), "missing")),
    }
}

fn parse_record(
    path: &Path,
    line: usize,
    text: &str,
    universes: &BTreeMap<String, LabelUniverse>,
) -> Result<PredictionRecord> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::input(path, line, None, format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::input(path, line, None, "expected a JSON object"))?;
    if let Some(unknown) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(Error::input(path, line, Some(unknown), "unknown field"));
    }
    let case_id = string_field(path, line, obj, "case_id")?;
    let model_id = string_field(path, line, obj, "model_id")?;
    let domain_id = string_field(path, line, obj, "domain_id")?;
    let predicted = string_field(path, line, obj, "predicted_label")?;
    let risk = match obj.get("risk") {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::input(path, line, Some("risk"), "expected a number"))?,
        None => return Err(Error::input(path, line, Some("risk"), "missing")),
    };
    let true_label = match obj.get("true_label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::input(path, line, Some("true_label"), "expected a string or null")),
    };
    build_record(
        path,
        line,
        universes,
        [case_id, model_id, domain_id, predicted],
        risk,
        true_label,
    )
}

/// Shared validation for both readers.
pub(crate) fn build_record(
    path: &Path,
    line: usize,
    universes: &BTreeMap<String, LabelUniverse>,
    [case_id, model_id, domain_id, predicted]: [&str; 4],
    risk: f64,
    true_label: Option<String>,
) -> Result<PredictionRecord> {
    let universe = universes.get(domain_id).ok_or_else(|| {
        Error::input(
            path,
            line,
            Some("domain_id"),
            format!("no label universe declared for domain `{domain_id}`"),
        )
    })?;
    if !universe.contains(predicted) {
        return Err(Error::input(
            path,
            line,
            Some("predicted_label"),
            format!("`{predicted}` is not in the label universe of `{domain_id}`"),
        ));
    }
    if let Some(t) = &true_label {
        if !universe.contains(t) {
            return Err(Error::input(
                path,
                line,
                Some("true_label"),
                format!("`{t}` is not in the label universe of `{domain_id}`"),
            ));
        }
    }
    if !(RISK_MIN..=RISK_MAX).contains(&risk) {
        return Err(Error::input(
            path,
            line,
            Some("risk"),
            format!("{risk} outside [{RISK_MIN:.2}, {RISK_MAX:.2}]"),
        ));
    }
    PredictionRecord::new(case_id, model_id, domain_id, predicted, risk, true_label)
        .map_err(|e| Error::input(path, line, None, e.to_string()))
}

/// Reads and merges several prediction files.
pub fn load_all(paths: &[PathBuf], reader: impl Fn(&Path) -> Result<PredictionSet>) -> Result<PredictionSet> {
    let mut set = PredictionSet::default();
    for p in paths {
        set.merge(reader(p)?)?;
    }
    Ok(set)
}
