//! Delimiter-separated prediction tables, with the column layout supplied by a
//! mapping document:
//!
//! ```toml
//! format = "dualsig-table-mapping/1"
//! delimiter = ","
//! domain = "scotus"            # used when there is no domain column
//!
//! [columns]
//! case_id = "case"
//! model_id = "model"
//! predicted_label = "prediction"
//! risk = "risk"
//! true_label = "gold"          # optional
//! domain_id = "domain"         # optional
//!
//! [label_universe]
//! scotus = ["A", "B"]
//! ```
//!
//! An empty `true_label` cell means the case has no ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dualsig_core::LabelUniverse;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::predictions::{build_record, Origin, PredictionSet};

pub const FORMAT: &str = "dualsig-table-mapping/1";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Columns {
    pub case_id: String,
    pub model_id: String,
    pub predicted_label: String,
    pub risk: String,
    #[serde(default)]
    pub true_label: Option<String>,
    #[serde(default)]
    pub domain_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableMapping {
    pub format: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default)]
    pub domain: Option<String>,
    pub columns: Columns,
    pub label_universe: BTreeMap<String, Vec<String>>,
}

fn default_delimiter() -> String {
    ",".into()
}

impl TableMapping {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let m: TableMapping = toml::from_str(text).map_err(|e| Error::schema(path, e.to_string()))?;
        if m.format != FORMAT {
            return Err(Error::schema(path, format!("unsupported format `{}`, expected `{FORMAT}`", m.format)));
        }
        if m.delimiter.len() != 1 {
            return Err(Error::schema(path, "delimiter must be a single ASCII character"));
        }
        if m.columns.domain_id.is_none() && m.domain.is_none() {
            return Err(Error::schema(path, "either `domain` or `columns.domain_id` is required"));
        }
        if m.label_universe.is_empty() {
            return Err(Error::schema(path, "missing label universe"));
        }
        m.universes(path)?;
        Ok(m)
    }

    fn universes(&self, path: &Path) -> Result<BTreeMap<String, LabelUniverse>> {
        self.label_universe
            .iter()
            .map(|(d, labels)| {
                LabelUniverse::new(labels.iter().cloned())
                    .map(|u| (d.clone(), u))
                    .map_err(|e| Error::schema(path, format!("label_universe.{d}: {e}")))
            })
            .collect()
    }

    pub fn read(&self, path: &Path) -> Result<PredictionSet> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.parse_table(path, &text)
    }

    pub fn parse_table(&self, path: &Path, bytes: &[u8]) -> Result<PredictionSet> {
        let universes = self.universes(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(self.delimiter.as_bytes()[0])
            .from_reader(bytes);
        let headers = reader
            .headers()
            .map_err(|e| Error::input(path, 1, None, e.to_string()))?
            .clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::input(path, 1, Some(name), "column not found in header"))
        };
        let c = &self.columns;
        let idx = [find(&c.case_id)?, find(&c.model_id)?, find(&c.predicted_label)?, find(&c.risk)?];
        let truth = c.true_label.as_deref().map(find).transpose()?;
        let domain_col = c.domain_id.as_deref().map(find).transpose()?;

        let mut located = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::input(path, line, None, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let cell = |i: usize| row.get(i).unwrap_or("").trim();
            let risk_text = cell(idx[3]);
            let risk: f64 = risk_text
                .parse()
                .map_err(|_| Error::input(path, line, Some(&c.risk), format!("`{risk_text}` is not a number")))?;
            let domain = match domain_col {
                Some(i) => cell(i),
                None => self.domain.as_deref().unwrap_or_default(),
            };
            for (i, name) in [(idx[0], &c.case_id), (idx[1], &c.model_id), (idx[2], &c.predicted_label)] {
                if cell(i).is_empty() {
                    return Err(Error::input(path, line, Some(name), "must not be empty"));
                }
            }
            let true_label = truth.map(cell).filter(|t| !t.is_empty()).map(str::to_string);
            let record = build_record(
                path,
                line,
                &universes,
                [cell(idx[0]), cell(idx[1]), domain, cell(idx[2])],
                risk,
                true_label,
            )?;
            let origin = Origin {
                path: path.to_path_buf(),
                line,
            };
            located.push((record, origin));
        }
        PredictionSet::collect(universes, located)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAPPING: &str = r#"
format = "dualsig-table-mapping/1"
delimiter = ";"
domain = "d"

[columns]
case_id = "case"
model_id = "model"
predicted_label = "pred"
risk = "risk"
true_label = "gold"

[label_universe]
d = ["A", "B"]
"#;

    #[test]
    fn reads_mapped_columns() {
        let m = TableMapping::parse(Path::new("m.toml"), MAPPING).unwrap();
        let table = "pred;case;model;risk;gold\nA;1;a;0.6;A\nB;1;b;0.7;\n";
        let set = m.parse_table(Path::new("t.csv"), table.as_bytes()).unwrap();
        assert_eq!(set.records.len(), 2);
        assert_eq!(set.records[0].true_label(), Some("A"));
        assert_eq!(set.records[1].true_label(), None);
        assert_eq!(set.records[1].domain_id(), "d");
    }

    #[test]
    fn bad_rows_name_line_and_column() {
        let m = TableMapping::parse(Path::new("m.toml"), MAPPING).unwrap();
        let err = m
            .parse_table(Path::new("t.csv"), b"pred;case;model;risk;gold\nA;1;a;0.6;A\nA;2;a;x;A\n")
            .unwrap_err();
        assert!(matches!(&err, Error::Input { line: 3, field: Some(f), .. } if f == "risk"), "{err:?}");
        let err = m
            .parse_table(Path::new("t.csv"), b"pred;case;model;risk\nA;1;a;0.6\n")
            .unwrap_err();
        assert!(matches!(&err, Error::Input { line: 1, field: Some(f), .. } if f == "gold"), "{err:?}");
        let err = m
            .parse_table(Path::new("t.csv"), b"pred;case;model;risk;gold\nA;1;a;0.6;A\nB;1;a;0.7;A\n")
            .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn mapping_requires_a_domain_source() {
        let text = MAPPING.replace("domain = \"d\"\n", "");
        assert!(TableMapping::parse(Path::new("m.toml"), &text).is_err());
    }
}
