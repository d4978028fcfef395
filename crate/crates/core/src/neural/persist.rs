//! Plain-text persistence for networks and their settings.
//!
//! A document is a list of named sections, each holding `key = value` lines:
//!
//! ```text
//! [network f]
//! layers = 8 6 1
//! weights.0 = 1.2500000000000000e-1 ...
//! bias.0 = ...
//! ```
//!
//! Reals are written with 17 significant digits so a write/read cycle
//! reproduces every double exactly. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Affine, Layer, Mlp};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn set_real(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.set(key, fmt_real(value))
    }

    pub fn set_reals(&mut self, key: impl Into<String>, values: &[f64]) -> &mut Self {
        let joined = values.iter().map(|&v| fmt_real(v)).collect::<Vec<_>>().join(" ");
        self.set(key, joined)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("section [{}] is missing `{key}`", self.name),
        })
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| Error::Parse {
            line: 0,
            reason: format!("[{}] {key}: cannot parse `{raw}`", self.name),
        })
    }

    pub fn reals(&self, key: &str) -> Result<Vec<f64>> {
        parse_list(self.require(key)?, &self.name, key)
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, section: &str, key: &str) -> Result<Vec<T>> {
    raw.split_whitespace()
        .map(|tok| {
            tok.parse().map_err(|_| Error::Parse {
                line: 0,
                reason: format!("[{section}] {key}: bad value `{tok}`"),
            })
        })
        .collect()
}

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("missing section [{name}]"),
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", section.name);
            for (k, v) in &section.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                doc.sections.push(Section::new(name.trim()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let section = doc.sections.last_mut().ok_or_else(|| Error::Parse {
                line: idx + 1,
                reason: "entry before the first section header".into(),
            })?;
            section.entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

pub fn mlp_section(name: &str, net: &Mlp) -> Section {
    let mut s = Section::new(format!("network {name}"));
    let sizes = net.layer_sizes().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
    s.set("layers", sizes);
    for (i, layer) in net.layers().iter().enumerate() {
        s.set_reals(format!("weights.{i}"), &layer.weights);
        s.set_reals(format!("bias.{i}"), &layer.bias);
    }
    s
}

pub fn read_mlp(doc: &Document, name: &str) -> Result<Mlp> {
    let s = doc.require(&format!("network {name}"))?;
    let sizes: Vec<usize> = parse_list(s.require("layers")?, &s.name, "layers")?;
    if sizes.len() < 2 {
        return Err(Error::Parse {
            line: 0,
            reason: format!("[{}] needs at least two layer sizes", s.name),
        });
    }
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            Ok(Layer {
                inputs: w[0],
                outputs: w[1],
                weights: s.reals(&format!("weights.{i}"))?,
                bias: s.reals(&format!("bias.{i}"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Mlp::from_layers(layers)
}

pub fn scaling_section(name: &str, signals: &[(&str, Affine)]) -> Section {
    let mut s = Section::new(name);
    for (signal, a) in signals {
        s.set_real(format!("{signal}_offset"), a.offset);
        s.set_real(format!("{signal}_scale"), a.scale);
    }
    s
}

pub fn read_scaling(section: &Section, signal: &str) -> Result<Affine> {
    Ok(Affine {
        offset: section.parse(&format!("{signal}_offset"))?,
        scale: section.parse(&format!("{signal}_scale"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn networks_round_trip_exactly(seed in any::<u64>(), hidden in 1usize..8) {
            let net = Mlp::new(&[3, hidden, 2], seed);
            let mut doc = Document::default();
            doc.push(mlp_section("f", &net));
            let back = read_mlp(&Document::parse(&doc.render()).unwrap(), "f").unwrap();
            prop_assert_eq!(back, net);
        }

        #[test]
        fn reals_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = Document::parse("[a]\nnot a pair\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let text = "[network g]\nlayers = 2 1\nweights.0 = 1.0\nbias.0 = 0.0\n";
        assert!(read_mlp(&Document::parse(text).unwrap(), "g").is_err());
    }
}
