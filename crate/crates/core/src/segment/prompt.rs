//! Prompts and prompt files.
//!
//! One prompt per line, coordinates in pixels:
//!
//! ```text
//! # item_id kind coordinates
//! synth_0000 point 31.5 20.0
//! synth_0001 box 4 4 40 36
//! ```

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::io::{Dataset, DatasetItem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prompt {
    Point { x: f64, y: f64 },
    Box { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Prompt {
    pub fn kind(&self) -> &'static str {
        match self {
            Prompt::Point { .. } => "point",
            Prompt::Box { .. } => "box",
        }
    }

    /// Points must lie in `[0, W) × [0, H)`; boxes need `0 ≤ x0 < x1 ≤ W` and likewise in y.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        let (h, w) = (height as f64, width as f64);
        let ok = match *self {
            Prompt::Point { x, y } => (0.0..w).contains(&x) && (0.0..h).contains(&y),
            Prompt::Box { x0, y0, x1, y1 } => {
                0.0 <= x0 && x0 < x1 && x1 <= w && 0.0 <= y0 && y0 < y1 && y1 <= h
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Prompt(format!(
                "{self} is outside a {width}x{height} image"
            )))
        }
    }
}

impl std::fmt::Display for Prompt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prompt::Point { x, y } => write!(f, "point {x} {y}"),
            Prompt::Box { x0, y0, x1, y1 } => write!(f, "box {x0} {y0} {x1} {y1}"),
        }
    }
}

/// Prompts keyed by item id, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptSet {
    prompts: IndexMap<String, Prompt>,
}

impl PromptSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: &str, prompt: Prompt) -> Result<()> {
        if self.prompts.insert(id.to_string(), prompt).is_some() {
            return Err(Error::Prompt(format!("two prompts for item {id:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Prompt> {
        self.prompts.get(id)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut set = PromptSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |detail: &str| Error::Prompt(format!("line {}: {detail}", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            let nums = fields[2.min(fields.len())..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| bad(&format!("{f:?} is not a number")))
                })
                .collect::<Result<Vec<_>>>()?;
            let prompt = match (fields.get(1).copied(), nums.as_slice()) {
                (Some("point"), &[x, y]) => Prompt::Point { x, y },
                (Some("box"), &[x0, y0, x1, y1]) => Prompt::Box { x0, y0, x1, y1 },
                _ => return Err(bad("expected `id point x y` or `id box x0 y0 x1 y1`")),
            };
            set.insert(fields[0], prompt)?;
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# item_id kind coordinates (pixels)\n");
        for (id, p) in &self.prompts {
            let _ = writeln!(out, "{id} {p}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// One prompt per dataset item, in dataset order.
    pub fn for_dataset(&self, dataset: &Dataset) -> Result<Vec<Prompt>> {
        if self.len() != dataset.len() {
            return Err(Error::Protocol(format!(
                "{} prompts for {} images",
                self.len(),
                dataset.len()
            )));
        }
        dataset
            .items
            .iter()
            .map(|item| {
                self.get(&item.id)
                    .copied()
                    .ok_or_else(|| Error::Protocol(format!("no prompt for item {:?}", item.id)))
            })
            .collect()
    }
}

/// Centre of the topmost drawn shape, or the image centre if there are none.
pub fn point_prompt(item: &DatasetItem) -> Prompt {
    match item.shapes.last() {
        Some(s) => Prompt::Point {
            x: s.center.0,
            y: s.center.1,
        },
        None => {
            let s = item.image.shape();
            Prompt::Point {
                x: s[2] as f64 / 2.0,
                y: s[1] as f64 / 2.0,
            }
        }
    }
}

/// Bounding box of the topmost drawn shape, or the whole image.
pub fn box_prompt(item: &DatasetItem) -> Prompt {
    let s = item.image.shape();
    match item.shapes.last() {
        Some(shape) => {
            let (x0, y0, x1, y1) = shape.bbox;
            Prompt::Box {
                x0: x0.max(0.0),
                y0: y0.max(0.0),
                x1: x1.min(s[2] as f64),
                y1: y1.min(s[1] as f64),
            }
        }
        None => Prompt::Box {
            x0: 0.0,
            y0: 0.0,
            x1: s[2] as f64,
            y1: s[1] as f64,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_file_round_trips() {
        let mut set = PromptSet::new();
        set.insert("a", Prompt::Point { x: 1.5, y: 2.0 }).unwrap();
        set.insert(
            "b",
            Prompt::Box {
                x0: 0.0,
                y0: 1.0,
                x1: 8.0,
                y1: 9.5,
            },
        )
        .unwrap();
        assert_eq!(PromptSet::parse(&set.to_text()).unwrap(), set);
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(PromptSet::parse("a point 1\n").is_err());
        assert!(PromptSet::parse("a circle 1 2\n").is_err());
        assert!(PromptSet::parse("a point 1 2\na point 3 4\n").is_err());
    }

    #[test]
    fn bounds_are_checked() {
        assert!(Prompt::Point { x: 16.0, y: 0.0 }.validate(16, 16).is_err());
        assert!(Prompt::Point { x: 15.9, y: 0.0 }.validate(16, 16).is_ok());
        assert!(Prompt::Box {
            x0: 4.0,
            y0: 0.0,
            x1: 4.0,
            y1: 3.0
        }
        .validate(16, 16)
        .is_err());
        assert!(Prompt::Box {
            x0: 0.0,
            y0: 0.0,
            x1: 16.0,
            y1: 16.0
        }
        .validate(16, 16)
        .is_ok());
    }
}
