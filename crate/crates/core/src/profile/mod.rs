//! Parameter and FLOP accounting, structure comparison and the published-figures ledger.

mod analytic;
pub mod ledger;

use std::fmt::Write as _;

pub use analytic::{
    count_block, count_flops, count_params, LayerRow, ProfileReport, FLOP_CONVENTION,
};

use crate::encoders::EncoderSpec;
use crate::error::Result;

/// `(a - b) / a` in percent; 0 when `a` is 0.
pub fn percent_reduction(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        (a - b) / a * 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureCost {
    pub name: String,
    pub params: u64,
    pub flops: u64,
}

/// Reduction of `candidate` relative to `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReduction {
    pub reference: String,
    pub candidate: String,
    pub params_percent: f64,
    pub flops_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub input_shape: Vec<usize>,
    /// Ascending by parameter count, then FLOPs.
    pub entries: Vec<StructureCost>,
    pub pairs: Vec<PairReduction>,
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let shape = self
            .input_shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = format!("# input: {shape}\n# flops: {FLOP_CONVENTION}\n");
        let w = self
            .entries
            .iter()
            .map(|e| e.name.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let _ = writeln!(out, "{:<w$}  {:>14}  {:>20}", "model", "params", "flops");
        for e in &self.entries {
            let _ = writeln!(out, "{:<w$}  {:>14}  {:>20}", e.name, e.params, e.flops);
        }
        out.push_str("\n# reduction = (reference - candidate) / reference\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{} -> {}: params {:.2}%, flops {:.2}%",
                p.reference, p.candidate, p.params_percent, p.flops_percent
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("reference,candidate,params_percent,flops_percent\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4}",
                p.reference, p.candidate, p.params_percent, p.flops_percent
            );
        }
        out
    }
}

/// Costs of every spec at `input_shape`, sorted, with all ordered pairwise reductions.
pub fn compare_structures(specs: &[EncoderSpec], input_shape: &[usize]) -> Result<Comparison> {
    let mut entries = specs
        .iter()
        .map(|s| {
            let r = count_flops(s, input_shape)?;
            Ok(StructureCost {
                name: s.name.clone(),
                params: r.total_params(),
                flops: r.total_flops(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by_key(|e| (e.params, e.flops));
    let mut pairs = Vec::new();
    for a in &entries {
        for b in &entries {
            if std::ptr::eq(a, b) {
                continue;
            }
            pairs.push(PairReduction {
                reference: a.name.clone(),
                candidate: b.name.clone(),
                params_percent: percent_reduction(a.params as f64, b.params as f64),
                flops_percent: percent_reduction(a.flops as f64, b.flops as f64),
            });
        }
    }
    Ok(Comparison {
        input_shape: input_shape.to_vec(),
        entries,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::StageSpec;

    #[test]
    fn self_comparison_is_zero() {
        assert_eq!(percent_reduction(5.0, 5.0), 0.0);
        let s = EncoderSpec::student_gmf(
            "a",
            StageSpec::new(&[1, 1, 1, 1], &[8, 8, 8, 8], &[1, 1, 1, 1]),
            &[1, 3],
        );
        let mut b = s.clone();
        b.name = "b".into();
        let c = compare_structures(&[s, b], &[1, 3, 32, 32]).unwrap();
        assert_eq!(c.pairs.len(), 2);
        assert!(c
            .pairs
            .iter()
            .all(|p| p.params_percent == 0.0 && p.flops_percent == 0.0));
    }
}
