//! Published cost and accuracy figures, kept verbatim for comparison.
//!
//! These come from full-scale models whose exact widths were never released,
//! so they are reference data, not targets for the counts in this crate.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    Teacher,
    Student,
}

/// One distillation run: model, structure, learning rate, outcome and cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillRow {
    pub model: &'static str,
    pub role: Role,
    pub structure: Option<&'static [usize]>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<u32>,
    pub last_loss: Option<f64>,
    /// COCO 2017 accuracy.
    pub accuracy: f64,
    pub params_m: f64,
    /// At a `(1, 3, 1024, 1024)` input.
    pub flops_m: f64,
    pub citation: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiouRow {
    pub system: &'static str,
    pub encoder: &'static str,
    pub dataset: &'static str,
    pub prompt: &'static str,
    pub miou: f64,
    pub citation: &'static str,
}

/// A reduction stated in prose alongside the raw figures it summarizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotedReduction {
    pub quantity: &'static str,
    pub from: f64,
    pub to: f64,
    pub percent: f64,
    pub absolute: f64,
    pub citation: &'static str,
}

const T2: &str = "Table 2";
const T3: &str = "Table 3";

const fn student(
    model: &'static str,
    structure: Option<&'static [usize]>,
    lr: f64,
    last_loss: f64,
    accuracy: f64,
    params_m: f64,
    flops_m: f64,
) -> DistillRow {
    DistillRow {
        model,
        role: Role::Student,
        structure,
        learning_rate: Some(lr),
        epochs: Some(13),
        last_loss: Some(last_loss),
        accuracy,
        params_m,
        flops_m,
        citation: T2,
    }
}

pub const DISTILL_ROWS: [DistillRow; 11] = [
    DistillRow {
        model: "Vit-T",
        role: Role::Teacher,
        structure: None,
        learning_rate: None,
        epochs: None,
        last_loss: None,
        accuracy: 0.716,
        params_m: 5.74,
        flops_m: 36742.79,
        citation: T2,
    },
    student("Resnet18", None, 0.0003, 0.00050, 0.693, 14.78, 45623.54),
    student("Vit-T", None, 0.0003, 0.00023, 0.708, 5.74, 36742.79),
    student(
        "GMF",
        Some(&[3, 3, 12, 4]),
        0.0003,
        0.00030,
        0.708,
        5.63,
        32435.40,
    ),
    student(
        "GMF",
        Some(&[3, 3, 12, 4]),
        0.0030,
        0.00033,
        0.701,
        5.63,
        32435.40,
    ),
    student(
        "GMF",
        Some(&[3, 3, 12, 4]),
        0.0010,
        0.00029,
        0.708,
        5.63,
        32435.40,
    ),
    student(
        "GMF",
        Some(&[3, 3, 12]),
        0.0003,
        0.00034,
        0.703,
        4.31,
        26808.09,
    ),
    student(
        "GMF",
        Some(&[3, 3, 4, 4]),
        0.0003,
        0.00036,
        0.701,
        3.03,
        21407.53,
    ),
    // the next three rows share one FLOP figure despite different structures
    student(
        "GMF",
        Some(&[2, 2, 6, 4]),
        0.0003,
        0.00034,
        0.702,
        3.58,
        21128.09,
    ),
    student(
        "GMF",
        Some(&[2, 2, 8, 2]),
        0.0003,
        0.00034,
        0.703,
        3.58,
        21128.09,
    ),
    student(
        "GMF",
        Some(&[2, 2, 8, 2]),
        0.0010,
        0.00033,
        0.705,
        3.58,
        21128.09,
    ),
];

pub const MIOU_ROWS: [MiouRow; 2] = [
    MiouRow {
        system: "MobileSAM",
        encoder: "Vit-T",
        dataset: "MALSD",
        prompt: "Point",
        miou: 0.623,
        citation: T3,
    },
    MiouRow {
        system: "Group-Mix SAM",
        encoder: "Groupmixformer",
        dataset: "MALSD",
        prompt: "Point",
        miou: 0.615,
        citation: T3,
    },
];

/// Teacher versus the selected `[2,2,8,2]` student.
pub const QUOTED_REDUCTIONS: [QuotedReduction; 2] = [
    QuotedReduction {
        quantity: "params",
        from: 5.74,
        to: 3.58,
        percent: 37.63,
        absolute: 2.16,
        citation: "Table 2 discussion",
    },
    QuotedReduction {
        quantity: "flops",
        from: 36742.79,
        to: 21128.09,
        percent: 42.5,
        absolute: 15614.7,
        citation: "Table 2 discussion",
    },
];

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

fn fmt_structure(s: Option<&[usize]>) -> String {
    match s {
        Some(s) => format!(
            "[{}]",
            s.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        None => "-".into(),
    }
}

/// Every ledger table as aligned text.
pub fn ledger_text() -> String {
    use std::fmt::Write as _;
    let mut out = String::from("# published distillation runs (input 1,3,1024,1024)\n");
    let _ = writeln!(
        out,
        "{:<10} {:<4} {:<12} {:>7} {:>6} {:>9} {:>8} {:>8} {:>10}  source",
        "model",
        "role",
        "structure",
        "lr",
        "epochs",
        "last_loss",
        "accuracy",
        "params_M",
        "flops_M"
    );
    for r in &DISTILL_ROWS {
        let role = match r.role {
            Role::Teacher => "T",
            Role::Student => "S",
        };
        let _ = writeln!(
            out,
            "{:<10} {:<4} {:<12} {:>7} {:>6} {:>9} {:>8.3} {:>8.2} {:>10.2}  {}",
            r.model,
            role,
            fmt_structure(r.structure),
            fmt_opt(r.learning_rate),
            fmt_opt(r.epochs),
            fmt_opt(r.last_loss),
            r.accuracy,
            r.params_m,
            r.flops_m,
            r.citation
        );
    }
    out.push_str("\n# published mIoU, reference pipeline masks as ground truth\n");
    for r in &MIOU_ROWS {
        let _ = writeln!(
            out,
            "{:<14} {:<15} {:<6} {:<6} {:.3}  {}",
            r.system, r.encoder, r.dataset, r.prompt, r.miou, r.citation
        );
    }
    out.push_str("\n# quoted reductions, teacher -> [2,2,8,2] student\n");
    for q in &QUOTED_REDUCTIONS {
        let _ = writeln!(
            out,
            "{:<7} {} -> {}: quoted {}% ({}), recomputed {:.4}%  {}",
            q.quantity,
            q.from,
            q.to,
            q.percent,
            q.absolute,
            super::percent_reduction(q.from, q.to),
            q.citation
        );
    }
    out
}
