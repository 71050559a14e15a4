use std::fmt::Write as _;

use super::train::TeacherSource;
use crate::encoders::{encode_image, EncoderModel};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::numerics::{huber_term, Element};
use crate::parallel;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub id: String,
    /// Mean elementwise Huber loss.
    pub huber: f64,
    pub mse: f64,
}

/// Per-item feature distances between a student and its teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub rows: Vec<DistanceRow>,
    pub mean_huber: f64,
    pub mean_mse: f64,
}

impl DistanceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_id,huber,mse\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e}", r.id, r.huber, r.mse);
        }
        let _ = writeln!(out, "mean,{:e},{:e}", self.mean_huber, self.mean_mse);
        out
    }
}

pub fn feature_distance_report<T: Element>(
    student: &EncoderModel<T>,
    teacher: TeacherSource<'_, T>,
    dataset: &Dataset,
    huber_delta: f64,
    jobs: usize,
) -> Result<DistanceReport> {
    if dataset.is_empty() {
        return Err(Error::Config("dataset has no items".into()));
    }
    let rows = parallel::try_map(jobs, &dataset.items, |item| {
        let s = encode_image(student, &item.image.cast())?.into_tensor();
        let t = teacher.targets(&[item])?;
        if s.shape() != t.shape() {
            return Err(Error::dim(
                "feature_distance_report",
                format!(
                    "student {:?} vs teacher {:?} for {:?}",
                    s.shape(),
                    t.shape(),
                    item.id
                ),
            ));
        }
        let (s, t) = (s.to_f64_vec(), t.to_f64_vec());
        let n = s.len() as f64;
        let (mut huber, mut mse) = (0.0, 0.0);
        for (a, b) in s.iter().zip(&t) {
            huber += huber_term(a - b, huber_delta);
            mse += (a - b) * (a - b);
        }
        Ok(DistanceRow {
            id: item.id.clone(),
            huber: huber / n,
            mse: mse / n,
        })
    })?;
    let n = rows.len() as f64;
    Ok(DistanceReport {
        mean_huber: rows.iter().map(|r| r.huber).sum::<f64>() / n,
        mean_mse: rows.iter().map(|r| r.mse).sum::<f64>() / n,
        rows,
    })
}
