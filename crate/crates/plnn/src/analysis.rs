//! Metrics and statistics: accuracy, AUC, the paired t-test used for the
//! flattening experiments, and the per-region census behind the
//! interpretation filters.

use std::collections::HashMap;

use ndarray::ArrayView1;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Plnn, Region};

/// Fraction of instances with (p ≥ 0.5) equal to the label; the ≥ makes
/// ties predict class 1, matching the sigmoid midpoint boundary.
pub fn accuracy(net: &Plnn, data: &Dataset) -> Result<f64> {
    let logits = net.logits_batch(data.x.view())?;
    let hits = logits
        .iter()
        .zip(data.y.iter())
        .filter(|(&z, &t)| u8::from(z >= 0.0) == t)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Mann–Whitney AUC: probability that a random positive scores above a
/// random negative, ties counted half. Computed with midranks.
pub fn auc(scores: ArrayView1<f64>, y: ArrayView1<u8>) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: y.len(),
        });
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("auc scores".into()));
    }
    let n1 = y.iter().filter(|&&t| t == 1).count();
    let n0 = y.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::TrainingData(
            "auc needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tied runs, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if y[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    Ok((rank_sum_pos - (n1 * (n1 + 1)) as f64 / 2.0) / (n0 as f64 * n1 as f64))
}

/// Both test metrics from one forward pass.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub n: usize,
}

pub fn evaluate(net: &Plnn, data: &Dataset) -> Result<Metrics> {
    let logits = net.logits_batch(data.x.view())?;
    let hits = logits
        .iter()
        .zip(data.y.iter())
        .filter(|(&z, &t)| u8::from(z >= 0.0) == t)
        .count();
    Ok(Metrics {
        accuracy: hits as f64 / data.len() as f64,
        auc: auc(logits.view(), data.y.view())?,
        n: data.len(),
    })
}

/// Paired t-test result, mirroring the experiment table columns. Positive
/// `t` means the new (flattened) accuracies beat the originals.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairedT {
    pub n: usize,
    pub mean_orig: f64,
    pub mean_new: f64,
    pub sd_diff: f64,
    pub t: f64,
}

/// Paired t-test on matched accuracy lists: d = new − orig,
/// t = mean(d) / (sd(d)/√n) with the sample (n−1) standard deviation.
pub fn paired_t(orig: &[f64], new: &[f64]) -> Result<PairedT> {
    if orig.len() != new.len() {
        return Err(Error::LengthMismatch {
            left: orig.len(),
            right: new.len(),
        });
    }
    let n = orig.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "paired t-test needs n ≥ 2".into(),
        ));
    }
    let nf = n as f64;
    let mean_orig = orig.iter().sum::<f64>() / nf;
    let mean_new = new.iter().sum::<f64>() / nf;
    let mean_diff = mean_new - mean_orig;
    let ss: f64 = orig
        .iter()
        .zip(new.iter())
        .map(|(&a, &b)| {
            let d = b - a - mean_diff;
            d * d
        })
        .sum();
    let sd_diff = (ss / (nf - 1.0)).sqrt();
    if sd_diff == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(PairedT {
        n,
        mean_orig,
        mean_new,
        sd_diff,
        t: mean_diff / (sd_diff / nf.sqrt()),
    })
}

/// The t statistic straight from summary numbers, as published in results
/// tables: t = mean_diff / (sd_diff / √n).
pub fn paired_t_from_summary(n: usize, mean_diff: f64, sd_diff: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "paired t-test needs n ≥ 2".into(),
        ));
    }
    if !(sd_diff > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(mean_diff / (sd_diff / (n as f64).sqrt()))
}

/// Group a dataset by configuration and attach each region's structure and
/// instance statistics. Regions are ordered by first occurrence in `data`.
pub fn region_census(net: &Plnn, data: &Dataset) -> Result<Vec<Region>> {
    let configs = net.configurations_batch(data.x.view())?;
    let mut index: HashMap<&crate::model::Configuration, usize> = HashMap::new();
    let mut regions: Vec<Region> = Vec::new();
    for (c, &label) in configs.iter().zip(data.y.iter()) {
        let slot = match index.get(c) {
            Some(&s) => s,
            None => {
                let equation = net.linear_equation(c)?;
                let region = Region {
                    config: c.clone(),
                    inequalities: net.region_inequalities(c)?,
                    trivial: net.is_trivial(c)?,
                    equation,
                    instance_count: 0,
                    class_counts: (0, 0),
                };
                regions.push(region);
                index.insert(c, regions.len() - 1);
                regions.len() - 1
            }
        };
        let region = &mut regions[slot];
        region.instance_count += 1;
        if label == 0 {
            region.class_counts.0 += 1;
        } else {
            region.class_counts.1 += 1;
        }
    }
    Ok(regions)
}
