//! Pruning flat networks (Algorithm 2), the pruning sweep, the §-style
//! cosine-similarity analysis of adjacent region boundaries, and the
//! numeric verification that adjacent regions' decision boundaries meet on
//! their shared region boundary (Theorem 2).

use std::collections::HashSet;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::analysis::evaluate;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::flatten::FlatNetwork;
use crate::model::{Configuration, Plnn};
use crate::optimize::logistic_fit;

/// Saliency of each hidden neuron: |W_i|, ascending, ties broken by lower
/// index first. The head of this list is pruned first.
pub fn neuron_criterion(flat: &FlatNetwork) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = flat.w.iter().map(|&w| w.abs()).enumerate().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    order
}

/// Algorithm 2: keep the `k` neurons with the largest output-layer weight
/// magnitudes and refit (W, B) on the reduced ReLU reservoir. Kept rows are
/// numerically identical to the input rows, in their original order.
pub fn prune_flat(
    flat: &FlatNetwork,
    train: &Dataset,
    k: usize,
    l2: f64,
) -> Result<FlatNetwork> {
    let width = flat.width();
    if k == 0 || k > width {
        return Err(Error::PruneWidth {
            requested: k,
            width,
        });
    }
    let order = neuron_criterion(flat);
    let mut kept: Vec<usize> = order[width - k..].iter().map(|&(i, _)| i).collect();
    kept.sort_unstable();
    prune_to_rows(flat, train, &kept, l2)
}

/// Refit a flat network on an explicit kept-row set (ascending indices).
fn prune_to_rows(
    flat: &FlatNetwork,
    train: &Dataset,
    kept: &[usize],
    l2: f64,
) -> Result<FlatNetwork> {
    let m = flat.m.select(ndarray::Axis(0), kept);
    let v = Array1::from_iter(kept.iter().map(|&i| flat.v[i]));
    let provenance = kept.iter().map(|&i| flat.provenance[i].clone()).collect();
    let reduced = FlatNetwork {
        m,
        v,
        w: Array1::zeros(kept.len()),
        b: 0.0,
        provenance,
    };
    let features = reduced.reservoir(train.x.view());
    let fit = logistic_fit(features.view(), train.labels_f64().view(), l2)?;
    Ok(FlatNetwork {
        w: fit.w,
        b: fit.b,
        ..reduced
    })
}

/// How a sweep walks down the widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneSchedule {
    /// Delete one neuron per step (the reliable default).
    OneAtATime,
    /// Halve the width per step while above `threshold`, then one at a
    /// time — the bulk-descent protocol used for large experiment grids.
    HalveThenStep { threshold: usize },
}

/// One sweep measurement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub width: usize,
    pub accuracy: f64,
    pub auc: f64,
}

/// Prune `flat` stepwise down to width 1, refitting at each width and
/// recording test metrics, the starting width included. `stop_below`
/// optionally ends the sweep once test accuracy falls under the threshold.
pub fn prune_sweep(
    flat: &FlatNetwork,
    train: &Dataset,
    test: &Dataset,
    l2: f64,
    schedule: PruneSchedule,
    stop_below: Option<f64>,
) -> Result<Vec<SweepPoint>> {
    let mut current = flat.clone();
    let mut points = Vec::new();
    loop {
        let metrics = evaluate(&current.to_plnn(), test)?;
        points.push(SweepPoint {
            width: current.width(),
            accuracy: metrics.accuracy,
            auc: metrics.auc,
        });
        if let Some(threshold) = stop_below {
            if metrics.accuracy < threshold {
                break;
            }
        }
        let width = current.width();
        if width == 1 {
            break;
        }
        let next = match schedule {
            PruneSchedule::OneAtATime => width - 1,
            PruneSchedule::HalveThenStep { threshold } => {
                if width > threshold {
                    width - width / 2
                } else {
                    width - 1
                }
            }
        };
        current = prune_flat(&current, train, next, l2)?;
    }
    Ok(points)
}

/// §-style boundary cosine for hidden neuron `i`: the cosine between the
/// region-equation normals of the two all-else-on configurations that
/// differ only in bit `i` (bit 1 in C₁, 0 in C₂). Approaches 1 as W_i → 0,
/// which is why |W_i| ranks prunability.
pub fn boundary_cosine(flat: &FlatNetwork, i: usize) -> Result<f64> {
    let width = flat.width();
    if i >= width {
        return Err(Error::IndexOutOfRange {
            what: "neuron",
            index: i,
            len: width,
        });
    }
    let net = flat.to_plnn();
    let c1 = Configuration::new(vec![true; width]);
    let c2 = c1.with_bit_flipped(i);
    let n1 = net.linear_equation(&c1)?;
    let n2 = net.linear_equation(&c2)?;
    let (a, b) = (n1.w, n2.w);
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(a.dot(&b) / (na * nb))
}

/// Outcome of [`verify_theorem2`] on one network.
#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Report {
    /// Adjacent nontrivial region pairs whose intersection point was tested.
    pub pairs_checked: usize,
    /// Pairs whose equations coincide exactly (zero downstream weight).
    pub identical_equation_pairs: usize,
    pub max_residual: f64,
    pub violations: Vec<Theorem2Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem2Violation {
    pub c1: String,
    pub c2: String,
    pub residual: f64,
}

impl Theorem2Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Numerically verify Theorem 2: wherever two adjacent nontrivial regions
/// meet, a point z on the shared region boundary that lies on one region's
/// decision boundary (Ŵ^{C₁}·z + B̂^{C₁} = 0, found by a 1-D root solve
/// along the shared hyperplane) must satisfy the other's within `tol`.
///
/// Adjacent pairs are discovered from data: each probe's region is pushed
/// across each of its bounding hyperplanes (±ε along the normal,
/// ε = 1e−4·scale) and the pair is kept when exactly one bit flips.
pub fn verify_theorem2(net: &Plnn, probes: ArrayView2<f64>, tol: f64) -> Result<Theorem2Report> {
    let configs = net.configurations_batch(probes)?;
    // One representative probe per distinct configuration.
    let mut reps: Vec<(Configuration, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for (row, c) in configs.into_iter().enumerate() {
        if seen.insert(c.clone()) {
            reps.push((c, row));
        }
    }
    let mut report = Theorem2Report {
        pairs_checked: 0,
        identical_equation_pairs: 0,
        max_residual: 0.0,
        violations: Vec::new(),
    };
    let mut tested: HashSet<(Configuration, Configuration)> = HashSet::new();
    let n_bits = net.num_hidden_neurons();
    for (c, row) in &reps {
        if net.is_trivial(c)? {
            continue;
        }
        let x0 = probes.row(*row);
        let eps = 1e-4 * norm(x0).max(1.0);
        for bit in 0..n_bits {
            let (layer, neuron) = net.locate_neuron(bit);
            let (h, hb) = net.zero_activation_hyperplane(c, layer, neuron)?;
            let hn = norm(h.view());
            if hn < 1e-12 {
                continue; // degenerate hyperplane, nothing to cross
            }
            // Project the representative onto the hyperplane, then straddle.
            let z0 = &x0.to_owned() - &(&h * ((h.dot(&x0) + hb) / (hn * hn)));
            let unit = &h / hn;
            let zp = &z0 + &(&unit * eps);
            let zm = &z0 - &(&unit * eps);
            let cp = net.configuration_of(zp.view())?;
            let cm = net.configuration_of(zm.view())?;
            let differing: Vec<usize> = (0..n_bits).filter(|&j| cp.bit(j) != cm.bit(j)).collect();
            let [flip] = differing.as_slice() else {
                continue; // crossed a corner or nothing; not a clean facet
            };
            if net.is_trivial(&cp)? || net.is_trivial(&cm)? {
                continue; // Theorem 2 concerns nontrivial pairs
            }
            let pair_key = if cp < cm {
                (cp.clone(), cm.clone())
            } else {
                (cm.clone(), cp.clone())
            };
            if !tested.insert(pair_key) {
                continue;
            }
            let eq1 = net.linear_equation(&cp)?;
            let eq2 = net.linear_equation(&cm)?;
            report.pairs_checked += 1;
            if eq1 == eq2 {
                // v_i = 0: both regions share one equation, residual is 0.
                report.identical_equation_pairs += 1;
                continue;
            }
            // The shared facet hyperplane of the flipped neuron (depends
            // only on bits before its layer, which the pair agrees on).
            let (fl, fnr) = net.locate_neuron(*flip);
            let (h2, hb2) = net.zero_activation_hyperplane(&cp, fl, fnr)?;
            let h2n2 = h2.dot(&h2);
            if h2n2 < 1e-24 {
                continue;
            }
            let z1 = &z0 - &(&h2 * ((h2.dot(&z0) + hb2) / h2n2));
            // Root of eq1 along the facet: walk the in-plane component of
            // its normal.
            let d = &eq1.w - &(&h2 * (eq1.w.dot(&h2) / h2n2));
            let dn2 = d.dot(&d);
            let r1 = eq1.eval(z1.view());
            let z_star = if dn2 < 1e-20 * eq1.w.dot(&eq1.w).max(1e-300) {
                // Decision boundary parallel to the facet: it either misses
                // the facet entirely or contains it.
                if r1.abs() > tol {
                    report.pairs_checked -= 1;
                    continue;
                }
                z1
            } else {
                let t = -r1 / dn2;
                &z1 + &(&d * t)
            };
            let residual = eq2.eval(z_star.view()).abs();
            if residual > report.max_residual {
                report.max_residual = residual;
            }
            if residual >= tol {
                report.violations.push(Theorem2Violation {
                    c1: cp.bitstring(),
                    c2: cm.bitstring(),
                    residual,
                });
            }
        }
    }
    Ok(report)
}
