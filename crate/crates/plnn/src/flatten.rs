//! Flattening: harvest the linear equations of the regions a network
//! actually uses and rebuild them as a single hidden layer, training only
//! the output unit (a convex logistic problem).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Configuration, Layer, Plnn};
use crate::optimize::logistic_fit;

/// A single-hidden-layer network `σ(W·ReLU(MX+V)+B)` whose hidden neurons
/// are harvested region equations. `provenance[i]` lists every active
/// configuration whose equation equals row `i` (duplicates collapse).
#[derive(Debug, Clone)]
pub struct FlatNetwork {
    pub m: Array2<f64>,
    pub v: Array1<f64>,
    pub w: Array1<f64>,
    pub b: f64,
    pub provenance: Vec<Vec<Configuration>>,
}

/// What [`flatten`] produced: a flat network, or the original model handed
/// back untouched because no region carried a usable (nonzero-weight)
/// equation.
#[derive(Debug, Clone)]
pub enum FlattenOutcome {
    Flat(FlatNetwork),
    Original(Plnn),
}

impl FlattenOutcome {
    pub fn as_flat(&self) -> Option<&FlatNetwork> {
        match self {
            FlattenOutcome::Flat(f) => Some(f),
            FlattenOutcome::Original(_) => None,
        }
    }
}

impl FlatNetwork {
    /// Hidden-layer width k.
    pub fn width(&self) -> usize {
        self.m.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.m.ncols()
    }

    /// The same model as a two-layer [`Plnn`], consumable by every
    /// structure and metric routine.
    pub fn to_plnn(&self) -> Plnn {
        let k = self.width();
        let out = self
            .w
            .view()
            .into_shape_with_order((1, k))
            .expect("row vector")
            .to_owned();
        Plnn::new(vec![
            Layer::new(self.m.clone(), self.v.clone()),
            Layer::new(out, Array1::from_elem(1, self.b)),
        ])
        .expect("flat network shapes are consistent by construction")
    }

    /// Reinterpret a two-layer PLNN as a flat network. Provenance is
    /// carried alongside (one list per hidden neuron).
    pub fn from_plnn(net: &Plnn, provenance: Vec<Vec<Configuration>>) -> Result<Self> {
        if net.num_layers() != 2 {
            return Err(Error::InvalidNetwork(format!(
                "a flat network has exactly 2 layers, got {}",
                net.num_layers()
            )));
        }
        let k = net.layers()[0].out_dim();
        if provenance.len() != k {
            return Err(Error::LengthMismatch {
                left: provenance.len(),
                right: k,
            });
        }
        Ok(FlatNetwork {
            m: net.layers()[0].weights.clone(),
            v: net.layers()[0].bias.clone(),
            w: net.layers()[1].weights.row(0).to_owned(),
            b: net.layers()[1].bias[0],
            provenance,
        })
    }

    /// Reservoir features `ReLU(MX + V)` for a batch of rows.
    pub fn reservoir(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut f = x.dot(&self.m.t());
        f += &self.v;
        f.mapv_inplace(|v| v.max(0.0));
        f
    }

    fn sidecar_path(model_path: &Path) -> PathBuf {
        model_path.with_extension("provenance.json")
    }

    /// Write the model in the standard two-layer JSON format plus a
    /// `.provenance.json` sidecar of configuration bitstrings per neuron.
    pub fn save(&self, model_path: impl AsRef<Path>) -> Result<()> {
        let model_path = model_path.as_ref();
        self.to_plnn().save(model_path)?;
        let sidecar = ProvenanceJson {
            provenance: self
                .provenance
                .iter()
                .map(|cs| cs.iter().map(Configuration::bitstring).collect())
                .collect(),
        };
        std::fs::write(
            Self::sidecar_path(model_path),
            serde_json::to_string_pretty(&sidecar).expect("serializable"),
        )?;
        Ok(())
    }

    /// Read a flat model; the provenance sidecar is used when present and
    /// left empty otherwise (pruning does not need it).
    pub fn load(model_path: impl AsRef<Path>) -> Result<Self> {
        let model_path = model_path.as_ref();
        let net = Plnn::load(model_path)?;
        let k = net.layers()[0].out_dim();
        let sidecar = Self::sidecar_path(model_path);
        let provenance = if sidecar.exists() {
            let raw: ProvenanceJson = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
            if raw.provenance.len() != k {
                return Err(Error::DataFormat(format!(
                    "provenance lists {} neurons, model has {k}",
                    raw.provenance.len()
                )));
            }
            raw.provenance
                .into_iter()
                .map(|cs| cs.iter().map(|s| Configuration::parse(s)).collect())
                .collect::<Result<Vec<Vec<Configuration>>>>()?
        } else {
            vec![Vec::new(); k]
        };
        Self::from_plnn(&net, provenance)
    }
}

#[derive(Serialize, Deserialize)]
struct ProvenanceJson {
    provenance: Vec<Vec<String>>,
}

/// Distinct configurations observed over the rows of `x`, with counts, in
/// first-occurrence order.
pub fn active_configurations(
    net: &Plnn,
    x: ArrayView2<f64>,
) -> Result<Vec<(Configuration, usize)>> {
    let configs = net.configurations_batch(x)?;
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut out: Vec<(Configuration, usize)> = Vec::new();
    for c in configs {
        match index.get(&c) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(c.clone(), out.len());
                out.push((c, 1));
            }
        }
    }
    Ok(out)
}

/// Algorithm 1. Harvest the active configurations of `net` on the training
/// features, keep each distinct nonzero-weight linear equation as one
/// hidden neuron (M row, V entry), and fit the output layer by L2-penalized
/// logistic regression on the ReLU reservoir. If no usable equation exists
/// (every active region is trivial), the original network is returned.
pub fn flatten(net: &Plnn, train: &Dataset, l2: f64) -> Result<FlattenOutcome> {
    let configs = active_configurations(net, train.x.view())?;
    let input_dim = net.input_dim();
    let mut rows: Vec<(Array1<f64>, f64)> = Vec::new();
    let mut provenance: Vec<Vec<Configuration>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (c, _) in configs {
        let eq = net.linear_equation(&c)?;
        if eq.is_zero_weight() {
            continue;
        }
        // Exact-bits key: masking produces exact zeros and exact duplicates.
        let key: Vec<u64> = eq
            .w
            .iter()
            .chain(std::iter::once(&eq.b))
            .map(|v| v.to_bits())
            .collect();
        match seen.get(&key) {
            Some(&i) => provenance[i].push(c),
            None => {
                seen.insert(key, rows.len());
                rows.push((eq.w, eq.b));
                provenance.push(vec![c]);
            }
        }
    }
    if rows.is_empty() {
        return Ok(FlattenOutcome::Original(net.clone()));
    }
    let k = rows.len();
    let mut m = Array2::zeros((k, input_dim));
    let mut v = Array1::zeros(k);
    for (i, (w, b)) in rows.into_iter().enumerate() {
        m.row_mut(i).assign(&w);
        v[i] = b;
    }
    // Reservoir features and the convex output-layer fit.
    let mut features = train.x.dot(&m.t());
    features += &v;
    features.mapv_inplace(|z| z.max(0.0));
    let fit = logistic_fit(features.view(), train.labels_f64().view(), l2)?;
    Ok(FlattenOutcome::Flat(FlatNetwork {
        m,
        v,
        w: fit.w,
        b: fit.b,
        provenance,
    }))
}
