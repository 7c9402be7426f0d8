//! Per-structure featurization combining the electrostatic and topological branches.

use serde::{Deserialize, Serialize};

use crate::coulomb::EnergyUnits;
use crate::electro::{electro_features, feature_count, ElectroFeatureVector, ORDERING_VERSION};
use crate::error::Result;
use crate::pipeline::{LabeledRecord, Labels, Manifest, MANIFEST_SCHEMA_VERSION};
use crate::structure::ProteinStructure;
use crate::topo::{channel_order, topo_features, TopoFeatureVector, TopoParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub order: usize,
    pub levels: usize,
    pub topo: TopoParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            order: 2,
            levels: 1,
            topo: TopoParams::default(),
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        feature_count(self.order, self.levels)?;
        self.topo.validate()
    }

    pub fn electro_len(&self) -> usize {
        feature_count(self.order, self.levels).unwrap_or(0)
    }

    pub fn topo_len(&self) -> usize {
        12 * self.topo.n_bins
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFeatures {
    pub electro: ElectroFeatureVector,
    pub topo: TopoFeatureVector,
}

impl StructureFeatures {
    pub fn into_record(self, id: &str) -> LabeledRecord {
        LabeledRecord {
            id: id.to_string(),
            electro: self.electro.values,
            topo: self.topo.flat(),
            labels: Labels::default(),
        }
    }
}

pub fn featurize(structure: &ProteinStructure, params: &FeatureParams) -> Result<StructureFeatures> {
    params.validate()?;
    let electro = electro_features(structure.atoms(), params.order, params.levels)?;
    let topo = topo_features(structure, &params.topo)?;
    Ok(StructureFeatures { electro, topo })
}

/// Human-readable channel names in canonical order, e.g. `AllCarbon/H1/Birth`.
pub fn channel_names() -> Vec<String> {
    channel_order()
        .iter()
        .map(|k| format!("{:?}/H{}/{:?}", k.selector, k.dim, k.kind))
        .collect()
}

/// Manifest describing a featurization run; scaler, IQR and split sections start empty.
pub fn manifest_for(params: &FeatureParams, theta: f64, eps1: f64, units: EnergyUnits, seed: u64) -> Result<Manifest> {
    Ok(Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        ordering_version: ORDERING_VERSION.to_string(),
        order: params.order,
        levels: params.levels,
        feature_count: feature_count(params.order, params.levels)?,
        theta,
        eps1,
        units,
        unit_constant: units.constant(),
        l_scale: params.topo.scale,
        n_bins: params.topo.n_bins,
        max_dim: params.topo.max_dim,
        filtration_scale: params.topo.filtration_scale,
        max_simplices: params.topo.max_simplices,
        topo_length: params.topo_len(),
        channel_order: channel_names(),
        seed,
        scalers: None,
        iqr: None,
        split: None,
    })
}
