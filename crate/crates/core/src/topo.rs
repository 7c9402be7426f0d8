//! Binned birth/death/persistence channels over Betti-1 and Betti-2 barcodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rips::{barcode_for_selection, Barcode, RipsParams, DEFAULT_MAX_SIMPLICES};
use crate::structure::{AtomSelector, ProteinStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Birth,
    Death,
    Persistence,
}

pub const CHANNEL_SELECTORS: [AtomSelector; 2] = [AtomSelector::AllCarbon, AtomSelector::AllHeavy];
pub const CHANNEL_DIMS: [usize; 2] = [1, 2];
pub const CHANNEL_KINDS: [ChannelKind; 3] =
    [ChannelKind::Birth, ChannelKind::Death, ChannelKind::Persistence];

/// Identifies one of the twelve channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelKey {
    pub selector: AtomSelector,
    pub dim: usize,
    pub kind: ChannelKind,
}

/// The twelve channels in canonical order: selector, then dimension, then kind.
pub fn channel_order() -> Vec<ChannelKey> {
    let mut keys = Vec::with_capacity(12);
    for selector in CHANNEL_SELECTORS {
        for dim in CHANNEL_DIMS {
            for kind in CHANNEL_KINDS {
                keys.push(ChannelKey { selector, dim, kind });
            }
        }
    }
    keys
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedChannel {
    pub kind: ChannelKind,
    pub counts: Vec<u32>,
    pub scale: f64,
    pub n_bins: usize,
}

/// Uniform bin edges `e_i = i * scale / n` for `i = 0..=n`.
#[derive(Debug, Clone, Copy)]
struct Bins {
    scale: f64,
    n: usize,
}

impl Bins {
    fn edge(self, i: usize) -> f64 {
        i as f64 * self.scale / self.n as f64
    }

    /// Zero-based bin with `e_i <= value < e_{i+1}`; `value == scale` falls in the last bin.
    fn index(self, value: f64) -> usize {
        let mut i = ((value / self.scale) * self.n as f64).floor() as usize;
        i = i.min(self.n - 1);
        while i > 0 && value < self.edge(i) {
            i -= 1;
        }
        while i + 1 < self.n && value >= self.edge(i + 1) {
            i += 1;
        }
        i
    }
}

/// Counts the bars of `barcode` per bin.
///
/// Birth and Death use half-open bins `[e_{i-1}, e_i)` with the last bin closed. Persistence
/// counts bars that straddle the whole bin: `b <= e_{i-1}` and `d >= e_i`.
pub fn bin_barcode(barcode: &Barcode, kind: ChannelKind, scale: f64, n_bins: usize) -> Result<BinnedChannel> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("bin count must be at least 1".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("bin scale must be positive, got {scale}")));
    }
    let bins = Bins { scale, n: n_bins };
    let mut counts = vec![0u32; n_bins];
    for &(birth, death) in &barcode.bars {
        let in_range = |v: f64| (0.0..=scale).contains(&v);
        if !in_range(birth) || !in_range(death) || birth > death {
            return Err(Error::BarOutOfRange { birth, death, scale });
        }
        match kind {
            ChannelKind::Birth => counts[bins.index(birth)] += 1,
            ChannelKind::Death => counts[bins.index(death)] += 1,
            ChannelKind::Persistence => {
                for (i, count) in counts.iter_mut().enumerate() {
                    if birth <= bins.edge(i) && death >= bins.edge(i + 1) {
                        *count += 1;
                    }
                }
            }
        }
    }
    Ok(BinnedChannel {
        kind,
        counts,
        scale,
        n_bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoParams {
    /// Binning interval `[0, scale]` in Å.
    pub scale: f64,
    pub n_bins: usize,
    pub max_dim: usize,
    /// Rips cutoff in Å, at most `scale`. Bars alive at the cutoff are truncated to it.
    pub filtration_scale: f64,
    pub max_simplices: usize,
}

impl Default for TopoParams {
    fn default() -> Self {
        TopoParams {
            scale: 50.0,
            n_bins: 100,
            max_dim: 3,
            filtration_scale: 50.0,
            max_simplices: DEFAULT_MAX_SIMPLICES,
        }
    }
}

impl TopoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.filtration_scale > 0.0 && self.filtration_scale <= self.scale) {
            return Err(Error::InvalidParameter(format!(
                "filtration scale must lie in (0, {}], got {}",
                self.scale, self.filtration_scale
            )));
        }
        if self.max_dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "Betti-2 channels need 3-simplices; max_dim must be 3, got {}",
                self.max_dim
            )));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidParameter("bin count must be at least 1".into()));
        }
        Ok(())
    }

    fn rips(&self) -> RipsParams {
        RipsParams {
            max_scale: self.filtration_scale,
            max_dim: self.max_dim,
            max_simplices: self.max_simplices,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoFeatureVector {
    pub channels: Vec<(ChannelKey, BinnedChannel)>,
}

impl TopoFeatureVector {
    pub fn flat(&self) -> Vec<u32> {
        self.channels
            .iter()
            .flat_map(|(_, c)| c.counts.iter().copied())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.channels.iter().map(|(_, c)| c.counts.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bins precomputed barcodes (indexed by selector order of [`CHANNEL_SELECTORS`]) into the
/// twelve channels.
pub fn topo_from_barcodes(barcodes: &[Vec<Barcode>; 2], params: &TopoParams) -> Result<TopoFeatureVector> {
    let mut channels = Vec::with_capacity(12);
    for key in channel_order() {
        let per_selector = &barcodes[CHANNEL_SELECTORS.iter().position(|&s| s == key.selector).unwrap()];
        let barcode = per_selector
            .iter()
            .find(|b| b.dim == key.dim)
            .map(|b| b.truncated(params.filtration_scale))
            .unwrap_or(Barcode { dim: key.dim, bars: Vec::new() });
        channels.push((key, bin_barcode(&barcode, key.kind, params.scale, params.n_bins)?));
    }
    Ok(TopoFeatureVector { channels })
}

pub fn topo_features(structure: &ProteinStructure, params: &TopoParams) -> Result<TopoFeatureVector> {
    params.validate()?;
    let rips = params.rips();
    let carbon = barcode_for_selection(structure, AtomSelector::AllCarbon, &rips)?;
    let heavy = barcode_for_selection(structure, AtomSelector::AllHeavy, &rips)?;
    topo_from_barcodes(&[carbon, heavy], params)
}
