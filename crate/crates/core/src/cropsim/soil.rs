//! Layered soil water store: infiltration cascade, surface evaporation, root extraction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SOIL_CSV_HEADER: [&str; 5] = ["depth_top_cm", "depth_bottom_cm", "dul", "cll", "bd"];

/// One soil layer. Water is held as extractable water above CLL, in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilLayer {
    pub depth_top: f64,
    pub depth_bottom: f64,
    /// Drained upper limit, mm/mm.
    pub dul: f64,
    /// Crop lower limit, mm/mm.
    pub cll: f64,
    /// Bulk density, g/cc.
    pub bd: f64,
    esw_mm: f64,
}

impl SoilLayer {
    pub fn new(depth_top: f64, depth_bottom: f64, dul: f64, cll: f64, bd: f64) -> Result<Self> {
        let all_finite = [depth_top, depth_bottom, dul, cll, bd]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || depth_bottom <= depth_top || depth_top < 0.0 {
            return Err(Error::domain(format!(
                "invalid layer depths {depth_top}-{depth_bottom} cm"
            )));
        }
        if !(dul > cll && cll >= 0.0) {
            return Err(Error::domain(format!(
                "layer {depth_top}-{depth_bottom} cm needs dul > cll >= 0 (dul {dul}, cll {cll})"
            )));
        }
        Ok(SoilLayer {
            depth_top,
            depth_bottom,
            dul,
            cll,
            bd,
            esw_mm: 0.0,
        })
    }

    pub fn thickness_mm(&self) -> f64 {
        (self.depth_bottom - self.depth_top) * 10.0
    }

    /// Plant-available water capacity of the layer, mm.
    pub fn pawc_mm(&self) -> f64 {
        (self.dul - self.cll) * self.thickness_mm()
    }

    /// Extractable soil water, mm in `[0, pawc]`.
    pub fn esw_mm(&self) -> f64 {
        self.esw_mm
    }

    /// Volumetric water content, mm/mm.
    pub fn water(&self) -> f64 {
        self.cll + self.esw_mm / self.thickness_mm()
    }

    pub fn set_esw_mm(&mut self, esw: f64) {
        self.esw_mm = esw.clamp(0.0, self.pawc_mm());
    }

    /// Sets water as a fraction of PAWC above CLL.
    pub fn fill_fraction(&mut self, fraction: f64) {
        self.esw_mm = fraction * self.pawc_mm();
    }

    fn mid_depth_mm(&self) -> f64 {
        (self.depth_top + self.depth_bottom) * 5.0
    }
}

/// Ordered, depth-contiguous soil layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilProfile {
    layers: Vec<SoilLayer>,
}

impl SoilProfile {
    pub fn new(layers: Vec<SoilLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::domain("soil profile has no layers"));
        }
        for w in layers.windows(2) {
            if w[0].depth_bottom != w[1].depth_top {
                return Err(Error::domain(format!(
                    "soil layers not contiguous at {} cm / {} cm",
                    w[0].depth_bottom, w[1].depth_top
                )));
            }
        }
        Ok(SoilProfile { layers })
    }

    /// Thallon clay (APSoil 906), 0-180 cm in seven layers.
    pub fn thallon() -> Self {
        let rows = [
            (0.0, 15.0, 0.405, 0.234, 1.299),
            (15.0, 30.0, 0.407, 0.258, 1.359),
            (30.0, 60.0, 0.410, 0.257, 1.351),
            (60.0, 90.0, 0.405, 0.259, 1.365),
            (90.0, 120.0, 0.391, 0.254, 1.403),
            (120.0, 150.0, 0.319, 0.271, 1.594),
            (150.0, 180.0, 0.287, 0.271, 1.677),
        ];
        let layers = rows
            .iter()
            .map(|&(t, b, dul, cll, bd)| SoilLayer::new(t, b, dul, cll, bd).expect("valid table"))
            .collect();
        SoilProfile::new(layers).expect("contiguous table")
    }

    pub fn layers(&self) -> &[SoilLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [SoilLayer] {
        &mut self.layers
    }

    pub fn pawc_mm(&self) -> f64 {
        self.layers.iter().map(SoilLayer::pawc_mm).sum()
    }

    /// Total extractable water, mm. Differences of this equal differences of total water.
    pub fn storage_mm(&self) -> f64 {
        self.layers.iter().map(SoilLayer::esw_mm).sum()
    }

    pub fn fill_fraction(&mut self, fraction: f64) {
        for l in &mut self.layers {
            l.fill_fraction(fraction);
        }
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::domain(format!("soil table: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != SOIL_CSV_HEADER {
            return Err(Error::domain(format!(
                "soil table header must be `{}`",
                SOIL_CSV_HEADER.join(",")
            )));
        }
        let mut layers = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::domain(format!("soil table: {e}")))?;
            let mut v = [0.0; 5];
            for (k, slot) in v.iter_mut().enumerate() {
                let raw = record.get(k).unwrap_or("");
                *slot = raw.parse().map_err(|_| {
                    Error::domain(format!(
                        "soil table row {}: `{}` is not a number: {raw:?}",
                        row + 1,
                        SOIL_CSV_HEADER[k]
                    ))
                })?;
            }
            layers.push(SoilLayer::new(v[0], v[1], v[2], v[3], v[4])?);
        }
        SoilProfile::new(layers)
    }

    pub fn to_csv(&self) -> String {
        let mut s = SOIL_CSV_HEADER.join(",");
        s.push('\n');
        for l in &self.layers {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                l.depth_top, l.depth_bottom, l.dul, l.cll, l.bd
            ));
        }
        s
    }
}

impl Default for SoilProfile {
    fn default() -> Self {
        SoilProfile::thallon()
    }
}

impl fmt::Display for SoilProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}

impl FromStr for SoilProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SoilProfile::parse_csv(s)
    }
}

impl Serialize for SoilProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_csv())
    }
}

impl<'de> Deserialize<'de> for SoilProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        SoilProfile::parse_csv(&text).map_err(serde::de::Error::custom)
    }
}

/// Adds `input_mm` at the surface. Each layer fills to DUL and passes the excess down;
/// whatever leaves the bottom layer is returned as drainage.
pub fn infiltrate_and_drain(profile: &mut SoilProfile, input_mm: f64) -> f64 {
    let mut remaining = input_mm.max(0.0);
    for layer in &mut profile.layers {
        if remaining <= 0.0 {
            break;
        }
        let room = layer.pawc_mm() - layer.esw_mm;
        if remaining >= room {
            layer.esw_mm = layer.pawc_mm();
            remaining -= room;
        } else {
            layer.esw_mm += remaining;
            remaining = 0.0;
        }
    }
    remaining
}

/// Removes soil evaporation from the top layer and returns the amount removed (mm).
pub fn evaporate(profile: &mut SoilProfile, et0: f64, lai: f64, coeff: f64, extinction: f64) -> f64 {
    let top = &mut profile.layers[0];
    let potential = (coeff * et0 * (-extinction * lai).exp()).max(0.0);
    let before = top.esw_mm;
    top.esw_mm = (before - potential).max(0.0);
    before - top.esw_mm
}

/// Root water uptake parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UptakeParams {
    /// kl at the surface, 1/day.
    pub kl_surface: f64,
    /// e-folding depth of kl, mm.
    pub kl_decay_mm: f64,
    /// LAI at which transpiration demand reaches ET0.
    pub lai_cover: f64,
}

impl Default for UptakeParams {
    fn default() -> Self {
        UptakeParams {
            kl_surface: 0.08,
            kl_decay_mm: 600.0,
            lai_cover: 3.0,
        }
    }
}

impl UptakeParams {
    pub fn kl(&self, layer: &SoilLayer) -> f64 {
        self.kl_surface * (-layer.mid_depth_mm() / self.kl_decay_mm).exp()
    }
}

/// Outcome of the daily supply/demand balance.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterStress {
    /// Supply over demand, clamped to [0, 1]; 1 when there is no demand.
    pub factor: f64,
    pub demand: f64,
    pub supply: f64,
    /// Planned extraction per layer (mm), proportional to each layer's supply.
    pub extraction: Vec<f64>,
}

impl WaterStress {
    pub fn uptake(&self) -> f64 {
        self.extraction.iter().sum()
    }
}

fn rooted_fraction(layer: &SoilLayer, root_depth_mm: f64) -> f64 {
    let top = layer.depth_top * 10.0;
    let bottom = layer.depth_bottom * 10.0;
    ((root_depth_mm - top) / (bottom - top)).clamp(0.0, 1.0)
}

/// Daily water-stress factor and the extraction plan that meets `min(demand, supply)`.
pub fn daily_water_stress(
    profile: &SoilProfile,
    lai: f64,
    root_depth_mm: f64,
    et0: f64,
    params: &UptakeParams,
) -> WaterStress {
    let demand = et0.max(0.0) * (lai / params.lai_cover).clamp(0.0, 1.0);
    let supplies: Vec<f64> = profile
        .layers
        .iter()
        .map(|l| params.kl(l) * l.esw_mm * rooted_fraction(l, root_depth_mm))
        .collect();
    let supply: f64 = supplies.iter().sum();
    if demand <= 0.0 {
        return WaterStress {
            factor: 1.0,
            demand: 0.0,
            supply,
            extraction: vec![0.0; supplies.len()],
        };
    }
    let factor = (supply / demand).min(1.0);
    let uptake = demand.min(supply);
    let extraction = if supply > 0.0 {
        supplies.iter().map(|s| uptake * s / supply).collect()
    } else {
        vec![0.0; supplies.len()]
    };
    WaterStress {
        factor,
        demand,
        supply,
        extraction,
    }
}

/// Applies an extraction plan; returns the water actually removed (mm).
pub fn extract(profile: &mut SoilProfile, plan: &[f64]) -> f64 {
    let mut removed = 0.0;
    for (layer, want) in profile.layers.iter_mut().zip(plan) {
        let before = layer.esw_mm;
        layer.esw_mm = (before - want).max(0.0);
        removed += before - layer.esw_mm;
    }
    removed
}
