//! The magnifier strategy interface and its name-keyed registry.
//!
//! Every magnification method (classical or learned) implements
//! [`Magnifier`]. Front ends look methods up by name in a
//! [`MagnifierRegistry`], so new methods plug in without touching callers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::axtf::Tensor;
use crate::error::{dims, invalid, Error, Result};
use crate::frame::Frame;
use crate::pyramid::Bandwidth;
use crate::temporal::TemporalFilterSpec;

/// Which frame a displacement is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Against the first frame.
    #[default]
    Static,
    /// Against the previous frame, accumulated over time.
    Dynamic,
}

impl ReferenceMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ReferenceMode::Static),
            "dynamic" => Ok(ReferenceMode::Dynamic),
            other => Err(invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// Per-pixel pair of axial factors (α along φ, α along φ⊥).
#[derive(Debug, Clone, PartialEq)]
pub struct MagMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<[f64; 2]>,
}

impl MagMap {
    pub fn constant(height: usize, width: usize, alpha: [f64; 2]) -> Self {
        MagMap {
            height,
            width,
            data: vec![alpha; height * width],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    /// Nearest-neighbour lookup for a grid of size `h × w` laid over the map.
    #[inline]
    pub fn sample_for_grid(&self, y: usize, x: usize, h: usize, w: usize) -> [f64; 2] {
        let my = ((y * self.height) / h).min(self.height - 1);
        let mx = ((x * self.width) / w).min(self.width - 1);
        self.get(my, mx)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.height, self.width, 2],
            data: self
                .data
                .iter()
                .flat_map(|a| [a[0] as f32, a[1] as f32])
                .collect(),
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        match t.dims.as_slice() {
            [h, w, 2] => Ok(MagMap {
                height: *h,
                width: *w,
                data: t
                    .data
                    .chunks_exact(2)
                    .map(|c| [c[0] as f64, c[1] as f64])
                    .collect(),
            }),
            other => Err(Error::Format(format!(
                "magnification map must be (h, w, 2), got {other:?}"
            ))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_tensor().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(&Tensor::load(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnificationSpec {
    /// Axis of interest φ in degrees, [0, 180).
    pub angle_deg: f64,
    pub alpha_par: f64,
    pub alpha_perp: f64,
    pub per_pixel_map: Option<MagMap>,
    pub mode: ReferenceMode,
}

impl MagnificationSpec {
    /// Same factor on both axes.
    pub fn generic(alpha: f64) -> Self {
        MagnificationSpec::axial(0.0, alpha, alpha)
    }

    pub fn axial(angle_deg: f64, alpha_par: f64, alpha_perp: f64) -> Self {
        MagnificationSpec {
            angle_deg,
            alpha_par,
            alpha_perp,
            per_pixel_map: None,
            mode: ReferenceMode::Static,
        }
    }

    pub fn with_mode(mut self, mode: ReferenceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_map(mut self, map: MagMap) -> Self {
        self.per_pixel_map = Some(map);
        self
    }

    pub fn validate(&self, frame_dims: Option<(usize, usize)>) -> Result<()> {
        if !self.angle_deg.is_finite() {
            return Err(invalid("angle must be finite"));
        }
        let ok = |a: f64| a.is_finite() && a >= 0.0;
        if !ok(self.alpha_par) || !ok(self.alpha_perp) {
            return Err(invalid(format!(
                "magnification factors must be >= 0, got ({}, {})",
                self.alpha_par, self.alpha_perp
            )));
        }
        if let Some(map) = &self.per_pixel_map {
            if map.data.iter().any(|a| !ok(a[0]) || !ok(a[1])) {
                return Err(invalid("magnification map factors must be >= 0"));
            }
            if let Some((h, w)) = frame_dims {
                if (map.height, map.width) != (h, w) {
                    return Err(dims(format!(
                        "magnification map is {}x{}, frames are {h}x{w}",
                        map.height, map.width
                    )));
                }
            }
        }
        Ok(())
    }

    /// Factor pair at pixel (y, x) of a grid of size h × w.
    #[inline]
    pub fn factors_at(&self, y: usize, x: usize, h: usize, w: usize) -> [f64; 2] {
        match &self.per_pixel_map {
            Some(m) => m.sample_for_grid(y, x, h, w),
            None => [self.alpha_par, self.alpha_perp],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnifyRequest {
    pub spec: MagnificationSpec,
    pub filter: Option<TemporalFilterSpec>,
}

impl MagnifyRequest {
    pub fn new(spec: MagnificationSpec) -> Self {
        MagnifyRequest { spec, filter: None }
    }

    pub fn with_filter(mut self, filter: TemporalFilterSpec) -> Self {
        self.filter = Some(filter);
        self
    }
}

/// A video motion magnification method.
pub trait Magnifier: Send + Sync {
    fn name(&self) -> &str;

    /// Magnify a sequence; output has one frame per input frame.
    fn magnify(&self, frames: &[Frame], request: &MagnifyRequest) -> Result<Vec<Frame>>;

    /// Whether the method honours an axis angle (otherwise φ is ignored).
    fn is_axial(&self) -> bool {
        false
    }
}

/// Settings shared by method constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    /// Trained weights for learned methods (a model directory or `model.txt`).
    pub model: Option<PathBuf>,
    /// Orientation count for the generic phase method.
    pub orientations: usize,
    pub bandwidth: Bandwidth,
    /// σ (band pixels) of the amplitude-weighted phase smoothing.
    pub phase_sigma: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            model: None,
            orientations: 4,
            bandwidth: Bandwidth::HalfOctave,
            phase_sigma: 2.0,
        }
    }
}

pub type MagnifierBuilder = fn(&MethodConfig) -> Result<Box<dyn Magnifier>>;

/// Name → constructor map for magnification methods.
#[derive(Default, Clone)]
pub struct MagnifierRegistry {
    builders: BTreeMap<String, MagnifierBuilder>,
}

impl MagnifierRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry pre-loaded with `linear`, `phase` and `axial-phase`.
    pub fn with_classical() -> Self {
        let mut r = Self::new();
        crate::classical::register(&mut r);
        r
    }

    pub fn register(&mut self, name: &str, builder: MagnifierBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, config: &MethodConfig) -> Result<Box<dyn Magnifier>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))?;
        builder(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(MagnificationSpec::axial(30.0, -1.0, 0.0).validate(None).is_err());
        let m = MagnificationSpec::generic(2.0).with_map(MagMap::constant(4, 4, [1.0, 2.0]));
        assert!(m.validate(Some((4, 4))).is_ok());
        assert!(m.validate(Some((4, 5))).is_err());
        assert_eq!(m.factors_at(1, 1, 2, 2), [1.0, 2.0]);
    }

    #[test]
    fn map_lookup_is_nearest() {
        let mut map = MagMap::constant(4, 4, [0.0, 0.0]);
        map.data[2 * 4 + 2] = [5.0, 6.0];
        assert_eq!(map.sample_for_grid(1, 1, 2, 2), [5.0, 6.0]);
        assert_eq!(map.sample_for_grid(0, 1, 2, 2), [0.0, 0.0]);
    }

    #[test]
    fn registry_rejects_unknown_names() {
        let r = MagnifierRegistry::with_classical();
        assert!(r.contains("axial-phase"));
        assert!(matches!(
            r.build("nope", &MethodConfig::default()),
            Err(Error::UnknownMethod(_))
        ));
    }
}
