use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Growth, mechanics and sampling parameters for one procedural tree.
///
/// The growth fields have no defaults; the mechanical and sampling fields
/// do. Depth counts branch levels including the trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub depth: usize,
    /// Inclusive `[min, max]` children per non-terminal branch.
    pub branches_per_node: [usize; 2],
    /// Inclusive `[min, max]` angle between a child and its parent, degrees.
    pub branch_angle_deg: [f64; 2],
    pub length_decay: f64,
    pub radius_decay: f64,
    pub leaves_per_terminal: usize,
    pub seed: u64,

    #[serde(default = "defaults::trunk_length")]
    pub trunk_length: f64,
    #[serde(default = "defaults::trunk_radius")]
    pub trunk_radius: f64,
    #[serde(default = "defaults::radial_segments")]
    pub radial_segments: usize,
    #[serde(default = "defaults::leaf_size")]
    pub leaf_size: f64,
    /// Wind speed at which a branch deflects by `rest_deflection`.
    #[serde(default = "defaults::reference_wind_speed")]
    pub reference_wind_speed: f64,
    /// Static bend (rad) of a branch square to the reference wind.
    #[serde(default = "defaults::rest_deflection")]
    pub rest_deflection: f64,
    /// Natural frequency (Hz) of first-level branches.
    #[serde(default = "defaults::base_frequency_hz")]
    pub base_frequency_hz: f64,
    /// Natural-frequency multiplier per level below the first.
    #[serde(default = "defaults::frequency_growth")]
    pub frequency_growth: f64,
    #[serde(default = "defaults::damping_ratio")]
    pub damping_ratio: f64,
    /// Peak leaf flutter angle (rad); 0 disables flutter.
    #[serde(default = "defaults::flutter_amplitude")]
    pub flutter_amplitude: f64,
    #[serde(default = "defaults::flutter_hz")]
    pub flutter_hz: f64,
    #[serde(default = "defaults::frames")]
    pub frames: usize,
    #[serde(default = "defaults::fps")]
    pub fps: f64,
    #[serde(default)]
    pub wind: WindField,
    /// White noise added to the skinned motion, relative to its RMS.
    #[serde(default)]
    pub noise_amplitude: f64,
}

mod defaults {
    pub fn trunk_length() -> f64 {
        1.0
    }
    pub fn trunk_radius() -> f64 {
        0.06
    }
    pub fn radial_segments() -> usize {
        6
    }
    pub fn leaf_size() -> f64 {
        0.08
    }
    pub fn reference_wind_speed() -> f64 {
        5.0
    }
    pub fn rest_deflection() -> f64 {
        0.12
    }
    pub fn base_frequency_hz() -> f64 {
        0.5
    }
    pub fn frequency_growth() -> f64 {
        1.3
    }
    pub fn damping_ratio() -> f64 {
        0.2
    }
    pub fn flutter_amplitude() -> f64 {
        0.15
    }
    pub fn flutter_hz() -> f64 {
        1.5
    }
    pub fn frames() -> usize {
        100
    }
    pub fn fps() -> f64 {
        24.0
    }
}

impl SynthParams {
    /// A small tree with every field at a sensible value.
    pub fn example(seed: u64) -> Self {
        Self {
            depth: 4,
            branches_per_node: [2, 3],
            branch_angle_deg: [25.0, 50.0],
            length_decay: 0.7,
            radius_decay: 0.65,
            leaves_per_terminal: 3,
            seed,
            trunk_length: defaults::trunk_length(),
            trunk_radius: defaults::trunk_radius(),
            radial_segments: defaults::radial_segments(),
            leaf_size: defaults::leaf_size(),
            reference_wind_speed: defaults::reference_wind_speed(),
            rest_deflection: defaults::rest_deflection(),
            base_frequency_hz: defaults::base_frequency_hz(),
            frequency_growth: defaults::frequency_growth(),
            damping_ratio: defaults::damping_ratio(),
            flutter_amplitude: defaults::flutter_amplitude(),
            flutter_hz: defaults::flutter_hz(),
            frames: defaults::frames(),
            fps: defaults::fps(),
            wind: WindField::default(),
            noise_amplitude: 0.0,
        }
    }

    /// Parse JSON; an empty document reads as `{}` so the error names the
    /// first missing field.
    pub fn from_json(text: &str) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let p: Self = serde_json::from_str(text).map_err(|e| Error::parse("params JSON", e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(1..=6).contains(&self.depth) {
            return bad(format!("depth must lie in [1, 6], got {}", self.depth));
        }
        let [bmin, bmax] = self.branches_per_node;
        if bmin > bmax || bmax > 8 {
            return bad(format!("branches_per_node must satisfy min ≤ max ≤ 8, got [{bmin}, {bmax}]"));
        }
        let [amin, amax] = self.branch_angle_deg;
        if !(0.0..=180.0).contains(&amin) || !(0.0..=180.0).contains(&amax) || amin > amax {
            return bad(format!("branch_angle_deg must satisfy 0 ≤ min ≤ max ≤ 180, got [{amin}, {amax}]"));
        }
        for (name, v) in [("length_decay", self.length_decay), ("radius_decay", self.radius_decay)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("trunk_length", self.trunk_length),
            ("trunk_radius", self.trunk_radius),
            ("leaf_size", self.leaf_size),
            ("reference_wind_speed", self.reference_wind_speed),
            ("rest_deflection", self.rest_deflection),
            ("base_frequency_hz", self.base_frequency_hz),
            ("frequency_growth", self.frequency_growth),
            ("fps", self.fps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.radial_segments < 3 {
            return bad(format!("radial_segments must be at least 3, got {}", self.radial_segments));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return bad(format!("damping_ratio must lie in (0, 1), got {}", self.damping_ratio));
        }
        if !(self.flutter_amplitude >= 0.0 && self.flutter_hz > 0.0) {
            return bad("flutter needs amplitude ≥ 0 and frequency > 0".into());
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return bad(format!("noise_amplitude must be ≥ 0, got {}", self.noise_amplitude));
        }
        if self.frames < 2 {
            return bad(format!("frames must be at least 2, got {}", self.frames));
        }
        self.wind.validate()
    }
}

/// One sinusoidal gust added to the mean wind speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gust {
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Uniform wind direction with a gusting speed. With `turbulence > 0` each
/// branch sees every gust with its own phase offset, drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindField {
    pub direction: [f64; 3],
    pub speed: f64,
    pub gusts: Vec<Gust>,
    /// Phase decorrelation between branches in `[0, 1]`.
    pub turbulence: f64,
    pub seed: u64,
    /// Wind stops at this time (s) if set.
    pub until: Option<f64>,
}

impl Default for WindField {
    fn default() -> Self {
        Self {
            direction: [1.0, 0.0, 0.3],
            speed: 3.0,
            gusts: vec![
                Gust {
                    amplitude: 1.5,
                    frequency_hz: 0.4,
                    phase: 0.0,
                },
                Gust {
                    amplitude: 0.8,
                    frequency_hz: 1.1,
                    phase: 1.3,
                },
            ],
            turbulence: 0.6,
            seed: 0,
            until: None,
        }
    }
}

impl WindField {
    pub fn calm() -> Self {
        Self {
            speed: 0.0,
            gusts: Vec::new(),
            ..Default::default()
        }
    }

    pub fn steady(direction: Vec3, speed: f64) -> Self {
        Self {
            direction: direction.into(),
            speed,
            gusts: Vec::new(),
            turbulence: 0.0,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = Vec3::from(self.direction);
        if !(d.norm() > 0.0 && d.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidArgument("wind direction must be a non-zero vector".into()));
        }
        if !self.speed.is_finite() {
            return Err(Error::NonFinite("wind speed".into()));
        }
        if let Some(g) = self
            .gusts
            .iter()
            .find(|g| !(g.frequency_hz > 0.0 && g.amplitude >= 0.0 && g.phase.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "gusts need frequency > 0 and amplitude ≥ 0, got {g:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.turbulence) {
            return Err(Error::InvalidArgument(format!(
                "turbulence must lie in [0, 1], got {}",
                self.turbulence
            )));
        }
        Ok(())
    }

    pub fn unit_direction(&self) -> Vec3 {
        Vec3::from(self.direction).normalize()
    }

    /// Per-branch gust phase offsets, `offsets[node * gusts + g]`.
    pub(crate) fn phase_offsets(&self, nodes: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x7769_6e64);
        (0..nodes * self.gusts.len())
            .map(|_| self.turbulence * rng.random_range(0.0..TAU))
            .collect()
    }

    /// Wind speed seen by a branch at time `t`.
    pub(crate) fn speed_at(&self, t: f64, offsets: &[f64]) -> f64 {
        if self.until.is_some_and(|end| t >= end) {
            return 0.0;
        }
        self.speed
            + self
                .gusts
                .iter()
                .zip(offsets)
                .map(|(g, off)| g.amplitude * (TAU * g.frequency_hz * t + g.phase + off).sin())
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_names_a_field() {
        let err = SynthParams::from_json("").unwrap_err().to_string();
        assert!(err.contains("depth"), "{err}");
    }

    #[test]
    fn json_roundtrip_and_defaults() {
        let p = SynthParams::example(3);
        let back = SynthParams::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let minimal = r#"{"depth":2,"branches_per_node":[1,2],"branch_angle_deg":[20,40],
            "length_decay":0.7,"radius_decay":0.6,"leaves_per_terminal":2,"seed":1}"#;
        let p = SynthParams::from_json(minimal).unwrap();
        assert_eq!(p.frames, 100);
        assert_eq!(p.fps, 24.0);
    }

    #[test]
    fn range_checks() {
        let mut p = SynthParams::example(0);
        p.depth = 7;
        assert!(p.validate().is_err());
        let mut p = SynthParams::example(0);
        p.branches_per_node = [3, 2];
        assert!(p.validate().is_err());
        let mut p = SynthParams::example(0);
        p.length_decay = 0.0;
        assert!(p.validate().is_err());
        assert!(SynthParams::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn wind_stops() {
        let w = WindField {
            until: Some(1.0),
            ..WindField::steady(Vec3::x(), 2.0)
        };
        assert_eq!(w.speed_at(0.5, &[]), 2.0);
        assert_eq!(w.speed_at(1.0, &[]), 0.0);
    }
}
