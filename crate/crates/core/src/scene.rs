//! JSON scene description shared by every CLI stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::PulseModel;
use crate::scalar::{lit, Real};
use crate::sim::{ArrayGeometry, NoiseSpec, Scatterer, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub carrier_hz: f64,
    pub sigma_s: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub num_elements: usize,
    pub pitch_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSpec {
    pub t_n_s: f64,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub alpha_rad: f64,
    pub scatterers: Vec<ScattererSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFileSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speckle_count: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub speed_of_sound_m_s: f64,
    pub tau_s: f64,
    pub pulse: PulseSpec,
    pub array: ArraySpec,
    pub lines: Vec<LineSpec>,
    pub noise: NoiseFileSpec,
}

impl SceneFile {
    /// Parses and validates; syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse::<f64>()?;
        self.geometry::<f64>()?;
        if !(self.tau_s > 0.0) || !self.tau_s.is_finite() {
            return Err(Error::InvalidScene("tau_s must be positive".into()));
        }
        for i in 0..self.lines.len() {
            self.scene::<f64>(i)?
                .validate()
                .map_err(|e| Error::InvalidScene(format!("line {i}: {}", strip_scene_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn pulse<T: Real>(&self) -> Result<PulseModel<T>> {
        PulseModel::new(lit(self.pulse.carrier_hz), lit(self.pulse.sigma_s), lit(self.pulse.amplitude))
            .map_err(|e| Error::InvalidScene(format!("pulse: {e}")))
    }

    pub fn geometry<T: Real>(&self) -> Result<ArrayGeometry<T>> {
        ArrayGeometry::new(self.array.num_elements, lit(self.array.pitch_m), lit(self.speed_of_sound_m_s))
            .map_err(|e| Error::InvalidScene(format!("array: {e}")))
    }

    /// Noise settings for line `i`; the seed advances by the line index.
    pub fn noise_for(&self, i: usize) -> NoiseSpec {
        NoiseSpec {
            snr_db: self.noise.snr_db,
            speckle_count: self.noise.speckle_count.unwrap_or(0),
            seed: self.noise.seed.wrapping_add(i as u64),
        }
    }

    pub fn scene<T: Real>(&self, i: usize) -> Result<Scene<T>> {
        let line = self.lines.get(i).ok_or_else(|| Error::InvalidConfig(format!("scene has no line {i}")))?;
        Ok(Scene {
            scatterers: line
                .scatterers
                .iter()
                .map(|s| Scatterer { axial_time: lit(s.t_n_s), reflectivity: lit(s.reflectivity) })
                .collect(),
            alpha: lit(line.alpha_rad),
            tau: lit(self.tau_s),
            noise: self.noise_for(i),
        })
    }

    /// Replaces the base noise seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }
}

fn strip_scene_prefix(e: &Error) -> String {
    match e {
        Error::InvalidScene(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINT: &str = r#"{
  "speed_of_sound_m_s": 1540.0,
  "tau_s": 102.4e-6,
  "pulse": {"carrier_hz": 5.142e6, "sigma_s": 1e-7, "amplitude": 1.0},
  "array": {"num_elements": 16, "pitch_m": 2.98e-4},
  "lines": [
    {"alpha_rad": 0.0, "scatterers": [{"t_n_s": 6.4935e-6, "reflectivity": 1.0},
                                       {"t_n_s": 12.987e-6, "reflectivity": 0.5}]},
    {"alpha_rad": 0.0, "scatterers": []}
  ],
  "noise": {"seed": 7}
}"#;

    #[test]
    fn parses_and_builds() {
        let f = SceneFile::parse(TWO_POINT).unwrap();
        assert_eq!(f.lines.len(), 2);
        let s: Scene<f64> = f.scene(0).unwrap();
        assert_eq!(s.scatterers.len(), 2);
        assert_eq!(s.noise.seed, 7);
        assert_eq!(f.noise_for(1).seed, 8);
        assert!(f.noise_for(0).is_disabled());
        assert_eq!(f.geometry::<f64>().unwrap().num_elements, 16);
        let again = SceneFile::parse(&f.to_json()).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn unknown_key_reports_position() {
        let bad = TWO_POINT.replace("\"tau_s\"", "\"tau_x\"");
        match SceneFile::parse(&bad) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
        let bad = TWO_POINT.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1");
        assert!(matches!(SceneFile::parse(&bad), Err(Error::Parse { .. })));
        assert!(matches!(SceneFile::parse("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn invariant_violations_named() {
        let bad = TWO_POINT.replace("12.987e-6", "60e-6");
        match SceneFile::parse(&bad) {
            Err(Error::InvalidScene(m)) => assert!(m.contains("line 0") && m.contains("scatterer 1"), "{m}"),
            other => panic!("{other:?}"),
        }
        let bad = TWO_POINT.replace("\"num_elements\": 16", "\"num_elements\": 0");
        assert!(matches!(SceneFile::parse(&bad), Err(Error::InvalidScene(_))));
        let bad = TWO_POINT.replace("\"sigma_s\": 1e-7", "\"sigma_s\": -1e-7");
        assert!(matches!(SceneFile::parse(&bad), Err(Error::InvalidScene(_))));
    }
}
