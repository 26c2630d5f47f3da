//! Project configuration: one JSON document, SI values, unit-suffixed keys.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub bvd: Option<BvdSection>,
    pub shunt: Option<ShuntSection>,
    pub system: Option<SystemSection>,
    pub drive: Option<DriveSection>,
    pub optics: Option<OpticsSection>,
    pub duffing: Option<DuffingSection>,
    pub chain: Option<ChainSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvdSection {
    #[serde(rename = "C0_F")]
    pub c0: f64,
    #[serde(rename = "Cm_F")]
    pub cm: f64,
    #[serde(rename = "Lm_H")]
    pub lm: f64,
    #[serde(rename = "Rm_Ohm", default)]
    pub rm: f64,
}

/// Give `Lr_H`, `f_r_Hz`, or both (they must agree).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuntSection {
    #[serde(rename = "Cr_F")]
    pub cr: f64,
    #[serde(rename = "Lr_H")]
    pub lr: Option<f64>,
    #[serde(rename = "f_r_Hz")]
    pub f_r: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "f_q_Hz")]
    pub f_q: f64,
    #[serde(rename = "anharmonicity_q_Hz", default)]
    pub anharmonicity_q: f64,
    #[serde(rename = "gamma_q_per_s", default)]
    pub gamma_q: f64,
    #[serde(rename = "dephasing_q_per_s", default)]
    pub dephasing_q: f64,
    /// Defaults to the shunt resonance.
    #[serde(rename = "f_s_Hz")]
    pub f_s: Option<f64>,
    #[serde(rename = "gamma_s_per_s", default)]
    pub gamma_s: f64,
    #[serde(rename = "f_m_Hz")]
    pub f_m: f64,
    #[serde(rename = "gamma_m_per_s", default)]
    pub gamma_m: f64,
    #[serde(rename = "dephasing_m_per_s", default)]
    pub dephasing_m: f64,
    /// Exactly one of `g_qs_Hz` and `lambda_qs`.
    #[serde(rename = "g_qs_Hz")]
    pub g_qs: Option<f64>,
    pub lambda_qs: Option<f64>,
    /// Overrides the value derived from `bvd` and `shunt`.
    #[serde(rename = "g_sm_Hz")]
    pub g_sm: Option<f64>,
    #[serde(rename = "g3_Hz")]
    pub g3: f64,
}

/// Exactly one of `n_s` and `epsilon_Hz`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub n_s: Option<f64>,
    #[serde(rename = "epsilon_Hz")]
    pub epsilon: Option<f64>,
    /// Defaults to the dressed difference frequency.
    #[serde(rename = "f_d_Hz")]
    pub f_d: Option<f64>,
    #[serde(rename = "phase_rad", default)]
    pub phase: f64,
    #[serde(rename = "duration_s")]
    pub duration: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSection {
    pub p11: f64,
    pub p12: f64,
    pub p13: f64,
    pub p14: f64,
    pub p31: f64,
    pub p33: f64,
    pub p41: f64,
    pub p44: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    #[serde(rename = "wavelength_m")]
    pub wavelength: f64,
    pub n_o: f64,
    pub n_e: f64,
    #[serde(rename = "thickness_m")]
    pub thickness: f64,
    #[serde(rename = "polarization_rad", default)]
    pub polarization: f64,
    /// Fresnel values for n_o when absent.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    #[serde(rename = "defect_width_m")]
    pub defect_width: f64,
    #[serde(rename = "u0_m")]
    pub u0: f64,
    #[serde(rename = "f_m_Hz")]
    pub f_m: f64,
    /// Quartz when absent.
    pub tensor: Option<TensorSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DuffingSection {
    #[serde(rename = "f0_Hz")]
    pub f0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "beta_per_m2_s2")]
    pub beta: f64,
    #[serde(rename = "drive_m_per_s2")]
    pub drive: f64,
    #[serde(rename = "f_start_Hz")]
    pub f_start: f64,
    #[serde(rename = "f_end_Hz")]
    pub f_end: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(rename = "drive_levels_m_per_s2")]
    pub drive_levels: Option<Vec<f64>>,
}

fn default_points() -> usize {
    801
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(rename = "speed_m_per_s")]
    pub speed: f64,
    #[serde(rename = "Z_Rayl")]
    pub impedance: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub narrow: SegmentSection,
    pub wide: SegmentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub mirror_cells_per_side: usize,
    pub mirror: CellSection,
    pub defect: CellSection,
    #[serde(rename = "termination_Z_Rayl")]
    pub termination: f64,
    #[serde(rename = "f_min_Hz")]
    pub f_min: f64,
    #[serde(rename = "f_max_Hz")]
    pub f_max: f64,
    #[serde(rename = "resolution_Hz")]
    pub resolution: f64,
}

/// RFC 6901 pointer for a serde path.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl ProjectConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            pointer: pointer(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text)
    }
}

/// Section required by a subcommand, or an error naming its pointer.
pub fn require<'a, T>(section: &'a Option<T>, name: &str, command: &str) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::Config {
        pointer: format!("/{name}"),
        message: format!("section required by `{command}` is missing"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_points_at_it() {
        let err = ProjectConfig::from_str(r#"{"bvd": {"C0_F": 1e-15, "Cm_F": 1e-19, "Lm_H": 1, "Lm": 2}}"#).unwrap_err();
        match err {
            CliError::Config { pointer, message } => {
                assert_eq!(pointer, "/bvd/Lm");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_points_at_value() {
        let err = ProjectConfig::from_str(r#"{"drive": {"n_s": "ten"}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { ref pointer, .. } if pointer == "/drive/n_s"), "{err:?}");
    }

    #[test]
    fn empty_document_is_valid_and_sections_are_checked_on_use() {
        let cfg = ProjectConfig::from_str("{}").unwrap();
        let err = require(&cfg.drive, "drive", "couple").unwrap_err();
        assert!(err.to_string().contains("/drive"));
    }

    #[test]
    fn pointer_escapes() {
        let err = ProjectConfig::from_str(r#"{"a/b~c": 1}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { ref pointer, .. } if pointer == "/a~1b~0c"), "{err:?}");
    }
}
