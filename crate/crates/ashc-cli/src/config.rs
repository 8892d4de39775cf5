//! Run configuration: a single TOML file with flat key paths. Every
//! section is optional and defaults to the bundled converter instance, so
//! an empty file (or no file) reproduces the canonical experiments.

use std::fmt;
use std::path::Path;

use ashc::cuk::{CukFaults, CukParams, DeltaVariant};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub params: ParamsSection,
    pub certificate: CertificateSection,
    pub abstraction: AbstractionSection,
    pub verify: VerifySection,
    pub bound: BoundSection,
    pub hierarchical: HierarchicalSection,
    pub mrelation: MrelationSection,
    pub faults: FaultsSection,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            params: ParamsSection::default(),
            certificate: CertificateSection::default(),
            abstraction: AbstractionSection::default(),
            verify: VerifySection::default(),
            bound: BoundSection::default(),
            hierarchical: HierarchicalSection::default(),
            mrelation: MrelationSection::default(),
            faults: FaultsSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub r_i: f64,
    pub l1: f64,
    pub l3: f64,
    pub c2: f64,
    pub c4: f64,
    pub g_l: f64,
    pub e: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let p = CukParams::default();
        Self {
            r_i: p.r_i,
            l1: p.l1,
            l3: p.l3,
            c2: p.c2,
            c4: p.c4,
            g_l: p.g_l,
            e: p.e,
        }
    }
}

impl ParamsSection {
    pub fn to_params(&self) -> CukParams {
        CukParams {
            r_i: self.r_i,
            l1: self.l1,
            l3: self.l3,
            c2: self.c2,
            c4: self.c4,
            g_l: self.g_l,
            e: self.e,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateSection {
    pub lambda: f64,
    pub epsilon: f64,
    pub c0: f64,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            epsilon: 1.0,
            c0: 0.52,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AbstractionSection {
    /// "unit" or "redesigned".
    pub delta: String,
}

impl Default for AbstractionSection {
    fn default() -> Self {
        Self {
            delta: "redesigned".into(),
        }
    }
}

impl AbstractionSection {
    pub fn variant(&self) -> Result<DeltaVariant, ConfigError> {
        match self.delta.as_str() {
            "unit" => Ok(DeltaVariant::Unit),
            "redesigned" => Ok(DeltaVariant::Redesigned),
            other => Err(ConfigError(format!(
                "abstraction.delta must be \"unit\" or \"redesigned\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub grid_points: usize,
    pub scan_points: usize,
    pub cloud_samples: usize,
    pub seed: u64,
    pub tol_lmi: f64,
    pub tol_invariance: f64,
    pub tol_output_consistency: f64,
    pub tol_left_inverse: f64,
    pub tol_output_recovery: f64,
    pub tol_kernel: f64,
    pub tol_mrelation: f64,
    pub tol_dissipation: f64,
    pub tol_jacobian: f64,
    pub tol_link_form: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            grid_points: 1001,
            scan_points: 2001,
            cloud_samples: 1000,
            seed: 42,
            tol_lmi: 1e-6,
            tol_invariance: 1e-8,
            tol_output_consistency: 1e-10,
            tol_left_inverse: 1e-9,
            tol_output_recovery: 1e-9,
            tol_kernel: 1e-9,
            tol_mrelation: 1e-8,
            tol_dissipation: 1e-6,
            tol_jacobian: 1e-5,
            tol_link_form: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub d_bar: f64,
    pub v_inf: f64,
    /// Initial simulation-function value for the transient curve.
    pub w0: Option<f64>,
    /// Times at which to print the transient bound.
    pub times: Vec<f64>,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self {
            d_bar: 12.35,
            v_inf: 60.0,
            w0: None,
            times: vec![0.0, 0.5, 1.0, 2.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchicalSection {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub xi0: f64,
    /// Plant initial state; empty means start on the manifold at `p(xi0)`.
    pub x0: Vec<f64>,
    pub targets: Vec<f64>,
    pub dwell: f64,
    pub kp: f64,
    pub v_max: f64,
    /// "reference" tracks the target schedule, "zero" holds v = 0.
    pub policy: String,
}

impl Default for HierarchicalSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_end: 30.0,
            step: 1e-4,
            xi0: 0.6156,
            x0: vec![],
            targets: vec![-19.11, -80.90, -44.27, -4.31, -12.48, -32.91],
            dwell: 5.0,
            kp: 5.0,
            v_max: 60.0,
            policy: "reference".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MrelationSection {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub x0: Vec<f64>,
    /// Shift applied to the on-manifold initial value m(x0); nonzero
    /// values demonstrate detection of off-manifold starts.
    pub xi0_offset: f64,
    pub match_tol: f64,
}

impl Default for MrelationSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_end: 15.0,
            step: 1e-4,
            x0: vec![10.3256, 2.0561, -4.9785, -6.9732],
            xi0_offset: 0.0,
            match_tol: 1e-6,
        }
    }
}

/// Deliberate fault injection for validating the checking pipeline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FaultsSection {
    pub p4_offset: f64,
    pub alternate_m_root: bool,
}

impl FaultsSection {
    pub fn to_faults(&self) -> CukFaults {
        CukFaults {
            p4_offset: self.p4_offset,
            alternate_m_root: self.alternate_m_root,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write every Nth sample to CSV; 1 keeps full resolution.
    pub decimation: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { decimation: 10 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    /// Canonical TOML rendering, used as the parameter snapshot and as the
    /// digest payload when no file was given.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.abstraction.variant()?;
        let cert = &self.certificate;
        if !cert.lambda.is_finite() || cert.lambda <= 0.0 {
            return Err(ConfigError("certificate.lambda must be positive".into()));
        }
        if !cert.epsilon.is_finite() || cert.epsilon <= 0.0 || cert.epsilon >= cert.lambda {
            return Err(ConfigError(
                "certificate.epsilon must satisfy 0 < epsilon < lambda".into(),
            ));
        }
        if !cert.c0.is_finite() || cert.c0 <= 0.0 {
            return Err(ConfigError("certificate.c0 must be positive".into()));
        }
        if self.verify.grid_points < 2 || self.verify.scan_points < 2 {
            return Err(ConfigError("verify grids need at least 2 points".into()));
        }
        if self.output.decimation == 0 {
            return Err(ConfigError("output.decimation must be >= 1".into()));
        }
        match self.hierarchical.policy.as_str() {
            "reference" | "zero" => {}
            other => {
                return Err(ConfigError(format!(
                    "hierarchical.policy must be \"reference\" or \"zero\", got \"{other}\""
                )))
            }
        }
        if self.mrelation.x0.len() != 4 {
            return Err(ConfigError("mrelation.x0 must have 4 components".into()));
        }
        if !self.hierarchical.x0.is_empty() && self.hierarchical.x0.len() != 4 {
            return Err(ConfigError(
                "hierarchical.x0 must be empty or have 4 components".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_config() {
        let cfg: Config = toml::from_str("").unwrap();
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = Config::default();
        let snap = cfg.snapshot();
        let back: Config = toml::from_str(&snap).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[params]\nresistance = 1.0\n").is_err());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs/cuk.toml");
        let (cfg, _) = Config::load(&path).unwrap();
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn validation_rejects_bad_epsilon() {
        let mut cfg = Config::default();
        cfg.certificate.epsilon = 3.0;
        assert!(cfg.validate().is_err());
    }
}
