//! Persisted filter designs.
//!
//! A design is the configuration, the quantized taps, the partition plan and,
//! for stored-table designs, every table entry. The JSON document is versioned
//! and strict: unknown fields are rejected. Loading checks the document's
//! shape but deliberately trusts the stored table contents; comparing them
//! against the coefficients is what verification is for.

use serde::{Deserialize, Serialize};

use crate::da_engine::{build_lut, DaEngine, DaLut, PartitionPlan, PpgMode};
use crate::numerics::{CoefficientSet, FixedFormat};
use crate::resource_report::ArchConfig;
use crate::{Error, Result};

pub const DESIGN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub format_version: u32,
    pub config: ArchConfig,
    pub coefficients: Vec<i64>,
    pub plan: PartitionPlan,
    pub luts: Vec<DaLut>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterDesign {
    pub config: ArchConfig,
    pub coefficients: CoefficientSet,
    pub plan: PartitionPlan,
    /// Empty for multiplexer designs.
    pub luts: Vec<DaLut>,
}

impl FilterDesign {
    pub fn build(config: ArchConfig, coefficients: CoefficientSet) -> Result<Self> {
        config.validate()?;
        if coefficients.len() != config.taps {
            return Err(Error::Inconsistent(format!(
                "config declares {} taps, got {} coefficients",
                config.taps,
                coefficients.len()
            )));
        }
        if coefficients.format().width() != config.coeff_width {
            return Err(Error::Inconsistent(format!(
                "config declares {}-bit coefficients, set is {}-bit",
                config.coeff_width,
                coefficients.format().width()
            )));
        }
        let plan = config.plan()?;
        let luts = match config.ppg {
            PpgMode::StoredLut => plan
                .groups
                .iter()
                .map(|g| build_lut(&coefficients, g))
                .collect(),
            PpgMode::Mux => Vec::new(),
        };
        Ok(Self {
            config,
            coefficients,
            plan,
            luts,
        })
    }

    pub fn input_format(&self) -> FixedFormat {
        FixedFormat::new(self.config.input_width).expect("validated on construction")
    }

    /// The datapath this design describes. Stored-table designs use their
    /// stored entries, not freshly derived ones.
    pub fn engine(&self) -> Result<DaEngine> {
        let input = self.input_format();
        match self.config.ppg {
            PpgMode::StoredLut => DaEngine::with_tables(
                self.coefficients.clone(),
                input,
                self.plan.clone(),
                self.luts.clone(),
                self.config.tree,
            ),
            PpgMode::Mux => DaEngine::new(
                self.coefficients.clone(),
                input,
                self.plan.clone(),
                PpgMode::Mux,
                self.config.tree,
            ),
        }
    }

    /// Tables recomputed from the coefficients.
    pub fn rederived_luts(&self) -> Vec<DaLut> {
        match self.config.ppg {
            PpgMode::StoredLut => self
                .plan
                .groups
                .iter()
                .map(|g| build_lut(&self.coefficients, g))
                .collect(),
            PpgMode::Mux => Vec::new(),
        }
    }

    pub fn to_file(&self) -> DesignFile {
        DesignFile {
            format_version: DESIGN_FORMAT_VERSION,
            config: self.config,
            coefficients: self.coefficients.values().to_vec(),
            plan: self.plan.clone(),
            luts: self.luts.clone(),
        }
    }

    pub fn from_file(file: DesignFile) -> Result<Self> {
        if file.format_version != DESIGN_FORMAT_VERSION {
            return Err(Error::Inconsistent(format!(
                "unsupported design format version {} (expected {})",
                file.format_version, DESIGN_FORMAT_VERSION
            )));
        }
        let config = file.config;
        config.validate()?;
        let coefficients = CoefficientSet::new(file.coefficients, config.coeff_format()?)?;
        if coefficients.len() != config.taps {
            return Err(Error::Inconsistent(format!(
                "config declares {} taps, file lists {} coefficients",
                config.taps,
                coefficients.len()
            )));
        }
        if file.plan != config.plan()? {
            return Err(Error::Inconsistent(
                "partition plan does not match the configured group size".into(),
            ));
        }
        let design = Self {
            config,
            coefficients,
            plan: file.plan,
            luts: file.luts,
        };
        match config.ppg {
            PpgMode::StoredLut => {
                design.engine()?;
            }
            PpgMode::Mux if !design.luts.is_empty() => {
                return Err(Error::Inconsistent(
                    "multiplexer designs carry no tables".into(),
                ));
            }
            PpgMode::Mux => {}
        }
        Ok(design)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_file()).expect("design serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(text)
            .map_err(|e| Error::Inconsistent(format!("design document: {e}")))?;
        Self::from_file(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adder_models::AdderKind;

    fn config(ppg: PpgMode) -> ArchConfig {
        ArchConfig {
            taps: 5,
            coeff_width: 8,
            input_width: 4,
            group_size: 2,
            ppg,
            tree: AdderKind::Cla,
        }
    }

    fn coeffs() -> CoefficientSet {
        CoefficientSet::new(vec![3, -5, 127, -128, 9], FixedFormat::new(8).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip() {
        for ppg in [PpgMode::StoredLut, PpgMode::Mux] {
            let d = FilterDesign::build(config(ppg), coeffs()).unwrap();
            let text = d.to_json();
            let back = FilterDesign::from_json(&text).unwrap();
            assert_eq!(back, d);
            assert_eq!(back.rederived_luts(), d.luts);
            assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let d = FilterDesign::build(config(PpgMode::StoredLut), coeffs()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(FilterDesign::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        v["config"]["colour"] = serde_json::json!("red");
        assert!(FilterDesign::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn shape_errors_rejected() {
        let d = FilterDesign::build(config(PpgMode::StoredLut), coeffs()).unwrap();
        let mut f = d.to_file();
        f.format_version = 2;
        assert!(FilterDesign::from_file(f).is_err());
        let mut f = d.to_file();
        f.coefficients.push(1);
        assert!(FilterDesign::from_file(f).is_err());
        let mut f = d.to_file();
        f.coefficients[0] = 300;
        assert!(FilterDesign::from_file(f).is_err());
        let mut f = d.to_file();
        f.plan.groups.swap(0, 1);
        assert!(FilterDesign::from_file(f).is_err());
        let mut f = d.to_file();
        f.luts[0].entries.push(0);
        assert!(FilterDesign::from_file(f).is_err());
    }

    #[test]
    fn edited_entries_load_but_differ() {
        let d = FilterDesign::build(config(PpgMode::StoredLut), coeffs()).unwrap();
        let mut f = d.to_file();
        f.luts[1].entries[3] += 1;
        let loaded = FilterDesign::from_file(f).unwrap();
        assert_ne!(loaded.rederived_luts(), loaded.luts);
    }

    #[test]
    fn build_checks_config() {
        let mut c = config(PpgMode::Mux);
        c.taps = 4;
        assert!(FilterDesign::build(c, coeffs()).is_err());
        let mut c = config(PpgMode::Mux);
        c.coeff_width = 16;
        assert!(FilterDesign::build(c, coeffs()).is_err());
    }
}
