//! JSON experiment documents.
//!
//! ```json
//! {
//!   "game": {"s": [56, 40, 43, 60, 50], "p0": 0.05, "h_price": 8, "box": [30, 50]},
//!   "topology": {"type": "ring", "n": 5},
//!   "schedule": {"alpha": {"c": 0.4, "omega": 0.3}, "beta": {"c": 0.4, "omega": 0.6}},
//!   "iterations": 5000,
//!   "trials": 100,
//!   "variants": [
//!     {"name": "C2", "type": "cp-dnes", "compressor": {"type": "stochastic-quantizer", "theta": 40}}
//!   ]
//! }
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compress::{Compressor, CompressorSpec, QuantizerParams, DEFAULT_YMAX};
use crate::engines::{ConventionalStep, DscParams, EngineConfig, InitialRule, OverflowPolicy, Variant};
use crate::error::{Error, Result};
use crate::game::{EnergyGame, EnergyGameParams, ENERGY_GRADIENT_BOUND};
use crate::harness::Threshold;
use crate::network::{Topology, TopologySpec};
use crate::oracle::ne_linear;
use crate::privacy::{LedgerMode, PrivacyLedger};
use crate::schedule::{dp_product_check, ScheduleSpec, StepSchedule};

/// Engine-specific part of a variant entry, tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EngineSpec {
    CpDnes {
        compressor: CompressorSpec,
    },
    Conventional {
        #[serde(default)]
        step: ConventionalStep,
    },
    NpDnes {
        noise_decay: f64,
    },
    DscDnes {
        scale_decay: f64,
        #[serde(default = "dsc_bits")]
        bits: u32,
        #[serde(default = "default_ymax")]
        ymax: f64,
        #[serde(default)]
        overflow: OverflowPolicy,
    },
}

fn dsc_bits() -> u32 {
    8
}

fn default_ymax() -> f64 {
    DEFAULT_YMAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    /// Label used in the CSV `variant` column.
    pub name: String,
    #[serde(flatten)]
    pub engine: EngineSpec,
}

impl VariantSpec {
    pub fn build(&self) -> Result<Variant> {
        let field = |f: &str| format!("variants.{}.{f}", self.name);
        Ok(match &self.engine {
            EngineSpec::CpDnes { compressor } => Variant::CpDnes {
                compressor: compressor
                    .build()
                    .map_err(|e| Error::config(field("compressor"), e.to_string()))?,
            },
            EngineSpec::Conventional { step } => Variant::Conventional { step: *step },
            EngineSpec::NpDnes { noise_decay } => Variant::NpDnes {
                noise_decay: *noise_decay,
            },
            EngineSpec::DscDnes {
                scale_decay,
                bits,
                ymax,
                overflow,
            } => {
                let theta = ymax / (1u64 << (*bits).min(52)) as f64;
                let quantizer = QuantizerParams::with_bits(theta, *bits, *ymax)
                    .map_err(|e| Error::config(field("bits"), e.to_string()))?;
                Variant::DscDnes(DscParams {
                    scale_decay: *scale_decay,
                    quantizer,
                    overflow: *overflow,
                })
            }
        })
    }
}

/// Where the reference equilibrium comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSource {
    #[default]
    Oracle,
    Explicit { values: Vec<f64> },
}

/// Constants for the privacy ledger.
///
/// Quantized CP-DNES variants use the closed form with `(c4, c5)` when both are
/// given, else the schedule's own hyperbolic constants, else partial sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySpec {
    #[serde(default = "gradient_bound")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c5: Option<f64>,
}

fn gradient_bound() -> f64 {
    ENERGY_GRADIENT_BOUND
}

impl Default for PrivacySpec {
    fn default() -> Self {
        Self {
            c: ENERGY_GRADIENT_BOUND,
            c4: None,
            c5: None,
        }
    }
}

impl PrivacySpec {
    pub fn cp_mode(&self, schedule: &StepSchedule) -> LedgerMode {
        match (self.c4, self.c5) {
            (Some(c4), Some(c5)) => LedgerMode::ClosedForm { c4, c5 },
            _ => match dp_product_check(schedule) {
                Some((c4, c5)) => LedgerMode::ClosedForm { c4, c5 },
                None => LedgerMode::PartialSum,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub game: EnergyGameParams,
    pub topology: TopologySpec,
    #[serde(default = "energy_schedule")]
    pub schedule: ScheduleSpec,
    pub iterations: usize,
    #[serde(default)]
    pub initial: InitialRule,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub reference: ReferenceSource,
    #[serde(default)]
    pub thresholds: Vec<Threshold>,
    #[serde(default)]
    pub privacy: PrivacySpec,
    pub variants: Vec<VariantSpec>,
}

fn energy_schedule() -> ScheduleSpec {
    StepSchedule::energy_game().into()
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.topology.nodes() != self.game.players() {
            return Err(Error::config(
                "topology.n",
                format!("{} nodes for {} players", self.topology.nodes(), self.game.players()),
            ));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "at least one variant is required"));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::config("variants", format!("duplicate name `{}`", v.name)));
            }
            v.build()?;
        }
        for t in &self.thresholds {
            if !(t.level > 0.0) {
                return Err(Error::config("thresholds.level", "must be positive"));
            }
        }
        if !(self.privacy.c > 0.0) {
            return Err(Error::config("privacy.c", "must be positive"));
        }
        if let ReferenceSource::Explicit { values } = &self.reference {
            if values.len() != self.game.players() {
                return Err(Error::config("reference.values", "one value per player required"));
            }
        }
        self.schedule.build()?;
        self.topology.build()?;
        Ok(())
    }

    /// Replaces seed, trial count and iteration budget where given.
    pub fn with_overrides(mut self, seed: Option<u64>, trials: Option<usize>, iterations: Option<usize>) -> Result<Self> {
        if let Some(s) = seed {
            self.base_seed = s;
        }
        if let Some(t) = trials {
            self.trials = t;
        }
        if let Some(t) = iterations {
            self.iterations = t;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        self.schedule.build()
    }

    pub fn variant(&self, name: &str) -> Result<&VariantSpec> {
        self.variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::config("variant", format!("no variant named `{name}`")))
    }

    /// Engine configurations in declaration order, sharing one game and topology.
    pub fn engine_configs(&self) -> Result<Vec<(String, EngineConfig)>> {
        let game = Arc::new(EnergyGame::new(self.game.clone())?);
        let topology: Arc<Topology> = Arc::new(self.topology.build()?);
        let schedule = self.schedule()?;
        self.variants
            .iter()
            .map(|v| {
                let cfg = EngineConfig {
                    game: game.clone(),
                    topology: topology.clone(),
                    schedule,
                    variant: v.build()?,
                    iterations: self.iterations,
                    initial: self.initial.clone(),
                };
                cfg.validate()?;
                cfg.initial_states()?;
                Ok((v.name.clone(), cfg))
            })
            .collect()
    }

    /// Reference profile for the error metrics.
    pub fn reference(&self) -> Result<Vec<f64>> {
        match &self.reference {
            ReferenceSource::Oracle => Ok(ne_linear(&self.game)?.x_star.into_vec()),
            ReferenceSource::Explicit { values } => Ok(values.clone()),
        }
    }

    /// Ledger for a variant, or `None` when the variant has no `(0, δ)` guarantee.
    pub fn ledger(&self, variant: &Variant) -> Result<Option<PrivacyLedger>> {
        let schedule = self.schedule()?;
        let (mode, theta) = match variant {
            Variant::CpDnes {
                compressor: Compressor::Quantizer(q),
            } => (self.privacy.cp_mode(&schedule), q.theta()),
            Variant::DscDnes(p) => (LedgerMode::Dsc { r_base: p.scale_decay }, p.quantizer.theta()),
            _ => return Ok(None),
        };
        PrivacyLedger::new(mode, &schedule, self.privacy.c, 1, theta, self.iterations).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "topology": {"type": "ring", "n": 5},
        "iterations": 10,
        "variants": [
            {"name": "C1", "type": "cp-dnes", "compressor": {"type": "stochastic-quantizer", "theta": 10}},
            {"name": "conv", "type": "conventional"},
            {"name": "np", "type": "np-dnes", "noise_decay": 0.91},
            {"name": "dsc", "type": "dsc-dnes", "scale_decay": 0.87}
        ]
    }"#;

    #[test]
    fn minimal_config_uses_energy_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.game, EnergyGameParams::default());
        assert_eq!(cfg.schedule().unwrap(), StepSchedule::energy_game());
        assert_eq!(cfg.trials, 1);
        let engines = cfg.engine_configs().unwrap();
        assert_eq!(engines.len(), 4);
        match &engines[3].1.variant {
            Variant::DscDnes(p) => {
                assert_eq!(p.quantizer.bits(), 8);
                assert_eq!(p.quantizer.theta(), 90.0 / 256.0);
                assert_eq!(p.overflow, OverflowPolicy::Fault);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_named() {
        let text = MINIMAL.replace("\"iterations\"", "\"iteratons\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("iteratons"), "{err}");
    }

    #[test]
    fn bad_values_name_the_field() {
        let text = MINIMAL.replace("\"theta\": 10", "\"theta\": -1");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("variants.C1.compressor"), "{err}");
        let text = MINIMAL.replace("\"n\": 5", "\"n\": 4");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("topology.n"), "{err}");
    }

    #[test]
    fn ledgers_per_variant() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let engines = cfg.engine_configs().unwrap();
        let cp = cfg.ledger(&engines[0].1.variant).unwrap().unwrap();
        assert_eq!(cp.mode, LedgerMode::PartialSum);
        assert!(cfg.ledger(&engines[1].1.variant).unwrap().is_none());
        let dsc = cfg.ledger(&engines[3].1.variant).unwrap().unwrap();
        assert_eq!(dsc.mode, LedgerMode::Dsc { r_base: 0.87 });
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::from_json(MINIMAL)
            .unwrap()
            .with_overrides(Some(9), Some(3), Some(20))
            .unwrap();
        assert_eq!((cfg.base_seed, cfg.trials, cfg.iterations), (9, 3, 20));
        assert!(ExperimentConfig::from_json(MINIMAL)
            .unwrap()
            .with_overrides(None, Some(0), None)
            .is_err());
    }
}
