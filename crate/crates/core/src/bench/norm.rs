use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::l1ctl::{L1Config, NormConditionReport};
use crate::lti::TransferFunction;
use crate::plant::{linearized_velocity_channels, lipschitz_estimate, PlantParams, WindModel};

/// Input of the design-time norm check. Missing plants default to the
/// hover linearization of `plant`; a missing Lipschitz constant defaults to
/// the drag-based estimate for `plant` under `wind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormCheckConfig {
    pub l1: L1Config,
    pub plant: PlantParams,
    pub wind: WindModel,
    pub plants: Option<Vec<TransferFunction>>,
    pub lipschitz: Option<f64>,
}

impl Default for NormCheckConfig {
    fn default() -> Self {
        Self {
            l1: L1Config::default(),
            plant: PlantParams::default(),
            wind: WindModel::off(),
            plants: None,
            lipschitz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCheckOutcome {
    pub lipschitz: f64,
    pub axes: Vec<NormConditionReport>,
    pub satisfied: bool,
}

pub fn run_norm_check(cfg: &NormCheckConfig) -> Result<NormCheckOutcome, BenchError> {
    let tfs = match &cfg.plants {
        Some(p) => p.clone(),
        None => {
            cfg.plant.validate()?;
            linearized_velocity_channels(&cfg.plant)?
        }
    };
    let plants = tfs
        .iter()
        .map(|tf| tf.to_system())
        .collect::<Result<Vec<_>, _>>()?;
    let lipschitz = match cfg.lipschitz {
        Some(l) => l,
        None => {
            cfg.wind.validate()?;
            lipschitz_estimate(&cfg.wind, &cfg.plant).0
        }
    };
    let axes = cfg.l1.check_norm_condition(&plants, lipschitz)?;
    let satisfied = axes.iter().all(|r| r.satisfied);
    Ok(NormCheckOutcome {
        lipschitz,
        axes,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_satisfy_the_condition() {
        let out = run_norm_check(&NormCheckConfig::default()).unwrap();
        assert_eq!(out.axes.len(), 3);
        assert!(out.satisfied, "{out:?}");
    }

    #[test]
    fn explicit_plants_and_constant() {
        let cfg: NormCheckConfig = serde_json::from_str(
            r#"{"plants":[{"num":[1.0],"den":[1.0,1.0]},{"num":[1.0],"den":[1.0,1.0]},{"num":[1.0],"den":[1.0,1.0]}],
                "lipschitz": 1000.0}"#,
        )
        .unwrap();
        let out = run_norm_check(&cfg).unwrap();
        assert!(!out.satisfied);
        assert_eq!(out.lipschitz, 1000.0);
    }
}
