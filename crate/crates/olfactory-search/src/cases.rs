//! Test-case definitions and the four canonical presets.

use crate::env::{Cell, GridSpec, ModelVariant, ObservationModelParams};
use crate::error::{Error, Result};
use crate::util::{fnv1a64_push, FNV_OFFSET};
use serde::{Deserialize, Serialize};

/// Names of the canonical benchmark cases.
pub const PRESET_NAMES: [&str; 4] = [
    "isotropic-small",
    "isotropic-large",
    "windy-detections",
    "windy-scarce",
];

/// Full parameterization of one search problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub grid: GridSpec,
    pub params: ObservationModelParams,
    /// Episode step cap; reaching it without finding the source is a failure.
    pub t_max: usize,
    /// Linear size multiple of the embedding domain used for prior weights.
    pub prior_embedding_factor: usize,
}

impl CaseSpec {
    /// Looks up one of the canonical presets by name.
    pub fn preset(name: &str) -> Result<CaseSpec> {
        match name {
            "isotropic-small" => Ok(CaseSpec {
                name: name.into(),
                grid: GridSpec::new(19, 19, Cell::new(9, 9))?,
                params: ObservationModelParams::isotropic(1.0, 1.0, 2)?,
                t_max: 642,
                prior_embedding_factor: 4,
            }),
            "isotropic-large" => Ok(CaseSpec {
                name: name.into(),
                grid: GridSpec::new(53, 53, Cell::new(26, 26))?,
                params: ObservationModelParams::isotropic(3.0, 2.0, 3)?,
                t_max: 2188,
                prior_embedding_factor: 4,
            }),
            "windy-detections" => Ok(CaseSpec {
                name: name.into(),
                grid: GridSpec::new(81, 41, Cell::new(66, 21))?,
                params: ObservationModelParams::windy(2.5, 2.0, 150.0, 1)?,
                t_max: 10_000,
                prior_embedding_factor: 4,
            }),
            "windy-scarce" => Ok(CaseSpec {
                name: name.into(),
                grid: GridSpec::new(81, 41, Cell::new(66, 21))?,
                params: ObservationModelParams::windy(0.25, 2.0, 150.0, 1)?,
                t_max: 10_000,
                prior_embedding_factor: 4,
            }),
            other => Err(Error::UnknownCase(other.into())),
        }
    }

    /// Small isotropic case for tests and examples.
    pub fn synthetic(
        n_x: usize,
        n_y: usize,
        agent_start: Cell,
        lambda_over_dx: f64,
        r_dt: f64,
        h_max: u32,
        t_max: usize,
    ) -> CaseSpec {
        CaseSpec {
            name: format!("synthetic-{n_x}x{n_y}"),
            grid: GridSpec::new(n_x, n_y, agent_start).expect("valid grid"),
            params: ObservationModelParams::isotropic(lambda_over_dx, r_dt, h_max)
                .expect("valid params"),
            t_max,
            prior_embedding_factor: 4,
        }
    }

    /// Number of relative states, i.e. the belief array length.
    pub fn state_count(&self) -> usize {
        self.grid.state_count()
    }

    /// Stable hash of every field that defines the problem; policies record
    /// it so they can never be evaluated against a different case.
    pub fn fingerprint(&self) -> String {
        let mut h = FNV_OFFSET;
        h = fnv1a64_push(h, self.name.as_bytes());
        for v in [
            self.grid.n_x,
            self.grid.n_y,
            self.grid.agent_start.x,
            self.grid.agent_start.y,
            self.t_max,
            self.prior_embedding_factor,
        ] {
            h = fnv1a64_push(h, &(v as u64).to_le_bytes());
        }
        h = fnv1a64_push(h, &self.params.h_max.to_le_bytes());
        match self.params.variant {
            ModelVariant::Isotropic {
                lambda_over_dx,
                r_dt,
            } => {
                h = fnv1a64_push(h, b"isotropic");
                h = fnv1a64_push(h, &lambda_over_dx.to_le_bytes());
                h = fnv1a64_push(h, &r_dt.to_le_bytes());
            }
            ModelVariant::Windy {
                r_bar,
                v_bar,
                tau_bar,
            } => {
                h = fnv1a64_push(h, b"windy");
                h = fnv1a64_push(h, &r_bar.to_le_bytes());
                h = fnv1a64_push(h, &v_bar.to_le_bytes());
                h = fnv1a64_push(h, &tau_bar.to_le_bytes());
            }
        }
        format!("{h:016x}")
    }
}
