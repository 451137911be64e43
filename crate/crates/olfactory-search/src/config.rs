//! Structured key-value configuration files.
//!
//! The format is one `key = value` pair per line, `#` comments, blank lines
//! ignored. Parsing is fail-closed: a key that no active section recognizes
//! is an error (preventing silent hyperparameter typos), and every error
//! carries its line number.

use crate::cases::CaseSpec;
use crate::drl::TrainerConfig;
use crate::env::{GridSpec, ModelVariant, ObservationModelParams};
use crate::error::{Error, Result};
use crate::pbvi::PerseusConfig;
use std::path::Path;

/// Parsed overlay: ordered `(line, key, value)` entries.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverlay {
    entries: Vec<(usize, String, String)>,
}

impl ConfigOverlay {
    pub fn parse(text: &str) -> Result<ConfigOverlay> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(Error::Config {
                line,
                msg: "expected 'key = value'".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: "empty key or value".into(),
                });
            }
            entries.push((line, key.to_string(), value.to_string()));
        }
        Ok(ConfigOverlay { entries })
    }

    pub fn from_file(path: &Path) -> Result<ConfigOverlay> {
        let text = std::fs::read_to_string(path)?;
        ConfigOverlay::parse(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Applies the overlay. Sections passed as `None` are inactive; keys
    /// belonging to no active section fail with their line number.
    pub fn apply(
        &self,
        case: &mut CaseSpec,
        mut trainer: Option<&mut TrainerConfig>,
        mut perseus: Option<&mut PerseusConfig>,
    ) -> Result<()> {
        for (line, key, value) in &self.entries {
            let line = *line;
            if apply_case_key(case, line, key, value)? {
                continue;
            }
            if let Some(t) = trainer.as_deref_mut() {
                if apply_trainer_key(t, line, key, value)? {
                    continue;
                }
            }
            if let Some(p) = perseus.as_deref_mut() {
                if apply_perseus_key(p, line, key, value)? {
                    continue;
                }
            }
            return Err(Error::Config {
                line,
                msg: format!("unknown key '{key}'"),
            });
        }
        // Re-validate the assembled case.
        case.grid =
            GridSpec::new(case.grid.n_x, case.grid.n_y, case.grid.agent_start).map_err(|e| {
                Error::Config {
                    line: 0,
                    msg: e.to_string(),
                }
            })?;
        if let Some(t) = trainer {
            t.validate()?;
        }
        Ok(())
    }
}

fn parse_as<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        msg: format!("cannot parse '{value}' for key '{key}'"),
    })
}

fn rebuild_isotropic(
    case: &mut CaseSpec,
    line: usize,
    lambda_over_dx: f64,
    r_dt: f64,
    h_max: u32,
) -> Result<()> {
    case.params = ObservationModelParams::isotropic(lambda_over_dx, r_dt, h_max).map_err(|e| {
        Error::Config {
            line,
            msg: e.to_string(),
        }
    })?;
    Ok(())
}

fn rebuild_windy(
    case: &mut CaseSpec,
    line: usize,
    r_bar: f64,
    v_bar: f64,
    tau_bar: f64,
    h_max: u32,
) -> Result<()> {
    case.params =
        ObservationModelParams::windy(r_bar, v_bar, tau_bar, h_max).map_err(|e| Error::Config {
            line,
            msg: e.to_string(),
        })?;
    Ok(())
}

fn apply_case_key(case: &mut CaseSpec, line: usize, key: &str, value: &str) -> Result<bool> {
    match key {
        "name" => case.name = value.to_string(),
        "n_x" => case.grid.n_x = parse_as(line, key, value)?,
        "n_y" => case.grid.n_y = parse_as(line, key, value)?,
        "agent_start_x" => case.grid.agent_start.x = parse_as(line, key, value)?,
        "agent_start_y" => case.grid.agent_start.y = parse_as(line, key, value)?,
        "t_max" => case.t_max = parse_as(line, key, value)?,
        "prior_embedding_factor" => {
            case.prior_embedding_factor = parse_as(line, key, value)?;
            if case.prior_embedding_factor < 2 {
                return Err(Error::Config {
                    line,
                    msg: "prior_embedding_factor must be at least 2".into(),
                });
            }
        }
        "h_max" => {
            let h: u32 = parse_as(line, key, value)?;
            match case.params.variant {
                ModelVariant::Isotropic {
                    lambda_over_dx,
                    r_dt,
                } => rebuild_isotropic(case, line, lambda_over_dx, r_dt, h)?,
                ModelVariant::Windy {
                    r_bar,
                    v_bar,
                    tau_bar,
                } => rebuild_windy(case, line, r_bar, v_bar, tau_bar, h)?,
            }
        }
        "lambda_over_dx" | "r_dt" => {
            let v: f64 = parse_as(line, key, value)?;
            match case.params.variant {
                ModelVariant::Isotropic {
                    lambda_over_dx,
                    r_dt,
                } => {
                    let (l, r) = if key == "lambda_over_dx" {
                        (v, r_dt)
                    } else {
                        (lambda_over_dx, v)
                    };
                    rebuild_isotropic(case, line, l, r, case.params.h_max)?
                }
                ModelVariant::Windy { .. } => {
                    return Err(Error::Config {
                        line,
                        msg: format!("'{key}' applies only to isotropic cases"),
                    })
                }
            }
        }
        "r_bar" | "v_bar" | "tau_bar" => {
            let v: f64 = parse_as(line, key, value)?;
            match case.params.variant {
                ModelVariant::Windy {
                    r_bar,
                    v_bar,
                    tau_bar,
                } => {
                    let (r, vb, t) = match key {
                        "r_bar" => (v, v_bar, tau_bar),
                        "v_bar" => (r_bar, v, tau_bar),
                        _ => (r_bar, v_bar, v),
                    };
                    rebuild_windy(case, line, r, vb, t, case.params.h_max)?
                }
                ModelVariant::Isotropic { .. } => {
                    return Err(Error::Config {
                        line,
                        msg: format!("'{key}' applies only to windy cases"),
                    })
                }
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_trainer_key(cfg: &mut TrainerConfig, line: usize, key: &str, value: &str) -> Result<bool> {
    match key {
        "lr" => cfg.lr = parse_as(line, key, value)?,
        "epsilon_init" => cfg.epsilon_init = parse_as(line, key, value)?,
        "epsilon_floor" => cfg.epsilon_floor = parse_as(line, key, value)?,
        "epsilon_decay" => cfg.epsilon_decay = parse_as(line, key, value)?,
        "memory_size" => cfg.memory_size = parse_as(line, key, value)?,
        "minibatch_size" => cfg.minibatch_size = parse_as(line, key, value)?,
        "new_transitions_per_it" => cfg.new_transitions_per_it = parse_as(line, key, value)?,
        "gd_steps_per_it" => cfg.gd_steps_per_it = parse_as(line, key, value)?,
        "update_target_network_it" => cfg.update_target_network_it = parse_as(line, key, value)?,
        "hidden_units" => cfg.hidden_units = parse_as(line, key, value)?,
        "max_iterations" => cfg.max_iterations = parse_as(line, key, value)?,
        "eval_every" => cfg.eval_every = parse_as(line, key, value)?,
        "eval_episodes" => cfg.eval_episodes = parse_as(line, key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_perseus_key(cfg: &mut PerseusConfig, line: usize, key: &str, value: &str) -> Result<bool> {
    match key {
        "gamma" => {
            cfg.gamma = parse_as(line, key, value)?;
            if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
                return Err(Error::Config {
                    line,
                    msg: "gamma must be in (0, 1)".into(),
                });
            }
        }
        "shaping_c" => {
            cfg.shaping_c = parse_as(line, key, value)?;
            if cfg.shaping_c < 0.0 {
                return Err(Error::Config {
                    line,
                    msg: "shaping_c must be >= 0".into(),
                });
            }
        }
        "bank_size" => cfg.bank_size = parse_as(line, key, value)?,
        "stop_patience" => cfg.stop_patience = parse_as(line, key, value)?,
        "eval_every" => cfg.eval_every = parse_as(line, key, value)?,
        "eval_episodes" => cfg.eval_episodes = parse_as(line, key, value)?,
        "max_iterations" => cfg.max_iterations = parse_as(line, key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Convenience: resolve a case from a preset name plus an optional overlay
/// file (case keys only).
pub fn load_case(preset: &str, overlay_path: Option<&Path>) -> Result<CaseSpec> {
    let mut case = CaseSpec::preset(preset)?;
    if let Some(path) = overlay_path {
        ConfigOverlay::from_file(path)?.apply(&mut case, None, None)?;
    }
    Ok(case)
}
