//! Flat key-value run configuration (JSON-compatible).
//!
//! Every key is optional except the bath-1 block; see the README for the
//! full key list. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{PropagatorKind, SweepSpec, SwitchingConfig};
use crate::model::{BathSpec, DensityOfStates, DosFamily, EnergyDefinition};
use crate::stats::{Binning, SamplingPlan, MIN_BINS};
use crate::switched::ActiveBath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_points: Option<usize>,
    /// "linear" or "log".
    #[serde(default = "default_spacing")]
    pub omega_spacing: String,

    #[serde(default = "one")]
    pub tp_mass: f64,
    #[serde(default)]
    pub initial_energy: f64,
    /// Initial energies for the initial-energy scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_energies: Option<Vec<f64>>,

    pub bath1_n: usize,
    pub bath1_mass: f64,
    pub bath1_temperature: f64,
    #[serde(default = "default_dos")]
    pub bath1_dos: String,
    pub bath1_omega_ir: f64,
    pub bath1_omega_uv: f64,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_dos: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_omega_ir: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath2_omega_uv: Option<f64>,

    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub warmup: f64,

    /// "eigen" or "switched_rk4"; defaults by bath count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta_t_steps: u64,
    /// 1 or 2.
    #[serde(default = "default_active")]
    pub active_first: u8,

    #[serde(default = "default_bins")]
    pub hist_bins: usize,
    #[serde(default = "default_range")]
    pub hist_range_factor: f64,
    /// "bare" or "dressed".
    #[serde(default = "default_energy_def")]
    pub energy_definition: String,
}

fn one() -> f64 {
    1.0
}
fn default_spacing() -> String {
    "linear".into()
}
fn default_dos() -> String {
    "uniform".into()
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_interval() -> f64 {
    SamplingPlan::default().mean_interval
}
fn default_samples() -> usize {
    SamplingPlan::default().n_samples
}
fn default_delta() -> u64 {
    1
}
fn default_active() -> u8 {
    1
}
fn default_bins() -> usize {
    Binning::default().n_bins
}
fn default_range() -> f64 {
    Binning::default().range_factor
}
fn default_energy_def() -> String {
    "bare".into()
}

/// Re-keys a bath validation error with the config prefix.
fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidParameter { key, reason } => {
            let key = match key.as_str() {
                "n_oscillators" => format!("{prefix}_n"),
                other => other
                    .split('/')
                    .map(|k| format!("{prefix}_{k}"))
                    .collect::<Vec<_>>()
                    .join("/"),
            };
            Error::InvalidParameter { key, reason }
        }
        e => e,
    }
}

fn dos_family(key: &str, name: &str) -> Result<DosFamily> {
    name.parse().map_err(|_| {
        Error::invalid(
            key,
            format!("unknown family `{name}` (expected uniform, square or inverse_square)"),
        )
    })
}

fn bath_spec(prefix: &str, n: usize, mass: f64, t: f64, dos: &str, ir: f64, uv: f64) -> Result<BathSpec> {
    let spec = BathSpec {
        n_oscillators: n,
        mass,
        temperature: t,
        dos: DensityOfStates {
            family: dos_family(&format!("{prefix}_dos"), dos)?,
            omega_ir: ir,
            omega_uv: uv,
        },
    };
    spec.validate().map_err(|e| prefixed(e, prefix))?;
    Ok(spec)
}

impl RunConfig {
    pub fn omega_grid(&self) -> Result<Vec<f64>> {
        let ranged = [
            self.omega_min.is_some(),
            self.omega_max.is_some(),
            self.omega_points.is_some(),
        ];
        match (&self.omega_grid, ranged) {
            (Some(_), r) if r.iter().any(|x| *x) => Err(Error::invalid(
                "omega_grid",
                "give either omega_grid or omega_min/omega_max/omega_points, not both",
            )),
            (Some(g), _) => Ok(g.clone()),
            (None, [true, true, true]) => {
                let (lo, hi, n) = (self.omega_min.unwrap(), self.omega_max.unwrap(), self.omega_points.unwrap());
                if n == 0 {
                    return Err(Error::invalid("omega_points", "must be at least 1"));
                }
                if n > 1 && !(hi > lo) {
                    return Err(Error::invalid("omega_min/omega_max", "omega_min must be below omega_max"));
                }
                if n == 1 {
                    return Ok(vec![lo]);
                }
                let step = |i: usize| i as f64 / (n - 1) as f64;
                match self.omega_spacing.as_str() {
                    "linear" => Ok((0..n).map(|i| lo + (hi - lo) * step(i)).collect()),
                    "log" => {
                        if !(lo > 0.0) {
                            return Err(Error::invalid("omega_min", "must be positive for log spacing"));
                        }
                        Ok((0..n).map(|i| lo * (hi / lo).powf(step(i))).collect())
                    }
                    other => Err(Error::invalid(
                        "omega_spacing",
                        format!("unknown spacing `{other}` (expected linear or log)"),
                    )),
                }
            }
            (None, _) => Err(Error::invalid(
                "omega_grid",
                "missing: give omega_grid or all of omega_min, omega_max, omega_points",
            )),
        }
    }

    fn bath2(&self) -> Result<Option<BathSpec>> {
        let present = [
            self.bath2_n.is_some(),
            self.bath2_mass.is_some(),
            self.bath2_temperature.is_some(),
            self.bath2_omega_ir.is_some(),
            self.bath2_omega_uv.is_some(),
        ];
        if present.iter().all(|p| !p) {
            if self.bath2_dos.is_some() {
                return Err(Error::invalid("bath2_dos", "given without the other bath2 keys"));
            }
            return Ok(None);
        }
        let names = ["bath2_n", "bath2_mass", "bath2_temperature", "bath2_omega_ir", "bath2_omega_uv"];
        if let Some(i) = present.iter().position(|p| !p) {
            return Err(Error::invalid(names[i], "required when any bath2 key is given"));
        }
        bath_spec(
            "bath2",
            self.bath2_n.unwrap(),
            self.bath2_mass.unwrap(),
            self.bath2_temperature.unwrap(),
            self.bath2_dos.as_deref().unwrap_or("uniform"),
            self.bath2_omega_ir.unwrap(),
            self.bath2_omega_uv.unwrap(),
        )
        .map(Some)
    }

    pub fn to_sweep_spec(&self) -> Result<SweepSpec> {
        let bath1 = bath_spec(
            "bath1",
            self.bath1_n,
            self.bath1_mass,
            self.bath1_temperature,
            &self.bath1_dos,
            self.bath1_omega_ir,
            self.bath1_omega_uv,
        )?;
        let mut baths = vec![bath1];
        baths.extend(self.bath2()?);
        let propagator = match self.propagator.as_deref() {
            None if baths.len() == 2 => PropagatorKind::SwitchedRk4,
            None | Some("eigen") => PropagatorKind::Eigen,
            Some("switched_rk4") => PropagatorKind::SwitchedRk4,
            Some(other) => {
                return Err(Error::invalid(
                    "propagator",
                    format!("unknown propagator `{other}` (expected eigen or switched_rk4)"),
                ))
            }
        };
        let active_first = match self.active_first {
            1 => ActiveBath::First,
            2 => ActiveBath::Second,
            _ => return Err(Error::invalid("active_first", "must be 1 or 2")),
        };
        let energy_definition = match self.energy_definition.as_str() {
            "bare" => EnergyDefinition::Bare,
            "dressed" => EnergyDefinition::Dressed,
            other => {
                return Err(Error::invalid(
                    "energy_definition",
                    format!("unknown definition `{other}` (expected bare or dressed)"),
                ))
            }
        };
        if self.hist_bins < MIN_BINS {
            return Err(Error::invalid("hist_bins", format!("must be at least {MIN_BINS}")));
        }
        if let Some(e0s) = &self.initial_energies {
            if e0s.is_empty() || e0s.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                return Err(Error::invalid(
                    "initial_energies",
                    "must be a non-empty list of non-negative numbers",
                ));
            }
        }
        let sampling = SamplingPlan {
            mean_interval: self.sample_interval,
            n_samples: self.n_samples,
            warmup: self.warmup,
        };
        sampling.validate().map_err(|e| match e {
            Error::InvalidParameter { key, reason } if key == "mean_interval" => {
                Error::invalid("sample_interval", reason)
            }
            e => e,
        })?;
        let spec = SweepSpec {
            omega_grid: self.omega_grid()?,
            tp_mass: self.tp_mass,
            initial_energy: self.initial_energy,
            baths,
            seeds: self.seeds.clone(),
            sampling,
            propagator,
            binning: Binning {
                n_bins: self.hist_bins,
                range_factor: self.hist_range_factor,
            },
            energy_definition,
            switching: SwitchingConfig {
                delta_t_steps: self.delta_t_steps,
                dt: self.dt,
                active_first,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The resolved configuration as a flat JSON object.
    pub fn snapshot(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses a flat JSON object into a raw map, rejecting nested objects.
pub fn parse_document(text: &str) -> Result<Map<String, Value>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed document: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Error::Config("top level must be an object".into()));
    };
    for (k, v) in &map {
        if v.is_object() {
            return Err(Error::invalid(k.clone(), "nested objects are not allowed"));
        }
    }
    Ok(map)
}

/// Applies a `key=value` override; the value is read as JSON, falling back
/// to a bare string.
pub fn apply_override(map: &mut Map<String, Value>, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    map.insert(key.to_string(), value);
    Ok(())
}

pub fn config_from_map(map: Map<String, Value>) -> Result<RunConfig> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<(RunConfig, SweepSpec)> {
    let cfg = config_from_map(parse_document(text)?)?;
    let spec = cfg.to_sweep_spec()?;
    Ok((cfg, spec))
}
