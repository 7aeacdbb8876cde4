//! Run configuration files. TOML with one section per concern; all rates in
//! units of κ unless `kappa` is set explicitly.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> c64 {
        match self {
            ComplexValue::Real(x) => c64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => c64::new(re, im),
        }
    }
}

impl Serialize for ComplexValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ComplexValue::Real(x) => s.serialize_f64(x),
            ComplexValue::Pair(p) => p.serialize(s),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn zero_c() -> ComplexValue {
    ComplexValue::Real(0.0)
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(rename = "Lambda3Tilde")]
    pub lambda3_tilde: ComplexValue,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(rename = "deltaLambda1", default = "zero_c")]
    pub delta_lambda1: ComplexValue,
    pub dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    Dp5,
    Pade,
}

fn default_integrator() -> IntegratorName {
    IntegratorName::Dp5
}

fn default_max_step() -> f64 {
    0.05
}

fn default_budget() -> f64 {
    crate::dynamics::LEAKAGE_BUDGET
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub stride: f64,
    #[serde(default = "default_integrator")]
    pub method: IntegratorName,
    /// Step of the Padé integrator.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    #[serde(default)]
    pub initial_fock: usize,
    #[serde(default = "default_budget")]
    pub leakage_budget: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: [&str; 7] = ["U", "kappa", "Lambda3Tilde", "r", "deltaLambda1", "dim", "sigma"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Additive,
    Multiplicative,
    Phase,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(rename = "target_P1")]
    pub target_p1: Option<f64>,
    pub tau_block: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethodName {
    Auto,
    Dense,
    ShiftInvert,
}

fn default_gap_method() -> GapMethodName {
    GapMethodName::Auto
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_gap_method")]
    pub method: GapMethodName,
    /// Also run the golden-rule escape estimate (integer `r` only).
    #[serde(default)]
    pub fgr: bool,
    pub fgr_dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeMethod {
    Fit,
    Fgr,
}

fn default_escape_method() -> EscapeMethod {
    EscapeMethod::Fit
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSection {
    #[serde(default = "default_escape_method")]
    pub method: EscapeMethod,
    pub fit_start: Option<f64>,
    pub fit_end: Option<f64>,
    pub plateau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AntiresonanceSection {
    pub min_offset: f64,
    pub max_offset: f64,
    pub points_per_side: usize,
    /// Defaults to the model's `r`, rounded.
    pub center: Option<f64>,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// One input row of `tune`.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TuneRow {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(rename = "Lambda3Tilde")]
    pub lambda3_tilde: ComplexValue,
    #[serde(default = "one")]
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape: Option<EscapeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antiresonance: Option<AntiresonanceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
    #[serde(default, rename = "row", skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<TuneRow>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the `[name]` (or `[[name]]`) header, if present.
fn section_line(text: &str, name: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim();
        t == format!("[{name}]") || t == format!("[[{name}]]")
    })
    .map(|i| i + 1)
}

fn config_error(text: &str, section: &str, message: String) -> Error {
    Error::Config { line: section_line(text, section), message }
}

/// Sections each command reads.
pub fn allowed_sections(command: &str) -> &'static [&'static str] {
    match command {
        "tune" => &["row"],
        "evolve" => &["model", "time", "sweep"],
        "steady" => &["model", "sweep"],
        "spectrum" => &["model", "spectrum", "sweep"],
        "semiclassical" => &["model", "sweep"],
        "escape" => &["model", "time", "escape", "sweep"],
        "protocol" => &["model", "protocol", "noise", "sweep"],
        "antiresonance" => &["model", "antiresonance", "sweep"],
        "channel" => &["model", "noise", "channel", "sweep"],
        _ => &[],
    }
}

impl RunConfig {
    pub fn parse(text: &str, command: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.check(text, command)?;
        Ok(cfg)
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            ("model", self.model.is_some()),
            ("time", self.time.is_some()),
            ("sweep", self.sweep.is_some()),
            ("noise", self.noise.is_some()),
            ("protocol", self.protocol.is_some()),
            ("spectrum", self.spectrum.is_some()),
            ("escape", self.escape.is_some()),
            ("antiresonance", self.antiresonance.is_some()),
            ("channel", self.channel.is_some()),
            ("row", !self.rows.is_empty()),
        ];
        for (name, on) in flags {
            if on {
                v.push(name);
            }
        }
        v
    }

    fn check(&self, text: &str, command: &str) -> Result<()> {
        let allowed = allowed_sections(command);
        for name in self.present() {
            if !allowed.contains(&name) {
                return Err(config_error(text, name, format!("section [{name}] is not used by `{command}`")));
            }
        }
        let need = |name: &str, ok: bool| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config { line: None, message: format!("`{command}` needs a [{name}] section") })
            }
        };
        if command != "tune" {
            need("model", self.model.is_some())?;
        }
        match command {
            "evolve" | "escape" => need("time", self.time.is_some())?,
            "protocol" => need("protocol", self.protocol.is_some())?,
            "antiresonance" => need("antiresonance", self.antiresonance.is_some())?,
            "channel" => need("noise", self.noise.is_some())?,
            _ => {}
        }
        if let Some(m) = &self.model {
            let dim_needed = !matches!(command, "semiclassical" | "channel")
                && !(command == "escape" && matches!(&self.escape, Some(e) if e.method == EscapeMethod::Fgr));
            if dim_needed && m.dim.is_none() && !matches!(&self.sweep, Some(s) if s.param == "dim") {
                return Err(config_error(text, "model", format!("`{command}` needs `dim` in [model]")));
            }
        }
        if let Some(p) = &self.protocol {
            if p.target_p1.is_some() == p.tau_block.is_some() {
                return Err(config_error(text, "protocol", "set exactly one of `target_P1` and `tau_block`".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if !SWEEP_PARAMS.contains(&s.param.as_str()) {
                return Err(config_error(
                    text,
                    "sweep",
                    format!("unknown sweep parameter `{}`; expected one of {}", s.param, SWEEP_PARAMS.join(", ")),
                ));
            }
            if s.param == "sigma" && self.noise.is_none() {
                return Err(config_error(text, "sweep", "sweeping `sigma` needs a [noise] section".into()));
            }
            if s.param == "dim" && s.values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
                return Err(config_error(text, "sweep", "`dim` sweep values must be integers >= 2".into()));
            }
        }
        Ok(())
    }
}
