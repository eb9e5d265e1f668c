// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Piecewise-constant pulse sequences, the two transfer protocols, and the
//! JSON sequence file format (`"schema": 1`).
//!
//! ```json
//! {
//!   "schema": 1,
//!   "name": "example",
//!   "initial_level": "G0",
//!   "segments": [
//!     {"duration_ns": 549.45, "fields": [
//!        {"transition": "G0-GM", "rabi_mhz": 0.91, "detuning_mhz": 0, "phase_rad": 0}]},
//!     {"duration_ns": 150, "fields": [],
//!      "readout": {"level": "A2", "t0_offset_ns": 0, "window_ns": 28}}
//!   ]
//! }
//! ```

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::drive::{check_unique_transitions, DriveField, Transition};
use crate::state::{DensityMatrix, Level};
use crate::{mhz_to_rad_per_ns, Error, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Detection window attached to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub level: Level,
    pub t0_offset_ns: f64,
    pub window_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub duration_ns: f64,
    pub fields: Vec<DriveField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Readout>,
}

impl PulseSegment {
    pub fn new(duration_ns: f64, fields: Vec<DriveField>) -> Result<Self> {
        let seg = PulseSegment {
            label: None,
            duration_ns,
            fields,
            readout: None,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Field-free segment.
    pub fn delay(duration_ns: f64) -> Result<Self> {
        Self::new(duration_ns, Vec::new())
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Result<Self> {
        self.readout = Some(readout);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ns >= 0.0 && self.duration_ns.is_finite()) {
            return Err(Error::param("duration_ns", format!("must be >= 0, got {}", self.duration_ns)));
        }
        check_unique_transitions(&self.fields)?;
        for f in &self.fields {
            f.validate()?;
        }
        if let Some(r) = &self.readout {
            let end = r.t0_offset_ns + r.window_ns;
            if !(r.t0_offset_ns >= 0.0 && r.window_ns >= 0.0 && end <= self.duration_ns + 1e-9) {
                return Err(Error::param(
                    "readout",
                    format!(
                        "window [{}, {}] ns lies outside the {} ns segment",
                        r.t0_offset_ns, end, self.duration_ns
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub name: String,
    /// Ideal projective reset target before the first segment.
    pub initial_level: Level,
    pub segments: Vec<PulseSegment>,
}

impl Sequence {
    pub fn new(name: &str, initial_level: Level, segments: Vec<PulseSegment>) -> Result<Self> {
        let seq = Sequence {
            name: name.to_string(),
            initial_level,
            segments,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::param("name", "must not be empty"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            s.validate().map_err(|e| Error::SequenceFormat(format!("segment {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::projector(self.initial_level)
    }

    pub fn total_duration_ns(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_ns).sum()
    }

    /// Index of the first segment carrying a readout marker.
    pub fn readout_segment(&self) -> Option<(usize, &Readout)> {
        self.segments
            .iter()
            .enumerate()
            .find_map(|(i, s)| s.readout.as_ref().map(|r| (i, r)))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("sequence serializes");
        let obj = v.as_object_mut().expect("object");
        let mut ordered = Map::new();
        ordered.insert("schema".into(), Value::from(SCHEMA_VERSION));
        for (k, val) in std::mem::take(obj) {
            ordered.insert(k, val);
        }
        serde_json::to_string_pretty(&Value::Object(ordered)).expect("json")
    }
}

/// Drive parameters shared by the built-in protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub rabi_mw_mhz: f64,
    pub rabi_opt_mhz: f64,
    /// Raman detuning of the optical pair (MHz), put on the GP leg.
    pub raman_detuning_mhz: f64,
    /// Length of the optical readout pulse in the microwave→optical protocol.
    pub optical_readout_ns: f64,
    pub window_t0_ns: f64,
    pub window_ns: f64,
    /// Length of the optical pumping pulse in the optical→microwave protocol.
    pub pump_ns: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            rabi_mw_mhz: 0.91,
            rabi_opt_mhz: 27.0,
            raman_detuning_mhz: 0.0,
            optical_readout_ns: 150.0,
            window_t0_ns: 0.0,
            window_ns: 28.0,
            pump_ns: 500.0,
        }
    }
}

/// Resonant microwave pulse of rotation angle `angle_rad`.
pub fn mw_pulse(transition: Transition, phase_rad: f64, angle_rad: f64, rabi_mhz: f64) -> Result<PulseSegment> {
    if !transition.is_microwave() {
        return Err(Error::param(
            "transition",
            format!("{transition} is not a microwave transition (G0-GM, G0-GP)"),
        ));
    }
    if !(angle_rad >= 0.0) {
        return Err(Error::param("angle_rad", "must be >= 0"));
    }
    if !(rabi_mhz > 0.0) {
        return Err(Error::param("rabi_mhz", "must be > 0 for a pulse"));
    }
    let duration = angle_rad / mhz_to_rad_per_ns(rabi_mhz);
    PulseSegment::new(duration, vec![DriveField::resonant(transition, rabi_mhz, phase_rad)?])
}

/// Equal-Rabi Λ pair on A2 with relative phase `φ₊ − φ₋`.
pub fn optical_pair(params: &ProtocolParams, phi_plus: f64, phi_minus: f64) -> Result<Vec<DriveField>> {
    Ok(vec![
        DriveField::new(Transition::GpA2, params.rabi_opt_mhz, params.raman_detuning_mhz, phi_plus)?,
        DriveField::new(Transition::GmA2, params.rabi_opt_mhz, 0.0, phi_minus)?,
    ])
}

/// Microwave → optical transfer: reset to G0, π/2 on G0↔GM (phase φ₋),
/// π on G0↔GP (phase φ₊), then the optical pair with an A2 readout window.
pub fn seq_mw_to_opt(
    phi_plus_mw: f64,
    phi_minus_mw: f64,
    phi_plus_opt: f64,
    phi_minus_opt: f64,
    params: &ProtocolParams,
) -> Result<Sequence> {
    let readout = Readout {
        level: Level::A2,
        t0_offset_ns: params.window_t0_ns,
        window_ns: params.window_ns,
    };
    let segments = vec![
        PulseSegment::delay(0.0)?.labelled("init"),
        mw_pulse(Transition::G0Gm, phi_minus_mw, FRAC_PI_2, params.rabi_mw_mhz)?.labelled("mw_pi_half"),
        mw_pulse(Transition::G0Gp, phi_plus_mw, PI, params.rabi_mw_mhz)?.labelled("mw_pi"),
        PulseSegment::new(params.optical_readout_ns, optical_pair(params, phi_plus_opt, phi_minus_opt)?)?
            .labelled("optical_readout")
            .with_readout(readout)?,
    ];
    Sequence::new("mw_to_opt", Level::G0, segments)
}

/// Duration `π/(√2·Ω̄)` of the simultaneous microwave pair that moves the
/// microwave-bright superposition to G0.
pub fn mw_pair_duration_ns(rabi_mw_mhz: f64) -> f64 {
    PI / (SQRT_2 * mhz_to_rad_per_ns(rabi_mw_mhz))
}

/// Optical → microwave transfer: reset, π to GM, optical pumping into the
/// dark state, free delay, simultaneous microwave pair, G0 readout at the
/// end of the pair.
pub fn seq_opt_to_mw(
    phi_opt_pair: (f64, f64),
    phi_mw_pair: (f64, f64),
    delay_ns: f64,
    params: &ProtocolParams,
) -> Result<Sequence> {
    if !(delay_ns >= 0.0) {
        return Err(Error::param("delay_ns", "must be >= 0"));
    }
    let tau = mw_pair_duration_ns(params.rabi_mw_mhz);
    let pair = vec![
        DriveField::resonant(Transition::G0Gp, params.rabi_mw_mhz, phi_mw_pair.0)?,
        DriveField::resonant(Transition::G0Gm, params.rabi_mw_mhz, phi_mw_pair.1)?,
    ];
    let readout = Readout {
        level: Level::G0,
        t0_offset_ns: tau,
        window_ns: 0.0,
    };
    let segments = vec![
        PulseSegment::delay(0.0)?.labelled("init"),
        mw_pulse(Transition::G0Gm, 0.0, PI, params.rabi_mw_mhz)?.labelled("mw_pi"),
        PulseSegment::new(params.pump_ns, optical_pair(params, phi_opt_pair.0, phi_opt_pair.1)?)?
            .labelled("optical_pump"),
        PulseSegment::delay(delay_ns)?.labelled("delay"),
        PulseSegment::new(tau, pair)?.labelled("mw_pair").with_readout(readout)?,
    ];
    Sequence::new("opt_to_mw", Level::G0, segments)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::SequenceFormat(msg.into())
}

fn get_f64(obj: &Map<String, Value>, key: &str, ctx: &str) -> Result<f64> {
    match obj.get(key) {
        None => Err(format_err(format!("{ctx}: missing `{key}`"))),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| format_err(format!("{ctx}: `{key}` must be a number, got {v}"))),
    }
}

fn get_f64_or(obj: &Map<String, Value>, key: &str, ctx: &str, default: f64) -> Result<f64> {
    if obj.contains_key(key) {
        get_f64(obj, key, ctx)
    } else {
        Ok(default)
    }
}

fn get_level(obj: &Map<String, Value>, key: &str, ctx: &str) -> Result<Level> {
    let s = obj
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format_err(format!("{ctx}: missing or non-string `{key}`")))?;
    s.parse().map_err(|e| format_err(format!("{ctx}: {e}")))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], ctx: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(format_err(format!("{ctx}: unknown key `{k}` (allowed: {})", allowed.join(", "))));
        }
    }
    Ok(())
}

fn parse_field(v: &Value, ctx: &str) -> Result<DriveField> {
    let obj = v.as_object().ok_or_else(|| format_err(format!("{ctx}: expected an object")))?;
    check_keys(obj, &["transition", "rabi_mhz", "detuning_mhz", "phase_rad"], ctx)?;
    let name = obj
        .get("transition")
        .and_then(Value::as_str)
        .ok_or_else(|| format_err(format!("{ctx}: missing or non-string `transition`")))?;
    let transition: Transition = name.parse().map_err(|e| format_err(format!("{ctx}: {e}")))?;
    let field = DriveField {
        transition,
        rabi_mhz: get_f64(obj, "rabi_mhz", ctx)?,
        detuning_mhz: get_f64_or(obj, "detuning_mhz", ctx, 0.0)?,
        phase_rad: get_f64_or(obj, "phase_rad", ctx, 0.0)?,
    };
    field.validate().map_err(|e| format_err(format!("{ctx}: {e}")))?;
    Ok(field)
}

fn parse_segment(v: &Value, idx: usize) -> Result<PulseSegment> {
    let ctx = format!("segments[{idx}]");
    let obj = v.as_object().ok_or_else(|| format_err(format!("{ctx}: expected an object")))?;
    check_keys(obj, &["label", "duration_ns", "fields", "readout"], &ctx)?;
    let duration_ns = get_f64(obj, "duration_ns", &ctx)?;
    let fields = match obj.get("fields") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(j, f)| parse_field(f, &format!("{ctx}.fields[{j}]")))
            .collect::<Result<_>>()?,
        Some(other) => return Err(format_err(format!("{ctx}: `fields` must be an array, got {other}"))),
    };
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => return Err(format_err(format!("{ctx}: `label` must be a string, got {other}"))),
    };
    let readout = match obj.get("readout") {
        None | Some(Value::Null) => None,
        Some(r) => {
            let rctx = format!("{ctx}.readout");
            let robj = r.as_object().ok_or_else(|| format_err(format!("{rctx}: expected an object")))?;
            check_keys(robj, &["level", "t0_offset_ns", "window_ns"], &rctx)?;
            Some(Readout {
                level: get_level(robj, "level", &rctx)?,
                t0_offset_ns: get_f64_or(robj, "t0_offset_ns", &rctx, 0.0)?,
                window_ns: get_f64(robj, "window_ns", &rctx)?,
            })
        }
    };
    let seg = PulseSegment {
        label,
        duration_ns,
        fields,
        readout,
    };
    seg.validate().map_err(|e| format_err(format!("{ctx}: {e}")))?;
    Ok(seg)
}

/// Parses the JSON sequence format, reporting the offending segment or field.
pub fn parse_sequence_file(text: &str) -> Result<Sequence> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| format_err(format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column())))?;
    let obj = root.as_object().ok_or_else(|| format_err("top level must be an object"))?;
    check_keys(obj, &["schema", "name", "initial_level", "segments"], "sequence")?;
    match obj.get("schema") {
        None => {}
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(format_err(format!("unsupported schema {v} (expected {SCHEMA_VERSION})"))),
    }
    let name = obj
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| format_err("sequence: missing or non-string `name`"))?;
    let initial_level = if obj.contains_key("initial_level") {
        get_level(obj, "initial_level", "sequence")?
    } else {
        Level::G0
    };
    let segments = match obj.get("segments") {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, s)| parse_segment(s, i))
            .collect::<Result<Vec<_>>>()?,
        Some(other) => return Err(format_err(format!("sequence: `segments` must be an array, got {other}"))),
        None => return Err(format_err("sequence: missing `segments`")),
    };
    Sequence::new(name, initial_level, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mw_pulse_examples() {
        let s = mw_pulse(Transition::G0Gm, 0.0, PI, 0.91).unwrap();
        assert!((s.duration_ns - 549.45).abs() < 0.01);
        assert_eq!(mw_pulse(Transition::G0Gm, 0.0, 0.0, 0.91).unwrap().duration_ns, 0.0);
        assert!(mw_pulse(Transition::GmA2, 0.0, PI, 0.91).is_err());
    }

    #[test]
    fn mw_to_opt_structure() {
        let p = ProtocolParams::default();
        let seq = seq_mw_to_opt(0.1, 0.2, 0.3, 0.4, &p).unwrap();
        assert_eq!(seq.segments.len(), 4);
        assert_eq!(seq.initial_level, Level::G0);
        assert!(seq.segments[0].fields.is_empty());
        assert_eq!(seq.segments[1].fields[0].transition, Transition::G0Gm);
        assert_eq!(seq.segments[1].fields[0].phase_rad, 0.2);
        assert_eq!(seq.segments[2].fields[0].transition, Transition::G0Gp);
        let opt: Vec<_> = seq.segments[3].fields.iter().map(|f| f.transition).collect();
        assert!(opt.contains(&Transition::GmA2) && opt.contains(&Transition::GpA2));
        assert_eq!(seq.readout_segment().unwrap().1.level, Level::A2);
        assert!(seq.total_duration_ns() < 2000.0);
        assert_eq!(seq, seq_mw_to_opt(0.1, 0.2, 0.3, 0.4, &p).unwrap());
    }

    #[test]
    fn opt_to_mw_structure() {
        let p = ProtocolParams::default();
        assert!((mw_pair_duration_ns(0.91) - 388.5).abs() < 0.1);
        let seq = seq_opt_to_mw((0.0, 0.0), (0.0, 0.0), 0.0, &p).unwrap();
        assert_eq!(seq.segments[3].duration_ns, 0.0);
        assert!(seq.segments[2].duration_ns >= 310.0);
        assert_eq!(seq.segments.last().unwrap().fields.len(), 2);
        assert!(seq_opt_to_mw((0.0, 0.0), (0.0, 0.0), -1.0, &p).is_err());
    }

    #[test]
    fn round_trip_builtins() {
        let p = ProtocolParams::default();
        for seq in [
            seq_mw_to_opt(0.1, -0.2, 1.3, 0.4, &p).unwrap(),
            seq_opt_to_mw((0.5, 0.1), (2.0, -1.0), 120.0, &p).unwrap(),
        ] {
            let text = seq.to_json();
            assert!(text.contains("\"schema\": 1"));
            assert_eq!(parse_sequence_file(&text).unwrap(), seq);
        }
    }

    #[test]
    fn parse_errors_are_located() {
        let missing = r#"{"name":"x","segments":[{"duration_ns":1,"fields":[]},{"fields":[]}]}"#;
        let err = parse_sequence_file(missing).unwrap_err().to_string();
        assert!(err.contains("segments[1]") && err.contains("duration_ns"), "{err}");

        let bad = r#"{"name":"x","segments":[{"duration_ns":1,"fields":[{"transition":"GM-GP","rabi_mhz":1}]}]}"#;
        let err = parse_sequence_file(bad).unwrap_err().to_string();
        assert!(err.contains("segments[0].fields[0]") && err.contains("G0-GM, G0-GP, GM-A2, GP-A2, G0-EY"), "{err}");

        let dup = r#"{"name":"x","segments":[{"duration_ns":1,"fields":[
            {"transition":"G0-GM","rabi_mhz":1},{"transition":"G0-GM","rabi_mhz":2}]}]}"#;
        assert!(parse_sequence_file(dup).is_err());

        let window = r#"{"name":"x","segments":[{"duration_ns":10,"fields":[],
            "readout":{"level":"A2","t0_offset_ns":0,"window_ns":28}}]}"#;
        assert!(parse_sequence_file(window).unwrap_err().to_string().contains("readout"));

        assert!(parse_sequence_file("{").unwrap_err().to_string().contains("line"));
        assert!(parse_sequence_file(r#"{"schema":2,"name":"x","segments":[]}"#).is_err());
        assert!(parse_sequence_file(r#"{"name":"","segments":[]}"#).is_err());
    }
}
