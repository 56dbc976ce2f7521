//! Report documents. JSON keys keep declaration order; CSV numbers use nine
//! significant digits in scientific notation.

use indexmap::IndexMap;
use ratesplit_core::decoupling::{ProtocolRun, TrialReport};
use ratesplit_core::region::{RatePoint, RegionTrace};
use ratesplit_core::EntropyResult;
use serde::Serialize;

pub const TOOL: &str = "ratesplit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Nine significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.8e}", x)
    }
}

fn pairs(v: &[(String, f64)]) -> IndexMap<String, f64> {
    v.iter().cloned().collect()
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    pub result: R,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl<'a, C: Serialize, R: Serialize> Envelope<'a, C, R> {
    pub fn new(command: &'static str, config: &'a C, result: R, runtime_seconds: Option<f64>) -> Self {
        Self { tool: TOOL, version: VERSION, command, config, result, runtime_seconds }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Serialize)]
pub struct EntropyDoc {
    pub quantity: String,
    pub system: Vec<String>,
    pub condition: Vec<String>,
    pub epsilon: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub status: String,
    pub iterations: usize,
}

impl EntropyDoc {
    pub fn from_result(quantity: &str, system: &[String], condition: &[String], r: &EntropyResult) -> Self {
        Self {
            quantity: quantity.into(),
            system: system.to_vec(),
            condition: condition.to_vec(),
            epsilon: r.epsilon,
            value: r.value,
            lower: r.lower,
            upper: r.upper,
            gap: r.gap,
            status: r.status.as_str().into(),
            iterations: r.iterations,
        }
    }

    /// Closed-form quantities such as the von Neumann entropy.
    pub fn exact(quantity: &str, system: &[String], condition: &[String], value: f64) -> Self {
        Self {
            quantity: quantity.into(),
            system: system.to_vec(),
            condition: condition.to_vec(),
            epsilon: 0.0,
            value,
            lower: value,
            upper: value,
            gap: 0.0,
            status: "optimal".into(),
            iterations: 0,
        }
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "system", "condition", "epsilon", "value", "lower", "upper", "gap", "status", "iterations"])
            .expect("in-memory write");
        w.write_record([
            self.quantity.clone(),
            self.system.join(" "),
            self.condition.join(" "),
            num(self.epsilon),
            num(self.value),
            num(self.lower),
            num(self.upper),
            num(self.gap),
            self.status.clone(),
            self.iterations.to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Serialize)]
pub struct IngredientDoc {
    pub name: String,
    pub epsilon: f64,
    pub evaluated_epsilon: f64,
    pub value: f64,
    pub upper: f64,
    pub optimal: bool,
}

#[derive(Debug, Serialize)]
pub struct PointDoc {
    pub theta: f64,
    pub branch: String,
    pub available: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub rates: IndexMap<String, f64>,
    pub signed: IndexMap<String, f64>,
    pub slack: f64,
    pub ingredients: Vec<IngredientDoc>,
}

impl From<&RatePoint> for PointDoc {
    fn from(p: &RatePoint) -> Self {
        Self {
            theta: p.theta,
            branch: p.branch.clone(),
            available: p.available,
            feasible: p.feasible,
            note: p.note.clone(),
            rates: pairs(&p.rates),
            signed: pairs(&p.signed),
            slack: p.slack,
            ingredients: p
                .ingredients
                .iter()
                .map(|i| IngredientDoc {
                    name: i.name.clone(),
                    epsilon: i.epsilon,
                    evaluated_epsilon: i.evaluated_epsilon,
                    value: i.value,
                    upper: i.upper,
                    optimal: i.optimal,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CornerDoc {
    pub name: String,
    pub rates: IndexMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct TraceDoc {
    pub channel: String,
    pub control: String,
    pub epsilon: f64,
    pub mode: String,
    pub scenario: String,
    pub points: Vec<PointDoc>,
    pub corners: Vec<CornerDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pentagon: Option<IndexMap<String, f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TraceDoc {
    pub fn new(t: &RegionTrace, notes: Vec<String>) -> Self {
        Self {
            channel: t.channel.clone(),
            control: t.control.clone(),
            epsilon: t.epsilon,
            mode: t.mode.as_str().into(),
            scenario: t.scenario.as_str().into(),
            points: t.points.iter().map(PointDoc::from).collect(),
            corners: t.corners.iter().map(|c| CornerDoc { name: c.name.clone(), rates: pairs(&c.rates) }).collect(),
            pentagon: t.pentagon.map(|p| pairs(&p.as_pairs())),
            notes,
        }
    }
}

fn push_unique(cols: &mut Vec<String>, name: &str) {
    if !cols.iter().any(|c| c == name) {
        cols.push(name.to_string());
    }
}

/// One row per point: `theta, branch, available, feasible`, the rates, the
/// unclamped bounds (`signed:` prefix), the ingredients and the slack.
/// Pentagon values not already among the ingredients are repeated on every row.
pub fn trace_csv(t: &RegionTrace) -> String {
    let (mut rates, mut signed, mut ingredients) = (Vec::new(), Vec::new(), Vec::new());
    for p in &t.points {
        p.rates.iter().for_each(|(n, _)| push_unique(&mut rates, n));
        p.signed.iter().for_each(|(n, _)| push_unique(&mut signed, n));
        p.ingredients.iter().for_each(|i| push_unique(&mut ingredients, &i.name));
    }
    let mut pentagon = t.pentagon.map(|p| p.as_pairs()).unwrap_or_default();
    pentagon.retain(|(n, _)| !ingredients.contains(n));
    let mut header: Vec<String> = ["theta", "branch", "available", "feasible"].iter().map(|s| s.to_string()).collect();
    header.extend(rates.iter().cloned());
    header.extend(signed.iter().map(|s| format!("signed:{}", s)));
    header.extend(ingredients.iter().cloned());
    header.extend(pentagon.iter().map(|(n, _)| n.clone()));
    header.push("slack".into());

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for p in &t.points {
        let mut row = vec![
            num(p.theta),
            p.branch.clone(),
            p.available.to_string(),
            p.feasible.map(|f| f.to_string()).unwrap_or_default(),
        ];
        row.extend(rates.iter().map(|n| opt(p.rate(n))));
        row.extend(signed.iter().map(|n| opt(p.signed_rate(n))));
        row.extend(ingredients.iter().map(|n| opt(p.ingredient(n))));
        row.extend(pentagon.iter().map(|(_, v)| num(*v)));
        row.push(num(p.slack));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Debug, Serialize)]
pub struct CheckDoc {
    pub name: String,
    pub rhs: f64,
    pub fraction_within: f64,
}

#[derive(Debug, Serialize)]
pub struct TrialDoc {
    pub variant: String,
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    pub theoretical_bound: f64,
    pub bound_inputs: IndexMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_fraction: Option<f64>,
    pub pass: bool,
    pub values: Vec<f64>,
}

impl TrialDoc {
    pub fn new(variant: &str, r: &TrialReport) -> Self {
        Self {
            variant: variant.into(),
            trials: r.values.len(),
            mean: r.mean,
            std_error: r.std_error,
            theoretical_bound: r.theoretical_bound,
            bound_inputs: pairs(&r.bound_inputs),
            checks: r
                .checks
                .iter()
                .map(|c| CheckDoc { name: c.name.clone(), rhs: c.rhs, fraction_within: c.fraction_within })
                .collect(),
            required_fraction: r.required_fraction,
            pass: r.pass,
            values: r.values.clone(),
        }
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "value"]).expect("in-memory write");
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), num(*v)]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Serialize)]
pub struct ProtocolDoc {
    pub theta: f64,
    pub message_dims: [usize; 2],
    pub attempts: usize,
    pub c0: f64,
    pub encoder_isometry_error: f64,
    pub conditions: IndexMap<String, f64>,
    pub delta: IndexMap<String, f64>,
    pub delta_ingredients: IndexMap<String, f64>,
    pub trace_distance: f64,
    pub fidelity: f64,
    pub within_delta: bool,
    pub failed: bool,
}

impl ProtocolDoc {
    pub fn new(run: &ProtocolRun, dims: [usize; 2]) -> Self {
        let c = &run.conditions;
        let d = &run.delta;
        let conditions = [("dec0", c.dec0), ("dec1", c.dec1), ("enc0", c.enc0), ("enc1", c.enc1)];
        let delta = [
            ("dec0", d.dec0),
            ("dec1", d.dec1),
            ("enc0", d.enc0),
            ("enc1", d.enc1),
            ("composed", d.composed),
            ("composed_alt", d.composed_alt),
        ];
        Self {
            theta: run.theta,
            message_dims: dims,
            attempts: run.attempts,
            c0: run.c0,
            encoder_isometry_error: run.encoder_isometry_error,
            conditions: conditions.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            delta: delta.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            delta_ingredients: pairs(&d.ingredients),
            trace_distance: run.trace_distance,
            fidelity: run.fidelity,
            within_delta: run.trace_distance <= d.composed,
            failed: run.failed,
        }
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["theta", "attempts", "c0", "trace_distance", "fidelity", "delta", "failed"]).expect("in-memory write");
        w.write_record([
            num(self.theta),
            self.attempts.to_string(),
            num(self.c0),
            num(self.trace_distance),
            num(self.fidelity),
            num(self.delta["composed"]),
            self.failed.to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
