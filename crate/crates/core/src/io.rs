//! Scenario files, single-solve instances and CSV traces.
//!
//! Scenario files are JSON. Angles are in radians, lengths in meters, times in seconds.
//! Loading reports three kinds of failure: malformed JSON, a document that does not
//! match the schema (unknown keys, missing keys, wrong types), and a well-formed
//! document that breaks a scenario invariant. The last two name the offending field
//! and the line it sits on.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::constraints::{GeneralizedBounds, LimitSet};
use crate::kinematics::{Axis, ControlPoint, JointConfig, RobotModel, RowSource};
use crate::simulation::{PathSpec, Scenario, TimingLaw, TraceRow};
use crate::sns::TaskSpec;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{field}` (line {line}): {message}")]
    Schema {
        field: String,
        line: usize,
        message: String,
    },
    #[error("invariant violation at `{field}` (line {line}): {message}")]
    Invariant {
        field: String,
        line: usize,
        message: String,
    },
}

impl LoadError {
    /// Field path of schema and invariant errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            LoadError::Schema { field, .. } | LoadError::Invariant { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Io { .. } => None,
            LoadError::Parse { line, .. }
            | LoadError::Schema { line, .. }
            | LoadError::Invariant { line, .. } => Some(*line),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub link_lengths: Vec<f64>,
    #[serde(default)]
    pub control_points: Vec<ControlPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub duration: f64,
    pub timing: TimingLaw,
}

/// On-disk form of a [`Scenario`] plus descriptive metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Fields whose values are assumptions rather than published experiment parameters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumed: Vec<String>,
    pub model: ModelFile,
    pub limits: LimitSet,
    pub q0: Vec<f64>,
    pub path: PathFile,
    /// Diagonal of the proportional gain.
    pub gain: [f64; 2],
    pub sampling_time: f64,
    pub horizon: f64,
}

impl ScenarioFile {
    pub fn from_scenario(scenario: &Scenario, name: impl Into<String>) -> Self {
        let p = &scenario.path;
        Self {
            name: name.into(),
            description: String::new(),
            assumed: Vec::new(),
            model: ModelFile {
                link_lengths: scenario.model.link_lengths().to_vec(),
                control_points: scenario.model.control_points().to_vec(),
            },
            limits: scenario.limits.clone(),
            q0: scenario.q0.as_vector().iter().copied().collect(),
            path: PathFile {
                start: [p.start.x, p.start.y],
                end: [p.end.x, p.end.y],
                duration: p.duration,
                timing: p.timing,
            },
            gain: [scenario.gain.x, scenario.gain.y],
            sampling_time: scenario.period,
            horizon: scenario.horizon,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialise")
    }

    /// Checks every invariant and builds the scenario. Errors carry the field path.
    pub fn to_scenario(&self) -> Result<Scenario, (String, String)> {
        check_model(&self.model)?;
        let n = self.model.link_lengths.len();
        check_limits(&self.limits, &self.model)?;
        if self.q0.len() != n {
            return Err(("q0".into(), format!("has {} entries, model has {n} joints", self.q0.len())));
        }

        let model = RobotModel::new(
            self.model.link_lengths.clone(),
            self.model.control_points.clone(),
        )
        .map_err(|e| ("model".to_string(), e.to_string()))?;
        let q0 = JointConfig::from_slice(&self.q0).map_err(|e| ("q0".to_string(), e.to_string()))?;
        let scenario = Scenario {
            model,
            limits: self.limits.clone(),
            q0,
            path: PathSpec {
                start: Vector2::from(self.path.start),
                end: Vector2::from(self.path.end),
                duration: self.path.duration,
                timing: self.path.timing,
            },
            gain: Vector2::from(self.gain),
            period: self.sampling_time,
            horizon: self.horizon,
        };
        scenario.validate().map_err(|v| (v.field, v.message))?;
        Ok(scenario)
    }
}

fn check_model(model: &ModelFile) -> Result<(), (String, String)> {
    if model.link_lengths.is_empty() {
        return Err(("model.link_lengths".into(), "at least one link is required".into()));
    }
    for (i, &l) in model.link_lengths.iter().enumerate() {
        if l <= 0.0 {
            return Err((format!("model.link_lengths[{i}]"), format!("must be positive, got {l}")));
        }
    }
    let n = model.link_lengths.len();
    for (i, cp) in model.control_points.iter().enumerate() {
        if cp.frame == 0 || cp.frame > n {
            return Err((
                format!("model.control_points[{i}].frame"),
                format!("frame {} is outside 1..={n}", cp.frame),
            ));
        }
        let distinct = cp.axes.len() < 2 || cp.axes[0] != cp.axes[1];
        if cp.axes.is_empty() || cp.axes.len() > 2 || !distinct {
            return Err((
                format!("model.control_points[{i}].axes"),
                "must list one or two distinct axes".into(),
            ));
        }
    }
    Ok(())
}

fn check_range(
    prefix: &str,
    pos: (f64, f64),
    vel: (f64, f64),
) -> Result<(), (String, String)> {
    if pos.0 >= pos.1 {
        return Err((
            format!("{prefix}p_max"),
            format!("position maximum {} is not above minimum {}", pos.1, pos.0),
        ));
    }
    if vel.0 >= 0.0 {
        return Err((format!("{prefix}v_min"), format!("must be negative, got {}", vel.0)));
    }
    if vel.1 <= 0.0 {
        return Err((format!("{prefix}v_max"), format!("must be positive, got {}", vel.1)));
    }
    Ok(())
}

fn check_limits(limits: &LimitSet, model: &ModelFile) -> Result<(), (String, String)> {
    let n = model.link_lengths.len();
    if limits.joints.len() != n {
        return Err((
            "limits.joints".into(),
            format!("has {} entries, model has {n} joints", limits.joints.len()),
        ));
    }
    for (j, l) in limits.joints.iter().enumerate() {
        // Joint limits use q_min/q_max; reuse the range check and rename the field.
        check_range(&format!("limits.joints[{j}]."), (l.q_min, l.q_max), (l.v_min, l.v_max))
            .map_err(|(f, m)| (f.replace("p_max", "q_max"), m))?;
    }
    let r = model.control_points.len();
    if limits.control_points.len() != r {
        return Err((
            "limits.control_points".into(),
            format!("has {} entries, model has {r} control points", limits.control_points.len()),
        ));
    }
    for (i, (l, cp)) in limits.control_points.iter().zip(&model.control_points).enumerate() {
        let d = cp.axes.len();
        for (name, v) in [("p_min", &l.p_min), ("p_max", &l.p_max), ("v_min", &l.v_min), ("v_max", &l.v_max)] {
            if v.len() != d {
                return Err((
                    format!("limits.control_points[{i}].{name}"),
                    format!("has {} entries, control point constrains {d} axes", v.len()),
                ));
            }
        }
        for a in 0..d {
            check_range(
                &format!("limits.control_points[{i}]."),
                (l.p_min[a], l.p_max[a]),
                (l.v_min[a], l.v_max[a]),
            )
            .map_err(|(f, m)| (format!("{f}[{a}]"), m))?;
        }
    }
    Ok(())
}

/// Deserialises `text`, separating syntax errors from schema errors.
fn parse_document<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, LoadError> {
    // Syntax first, so a schema complaint is never reported for broken JSON.
    if let Err(e) = serde_json::from_str::<serde_json::Value>(text) {
        return Err(LoadError::Parse {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => String::from("(root)"),
            p => p,
        };
        let inner = e.inner();
        LoadError::Schema {
            line: inner.line(),
            field,
            message: strip_position(&inner.to_string()),
        }
    })
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn invariant(text: &str, (field, message): (String, String)) -> LoadError {
    LoadError::Invariant {
        line: line_of(text, &field),
        field,
        message,
    }
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str) -> Result<(ScenarioFile, Scenario), LoadError> {
    let file: ScenarioFile = parse_document(text)?;
    let scenario = file.to_scenario().map_err(|e| invariant(text, e))?;
    Ok((file, scenario))
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    load_scenario_file(path).map(|(_, s)| s)
}

/// Like [`load_scenario`] but also returns the metadata.
pub fn load_scenario_file(path: &Path) -> Result<(ScenarioFile, Scenario), LoadError> {
    parse_scenario(&read(path)?)
}

/// One SNS problem: task `J qdot = xdot` under `lower <= A qdot <= upper`.
/// Without `constraint_matrix`, `A` is the identity (joint-space bounds only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub jacobian: Vec<Vec<f64>>,
    pub task_velocity: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_matrix: Option<Vec<Vec<f64>>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveInstance {
    pub task: TaskSpec,
    pub matrix: DMatrix<f64>,
    pub bounds: GeneralizedBounds,
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, (String, String)> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err((field.into(), "must be a non-empty list of rows".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err((format!("{field}[{i}]"), format!("has {} entries, expected {cols}", row.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<SolveInstance, (String, String)> {
        let j = matrix_from_rows("jacobian", &self.jacobian)?;
        let (m, n) = j.shape();
        if self.task_velocity.len() != m {
            return Err((
                "task_velocity".into(),
                format!("has {} entries, jacobian has {m} rows", self.task_velocity.len()),
            ));
        }
        let task = TaskSpec::new(DVector::from_column_slice(&self.task_velocity), j)
            .map_err(|e| ("jacobian".to_string(), e.to_string()))?;
        let matrix = match &self.constraint_matrix {
            Some(rows) => matrix_from_rows("constraint_matrix", rows)?,
            None => DMatrix::identity(n, n),
        };
        if matrix.ncols() != n {
            return Err((
                "constraint_matrix".into(),
                format!("has {} columns, jacobian has {n}", matrix.ncols()),
            ));
        }
        let p = matrix.nrows();
        for (name, v) in [("lower", &self.lower), ("upper", &self.upper)] {
            if v.len() != p {
                return Err((name.into(), format!("has {} entries, expected {p}", v.len())));
            }
        }
        for h in 0..p {
            if self.lower[h] > self.upper[h] {
                return Err((
                    format!("lower[{h}]"),
                    format!("{} is above the upper bound {}", self.lower[h], self.upper[h]),
                ));
            }
        }
        let bounds = GeneralizedBounds::new(
            DVector::from_column_slice(&self.lower),
            DVector::from_column_slice(&self.upper),
        )
        .map_err(|e| ("lower".to_string(), e.to_string()))?;
        Ok(SolveInstance { task, matrix, bounds })
    }
}

pub fn parse_instance(text: &str) -> Result<SolveInstance, LoadError> {
    let file: InstanceFile = parse_document(text)?;
    file.to_instance().map_err(|e| invariant(text, e))
}

pub fn load_instance(path: &Path) -> Result<SolveInstance, LoadError> {
    parse_instance(&read(path)?)
}

/// Line (1-based) where the value at `field` starts, falling back to its closest
/// enclosing field, then to line 1.
pub fn line_of(text: &str, field: &str) -> usize {
    let lines = value_lines(text);
    let mut key = field.to_string();
    loop {
        if let Some(&l) = lines.get(&key) {
            return l;
        }
        match key.rfind(['.', '[']) {
            Some(i) => key.truncate(i),
            None => return 1,
        }
    }
}

/// Start line of every value in a syntactically valid JSON document, keyed by path.
fn value_lines(text: &str) -> HashMap<String, usize> {
    let mut scan = Scanner {
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
        lines: HashMap::new(),
    };
    scan.value(String::new());
    scan.lines
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    lines: HashMap<String, usize>,
}

impl Scanner<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            match b {
                b'\n' => self.line += 1,
                b' ' | b'\t' | b'\r' => {}
                _ => break,
            }
            self.pos += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.pos + 1;
        self.pos += 1;
        while let Some(b) = self.peek() {
            self.pos += 1;
            match b {
                b'\\' => self.pos += 1,
                b'"' => break,
                _ => {}
            }
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos.saturating_sub(1)]).into_owned()
    }

    fn value(&mut self, path: String) {
        self.skip_ws();
        self.lines.entry(path.clone()).or_insert(self.line);
        match self.peek() {
            Some(b'{') => {
                self.pos += 1;
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b'"') => {}
                        Some(b',') => {
                            self.pos += 1;
                            continue;
                        }
                        _ => {
                            self.pos += 1;
                            return;
                        }
                    }
                    let line = self.line;
                    let key = self.string();
                    let child = if path.is_empty() { key } else { format!("{path}.{key}") };
                    self.lines.entry(child.clone()).or_insert(line);
                    self.skip_ws();
                    self.pos += 1; // ':'
                    self.value(child);
                }
            }
            Some(b'[') => {
                self.pos += 1;
                let mut index = 0;
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b']') | None => {
                            self.pos += 1;
                            return;
                        }
                        Some(b',') => {
                            self.pos += 1;
                            continue;
                        }
                        _ => {}
                    }
                    self.value(format!("{path}[{index}]"));
                    index += 1;
                }
            }
            Some(b'"') => {
                self.string();
            }
            Some(_) => {
                while let Some(b) = self.peek() {
                    if matches!(b, b',' | b']' | b'}' | b' ' | b'\t' | b'\r' | b'\n') {
                        break;
                    }
                    self.pos += 1;
                }
            }
            None => {}
        }
    }
}

/// Column layout of a trace: joint count and the constrained control-point coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLayout {
    pub dof: usize,
    /// (1-based control point index, axis) per constrained coordinate.
    pub cp_columns: Vec<(usize, Axis)>,
}

impl TraceLayout {
    pub fn for_model(model: &RobotModel) -> Self {
        let cp_columns = model
            .row_map()
            .into_iter()
            .filter_map(|r| match r {
                RowSource::ControlPoint { index, axis } => Some((index + 1, axis)),
                _ => None,
            })
            .collect();
        Self {
            dof: model.dof(),
            cp_columns,
        }
    }

    pub fn width(&self) -> usize {
        1 + 2 * self.dof + 2 + 2 + 1 + 2 * self.cp_columns.len() + 1
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.dof).map(|j| format!("q_{j}")));
        h.extend((1..=self.dof).map(|j| format!("qdot_{j}")));
        h.extend(["xee_x", "xee_y", "err_x", "err_y", "s"].map(String::from));
        h.extend(self.cp_columns.iter().map(|(i, a)| format!("cp_{}_{i}", a.name())));
        h.extend(self.cp_columns.iter().map(|(i, a)| format!("cp_{}dot_{i}", a.name())));
        h.push("sat_rows".into());
        h
    }

    fn from_header(header: &[String]) -> Option<Self> {
        let dof = header.iter().filter(|c| c.starts_with("q_")).count();
        let cp_columns = header
            .iter()
            .filter(|c| c.starts_with("cp_") && !c.contains("dot"))
            .map(|c| {
                let mut parts = c.splitn(3, '_').skip(1);
                let axis = match parts.next()? {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    _ => return None,
                };
                Some((parts.next()?.parse().ok()?, axis))
            })
            .collect::<Option<Vec<_>>>()?;
        let layout = Self { dof, cp_columns };
        (layout.header() == header).then_some(layout)
    }
}

/// 17 significant digits, enough to read every `f64` back exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn record(row: &TraceRow) -> Vec<String> {
    let mut r = vec![fmt_f64(row.t)];
    r.extend(row.q.iter().map(|&v| fmt_f64(v)));
    r.extend(row.qdot.iter().map(|&v| fmt_f64(v)));
    r.extend(row.x_ee.iter().chain(&row.error).map(|&v| fmt_f64(v)));
    r.push(fmt_f64(row.scale));
    r.extend(row.cp.iter().chain(&row.cp_dot).map(|&v| fmt_f64(v)));
    let sat: Vec<String> = row.saturated.iter().map(usize::to_string).collect();
    r.push(sat.join(";"));
    r
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}

/// Writes the trace atomically: a temporary file in the target directory is renamed
/// over `path` once complete.
pub fn write_trace(path: &Path, layout: &TraceLayout, rows: &[TraceRow]) -> Result<(), TraceError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(tmp.as_file()));
        w.write_record(layout.header())?;
        for (k, row) in rows.iter().enumerate() {
            let rec = record(row);
            if rec.len() != layout.width() {
                return Err(TraceError::Format {
                    row: k,
                    message: format!("{} columns, layout has {}", rec.len(), layout.width()),
                });
            }
            w.write_record(rec)?;
        }
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<(TraceLayout, Vec<TraceRow>), TraceError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let layout = TraceLayout::from_header(&header).ok_or_else(|| TraceError::Format {
        row: 0,
        message: "unrecognised header".into(),
    })?;
    let (n, r) = (layout.dof, layout.cp_columns.len());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| TraceError::Format { row: k + 1, message };
        let num = |i: usize| -> Result<f64, TraceError> {
            rec[i].parse().map_err(|_| bad(format!("column {} is not a number: {:?}", header[i], &rec[i])))
        };
        let nums = |from: usize, len: usize| (from..from + len).map(num).collect::<Result<Vec<_>, _>>();
        let s = 1 + 2 * n + 4;
        let sat_field = &rec[layout.width() - 1];
        let saturated = if sat_field.is_empty() {
            Vec::new()
        } else {
            sat_field
                .split(';')
                .map(|v| v.parse().map_err(|_| bad(format!("bad saturated row {v:?}"))))
                .collect::<Result<_, _>>()?
        };
        rows.push(TraceRow {
            t: num(0)?,
            q: nums(1, n)?,
            qdot: nums(1 + n, n)?,
            x_ee: [num(1 + 2 * n)?, num(2 + 2 * n)?],
            error: [num(3 + 2 * n)?, num(4 + 2 * n)?],
            scale: num(s)?,
            cp: nums(s + 1, r)?,
            cp_dot: nums(s + 1 + r, r)?,
            saturated,
        });
    }
    Ok((layout, rows))
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
  "name": "tiny",
  "model": {
    "link_lengths": [1.0, 1.0, 1.0],
    "control_points": [{"frame": 1, "axes": ["y"]}]
  },
  "limits": {
    "joints": [
      {"q_min": -1.5, "q_max": 1.5, "v_min": -1.0, "v_max": 1.0},
      {"q_min": -1.5, "q_max": 1.5, "v_min": -1.0, "v_max": 1.0},
      {"q_min": -1.5, "q_max": 1.5, "v_min": -1.0, "v_max": 1.0}
    ],
    "control_points": [{"p_min": [-1.0], "p_max": [1.0], "v_min": [-0.5], "v_max": [0.5]}]
  },
  "q0": [0.1, 0.2, 0.3],
  "path": {"start": [2.0, 0.5], "end": [1.5, 0.5], "duration": 1.0, "timing": "linear"},
  "gain": [50.0, 50.0],
  "sampling_time": 0.001,
  "horizon": 1.0
}"#;

    #[test]
    fn good_file_loads() {
        let (file, scenario) = parse_scenario(GOOD).unwrap();
        assert_eq!(file.name, "tiny");
        assert_eq!(scenario.model.dof(), 3);
        assert_eq!(scenario.steps(), 1000);
        let again = parse_scenario(&file.to_json()).unwrap().1;
        assert_eq!(again, scenario);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse_scenario(""), Err(LoadError::Parse { .. })));
        assert!(matches!(parse_scenario("{\"name\": "), Err(LoadError::Parse { .. })));
    }

    #[test]
    fn unknown_key_is_a_schema_error() {
        let text = GOOD.replace("\"q0\"", "\"extra\": 1,\n  \"q0\"");
        match parse_scenario(&text) {
            Err(LoadError::Schema { field, line, .. }) => {
                assert_eq!(field, "extra");
                assert_eq!(line, 15);
            }
            other => panic!("{other:?}"),
        }
        let text = GOOD.replace("\"v_max\": [0.5]", "\"v_max\": [0.5], \"w\": 2");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, LoadError::Schema { .. }));
        assert_eq!(err.field(), Some("limits.control_points[0].w"));
    }

    #[test]
    fn wrong_type_is_a_schema_error() {
        let text = GOOD.replace("\"horizon\": 1.0", "\"horizon\": \"long\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, LoadError::Schema { .. }), "{err}");
        assert_eq!(err.field(), Some("horizon"));
        assert_eq!(err.line(), Some(19));
    }

    #[test]
    fn negative_gain_is_an_invariant_violation() {
        let text = GOOD.replace("[50.0, 50.0]", "[50.0, -50.0]");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, LoadError::Invariant { .. }));
        assert_eq!(err.field(), Some("gain[1]"));
        assert_eq!(err.line(), Some(17));
        assert!(err.to_string().contains("gain[1]"));
    }

    #[test]
    fn invariant_fields_are_located() {
        let cases = [
            ("\"q0\": [0.1, 0.2, 0.3]", "\"q0\": [0.1, 2.2, 0.3]", "q0[1]", 15),
            ("\"frame\": 1", "\"frame\": 4", "model.control_points[0].frame", 5),
            ("\"p_max\": [1.0]", "\"p_max\": [-2.0]", "limits.control_points[0].p_max[0]", 13),
            ("\"sampling_time\": 0.001", "\"sampling_time\": 0.0", "sampling_time", 18),
            ("\"start\": [2.0, 0.5]", "\"start\": [9.0, 0.5]", "path.start", 16),
        ];
        for (from, to, field, line) in cases {
            let err = parse_scenario(&GOOD.replace(from, to)).unwrap_err();
            assert!(matches!(err, LoadError::Invariant { .. }), "{err}");
            assert_eq!(err.field(), Some(field));
            assert_eq!(err.line(), Some(line), "{field}");
        }
    }

    #[test]
    fn instance_defaults_to_joint_bounds() {
        let text = r#"{"jacobian": [[1, 1, 1]], "task_velocity": [3], "lower": [-1, -1, -1], "upper": [1, 1, 1]}"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.matrix, DMatrix::identity(3, 3));
        let text = r#"{"jacobian": [[1, 1, 1]], "task_velocity": [3, 1], "lower": [-1, -1, -1], "upper": [1, 1, 1]}"#;
        let err = parse_instance(text).unwrap_err();
        assert_eq!(err.field(), Some("task_velocity"));
    }

    fn sample_row(n: usize, r: usize) -> TraceRow {
        TraceRow {
            t: 0.001,
            q: (0..n).map(|j| 0.1 * j as f64 + 1.0 / 3.0).collect(),
            qdot: (0..n).map(|j| -(j as f64) / 7.0).collect(),
            x_ee: [std::f64::consts::PI, -1e-300],
            error: [f64::MIN_POSITIVE, -0.0],
            scale: 1.0,
            cp: (0..r).map(|i| i as f64 * 0.1).collect(),
            cp_dot: (0..r).map(|i| -(i as f64) * 1e-17).collect(),
            saturated: if r > 0 { vec![0, n + r - 1] } else { vec![] },
        }
    }

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let layout = TraceLayout {
            dof: 3,
            cp_columns: vec![(1, Axis::Y), (2, Axis::X), (2, Axis::Y)],
        };
        let rows = vec![sample_row(3, 3), sample_row(3, 3)];
        write_trace(&path, &layout, &rows).unwrap();
        let (back_layout, back) = read_trace(&path).unwrap();
        assert_eq!(back_layout, layout);
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.q.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.q.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            assert_eq!(a.error[1].to_bits(), b.error[1].to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let layout = TraceLayout { dof: 2, cp_columns: vec![] };
        write_trace(&path, &layout, &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), "t,q_1,q_2,qdot_1,qdot_2,xee_x,xee_y,err_x,err_y,s,sat_rows");

        write_trace(&path, &layout, &[sample_row(2, 0)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), 11);
        assert!(line.ends_with(','));
    }

    #[test]
    fn layout_of_model() {
        let model = RobotModel::new(
            vec![1.0; 3],
            vec![ControlPoint::new(1, vec![Axis::Y]), ControlPoint::new(2, vec![Axis::X, Axis::Y])],
        )
        .unwrap();
        let layout = TraceLayout::for_model(&model);
        assert_eq!(layout.width(), 1 + 6 + 4 + 1 + 6 + 1);
        assert_eq!(
            &layout.header()[12..15],
            &["cp_y_1".to_string(), "cp_x_2".into(), "cp_y_2".into()]
        );
    }
}
