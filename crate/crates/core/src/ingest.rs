//! Loading and writing datasets in the canonical on-disk layout.
//!
//! ```text
//! <root>/manifest.toml             optional; paths and nominal rate
//! <root>/sensors/<user>/<session>.csv   t_ms,sensor,x,y,z,w
//! <root>/nfc_events.csv            t_ms,user_id,session_id,terminal_id
//! <root>/activities.csv            user_id,activity,start_ms,end_ms
//! ```
//!
//! Gyroscope values are taken to be deg/s and are never converted.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    Activity, QuaternionSample, RawSamples, SensorKind, SensorStream, SensorSubset, Terminal,
    TriaxialSample,
};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SENSOR_HEADER: [&str; 6] = ["t_ms", "sensor", "x", "y", "z", "w"];
pub const NFC_HEADER: [&str; 4] = ["t_ms", "user_id", "session_id", "terminal_id"];
pub const ACTIVITY_HEADER: [&str; 4] = ["user_id", "activity", "start_ms", "end_ms"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NfcEvent {
    pub user_id: String,
    pub session_id: String,
    pub t0_ms: i64,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivitySpan {
    pub user_id: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub activity: Activity,
}

impl ActivitySpan {
    pub fn new(user_id: impl Into<String>, activity: Activity, start_ms: i64, end_ms: i64) -> Result<Self> {
        if end_ms <= start_ms {
            return Err(Error::InvalidSample(format!(
                "activity span end {end_ms} must exceed start {start_ms}"
            )));
        }
        Ok(Self {
            user_id: user_id.into(),
            start_ms,
            end_ms,
            activity,
        })
    }

    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

/// Dataset manifest, stored as `manifest.toml` in the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    pub nominal_rate_hz: f64,
    pub sensors_dir: String,
    pub nfc_events: String,
    pub activities: String,
    /// Declared gyroscope unit; informational.
    pub gyro_unit: String,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            nominal_rate_hz: 50.0,
            sensors_dir: "sensors".into(),
            nfc_events: "nfc_events.csv".into(),
            activities: "activities.csv".into(),
            gyro_unit: "deg/s".into(),
        }
    }
}

impl Manifest {
    /// Reads `<root>/manifest.toml`, falling back to defaults when absent.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::MalformedRecord {
            file: path.clone(),
            line: 0,
            reason: e.to_string(),
        })?;
        if !(m.nominal_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("manifest nominal_rate_hz must be positive".into()));
        }
        Ok(m)
    }
}

/// What a run needs from the dataset.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub required_sensors: SensorSubset,
    pub require_nfc: bool,
    pub require_activities: bool,
    pub gap_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            required_sensors: SensorSubset::FULL,
            require_nfc: false,
            require_activities: false,
            gap_tolerance: 0.5,
        }
    }
}

/// Interval `[start_ms, end_ms]` between two consecutive samples of one sensor
/// whose spacing exceeds the tolerated period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub sensor: SensorKind,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl Gap {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

/// Lists every inter-sample spacing greater than `(1/nominal_hz)·(1+tolerance)`.
pub fn validate_sampling(stream: &SensorStream, nominal_hz: f64, tolerance: f64) -> Vec<Gap> {
    let limit_ms = 1000.0 / nominal_hz * (1.0 + tolerance);
    let mut gaps = Vec::new();
    for sensor in SensorKind::ALL {
        let ts = stream.timestamps(sensor);
        for pair in ts.windows(2) {
            if (pair[1] - pair[0]) as f64 > limit_ms {
                gaps.push(Gap {
                    sensor,
                    start_ms: pair[0],
                    end_ms: pair[1],
                });
            }
        }
    }
    gaps
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSummary {
    /// (user, session) → per-sensor sample counts in `SensorKind::ALL` order.
    pub samples: BTreeMap<(String, String), [usize; 4]>,
    pub events_per_user: BTreeMap<String, usize>,
    pub events_per_terminal: BTreeMap<Terminal, usize>,
    pub duplicate_samples: usize,
    /// (user, session) → gaps found at the manifest rate and load tolerance.
    pub gaps: BTreeMap<(String, String), Vec<Gap>>,
    pub nfc_file_present: bool,
    pub activity_file_present: bool,
}

impl LoadSummary {
    pub fn total_gaps(&self) -> usize {
        self.gaps.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub nominal_rate_hz: f64,
    /// Sorted by (user, session).
    pub streams: Vec<SensorStream>,
    /// Sorted by (user, session, t0).
    pub nfc_events: Vec<NfcEvent>,
    /// Sorted by (user, start).
    pub activity_spans: Vec<ActivitySpan>,
}

impl Dataset {
    /// Assembles and validates a dataset from in-memory parts.
    pub fn new(
        nominal_rate_hz: f64,
        mut streams: Vec<SensorStream>,
        mut nfc_events: Vec<NfcEvent>,
        mut activity_spans: Vec<ActivitySpan>,
    ) -> Result<Self> {
        streams.sort_by(|a, b| {
            (a.user_id(), a.session_id()).cmp(&(b.user_id(), b.session_id()))
        });
        for pair in streams.windows(2) {
            if pair[0].user_id() == pair[1].user_id() && pair[0].session_id() == pair[1].session_id() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate stream {}/{}",
                    pair[0].user_id(),
                    pair[0].session_id()
                )));
            }
        }
        nfc_events.sort();
        activity_spans.sort();
        let ds = Self {
            nominal_rate_hz,
            streams,
            nfc_events,
            activity_spans,
        };
        ds.check_references()?;
        Ok(ds)
    }

    fn check_references(&self) -> Result<()> {
        for e in &self.nfc_events {
            if self.stream(&e.user_id, &e.session_id).is_none() {
                return Err(Error::DanglingReference(format!(
                    "NFC event at t={} cites unknown stream {}/{}",
                    e.t0_ms, e.user_id, e.session_id
                )));
            }
        }
        let users: BTreeSet<&str> = self.streams.iter().map(|s| s.user_id()).collect();
        for s in &self.activity_spans {
            if !users.contains(s.user_id.as_str()) {
                return Err(Error::DanglingReference(format!(
                    "activity span {}..{} cites unknown user {}",
                    s.start_ms, s.end_ms, s.user_id
                )));
            }
        }
        Ok(())
    }

    pub fn stream(&self, user: &str, session: &str) -> Option<&SensorStream> {
        self.streams
            .binary_search_by(|s| (s.user_id(), s.session_id()).cmp(&(user, session)))
            .ok()
            .map(|i| &self.streams[i])
    }

    /// Distinct users with at least one stream, sorted.
    pub fn users(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.streams.iter().map(|s| s.user_id()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// The stream that holds an activity span.
    ///
    /// Candidates are the user's streams without NFC events (falling back to
    /// all of the user's streams); the one overlapping the span the most wins,
    /// ties going to the first in session order.
    pub fn stream_for_span(&self, span: &ActivitySpan) -> Option<&SensorStream> {
        let lab: BTreeSet<(&str, &str)> = self
            .nfc_events
            .iter()
            .map(|e| (e.user_id.as_str(), e.session_id.as_str()))
            .collect();
        let mine: Vec<&SensorStream> = self
            .streams
            .iter()
            .filter(|s| s.user_id() == span.user_id)
            .collect();
        let free: Vec<&SensorStream> = mine
            .iter()
            .copied()
            .filter(|s| !lab.contains(&(s.user_id(), s.session_id())))
            .collect();
        let pool = if free.is_empty() { mine } else { free };
        let mut best: Option<(&SensorStream, i64)> = None;
        for s in pool {
            let overlap = s
                .extent()
                .map(|(lo, hi)| (hi.min(span.end_ms) - lo.max(span.start_ms)).max(0))
                .unwrap_or(0);
            if best.map_or(true, |(_, o)| overlap > o) {
                best = Some((s, overlap));
            }
        }
        best.map(|(s, _)| s)
    }
}

fn malformed(file: &Path, line: u64, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        file: file.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn check_header(file: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| malformed(file, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(malformed(
            file,
            1,
            format!("expected header '{}', found '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn for_each_record(
    path: &Path,
    rdr: &mut csv::Reader<fs::File>,
    mut f: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(true) => {
                let line = rec.position().map_or(0, |p| p.line());
                f(line, &rec)?;
            }
            Ok(false) => return Ok(()),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(malformed(path, line, e.to_string()));
            }
        }
    }
}

fn field<'r>(rec: &'r csv::StringRecord, i: usize) -> &'r str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: u64, name: &str, text: &str) -> Result<T> {
    text.parse::<T>()
        .map_err(|_| malformed(path, line, format!("field '{name}' is not a valid number: '{text}'")))
}

/// Parses one sensor file into raw samples. Quaternions are normalized here.
pub fn parse_sensor_file(path: &Path) -> Result<RawSamples> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &SENSOR_HEADER)?;
    let mut raw = RawSamples::default();
    for_each_record(path, &mut rdr, |line, rec| {
        let t: i64 = parse_num(path, line, "t_ms", field(rec, 0))?;
        let sensor: SensorKind = field(rec, 1)
            .parse()
            .map_err(|e: String| malformed(path, line, e))?;
        let x: f64 = parse_num(path, line, "x", field(rec, 2))?;
        let y: f64 = parse_num(path, line, "y", field(rec, 3))?;
        let z: f64 = parse_num(path, line, "z", field(rec, 4))?;
        let w_text = field(rec, 5);
        match sensor {
            SensorKind::RotationVector => {
                if w_text.is_empty() {
                    return Err(malformed(path, line, "GRV record needs a w component"));
                }
                let w: f64 = parse_num(path, line, "w", w_text)?;
                let q = QuaternionSample::new(t, x, y, z, w)
                    .and_then(|q| q.normalize())
                    .map_err(|e| malformed(path, line, e.to_string()))?;
                raw.grv.push(q);
            }
            kind => {
                if !w_text.is_empty() {
                    return Err(malformed(path, line, format!("{kind} record must leave w empty")));
                }
                let s = TriaxialSample::new(t, x, y, z).map_err(|e| malformed(path, line, e.to_string()))?;
                raw.triaxial_mut(kind).push(s);
            }
        }
        Ok(())
    })?;
    Ok(raw)
}

pub fn parse_nfc_file(path: &Path) -> Result<Vec<NfcEvent>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &NFC_HEADER)?;
    let mut out = Vec::new();
    for_each_record(path, &mut rdr, |line, rec| {
        let t0_ms: i64 = parse_num(path, line, "t_ms", field(rec, 0))?;
        let user_id = field(rec, 1);
        let session_id = field(rec, 2);
        if user_id.is_empty() || session_id.is_empty() {
            return Err(malformed(path, line, "user_id and session_id must be non-empty"));
        }
        let terminal: Terminal = field(rec, 3)
            .parse()
            .map_err(|e: String| malformed(path, line, e))?;
        out.push(NfcEvent {
            user_id: user_id.into(),
            session_id: session_id.into(),
            t0_ms,
            terminal,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_activity_file(path: &Path) -> Result<Vec<ActivitySpan>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &ACTIVITY_HEADER)?;
    let mut out = Vec::new();
    for_each_record(path, &mut rdr, |line, rec| {
        let user_id = field(rec, 0);
        if user_id.is_empty() {
            return Err(malformed(path, line, "user_id must be non-empty"));
        }
        let activity: Activity = field(rec, 1)
            .parse()
            .map_err(|e: String| malformed(path, line, e))?;
        let start: i64 = parse_num(path, line, "start_ms", field(rec, 2))?;
        let end: i64 = parse_num(path, line, "end_ms", field(rec, 3))?;
        let span = ActivitySpan::new(user_id, activity, start, end)
            .map_err(|e| malformed(path, line, e.to_string()))?;
        out.push(span);
        Ok(())
    })?;
    Ok(out)
}

/// Lists `(user, session, path)` for every `sensors/<user>/<session>.csv`, sorted.
fn sensor_files(dir: &Path) -> Result<Vec<(String, String, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for user_entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let user_entry = user_entry.map_err(|e| Error::io(dir, e))?;
        let user_path = user_entry.path();
        if !user_path.is_dir() {
            continue;
        }
        let user = user_entry.file_name().to_string_lossy().into_owned();
        for f in fs::read_dir(&user_path).map_err(|e| Error::io(&user_path, e))? {
            let f = f.map_err(|e| Error::io(&user_path, e))?;
            let p = f.path();
            if p.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let session = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push((user.clone(), session, p));
        }
    }
    out.sort();
    Ok(out)
}

/// Loads and validates the dataset rooted at `root`.
pub fn load_dataset(root: &Path, opts: &LoadOptions) -> Result<(Dataset, LoadSummary)> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let manifest = Manifest::load(root)?;
    let rate = manifest.nominal_rate_hz;

    let files = sensor_files(&root.join(&manifest.sensors_dir))?;
    let parsed: Vec<Result<(SensorStream, usize)>> = files
        .par_iter()
        .map(|(user, session, path)| {
            let raw = parse_sensor_file(path)?;
            SensorStream::from_raw(user.clone(), session.clone(), rate, raw)
        })
        .collect();

    let mut summary = LoadSummary::default();
    let mut streams = Vec::with_capacity(parsed.len());
    for item in parsed {
        let (stream, dups) = item?;
        for sensor in opts.required_sensors.iter() {
            if stream.sample_count(sensor) == 0 {
                return Err(Error::MissingSensor {
                    user: stream.user_id().into(),
                    session: stream.session_id().into(),
                    sensor,
                });
            }
        }
        summary.duplicate_samples += dups;
        let key = (stream.user_id().to_string(), stream.session_id().to_string());
        let counts = SensorKind::ALL.map(|k| stream.sample_count(k));
        summary.samples.insert(key.clone(), counts);
        let gaps = validate_sampling(&stream, rate, opts.gap_tolerance);
        if !gaps.is_empty() {
            summary.gaps.insert(key, gaps);
        }
        streams.push(stream);
    }
    if summary.duplicate_samples > 0 {
        log::warn!("dropped {} duplicate-timestamp samples", summary.duplicate_samples);
    }

    let nfc_path = root.join(&manifest.nfc_events);
    let nfc_events = if nfc_path.exists() {
        summary.nfc_file_present = true;
        parse_nfc_file(&nfc_path)?
    } else if opts.require_nfc {
        return Err(Error::MissingFile(nfc_path));
    } else {
        Vec::new()
    };

    let act_path = root.join(&manifest.activities);
    let spans = if act_path.exists() {
        summary.activity_file_present = true;
        parse_activity_file(&act_path)?
    } else if opts.require_activities {
        return Err(Error::MissingFile(act_path));
    } else {
        Vec::new()
    };

    for e in &nfc_events {
        *summary.events_per_user.entry(e.user_id.clone()).or_default() += 1;
        *summary.events_per_terminal.entry(e.terminal).or_default() += 1;
    }
    let ds = Dataset::new(rate, streams, nfc_events, spans)?;
    Ok((ds, summary))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::io::BufWriter<fs::File>>> {
    let file = fs::File::create(path).map_err(write_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file)))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes one stream as a sensor CSV; rows ordered by (t, sensor).
pub fn write_sensor_file(path: &Path, stream: &SensorStream) -> Result<()> {
    let mut rows: Vec<(i64, SensorKind, [f64; 4])> = Vec::new();
    for kind in [
        SensorKind::Accelerometer,
        SensorKind::Gyroscope,
        SensorKind::LinearAccelerometer,
    ] {
        for s in stream.triaxial(kind) {
            rows.push((s.t_ms, kind, [s.x, s.y, s.z, f64::NAN]));
        }
    }
    for q in stream.grv() {
        rows.push((q.t_ms, SensorKind::RotationVector, [q.x, q.y, q.z, q.w]));
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let file = fs::File::create(path).map_err(write_err(path))?;
    let mut out = std::io::BufWriter::new(file);
    let io = write_err(path);
    writeln!(out, "{}", SENSOR_HEADER.join(",")).map_err(&io)?;
    for (t, kind, v) in rows {
        if kind == SensorKind::RotationVector {
            writeln!(out, "{t},{kind},{},{},{},{}", v[0], v[1], v[2], v[3]).map_err(&io)?;
        } else {
            writeln!(out, "{t},{kind},{},{},{},", v[0], v[1], v[2]).map_err(&io)?;
        }
    }
    out.flush().map_err(&io)?;
    Ok(())
}

/// Writes the dataset in the canonical layout, including a manifest.
pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<()> {
    let manifest = Manifest {
        nominal_rate_hz: ds.nominal_rate_hz,
        ..Manifest::default()
    };
    fs::create_dir_all(root).map_err(write_err(root))?;
    let mpath = root.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    fs::write(&mpath, text).map_err(write_err(&mpath))?;

    let sensors = root.join(&manifest.sensors_dir);
    ds.streams.par_iter().try_for_each(|s| -> Result<()> {
        let dir = sensors.join(s.user_id());
        fs::create_dir_all(&dir).map_err(write_err(&dir))?;
        write_sensor_file(&dir.join(format!("{}.csv", s.session_id())), s)
    })?;

    let npath = root.join(&manifest.nfc_events);
    let mut w = csv_writer(&npath)?;
    w.write_record(NFC_HEADER).map_err(csv_io(&npath))?;
    for e in &ds.nfc_events {
        w.write_record([
            e.t0_ms.to_string(),
            e.user_id.clone(),
            e.session_id.clone(),
            e.terminal.to_string(),
        ])
        .map_err(csv_io(&npath))?;
    }
    w.flush().map_err(write_err(&npath))?;

    let apath = root.join(&manifest.activities);
    let mut w = csv_writer(&apath)?;
    w.write_record(ACTIVITY_HEADER).map_err(csv_io(&apath))?;
    for s in &ds.activity_spans {
        w.write_record([
            s.user_id.clone(),
            s.activity.to_string(),
            s.start_ms.to_string(),
            s.end_ms.to_string(),
        ])
        .map_err(csv_io(&apath))?;
    }
    w.flush().map_err(write_err(&apath))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_stream(n: i64, hole: Option<(i64, i64)>) -> SensorStream {
        let mut raw = RawSamples::default();
        for i in 0..n {
            let t = i * 20;
            if let Some((a, b)) = hole {
                if t > a && t < b {
                    continue;
                }
            }
            let s = TriaxialSample::new(t, 0.1, 0.2, 9.8).unwrap();
            raw.acc.push(s);
            raw.gyr.push(s);
            raw.lac.push(s);
            raw.grv.push(QuaternionSample::new(t, 0.0, 0.0, 0.0, 1.0).unwrap());
        }
        SensorStream::from_raw("u1", "1", 50.0, raw).unwrap().0
    }

    #[test]
    fn uniform_stream_has_no_gaps() {
        assert!(validate_sampling(&uniform_stream(500, None), 50.0, 0.5).is_empty());
    }

    #[test]
    fn single_hole_reported_once_per_sensor() {
        let s = uniform_stream(500, Some((1000, 1200)));
        let gaps = validate_sampling(&s, 50.0, 0.5);
        assert_eq!(gaps.len(), 4);
        for g in &gaps {
            assert_eq!((g.start_ms, g.end_ms), (1000, 1200));
            assert_eq!(g.duration_ms(), 200);
        }
        let acc_only: Vec<_> = gaps.iter().filter(|g| g.sensor == SensorKind::Accelerometer).collect();
        assert_eq!(acc_only.len(), 1);
    }

    #[test]
    fn empty_stream_has_no_gaps() {
        let s = SensorStream::from_raw("u", "s", 50.0, RawSamples::default()).unwrap().0;
        assert!(validate_sampling(&s, 50.0, 0.5).is_empty());
    }

    #[test]
    fn empty_directory_loads_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, summary) = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        assert!(ds.streams.is_empty());
        assert!(ds.nfc_events.is_empty());
        assert!(ds.activity_spans.is_empty());
        assert!(!summary.nfc_file_present);
    }

    #[test]
    fn missing_required_nfc_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let opts = LoadOptions {
            require_nfc: true,
            ..Default::default()
        };
        assert!(matches!(load_dataset(dir.path(), &opts), Err(Error::MissingFile(_))));
    }

    #[test]
    fn dangling_event_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(50.0, vec![uniform_stream(100, None)], vec![], vec![]).unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        fs::write(
            dir.path().join("nfc_events.csv"),
            "t_ms,user_id,session_id,terminal_id\n1000,u99,1,3\n",
        )
        .unwrap();
        let err = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DanglingReference(ref m) if m.contains("u99")), "{err}");
    }

    #[test]
    fn non_numeric_field_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let udir = dir.path().join("sensors/u1");
        fs::create_dir_all(&udir).unwrap();
        fs::write(
            udir.join("1.csv"),
            "t_ms,sensor,x,y,z,w\n0,Acc,1,2,3,\n20,Acc,abc,2,3,\n",
        )
        .unwrap();
        let opts = LoadOptions {
            required_sensors: SensorSubset::new(&[SensorKind::Accelerometer]).unwrap(),
            ..Default::default()
        };
        match load_dataset(dir.path(), &opts) {
            Err(Error::MalformedRecord { line, reason, .. }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("'x'"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_sensor_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let udir = dir.path().join("sensors/u1");
        fs::create_dir_all(&udir).unwrap();
        fs::write(udir.join("1.csv"), "t_ms,sensor,x,y,z,w\n0,Acc,1,2,3,\n").unwrap();
        let err = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingSensor { sensor: SensorKind::Gyroscope, .. }));
    }

    #[test]
    fn grv_rows_need_w_and_triaxial_rows_must_not_have_it() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "t_ms,sensor,x,y,z,w\n0,GRV,0,0,0,\n").unwrap();
        assert!(parse_sensor_file(&p).is_err());
        fs::write(&p, "t_ms,sensor,x,y,z,w\n0,Acc,0,0,0,1\n").unwrap();
        assert!(parse_sensor_file(&p).is_err());
        fs::write(&p, "t_ms,sensor,x,y,z,w\n0,GRV,0,0,0,0\n").unwrap();
        assert!(parse_sensor_file(&p).is_err());
        fs::write(&p, "t_ms,sensor,x,y,z,w\n0,GRV,0,0,0,2\n").unwrap();
        assert_eq!(parse_sensor_file(&p).unwrap().grv[0].w, 1.0);
    }

    #[test]
    fn bad_terminal_and_span_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "t_ms,user_id,session_id,terminal_id\n5,u1,1,9\n").unwrap();
        assert!(matches!(parse_nfc_file(&p), Err(Error::MalformedRecord { line: 2, .. })));
        fs::write(&p, "user_id,activity,start_ms,end_ms\nu1,walking,100,100\n").unwrap();
        assert!(matches!(parse_activity_file(&p), Err(Error::MalformedRecord { line: 2, .. })));
        fs::write(&p, "user_id,activity,start_ms,end_ms\nu1,jogging,0,100\n").unwrap();
        assert!(parse_activity_file(&p).is_err());
    }
}
