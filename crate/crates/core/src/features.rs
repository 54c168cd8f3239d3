//! Window featurization.
//!
//! Each triaxial sensor contributes five per-sample dimensions (filtered
//! `x`, `y`, `z`, the energy of the filtered triple `ene` and the energy of
//! the raw triple `unf`); the rotation vector contributes its four filtered
//! components. Every dimension is summarised by ten statistics, and each
//! triaxial sensor adds ten kinematic features obtained by integrating its
//! filtered axes. With all four sensors this gives 19 × 10 + 3 × 10 = 220
//! features, named `<Sensor>-<dim>-<stat>`, `<Sensor>-<axis>-velomean`,
//! `-velomax`, `-disp` and `<Sensor>-disptotal`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::{energy, GestureWindow, SensorKind, SensorSubset, WindowLabel};

pub const STAT_NAMES: [&str; 10] = [
    "min", "max", "mean", "med", "stdev", "var", "iqr", "kurt", "skew", "pkcount",
];
pub const KINEMATIC_AXIS_NAMES: [&str; 3] = ["velomean", "velomax", "disp"];
pub const FULL_FEATURE_COUNT: usize = 220;

/// Variance below which higher moments and peak counts are reported as 0.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub cutoff_hz: f64,
    pub rate_hz: f64,
    /// Peaks must exceed `mean + peak_prominence · stdev`.
    pub peak_prominence: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 10.0,
            rate_hz: 50.0,
            peak_prominence: 0.25,
        }
    }
}

impl FeatureConfig {
    pub fn alpha(&self) -> Result<f64> {
        low_pass_alpha(self.cutoff_hz, self.rate_hz)
    }

    /// Same settings with the filter discretized at `rate_hz`.
    pub fn at_rate(self, rate_hz: f64) -> Self {
        Self { rate_hz, ..self }
    }
}

/// Smoothing factor `dt/(RC+dt)` of a single-pole low-pass with the given cutoff.
pub fn low_pass_alpha(cutoff_hz: f64, rate_hz: f64) -> Result<f64> {
    if !(cutoff_hz > 0.0 && rate_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
        return Err(Error::InvalidFilter { cutoff_hz, rate_hz });
    }
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
    let dt = 1.0 / rate_hz;
    Ok(dt / (rc + dt))
}

/// Causal single-pole IIR smoother `y[i] = y[i-1] + α(x[i] − y[i-1])`, `y[0] = x[0]`.
pub fn low_pass_filter(series: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let first = *series.first().ok_or(Error::EmptySeries)?;
    let mut out = Vec::with_capacity(series.len());
    let mut y = first;
    out.push(y);
    for &x in &series[1..] {
        y += alpha * (x - y);
        out.push(y);
    }
    Ok(out)
}

/// One named per-sample dimension of a window, e.g. `Acc-ene`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub values: Vec<f64>,
}

struct FilteredAxes {
    t_s: Vec<f64>,
    axes: [Vec<f64>; 3],
}

fn filtered_triaxial(window: &GestureWindow, kind: SensorKind, alpha: f64) -> Result<(FilteredAxes, Vec<f64>)> {
    let samples = window.triaxial(kind);
    if samples.is_empty() {
        return Err(Error::MissingSensor {
            user: window.label.user_id().into(),
            session: String::new(),
            sensor: kind,
        });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let zs: Vec<f64> = samples.iter().map(|s| s.z).collect();
    let unf: Vec<f64> = samples.iter().map(|s| s.energy()).collect();
    let t_s = samples.iter().map(|s| s.t_ms as f64 / 1000.0).collect();
    Ok((
        FilteredAxes {
            t_s,
            axes: [
                low_pass_filter(&xs, alpha)?,
                low_pass_filter(&ys, alpha)?,
                low_pass_filter(&zs, alpha)?,
            ],
        },
        unf,
    ))
}

fn expand_with_axes(
    window: &GestureWindow,
    subset: SensorSubset,
    alpha: f64,
) -> Result<(Vec<Dimension>, Vec<(SensorKind, FilteredAxes)>)> {
    let mut dims = Vec::with_capacity(19);
    let mut kin = Vec::with_capacity(3);
    for kind in subset.iter() {
        let code = kind.code();
        if kind.is_triaxial() {
            let (f, unf) = filtered_triaxial(window, kind, alpha)?;
            let [x, y, z] = &f.axes;
            let ene = x
                .iter()
                .zip(y)
                .zip(z)
                .map(|((a, b), c)| energy(*a, *b, *c))
                .collect();
            dims.push(Dimension { name: format!("{code}-x"), values: x.clone() });
            dims.push(Dimension { name: format!("{code}-y"), values: y.clone() });
            dims.push(Dimension { name: format!("{code}-z"), values: z.clone() });
            dims.push(Dimension { name: format!("{code}-ene"), values: ene });
            dims.push(Dimension { name: format!("{code}-unf"), values: unf });
            kin.push((kind, f));
        } else {
            if window.grv.is_empty() {
                return Err(Error::MissingSensor {
                    user: window.label.user_id().into(),
                    session: String::new(),
                    sensor: kind,
                });
            }
            let comps: [(&str, fn(&crate::types::QuaternionSample) -> f64); 4] = [
                ("x", |q| q.x),
                ("y", |q| q.y),
                ("z", |q| q.z),
                ("w", |q| q.w),
            ];
            for (axis, get) in comps {
                let raw: Vec<f64> = window.grv.iter().map(get).collect();
                dims.push(Dimension {
                    name: format!("{code}-{axis}"),
                    values: low_pass_filter(&raw, alpha)?,
                });
            }
        }
    }
    Ok((dims, kin))
}

/// Per-sample dimension series for the sensors in `subset`, in canonical order.
pub fn expand_dimensions(window: &GestureWindow, subset: SensorSubset, cfg: &FeatureConfig) -> Result<Vec<Dimension>> {
    Ok(expand_with_axes(window, subset, cfg.alpha()?)?.0)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// min, max, mean, median, sample stdev, sample variance, IQR, excess
/// kurtosis, skewness and peak count of a series, in `STAT_NAMES` order.
///
/// Quartiles interpolate linearly at positions `(n−1)·p`. Kurtosis and
/// skewness use biased central moments. A peak is an interior sample
/// strictly above both neighbours and above `mean + prominence · stdev`.
pub fn stat_features(series: &[f64], prominence: f64) -> Result<[f64; 10]> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = series.len();
    let nf = n as f64;
    let mut sorted = series.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mean = series.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in series {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let var = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    let stdev = var.sqrt();
    let degenerate = var < DEGENERATE_VARIANCE;
    let (kurt, skew) = if degenerate {
        (0.0, 0.0)
    } else {
        let b2 = m2 / nf;
        ((m4 / nf) / (b2 * b2) - 3.0, (m3 / nf) / b2.powf(1.5))
    };
    let peaks = if degenerate || n < 3 {
        0
    } else {
        let gate = mean + prominence * stdev;
        series
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2] && w[1] > gate)
            .count()
    };
    Ok([
        sorted[0],
        sorted[n - 1],
        mean,
        quantile_sorted(&sorted, 0.5),
        stdev,
        var,
        quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        kurt,
        skew,
        peaks as f64,
    ])
}

/// Velocity and displacement summaries of three filtered axes sampled at
/// `t_s` seconds: per axis mean velocity, max velocity and displacement,
/// then the Euclidean displacement. Integration is trapezoidal from rest.
pub fn integrate_kinematics(t_s: &[f64], axes: [&[f64]; 3]) -> Result<[f64; 10]> {
    let n = t_s.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut out = [0.0; 10];
    let mut disp = [0.0; 3];
    for (k, a) in axes.iter().enumerate() {
        debug_assert_eq!(a.len(), n);
        let mut v = 0.0;
        let mut v_sum = 0.0;
        let mut v_max = 0.0f64;
        let mut d = 0.0;
        for i in 1..n {
            let dt = t_s[i] - t_s[i - 1];
            let v_next = v + 0.5 * (a[i] + a[i - 1]) * dt;
            d += 0.5 * (v + v_next) * dt;
            v = v_next;
            v_sum += v;
            v_max = v_max.max(v);
        }
        out[3 * k] = v_sum / n as f64;
        out[3 * k + 1] = v_max;
        out[3 * k + 2] = d;
        disp[k] = d;
    }
    out[9] = energy(disp[0], disp[1], disp[2]);
    Ok(out)
}

/// Kinematic features of one triaxial sensor of a window.
pub fn kinematic_features(window: &GestureWindow, sensor: SensorKind, cfg: &FeatureConfig) -> Result<[f64; 10]> {
    if !sensor.is_triaxial() {
        return Err(Error::InvalidConfig("kinematic features need a triaxial sensor".into()));
    }
    let n = window.sample_count(sensor);
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let (f, _) = filtered_triaxial(window, sensor, cfg.alpha()?)?;
    integrate_kinematics(&f.t_s, [&f.axes[0], &f.axes[1], &f.axes[2]])
}

/// Ordered feature names shared by every vector of a run.
#[derive(Debug, Clone)]
pub struct FeatureSchema(Arc<[String]>);

impl PartialEq for FeatureSchema {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl FeatureSchema {
    pub fn for_subset(subset: SensorSubset) -> Self {
        let mut names = Vec::new();
        for kind in subset.iter() {
            let dims: &[&str] = if kind.is_triaxial() {
                &["x", "y", "z", "ene", "unf"]
            } else {
                &["x", "y", "z", "w"]
            };
            for dim in dims {
                for stat in STAT_NAMES {
                    names.push(format!("{kind}-{dim}-{stat}"));
                }
            }
        }
        for kind in subset.iter().filter(|k| k.is_triaxial()) {
            for axis in ["x", "y", "z"] {
                for stat in KINEMATIC_AXIS_NAMES {
                    names.push(format!("{kind}-{axis}-{stat}"));
                }
            }
            names.push(format!("{kind}-disptotal"));
        }
        Self::from_names(names)
    }

    pub fn from_names(names: Vec<String>) -> Self {
        FeatureSchema(names.into())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema: FeatureSchema,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.index_of(name).map(|i| self.values[i])
    }
}

/// Reusable featurizer for one sensor subset and configuration.
#[derive(Debug, Clone)]
pub struct Featurizer {
    subset: SensorSubset,
    cfg: FeatureConfig,
    alpha: f64,
    schema: FeatureSchema,
}

impl Featurizer {
    pub fn new(subset: SensorSubset, cfg: FeatureConfig) -> Result<Self> {
        Ok(Self {
            subset,
            alpha: cfg.alpha()?,
            cfg,
            schema: FeatureSchema::for_subset(subset),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn subset(&self) -> SensorSubset {
        self.subset
    }

    pub fn values(&self, window: &GestureWindow) -> Result<Vec<f64>> {
        let (dims, kin) = expand_with_axes(window, self.subset, self.alpha)?;
        let mut values = Vec::with_capacity(self.schema.len());
        for d in &dims {
            values.extend_from_slice(&stat_features(&d.values, self.cfg.peak_prominence)?);
        }
        for (_, f) in &kin {
            let k = integrate_kinematics(&f.t_s, [&f.axes[0], &f.axes[1], &f.axes[2]])?;
            values.extend_from_slice(&k);
        }
        debug_assert_eq!(values.len(), self.schema.len());
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "feature {} is not finite",
                self.schema.names()[i]
            )));
        }
        Ok(values)
    }

    pub fn featurize(&self, window: &GestureWindow) -> Result<FeatureVector> {
        Ok(FeatureVector {
            schema: self.schema.clone(),
            values: self.values(window)?,
        })
    }
}

/// Feature vector of a window over the sensors in `subset`.
pub fn featurize(window: &GestureWindow, subset: SensorSubset, cfg: &FeatureConfig) -> Result<FeatureVector> {
    Featurizer::new(subset, *cfg)?.featurize(window)
}

/// Writes one CSV row per window: `window_id,label_class,user_id,terminal_or_activity,<features>`.
pub fn write_feature_matrix(
    path: &Path,
    schema: &FeatureSchema,
    rows: &[(String, &WindowLabel, &[f64])],
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    write!(out, "window_id,label_class,user_id,terminal_or_activity").map_err(io)?;
    for n in schema.names() {
        write!(out, ",{n}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (id, label, values) in rows {
        let (class, user, meta) = match label {
            WindowLabel::Tap { user_id, terminal, .. } => ("tap", user_id, terminal.to_string()),
            WindowLabel::NonTap { user_id, activity } => ("nontap", user_id, activity.to_string()),
        };
        write!(out, "{id},{class},{user},{meta}").map_err(io)?;
        for v in *values {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}
