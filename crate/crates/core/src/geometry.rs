//! Random network realizations and geometric queries.
//!
//! Sensors are placed by a uniform clustering process: each sensor is drawn
//! uniformly on the square `[-R, R]^2` and redrawn until it lands inside the
//! surveillance disk and outside the exclusion zone of every sensor already
//! placed (and, optionally, outside an exclusion disk around the source).

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-sensor redraw budget before giving up on a placement.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Unknown source parameters `[P0, xT, yT]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Received power at the reference distance.
    pub p0: f64,
    pub x: f64,
    pub y: f64,
}

impl SourceParams {
    pub const fn new(p0: f64, x: f64, y: f64) -> Self {
        Self { p0, x, y }
    }

    pub fn location(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// One realization of the sensor deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    pub sensors: Vec<Point>,
    pub radius: f64,
    pub r_ex: f64,
    /// Seed of the stream that produced the geometry, when sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl NetworkGeometry {
    /// Builds a geometry from explicit coordinates, checking every invariant.
    pub fn new(sensors: Vec<Point>, radius: f64, r_ex: f64) -> Result<Self> {
        let geom = Self {
            sensors,
            radius,
            r_ex,
            seed: None,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn k(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::InvalidInput("geometry needs at least one sensor".into()));
        }
        if !(self.radius > 0.0) || !(self.r_ex >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "radius must be > 0 and r_ex >= 0 (got {}, {})",
                self.radius, self.r_ex
            )));
        }
        for (i, s) in self.sensors.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite()) || s.x * s.x + s.y * s.y > self.radius * self.radius {
                return Err(Error::InvalidInput(format!("sensor {i} lies outside the disk")));
            }
            for (j, o) in self.sensors[..i].iter().enumerate() {
                if s.distance(o) < self.r_ex {
                    return Err(Error::InvalidInput(format!(
                        "sensors {j} and {i} are closer than r_ex = {}",
                        self.r_ex
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest pairwise sensor distance (infinite for a single sensor).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.sensors.iter().enumerate() {
            for b in &self.sensors[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    /// Applies `f` to every sensor coordinate.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Self {
        Self {
            sensors: self.sensors.iter().copied().map(f).collect(),
            ..self.clone()
        }
    }

    /// Text form: `#`-prefixed metadata lines, a header, one row per sensor.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# K={}", self.k());
        let _ = writeln!(out, "# R={:.16e}", self.radius);
        let _ = writeln!(out, "# R_ex={:.16e}", self.r_ex);
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed={s}");
            }
            None => out.push_str("# seed=none\n"),
        }
        out.push_str("index,x,y\n");
        for (i, p) in self.sensors.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.16e},{:.16e}", p.x, p.y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut radius = None;
        let mut r_ex = None;
        let mut seed = None;
        let mut k = None;
        let mut sensors = Vec::new();
        let bad = |line: usize, msg: &str| Error::InvalidInput(format!("geometry text line {}: {msg}", line + 1));
        let mut header_seen = false;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta.trim().split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
                let num = |v: &str| v.parse::<f64>().map_err(|_| bad(n, "not a number"));
                match key {
                    "K" => k = Some(value.parse::<usize>().map_err(|_| bad(n, "K must be an integer"))?),
                    "R" => radius = Some(num(value)?),
                    "R_ex" => r_ex = Some(num(value)?),
                    "seed" if value == "none" => seed = None,
                    "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(n, "bad seed"))?),
                    _ => return Err(bad(n, "unknown metadata key")),
                }
                continue;
            }
            if !header_seen {
                if line != "index,x,y" {
                    return Err(bad(n, "expected header 'index,x,y'"));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(n, "expected 3 fields"));
            }
            let idx: usize = fields[0].parse().map_err(|_| bad(n, "bad index"))?;
            if idx != sensors.len() {
                return Err(bad(n, "indices must be consecutive from 0"));
            }
            let x: f64 = fields[1].parse().map_err(|_| bad(n, "bad x"))?;
            let y: f64 = fields[2].parse().map_err(|_| bad(n, "bad y"))?;
            sensors.push(Point::new(x, y));
        }
        let radius = radius.ok_or_else(|| Error::InvalidInput("missing R".into()))?;
        let r_ex = r_ex.ok_or_else(|| Error::InvalidInput("missing R_ex".into()))?;
        if let Some(k) = k {
            if k != sensors.len() {
                return Err(Error::InvalidInput(format!("K={k} but {} rows", sensors.len())));
            }
        }
        let mut geom = Self::new(sensors, radius, r_ex)?;
        geom.seed = seed;
        Ok(geom)
    }

    pub fn to_json(&self) -> String {
        let record = GeometryRecord {
            k: self.k(),
            radius: self.radius,
            r_ex: self.r_ex,
            seed: self.seed,
            sensors: self.sensors.iter().map(|p| [p.x, p.y]).collect(),
        };
        serde_json::to_string_pretty(&record).expect("geometry serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: GeometryRecord =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("geometry JSON: {e}")))?;
        if record.k != record.sensors.len() {
            return Err(Error::InvalidInput(format!(
                "K={} but {} sensors listed",
                record.k,
                record.sensors.len()
            )));
        }
        let mut geom = Self::new(
            record.sensors.iter().map(|s| Point::new(s[0], s[1])).collect(),
            record.radius,
            record.r_ex,
        )?;
        geom.seed = record.seed;
        Ok(geom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryRecord {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "R")]
    radius: f64,
    #[serde(rename = "R_ex")]
    r_ex: f64,
    #[serde(default)]
    seed: Option<u64>,
    sensors: Vec<[f64; 2]>,
}

/// Everything needed to draw one geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub k: usize,
    pub radius: f64,
    pub r_ex: f64,
    pub max_attempts: usize,
    /// No sensor may fall within this distance of `source` (0 disables).
    pub source_exclusion: f64,
    pub source: Point,
}

impl GeometrySpec {
    pub fn new(k: usize, radius: f64, r_ex: f64) -> Self {
        Self {
            k,
            radius,
            r_ex,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            source_exclusion: 0.0,
            source: Point::new(0.0, 0.0),
        }
    }
}

fn uniform_in_square<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let x = rng.random_range(-radius..=radius);
    let y = rng.random_range(-radius..=radius);
    Point::new(x, y)
}

/// Draws a point uniformly on the disk of the given radius by rejection.
pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    loop {
        let p = uniform_in_square(radius, rng);
        if p.x * p.x + p.y * p.y <= radius * radius {
            return p;
        }
    }
}

/// Samples a geometry from the uniform clustering process.
pub fn sample_geometry_with<R: Rng + ?Sized>(spec: &GeometrySpec, rng: &mut R) -> Result<NetworkGeometry> {
    if spec.k == 0 || !(spec.radius > 0.0) || !(spec.r_ex >= 0.0) || spec.max_attempts == 0 {
        return Err(Error::InvalidInput(format!(
            "need K >= 1, R > 0, R_ex >= 0, max_attempts >= 1 (got {spec:?})"
        )));
    }
    let r2 = spec.radius * spec.radius;
    let mut sensors: Vec<Point> = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let mut placed = false;
        for _ in 0..spec.max_attempts {
            let p = uniform_in_square(spec.radius, rng);
            if p.x * p.x + p.y * p.y > r2 {
                continue;
            }
            if spec.source_exclusion > 0.0 && p.distance(&spec.source) < spec.source_exclusion {
                continue;
            }
            if sensors.iter().any(|s| s.distance(&p) < spec.r_ex) {
                continue;
            }
            sensors.push(p);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PackingFailure {
                sensor: i,
                attempts: spec.max_attempts,
            });
        }
    }
    Ok(NetworkGeometry {
        sensors,
        radius: spec.radius,
        r_ex: spec.r_ex,
        seed: None,
    })
}

/// Samples `k` sensors in a disk of radius `radius` with pairwise separation
/// at least `r_ex`.
pub fn sample_geometry<R: Rng + ?Sized>(
    k: usize,
    radius: f64,
    r_ex: f64,
    max_attempts: usize,
    rng: &mut R,
) -> Result<NetworkGeometry> {
    let spec = GeometrySpec {
        max_attempts,
        ..GeometrySpec::new(k, radius, r_ex)
    };
    sample_geometry_with(&spec, rng)
}

/// Euclidean distance between the source and a sensor.
pub fn distance(source: &SourceParams, sensor: &Point) -> f64 {
    source.location().distance(sensor)
}

/// Number of sensors within `r_t` of the source (boundary inclusive).
pub fn count_within(geom: &NetworkGeometry, source: &SourceParams, r_t: f64) -> usize {
    geom.sensors.iter().filter(|s| distance(source, s) <= r_t).count()
}

/// Whether any sensor sits closer than the reference distance `d0`.
pub fn has_sensor_within(geom: &NetworkGeometry, source: &SourceParams, d0: f64) -> bool {
    geom.sensors.iter().any(|s| distance(source, s) < d0)
}
