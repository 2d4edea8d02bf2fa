//! Time grids and piecewise-linear trajectories.
//!
//! Everything the solver stores over time (states, inputs, multipliers,
//! constraint values) lives on a [`TimeGrid`] as one vector per node.
//! Queries between nodes interpolate linearly; queries outside the grid
//! clamp to the nearest endpoint.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Strictly increasing time stamps spanning `[t0, tf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite time stamp".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "time stamps not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { nodes })
    }

    /// `intervals + 1` equally spaced nodes on `[t0, tf]`.
    pub fn uniform(t0: f64, tf: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        if !(tf > t0) {
            return Err(Error::InvalidGrid(format!("tf ({tf}) must exceed t0 ({t0})")));
        }
        let dt = (tf - t0) / intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals).map(|i| t0 + dt * i as f64).collect();
        // pin the endpoint so nodes[last] == tf exactly
        nodes[intervals] = tf;
        TimeGrid::new(nodes)
    }

    /// Uniform grid whose spacing does not exceed `max_dt`.
    pub fn with_max_spacing(t0: f64, tf: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        let intervals = (((tf - t0) / max_dt) - 1e-9).ceil().max(1.0) as usize;
        TimeGrid::uniform(t0, tf, intervals)
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn tf(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn duration(&self) -> f64 {
        self.tf() - self.t0()
    }

    /// Same node pattern translated by `dt`.
    pub fn shifted(&self, dt: f64) -> TimeGrid {
        TimeGrid {
            nodes: self.nodes.iter().map(|t| t + dt).collect(),
        }
    }

    /// Bracketing interval for `t`: returns `(i, w)` with `t ≈ (1-w)·nodes[i] + w·nodes[i+1]`
    /// and `w ∈ [0, 1]`. Times outside the grid clamp to the endpoints.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if t <= self.nodes[0] {
            return (0, 0.0);
        }
        if t >= self.nodes[n - 1] {
            return (n - 2, 1.0);
        }
        // first index with node > t, minus one
        let i = self.nodes.partition_point(|&s| s <= t) - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, (t - a) / (b - a))
    }
}

/// One fixed-dimension vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory values vs grid nodes",
                expected: grid.len(),
                got: values.len(),
            });
        }
        let dim = values[0].len();
        for (v, &t) in values.iter().zip(grid.nodes()) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "trajectory vector dimension",
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "trajectory value",
                    t,
                });
            }
        }
        Ok(Trajectory { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: DVector<f64>) -> Result<Self> {
        let values = vec![value; grid.len()];
        Trajectory::new(grid, values)
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(grid: TimeGrid, f: impl FnMut(f64) -> DVector<f64>) -> Result<Self> {
        let values = grid.nodes().iter().copied().map(f).collect();
        Trajectory::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &DVector<f64> {
        &self.values[node]
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.values[self.values.len() - 1]
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<DVector<f64>> {
        self.values
    }

    /// Piecewise-linear value at `t`, clamped to the endpoints outside the grid.
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let (i, w) = self.grid.locate(t);
        if w == 0.0 {
            return self.values[i].clone();
        }
        if w == 1.0 {
            return self.values[i + 1].clone();
        }
        &self.values[i] * (1.0 - w) + &self.values[i + 1] * w
    }

    /// Re-sample onto another grid. Nodes beyond the end hold the final value.
    pub fn resample(&self, grid: &TimeGrid) -> Trajectory {
        let values = grid.nodes().iter().map(|&t| self.interpolate(t)).collect();
        Trajectory {
            grid: grid.clone(),
            values,
        }
    }

    /// Moves the window forward by `dt`: the overlap is interpolated from `self`
    /// and the new tail `[tf, tf + dt]` holds the final value.
    pub fn shift_and_extrapolate(&self, dt: f64) -> Result<Trajectory> {
        if dt < 0.0 || !dt.is_finite() {
            return Err(Error::param("dt", format!("shift must be non-negative, got {dt}")));
        }
        if dt >= self.grid.duration() {
            return Err(Error::param(
                "dt",
                format!("shift {dt} must be shorter than the horizon {}", self.grid.duration()),
            ));
        }
        if dt == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.resample(&self.grid.shifted(dt)))
    }

    /// Maps every node value through `f`, keeping the grid.
    pub fn map(&self, mut f: impl FnMut(f64, &DVector<f64>) -> DVector<f64>) -> Result<Trajectory> {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| f(t, v))
            .collect();
        Trajectory::new(self.grid.clone(), values)
    }

    /// CSV with a `time` column followed by one column per vector entry.
    pub fn write_csv<W: Write>(&self, writer: W, column_names: &[String]) -> Result<()> {
        if column_names.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "csv column names",
                expected: self.dim(),
                got: column_names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.dim() + 1);
        header.push("time".to_string());
        header.extend(column_names.iter().cloned());
        w.write_record(&header)?;
        for (t, v) in self.grid.nodes().iter().zip(&self.values) {
            let mut row = Vec::with_capacity(v.len() + 1);
            row.push(format!("{t}"));
            row.extend(v.iter().map(|x| format!("{x}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`Trajectory::write_csv`]. Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Trajectory, Vec<String>)> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("time") {
            return Err(Error::Io("first csv column must be `time`".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("bad number `{s}`: {e}")))
            };
            let mut fields = record.iter();
            nodes.push(parse(fields.next().unwrap_or(""))?);
            let v: Result<Vec<f64>> = fields.map(parse).collect();
            values.push(DVector::from_vec(v?));
        }
        let traj = Trajectory::new(TimeGrid::new(nodes)?, values)?;
        Ok((traj, names))
    }
}
