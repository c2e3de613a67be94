//! Trajectory logs in, observation matrices out; plus the synthetic stand-in
//! for recorded passing events.
//!
//! Trajectory CSV: header `event_id,t,R,L,v`, one row per sensor sample.
//! Observation CSV: header `inv_R,v,v_p,inv_T_adv`.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use crate::mixture::{GaussianComponent, GaussianMixture, MixtureError, TruncationBox};
use crate::scenario::{to_observation, Kinematics, ObservationVector, TtcConvention};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("event {event}: {message}")]
    Log { event: String, message: String },
    #[error("observation file: {0}")]
    Observations(String),
    #[error("synthetic generator: {0}")]
    Generator(String),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LogRow {
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub v: f64,
}

/// One passing event.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub event_id: String,
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// `n × 4` observations, one row per `(1/R, v, v_p, 1/T_adv)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub data: DMatrix<f64>,
    pub provenance: Provenance,
    /// The generating model when synthetic.
    pub generator: Option<GaussianMixture>,
}

impl ObservationMatrix {
    pub fn from_rows(rows: &[ObservationVector], provenance: Provenance) -> Self {
        let data = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i].to_array()[j]);
        Self { data, provenance, generator: None }
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        write_observations_csv(&self.data, out)
    }
}

#[derive(Deserialize)]
struct RawLogRow {
    event_id: String,
    t: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "L")]
    l: f64,
    v: f64,
}

/// Reads a trajectory CSV, grouping rows by `event_id` in order of first
/// appearance. Times must strictly increase within an event.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryLog>, IngestError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut logs: Vec<TrajectoryLog> = Vec::new();
    for rec in reader.deserialize::<RawLogRow>() {
        let raw = rec?;
        let row = LogRow { t: raw.t, r: raw.r, l: raw.l, v: raw.v };
        if ![row.t, row.r, row.l, row.v].iter().all(|x| x.is_finite()) {
            return Err(IngestError::Log { event: raw.event_id, message: "non-finite value".into() });
        }
        match logs.iter_mut().find(|l| l.event_id == raw.event_id) {
            Some(log) => {
                if row.t <= log.rows.last().expect("nonempty").t {
                    return Err(IngestError::Log { event: raw.event_id, message: format!("time {} is not increasing", row.t) });
                }
                log.rows.push(row);
            }
            None => logs.push(TrajectoryLog { event_id: raw.event_id, rows: vec![row] }),
        }
    }
    Ok(logs)
}

/// `|dL/dt|` per row: centered differences inside, one-sided at the ends.
pub fn pedestrian_speeds(rows: &[LogRow]) -> Vec<f64> {
    let n = rows.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            ((rows[b].l - rows[a].l) / (rows[b].t - rows[a].t)).abs()
        })
        .collect()
}

/// Observations from one event. Rows are kept on a `sample_stride` grid
/// starting at the first sample (a row is kept once its time reaches the next
/// mark), and rows with `R ≤ 0`, `v ≤ 0`, `v_p ≤ 0` or `T_adv = 0` are dropped.
/// An event whose rows are all dropped yields an empty matrix.
pub fn extract_observations(
    log: &TrajectoryLog,
    sample_stride: f64,
    convention: TtcConvention,
) -> Result<ObservationMatrix, IngestError> {
    if log.rows.len() < 2 {
        return Err(IngestError::Log { event: log.event_id.clone(), message: "needs at least two rows".into() });
    }
    if !(sample_stride >= 0.0) {
        return Err(IngestError::Log { event: log.event_id.clone(), message: format!("bad stride {sample_stride}") });
    }
    let speeds = pedestrian_speeds(&log.rows);
    let t_first = log.rows[0].t;
    let mut next_mark = 0u64;
    let mut out = Vec::new();
    for (row, v_p) in log.rows.iter().zip(speeds) {
        let mark = t_first + next_mark as f64 * sample_stride;
        if row.t + 1e-9 < mark {
            continue;
        }
        next_mark = if sample_stride > 0.0 { ((row.t - t_first) / sample_stride + 1e-9).floor() as u64 + 1 } else { 0 };
        if let Ok(obs) = to_observation(&Kinematics::new(row.r, row.l, row.v, v_p), convention) {
            out.push(obs);
        }
    }
    Ok(ObservationMatrix::from_rows(&out, Provenance::Real))
}

/// Extracts every event, returning the stacked observations and the ids of
/// events that contributed nothing.
pub fn extract_all(
    logs: &[TrajectoryLog],
    sample_stride: f64,
    convention: TtcConvention,
) -> Result<(ObservationMatrix, Vec<String>), IngestError> {
    let mut rows = Vec::new();
    let mut empty = Vec::new();
    for log in logs {
        let m = extract_observations(log, sample_stride, convention)?;
        if m.is_empty() {
            empty.push(log.event_id.clone());
        }
        rows.extend(m.data.row_iter().map(|r| ObservationVector::from_array([r[0], r[1], r[2], r[3]])));
    }
    Ok((ObservationMatrix::from_rows(&rows, Provenance::Real), empty))
}

/// `n` seeded draws from a 4-D positive-orthant model.
pub fn generate_synthetic(model: &GaussianMixture, n: usize, seed: u64) -> Result<ObservationMatrix, IngestError> {
    if model.dim() != 4 {
        return Err(IngestError::Generator(format!("model must be 4-dimensional, got {}", model.dim())));
    }
    match model.truncation() {
        Some(b) if b.lower().iter().all(|x| *x == 0.0) && b.upper().iter().all(|x| *x == f64::INFINITY) => {}
        _ => return Err(IngestError::Generator("model must be truncated to the positive orthant".into())),
    }
    let data = if n == 0 { DMatrix::zeros(0, 4) } else { model.sample(n, seed)? };
    Ok(ObservationMatrix { data, provenance: Provenance::Synthetic, generator: Some(model.clone()) })
}

fn covariance(sd: [f64; 4], corr: &[[f64; 4]; 4]) -> Vec<f64> {
    (0..16).map(|i| corr[i / 4][i % 4] * sd[i / 4] * sd[i % 4]).collect()
}

/// Three-regime stand-in for recorded passing events: a distant fast
/// approach, a mid-range negotiation, and a close slow pass. Within each
/// regime the vehicle is slower when closer and when the time advantage is
/// tighter.
pub fn reference_generator() -> GaussianMixture {
    #[rustfmt::skip]
    let corr = [
        [ 1.0, -0.5,  0.0,  0.3],
        [-0.5,  1.0, -0.2, -0.4],
        [ 0.0, -0.2,  1.0,  0.0],
        [ 0.3, -0.4,  0.0,  1.0],
    ];
    let specs = [
        ([0.035, 5.5, 1.35, 0.25], [0.008, 0.8, 0.2, 0.08]),
        ([0.09, 3.5, 1.3, 0.6], [0.02, 0.8, 0.22, 0.2]),
        ([0.22, 1.2, 1.45, 1.2], [0.05, 0.5, 0.25, 0.35]),
    ];
    let components = specs
        .iter()
        .map(|(mean, sd)| GaussianComponent::from_slices(mean, &covariance(*sd, &corr)).expect("positive definite"))
        .collect();
    GaussianMixture::new(vec![0.45, 0.35, 0.2], components, Some(TruncationBox::positive_orthant(4))).expect("valid generator")
}

pub fn write_observations_csv<W: Write>(data: &DMatrix<f64>, out: W) -> Result<(), IngestError> {
    if data.ncols() != 4 {
        return Err(IngestError::Observations(format!("expected 4 columns, got {}", data.ncols())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ObservationVector::NAMES)?;
    for row in data.row_iter() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads an observation CSV; the header must be `inv_R,v,v_p,inv_T_adv`.
pub fn read_observations_csv<R: Read>(input: R) -> Result<DMatrix<f64>, IngestError> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != ObservationVector::NAMES {
        return Err(IngestError::Observations(format!("unexpected header {header:?}")));
    }
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        for field in rec.iter() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| IngestError::Observations(format!("row {}: cannot parse {field:?}", i + 1)))?;
            values.push(x);
        }
    }
    Ok(DMatrix::from_row_slice(values.len() / 4, 4, &values))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TTC: TtcConvention = TtcConvention::DistanceOverSpeed;

    fn log(rows: Vec<(f64, f64, f64, f64)>) -> TrajectoryLog {
        TrajectoryLog { event_id: "e".into(), rows: rows.into_iter().map(|(t, r, l, v)| LogRow { t, r, l, v }).collect() }
    }

    #[test]
    fn standing_pedestrian_is_dropped() {
        let l = log((0..20).map(|i| (i as f64 * 0.1, 30.0 - i as f64 * 0.5, 3.0, 5.0)).collect());
        assert!(extract_observations(&l, 0.0, TTC).unwrap().is_empty());
    }

    #[test]
    fn linear_ramp_speed() {
        let l = log((0..30).map(|i| {
            let t = i as f64 * 0.1;
            (t, 40.0 - 6.0 * t, 9.0 - 1.5 * t, 6.0)
        }).collect());
        let speeds = pedestrian_speeds(&l.rows);
        for s in &speeds[1..speeds.len() - 1] {
            assert!((s - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_speed_crossing_reproduces_observations() {
        // R = 40 − 6t, L = 4.5 − 1.2t: T_adv = (40 − 6t)/6 − (4.5 − 1.2t)/1.2 = 35/12 for all t
        let l = log((0..31).map(|i| {
            let t = i as f64 * 0.1;
            (t, 40.0 - 6.0 * t, 4.5 - 1.2 * t, 6.0)
        }).collect());
        let m = extract_observations(&l, 0.5, TTC).unwrap();
        assert_eq!(m.len(), 7);
        for (k, row) in m.data.row_iter().enumerate() {
            let t = 0.5 * k as f64;
            if k == 0 || k == 6 {
                continue;
            }
            assert!((row[0] - 1.0 / (40.0 - 6.0 * t)).abs() < 1e-9);
            assert_eq!(row[1], 6.0);
            assert!((row[2] - 1.2).abs() < 1e-9);
            assert!((row[3] - 12.0 / 35.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_rows_give_at_most_two_observations() {
        let l = log(vec![(0.0, 20.0, 4.0, 5.0), (0.1, 19.5, 3.85, 5.0)]);
        let m = extract_observations(&l, 0.0, TTC).unwrap();
        assert!(m.len() <= 2 && !m.is_empty());
        assert!(extract_observations(&log(vec![(0.0, 1.0, 1.0, 1.0)]), 0.5, TTC).is_err());
    }

    #[test]
    fn negative_range_and_stopped_vehicle_dropped() {
        let l = log(vec![(0.0, 2.0, 4.0, 0.0), (0.1, 1.0, 3.8, 5.0), (0.2, -0.5, 3.6, 5.0)]);
        let m = extract_observations(&l, 0.0, TTC).unwrap();
        assert_eq!(m.len(), 1);
        for row in m.data.row_iter() {
            assert!(ObservationVector::from_array([row[0], row[1], row[2], row[3]]).is_valid());
        }
    }

    #[test]
    fn csv_logs_group_by_event() {
        let text = "event_id,t,R,L,v\na,0,20,4,5\nb,0,30,3,6\na,0.1,19.5,3.8,5\nb,0.1,29.4,2.9,6\n";
        let logs = read_trajectory_csv(text.as_bytes()).unwrap();
        assert_eq!(logs.len(), 2);
        assert_eq!(logs[0].event_id, "a");
        assert_eq!(logs[1].rows.len(), 2);
        let (m, empty) = extract_all(&logs, 0.0, TTC).unwrap();
        assert_eq!(m.len(), 4);
        assert!(empty.is_empty());
        let bad = "event_id,t,R,L,v\na,0.1,20,4,5\na,0.1,19,4,5\n";
        assert!(read_trajectory_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn synthetic_generation() {
        let g = reference_generator();
        let empty = generate_synthetic(&g, 0, 1).unwrap();
        assert_eq!(empty.data.shape(), (0, 4));
        let a = generate_synthetic(&g, 50, 9).unwrap();
        assert_eq!(a, generate_synthetic(&g, 50, 9).unwrap());
        assert!(a.data.iter().all(|x| *x > 0.0));
        let untruncated = g.untruncated();
        assert!(generate_synthetic(&untruncated, 5, 1).is_err());
    }

    #[test]
    fn synthetic_column_means_match_generator() {
        let g = reference_generator();
        let m = generate_synthetic(&g, 5000, 2024).unwrap();
        // oracle: moments of a large independent sample from the same generator
        let big = g.sample(400_000, 77).unwrap();
        for j in 0..4 {
            let col = m.data.column(j);
            let mean = col.mean();
            let sd = big.column(j).variance().sqrt();
            let target = big.column(j).mean();
            assert!((mean - target).abs() < 3.0 * sd / (5000f64).sqrt() + 3.0 * sd / (400_000f64).sqrt(), "column {j}");
        }
    }

    #[test]
    fn observation_csv_round_trip() {
        let g = reference_generator();
        let m = generate_synthetic(&g, 20, 3).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"inv_R,v,v_p,inv_T_adv\n"));
        assert_eq!(read_observations_csv(buf.as_slice()).unwrap(), m.data);
        let mut header_only = Vec::new();
        write_observations_csv(&DMatrix::zeros(0, 4), &mut header_only).unwrap();
        assert_eq!(header_only, b"inv_R,v,v_p,inv_T_adv\n");
        assert_eq!(read_observations_csv(header_only.as_slice()).unwrap().nrows(), 0);
    }
}
