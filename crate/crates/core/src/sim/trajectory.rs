//! Per-step trajectory dump.

use std::io::Write;

use serde::Serialize;

use super::Pedestrian;

/// One row per step per active pedestrian; a step with no pedestrian gets a
/// single row with the pedestrian fields empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub v: f64,
    pub pedestrian_id: Option<usize>,
    /// Distance of the pedestrian to the vehicle path, m.
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub v_p: Option<f64>,
}

pub(super) fn push_rows(rows: &mut Vec<TrajectoryRow>, t: f64, r: f64, v: f64, peds: &[Pedestrian], l0: f64) {
    if peds.is_empty() {
        rows.push(TrajectoryRow { t, r, v, pedestrian_id: None, l: None, v_p: None });
    }
    for p in peds {
        rows.push(TrajectoryRow {
            t,
            r,
            v,
            pedestrian_id: Some(p.id),
            l: Some(p.lateral(l0).abs()),
            v_p: Some(p.walk_speed),
        });
    }
}

/// Writes rows as CSV with header `t,R,v,pedestrian_id,L,v_p`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["t", "R", "v", "pedestrian_id", "L", "v_p"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
