//! CSV and JSON output formats.
//!
//! CSV files use `,` separators, `.` decimals, LF line endings and a header
//! row. Floats are written in their shortest round-trip form.

use perch_core::mission::{LandingStats, MeanSd, MissionLog, TrialOutcome};
use perch_core::rl::train::CurveRow;
use perch_core::so3::{pitch_of, roll_of, yaw_of, Vec3};
use perch_core::trajgen::{ReferenceTrajectory, TrajectorySample};
use serde_json::json;
use thiserror::Error;

pub const TRAJECTORY_COLUMNS: [&str; 17] =
    ["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az", "jx", "jy", "jz", "psi", "wx", "wy", "wz"];

pub const CURVE_COLUMNS: [&str; 5] = ["iteration", "episodes", "mean_return", "policy_loss", "value_loss"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory csv: {0}")]
    Trajectory(String),
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("writing to memory cannot fail")
}

fn push_vec(row: &mut Vec<String>, v: Vec3) {
    row.extend([v.x, v.y, v.z].iter().map(f64::to_string));
}

pub fn trajectory_csv(r: &ReferenceTrajectory) -> Vec<u8> {
    let mut w = writer();
    w.write_record(TRAJECTORY_COLUMNS).unwrap();
    for s in &r.samples {
        let mut row = vec![s.t.to_string()];
        for v in [s.x, s.v, s.a, s.jerk] {
            push_vec(&mut row, v);
        }
        row.push(s.psi.to_string());
        push_vec(&mut row, s.omega);
        w.write_record(&row).unwrap();
    }
    finish(w)
}

/// Reads a trajectory CSV with the standard columns. Samples must be uniformly
/// spaced in time.
pub fn read_trajectory_csv(text: &[u8], perch_point: Vec3) -> Result<ReferenceTrajectory, FormatError> {
    let bad = |m: String| FormatError::Trajectory(m);
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text);
    let headers = rd.headers()?.clone();
    let idx: Vec<usize> = TRAJECTORY_COLUMNS
        .iter()
        .map(|c| headers.iter().position(|h| h == *c).ok_or_else(|| bad(format!("missing column `{c}`"))))
        .collect::<Result<_, _>>()?;
    let mut samples = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64, FormatError> {
            let raw = rec.get(idx[i]).unwrap_or("");
            raw.parse::<f64>().map_err(|_| bad(format!("row {}: `{raw}` is not a number", line + 2)))
        };
        let v = |i: usize| -> Result<Vec3, FormatError> { Ok(Vec3::new(f(i)?, f(i + 1)?, f(i + 2)?)) };
        samples.push(TrajectorySample { t: f(0)?, x: v(1)?, v: v(4)?, a: v(7)?, jerk: v(10)?, psi: f(13)?, omega: v(14)? });
    }
    if samples.len() < 2 {
        return Err(bad("at least two samples are required".into()));
    }
    let dt = samples[1].t - samples[0].t;
    for (k, s) in samples.iter().enumerate() {
        let expect = samples[0].t + k as f64 * dt;
        let on_grid = (s.t - expect).abs() <= 1e-6 * dt.max(1.0);
        if !on_grid {
            return Err(bad(format!("sample {k} breaks the uniform time step {dt}")));
        }
    }
    let r = ReferenceTrajectory { dt, samples, perch_point, success: true };
    if !r.validate() {
        return Err(bad("times must start at t >= 0, increase, and all values be finite".into()));
    }
    Ok(r)
}

pub fn trajectory_sidecar(r: &ReferenceTrajectory, checkpoint_id: Option<&str>) -> serde_json::Value {
    json!({
        "perch_point": r.perch_point,
        "dt": r.dt,
        "samples": r.samples.len(),
        "duration": r.duration(),
        "success": r.success,
        "checkpoint": checkpoint_id,
    })
}

pub fn curve_csv(rows: &[CurveRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(CURVE_COLUMNS).unwrap();
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.episodes.to_string(),
            r.mean_return.to_string(),
            r.policy_loss.to_string(),
            r.value_loss.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn mission_csv(log: &MissionLog) -> Vec<u8> {
    let mut w = writer();
    let mut header: Vec<String> = ["t", "stage", "x", "y", "z", "vx", "vy", "vz"].map(String::from).to_vec();
    header.extend((1..=3).flat_map(|i| (1..=3).map(move |j| format!("r{i}{j}"))));
    header.extend(["wx", "wy", "wz", "roll", "pitch", "yaw", "m1", "m2", "m3", "m4"].map(String::from));
    header.extend(TRAJECTORY_COLUMNS.iter().skip(1).map(|c| format!("ref_{c}")));
    header.extend(["acx", "acy", "acz", "tc"].map(String::from));
    header.extend((1..=3).flat_map(|i| (1..=3).map(move |j| format!("rc{i}{j}"))));
    w.write_record(&header).unwrap();
    for s in &log.steps {
        let st = &s.state;
        let mut row = vec![s.t.to_string(), s.stage.label().to_string()];
        push_vec(&mut row, st.x);
        push_vec(&mut row, st.v);
        row.extend(st.r.as_mat().to_flat().iter().map(f64::to_string));
        push_vec(&mut row, st.omega);
        row.extend([roll_of(&st.r), pitch_of(&st.r), yaw_of(&st.r)].iter().map(f64::to_string));
        row.extend(s.command.0.iter().map(f64::to_string));
        let r = &s.reference;
        for v in [r.x, r.v, r.a, r.jerk] {
            push_vec(&mut row, v);
        }
        row.push(r.psi.to_string());
        push_vec(&mut row, r.omega);
        push_vec(&mut row, s.a_c);
        row.push(s.t_c.to_string());
        row.extend(s.r_c.as_mat().to_flat().iter().map(f64::to_string));
        w.write_record(&row).unwrap();
    }
    finish(w)
}

pub fn mission_summary(log: &MissionLog, outcome: &str, checkpoint_id: Option<&str>) -> serde_json::Value {
    let first = log.steps.first().map(|s| s.state);
    json!({
        "outcome": outcome,
        "checkpoint": checkpoint_id,
        "steps": log.steps.len(),
        "duration": log.steps.last().map_or(0.0, |s| s.t),
        "switch_time": log.switch_time,
        "initial_state": first,
        "contact": log.contact.map(|c| json!({
            "t": c.t,
            "y_cm": c.y * 100.0,
            "z_cm": c.z * 100.0,
            "pitch_deg": c.pitch.to_degrees(),
            "pitch_error_deg": c.pitch_error_deg(),
            "speed": c.speed,
        })),
        "reference_success": log.reference.success,
    })
}

/// Landing statistics reported for comparison (mean, SD): y and z offsets in
/// cm, pitch in degrees; every trial perched.
pub const REFERENCE_STATS: [(f64, f64); 3] = [(-0.47, 0.2), (-1.74, 0.21), (88.83, 0.62)];

pub fn stats_json(stats: &LandingStats, outcomes: &[TrialOutcome]) -> serde_json::Value {
    let r = REFERENCE_STATS;
    json!({
        "stats": stats,
        "reference": {
            "y_cm": { "mean": r[0].0, "sd": r[0].1 },
            "z_cm": { "mean": r[1].0, "sd": r[1].1 },
            "pitch_deg": { "mean": r[2].0, "sd": r[2].1 },
            "success_rate": 1.0,
        },
        "trials": outcomes,
    })
}

fn cell(v: Option<MeanSd>) -> (String, String) {
    match v {
        Some(m) => (format!("{:.2}", m.mean), format!("{:.2}", m.sd)),
        None => ("-".into(), "-".into()),
    }
}

/// Three-row landing table (y-axis, z-axis, pitch angle) with mean and SD,
/// followed by the reference values and the success count.
pub fn stats_table(stats: &LandingStats) -> String {
    let rows = [("y-axis (cm)", stats.y_cm), ("z-axis (cm)", stats.z_cm), ("Pitch angle (deg)", stats.pitch_deg)];
    let mut out = format!("{:<20}{:>10}{:>10}{:>14}{:>12}\n", "", "Mean", "SD", "Ref. mean", "Ref. SD");
    for ((label, v), (rm, rs)) in rows.iter().zip(REFERENCE_STATS) {
        let (m, s) = cell(*v);
        out += &format!("{label:<20}{m:>10}{s:>10}{rm:>14.2}{rs:>12.2}\n");
    }
    let (em, es) = cell(stats.pitch_error_deg);
    out += &format!("{:<20}{em:>10}{es:>10}\n", "Pitch error (deg)");
    out += &format!(
        "Success: {}/{} ({:.0}%), wall contacts: {}\n",
        stats.successes,
        stats.trials,
        100.0 * stats.success_rate,
        stats.contacts
    );
    out
}

pub fn trials_csv(outcomes: &[TrialOutcome]) -> Vec<u8> {
    let mut w = writer();
    w.write_record([
        "trial", "seed", "x0", "y0", "z0", "vx0", "vy0", "vz0", "success", "failure", "contact_t", "y_cm", "z_cm",
        "pitch_deg",
    ])
    .unwrap();
    for o in outcomes {
        let mut row = vec![o.trial.to_string(), o.seed.to_string()];
        push_vec(&mut row, o.initial.x);
        push_vec(&mut row, o.initial.v);
        row.push(o.success.to_string());
        row.push(o.failure.map_or(String::new(), |f| serde_json::to_value(f).unwrap().as_str().unwrap().to_string()));
        match o.contact {
            Some(c) => row.extend([c.t, c.y * 100.0, c.z * 100.0, c.pitch.to_degrees()].iter().map(f64::to_string)),
            None => row.extend(std::iter::repeat(String::new()).take(4)),
        }
        w.write_record(&row).unwrap();
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use perch_core::dynamics::{QuadParams, QuadState};
    use perch_core::trajgen::ScriptedApproach;

    #[test]
    fn trajectory_csv_round_trip() {
        let p = QuadParams::default();
        let r = ScriptedApproach { tail: 0.05, ..Default::default() }
            .trajectory(&QuadState::at_rest(Vec3::new(1.3, 0.2, -0.1)), Vec3::ZERO, &p);
        let bytes = trajectory_csv(&r);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz,psi,wx,wy,wz\n"));
        assert!(!text.contains('\r'));
        let back = read_trajectory_csv(&bytes, Vec3::ZERO).unwrap();
        assert_eq!(back.samples, r.samples);
    }

    #[test]
    fn reader_rejects_missing_columns_and_gaps() {
        assert!(read_trajectory_csv(b"t,x\n0,1\n", Vec3::ZERO).is_err());
        let mut text = TRAJECTORY_COLUMNS.join(",") + "\n";
        for t in [0.0, 0.1, 0.3] {
            text += &format!("{t}{}\n", ",0".repeat(16));
        }
        assert!(read_trajectory_csv(text.as_bytes(), Vec3::ZERO).is_err());
    }

    #[test]
    fn table_has_three_rows() {
        let stats = perch_core::mission::landing_stats(&[]);
        let t = stats_table(&stats);
        assert!(t.contains("y-axis (cm)") && t.contains("z-axis (cm)") && t.contains("Pitch angle (deg)"));
        assert!(t.contains("Success: 0/0"));
    }
}
