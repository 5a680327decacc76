//! CSV formats: reference event files, detection files, and training loss
//! curves. Angles are degrees, written with shortest round-trip formatting
//! so that parsing them back is bit-exact.

use std::path::Path;

use adyolo_core::decoder::Detection;
use adyolo_core::geometry::{Direction, GridSpec};
use adyolo_core::labels::{LabelError, ReferenceSet};
use adyolo_core::loss::LossBreakdown;
use anyhow::{bail, Context, Result};

pub const EVENT_HEADER: &str = "frame,class_id,source_id,azimuth_deg,elevation_deg";
pub const DETECTION_HEADER: &str = "frame,class_id,source_id,azimuth_deg,elevation_deg,score";
pub const LOSS_CURVE_HEADER: &str = "epoch,l_delta,l_pos,l_neg,l_class,total";

/// One reference event row. `source_id` is -1 when unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub frame: usize,
    pub class_id: usize,
    pub source_id: i64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    value: &str,
) -> Result<T> {
    value.trim().parse().map_err(|_| {
        anyhow::anyhow!(
            "{}:{line}: invalid {name} `{}`",
            path.display(),
            value.trim()
        )
    })
}

fn split_row<'l>(path: &Path, line: usize, raw: &'l str, fields: usize) -> Result<Vec<&'l str>> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != fields {
        bail!(
            "{}:{line}: expected {fields} comma-separated fields, found {}",
            path.display(),
            parts.len()
        );
    }
    Ok(parts)
}

fn parse_event(path: &Path, line: usize, parts: &[&str]) -> Result<EventRow> {
    let frame: i64 = parse_field(path, line, "frame", parts[0])?;
    let class_id: i64 = parse_field(path, line, "class_id", parts[1])?;
    if frame < 0 {
        bail!("{}:{line}: frame must be non-negative", path.display());
    }
    if class_id < 0 {
        bail!("{}:{line}: class_id must be non-negative", path.display());
    }
    Ok(EventRow {
        frame: frame as usize,
        class_id: class_id as usize,
        source_id: parse_field(path, line, "source_id", parts[2])?,
        azimuth_deg: parse_field(path, line, "azimuth_deg", parts[3])?,
        elevation_deg: parse_field(path, line, "elevation_deg", parts[4])?,
    })
}

/// Reads a reference event file (header mandatory).
pub fn read_events(path: &Path) -> Result<Vec<EventRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == EVENT_HEADER => {}
        Some((_, header)) => bail!(
            "{}:1: expected header `{EVENT_HEADER}`, found `{header}`",
            path.display()
        ),
        None => bail!("{}: empty file, header is mandatory", path.display()),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        let parts = split_row(path, line, raw, 5)?;
        rows.push(parse_event(path, line, &parts)?);
    }
    Ok(rows)
}

pub fn write_events(path: &Path, rows: &[EventRow]) -> Result<()> {
    let mut out = String::from(EVENT_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.frame, row.class_id, row.source_id, row.azimuth_deg, row.elevation_deg
        ));
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Builds a validated reference set from rows, mapping row-level errors back
/// to file line numbers (header is line 1, first row line 2).
pub fn reference_set_from_rows(
    path: &Path,
    rows: &[EventRow],
    num_frames: usize,
    num_classes: usize,
    grid: GridSpec,
) -> Result<ReferenceSet> {
    let tuples: Vec<(usize, usize, f64, f64)> = rows
        .iter()
        .map(|r| (r.frame, r.class_id, r.azimuth_deg, r.elevation_deg))
        .collect();
    ReferenceSet::from_rows(&tuples, num_frames, num_classes, grid).map_err(|e| {
        let line = match &e {
            LabelError::FrameOutOfRange { row, .. }
            | LabelError::ClassOutOfRange { row, .. }
            | LabelError::BadDirection { row, .. } => Some(row + 2),
            _ => None,
        };
        match line {
            Some(line) => anyhow::anyhow!("{}:{line}: {e}", path.display()),
            None => anyhow::anyhow!("{}: {e}", path.display()),
        }
    })
}

/// Reads detections: either the 6-column detection format or a plain
/// reference file (scores default to 1), so references can be evaluated
/// against themselves directly.
pub fn read_detections(path: &Path) -> Result<Vec<(EventRow, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let with_score = match lines.next() {
        Some((_, header)) if header.trim() == DETECTION_HEADER => true,
        Some((_, header)) if header.trim() == EVENT_HEADER => false,
        Some((_, header)) => bail!(
            "{}:1: expected header `{DETECTION_HEADER}` or `{EVENT_HEADER}`, found `{header}`",
            path.display()
        ),
        None => bail!("{}: empty file, header is mandatory", path.display()),
    };
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        let parts = split_row(path, line, raw, if with_score { 6 } else { 5 })?;
        let event = parse_event(path, line, &parts[..5])?;
        let score = if with_score {
            parse_field(path, line, "score", parts[5])?
        } else {
            1.0
        };
        rows.push((event, score));
    }
    Ok(rows)
}

/// Converts detection rows into decoder detections, validating directions
/// with file line numbers. Rows keep their file order.
pub fn detections_from_rows(path: &Path, rows: &[(EventRow, f64)]) -> Result<Vec<Detection>> {
    rows.iter()
        .enumerate()
        .map(|(idx, (row, score))| {
            let doa = Direction::new(row.azimuth_deg, row.elevation_deg)
                .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), idx + 2))?;
            Ok(Detection {
                frame: row.frame,
                class_id: row.class_id,
                doa,
                score: *score,
            })
        })
        .collect()
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut out = String::from(DETECTION_HEADER);
    out.push('\n');
    for det in detections {
        out.push_str(&format!(
            "{},{},-1,{},{},{}\n",
            det.frame,
            det.class_id,
            det.doa.azimuth_deg(),
            det.doa.elevation_deg(),
            det.score
        ));
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the per-epoch loss curve; the threshold-dependent columns hold the
/// mean over thresholds, matching the total's weighting.
pub fn write_loss_curve(path: &Path, curve: &[LossBreakdown]) -> Result<()> {
    let mut out = String::from(LOSS_CURVE_HEADER);
    out.push('\n');
    for (epoch, point) in curve.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            epoch,
            point.doa,
            point.mean_pos(),
            point.mean_neg(),
            point.mean_class(),
            point.total
        ));
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.csv");
        let rows = vec![
            EventRow {
                frame: 0,
                class_id: 2,
                source_id: 0,
                azimuth_deg: -179.123_456_789_012_3,
                elevation_deg: 89.999_999_999_9,
            },
            EventRow {
                frame: 3,
                class_id: 0,
                source_id: -1,
                azimuth_deg: 0.1 + 0.2,
                elevation_deg: -45.0,
            },
        ];
        write_events(&path, &rows).unwrap();
        let back = read_events(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.csv");
        std::fs::write(&path, format!("{EVENT_HEADER}\n0,0,0,0,0\n1,x,0,0,0\n")).unwrap();
        let err = format!("{:#}", read_events(&path).unwrap_err());
        assert!(err.contains(":3"), "{err}");
        assert!(err.contains("class_id"), "{err}");

        std::fs::write(&path, "wrong,header\n").unwrap();
        let err = format!("{:#}", read_events(&path).unwrap_err());
        assert!(err.contains(":1"), "{err}");

        std::fs::write(&path, format!("{EVENT_HEADER}\n0,0,0,0,95.0\n")).unwrap();
        let rows = read_events(&path).unwrap();
        let err = format!(
            "{:#}",
            reference_set_from_rows(&path, &rows, 10, 3, GridSpec::default()).unwrap_err()
        );
        assert!(err.contains(":2"), "{err}");
        assert!(err.contains("elevation"), "{err}");
    }

    #[test]
    fn reference_files_are_valid_detection_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.csv");
        write_events(
            &path,
            &[EventRow {
                frame: 1,
                class_id: 0,
                source_id: 4,
                azimuth_deg: 10.0,
                elevation_deg: 5.0,
            }],
        )
        .unwrap();
        let dets = read_detections(&path).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].1, 1.0);
    }
}
