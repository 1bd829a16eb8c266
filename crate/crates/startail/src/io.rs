//! CSV import/export for series and estimator outputs.
//!
//! A series file is one row per time step, columns `t, c0, ..., c{d-1}`,
//! preceded by a comment line carrying the space descriptor:
//!
//! ```text
//! # space = {"kind":"euclidean","dim":2,"p":2.0}
//! t,c0,c1
//! 0,1.37,0.22
//! ```

use crate::error::{Error, Result};
use crate::estimate::ExtremogramCurve;
use crate::models::SeriesPath;
use crate::point::Point;
use crate::rng::StreamSeed;
use crate::space::Space;
use crate::tailmeasure::EmpiricalTailMeasure;
use std::io::{BufRead, BufReader, Read, Write};

const SPACE_PREFIX: &str = "# space = ";

pub fn export_series(path: &SeriesPath, space: &Space, mut w: impl Write) -> Result<()> {
    writeln!(w, "{SPACE_PREFIX}{}", space.descriptor())?;
    let dim = space.dim();
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("c{i}")));
    csv.write_record(&header).map_err(csv_err)?;
    let zeros = vec![0.0; dim];
    for (t, p) in path.points.iter().enumerate() {
        let coords = p.coords().unwrap_or(&zeros);
        let mut rec = vec![t.to_string()];
        rec.extend(coords.iter().map(|c| format!("{c:?}")));
        csv.write_record(&rec).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::ParseError {
        row: 0,
        message: e.to_string(),
    }
}

/// Read a series file. When `expected` is given, the file's descriptor (if
/// any) and column count must match it; otherwise the descriptor line is
/// required.
pub fn ingest_series(r: impl Read, expected: Option<&Space>) -> Result<(SeriesPath, Space)> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (space, header_line) = if let Some(desc) = first.trim_end().strip_prefix(SPACE_PREFIX) {
        let file_space = Space::from_descriptor(desc)?;
        if let Some(exp) = expected {
            if exp.kind != file_space.kind {
                return Err(Error::ShapeMismatch(format!(
                    "file was written for {} but {} was requested",
                    file_space.descriptor(),
                    exp.descriptor()
                )));
            }
        }
        (expected.cloned().unwrap_or(file_space), None)
    } else {
        match expected {
            Some(exp) => (exp.clone(), Some(first.clone())),
            None => {
                return Err(Error::ConfigError(
                    "file has no space descriptor line; pass the space explicitly".into(),
                ))
            }
        }
    };

    let dim = space.dim();
    let mut points = Vec::new();
    let mut row_no = 0usize;

    let handle_line = |line: &str, row_no: &mut usize, points: &mut Vec<Point>| -> Result<()> {
        let line = line.trim_end();
        if line.is_empty() {
            return Ok(());
        }
        *row_no += 1;
        if *row_no == 1 {
            // header row
            let cols = line.split(',').count();
            if cols != dim + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "file has {} data columns, space {} needs {dim}",
                    cols - 1,
                    space.descriptor()
                )));
            }
            return Ok(());
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::ShapeMismatch(format!(
                "row {} has {} data columns, space needs {dim}",
                *row_no - 1,
                fields.len() - 1
            )));
        }
        let mut coords = Vec::with_capacity(dim);
        for f in &fields[1..] {
            let v: f64 = f.trim().parse().map_err(|e| Error::ParseError {
                row: *row_no - 1,
                message: format!("bad number '{f}': {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseError {
                    row: *row_no - 1,
                    message: format!("non-finite value {v}"),
                });
            }
            coords.push(v);
        }
        points.push(Point::dense(coords));
        Ok(())
    };

    if let Some(h) = header_line {
        handle_line(&h, &mut row_no, &mut points)?;
    }
    for line in reader.lines() {
        let line = line?;
        handle_line(&line, &mut row_no, &mut points)?;
    }
    if points.is_empty() {
        return Err(Error::InsufficientData(
            "series file has no data rows".into(),
        ));
    }
    Ok((
        SeriesPath {
            points,
            seed: StreamSeed::raw(0, 0),
            burn_in: 0,
        },
        space,
    ))
}

/// Atoms as flattened window coordinates plus the weight. The scalar metadata
/// goes in a JSON sidecar, see [`measure_sidecar_json`].
pub fn export_measure_atoms(
    meas: &EmpiricalTailMeasure,
    space: &Space,
    w: impl Write,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let dim = space.dim();
    let mut header = Vec::new();
    for t in -(meas.m as i64)..=(meas.m as i64) {
        for i in 0..dim {
            header.push(format!("x{t}_c{i}"));
        }
    }
    header.push("weight".into());
    csv.write_record(&header).map_err(csv_err)?;
    let zeros = vec![0.0; dim];
    for (win, wt) in &meas.atoms {
        let mut rec = Vec::with_capacity(header.len());
        for (_, p) in win.iter_indexed() {
            let coords = p.coords().unwrap_or(&zeros);
            rec.extend(coords.iter().map(|c| format!("{c:?}")));
        }
        rec.push(format!("{wt:?}"));
        csv.write_record(&rec).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn measure_sidecar_json(meas: &EmpiricalTailMeasure) -> String {
    serde_json::json!({
        "m": meas.m,
        "u": meas.threshold,
        "normalizer": meas.normalizer,
        "count": meas.anchor_count,
        "exceedances": meas.exceed_count,
        "atom_floor": meas.atom_floor,
    })
    .to_string()
}

/// Spectral draws as flattened window coordinates, one row per exceedance.
pub fn export_spectral_draws(
    emp: &crate::estimate::EmpiricalSpectral,
    space: &Space,
    w: impl Write,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let dim = space.dim();
    let mut header = Vec::new();
    for t in -(emp.m as i64)..=(emp.m as i64) {
        for i in 0..dim {
            header.push(format!("x{t}_c{i}"));
        }
    }
    csv.write_record(&header).map_err(csv_err)?;
    let zeros = vec![0.0; dim];
    for win in &emp.draws {
        let mut rec = Vec::with_capacity(header.len());
        for (_, p) in win.iter_indexed() {
            let coords = p.coords().unwrap_or(&zeros);
            rec.extend(coords.iter().map(|c| format!("{c:?}")));
        }
        csv.write_record(&rec).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn export_extremogram(curve: &ExtremogramCurve, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["lag", "value", "se"]).map_err(csv_err)?;
    for i in 0..curve.lags.len() {
        csv.write_record(&[
            curve.lags[i].to_string(),
            format!("{:?}", curve.values[i]),
            format!("{:?}", curve.se[i]),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, ModelSpec};
    use crate::rng::{StreamId, StreamSeed};

    #[test]
    fn series_round_trip_is_bit_identical() {
        let m = ModelSpec::new(
            ModelKind::IidPareto { alpha: 1.5 },
            Space::euclidean(2, 2.0),
        );
        let path = m
            .simulate(200, StreamSeed::named(3, StreamId::Model))
            .unwrap();
        let mut buf = Vec::new();
        export_series(&path, &m.space, &mut buf).unwrap();
        let (back, space) = ingest_series(buf.as_slice(), None).unwrap();
        assert_eq!(space.kind, m.space.kind);
        assert_eq!(back.points, path.points);
    }

    #[test]
    fn nan_row_is_a_parse_error_with_row_number() {
        let text = "# space = {\"kind\":\"euclidean\",\"dim\":1,\"p\":2.0}\nt,c0\n0,1.0\n1,NaN\n";
        let err = ingest_series(text.as_bytes(), None);
        match err {
            Err(Error::ParseError { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_shape_mismatch() {
        let text = "t,c0,c1,c2\n0,1.0,2.0,3.0\n";
        let err = ingest_series(text.as_bytes(), Some(&Space::euclidean(2, 2.0)));
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn descriptor_mismatch_is_rejected() {
        let text = "# space = {\"kind\":\"euclidean\",\"dim\":1,\"p\":2.0}\nt,c0\n0,1.0\n";
        let err = ingest_series(text.as_bytes(), Some(&Space::euclidean(2, 2.0)));
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }
}
