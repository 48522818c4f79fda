//! Shared serialization helpers.
//!
//! Every float written by this crate uses 17 significant digits, which is
//! enough for an exact `f64` round trip.

use std::io::Write;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON formatter that writes floats via [`fmt_f64`].
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Deserializes JSON, reporting failures with the path of the offending field.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Json(inner)
        } else {
            Error::Schema {
                path,
                message: inner.to_string(),
            }
        }
    })
}

/// Dense row-major tensor with explicit shape, as stored in parameter files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorRecord {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    pub fn from_vector(v: &[f64]) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn into_matrix(self) -> Result<DMatrix<f64>> {
        let [rows, cols] = self.shape[..] else {
            return Err(Error::shape(format!(
                "expected a rank-2 tensor, got shape {:?}",
                self.shape
            )));
        };
        self.check_len(rows * cols)?;
        Ok(DMatrix::from_row_slice(rows, cols, &self.data))
    }

    pub fn into_vector(self) -> Result<Vec<f64>> {
        let [n] = self.shape[..] else {
            return Err(Error::shape(format!(
                "expected a rank-1 tensor, got shape {:?}",
                self.shape
            )));
        };
        self.check_len(n)?;
        Ok(self.data)
    }

    fn check_len(&self, expected: usize) -> Result<()> {
        if self.data.len() != expected {
            return Err(Error::shape(format!(
                "tensor of shape {:?} holds {} values",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }
}

/// Row-major nested lists to a dense matrix; every row must have `cols` entries.
pub fn matrix_from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::shape(format!(
            "row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-3.0), "-3.0000000000000000e0");
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1.7976931348623157e308,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn json_floats_round_trip_bitwise() {
        let vals = vec![0.1, -0.0, 1e-320, 123456.789, std::f64::consts::PI];
        let text = to_json_string(&vals).unwrap();
        let back: Vec<f64> = from_json_str(&text).unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn tensor_record_shapes() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rec = TensorRecord::from_matrix(&m);
        assert_eq!(rec.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(rec.clone().into_matrix().unwrap(), m);
        assert!(rec.clone().into_vector().is_err());
        let bad = TensorRecord {
            shape: vec![2, 2],
            data: vec![1.0],
        };
        assert!(bad.into_matrix().is_err());
    }
}
