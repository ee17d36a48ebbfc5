//! File formats: binary PGM images, headerless CSV matrices, JSON run
//! reports and per-iteration trace CSVs.
//!
//! Numbers that must survive a round trip are written with 17 significant
//! digits (`{:.16e}`), which reproduces every `f64` bit for bit. Report
//! JSON keeps its keys in declaration order and re-serializes to identical
//! bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CsvErrorKind, PgmErrorKind};
use crate::image::ImageBuffer;
use crate::matrix::DenseMatrix;
use crate::nss::PipelineParams;
use crate::solver::{IterationRecord, SolverConfig};
use crate::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Splits raw PGM bytes into header tokens and the payload. Comments (`#`
/// to end of line) and runs of whitespace separate tokens; a single
/// whitespace byte after the last header token starts the payload.
struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> std::result::Result<&'a str, PgmErrorKind> {
        self.skip_separators();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PgmErrorKind::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| PgmErrorKind::MalformedHeader(format!("non-ASCII {what}")))
    }

    /// Consumes the single whitespace byte separating header and payload.
    fn payload(self) -> std::result::Result<&'a [u8], PgmErrorKind> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(PgmErrorKind::MalformedHeader(
                "missing whitespace after maxval".into(),
            )),
        }
    }
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<ImageBuffer, PgmErrorKind> {
    let mut cursor = PgmCursor::new(bytes);
    let magic = cursor.token("magic number")?;
    if magic != "P5" {
        return Err(PgmErrorKind::UnsupportedMagic(magic.to_string()));
    }
    let dimension = |cursor: &mut PgmCursor<'_>, what: &str| {
        let token = cursor.token(what)?;
        match token.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(PgmErrorKind::MalformedHeader(format!(
                "bad {what} '{token}'"
            ))),
        }
    };
    let width = dimension(&mut cursor, "width")?;
    let height = dimension(&mut cursor, "height")?;
    let maxval_token = cursor.token("maxval")?;
    let maxval: u32 = maxval_token
        .parse()
        .map_err(|_| PgmErrorKind::MalformedHeader(format!("bad maxval '{maxval_token}'")))?;
    if maxval != 255 {
        return Err(PgmErrorKind::UnsupportedMaxval(maxval));
    }
    let payload = cursor.payload()?;
    let expected = width * height;
    if payload.len() < expected {
        return Err(PgmErrorKind::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(PgmErrorKind::TrailingBytes(payload.len() - expected));
    }
    let pixels = payload.iter().map(|&b| b as f64).collect();
    Ok(ImageBuffer::from_pixels(width, height, pixels)
        .expect("byte pixels are always in [0, 255]"))
}

fn encode_pgm(image: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    // f64::round is round-half-away-from-zero, the documented quantizer.
    out.extend(
        image
            .pixels()
            .iter()
            .map(|&p| p.round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// Reads a binary (`P5`) 8-bit PGM file. Header comments are accepted and
/// dropped; the maxval must be 255.
pub fn read_pgm(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    parse_pgm(&bytes).map_err(|kind| Error::Pgm {
        path: path.to_path_buf(),
        kind,
    })
}

/// Writes a binary (`P5`) 8-bit PGM file. Pixels are rounded half away
/// from zero and clamped to [0, 255]; the header is always `P5`, one
/// `width height` line and maxval 255, so reading a file and writing it
/// back normalizes the header and preserves every payload byte.
pub fn write_pgm(image: &ImageBuffer, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(|e| io_err(path, e))
}

/// Reads a headerless CSV of comma-separated numbers into a matrix.
/// Every row must have the same number of fields as the first; fields must
/// parse as finite numbers. Row and column positions in errors are
/// 1-based.
pub fn read_csv_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let csv_err = |kind: CsvErrorKind| Error::Csv {
        path: path.to_path_buf(),
        kind,
    };
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(csv_err(CsvErrorKind::Empty));
    }
    let cols = lines[0].split(',').count();
    let mut data = Vec::with_capacity(lines.len() * cols);
    for (r, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(csv_err(CsvErrorKind::RaggedRow {
                row: r + 1,
                expected: cols,
                actual: fields.len(),
            }));
        }
        for (c, field) in fields.iter().enumerate() {
            let token = field.trim();
            match f64::from_str(token) {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(csv_err(CsvErrorKind::BadNumber {
                        row: r + 1,
                        column: c + 1,
                        token: token.to_string(),
                    }))
                }
            }
        }
    }
    DenseMatrix::from_vec(lines.len(), cols, data)
}

/// Writes a matrix as headerless CSV with 17 significant digits per entry,
/// enough for [`read_csv_matrix`] to reproduce it bit for bit.
pub fn write_csv_matrix(matrix: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in 0..matrix.rows() {
        for (c, value) in matrix.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{value:.16e}").expect("string writes cannot fail");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a solver trace as CSV: header `iteration,residual,mu,psnr`, one
/// row per iteration (1-based). The psnr field is empty when no reference
/// was supplied and the string `inf` for a perfect match.
pub fn write_trace_csv(records: &[IterationRecord], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,residual,mu,psnr\n");
    for (i, record) in records.iter().enumerate() {
        write!(out, "{},{:.16e},{:.16e},", i + 1, record.residual, record.mu)
            .expect("string writes cannot fail");
        match record.psnr {
            None => {}
            Some(v) if v == f64::INFINITY => out.push_str("inf"),
            Some(v) => write!(out, "{v:.16e}").expect("string writes cannot fail"),
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Serializes an optional float that may be infinite: finite values stay
/// JSON numbers, infinities become the strings `"inf"` / `"-inf"`, and a
/// missing value is `null`.
mod json_float {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(value: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            None => serializer.serialize_none(),
            Some(v) if v.is_finite() => v.serialize(serializer),
            Some(v) if *v > 0.0 => "inf".serialize(serializer),
            Some(_) => "-inf".serialize(serializer),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(deserializer)? {
            None => Ok(None),
            Some(Repr::Number(v)) => Ok(Some(v)),
            Some(Repr::Text(s)) => match s.as_str() {
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => Err(D::Error::custom(format!("bad float string '{other}'"))),
            },
        }
    }
}

/// One denoising or decomposition run, as written next to its outputs.
/// Field order is the serialized key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub method: String,
    pub image: String,
    pub noise_level: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    pub pipeline: PipelineParams,
    /// Absent when no reference image was supplied. Infinite when the
    /// restored image equals the reference exactly; serialized as the
    /// string `"inf"` in that case.
    #[serde(with = "json_float")]
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub runtime_seconds: f64,
    /// Path of the per-iteration trace CSV written alongside, if any.
    pub trace_path: Option<String>,
}

/// Writes a report as pretty-printed JSON with a trailing newline.
/// Serialization is deterministic: writing, reading and writing again
/// produces identical bytes.
pub fn write_report(report: &ReportDocument, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
