//! File formats: PGM label snapshots, raw fractional fields, density tables.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PhaseField;

/// Reads a binary PGM (P5, maxval ≤ 255) and checks its dimensions.
pub fn read_pgm(path: &Path, width: usize, height: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let (w, h, data) = parse_pgm(&bytes)?;
    if (w, h) != (width, height) {
        return Err(Error::Format(format!(
            "{}: PGM is {w}x{h}, grid needs {width}x{height}",
            path.display()
        )));
    }
    Ok(data)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("expected P5 magic, got {}", tokens[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header value {s:?}")))
    };
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let data = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    Ok((w, h, data.to_vec()))
}

pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::Format(format!(
            "{} bytes for a {width}x{height} image",
            data.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    fs::write(path, out)?;
    Ok(())
}

/// Snapshot of the majority labels of `field` as a PGM raster.
pub fn write_label_snapshot(path: &Path, field: &PhaseField, width: usize, height: usize) -> Result<()> {
    if field.n_phases() > 256 {
        return Err(Error::Format("more than 256 phases do not fit a byte".into()));
    }
    let labels: Vec<u8> = field.labels().into_iter().map(|l| l as u8).collect();
    write_pgm(path, width, height, &labels)
}

/// Fractional field: header line `MBOF1 P n_vertices`, then `P·n` little-endian
/// f64 values, phase-major, row-major within a phase.
pub fn write_fractional(path: &Path, field: &PhaseField) -> Result<()> {
    let mut out = format!("MBOF1 {} {}\n", field.n_phases(), field.n_vertices()).into_bytes();
    out.reserve(field.values().len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_fractional(path: &Path) -> Result<PhaseField> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "MBOF1" {
        return Err(Error::Format(format!("bad fractional header {header:?}")));
    }
    let p: usize = parts[1]
        .parse()
        .map_err(|_| Error::Format("bad phase count".into()))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Format("bad vertex count".into()))?;
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    if raw.len() != p * n * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            p * n * 8,
            raw.len()
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PhaseField::from_phases(values.chunks(n).map(|c| c.to_vec()).collect())
}

/// Density table: `expected` reals separated by commas, whitespace or newlines.
pub fn read_density_csv(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad density value {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Format(format!(
            "density table has {} values, expected {expected}",
            values.len()
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.pgm");
        write_pgm(&path, 3, 2, &[0, 1, 2, 3, 4, 5]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(read_pgm(&path, 3, 2).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert!(read_pgm(&path, 2, 3).is_err());
    }

    #[test]
    fn pgm_with_comment() {
        let mut b = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        b.extend_from_slice(&[7, 9]);
        assert_eq!(parse_pgm(&b).unwrap(), (2, 1, vec![7, 9]));
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\x00").is_err());
    }

    #[test]
    fn fractional_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let field = PhaseField::from_phases(vec![vec![0.25, 1.0, 0.0], vec![0.75, 0.0, 1.0]]).unwrap();
        write_fractional(&path, &field).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"MBOF1 2 3\n"));
        assert_eq!(bytes.len(), 10 + 6 * 8);
        assert_eq!(read_fractional(&path).unwrap(), field);
    }

    #[test]
    fn density_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.csv");
        fs::write(&path, "1.0,2.0\n3.5\n 4\n").unwrap();
        assert_eq!(read_density_csv(&path, 4).unwrap(), vec![1.0, 2.0, 3.5, 4.0]);
        assert!(read_density_csv(&path, 5).is_err());
    }
}
