//! The `SALMAP` file format: an ASCII header `SALMAP <w> <h>\n` followed by `w * h`
//! little-endian `f32` values in row-major order.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Plane;

const MAGIC: &str = "SALMAP";

pub fn write_salmap(plane: &Plane, mut out: impl Write) -> Result<()> {
    writeln!(out, "{MAGIC} {} {}", plane.width(), plane.height())?;
    let mut buf = Vec::with_capacity(plane.data().len() * 4);
    for v in plane.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn encode_salmap(plane: &Plane) -> Vec<u8> {
    let mut v = Vec::new();
    write_salmap(plane, &mut v).expect("writing to a Vec cannot fail");
    v
}

pub fn read_salmap(mut input: impl BufRead) -> Result<Plane> {
    let mut header = Vec::new();
    input.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::parse("SALMAP header", "not ASCII"))?;
    let fields: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
    let (w, h) = match fields.as_slice() {
        [MAGIC, w, h] => (
            w.parse::<usize>()
                .map_err(|e| Error::parse("SALMAP width", e.to_string()))?,
            h.parse::<usize>()
                .map_err(|e| Error::parse("SALMAP height", e.to_string()))?,
        ),
        _ => return Err(Error::parse("SALMAP header", format!("unexpected {header:?}"))),
    };
    let mut bytes = vec![0u8; w * h * 4];
    input
        .read_exact(&mut bytes)
        .map_err(|_| Error::parse("SALMAP body", format!("expected {} floats", w * h)))?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::parse("SALMAP body", "trailing bytes"));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Plane::from_vec(w, h, data)
}

pub fn save_salmap(plane: &Plane, path: &Path) -> Result<()> {
    crate::fsutil::write_atomic(path, &encode_salmap(plane))
}

pub fn load_salmap(path: &Path) -> Result<Plane> {
    read_salmap(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_layout() {
        let p = Plane::from_vec(2, 1, vec![0.25, 1.0]).unwrap();
        let bytes = encode_salmap(&p);
        assert_eq!(&bytes[..11], b"SALMAP 2 1\n");
        assert_eq!(&bytes[11..15], &0.25f32.to_le_bytes());
        assert_eq!(bytes.len(), 11 + 8);
        assert_eq!(read_salmap(&bytes[..]).unwrap(), p);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_salmap(&b"SALMAP 2 2\n\0\0\0\0"[..]).is_err());
        assert!(read_salmap(&b"SALMAX 1 1\n\0\0\0\0"[..]).is_err());
        assert!(read_salmap(&b"SALMAP 1 1\n\0\0\0\0\0"[..]).is_err());
    }
}
