//! Binary (P5) PGM encoding of frames.

use crate::model::Frame;

/// Canonical P5 blob: `P5\n<w> <h>\n255\n` followed by the pixel rows.
pub fn write_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.pixels);
    out
}

/// Parses a P5 blob. Accepts `#` comments and arbitrary whitespace in the
/// header; requires maxval 255. The timestamp is supplied by the caller
/// (PGM has no time field).
pub fn read_pgm(data: &[u8], t: u64) -> Result<Frame, String> {
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err("not a P5 PGM".into());
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comment lines.
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && data[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("missing header field".into());
        }
        *field = std::str::from_utf8(&data[start..pos])
            .map_err(|_| "non-utf8 header")?
            .parse::<usize>()
            .map_err(|e| format!("bad header number: {}", e))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {}", maxval));
    }
    // Single whitespace byte separates the header from the raster.
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err("missing raster separator".into());
    }
    pos += 1;
    let need = width * height;
    if data.len() - pos != need {
        return Err(format!("raster length {} != {}", data.len() - pos, need));
    }
    Frame::new(t, width, height, data[pos..].to_vec()).ok_or_else(|| "zero dimension".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let f = Frame::new(7, 5, 4, (0..20u8).collect()).unwrap();
        let blob = write_pgm(&f);
        let back = read_pgm(&blob, 7).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn comments_and_whitespace_accepted() {
        let mut blob = b"P5\n# a comment\n 3\t2\n# another\n255\n".to_vec();
        blob.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let f = read_pgm(&blob, 0).unwrap();
        assert_eq!((f.width, f.height), (3, 2));
        assert_eq!(f.pixels, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn defects_rejected() {
        assert!(read_pgm(b"P6\n1 1\n255\nx", 0).is_err());
        assert!(read_pgm(b"P5\n2 2\n255\nabc", 0).is_err()); // short raster
        assert!(read_pgm(b"P5\n2 2\n65535\nabcd", 0).is_err());
    }
}
