use std::path::Path;

use super::{AppearanceError, ContourMap, Keypoint};

fn pgm_err(msg: impl Into<String>) -> AppearanceError {
    AppearanceError::Pgm(msg.into())
}

/// Parses a P2 (ASCII) or P5 (binary) graymap; nonzero pixels are contour.
pub fn parse_pgm(bytes: &[u8]) -> Result<ContourMap, AppearanceError> {
    let mut pos = 0;
    let mut token = || -> Result<String, AppearanceError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(pgm_err("unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |t: String| t.parse::<usize>().map_err(|e| pgm_err(format!("bad header value {t:?}: {e}")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(pgm_err(format!("maxval {maxval} out of range")));
    }
    let count = width * height;
    let pixels = match magic.as_str() {
        "P2" => {
            let mut px = Vec::with_capacity(count);
            for _ in 0..count {
                px.push(num(token()?)? != 0);
            }
            px
        }
        "P5" => {
            let data = bytes.get(pos + 1..).unwrap_or(&[]);
            let bpp = if maxval < 256 { 1 } else { 2 };
            if data.len() < count * bpp {
                return Err(pgm_err(format!("expected {} data bytes, found {}", count * bpp, data.len())));
            }
            data.chunks(bpp).take(count).map(|ch| ch.iter().any(|b| *b != 0)).collect()
        }
        other => return Err(pgm_err(format!("unsupported magic {other:?}"))),
    };
    ContourMap::new(width, height, pixels)
}

pub fn read_pgm(path: &Path) -> Result<ContourMap, AppearanceError> {
    let bytes = std::fs::read(path).map_err(|e| AppearanceError::Io(format!("{}: {e}", path.display())))?;
    parse_pgm(&bytes)
}

/// Writes a P2 graymap with contour pixels at 255.
pub fn write_pgm(map: &ContourMap) -> String {
    let mut out = format!("P2\n{} {}\n255\n", map.width(), map.height());
    for r in 0..map.height() {
        let row: Vec<&str> = (0..map.width()).map(|c| if map.get(r, c) { "255" } else { "0" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses `id,x,y` rows with a header line.
pub fn parse_keypoints_csv(text: &str) -> Result<Vec<Keypoint>, AppearanceError> {
    let kerr = |m: String| AppearanceError::Keypoints(m);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| kerr(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| kerr(format!("missing column {name:?}")));
    let (ci, cx, cy) = (col("id")?, col("x")?, col("y")?);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| kerr(e.to_string()))?;
        let field = |c: usize| rec.get(c).ok_or_else(|| kerr(format!("row {} is short", line + 2)));
        let id = field(ci)?.parse::<usize>().map_err(|e| kerr(format!("row {}: {e}", line + 2)))?;
        let x = field(cx)?.parse::<f64>().map_err(|e| kerr(format!("row {}: {e}", line + 2)))?;
        let y = field(cy)?.parse::<f64>().map_err(|e| kerr(format!("row {}: {e}", line + 2)))?;
        out.push(Keypoint::new(id, x, y));
    }
    Ok(out)
}

pub fn read_keypoints(path: &Path) -> Result<Vec<Keypoint>, AppearanceError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppearanceError::Io(format!("{}: {e}", path.display())))?;
    parse_keypoints_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_binary_agree() {
        let ascii = b"P2\n# comment\n3 2\n255\n0 255 0\n0 0 7\n";
        let mut binary = b"P5\n3 2\n255\n".to_vec();
        binary.extend_from_slice(&[0, 255, 0, 0, 0, 7]);
        let a = parse_pgm(ascii).unwrap();
        let b = parse_pgm(&binary).unwrap();
        assert_eq!(a, b);
        assert!(a.get(0, 1) && a.get(1, 2) && !a.get(0, 0));
        assert_eq!(parse_pgm(write_pgm(&a).as_bytes()).unwrap(), a);
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(parse_pgm(b"P3\n1 1\n255\n0\n").is_err());
    }

    #[test]
    fn keypoint_csv() {
        let pts = parse_keypoints_csv("id,x,y\n0, 3.0, 4\n1,5,6.5\n").unwrap();
        assert_eq!(pts, vec![Keypoint::new(0, 3.0, 4.0), Keypoint::new(1, 5.0, 6.5)]);
        assert!(parse_keypoints_csv("id,x\n0,1\n").is_err());
    }
}
