use std::fmt::Write as _;
use std::path::Path;

use super::{ErrorBuffer, QuantConstants};
use crate::error::Error;

/// Scores CSV: `#`-prefixed run metadata, then `gaussian_id,delta_se,touch_count`.
pub fn scores_csv(buffer: &ErrorBuffer, consts: &QuantConstants, precision: &str) -> String {
    let mut out = String::new();
    let bg = consts.background;
    let _ = writeln!(out, "# epsilon={}", consts.epsilon);
    let _ = writeln!(out, "# n_max={}", consts.n_max);
    let _ = writeln!(out, "# views={}", buffer.views);
    let _ = writeln!(out, "# background={},{},{}", bg[0], bg[1], bg[2]);
    let _ = writeln!(out, "# sh_degree={}", consts.sh_degree);
    let _ = writeln!(out, "# precision={precision}");
    let _ = writeln!(out, "# capped_pixels={}", buffer.capped_pixels);
    let _ = writeln!(out, "# terminated_pixels={}", buffer.terminated_pixels);
    out.push_str("gaussian_id,delta_se,touch_count\n");
    for (id, (d, t)) in buffer.delta_se.iter().zip(&buffer.touch_count).enumerate() {
        let _ = writeln!(out, "{id},{d:e},{t}");
    }
    out
}

pub fn write_scores(
    buffer: &ErrorBuffer,
    consts: &QuantConstants,
    precision: &str,
    path: impl AsRef<Path>,
) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, scores_csv(buffer, consts, precision)).map_err(|e| Error::io(path, e))
}

/// Reads the `delta_se` and `touch_count` columns back; metadata lines are skipped.
pub fn read_scores(path: impl AsRef<Path>) -> Result<ErrorBuffer, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad scores row at line {line}")),
        )
    };
    let mut buffer = ErrorBuffer::zeros(0);
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("gaussian_id") || line.is_empty() {
            if let Some(v) = line.strip_prefix("# views=") {
                buffer.views = v.parse().map_err(|_| bad(n + 1))?;
            }
            continue;
        }
        let mut cols = line.split(',');
        let id: usize = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(n + 1))?;
        let d: f64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(n + 1))?;
        let t: u64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(n + 1))?;
        if id != buffer.delta_se.len() {
            return Err(bad(n + 1));
        }
        buffer.delta_se.push(d);
        buffer.touch_count.push(t);
    }
    Ok(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut b = ErrorBuffer::zeros(3);
        b.delta_se = vec![0.0, 0.0625, 1.0 / 3.0];
        b.touch_count = vec![0, 4, 9];
        b.views = 2;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores(&b, &QuantConstants::default(), "f32", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# epsilon=0.000000001\n# n_max=64\n# views=2\n"));
        assert!(text.contains("gaussian_id,delta_se,touch_count\n0,0e0,0\n1,6.25e-2,4\n"));
        let back = read_scores(&path).unwrap();
        assert_eq!(back.delta_se, b.delta_se);
        assert_eq!(back.touch_count, b.touch_count);
        assert_eq!(back.views, 2);
    }
}
