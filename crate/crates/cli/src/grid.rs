use dynbatch::Error;

/// Parses a load grid: either a comma list (`0.1,0.5,0.9`) or an inclusive
/// range `start:stop:step`. An empty or blank string is an empty grid.
///
/// Range points are rounded to 12 decimals so `0.1:0.9:0.1` yields `0.3`
/// rather than `0.30000000000000004`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Domain(format!("range grid must be start:stop:step, got {text:?}")));
        }
        let [start, stop, step] = [parts[0], parts[1], parts[2]].map(number);
        let (start, stop, step) = (start?, stop?, step?);
        if !(step > 0.0) || stop < start {
            return Err(Error::Domain(format!("range grid {text:?} needs step > 0 and stop >= start")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| round12(start + i as f64 * step)).collect());
    }
    text.split(',').map(number).collect()
}

fn number(s: &str) -> Result<f64, Error> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Domain(format!("grid value {s:?} is not a finite number")))
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(parse_grid("0.1, 0.5,0.9").unwrap(), vec![0.1, 0.5, 0.9]);
        assert_eq!(
            parse_grid("0.1:0.9:0.1").unwrap(),
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        );
        assert_eq!(parse_grid("0.5:0.5:0.1").unwrap(), vec![0.5]);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("  ").unwrap().is_empty());
    }

    #[test]
    fn malformed() {
        assert!(parse_grid("0.1,x").is_err());
        assert!(parse_grid("0.1:0.9").is_err());
        assert!(parse_grid("0.9:0.1:0.1").is_err());
        assert!(parse_grid("0.1:0.9:0").is_err());
        assert!(parse_grid("0.1,inf").is_err());
    }
}
