use crate::{Envelope, EnvelopeRole, Error, Result, TimeGrid, C64};

/// Complex samples from a two-column `re,im` CSV.
///
/// A first row that does not parse as numbers is taken as a header. `#`
/// lines are comments. Errors carry the 1-based line number.
pub fn parse_mode_csv(text: &str) -> Result<Vec<C64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::ConfigLine {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: format!("mode CSV: {e}"),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        let is_first = std::mem::replace(&mut first, false);
        let values = match parsed {
            Some(v) => v,
            None if is_first => continue,
            None => {
                return Err(Error::ConfigLine { line, message: "mode CSV: expected two numbers".into() });
            }
        };
        if values.len() != 2 {
            return Err(Error::ConfigLine {
                line,
                message: format!("mode CSV: expected 2 columns (re, im), found {}", values.len()),
            });
        }
        if !values.iter().all(|x| x.is_finite()) {
            return Err(Error::ConfigLine { line, message: "mode CSV: non-finite sample".into() });
        }
        samples.push(C64::new(values[0], values[1]));
    }
    Ok(samples)
}

/// Samples spread uniformly over `[0, duration]`, linearly resampled onto
/// `grid` and normalized.
pub fn mode_from_samples(samples: &[C64], duration: f64, grid: TimeGrid, role: EnvelopeRole) -> Result<Envelope> {
    if samples.len() < 2 {
        return Err(Error::Config(format!(
            "mode CSV needs at least 2 samples, found {}",
            samples.len()
        )));
    }
    let source = TimeGrid::span(duration, samples.len())?;
    Envelope::new(source, samples.to_vec(), role)?
        .resampled(grid)
        .normalized()
        .map_err(|_| Error::Config("mode CSV has zero norm on the run grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comments_and_values() {
        let text = "re,im\n# leading edge\n0,0\n1, -0.5\n\n0.25,1e-3\n";
        let s = parse_mode_csv(text).unwrap();
        assert_eq!(s, [C64::new(0.0, 0.0), C64::new(1.0, -0.5), C64::new(0.25, 1e-3)]);
    }

    #[test]
    fn headerless() {
        assert_eq!(parse_mode_csv("1,2\n3,4").unwrap().len(), 2);
        assert!(parse_mode_csv("").unwrap().is_empty());
    }

    #[test]
    fn bad_rows_report_lines() {
        assert!(matches!(parse_mode_csv("re,im\n1,2\nx,3\n"), Err(Error::ConfigLine { line: 3, .. })));
        assert!(matches!(parse_mode_csv("1,2,3\n"), Err(Error::ConfigLine { line: 1, .. })));
        assert!(matches!(parse_mode_csv("1\n"), Err(Error::ConfigLine { line: 1, .. })));
        assert!(matches!(parse_mode_csv("1,2\nNaN,0\n"), Err(Error::ConfigLine { line: 2, .. })));
    }

    #[test]
    fn resampling_normalizes() {
        let samples = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let grid = TimeGrid::span(2.0, 2001).unwrap();
        let env = mode_from_samples(&samples, 2.0, grid, EnvelopeRole::InputField).unwrap();
        assert!((env.norm_sq() - 1.0).abs() < 1e-12);
        // triangle of unit height has ∫|E|² = 2/3 before normalization
        let peak = env.values()[1000].re;
        assert!((peak - (1.5f64).sqrt()).abs() < 1e-6, "{peak}");
        assert!(mode_from_samples(&samples[..1], 2.0, grid, EnvelopeRole::InputField).is_err());
        let zeros = [C64::new(0.0, 0.0); 3];
        assert!(mode_from_samples(&zeros, 2.0, grid, EnvelopeRole::InputField).is_err());
    }
}
