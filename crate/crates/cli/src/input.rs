//! Line-oriented coefficient and sample files.
//!
//! One value per line, `#` starts a comment, blank lines are skipped. A
//! coefficient containing `.`, `e` or `E` is a real number and gets quantized;
//! anything else is an integer taken verbatim. Samples are integers only.

use dafir::numerics::{parse_decimal, quantize_coefficient, CoefficientSet, FixedFormat, Sample};

use crate::Failure;

/// Non-empty lines with their 1-based line numbers, comments stripped.
fn values(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

pub struct ParsedCoefficients {
    pub set: CoefficientSet,
    pub warnings: Vec<String>,
}

pub fn parse_coefficients(
    text: &str,
    source: &str,
    format: FixedFormat,
) -> Result<ParsedCoefficients, Failure> {
    let mut taps = Vec::new();
    let mut warnings = Vec::new();
    for (line, token) in values(text) {
        let at = |msg: String| Failure::Usage(format!("{source}:{line}: {msg}"));
        if token.contains(['.', 'e', 'E']) {
            let real = parse_decimal(token).map_err(|e| at(e.to_string()))?;
            let q = quantize_coefficient(&real, format);
            if q.saturated {
                warnings.push(format!(
                    "{source}:{line}: {token} saturates to {} at {} bits",
                    q.coefficient.value(),
                    format.width()
                ));
            }
            taps.push(q.coefficient.value());
        } else {
            let value: i64 = token
                .parse()
                .map_err(|_| at(format!("cannot parse {token:?} as a coefficient")))?;
            if !format.contains(value as i128) {
                return Err(at(format!(
                    "coefficient {value} out of range for {} bits",
                    format.width()
                )));
            }
            taps.push(value);
        }
    }
    let set =
        CoefficientSet::new(taps, format).map_err(|e| Failure::Usage(format!("{source}: {e}")))?;
    Ok(ParsedCoefficients { set, warnings })
}

pub fn parse_samples(
    text: &str,
    source: &str,
    format: FixedFormat,
) -> Result<Vec<Sample>, Failure> {
    values(text)
        .map(|(line, token)| {
            let value: i64 = token.parse().map_err(|_| {
                Failure::Usage(format!(
                    "{source}:{line}: cannot parse {token:?} as an integer sample"
                ))
            })?;
            Sample::new(value, format).map_err(|_| {
                Failure::Usage(format!(
                    "{source}:{line}: sample {value} out of range for {}-bit input",
                    format.width()
                ))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(w: u32) -> FixedFormat {
        FixedFormat::new(w).unwrap()
    }

    #[test]
    fn mixed_coefficient_file() {
        let text = "# taps\n0.5\n-3   # raw\n\n1.5\n1e-1\n";
        let p = parse_coefficients(text, "c.txt", f(16)).unwrap();
        assert_eq!(p.set.values(), &[16384, -3, 32767, 3277]);
        assert_eq!(
            p.warnings,
            vec!["c.txt:5: 1.5 saturates to 32767 at 16 bits".to_string()]
        );
    }

    #[test]
    fn coefficient_errors_carry_line_numbers() {
        let err = parse_coefficients("1\nabc\n", "c.txt", f(8)).err().unwrap();
        assert_eq!(
            err.to_string(),
            "c.txt:2: cannot parse \"abc\" as a coefficient"
        );
        let err = parse_coefficients("1\n2\n128\n", "c.txt", f(8))
            .err()
            .unwrap();
        assert_eq!(
            err.to_string(),
            "c.txt:3: coefficient 128 out of range for 8 bits"
        );
        assert!(parse_coefficients("# nothing\n", "c.txt", f(8)).is_err());
    }

    #[test]
    fn sample_errors_carry_line_numbers() {
        let s = parse_samples("9\n-3\n", "s.txt", f(8)).unwrap();
        assert_eq!(s.iter().map(|s| s.value()).collect::<Vec<_>>(), vec![9, -3]);
        let err = parse_samples("1\n\n8\n", "s.txt", f(4)).err().unwrap();
        assert_eq!(
            err.to_string(),
            "s.txt:3: sample 8 out of range for 4-bit input"
        );
        let err = parse_samples("0.5\n", "s.txt", f(4)).err().unwrap();
        assert!(err.to_string().starts_with("s.txt:1:"));
    }
}
