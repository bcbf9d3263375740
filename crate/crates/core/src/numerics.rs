//! Fixed-point formats, coefficient quantization and the direct-form reference.
//!
//! Samples and coefficients are signed two's-complement integers. A coefficient
//! of width `W` read as a fraction is `value / 2^(W-1)` (the Q1.(W-1)
//! convention); samples are kept in the integer-scaled domain throughout, so
//! the filters here produce `sum(A_k * x_k)` exactly, never a rounded fraction.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::{Error, Result};

pub const MIN_WIDTH: u32 = 2;
pub const MAX_WIDTH: u32 = 64;

/// Widest accumulator the exact datapath carries (`i128`).
pub const MAX_ACCUMULATOR_WIDTH: u32 = 128;

/// Largest decimal exponent accepted by [`parse_decimal`].
const MAX_DECIMAL_EXPONENT: i64 = 4096;

/// `ceil(log2(n))`, with `ceil_log2(0) == ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Word width of a signed two's-complement quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    width: u32,
}

impl FixedFormat {
    pub fn new(width: u32) -> Result<Self> {
        if !(MIN_WIDTH..=MAX_WIDTH).contains(&width) {
            return Err(Error::InvalidWidth {
                width,
                min: MIN_WIDTH,
                max: MAX_WIDTH,
            });
        }
        Ok(Self { width })
    }

    pub fn width(self) -> u32 {
        self.width
    }

    /// Always true: every word in this crate is two's complement.
    pub fn is_signed(self) -> bool {
        true
    }

    pub fn min_value(self) -> i64 {
        if self.width == 64 {
            i64::MIN
        } else {
            -(1i64 << (self.width - 1))
        }
    }

    pub fn max_value(self) -> i64 {
        if self.width == 64 {
            i64::MAX
        } else {
            (1i64 << (self.width - 1)) - 1
        }
    }

    pub fn contains(self, value: i128) -> bool {
        value >= self.min_value() as i128 && value <= self.max_value() as i128
    }

    fn check(self, value: i128) -> Result<i64> {
        if self.contains(value) {
            Ok(value as i64)
        } else {
            Err(Error::OutOfRange {
                value,
                width: self.width,
            })
        }
    }

    /// `2^(width-1)`, the fractional scale of a Q1.(width-1) word.
    pub fn scale(self) -> BigInt {
        BigInt::one() << (self.width - 1)
    }
}

/// One filter tap, `A_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Coefficient {
    value: i64,
    format: FixedFormat,
}

impl Coefficient {
    pub fn new(value: i64, format: FixedFormat) -> Result<Self> {
        let value = format.check(value as i128)?;
        Ok(Self { value, format })
    }

    pub fn value(self) -> i64 {
        self.value
    }

    pub fn format(self) -> FixedFormat {
        self.format
    }
}

/// One input sample `x_k`, an L-bit two's-complement integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sample {
    value: i64,
    format: FixedFormat,
}

impl Sample {
    pub fn new(value: i64, format: FixedFormat) -> Result<Self> {
        let value = format.check(value as i128)?;
        Ok(Self { value, format })
    }

    pub fn value(self) -> i64 {
        self.value
    }

    pub fn format(self) -> FixedFormat {
        self.format
    }
}

/// Builds a sample stream from raw integers, rejecting anything out of range.
pub fn samples_from_values(values: &[i64], format: FixedFormat) -> Result<Vec<Sample>> {
    values.iter().map(|&v| Sample::new(v, format)).collect()
}

/// The K taps of a filter, all sharing one format. Tap 0 multiplies the
/// newest sample.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoefficientSet {
    taps: Vec<i64>,
    format: FixedFormat,
}

impl CoefficientSet {
    pub fn new(values: Vec<i64>, format: FixedFormat) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyCoefficients);
        }
        for &v in &values {
            format.check(v as i128)?;
        }
        Ok(Self {
            taps: values,
            format,
        })
    }

    pub fn from_coefficients(coeffs: &[Coefficient]) -> Result<Self> {
        let first = coeffs.first().ok_or(Error::EmptyCoefficients)?;
        let format = first.format();
        for (index, c) in coeffs.iter().enumerate() {
            if c.format() != format {
                return Err(Error::FormatMismatch {
                    index,
                    expected: format.width(),
                    found: c.format().width(),
                });
            }
        }
        Ok(Self {
            taps: coeffs.iter().map(|c| c.value()).collect(),
            format,
        })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn format(&self) -> FixedFormat {
        self.format
    }

    pub fn values(&self) -> &[i64] {
        &self.taps
    }

    pub fn get(&self, index: usize) -> Option<Coefficient> {
        self.taps.get(index).map(|&value| Coefficient {
            value,
            format: self.format,
        })
    }

    /// Tap value, or zero for indices past the end (synthetic padding taps).
    pub fn value_or_pad(&self, index: usize) -> i64 {
        self.taps.get(index).copied().unwrap_or(0)
    }
}

/// Accumulator that refuses to wrap: `|value| < 2^(width-1)` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WideAccumulator {
    value: i128,
    width: u32,
}

impl WideAccumulator {
    pub fn new(width: u32) -> Result<Self> {
        if !(2..=MAX_ACCUMULATOR_WIDTH).contains(&width) {
            return Err(Error::InvalidWidth {
                width,
                min: 2,
                max: MAX_ACCUMULATOR_WIDTH,
            });
        }
        Ok(Self { value: 0, width })
    }

    pub fn value(&self) -> i128 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    fn fits(&self, v: i128) -> bool {
        v.unsigned_abs() < 1u128 << (self.width - 1)
    }

    pub fn add(&mut self, delta: i128) -> Result<i128> {
        let next = self
            .value
            .checked_add(delta)
            .filter(|&v| self.fits(v))
            .ok_or(Error::AccumulatorOverflow { width: self.width })?;
        self.value = next;
        Ok(next)
    }

    pub fn sub(&mut self, delta: i128) -> Result<i128> {
        let next = self
            .value
            .checked_sub(delta)
            .filter(|&v| self.fits(v))
            .ok_or(Error::AccumulatorOverflow { width: self.width })?;
        self.value = next;
        Ok(next)
    }

    pub fn reset(&mut self) {
        self.value = 0;
    }
}

/// Safe accumulator width for a K-tap inner product of W-bit coefficients and
/// L-bit samples: `W + L + ceil(log2 K)`.
///
/// The largest magnitude is `K * 2^(W-1) * 2^(L-1)`, reached when every tap and
/// sample sits at its negative extreme; that positive value needs the full
/// `W + L - 1 + ceil(log2 K)` magnitude bits plus a sign bit.
pub fn required_accumulator_width(taps: usize, coeff_width: u32, input_width: u32) -> u32 {
    coeff_width + input_width + ceil_log2(taps.max(1))
}

/// Result of [`quantize_coefficient`]; `saturated` reports clamping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quantized {
    pub coefficient: Coefficient,
    pub saturated: bool,
}

/// Rounds `real * 2^(W-1)` to the nearest integer (ties to even) and
/// saturates to the format range.
pub fn quantize_coefficient(real: &BigRational, format: FixedFormat) -> Quantized {
    let scaled = real * BigRational::from_integer(format.scale());
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut rounded = floor.to_integer();
    if frac > half || (frac == half && rounded.is_odd()) {
        rounded += 1;
    }
    let (lo, hi) = (
        BigInt::from(format.min_value()),
        BigInt::from(format.max_value()),
    );
    let (value, saturated) = if rounded < lo {
        (lo, true)
    } else if rounded > hi {
        (hi, true)
    } else {
        (rounded, false)
    };
    let value = value.to_i64().expect("clamped to an i64 range");
    Quantized {
        coefficient: Coefficient { value, format },
        saturated,
    }
}

/// Exact fractional value `value / 2^(W-1)` of a coefficient.
pub fn dequantize(coefficient: Coefficient) -> BigRational {
    BigRational::new(
        BigInt::from(coefficient.value()),
        coefficient.format().scale(),
    )
}

/// Parses decimal text (`-0.25`, `3`, `1.5e-3`) into an exact rational.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let err = |reason| Error::Parse {
        text: text.to_string(),
        reason,
    };
    let s = text.trim();
    let (negative, s) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], Some(&s[pos + 1..])),
        None => (s, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(err("unexpected character"));
    }
    let mut exp10: i64 = match exponent {
        Some(e) => e.parse().map_err(|_| err("malformed exponent"))?,
        None => 0,
    };
    if exp10.abs() > MAX_DECIMAL_EXPONENT {
        return Err(err("exponent too large"));
    }
    exp10 -= frac_part.len() as i64;
    let digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = digits.parse().map_err(|_| err("no digits"))?;
    if negative {
        numer = -numer;
    }
    let pow = num_traits::pow(BigInt::from(10), exp10.unsigned_abs() as usize);
    Ok(if exp10 >= 0 {
        BigRational::from_integer(numer * pow)
    } else {
        BigRational::new(numer, pow)
    })
}

/// Exact rational for a binary float; every finite `f64` is a dyadic rational.
pub fn rational_from_f64(value: f64) -> Option<BigRational> {
    BigRational::from_float(value)
}

/// Direct-form FIR evaluator, `y(n) = sum_i A_i * x(n - i)`, with a zeroed
/// delay line. This is the golden reference for every DA path.
#[derive(Clone, Debug)]
pub struct DirectFir {
    coeffs: CoefficientSet,
    input: FixedFormat,
    delay: VecDeque<i64>,
}

impl DirectFir {
    pub fn new(coeffs: CoefficientSet, input: FixedFormat) -> Result<Self> {
        let needed =
            required_accumulator_width(coeffs.len(), coeffs.format().width(), input.width());
        if needed > MAX_ACCUMULATOR_WIDTH {
            return Err(Error::AccumulatorTooWide {
                needed,
                limit: MAX_ACCUMULATOR_WIDTH,
            });
        }
        let delay = VecDeque::from(vec![0; coeffs.len()]);
        Ok(Self {
            coeffs,
            input,
            delay,
        })
    }

    pub fn input_format(&self) -> FixedFormat {
        self.input
    }

    pub fn push(&mut self, sample: Sample) -> Result<i128> {
        if sample.format() != self.input {
            return Err(Error::FormatMismatch {
                index: 0,
                expected: self.input.width(),
                found: sample.format().width(),
            });
        }
        self.delay.pop_back();
        self.delay.push_front(sample.value());
        // Bounded by required_accumulator_width <= 128, checked in `new`.
        Ok(self
            .coeffs
            .values()
            .iter()
            .zip(&self.delay)
            .map(|(&a, &x)| a as i128 * x as i128)
            .sum())
    }

    pub fn reset(&mut self) {
        self.delay.iter_mut().for_each(|x| *x = 0);
    }
}

/// Filters a whole stream with [`DirectFir`]. The input format is taken from
/// the first sample; every other sample must match it.
pub fn direct_fir(samples: &[Sample], coeffs: &CoefficientSet) -> Result<Vec<i128>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let mut fir = DirectFir::new(coeffs.clone(), first.format())?;
    samples
        .iter()
        .enumerate()
        .map(|(index, &s)| {
            fir.push(s).map_err(|e| match e {
                Error::FormatMismatch {
                    expected, found, ..
                } => Error::FormatMismatch {
                    index,
                    expected,
                    found,
                },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn fmt(w: u32) -> FixedFormat {
        FixedFormat::new(w).unwrap()
    }

    fn q(text: &str, w: u32) -> Quantized {
        quantize_coefficient(&parse_decimal(text).unwrap(), fmt(w))
    }

    /// Nearest integer by exhaustive distance comparison over a window of
    /// candidates, ties broken toward the even candidate.
    fn nearest_even_oracle(x: &BigRational) -> BigInt {
        let base = x.floor().to_integer();
        let mut best: Option<(BigRational, BigInt)> = None;
        for d in -1..=2 {
            let cand = &base + BigInt::from(d);
            let dist = (x - BigRational::from_integer(cand.clone())).abs();
            best = match best {
                None => Some((dist, cand)),
                Some((bd, bc)) => {
                    if dist < bd || (dist == bd && cand.is_even()) {
                        Some((dist, cand))
                    } else {
                        Some((bd, bc))
                    }
                }
            };
        }
        best.unwrap().1
    }

    #[test]
    fn format_range() {
        assert_eq!(fmt(2).min_value(), -2);
        assert_eq!(fmt(2).max_value(), 1);
        assert_eq!(fmt(16).min_value(), -32768);
        assert_eq!(fmt(16).max_value(), 32767);
        assert_eq!(fmt(64).min_value(), i64::MIN);
        assert_eq!(fmt(64).max_value(), i64::MAX);
        assert!(FixedFormat::new(1).is_err());
        assert!(FixedFormat::new(65).is_err());
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(q("0.0", 16).coefficient.value(), 0);
        let neg_one = q("-1.0", 16);
        assert_eq!(neg_one.coefficient.value(), -32768);
        assert!(!neg_one.saturated);

        let x = parse_decimal("0.4999999").unwrap();
        let expected = nearest_even_oracle(&(&x * BigRational::from_integer(BigInt::from(128))));
        assert_eq!(expected, BigInt::from(64));
        assert_eq!(q("0.4999999", 8).coefficient.value(), 64);
    }

    #[test]
    fn quantize_saturates() {
        let r = q("1.5", 16);
        assert_eq!(r.coefficient.value(), 32767);
        assert!(r.saturated);
        let r = q("-3", 8);
        assert_eq!(r.coefficient.value(), -128);
        assert!(r.saturated);
        // (2^15 - 0.5) / 2^15 is a tie between 32767 and 32768; even wins and clamps.
        let edge = BigRational::new(BigInt::from(65535), BigInt::from(65536));
        let r = quantize_coefficient(&edge, fmt(16));
        assert_eq!(r.coefficient.value(), 32767);
        assert!(r.saturated);
    }

    #[test]
    fn quantize_ties_to_even() {
        // 2.5 / 128 -> 2.5 -> 2 ; 3.5 / 128 -> 4
        assert_eq!(q("0.01953125", 8).coefficient.value(), 2);
        assert_eq!(q("0.02734375", 8).coefficient.value(), 4);
        assert_eq!(q("-0.01953125", 8).coefficient.value(), -2);
    }

    #[test]
    fn parse_decimal_grammar() {
        let r = |s| parse_decimal(s).unwrap();
        assert_eq!(r("3"), BigRational::from_integer(3.into()));
        assert_eq!(r("-0.25"), BigRational::new((-1).into(), 4.into()));
        assert_eq!(r("1.5e-3"), BigRational::new(3.into(), 2000.into()));
        assert_eq!(r("2E2"), BigRational::from_integer(200.into()));
        assert_eq!(r(".5"), BigRational::new(1.into(), 2.into()));
        for bad in ["", "-", ".", "1.2.3", "abc", "1e", "1e99999", "0x10"] {
            assert!(parse_decimal(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn direct_fir_examples() {
        let f8 = fmt(8);
        let run = |c: Vec<i64>, s: &[i64]| {
            let coeffs = CoefficientSet::new(c, f8).unwrap();
            direct_fir(&samples_from_values(s, f8).unwrap(), &coeffs).unwrap()
        };
        assert_eq!(run(vec![1, 0, 0], &[5, 7, 9]), vec![5, 7, 9]);
        assert_eq!(run(vec![1, 1], &[1, 2, 3]), vec![1, 3, 5]);
        // y0 = -3*4, y1 = -3*-1 + 2*4, y2 = -3*7 + 2*-1 + 5*4
        assert_eq!(run(vec![-3, 2, 5], &[4, -1, 7]), vec![-12, 11, -3]);
    }

    #[test]
    fn direct_fir_rejects_mixed_formats() {
        let coeffs = CoefficientSet::new(vec![1, 2], fmt(8)).unwrap();
        let samples = [
            Sample::new(1, fmt(8)).unwrap(),
            Sample::new(1, fmt(4)).unwrap(),
        ];
        assert_eq!(
            direct_fir(&samples, &coeffs),
            Err(Error::FormatMismatch {
                index: 1,
                expected: 8,
                found: 4
            })
        );
    }

    /// Largest |sum A_k x_k| over every representable operand, by enumeration.
    fn brute_max_magnitude(taps: usize, w: u32, l: u32) -> i128 {
        let (fw, fl) = (fmt(w), fmt(l));
        let prods: Vec<i128> = (fw.min_value()..=fw.max_value())
            .flat_map(|a| (fl.min_value()..=fl.max_value()).map(move |x| a as i128 * x as i128))
            .collect();
        let (lo, hi) = (*prods.iter().min().unwrap(), *prods.iter().max().unwrap());
        // Independent taps: extremes add.
        (lo * taps as i128).abs().max((hi * taps as i128).abs())
    }

    #[test]
    fn accumulator_width_examples() {
        assert_eq!(required_accumulator_width(1, 2, 2), 4);
        assert_eq!(required_accumulator_width(8, 16, 16), 35);
        assert_eq!(required_accumulator_width(2, 4, 4), 9);
        // (-2)*(-2) = 4 needs 4 signed bits
        assert_eq!(brute_max_magnitude(1, 2, 2), 4);
    }

    #[test]
    fn accumulator_width_sound_on_small_cases() {
        for taps in 1..=2 {
            for w in 2..=4 {
                for l in 2..=4 {
                    let width = required_accumulator_width(taps, w, l);
                    let max = brute_max_magnitude(taps, w, l);
                    assert!(max < 1i128 << (width - 1), "K={taps} W={w} L={l}");
                }
            }
        }
    }

    #[test]
    fn one_bit_short_overflows_only_at_negative_corner() {
        // Eight taps of 16-bit coefficients on 16-bit samples: the all-minimum
        // corner reaches +2^33, which a 34-bit signed word cannot hold.
        let corner = 8 * (-32768i128) * (-32768i128);
        assert_eq!(corner, 1 << 33);
        assert!(corner > (1i128 << 33) - 1);
        let mut acc = WideAccumulator::new(34).unwrap();
        assert!(acc.add(corner).is_err());
        let mut acc = WideAccumulator::new(35).unwrap();
        assert_eq!(acc.add(corner), Ok(corner));
    }

    #[test]
    fn wide_accumulator_bounds() {
        let mut acc = WideAccumulator::new(4).unwrap();
        assert_eq!(acc.add(7), Ok(7));
        assert_eq!(acc.add(1), Err(Error::AccumulatorOverflow { width: 4 }));
        assert_eq!(acc.value(), 7);
        assert_eq!(acc.sub(14), Ok(-7));
        assert!(acc.sub(1).is_err());
        let mut wide = WideAccumulator::new(128).unwrap();
        assert!(wide.add(i128::MAX).is_ok());
        assert!(wide.add(1).is_err());
    }

    #[test]
    fn ceil_log2_values() {
        let got: Vec<u32> = [1, 2, 3, 4, 5, 8, 9, 34]
            .iter()
            .map(|&n| ceil_log2(n))
            .collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4, 6]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantize_dequantize_idempotent(w in 2u32..=64, raw in any::<i64>()) {
                let f = fmt(w);
                let v = raw.clamp(f.min_value(), f.max_value());
                let c = Coefficient::new(v, f).unwrap();
                let back = quantize_coefficient(&dequantize(c), f);
                prop_assert_eq!(back.coefficient, c);
                prop_assert!(!back.saturated);
            }

            #[test]
            fn quantize_stays_in_range(w in 2u32..=32, num in any::<i64>(), den in 1i64..1_000_000) {
                let f = fmt(w);
                let x = BigRational::new(num.into(), den.into());
                let r = quantize_coefficient(&x, f);
                prop_assert!(f.contains(r.coefficient.value() as i128));
                let sat_hi = BigRational::new(
                    f.scale() * 2 - 1,
                    f.scale() * 2,
                );
                if x >= sat_hi {
                    prop_assert_eq!(r.coefficient.value(), f.max_value());
                }
                if !r.saturated {
                    let scaled = &x * BigRational::from_integer(f.scale());
                    prop_assert_eq!(BigInt::from(r.coefficient.value()), nearest_even_oracle(&scaled));
                }
            }

            #[test]
            fn direct_fir_is_linear(
                taps in proptest::collection::vec(-128i64..128, 1..6),
                x in proptest::collection::vec(-64i64..64, 1..40),
                a in -3i64..=3,
                b in -3i64..=3,
            ) {
                let f8 = fmt(8);
                let f16 = fmt(16);
                let z: Vec<i64> = x.iter().map(|v| (v * 7 + 3) % 61).collect();
                let coeffs = CoefficientSet::new(taps, f8).unwrap();
                let mix: Vec<i64> = x.iter().zip(&z).map(|(p, q)| a * p + b * q).collect();
                let y = |s: &[i64]| direct_fir(&samples_from_values(s, f16).unwrap(), &coeffs).unwrap();
                let (yx, yz, ym) = (y(&x), y(&z), y(&mix));
                for i in 0..x.len() {
                    prop_assert_eq!(ym[i], a as i128 * yx[i] + b as i128 * yz[i]);
                }
            }
        }
    }
}
