//! Bit-level adder models with a unit-gate cost model.
//!
//! Every adder here computes its result from individual generate, propagate
//! and carry signals rather than with a native `+`, so the value path is the
//! one the cost model prices. Costs are declared constants (see
//! [`CostModel`]); they stand in for synthesized area and delay and are only
//! meaningful relative to one another.
//!
//! The carry-lookahead adder is a standard block CLA: 4-bit lookahead units at
//! the bottom and further 4-wide lookahead units stacked across blocks until a
//! single group remains.

use serde::{Deserialize, Serialize};

use crate::numerics::ceil_log2;
use crate::{Error, Result};

pub const MAX_BITS: u32 = 128;

/// Width of one carry-lookahead unit.
const LOOKAHEAD_RADIX: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdderKind {
    #[serde(rename = "ripple")]
    Ripple,
    #[serde(rename = "csa", alias = "csa_tree")]
    CsaTree,
    #[serde(rename = "cla")]
    Cla,
}

impl AdderKind {
    pub const ALL: [AdderKind; 3] = [AdderKind::Ripple, AdderKind::CsaTree, AdderKind::Cla];

    pub fn name(self) -> &'static str {
        match self {
            AdderKind::Ripple => "ripple",
            AdderKind::CsaTree => "csa",
            AdderKind::Cla => "cla",
        }
    }
}

impl std::fmt::Display for AdderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AdderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ripple" => Ok(AdderKind::Ripple),
            "csa" | "csa_tree" => Ok(AdderKind::CsaTree),
            "cla" => Ok(AdderKind::Cla),
            other => Err(format!("unknown adder kind `{other}` (ripple, csa, cla)")),
        }
    }
}

/// Unit-gate area and critical-path depth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCost {
    pub gate_count: u64,
    pub depth: u64,
}

impl GateCost {
    pub const ZERO: GateCost = GateCost {
        gate_count: 0,
        depth: 0,
    };

    pub const fn new(gate_count: u64, depth: u64) -> Self {
        Self { gate_count, depth }
    }

    /// `self` feeding `next`: areas add, delays add.
    pub fn then(self, next: GateCost) -> GateCost {
        GateCost::new(self.gate_count + next.gate_count, self.depth + next.depth)
    }

    /// Side by side: areas add, the slower path wins.
    pub fn beside(self, other: GateCost) -> GateCost {
        GateCost::new(
            self.gate_count + other.gate_count,
            self.depth.max(other.depth),
        )
    }

    /// `n` parallel copies.
    pub fn replicate(self, n: u64) -> GateCost {
        if n == 0 {
            GateCost::ZERO
        } else {
            GateCost::new(self.gate_count * n, self.depth)
        }
    }

    /// Model area-delay product, `gate_count * depth`.
    pub fn area_delay(self) -> u128 {
        self.gate_count as u128 * self.depth as u128
    }
}

/// Cost constants for every primitive the models are built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// One full adder (ripple stage or 3:2 compressor bit).
    pub full_adder: GateCost,
    /// Per-bit generate/propagate logic of a CLA.
    pub cla_generate_propagate: GateCost,
    /// One 4-wide lookahead unit, at any level of the CLA hierarchy.
    pub cla_lookahead_unit: GateCost,
    /// Per-bit sum XOR of a CLA.
    pub cla_sum: GateCost,
    /// Operand gating in the multiplexer partial-product generator.
    pub and_gate: GateCost,
    /// 2:1 multiplexer (table read-out and barrel shifter stages).
    pub mux2: GateCost,
    /// Conditional inversion for the accumulator's subtract cycle.
    pub xor_gate: GateCost,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            full_adder: GateCost::new(5, 2),
            cla_generate_propagate: GateCost::new(3, 1),
            cla_lookahead_unit: GateCost::new(14, 2),
            cla_sum: GateCost::new(1, 1),
            and_gate: GateCost::new(1, 1),
            mux2: GateCost::new(3, 2),
            xor_gate: GateCost::new(1, 1),
        }
    }
}

impl CostModel {
    pub fn ripple(&self, width: u32) -> GateCost {
        GateCost::new(
            self.full_adder.gate_count * width as u64,
            self.full_adder.depth * width as u64,
        )
    }

    /// Lookahead units per level above the bit level, bottom first.
    fn lookahead_levels(width: u32) -> Vec<u64> {
        let mut levels = Vec::new();
        let mut n = (width as usize).div_ceil(LOOKAHEAD_RADIX);
        levels.push(n as u64);
        while n > 1 {
            n = n.div_ceil(LOOKAHEAD_RADIX);
            levels.push(n as u64);
        }
        levels
    }

    pub fn cla(&self, width: u32) -> GateCost {
        if width == 0 {
            return GateCost::ZERO;
        }
        let levels = Self::lookahead_levels(width);
        let units: u64 = levels.iter().sum();
        let w = width as u64;
        GateCost::new(
            self.cla_generate_propagate.gate_count * w
                + self.cla_lookahead_unit.gate_count * units
                + self.cla_sum.gate_count * w,
            self.cla_generate_propagate.depth
                + self.cla_lookahead_unit.depth * levels.len() as u64
                + self.cla_sum.depth,
        )
    }

    pub fn two_input_adder(&self, width: u32, kind: AdderKind) -> GateCost {
        match kind {
            AdderKind::Ripple => self.ripple(width),
            AdderKind::Cla | AdderKind::CsaTree => self.cla(width),
        }
    }

    /// Number of 3:2 compressors in each reduction layer, `n` operands down to two.
    fn csa_layers(mut n: usize) -> Vec<usize> {
        let mut layers = Vec::new();
        while n > 2 {
            let groups = n / 3;
            layers.push(groups);
            n = 2 * groups + n % 3;
        }
        layers
    }

    pub fn csa_compress(&self, operands: usize, width: u32) -> GateCost {
        Self::csa_layers(operands)
            .into_iter()
            .map(|groups| {
                self.full_adder
                    .replicate(width as u64)
                    .replicate(groups as u64)
            })
            .fold(GateCost::ZERO, GateCost::then)
    }

    /// Cost of [`adder_tree_sum`] over `count` operands that are `width` bits wide.
    pub fn adder_tree(&self, count: usize, width: u32, kind: AdderKind) -> GateCost {
        if count <= 1 {
            return GateCost::ZERO;
        }
        let out = width + ceil_log2(count);
        match kind {
            AdderKind::CsaTree => {
                let compress = if count >= 3 {
                    self.csa_compress(count, out)
                } else {
                    GateCost::ZERO
                };
                compress.then(self.cla(out))
            }
            AdderKind::Ripple | AdderKind::Cla => {
                let adder = self.two_input_adder(out, kind);
                // Track each live node's arrival depth through the balanced reduction.
                let mut nodes = vec![0u64; count];
                let mut gates = 0u64;
                while nodes.len() > 1 {
                    let mut next = Vec::with_capacity(nodes.len().div_ceil(2));
                    for pair in nodes.chunks(2) {
                        match pair {
                            [a, b] => {
                                gates += adder.gate_count;
                                next.push(*a.max(b) + adder.depth);
                            }
                            [a] => next.push(*a),
                            _ => unreachable!(),
                        }
                    }
                    nodes = next;
                }
                GateCost::new(gates, nodes[0])
            }
        }
    }
}

/// Two's-complement word of 1 to 128 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: u32,
    bits: u128,
}

fn mask(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl BitVector {
    fn check_width(width: u32) -> Result<()> {
        if !(1..=MAX_BITS).contains(&width) {
            return Err(Error::InvalidWidth {
                width,
                min: 1,
                max: MAX_BITS,
            });
        }
        Ok(())
    }

    /// Encodes `value`, which must be representable in `width` signed bits.
    pub fn from_i128(value: i128, width: u32) -> Result<Self> {
        Self::check_width(width)?;
        let fits = width == 128 || {
            let half = 1i128 << (width - 1);
            (-half..half).contains(&value)
        };
        if !fits {
            return Err(Error::OutOfRange { value, width });
        }
        Ok(Self::wrapping(value, width))
    }

    /// Keeps the low `width` bits of `value`.
    pub fn wrapping(value: i128, width: u32) -> Self {
        Self {
            width,
            bits: value as u128 & mask(width),
        }
    }

    pub fn from_raw(bits: u128, width: u32) -> Result<Self> {
        Self::check_width(width)?;
        Ok(Self {
            width,
            bits: bits & mask(width),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn raw(&self) -> u128 {
        self.bits
    }

    pub fn bit(&self, index: u32) -> bool {
        index < self.width && (self.bits >> index) & 1 == 1
    }

    pub fn to_i128(&self) -> i128 {
        let shift = 128 - self.width;
        ((self.bits << shift) as i128) >> shift
    }

    /// Sign-extends to a wider word.
    pub fn extend(&self, width: u32) -> Result<Self> {
        Self::check_width(width)?;
        if width < self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: width,
            });
        }
        Ok(Self::wrapping(self.to_i128(), width))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddResult {
    pub sum: BitVector,
    pub carry_out: bool,
    pub cost: GateCost,
}

fn same_width(a: &BitVector, b: &BitVector) -> Result<u32> {
    if a.width != b.width {
        return Err(Error::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    Ok(a.width)
}

fn ripple_value(a: u128, b: u128, carry_in: bool, width: u32) -> (u128, bool) {
    let mut carry = carry_in as u128;
    let mut sum = 0u128;
    for i in 0..width {
        let (x, y) = ((a >> i) & 1, (b >> i) & 1);
        let half = x ^ y;
        sum |= (half ^ carry) << i;
        carry = (x & y) | (half & carry);
    }
    (sum, carry == 1)
}

/// Ripple-carry addition modulo `2^width`, one full adder per bit.
pub fn ripple_add(
    a: &BitVector,
    b: &BitVector,
    carry_in: bool,
    model: &CostModel,
) -> Result<AddResult> {
    let width = same_width(a, b)?;
    let (bits, carry_out) = ripple_value(a.bits, b.bits, carry_in, width);
    Ok(AddResult {
        sum: BitVector { width, bits },
        carry_out,
        cost: model.ripple(width),
    })
}

/// One lookahead unit over up to four (generate, propagate) pairs, packed as
/// the low bits of `g` and `p`. Returns the carry into each position and the
/// unit's group generate/propagate.
fn lookahead_unit(g: u128, p: u128, n: usize, carry_in: bool) -> (u128, bool, bool) {
    let bit = |x: u128, i: usize| (x >> i) & 1 == 1;
    let mut carries = carry_in as u128;
    for i in 0..n {
        // c(i+1) = g(i) | p(i)g(i-1) | ... | p(i)..p(0)c(0), as a flat sum of products.
        let mut c = false;
        for j in 0..=i {
            c |= bit(g, j) && (j + 1..=i).all(|k| bit(p, k));
        }
        c |= carry_in && (0..=i).all(|k| bit(p, k));
        if i + 1 < n {
            carries |= (c as u128) << (i + 1);
        }
    }
    let group_g = (0..n).any(|j| bit(g, j) && (j + 1..n).all(|k| bit(p, k)));
    let group_p = (0..n).all(|k| bit(p, k));
    (carries, group_g, group_p)
}

/// Carry into every one of `n` positions through a tree of lookahead units.
fn lookahead_carries(g: u128, p: u128, n: usize, carry_in: bool) -> (u128, bool, bool) {
    if n <= LOOKAHEAD_RADIX {
        return lookahead_unit(g, p, n, carry_in);
    }
    let groups = n.div_ceil(LOOKAHEAD_RADIX);
    let chunk = |x: u128, c: usize| (x >> (c * LOOKAHEAD_RADIX)) & 0xF;
    let chunk_len = |c: usize| LOOKAHEAD_RADIX.min(n - c * LOOKAHEAD_RADIX);
    let (mut big_g, mut big_p) = (0u128, 0u128);
    for c in 0..groups {
        let (_, gg, gp) = lookahead_unit(chunk(g, c), chunk(p, c), chunk_len(c), false);
        big_g |= (gg as u128) << c;
        big_p |= (gp as u128) << c;
    }
    let (group_carries, total_g, total_p) = lookahead_carries(big_g, big_p, groups, carry_in);
    let mut carries = 0u128;
    for c in 0..groups {
        let cin = (group_carries >> c) & 1 == 1;
        let (local, _, _) = lookahead_unit(chunk(g, c), chunk(p, c), chunk_len(c), cin);
        carries |= local << (c * LOOKAHEAD_RADIX);
    }
    (carries, total_g, total_p)
}

fn cla_value(a: u128, b: u128, carry_in: bool, width: u32) -> (u128, bool) {
    let generate = a & b;
    let propagate = a ^ b;
    let (carries, group_g, group_p) =
        lookahead_carries(generate, propagate, width as usize, carry_in);
    let sum = (propagate ^ carries) & mask(width);
    (sum, group_g || (group_p && carry_in))
}

/// Block carry-lookahead addition modulo `2^width`.
pub fn cla_add(
    a: &BitVector,
    b: &BitVector,
    carry_in: bool,
    model: &CostModel,
) -> Result<AddResult> {
    let width = same_width(a, b)?;
    let (bits, carry_out) = cla_value(a.bits, b.bits, carry_in, width);
    Ok(AddResult {
        sum: BitVector { width, bits },
        carry_out,
        cost: model.cla(width),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Compressed {
    pub sum: BitVector,
    pub carry: BitVector,
    pub cost: GateCost,
}

fn compress_values(mut words: Vec<u128>, width: u32) -> (u128, u128) {
    let m = mask(width);
    while words.len() > 2 {
        let mut next = Vec::with_capacity(words.len());
        let mut rest = words.chunks_exact(3);
        for t in &mut rest {
            let (a, b, c) = (t[0], t[1], t[2]);
            next.push(a ^ b ^ c);
            next.push((((a & b) | (a & c) | (b & c)) << 1) & m);
        }
        next.extend_from_slice(rest.remainder());
        words = next;
    }
    (words[0], words[1])
}

/// Carry-save reduction: 3:2 compressor layers until two words remain, whose
/// sum equals the operands' sum modulo `2^width`.
pub fn csa_compress(operands: &[BitVector], model: &CostModel) -> Result<Compressed> {
    if operands.len() < 3 {
        return Err(Error::TooFewOperands {
            needed: 3,
            got: operands.len(),
        });
    }
    let width = operands[0].width;
    for op in &operands[1..] {
        same_width(&operands[0], op)?;
    }
    let (s, c) = compress_values(operands.iter().map(|o| o.bits).collect(), width);
    Ok(Compressed {
        sum: BitVector { width, bits: s },
        carry: BitVector { width, bits: c },
        cost: model.csa_compress(operands.len(), width),
    })
}

/// Output width of an adder tree: widest operand plus `ceil(log2 count)`.
pub fn tree_output_width(count: usize, operand_width: u32) -> u32 {
    operand_width + ceil_log2(count)
}

/// Value half of [`adder_tree_sum`], without pricing.
pub fn adder_tree_value(operands: &[BitVector], kind: AdderKind) -> Result<i128> {
    let first = operands
        .first()
        .ok_or(Error::TooFewOperands { needed: 1, got: 0 })?;
    if operands.len() == 1 {
        return Ok(first.to_i128());
    }
    let in_width = operands.iter().map(|o| o.width).max().unwrap_or(1);
    let width = tree_output_width(operands.len(), in_width);
    if width > MAX_BITS {
        return Err(Error::InvalidWidth {
            width,
            min: 1,
            max: MAX_BITS,
        });
    }
    let m = mask(width);
    let mut words: Vec<u128> = operands.iter().map(|o| o.to_i128() as u128 & m).collect();
    let bits = match kind {
        AdderKind::CsaTree => {
            if words.len() >= 3 {
                let (s, c) = compress_values(words, width);
                words = vec![s, c];
            }
            cla_value(words[0], words[1], false, width).0
        }
        AdderKind::Ripple | AdderKind::Cla => {
            while words.len() > 1 {
                words = words
                    .chunks(2)
                    .map(|pair| match *pair {
                        [a, b] if kind == AdderKind::Ripple => ripple_value(a, b, false, width).0,
                        [a, b] => cla_value(a, b, false, width).0,
                        [a] => a,
                        _ => unreachable!(),
                    })
                    .collect();
            }
            words[0]
        }
    };
    Ok(BitVector { width, bits }.to_i128())
}

/// Sums operands through a tree of the given kind. The tree is wide enough
/// that nothing wraps, so the total is the exact sum whatever the kind; only
/// the cost differs.
pub fn adder_tree_sum(
    operands: &[BitVector],
    kind: AdderKind,
    model: &CostModel,
) -> Result<(i128, GateCost)> {
    let total = adder_tree_value(operands, kind)?;
    let in_width = operands.iter().map(|o| o.width).max().unwrap_or(1);
    Ok((total, model.adder_tree(operands.len(), in_width, kind)))
}
