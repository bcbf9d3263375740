//! Distributed-arithmetic inner products.
//!
//! The K taps are split into P groups of M (the last group padded with zero
//! taps). Each group owns a table of `2^M` coefficient subset sums, addressed
//! by one bit position of its M samples. An inner product takes L cycles, one
//! per sample bit: at cycle `n` every group produces a partial product, the
//! adder tree sums them, and the sum is shifted left by `n` and added to the
//! accumulator. The MSB cycle subtracts instead, which is the two's-complement
//! sign weight of the top bit. The result is `sum(A_k * x_k)` exactly.
//!
//! Partial products come either from stored tables ([`PpgMode::StoredLut`]) or
//! are formed on the fly by gating each coefficient with its address bit and
//! summing ([`PpgMode::Mux`]); both must agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::adder_models::{adder_tree_value, AdderKind, BitVector};
use crate::numerics::{
    ceil_log2, required_accumulator_width, CoefficientSet, FixedFormat, Sample, WideAccumulator,
    MAX_ACCUMULATOR_WIDTH,
};
use crate::{Error, Result};

/// Default ceiling on taps per group.
pub const MAX_GROUP_SIZE: usize = 16;

/// Hard limit on any caller-supplied group-size ceiling.
pub const GROUP_SIZE_LIMIT: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PpgMode {
    #[serde(rename = "stored")]
    StoredLut,
    #[serde(rename = "mux")]
    Mux,
}

impl PpgMode {
    pub fn name(self) -> &'static str {
        match self {
            PpgMode::StoredLut => "stored",
            PpgMode::Mux => "mux",
        }
    }
}

impl std::fmt::Display for PpgMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PpgMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "stored" | "lut" => Ok(PpgMode::StoredLut),
            "mux" => Ok(PpgMode::Mux),
            other => Err(format!(
                "unknown partial-product mode `{other}` (stored, mux)"
            )),
        }
    }
}

/// Grouping of taps into table address groups.
///
/// Tap indices at or beyond `taps` name synthetic zero-coefficient pad taps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionPlan {
    pub taps: usize,
    pub group_size: usize,
    pub groups: Vec<Vec<usize>>,
    pub padded_taps: usize,
}

impl PartitionPlan {
    pub fn partitions(&self) -> usize {
        self.groups.len()
    }

    pub fn is_pad(&self, tap: usize) -> bool {
        tap >= self.taps
    }
}

pub fn partition_taps(taps: usize, group_size: usize) -> Result<PartitionPlan> {
    partition_taps_capped(taps, group_size, MAX_GROUP_SIZE)
}

/// Consecutive taps in order, `[0..M)`, `[M..2M)`, ..., last group padded.
pub fn partition_taps_capped(taps: usize, group_size: usize, cap: usize) -> Result<PartitionPlan> {
    let cap = cap.min(GROUP_SIZE_LIMIT);
    if group_size == 0 || group_size > cap {
        return Err(Error::GroupSize { group_size, cap });
    }
    if taps == 0 {
        return Err(Error::EmptyCoefficients);
    }
    let partitions = taps.div_ceil(group_size);
    let groups = (0..partitions)
        .map(|g| (g * group_size..(g + 1) * group_size).collect())
        .collect();
    Ok(PartitionPlan {
        taps,
        group_size,
        groups,
        padded_taps: partitions * group_size - taps,
    })
}

/// Total table storage, `P * 2^M` words.
pub fn memory_locations(plan: &PartitionPlan) -> u64 {
    plan.partitions() as u64 * (1u64 << plan.group_size)
}

/// Precomputed subset sums for one group; bit `j` of an address selects
/// group member `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaLut {
    pub group: Vec<usize>,
    pub entries: Vec<i128>,
}

impl DaLut {
    pub fn address_bits(&self) -> usize {
        self.group.len()
    }

    pub fn lookup(&self, address: u32) -> Result<i128> {
        self.entries
            .get(address as usize)
            .copied()
            .ok_or(Error::AddressOutOfRange {
                address,
                bits: self.group.len(),
            })
    }
}

pub fn build_lut(coeffs: &CoefficientSet, group: &[usize]) -> DaLut {
    let size = 1usize << group.len();
    let mut entries = vec![0i128; size];
    // Each address extends the one with its lowest set bit cleared.
    for address in 1..size {
        let low = address.trailing_zeros() as usize;
        entries[address] =
            entries[address & (address - 1)] + coeffs.value_or_pad(group[low]) as i128;
    }
    DaLut {
        group: group.to_vec(),
        entries,
    }
}

/// Partial product formed without a table: each member's coefficient passes
/// through a 2:1 select gated by its address bit and the selections are summed.
pub fn mux_ppg(coeffs: &CoefficientSet, group: &[usize], address: u32) -> Result<i128> {
    if group.len() < 32 && (address as u64) >> group.len() != 0 {
        return Err(Error::AddressOutOfRange {
            address,
            bits: group.len(),
        });
    }
    Ok(group
        .iter()
        .enumerate()
        .map(|(j, &tap)| {
            let select = (address >> j) & 1 == 1;
            if select {
                coeffs.value_or_pad(tap) as i128
            } else {
                0
            }
        })
        .sum())
}

/// The K most recent samples, newest first: position `i` holds `x(n - i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayLine {
    format: FixedFormat,
    values: Vec<i64>,
}

impl DelayLine {
    pub fn new(taps: usize, format: FixedFormat) -> Self {
        Self {
            format,
            values: vec![0; taps],
        }
    }

    /// A window given newest sample first.
    pub fn from_window(values: Vec<i64>, format: FixedFormat) -> Result<Self> {
        for &v in &values {
            if !format.contains(v as i128) {
                return Err(Error::OutOfRange {
                    value: v as i128,
                    width: format.width(),
                });
            }
        }
        Ok(Self { format, values })
    }

    pub fn format(&self) -> FixedFormat {
        self.format
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.format() != self.format {
            return Err(Error::FormatMismatch {
                index: 0,
                expected: self.format.width(),
                found: sample.format().width(),
            });
        }
        if !self.values.is_empty() {
            self.values.rotate_right(1);
            self.values[0] = sample.value();
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0);
    }

    /// Bit `n` of the L-bit two's-complement encoding of tap `tap`'s sample;
    /// pad taps read as zero.
    fn bit(&self, tap: usize, n: u32) -> u32 {
        self.values
            .get(tap)
            .map_or(0, |&v| ((v as u64 >> n) & 1) as u32)
    }
}

/// Per-group table addresses for one bit position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddressWord {
    pub cycle: u32,
    pub addresses: Vec<u32>,
}

pub fn address_for_cycle(
    delay_line: &DelayLine,
    plan: &PartitionPlan,
    n: u32,
) -> Result<AddressWord> {
    let width = delay_line.format().width();
    if n >= width {
        return Err(Error::BitPosition { position: n, width });
    }
    if delay_line.len() != plan.taps {
        return Err(Error::Inconsistent(format!(
            "delay line holds {} samples but the plan covers {} taps",
            delay_line.len(),
            plan.taps
        )));
    }
    Ok(AddressWord {
        cycle: n,
        addresses: plan
            .groups
            .iter()
            .map(|group| {
                group
                    .iter()
                    .enumerate()
                    .fold(0u32, |addr, (j, &tap)| addr | delay_line.bit(tap, n) << j)
            })
            .collect(),
    })
}

/// Accumulator and cycle counter of the bit-serial schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BitSerialState {
    pub acc: WideAccumulator,
    pub cycle: u32,
    pub cycles: u32,
}

impl BitSerialState {
    pub fn new(acc_width: u32, cycles: u32) -> Result<Self> {
        Ok(Self {
            acc: WideAccumulator::new(acc_width)?,
            cycle: 0,
            cycles,
        })
    }

    pub fn is_sign_cycle(&self) -> bool {
        self.cycle + 1 == self.cycles
    }

    /// Folds in one cycle's tree sum; returns (shifted value, subtracted?).
    pub fn step(&mut self, tree_sum: i128) -> Result<(i128, bool)> {
        let width = self.acc.width();
        let shifted = tree_sum
            .checked_mul(1i128 << self.cycle)
            .ok_or(Error::AccumulatorOverflow { width })?;
        let subtract = self.is_sign_cycle();
        if subtract {
            self.acc.sub(shifted)?;
        } else {
            self.acc.add(shifted)?;
        }
        self.cycle += 1;
        Ok((shifted, subtract))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    pub cycle: u32,
    pub addresses: Vec<u32>,
    pub partials: Vec<i128>,
    pub tree_sum: i128,
    pub shift: u32,
    pub subtract: bool,
    pub acc: i128,
}

/// One record per cycle of an inner product.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CycleTrace {
    pub records: Vec<CycleRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum PartialSource {
    Stored(Vec<DaLut>),
    Mux,
}

/// A configured DA datapath: coefficients, partition, partial-product source
/// and adder tree. Evaluating it is pure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaEngine {
    coeffs: CoefficientSet,
    input: FixedFormat,
    plan: PartitionPlan,
    source: PartialSource,
    tree: AdderKind,
    partial_width: u32,
    acc_width: u32,
}

/// Width of one group's partial product, `W + ceil(log2 M)`.
pub fn partial_product_width(coeff_width: u32, group_size: usize) -> u32 {
    coeff_width + ceil_log2(group_size)
}

impl DaEngine {
    pub fn new(
        coeffs: CoefficientSet,
        input: FixedFormat,
        plan: PartitionPlan,
        mode: PpgMode,
        tree: AdderKind,
    ) -> Result<Self> {
        let source = match mode {
            PpgMode::StoredLut => {
                PartialSource::Stored(plan.groups.iter().map(|g| build_lut(&coeffs, g)).collect())
            }
            PpgMode::Mux => PartialSource::Mux,
        };
        Self::assemble(coeffs, input, plan, source, tree)
    }

    /// Uses the given tables as-is instead of deriving them from `coeffs`.
    pub fn with_tables(
        coeffs: CoefficientSet,
        input: FixedFormat,
        plan: PartitionPlan,
        luts: Vec<DaLut>,
        tree: AdderKind,
    ) -> Result<Self> {
        if luts.len() != plan.partitions() {
            return Err(Error::Inconsistent(format!(
                "{} tables for {} groups",
                luts.len(),
                plan.partitions()
            )));
        }
        for (g, (lut, group)) in luts.iter().zip(&plan.groups).enumerate() {
            if &lut.group != group || lut.entries.len() != 1 << group.len() {
                return Err(Error::Inconsistent(format!(
                    "table {g} does not match its group"
                )));
            }
        }
        Self::assemble(coeffs, input, plan, PartialSource::Stored(luts), tree)
    }

    fn assemble(
        coeffs: CoefficientSet,
        input: FixedFormat,
        plan: PartitionPlan,
        source: PartialSource,
        tree: AdderKind,
    ) -> Result<Self> {
        if plan.taps != coeffs.len() {
            return Err(Error::Inconsistent(format!(
                "plan covers {} taps, coefficient set has {}",
                plan.taps,
                coeffs.len()
            )));
        }
        let acc_width =
            required_accumulator_width(coeffs.len(), coeffs.format().width(), input.width());
        if acc_width > MAX_ACCUMULATOR_WIDTH {
            return Err(Error::AccumulatorTooWide {
                needed: acc_width,
                limit: MAX_ACCUMULATOR_WIDTH,
            });
        }
        Ok(Self {
            partial_width: partial_product_width(coeffs.format().width(), plan.group_size),
            coeffs,
            input,
            plan,
            source,
            tree,
            acc_width,
        })
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn input_format(&self) -> FixedFormat {
        self.input
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn tree(&self) -> AdderKind {
        self.tree
    }

    pub fn mode(&self) -> PpgMode {
        match self.source {
            PartialSource::Stored(_) => PpgMode::StoredLut,
            PartialSource::Mux => PpgMode::Mux,
        }
    }

    pub fn tables(&self) -> Option<&[DaLut]> {
        match &self.source {
            PartialSource::Stored(luts) => Some(luts),
            PartialSource::Mux => None,
        }
    }

    pub fn accumulator_width(&self) -> u32 {
        self.acc_width
    }

    pub fn partial_width(&self) -> u32 {
        self.partial_width
    }

    fn partial(&self, group: usize, address: u32) -> Result<i128> {
        match &self.source {
            PartialSource::Stored(luts) => luts[group].lookup(address),
            PartialSource::Mux => mux_ppg(&self.coeffs, &self.plan.groups[group], address),
        }
    }

    fn run(&self, window: &DelayLine, mut trace: Option<&mut CycleTrace>) -> Result<i128> {
        if window.format() != self.input {
            return Err(Error::FormatMismatch {
                index: 0,
                expected: self.input.width(),
                found: window.format().width(),
            });
        }
        let cycles = self.input.width();
        let mut state = BitSerialState::new(self.acc_width, cycles)?;
        let mut operands = Vec::with_capacity(self.plan.partitions());
        let mut partials = Vec::with_capacity(self.plan.partitions());
        for n in 0..cycles {
            let word = address_for_cycle(window, &self.plan, n)?;
            operands.clear();
            partials.clear();
            for (g, &address) in word.addresses.iter().enumerate() {
                let pp = self.partial(g, address)?;
                partials.push(pp);
                operands.push(BitVector::from_i128(pp, self.partial_width)?);
            }
            let tree_sum = adder_tree_value(&operands, self.tree)?;
            let (_, subtract) = state.step(tree_sum)?;
            if let Some(t) = trace.as_deref_mut() {
                t.records.push(CycleRecord {
                    cycle: n,
                    addresses: word.addresses,
                    partials: partials.clone(),
                    tree_sum,
                    shift: n,
                    subtract,
                    acc: state.acc.value(),
                });
            }
        }
        Ok(state.acc.value())
    }

    pub fn inner_product(&self, window: &DelayLine) -> Result<i128> {
        self.run(window, None)
    }

    pub fn inner_product_traced(&self, window: &DelayLine) -> Result<(i128, CycleTrace)> {
        let mut trace = CycleTrace {
            records: Vec::with_capacity(self.input.width() as usize),
        };
        let y = self.run(window, Some(&mut trace))?;
        Ok((y, trace))
    }
}

/// One-shot DA inner product over a delay line, with its cycle trace.
pub fn da_inner_product(
    delay_line: &DelayLine,
    coeffs: &CoefficientSet,
    plan: &PartitionPlan,
    mode: PpgMode,
    tree: AdderKind,
) -> Result<(i128, CycleTrace)> {
    DaEngine::new(
        coeffs.clone(),
        delay_line.format(),
        plan.clone(),
        mode,
        tree,
    )?
    .inner_product_traced(delay_line)
}

/// Streaming DA filter: an engine plus its own delay line.
#[derive(Clone, Debug)]
pub struct DaFilter {
    engine: DaEngine,
    delay: DelayLine,
}

impl DaFilter {
    pub fn new(engine: DaEngine) -> Self {
        let delay = DelayLine::new(engine.coefficients().len(), engine.input_format());
        Self { engine, delay }
    }

    pub fn engine(&self) -> &DaEngine {
        &self.engine
    }

    pub fn push(&mut self, sample: Sample) -> Result<i128> {
        self.delay.push(sample)?;
        self.engine.inner_product(&self.delay)
    }

    pub fn push_traced(&mut self, sample: Sample) -> Result<(i128, CycleTrace)> {
        self.delay.push(sample)?;
        self.engine.inner_product_traced(&self.delay)
    }

    pub fn reset(&mut self) {
        self.delay.clear();
    }
}

fn stream_format(samples: &[Sample]) -> Option<FixedFormat> {
    samples.first().map(|s| s.format())
}

fn with_index(index: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::FormatMismatch {
            expected, found, ..
        } => Error::FormatMismatch {
            index,
            expected,
            found,
        },
        other => other,
    }
}

/// Filters a stream through the DA datapath; output `n` pairs with input `n`.
pub fn da_filter_stream(
    samples: &[Sample],
    coeffs: &CoefficientSet,
    plan: &PartitionPlan,
    mode: PpgMode,
    tree: AdderKind,
) -> Result<Vec<i128>> {
    let Some(format) = stream_format(samples) else {
        return Ok(Vec::new());
    };
    let mut filter = DaFilter::new(DaEngine::new(
        coeffs.clone(),
        format,
        plan.clone(),
        mode,
        tree,
    )?);
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| filter.push(s).map_err(with_index(i)))
        .collect()
}

/// As [`da_filter_stream`], keeping every sample's cycle trace.
pub fn da_filter_stream_traced(
    samples: &[Sample],
    coeffs: &CoefficientSet,
    plan: &PartitionPlan,
    mode: PpgMode,
    tree: AdderKind,
) -> Result<Vec<(i128, CycleTrace)>> {
    let Some(format) = stream_format(samples) else {
        return Ok(Vec::new());
    };
    let mut filter = DaFilter::new(DaEngine::new(
        coeffs.clone(),
        format,
        plan.clone(),
        mode,
        tree,
    )?);
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| filter.push_traced(s).map_err(with_index(i)))
        .collect()
}
