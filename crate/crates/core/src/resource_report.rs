//! Memory, gate-cost and area-delay accounting per architecture.
//!
//! Two kinds of area-delay product are kept apart on purpose: the model ADP
//! (unit gates times unit delays, from [`CostModel`]) and an optional external
//! ADP computed from synthesized cell counts and timing a user supplies.

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};

use crate::adder_models::{AdderKind, CostModel, GateCost};
use crate::da_engine::{
    memory_locations, partial_product_width, partition_taps, DaFilter, PartitionPlan, PpgMode,
};
use crate::design::FilterDesign;
use crate::numerics::{
    ceil_log2, required_accumulator_width, FixedFormat, Sample, MAX_ACCUMULATOR_WIDTH,
};
use crate::{Error, Result};

/// Structural parameters of one DA filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub taps: usize,
    pub coeff_width: u32,
    pub input_width: u32,
    pub group_size: usize,
    pub ppg: PpgMode,
    pub tree: AdderKind,
}

impl ArchConfig {
    pub fn coeff_format(&self) -> Result<FixedFormat> {
        FixedFormat::new(self.coeff_width)
    }

    pub fn input_format(&self) -> Result<FixedFormat> {
        FixedFormat::new(self.input_width)
    }

    pub fn plan(&self) -> Result<PartitionPlan> {
        partition_taps(self.taps, self.group_size)
    }

    pub fn accumulator_width(&self) -> u32 {
        required_accumulator_width(self.taps, self.coeff_width, self.input_width)
    }

    pub fn validate(&self) -> Result<()> {
        self.coeff_format()?;
        self.input_format()?;
        self.plan()?;
        let needed = self.accumulator_width();
        if needed > MAX_ACCUMULATOR_WIDTH {
            return Err(Error::AccumulatorTooWide {
                needed,
                limit: MAX_ACCUMULATOR_WIDTH,
            });
        }
        Ok(())
    }
}

/// Synthesis figures supplied from outside, e.g. a vendor tool's report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExternalMetrics {
    pub cells: u64,
    pub time_ns: Decimal,
    pub power_mw: Option<Decimal>,
}

impl ExternalMetrics {
    pub fn new(cells: u64, time_ns: Decimal, power_mw: Option<Decimal>) -> Result<Self> {
        if time_ns.is_sign_negative() || power_mw.is_some_and(|p| p.is_sign_negative()) {
            return Err(Error::Inconsistent(
                "external time and power must be non-negative".into(),
            ));
        }
        if adp(cells, time_ns).is_none() {
            return Err(Error::Inconsistent(
                "external area-delay product overflows".into(),
            ));
        }
        Ok(Self {
            cells,
            time_ns,
            power_mw,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExternalReport {
    pub cells: u64,
    pub time_ns: Decimal,
    pub power_mw: Option<Decimal>,
    /// `cells * time_ns`, rounded to two decimals.
    pub adp_cell_ns: Decimal,
}

impl From<ExternalMetrics> for ExternalReport {
    fn from(m: ExternalMetrics) -> Self {
        let exact = adp(m.cells, m.time_ns).expect("checked in ExternalMetrics::new");
        Self {
            cells: m.cells,
            time_ns: m.time_ns,
            power_mw: m.power_mw,
            adp_cell_ns: round2(exact),
        }
    }
}

/// Area-delay product in cell-time units, exact decimal arithmetic.
pub fn adp(cells: u64, time: Decimal) -> Option<Decimal> {
    Decimal::from(cells).checked_mul(time)
}

/// Two-decimal rendering used for reported ADP values.
pub fn round2(value: Decimal) -> Decimal {
    let mut v = value.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
    v.rescale(2);
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResourceReport {
    pub config: ArchConfig,
    pub partitions: usize,
    pub padded_taps: usize,
    pub memory_locations: u64,
    pub lut_entry_width: u32,
    pub lut_bits: u64,
    pub partial_product_width: u32,
    pub tree_output_width: u32,
    pub accumulator_width: u32,
    pub ppg_cost: GateCost,
    pub tree_cost: GateCost,
    pub accumulator_cost: GateCost,
    pub total_cost: GateCost,
    pub cycles_per_output: u32,
    /// Model area-delay product, total gate count times total depth.
    pub adp: u128,
    pub external: Option<ExternalReport>,
}

impl ResourceReport {
    pub fn with_external(mut self, external: Option<ExternalMetrics>) -> Self {
        self.external = external.map(ExternalReport::from);
        self
    }
}

/// Partial-product generator cost for all P groups.
fn ppg_cost(config: &ArchConfig, model: &CostModel, entry_width: u32) -> GateCost {
    let m = config.group_size;
    let per_group = match config.ppg {
        // Table read-out: one 2^M:1 mux tree per stored bit.
        PpgMode::StoredLut => GateCost::new(
            model.mux2.gate_count * ((1u64 << m) - 1) * entry_width as u64,
            model.mux2.depth * m as u64,
        ),
        // Coefficient gating followed by an M-operand adder tree.
        PpgMode::Mux => model
            .and_gate
            .replicate(m as u64 * config.coeff_width as u64)
            .then(model.adder_tree(m, config.coeff_width, config.tree)),
    };
    let partitions = config.taps.div_ceil(m) as u64;
    per_group.replicate(partitions)
}

/// Barrel shifter, conditional inversion and the accumulating adder.
fn accumulator_cost(config: &ArchConfig, model: &CostModel, acc_width: u32) -> GateCost {
    let stages = ceil_log2(config.input_width as usize) as u64;
    let shifter = (0..stages)
        .map(|_| model.mux2.replicate(acc_width as u64))
        .fold(GateCost::ZERO, GateCost::then);
    shifter
        .then(model.xor_gate.replicate(acc_width as u64))
        .then(model.two_input_adder(acc_width, config.tree))
}

pub fn estimate_resources(config: &ArchConfig, model: &CostModel) -> Result<ResourceReport> {
    config.validate()?;
    let plan = config.plan()?;
    let entry_width = partial_product_width(config.coeff_width, config.group_size);
    let acc_width = config.accumulator_width();
    let memory = match config.ppg {
        PpgMode::StoredLut => memory_locations(&plan),
        PpgMode::Mux => 0,
    };
    let ppg = ppg_cost(config, model, entry_width);
    let tree = model.adder_tree(plan.partitions(), entry_width, config.tree);
    let acc = accumulator_cost(config, model, acc_width);
    let total = ppg.then(tree).then(acc);
    Ok(ResourceReport {
        config: *config,
        partitions: plan.partitions(),
        padded_taps: plan.padded_taps,
        memory_locations: memory,
        lut_entry_width: entry_width,
        lut_bits: memory * entry_width as u64,
        partial_product_width: entry_width,
        tree_output_width: entry_width + ceil_log2(plan.partitions()),
        accumulator_width: acc_width,
        ppg_cost: ppg,
        tree_cost: tree,
        accumulator_cost: acc,
        total_cost: total,
        cycles_per_output: config.input_width,
        adp: total.area_delay(),
        external: None,
    })
}

/// Percentage change from baseline `a` to candidate `b`, `(a - b) / a`, to one
/// decimal. Positive means the candidate is smaller. `None` when the baseline
/// is zero and the candidate is not.
pub fn percent_delta(a: Decimal, b: Decimal) -> Option<Decimal> {
    if a.is_zero() {
        return b.is_zero().then_some(Decimal::ZERO);
    }
    let ratio = (a - b).checked_div(a)?.checked_mul(Decimal::ONE_HUNDRED)?;
    let mut pct = ratio.round_dp_with_strategy(1, RoundingStrategy::MidpointAwayFromZero);
    pct.rescale(1);
    Some(pct)
}

fn delta_u(a: u128, b: u128) -> Option<Decimal> {
    percent_delta(Decimal::from_u128(a)?, Decimal::from_u128(b)?)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Deltas {
    pub memory_locations: Option<Decimal>,
    pub lut_bits: Option<Decimal>,
    pub ppg_gates: Option<Decimal>,
    pub tree_gates: Option<Decimal>,
    pub accumulator_gates: Option<Decimal>,
    pub total_gates: Option<Decimal>,
    pub total_depth: Option<Decimal>,
    pub adp: Option<Decimal>,
    pub cycles_per_output: Option<Decimal>,
    pub external_cells: Option<Decimal>,
    pub external_time_ns: Option<Decimal>,
    pub external_power_mw: Option<Decimal>,
    pub external_adp: Option<Decimal>,
}

impl Deltas {
    pub fn between(a: &ResourceReport, b: &ResourceReport) -> Self {
        let ext = |f: fn(&ExternalReport) -> Option<Decimal>| match (&a.external, &b.external) {
            (Some(x), Some(y)) => percent_delta(f(x)?, f(y)?),
            _ => None,
        };
        Self {
            memory_locations: delta_u(a.memory_locations as u128, b.memory_locations as u128),
            lut_bits: delta_u(a.lut_bits as u128, b.lut_bits as u128),
            ppg_gates: delta_u(a.ppg_cost.gate_count as u128, b.ppg_cost.gate_count as u128),
            tree_gates: delta_u(
                a.tree_cost.gate_count as u128,
                b.tree_cost.gate_count as u128,
            ),
            accumulator_gates: delta_u(
                a.accumulator_cost.gate_count as u128,
                b.accumulator_cost.gate_count as u128,
            ),
            total_gates: delta_u(
                a.total_cost.gate_count as u128,
                b.total_cost.gate_count as u128,
            ),
            total_depth: delta_u(a.total_cost.depth as u128, b.total_cost.depth as u128),
            adp: delta_u(a.adp, b.adp),
            cycles_per_output: delta_u(a.cycles_per_output as u128, b.cycles_per_output as u128),
            external_cells: ext(|e| Some(Decimal::from(e.cells))),
            external_time_ns: ext(|e| Some(e.time_ns)),
            external_power_mw: ext(|e| e.power_mw),
            external_adp: ext(|e| Some(e.adp_cell_ns)),
        }
    }
}

/// Side-by-side reports; deltas are relative to the baseline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub baseline: ResourceReport,
    pub candidate: ResourceReport,
    pub deltas: Deltas,
    pub outputs_checked: usize,
}

impl Comparison {
    pub fn from_reports(baseline: ResourceReport, candidate: ResourceReport) -> Self {
        let deltas = Deltas::between(&baseline, &candidate);
        Self {
            baseline,
            candidate,
            deltas,
            outputs_checked: 0,
        }
    }
}

/// Compares two designs of the same filter shape. When `inputs` is given both
/// datapaths filter it first and any output disagreement is an error, so a
/// comparison is never reported for filters that compute different things.
pub fn compare_architectures(
    a: &FilterDesign,
    b: &FilterDesign,
    inputs: Option<&[Sample]>,
    model: &CostModel,
    external: (Option<ExternalMetrics>, Option<ExternalMetrics>),
) -> Result<Comparison> {
    let (ca, cb) = (&a.config, &b.config);
    if (ca.taps, ca.coeff_width, ca.input_width) != (cb.taps, cb.coeff_width, cb.input_width) {
        return Err(Error::Inconsistent(format!(
            "cannot compare K={} W={} L={} against K={} W={} L={}",
            ca.taps, ca.coeff_width, ca.input_width, cb.taps, cb.coeff_width, cb.input_width
        )));
    }
    let mut checked = 0;
    if let Some(samples) = inputs {
        let mut fa = DaFilter::new(a.engine()?);
        let mut fb = DaFilter::new(b.engine()?);
        for (index, &s) in samples.iter().enumerate() {
            let (ya, yb) = (fa.push(s)?, fb.push(s)?);
            if ya != yb {
                return Err(Error::OutputMismatch {
                    index,
                    baseline: ya,
                    candidate: yb,
                });
            }
        }
        checked = samples.len();
    }
    let ra = estimate_resources(ca, model)?.with_external(external.0);
    let rb = estimate_resources(cb, model)?.with_external(external.1);
    Ok(Comparison {
        outputs_checked: checked,
        ..Comparison::from_reports(ra, rb)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(taps: usize, m: usize, ppg: PpgMode, tree: AdderKind) -> ArchConfig {
        ArchConfig {
            taps,
            coeff_width: 16,
            input_width: 16,
            group_size: m,
            ppg,
            tree,
        }
    }

    fn dec(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn memory_from_partitioning() {
        let m = CostModel::default();
        let r = estimate_resources(&config(4, 2, PpgMode::StoredLut, AdderKind::Cla), &m).unwrap();
        assert_eq!(r.memory_locations, 8);
        assert_eq!(r.lut_bits, 8 * 17);
        let r = estimate_resources(&config(4, 4, PpgMode::StoredLut, AdderKind::Cla), &m).unwrap();
        assert_eq!(r.memory_locations, 16);
        let r = estimate_resources(&config(8, 2, PpgMode::Mux, AdderKind::Cla), &m).unwrap();
        assert_eq!(r.memory_locations, 0);
        assert_eq!(r.lut_bits, 0);
        assert_eq!(r.cycles_per_output, 16);
        assert_eq!(r.accumulator_width, 35);
    }

    #[test]
    fn adp_values() {
        assert_eq!(
            round2(adp(606, dec("2.375")).unwrap()).to_string(),
            "1439.25"
        );
        assert_eq!(adp(357, dec("2.523")).unwrap(), dec("900.711"));
        assert_eq!(
            round2(adp(357, dec("2.523")).unwrap()).to_string(),
            "900.71"
        );
        assert!(adp(0, dec("123.456")).unwrap().is_zero());
        assert_eq!(round2(adp(0, dec("1.5")).unwrap()).to_string(), "0.00");
        assert_eq!(
            percent_delta(dec("5"), dec("0")).unwrap().to_string(),
            "100.0"
        );
    }

    #[test]
    fn percent_delta_values() {
        assert_eq!(percent_delta(dec("606"), dec("357")), Some(dec("41.1")));
        assert_eq!(percent_delta(dec("2.375"), dec("2.523")), Some(dec("-6.2")));
        assert_eq!(percent_delta(dec("0"), dec("0")), Some(Decimal::ZERO));
        assert_eq!(percent_delta(dec("0"), dec("5")), None);
    }

    #[test]
    fn model_adp_is_gates_times_depth() {
        let m = CostModel::default();
        let r = estimate_resources(&config(8, 2, PpgMode::Mux, AdderKind::Ripple), &m).unwrap();
        assert_eq!(
            r.adp,
            r.total_cost.gate_count as u128 * r.total_cost.depth as u128
        );
        assert_eq!(
            r.total_cost,
            r.ppg_cost.then(r.tree_cost).then(r.accumulator_cost)
        );
    }

    #[test]
    fn stored_memory_shrinks_with_group_size() {
        let m = CostModel::default();
        for k in [4usize, 6, 8, 12, 16] {
            let mut previous = u64::MAX;
            for g in (2..=k).rev().filter(|g| k % g == 0) {
                let r = estimate_resources(&config(k, g, PpgMode::StoredLut, AdderKind::Cla), &m)
                    .unwrap();
                assert!(r.memory_locations < previous, "K={k} M={g}");
                previous = r.memory_locations;
            }
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let m = CostModel::default();
        let c = config(8, 2, PpgMode::Mux, AdderKind::Cla);
        let a = serde_json::to_string(&estimate_resources(&c, &m).unwrap()).unwrap();
        let b = serde_json::to_string(&estimate_resources(&c, &m).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let m = CostModel::default();
        let r = estimate_resources(&config(8, 2, PpgMode::StoredLut, AdderKind::Cla), &m).unwrap();
        let cmp = Comparison::from_reports(r.clone(), r);
        let d = cmp.deltas;
        for v in [
            d.memory_locations,
            d.lut_bits,
            d.total_gates,
            d.total_depth,
            d.adp,
        ] {
            assert_eq!(v, Some(Decimal::ZERO));
        }
        assert_eq!(d.external_cells, None);
    }

    #[test]
    fn external_cells_delta() {
        let m = CostModel::default();
        let r = estimate_resources(&config(8, 2, PpgMode::StoredLut, AdderKind::Cla), &m).unwrap();
        let a = r.clone().with_external(Some(
            ExternalMetrics::new(606, dec("2.375"), Some(dec("387"))).unwrap(),
        ));
        let b = r.with_external(Some(
            ExternalMetrics::new(357, dec("2.523"), Some(dec("379"))).unwrap(),
        ));
        let d = Comparison::from_reports(a, b).deltas;
        assert_eq!(d.external_cells, Some(dec("41.1")));
        assert_eq!(d.external_time_ns, Some(dec("-6.2")));
        assert_eq!(d.external_power_mw, Some(dec("2.1")));
        // 1439.25 vs 900.71
        assert_eq!(d.external_adp, Some(dec("37.4")));
    }

    #[test]
    fn external_metrics_reject_negative() {
        assert!(ExternalMetrics::new(1, dec("-1"), None).is_err());
        assert!(ExternalMetrics::new(1, dec("1"), Some(dec("-0.5"))).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let m = CostModel::default();
        let mut c = config(8, 2, PpgMode::Mux, AdderKind::Cla);
        c.group_size = 0;
        assert!(estimate_resources(&c, &m).is_err());
        let mut c = config(8, 2, PpgMode::Mux, AdderKind::Cla);
        c.coeff_width = 1;
        assert!(estimate_resources(&c, &m).is_err());
        let mut c = config(8, 2, PpgMode::Mux, AdderKind::Cla);
        c.coeff_width = 64;
        c.input_width = 64;
        assert!(matches!(
            estimate_resources(&c, &m),
            Err(Error::AccumulatorTooWide { .. })
        ));
    }
}
