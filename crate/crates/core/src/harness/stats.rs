//! Aggregation of trial records. [`StatsAccumulator`] is an associative,
//! commutative fold over integer counters, so trials can be merged in any
//! order or grouping with identical results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::predicate::{target_count, Predicate};
use crate::proto::{ProtocolKind, Status};
use crate::sim::TrialRecord;
use crate::topology::Topology;

/// Which slot count a trial contributes to the slot statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMetric {
    /// Slots until every node stopped; cut-off trials contribute nothing.
    Termination,
    /// Slots until the last node obtained an estimate; trials where some
    /// node never did contribute nothing.
    EstimateAcquisition,
}

impl SlotMetric {
    pub fn default_for(kind: ProtocolKind) -> SlotMetric {
        match kind {
            ProtocolKind::CountAllNocdA => SlotMetric::EstimateAcquisition,
            _ => SlotMetric::Termination,
        }
    }

    pub fn measure(self, record: &TrialRecord) -> Option<u64> {
        match self {
            SlotMetric::Termination => (!record.cutoff).then_some(record.slots),
            SlotMetric::EstimateAcquisition => record
                .nodes
                .iter()
                .map(|o| o.estimate_slot)
                .try_fold(0, |acc, s| s.map(|s| acc.max(s))),
        }
    }
}

/// Everything needed to fold one trial into the accumulator.
#[derive(Debug, Clone, Copy)]
pub struct StatsContext<'a> {
    pub kind: ProtocolKind,
    pub topology: &'a Topology,
    pub predicate: Predicate,
    pub slot_metric: SlotMetric,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsAccumulator {
    pub trials: u64,
    pub units: u64,
    pub successes: u64,
    pub estimate_nodes: u64,
    pub ratio_histogram: BTreeMap<i32, u64>,
    pub slot_counts: BTreeMap<u64, u64>,
    pub aborted_trials: u64,
    pub cutoff_trials: u64,
}

impl StatsAccumulator {
    pub fn add(&mut self, record: &TrialRecord, ctx: &StatsContext<'_>) {
        self.trials += 1;
        let (ok, units) = ctx.predicate.evaluate(record, ctx.topology);
        self.successes += ok;
        self.units += units;
        for o in &record.nodes {
            let Some(est) = o.estimate else { continue };
            self.estimate_nodes += 1;
            let target = target_count(ctx.kind, ctx.topology, o.node) as f64;
            let reference = if ctx.kind.estimates_lg() { target.log2() } else { target };
            let key = if reference > 0.0 {
                (est as f64 / reference).log2().round() as i32
            } else {
                i32::MAX
            };
            *self.ratio_histogram.entry(key).or_default() += 1;
        }
        if let Some(s) = ctx.slot_metric.measure(record) {
            *self.slot_counts.entry(s).or_default() += 1;
        }
        if record.nodes.iter().any(|o| o.status == Status::Aborted) {
            self.aborted_trials += 1;
        }
        if record.cutoff {
            self.cutoff_trials += 1;
        }
    }

    pub fn merge(mut self, other: StatsAccumulator) -> StatsAccumulator {
        self.trials += other.trials;
        self.units += other.units;
        self.successes += other.successes;
        self.estimate_nodes += other.estimate_nodes;
        for (k, v) in other.ratio_histogram {
            *self.ratio_histogram.entry(k).or_default() += v;
        }
        for (k, v) in other.slot_counts {
            *self.slot_counts.entry(k).or_default() += v;
        }
        self.aborted_trials += other.aborted_trials;
        self.cutoff_trials += other.cutoff_trials;
        self
    }

    /// Slot value at `rank` (0-based) in sorted order.
    fn nth_slot(&self, rank: u64) -> u64 {
        let mut seen = 0;
        for (&s, &c) in &self.slot_counts {
            seen += c;
            if seen > rank {
                return s;
            }
        }
        unreachable!("rank beyond sample count")
    }

    pub fn finish(&self, ctx: &StatsContext<'_>, topology_label: String) -> ExperimentStats {
        let samples: u64 = self.slot_counts.values().sum();
        let rate = |x: u64, of: u64| if of == 0 { 0.0 } else { x as f64 / of as f64 };
        let (mean, median, p95) = if samples == 0 {
            (None, None, None)
        } else {
            let total: u128 = self.slot_counts.iter().map(|(&s, &c)| s as u128 * c as u128).sum();
            let median = if samples % 2 == 1 {
                self.nth_slot(samples / 2) as f64
            } else {
                (self.nth_slot(samples / 2 - 1) + self.nth_slot(samples / 2)) as f64 / 2.0
            };
            let p95_rank = (samples * 95).div_ceil(100) - 1;
            (Some(total as f64 / samples as f64), Some(median), Some(self.nth_slot(p95_rank) as f64))
        };
        ExperimentStats {
            protocol: ctx.kind,
            topology: topology_label,
            predicate: ctx.predicate,
            predicate_version: ctx.predicate.version(),
            trials: self.trials,
            units: self.units,
            successes: self.successes,
            success_rate: rate(self.successes, self.units),
            estimate_nodes: self.estimate_nodes,
            ratio_histogram: self.ratio_histogram.clone(),
            slot_metric: ctx.slot_metric,
            slot_samples: samples,
            slots_mean: mean,
            slots_median: median,
            slots_p95: p95,
            aborted_trials: self.aborted_trials,
            abort_rate: rate(self.aborted_trials, self.trials),
            cutoff_trials: self.cutoff_trials,
            cutoff_rate: rate(self.cutoff_trials, self.trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub protocol: ProtocolKind,
    pub topology: String,
    pub predicate: Predicate,
    pub predicate_version: u32,
    pub trials: u64,
    pub units: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub estimate_nodes: u64,
    /// `round(lg(estimate / n_u))` to node count. For `lg n` estimators the
    /// reference is `lg n_u`.
    pub ratio_histogram: BTreeMap<i32, u64>,
    pub slot_metric: SlotMetric,
    pub slot_samples: u64,
    pub slots_mean: Option<f64>,
    pub slots_median: Option<f64>,
    pub slots_p95: Option<f64>,
    pub aborted_trials: u64,
    pub abort_rate: f64,
    pub cutoff_trials: u64,
    pub cutoff_rate: f64,
}

impl ExperimentStats {
    pub const CSV_HEADER: &'static str = "protocol,topology,predicate,predicate_version,trials,units,successes,\
success_rate,estimate_nodes,ratio_histogram,slot_metric,slot_samples,slots_mean,slots_median,slots_p95,\
aborted_trials,abort_rate,cutoff_trials,cutoff_rate";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let hist = self
            .ratio_histogram
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(";");
        let metric = match self.slot_metric {
            SlotMetric::Termination => "termination",
            SlotMetric::EstimateAcquisition => "estimate_acquisition",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.topology,
            self.predicate,
            self.predicate_version,
            self.trials,
            self.units,
            self.successes,
            self.success_rate,
            self.estimate_nodes,
            hist,
            metric,
            self.slot_samples,
            opt(self.slots_mean),
            opt(self.slots_median),
            opt(self.slots_p95),
            self.aborted_trials,
            self.abort_rate,
            self.cutoff_trials,
            self.cutoff_rate
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NodeOutcome;

    fn ctx(topo: &Topology) -> StatsContext<'_> {
        StatsContext {
            kind: ProtocolKind::CountShNocdConst,
            topology: topo,
            predicate: Predicate::ShRange4x,
            slot_metric: SlotMetric::Termination,
        }
    }

    fn rec(est: u64, slots: u64) -> TrialRecord {
        TrialRecord {
            trial: 0,
            seed: 0,
            slots,
            cutoff: false,
            nodes: (0..2)
                .map(|u| NodeOutcome {
                    node: u,
                    degree: 1,
                    status: Status::Done(Some(est)),
                    estimate: Some(est),
                    estimate_slot: Some(slots),
                    termination_slot: Some(slots),
                })
                .collect(),
        }
    }

    #[test]
    fn quantiles() {
        let topo = Topology::clique(2).unwrap();
        let c = ctx(&topo);
        let mut acc = StatsAccumulator::default();
        for s in 1..=20 {
            acc.add(&rec(4, s), &c);
        }
        let stats = acc.finish(&c, "clique:2".into());
        assert_eq!(stats.slots_median, Some(10.5));
        assert_eq!(stats.slots_p95, Some(19.0));
        assert_eq!(stats.slots_mean, Some(10.5));
        assert_eq!(stats.success_rate, 1.0);
        assert_eq!(stats.ratio_histogram, BTreeMap::from([(1, 40)]));
    }

    #[test]
    fn merge_is_order_free() {
        let topo = Topology::clique(2).unwrap();
        let c = ctx(&topo);
        let recs: Vec<_> = (0..9).map(|i| rec(2 << (i % 3), 2 + i)).collect();
        let mut all = StatsAccumulator::default();
        recs.iter().for_each(|r| all.add(r, &c));
        let mut a = StatsAccumulator::default();
        let mut b = StatsAccumulator::default();
        recs[..4].iter().for_each(|r| a.add(r, &c));
        recs[4..].iter().for_each(|r| b.add(r, &c));
        assert_eq!(b.clone().merge(a.clone()), all);
        assert_eq!(a.merge(b), all);
    }

    #[test]
    fn csv_has_matching_columns() {
        let topo = Topology::clique(2).unwrap();
        let c = ctx(&topo);
        let mut acc = StatsAccumulator::default();
        acc.add(&rec(2, 3), &c);
        let stats = acc.finish(&c, "clique:2".into());
        let csv = stats.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap().split(',').count();
        assert_eq!(lines.next().unwrap().split(',').count(), header);
    }
}
