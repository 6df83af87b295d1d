use serde::{Deserialize, Serialize};

use crate::agents::IntentionLabel;
use crate::error::{Error, Result};
use crate::metrics::pearson;
use crate::sim::{Behavior, RunTrace};

/// Per-rider intention and behavior sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentionLog {
    pub intentions: Vec<Vec<(u32, IntentionLabel)>>,
    pub behaviors: Vec<Vec<(u32, Behavior)>>,
}

impl IntentionLog {
    pub fn from_trace(trace: &RunTrace) -> Self {
        let n = trace.steps.first().map_or(0, |s| s.riders.len());
        let mut intentions = vec![Vec::with_capacity(trace.steps.len()); n];
        let mut behaviors = vec![Vec::with_capacity(trace.steps.len()); n];
        for rec in &trace.steps {
            for (i, r) in rec.riders.iter().enumerate() {
                intentions[i].push((rec.step, r.intention));
                behaviors[i].push((rec.step, r.behavior));
            }
        }
        Self { intentions, behaviors }
    }

    /// Builds a log where every rider is observed at steps `0..len`.
    pub fn from_sequences(intentions: Vec<Vec<IntentionLabel>>, behaviors: Vec<Vec<Behavior>>) -> Self {
        Self {
            intentions: intentions.into_iter().map(stamp).collect(),
            behaviors: behaviors.into_iter().map(stamp).collect(),
        }
    }

    pub fn riders(&self) -> usize {
        self.intentions.len()
    }

    /// One past the last observed step.
    pub fn horizon(&self) -> u32 {
        let last = |t: Option<u32>| t.map_or(0, |t| t + 1);
        let i = self.intentions.iter().map(|s| last(s.last().map(|e| e.0)));
        let b = self.behaviors.iter().map(|s| last(s.last().map(|e| e.0)));
        i.chain(b).max().unwrap_or(0)
    }

    pub fn n_windows(&self, window: u32) -> usize {
        self.horizon().div_ceil(window) as usize
    }

    /// Checks that each rider's steps strictly increase.
    pub fn validate(&self) -> Result<()> {
        if self.intentions.iter().all(|s| ordered(s)) && self.behaviors.iter().all(|s| ordered(s)) {
            Ok(())
        } else {
            Err(Error::domain("log steps must strictly increase per rider"))
        }
    }
}

fn stamp<T>(v: Vec<T>) -> Vec<(u32, T)> {
    v.into_iter().enumerate().map(|(t, x)| (t as u32, x)).collect()
}

fn ordered<T>(s: &[(u32, T)]) -> bool {
    s.windows(2).all(|w| w[0].0 < w[1].0)
}

fn check_window(window: u32) -> Result<()> {
    if window == 0 {
        Err(Error::domain("window must be >= 1 step"))
    } else {
        Ok(())
    }
}

/// Per-window label counts for one rider's intention sequence.
fn label_counts(seq: &[(u32, IntentionLabel)], window: u32, n_windows: usize) -> Vec<[u64; 3]> {
    let mut counts = vec![[0u64; 3]; n_windows];
    for &(t, l) in seq {
        counts[(t / window) as usize][l.index()] += 1;
    }
    counts
}

/// Plurality label; ties go to the earlier label in `IntentionLabel::ALL`.
pub fn dominant_label(counts: &[u64; 3]) -> Option<IntentionLabel> {
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    IntentionLabel::ALL.into_iter().find(|l| counts[l.index()] == best)
}

/// Per rider: the concatenated per-window label frequencies.
pub fn window_features(log: &IntentionLog, window: u32) -> Result<Vec<Vec<f64>>> {
    check_window(window)?;
    let nw = log.n_windows(window);
    Ok(log
        .intentions
        .iter()
        .map(|seq| {
            label_counts(seq, window, nw)
                .iter()
                .flat_map(|c| {
                    let total = c.iter().sum::<u64>().max(1) as f64;
                    c.map(|x| x as f64 / total)
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    /// Half-open step ranges.
    pub windows: Vec<(u32, u32)>,
    /// `counts[w][from][to]`: riders whose dominant label went from window `w` to `w + 1`.
    pub counts: Vec<[[u64; 3]; 3]>,
    /// Rider-steps per label in each window.
    pub label_steps: Vec<[u64; 3]>,
    /// Fraction of rider-steps per label in each window.
    pub shares: Vec<[f64; 3]>,
}

impl FlowMatrix {
    pub fn share_series(&self, label: IntentionLabel) -> Vec<f64> {
        self.shares.iter().map(|s| s[label.index()]).collect()
    }
}

pub fn stage_flow_matrix(log: &IntentionLog, window: u32) -> Result<FlowMatrix> {
    check_window(window)?;
    log.validate()?;
    let horizon = log.horizon();
    let nw = log.n_windows(window);
    if nw < 2 {
        return Err(Error::domain(format!("flows need at least 2 windows, got {nw}")));
    }
    let mut counts = vec![[[0u64; 3]; 3]; nw - 1];
    let mut label_steps = vec![[0u64; 3]; nw];
    for seq in &log.intentions {
        let per_window = label_counts(seq, window, nw);
        for (acc, c) in label_steps.iter_mut().zip(&per_window) {
            for k in 0..3 {
                acc[k] += c[k];
            }
        }
        let dominant: Vec<Option<IntentionLabel>> = per_window.iter().map(dominant_label).collect();
        for (w, pair) in dominant.windows(2).enumerate() {
            if let [Some(a), Some(b)] = pair {
                counts[w][a.index()][b.index()] += 1;
            }
        }
    }
    let shares = label_steps
        .iter()
        .map(|c| {
            let total = c.iter().sum::<u64>().max(1) as f64;
            c.map(|x| x as f64 / total)
        })
        .collect();
    let windows = (0..nw as u32).map(|w| (w * window, ((w + 1) * window).min(horizon))).collect();
    Ok(FlowMatrix { windows, counts, label_steps, shares })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub intentions: Vec<IntentionLabel>,
    pub behaviors: Vec<Behavior>,
    /// `r[i][b]`; `None` when either indicator is constant.
    pub r: Vec<Vec<Option<f64>>>,
    /// Rider-windows used.
    pub samples: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, intention: IntentionLabel, behavior: Behavior) -> Option<f64> {
        self.r[intention.index()][behavior.index()]
    }
}

/// Pearson correlation across rider-windows between intention and behavior rates.
pub fn intention_behavior_correlation(log: &IntentionLog, window: u32) -> Result<CorrelationMatrix> {
    check_window(window)?;
    log.validate()?;
    let nw = log.n_windows(window);
    if nw < 3 {
        return Err(Error::domain(format!("correlation needs at least 3 windows, got {nw}")));
    }
    let mut intent_rates: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut behavior_rates: Vec<Vec<f64>> = vec![Vec::new(); Behavior::ALL.len()];
    for (iseq, bseq) in log.intentions.iter().zip(&log.behaviors) {
        let ic = label_counts(iseq, window, nw);
        let mut bc = vec![vec![0u64; Behavior::ALL.len()]; nw];
        for &(t, b) in bseq {
            bc[(t / window) as usize][b.index()] += 1;
        }
        for w in 0..nw {
            let it = ic[w].iter().sum::<u64>();
            let bt = bc[w].iter().sum::<u64>();
            if it == 0 || bt == 0 {
                continue;
            }
            for k in 0..3 {
                intent_rates[k].push(ic[w][k] as f64 / it as f64);
            }
            for k in 0..Behavior::ALL.len() {
                behavior_rates[k].push(bc[w][k] as f64 / bt as f64);
            }
        }
    }
    let r = intent_rates.iter().map(|ir| behavior_rates.iter().map(|br| pearson(ir, br)).collect()).collect();
    Ok(CorrelationMatrix {
        intentions: IntentionLabel::ALL.to_vec(),
        behaviors: Behavior::ALL.to_vec(),
        r,
        samples: intent_rates[0].len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;
    use IntentionLabel::*;

    fn rider(labels: &[IntentionLabel], per_window: usize) -> Vec<IntentionLabel> {
        labels.iter().flat_map(|&l| std::iter::repeat_n(l, per_window)).collect()
    }

    fn log_of(seqs: Vec<Vec<IntentionLabel>>) -> IntentionLog {
        let behaviors = seqs.iter().map(|s| vec![Behavior::Rest; s.len()]).collect();
        IntentionLog::from_sequences(seqs, behaviors)
    }

    #[test]
    fn single_rider_flow() {
        let log = log_of(vec![rider(&[Anxious, Anxious, RiskAvoidant], 4)]);
        let f = stage_flow_matrix(&log, 4).unwrap();
        assert_eq!(f.counts.len(), 2);
        assert_eq!(f.counts[0][Anxious.index()][Anxious.index()], 1);
        assert_eq!(f.counts[1][Anxious.index()][RiskAvoidant.index()], 1);
        let total: u64 = f.counts.iter().flatten().flatten().sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn ten_riders_switch_together() {
        let log = log_of(vec![rider(&[Anxious, RiskAvoidant], 5); 10]);
        let f = stage_flow_matrix(&log, 5).unwrap();
        assert_eq!(f.counts[0][Anxious.index()][RiskAvoidant.index()], 10);
        assert_eq!(f.counts[0].iter().flatten().sum::<u64>(), 10);
    }

    #[test]
    fn shares_partition_each_window() {
        let mut rng = substream(5, Stream::Clustering);
        let seqs: Vec<Vec<IntentionLabel>> =
            (0..7).map(|_| (0..23).map(|_| IntentionLabel::ALL[rng.random_range(0..3)]).collect()).collect();
        let f = stage_flow_matrix(&log_of(seqs), 5).unwrap();
        assert_eq!(f.windows.last(), Some(&(20, 23)));
        for (w, s) in f.shares.iter().enumerate() {
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let len = (f.windows[w].1 - f.windows[w].0) as u64;
            assert_eq!(f.label_steps[w].iter().sum::<u64>(), 7 * len);
        }
        for c in &f.counts {
            assert_eq!(c.iter().flatten().sum::<u64>(), 7);
        }
    }

    #[test]
    fn dominant_ties_follow_label_order() {
        assert_eq!(dominant_label(&[2, 2, 2]), Some(RuleFollowing));
        assert_eq!(dominant_label(&[0, 3, 3]), Some(Anxious));
        assert_eq!(dominant_label(&[0, 0, 0]), None);
    }

    #[test]
    fn flows_need_two_windows() {
        assert!(stage_flow_matrix(&log_of(vec![rider(&[Anxious], 4)]), 4).is_err());
    }

    #[test]
    fn unordered_log_rejected() {
        let log = IntentionLog { intentions: vec![vec![(1, Anxious), (0, Anxious)]], behaviors: vec![Vec::new()] };
        assert!(log.validate().is_err());
    }

    #[test]
    fn aligned_and_opposed_indicators() {
        let mut rng = substream(1, Stream::Clustering);
        let mut intents = Vec::new();
        let mut aligned = Vec::new();
        let mut opposed = Vec::new();
        for _ in 0..20 {
            let seq: Vec<IntentionLabel> =
                (0..40).map(|_| if rng.random_bool(0.4) { RiskAvoidant } else { RuleFollowing }).collect();
            aligned
                .push(seq.iter().map(|&l| if l == RiskAvoidant { Behavior::Switch } else { Behavior::Rest }).collect());
            opposed
                .push(seq.iter().map(|&l| if l == RiskAvoidant { Behavior::Rest } else { Behavior::Switch }).collect());
            intents.push(seq);
        }
        let c = intention_behavior_correlation(&IntentionLog::from_sequences(intents.clone(), aligned), 10).unwrap();
        assert!((c.get(RiskAvoidant, Behavior::Switch).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.get(Anxious, Behavior::Switch), None);
        assert_eq!(c.samples, 80);
        let c = intention_behavior_correlation(&IntentionLog::from_sequences(intents, opposed), 10).unwrap();
        assert!((c.get(RiskAvoidant, Behavior::Switch).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_indicators_are_uncorrelated() {
        let mut rng = substream(2, Stream::Clustering);
        let n = 2500;
        let intents: Vec<Vec<IntentionLabel>> = (0..n)
            .map(|_| (0..4).map(|_| if rng.random_bool(0.5) { RiskAvoidant } else { Anxious }).collect())
            .collect();
        let behaviors: Vec<Vec<Behavior>> = (0..n)
            .map(|_| (0..4).map(|_| if rng.random_bool(0.5) { Behavior::Switch } else { Behavior::Walk }).collect())
            .collect();
        let c = intention_behavior_correlation(&IntentionLog::from_sequences(intents, behaviors), 1).unwrap();
        assert_eq!(c.samples, 10_000);
        assert!(c.get(RiskAvoidant, Behavior::Switch).unwrap().abs() < 0.05);
    }

    #[test]
    fn correlation_needs_three_windows() {
        assert!(intention_behavior_correlation(&log_of(vec![rider(&[Anxious, Anxious], 3)]), 3).is_err());
    }

    #[test]
    fn features_are_frequencies() {
        let log = log_of(vec![rider(&[Anxious, RiskAvoidant], 2)]);
        assert_eq!(window_features(&log, 2).unwrap(), vec![vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]]);
    }
}
