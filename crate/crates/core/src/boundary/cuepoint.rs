use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuePointConstraints {
    pub min_gap_s: f64,
    pub max_count: usize,
    pub score_threshold: f64,
}

impl CuePointConstraints {
    /// Budget of `max_per_hour` cue-points scaled to a title's duration,
    /// at least one.
    pub fn for_duration(duration_s: f64, min_gap_s: f64, max_per_hour: f64, score_threshold: f64) -> Self {
        let max_count = ((duration_s / 3600.0) * max_per_hour).floor().max(1.0) as usize;
        Self {
            min_gap_s,
            max_count,
            score_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBoundary {
    pub time_s: f64,
    pub score: f64,
}

/// Greedy selection by descending score (ties: earlier time first). A
/// candidate is accepted when it clears the threshold, lies at least
/// `min_gap_s` from every accepted one and the budget is not exhausted.
/// Returns candidate indices sorted by time.
pub fn select_cue_points(candidates: &[ScoredBoundary], constraints: &CuePointConstraints) -> Result<Vec<usize>> {
    if !(constraints.min_gap_s > 0.0) {
        return Err(Error::InvalidArgument("min_gap_s must be positive".into()));
    }
    if let Some(i) = candidates
        .iter()
        .position(|c| !c.score.is_finite() || !c.time_s.is_finite())
    {
        return Err(Error::NonFinite {
            context: "cue-point candidates".into(),
            index: i,
        });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        cb.score.total_cmp(&ca.score).then(ca.time_s.total_cmp(&cb.time_s))
    });
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.len() >= constraints.max_count {
            break;
        }
        let c = &candidates[i];
        if c.score < constraints.score_threshold {
            break;
        }
        if chosen
            .iter()
            .all(|&j| (candidates[j].time_s - c.time_s).abs() >= constraints.min_gap_s)
        {
            chosen.push(i);
        }
    }
    chosen.sort_by(|&a, &b| candidates[a].time_s.total_cmp(&candidates[b].time_s).then(a.cmp(&b)));
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(time_s: f64, score: f64) -> ScoredBoundary {
        ScoredBoundary { time_s, score }
    }

    fn limits(min_gap_s: f64, max_count: usize, score_threshold: f64) -> CuePointConstraints {
        CuePointConstraints {
            min_gap_s,
            max_count,
            score_threshold,
        }
    }

    #[test]
    fn single_budget_takes_best() {
        let cands = [c(10.0, 0.6), c(200.0, 0.9), c(400.0, 0.7)];
        assert_eq!(select_cue_points(&cands, &limits(30.0, 1, 0.5)).unwrap(), vec![1]);
    }

    #[test]
    fn close_pair_keeps_higher() {
        let cands = [c(100.0, 0.8), c(101.0, 0.9)];
        assert_eq!(select_cue_points(&cands, &limits(30.0, 5, 0.0)).unwrap(), vec![1]);
    }

    #[test]
    fn threshold_and_time_order() {
        let cands = [c(500.0, 0.9), c(100.0, 0.8), c(300.0, 0.4)];
        assert_eq!(select_cue_points(&cands, &limits(30.0, 5, 0.5)).unwrap(), vec![1, 0]);
        assert!(select_cue_points(&[], &limits(30.0, 5, 0.5)).unwrap().is_empty());
    }

    #[test]
    fn ties_prefer_earlier() {
        let cands = [c(110.0, 0.7), c(100.0, 0.7)];
        assert_eq!(select_cue_points(&cands, &limits(30.0, 5, 0.0)).unwrap(), vec![1]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(select_cue_points(&[c(1.0, f64::NAN)], &limits(30.0, 5, 0.0)).is_err());
        assert!(select_cue_points(&[c(1.0, 0.5)], &limits(0.0, 5, 0.0)).is_err());
    }

    #[test]
    fn budget_from_duration() {
        assert_eq!(CuePointConstraints::for_duration(5400.0, 120.0, 4.0, 0.5).max_count, 6);
        assert_eq!(CuePointConstraints::for_duration(60.0, 120.0, 4.0, 0.5).max_count, 1);
    }

    proptest! {
        #[test]
        fn output_is_feasible(
            raw in prop::collection::vec((0.0f64..1000.0, 0.0f64..1.0), 0..40),
            gap in 1.0f64..200.0,
            budget in 1usize..8,
            threshold in 0.0f64..1.0,
        ) {
            let cands: Vec<_> = raw.iter().map(|&(t, s)| c(t, s)).collect();
            let picked = select_cue_points(&cands, &limits(gap, budget, threshold)).unwrap();
            prop_assert!(picked.len() <= budget);
            for w in picked.windows(2) {
                prop_assert!(cands[w[1]].time_s - cands[w[0]].time_s >= gap);
            }
            prop_assert!(picked.iter().all(|&i| cands[i].score >= threshold));
        }
    }
}
