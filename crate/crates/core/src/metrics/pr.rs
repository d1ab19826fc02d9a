/// Average precision by the step method: points are visited in
/// descending score order, tied scores enter together, and each recall
/// increment is weighted by the precision reached there. `None` when
/// there are no positives.
pub fn pr_auc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and labels differ in length");
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut area, mut last_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += truth[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - last_recall) * precision;
        last_recall = recall;
    }
    Some(area)
}

/// Mean PR-AUC over label columns that have at least one positive;
/// 0 when none do.
pub fn mean_pr_auc(scores: &[Vec<f64>], truth: &[Vec<bool>]) -> f64 {
    let labels = scores.first().map_or(0, |s| s.len());
    let per: Vec<f64> = (0..labels)
        .filter_map(|j| {
            let s: Vec<f64> = scores.iter().map(|r| r[j]).collect();
            let t: Vec<bool> = truth.iter().map(|r| r[j]).collect();
            pr_auc(&s, &t)
        })
        .collect();
    if per.is_empty() {
        0.0
    } else {
        per.iter().sum::<f64>() / per.len() as f64
    }
}

/// Mean over labels of the binary accuracy at probability 0.5.
pub fn averaged_accuracy(probs: &[Vec<f64>], truth: &[Vec<bool>]) -> f64 {
    let labels = probs.first().map_or(0, |s| s.len());
    if labels == 0 || probs.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..labels {
        let right = probs.iter().zip(truth).filter(|(p, t)| (p[j] >= 0.5) == t[j]).count();
        acc += right as f64 / probs.len() as f64;
    }
    acc / labels as f64
}
