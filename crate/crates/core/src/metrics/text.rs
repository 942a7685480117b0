use super::MetricError;

/// LCS-based F1 over two token sequences. Empty vs empty is 1.0; empty vs
/// non-empty is 0.0.
pub fn rouge_l_tokens<T: PartialEq>(reference: &[T], candidate: &[T]) -> f64 {
    match (reference.is_empty(), candidate.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    // single rolling row of the LCS table
    let mut row = vec![0usize; candidate.len() + 1];
    for r in reference {
        let mut diag = 0;
        for (j, c) in candidate.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if r == c { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    let lcs = row[candidate.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L on lowercased whitespace tokens.
pub fn rouge_l(reference: &str, candidate: &str) -> f64 {
    let tokens = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>();
    rouge_l_tokens(&tokens(reference), &tokens(candidate))
}

/// Maps a 1..=10 judge score onto [0, 1].
pub fn normalize_judge_score(score: f64) -> Result<f64, MetricError> {
    if !(1.0..=10.0).contains(&score) {
        return Err(MetricError::JudgeScoreOutOfRange(score));
    }
    Ok((score - 1.0) / 9.0)
}

/// Mean of normalized readability, normalized meaning and ROUGE-L.
pub fn mean_utility(readability: f64, meaning: f64, rouge: f64) -> Result<f64, MetricError> {
    Ok((normalize_judge_score(readability)? + normalize_judge_score(meaning)? + rouge) / 3.0)
}

/// First integer in a judge reply, if it lies in 1..=10.
pub fn parse_judge_score(response: &str) -> Option<u8> {
    let digits: String = response
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok().filter(|n| (1..=10).contains(n))
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the mean of their positions
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho with average ranks for ties. `Ok(None)` when either series
/// is constant.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<Option<f64>, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(MetricError::TooShort(a.len()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0)))
}
