use serde::{Deserialize, Serialize};

use super::{weyl_constant, InteriorSpectralData};
use crate::error::{invalid, Error, Result};

/// Disjoint eigenvalue intervals `I_p = (a_p, b_p)` of width `< delta`
/// and the indices falling into each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub delta: f64,
    pub intervals: Vec<(f64, f64)>,
    pub members: Vec<Vec<usize>>,
    /// Included indices with `1/delta <= mu < 1/delta + delta`, where
    /// coverage is optional.
    pub boundary: Vec<usize>,
    /// The available spectrum ends below `1/delta`, so coverage holds only
    /// for the eigenvalues present.
    pub truncated: bool,
}

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.len()).collect()
    }

    /// Number of clustered indices.
    pub fn covered(&self) -> usize {
        self.members.iter().map(|m| m.len()).sum()
    }

    pub fn cluster_of(&self, j: usize) -> Option<usize> {
        self.members.iter().position(|m| m.contains(&j))
    }

    /// Checks `j < k <= 2^(n/2) C7^n j` for all nonzero `j < k` in one cluster.
    pub fn index_ratio_holds(&self, c7: f64, n: usize) -> bool {
        let f = 2f64.powf(n as f64 / 2.0) * c7.powi(n as i32);
        self.members.iter().all(|m| {
            let lo = *m.iter().min().unwrap_or(&0);
            let hi = *m.iter().max().unwrap_or(&0);
            lo == 0 || (hi as f64) <= f * lo as f64
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    Ok(())
}

fn interval(lo: f64, hi: f64, delta: f64) -> (f64, f64) {
    let eta = (delta - (hi - lo)) / 4.0;
    ((lo - eta).max(-delta / 2.0), (hi + eta).min(1.0 / delta + delta))
}

/// Greedy left-to-right clustering of the data's eigenvalues: a new cluster
/// starts whenever the gap to the previous eigenvalue is at least `delta`.
pub fn build_clusters(data: &InteriorSpectralData, delta: f64) -> Result<ClusterPartition> {
    check_delta(delta)?;
    let mus = data.mus();
    if mus.len() > 2 {
        let c7 = weyl_constant(&mus, 2);
        if delta >= 1.0 / (3.0 * c7) {
            return invalid(format!("delta = {delta} must be below 1/(3 C7) = {:.4}", 1.0 / (3.0 * c7)));
        }
    }
    cluster_values(&mus, delta)
}

pub(crate) fn cluster_values(mus: &[f64], delta: f64) -> Result<ClusterPartition> {
    check_delta(delta)?;
    let limit = 1.0 / delta + delta;
    let n = mus.iter().take_while(|&&m| m < limit).count();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        if j == 0 || mus[j] - mus[j - 1] >= delta {
            members.push(vec![j]);
        } else {
            members.last_mut().unwrap().push(j);
        }
    }
    let mut intervals = Vec::with_capacity(members.len());
    for m in &members {
        let (s, e) = (m[0], *m.last().unwrap());
        let w = mus[e] - mus[s];
        if w >= delta {
            return Err(Error::ClusterTooWide { start: s, end: e, width: w, delta });
        }
        intervals.push(interval(mus[s], mus[e], delta));
    }
    if members.first().map(|m| m.len()).unwrap_or(1) != 1 {
        return invalid(format!("mu_1 = {} lies within delta of the zero eigenvalue", mus[1]));
    }
    let boundary = (0..n).filter(|&j| mus[j] >= 1.0 / delta).collect();
    let truncated = mus.last().map(|&m| m < 1.0 / delta).unwrap_or(true);
    Ok(ClusterPartition { delta, intervals, members, boundary, truncated })
}

/// Decides clauses (i)-(iii) for two spectra at once.
///
/// Returns a pair of partitions sharing the same intervals, or the reason no
/// admissible family of intervals exists. Among admissible families the
/// finest one ending at the largest coverage is returned.
pub fn partition_pair(
    mu1: &[f64],
    mu2: &[f64],
    delta: f64,
) -> Result<std::result::Result<(ClusterPartition, ClusterPartition), String>> {
    check_delta(delta)?;
    if mu1.is_empty() || mu2.is_empty() {
        return invalid("both spectra must be nonempty");
    }
    let mut items: Vec<(f64, u8, usize)> = mu1
        .iter()
        .enumerate()
        .map(|(j, &m)| (m, 0u8, j))
        .chain(mu2.iter().enumerate().map(|(j, &m)| (m, 1u8, j)))
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let n = items.len();
    let v: Vec<f64> = items.iter().map(|it| it.0).collect();
    let zero_ok = items[0].2 == 0 && items[1].2 == 0 && items[0].1 != items[1].1 && v[1] - v[0] < delta;
    if !zero_ok {
        return Ok(Err("(iii): the zero eigenvalues do not form a cluster of one element each".into()));
    }
    if n > 2 && !(v[2] > v[1]) {
        return Ok(Err("(iii): the zero eigenvalue is not simple".into()));
    }
    let inv = 1.0 / delta;
    let required = v.iter().filter(|&&x| x < inv).count();
    // prefix[i] = (#set0 - #set1) among the first i items
    let mut prefix = vec![0i64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + if items[i].1 == 0 { 1 } else { -1 };
    }
    let cut_ok = |b: usize| b == n || v[b] > v[b - 1];
    let mut prev: Vec<Option<usize>> = vec![None; n + 1];
    let mut feasible = vec![false; n + 1];
    feasible[2] = cut_ok(2);
    for b in 3..=n {
        if !cut_ok(b) || v[b - 1] >= inv + delta {
            continue;
        }
        let mut a = b - 1;
        loop {
            if v[b - 1] - v[a] >= delta || a < 2 {
                break;
            }
            if feasible[a] && prefix[b] == prefix[a] {
                prev[b] = Some(a);
                feasible[b] = true;
                break;
            }
            a -= 1;
        }
    }
    let end = (required.max(2)..=n).rev().find(|&k| feasible[k] && v[k - 1] < inv + delta);
    let Some(end) = end else {
        let reach = (2..=n).rev().find(|&k| feasible[k]).unwrap_or(2);
        return Ok(Err(format!(
            "(i)-(iii): no admissible intervals cover the eigenvalue {:.6} (position {reach} of {n})",
            v[reach.min(n - 1)]
        )));
    };
    let mut runs = vec![(end_start(&prev, end), end)];
    while runs.last().unwrap().0 > 2 {
        let b = runs.last().unwrap().0;
        runs.push((end_start(&prev, b), b));
    }
    runs.push((0, 2));
    runs.reverse();
    let mut parts = [
        ClusterPartition { delta, intervals: vec![], members: vec![], boundary: vec![], truncated: false },
        ClusterPartition { delta, intervals: vec![], members: vec![], boundary: vec![], truncated: false },
    ];
    for &(a, b) in &runs {
        let iv = interval(v[a], v[b - 1], delta);
        for p in parts.iter_mut() {
            p.intervals.push(iv);
            p.members.push(Vec::new());
        }
        for it in &items[a..b] {
            let p = &mut parts[it.1 as usize];
            p.members.last_mut().unwrap().push(it.2);
            if it.0 >= inv {
                p.boundary.push(it.2);
            }
        }
    }
    for (p, mus) in parts.iter_mut().zip([mu1, mu2]) {
        for m in p.members.iter_mut() {
            m.sort_unstable();
        }
        p.truncated = mus.last().map(|&m| m < inv).unwrap_or(true);
    }
    let [a, b] = parts;
    Ok(Ok((a, b)))
}

fn end_start(prev: &[Option<usize>], b: usize) -> usize {
    prev[b].expect("feasible position has a predecessor")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_separate() {
        let c = cluster_values(&[0.0, 1.0, 1.0, 4.0], 0.1).unwrap();
        assert_eq!(c.members, vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn near_pair_merges() {
        let c = cluster_values(&[0.0, 1.0, 1.05, 4.0], 0.2).unwrap();
        assert_eq!(c.members, vec![vec![0], vec![1, 2], vec![3]]);
        for (iv, m) in c.intervals.iter().zip(&c.members) {
            assert!(iv.1 - iv.0 < 0.2);
            for &j in m {
                let mu = [0.0, 1.0, 1.05, 4.0][j];
                assert!(iv.0 < mu && mu < iv.1);
            }
        }
    }

    #[test]
    fn uniform_run_is_rejected() {
        let mus: Vec<f64> = (0..10).map(|k| if k == 0 { 0.0 } else { 1.0 + 0.05 * k as f64 }).collect();
        assert!(matches!(cluster_values(&mus, 0.1), Err(Error::ClusterTooWide { .. })));
    }

    #[test]
    fn pair_identical_spectra() {
        let mus = [0.0, 1.0, 1.0, 2.0, 4.0];
        let (a, b) = partition_pair(&mus, &mus, 0.1).unwrap().unwrap();
        assert_eq!(a.members, b.members);
        assert_eq!(a.members, vec![vec![0], vec![1, 2], vec![3], vec![4]]);
    }

    #[test]
    fn pair_count_mismatch_fails() {
        let a = [0.0, 1.0, 1.0, 2.0];
        let b = [0.0, 1.0, 2.0, 2.0];
        assert!(partition_pair(&a, &b, 0.1).unwrap().is_err());
    }

    #[test]
    fn pair_small_shift_passes() {
        let a = [0.0, 1.0, 1.0, 2.0];
        let b = [0.0, 1.03, 1.04, 1.98];
        let (pa, pb) = partition_pair(&a, &b, 0.1).unwrap().unwrap();
        assert_eq!(pa.counts(), vec![1, 2, 1]);
        assert_eq!(pb.counts(), vec![1, 2, 1]);
    }
}
