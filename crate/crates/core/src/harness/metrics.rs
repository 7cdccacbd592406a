use crate::error::{Error, Result};

/// Equal-width histogram on `[lo, hi]`; samples outside are counted in
/// `outside` and excluded from the bin masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<f64>,
    pub outside: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidInput(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let mut counts = vec![0.0; bins];
        let mut outside = 0;
        let width = (hi - lo) / bins as f64;
        for &x in samples {
            if !(lo..=hi).contains(&x) {
                outside += 1;
                continue;
            }
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
        Ok(Self { lo, hi, counts, outside })
    }

    /// Histogram from precomputed bin masses.
    pub fn from_masses(lo: f64, hi: f64, masses: Vec<f64>) -> Self {
        Self { lo, hi, counts: masses, outside: 0 }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width()
    }

    /// Bin probabilities, normalized over all samples including those
    /// outside the range.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.counts.iter().sum::<f64>() + self.outside as f64;
        if total == 0.0 {
            return vec![0.0; self.bins()];
        }
        self.counts.iter().map(|c| c / total).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        let w = self.width();
        self.probabilities().iter().map(|p| p / w).collect()
    }
}

/// Total-variation distance `½ Σ |p_b - q_b|` between two histograms on the
/// same bins. Mass outside the range counts as disagreement.
pub fn tv_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bins() != b.bins() || a.lo != b.lo || a.hi != b.hi {
        return Err(Error::InvalidInput("histograms have different bins".into()));
    }
    let (pa, pb) = (a.probabilities(), b.probabilities());
    let inside: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum();
    let out_a = 1.0 - pa.iter().sum::<f64>();
    let out_b = 1.0 - pb.iter().sum::<f64>();
    Ok(0.5 * (inside + (out_a - out_b).abs()))
}

/// Indices (plateau midpoints) of local maxima whose topographic
/// prominence is at least `min_prominence`.
pub fn prominent_maxima(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        // extent of the plateau containing i
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let h = values[i];
        let left_lower = i == 0 || values[i - 1] < h;
        let right_lower = j + 1 == n || values[j + 1] < h;
        if left_lower && right_lower && (i > 0 || j + 1 < n) {
            let mut left_min = h;
            let mut k = i;
            while k > 0 && values[k - 1] <= h {
                k -= 1;
                left_min = left_min.min(values[k]);
            }
            let mut right_min = h;
            let mut k = j;
            while k + 1 < n && values[k + 1] <= h {
                k += 1;
                right_min = right_min.min(values[k]);
            }
            // a peak touching the boundary has no base on that side
            let base = match (i == 0, j + 1 == n) {
                (true, _) => right_min,
                (_, true) => left_min,
                _ => left_min.max(right_min),
            };
            let prominence = h - base;
            if prominence >= min_prominence {
                peaks.push((i + j) / 2);
            }
        }
        i = j + 1;
    }
    peaks
}

/// Sample skewness `m3 / m2^{3/2}` (biased moments).
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Percentile `p ∈ [0, 100]` by linear interpolation between order
/// statistics at positions `(n - 1) p / 100`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidInput(format!("percentile {p} of {} values", values.len())));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (v.len() - 1) as f64 * p / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mode of a Gaussian kernel density estimate (Silverman bandwidth),
/// searched on `points` equally spaced values of `[lo, hi]`.
pub fn kde_mode(samples: &[f64], lo: f64, hi: f64, points: usize) -> f64 {
    let n = samples.len() as f64;
    let mu = mean(samples);
    let sd = (samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let iqr = percentile(samples, 75.0).unwrap_or(0.0) - percentile(samples, 25.0).unwrap_or(0.0);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(1e-12 * (hi - lo));
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1).max(1) as f64;
        let d: f64 = samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum();
        if d > best.0 {
            best = (d, x);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_and_tv() {
        let h = Histogram::new(&[0.1, 0.2, 0.6, 0.9, 1.0, 2.0], 0.0, 1.0, 2).unwrap();
        assert_eq!(h.counts, vec![2.0, 3.0]);
        assert_eq!(h.outside, 1);
        let g = Histogram::new(&[0.1, 0.7], 0.0, 1.0, 2).unwrap();
        assert_eq!(tv_distance(&g, &g).unwrap(), 0.0);
        let a = Histogram::new(&[0.1], 0.0, 1.0, 2).unwrap();
        let b = Histogram::new(&[0.9], 0.0, 1.0, 2).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn maxima_with_prominence() {
        let v = [0.0, 5.0, 1.0, 1.2, 1.0, 4.0, 4.0, 0.5];
        assert_eq!(prominent_maxima(&v, 1.0), vec![1, 5]);
        assert_eq!(prominent_maxima(&v, 0.1), vec![1, 3, 5]);
        assert_eq!(prominent_maxima(&[3.0, 2.0, 1.0], 0.5), vec![0]);
        assert!(prominent_maxima(&[1.0, 1.0, 1.0], 0.0).is_empty());
    }

    #[test]
    fn percentiles_match_linear_convention() {
        let v: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        // numpy.percentile(range(1, 101), 25) == 25.75
        assert!((percentile(&v, 25.0).unwrap() - 25.75).abs() < 1e-12);
        assert!((percentile(&v, 98.0).unwrap() - 98.02).abs() < 1e-12);
        assert_eq!(percentile(&[4.2], 2.0).unwrap(), 4.2);
        assert_eq!(percentile(&[4.2], 98.0).unwrap(), 4.2);
    }

    #[test]
    fn skewness_signs() {
        assert!(skewness(&[0.0, 0.0, 0.0, 0.0, 10.0]) > 1.0);
        assert!(skewness(&[-1.0, 0.0, 1.0]).abs() < 1e-15);
    }

    #[test]
    fn kde_mode_finds_peak() {
        let s: Vec<f64> = (0..200).map(|k| 0.3 + 0.05 * ((k as f64) * 0.77).sin()).collect();
        let m = kde_mode(&s, 0.0, 1.0, 1001);
        assert!((m - 0.3).abs() < 0.05);
    }
}
