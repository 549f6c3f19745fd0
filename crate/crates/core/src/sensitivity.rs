//! Certified pick-freeze estimation of first-order Sobol indices.
//!
//! The pick-freeze estimator is the empirical covariance of paired outputs
//! over the empirical variance of the first output, both normalized by
//! `1/M`. When outputs are only known up to per-sample error bounds, the
//! range of the estimator over all admissible true outputs gives the
//! metamodel interval; bootstrap quantiles of its end points give the
//! combined interval.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ParameterBox, ParameterPoint};

/// Sweep cap for the coordinate-wise extremization.
pub const MAX_SWEEPS: usize = 100;

/// Paired outputs and error bounds for the index of input `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct PickFreezeSample {
    pub index: usize,
    pub mu_a: Vec<ParameterPoint>,
    pub mu_b: Vec<ParameterPoint>,
    /// Outputs at `mu_a[j]`.
    pub s: Vec<f64>,
    /// Outputs at the hybrid points `hybrid(mu_a[j], mu_b[j], index)`.
    pub s_prime: Vec<f64>,
    pub eps: Vec<f64>,
    pub eps_prime: Vec<f64>,
}

impl PickFreezeSample {
    /// Checks lengths and signs. `mu_a`, `mu_b` may be empty when the
    /// outputs come from elsewhere.
    pub fn validate(&self) -> Result<()> {
        let m = self.s.len();
        let lens_ok = self.s_prime.len() == m
            && self.eps.len() == m
            && self.eps_prime.len() == m
            && (self.mu_a.is_empty() || self.mu_a.len() == m)
            && (self.mu_b.is_empty() || self.mu_b.len() == m);
        if !lens_ok {
            return Err(Error::Contract("pick-freeze lists of unequal length".into()));
        }
        if m < 2 {
            return Err(Error::Contract("pick-freeze sample needs M >= 2".into()));
        }
        if self.eps.iter().chain(&self.eps_prime).any(|e| !(*e >= 0.0)) {
            return Err(Error::Contract("error bounds must be nonnegative".into()));
        }
        Ok(())
    }

    /// Sample without error bounds.
    pub fn exact(index: usize, s: Vec<f64>, s_prime: Vec<f64>) -> Self {
        let m = s.len();
        Self {
            index,
            mu_a: Vec::new(),
            mu_b: Vec::new(),
            s,
            s_prime,
            eps: alloc::vec![0.0; m],
            eps_prime: alloc::vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    fn resample(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&j| v[j]).collect();
        Self {
            index: self.index,
            mu_a: Vec::new(),
            mu_b: Vec::new(),
            s: pick(&self.s),
            s_prime: pick(&self.s_prime),
            eps: pick(&self.eps),
            eps_prime: pick(&self.eps_prime),
        }
    }
}

/// Point with coordinate `i` from `mu_a` and all others from `mu_b`.
pub fn hybrid(mu_a: &ParameterPoint, mu_b: &ParameterPoint, i: usize) -> ParameterPoint {
    let mut c = mu_b.coords().to_vec();
    c[i] = mu_a.coords()[i];
    ParameterPoint::new(c)
}

/// Two independent uniform samples of size `m`.
pub fn pick_freeze_design(domain: &ParameterBox, m: usize, seed: u64) -> (Vec<ParameterPoint>, Vec<ParameterPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..m).map(|_| domain.sample(&mut rng)).collect();
    let b = (0..m).map(|_| domain.sample(&mut rng)).collect();
    (a, b)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Running sums of the shifted outputs; the ratio is
/// `(M Sxy - Sx Sy) / (M Sxx - Sx^2)`.
#[derive(Debug, Clone, Copy)]
struct Sums {
    m: f64,
    sx: f64,
    sy: f64,
    sxy: f64,
    sxx: f64,
}

impl Sums {
    fn of(x: &[f64], y: &[f64]) -> Self {
        let mut s = Sums { m: x.len() as f64, sx: 0.0, sy: 0.0, sxy: 0.0, sxx: 0.0 };
        for (a, b) in x.iter().zip(y) {
            s.sx += a;
            s.sy += b;
            s.sxy += a * b;
            s.sxx += a * a;
        }
        s
    }

    fn den(&self) -> f64 {
        self.m * self.sxx - self.sx * self.sx
    }

    fn ratio(&self) -> f64 {
        (self.m * self.sxy - self.sx * self.sy) / self.den()
    }
}

/// Pick-freeze estimate of the Sobol index from outputs `s_j` and
/// `s'_j`.
pub fn sobol_point_estimate(s: &[f64], s_prime: &[f64]) -> Result<f64> {
    if s.len() != s_prime.len() || s.len() < 2 {
        return Err(Error::Contract("need two output lists of equal length M >= 2".into()));
    }
    let (a, b) = (mean(s), mean(s_prime));
    let x: Vec<f64> = s.iter().map(|v| v - a).collect();
    let y: Vec<f64> = s_prime.iter().map(|v| v - b).collect();
    let sums = Sums::of(&x, &y);
    if !(sums.den() > 0.0) {
        return Err(Error::DegenerateOutput);
    }
    Ok(sums.ratio())
}

/// Range of the estimator over the output boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaInterval {
    pub lo: f64,
    pub hi: f64,
    /// The coordinate sweeps reached a fixed point for both ends; when
    /// false, the bounds come from the interval-arithmetic enclosure.
    pub converged: bool,
}

/// Maximizes `sign * (a0 + a1 t) / (b0 + b1 t + b2 t^2)` over `[lo, hi]`,
/// starting from `current`. Returns the new point.
fn best_in_interval(a: (f64, f64), b: (f64, f64, f64), lo: f64, hi: f64, current: f64, sign: f64) -> f64 {
    let eval = |t: f64| {
        let d = b.0 + b.1 * t + b.2 * t * t;
        if d > 0.0 {
            sign * (a.0 + a.1 * t) / d
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut best_t = current;
    let mut best = eval(current);
    let mut consider = |t: f64| {
        if t >= lo && t <= hi {
            let v = eval(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
    };
    consider(lo);
    consider(hi);
    // stationary points: (a1 b0 - a0 b1) - 2 a0 b2 t - a1 b2 t^2 = 0
    let (c0, c1, c2) = (a.1 * b.0 - a.0 * b.1, -2.0 * a.0 * b.2, -a.1 * b.2);
    if c2 != 0.0 {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            consider((-c1 + sq) / (2.0 * c2));
            consider((-c1 - sq) / (2.0 * c2));
        }
    } else if c1 != 0.0 {
        consider(-c0 / c1);
    }
    best_t
}

/// Coordinate-wise extremization of the ratio; `sign = 1` maximizes,
/// `-1` minimizes. Returns the extremal ratio and whether a fixed point was
/// reached.
fn extremize(xc: &[f64], yc: &[f64], ex: &[f64], ey: &[f64], sign: f64) -> (f64, bool) {
    let m = xc.len();
    let mut x = xc.to_vec();
    let mut y = yc.to_vec();
    for _ in 0..MAX_SWEEPS {
        let mut s = Sums::of(&x, &y);
        let mut moved = false;
        for j in 0..m {
            // numerator slope in y_j is M x_j - Sx; denominator does not see y
            let slope = sign * (s.m * x[j] - s.sx);
            let target = if slope > 0.0 {
                yc[j] + ey[j]
            } else if slope < 0.0 {
                yc[j] - ey[j]
            } else {
                y[j]
            };
            if target != y[j] {
                s.sy += target - y[j];
                s.sxy += x[j] * (target - y[j]);
                y[j] = target;
                moved = true;
            }
        }
        for j in 0..m {
            let (sx, sxy, sxx) = (s.sx - x[j], s.sxy - x[j] * y[j], s.sxx - x[j] * x[j]);
            let a = (s.m * sxy - sx * s.sy, s.m * y[j] - s.sy);
            let b = (s.m * sxx - sx * sx, -2.0 * sx, s.m - 1.0);
            let t = best_in_interval(a, b, xc[j] - ex[j], xc[j] + ex[j], x[j], sign);
            if t != x[j] {
                let before = Sums { sx: sx + x[j], sxy: sxy + x[j] * y[j], sxx: sxx + x[j] * x[j], ..s };
                let after = Sums { sx: sx + t, sxy: sxy + t * y[j], sxx: sxx + t * t, ..s };
                if sign * after.ratio() > sign * before.ratio() {
                    x[j] = t;
                    s = after;
                    moved = true;
                }
            }
        }
        if !moved {
            return (Sums::of(&x, &y).ratio(), true);
        }
    }
    (Sums::of(&x, &y).ratio(), false)
}

#[derive(Debug, Clone, Copy)]
struct Iv(f64, f64);

impl Iv {
    fn add(self, o: Iv) -> Iv {
        Iv(self.0 + o.0, self.1 + o.1)
    }
    fn mul(self, o: Iv) -> Iv {
        let c = [self.0 * o.0, self.0 * o.1, self.1 * o.0, self.1 * o.1];
        Iv(c.iter().copied().fold(f64::INFINITY, f64::min), c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
    fn scale(self, k: f64) -> Iv {
        if k >= 0.0 { Iv(self.0 * k, self.1 * k) } else { Iv(self.1 * k, self.0 * k) }
    }
    fn sq(self) -> Iv {
        if self.0 >= 0.0 {
            Iv(self.0 * self.0, self.1 * self.1)
        } else if self.1 <= 0.0 {
            Iv(self.1 * self.1, self.0 * self.0)
        } else {
            Iv(0.0, (self.0 * self.0).max(self.1 * self.1))
        }
    }
}

/// Interval-arithmetic enclosure of the ratio over the output boxes.
fn enclosure(xc: &[f64], yc: &[f64], ex: &[f64], ey: &[f64]) -> (f64, f64) {
    let m = xc.len() as f64;
    let (mut sx, mut sy, mut sxy, mut sxx) = (Iv(0.0, 0.0), Iv(0.0, 0.0), Iv(0.0, 0.0), Iv(0.0, 0.0));
    for j in 0..xc.len() {
        let x = Iv(xc[j] - ex[j], xc[j] + ex[j]);
        let y = Iv(yc[j] - ey[j], yc[j] + ey[j]);
        sx = sx.add(x);
        sy = sy.add(y);
        sxy = sxy.add(x.mul(y));
        sxx = sxx.add(x.sq());
    }
    let num = sxy.scale(m).add(sx.mul(sy).scale(-1.0));
    let den = sxx.scale(m).add(sx.sq().scale(-1.0));
    if !(den.0 > 0.0) {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let q = [num.0 / den.0, num.0 / den.1, num.1 / den.0, num.1 / den.1];
    (q.iter().copied().fold(f64::INFINITY, f64::min), q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `[S^m, S^M]`: minimum and maximum of the estimator over all outputs with
/// `|s_j - s~_j| <= eps_j` and `|s'_j - s~'_j| <= eps'_j`.
pub fn sobol_meta_interval(sample: &PickFreezeSample) -> Result<MetaInterval> {
    sample.validate()?;
    let (a, b) = (mean(&sample.s), mean(&sample.s_prime));
    let x: Vec<f64> = sample.s.iter().map(|v| v - a).collect();
    let y: Vec<f64> = sample.s_prime.iter().map(|v| v - b).collect();
    let center = Sums::of(&x, &y);
    if !(center.den() > 0.0) {
        return Err(Error::DegenerateOutput);
    }
    let s_hat = center.ratio();
    if sample.eps.iter().chain(&sample.eps_prime).all(|e| *e == 0.0) {
        return Ok(MetaInterval { lo: s_hat, hi: s_hat, converged: true });
    }
    let (hi, ok_hi) = extremize(&x, &y, &sample.eps, &sample.eps_prime, 1.0);
    let (lo, ok_lo) = extremize(&x, &y, &sample.eps, &sample.eps_prime, -1.0);
    if ok_hi && ok_lo {
        Ok(MetaInterval { lo: lo.min(s_hat), hi: hi.max(s_hat), converged: true })
    } else {
        let (elo, ehi) = enclosure(&x, &y, &sample.eps, &sample.eps_prime);
        Ok(MetaInterval { lo: elo, hi: ehi, converged: false })
    }
}

/// Certified index estimate with metamodel and combined intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolResult {
    pub index: usize,
    pub s_hat: f64,
    pub meta_interval: (f64, f64),
    pub combined_interval: (f64, f64),
    /// `(1 - alpha_as) (1 - alpha)^(2M)`.
    pub level: f64,
    pub meta_converged: bool,
    /// Bootstrap replicates that were usable (nonzero variance).
    pub replicates: usize,
}

/// Linear-interpolation empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Combined confidence level `(1 - alpha_as) (1 - alpha)^(2M)`.
pub fn combined_level(alpha_as: f64, alpha: f64, m: usize) -> f64 {
    (1.0 - alpha_as) * libm::pow(1.0 - alpha, 2.0 * m as f64)
}

/// Bootstraps the metamodel interval `replications` times and returns the
/// `alpha_as/2` quantile of the lower ends and the `1 - alpha_as/2` quantile
/// of the upper ends, widened to contain the full-sample metamodel interval.
pub fn sobol_certified(
    sample: &PickFreezeSample,
    alpha_as: f64,
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<SobolResult> {
    if !(alpha_as > 0.0 && alpha_as < 1.0) || !(0.0..1.0).contains(&alpha) {
        return Err(Error::Contract("risks must lie in (0, 1)".into()));
    }
    if replications < 100 {
        return Err(Error::Contract("need at least 100 bootstrap replications".into()));
    }
    let meta = sobol_meta_interval(sample)?;
    let s_hat = sobol_point_estimate(&sample.s, &sample.s_prime)?;
    let m = sample.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lows = Vec::with_capacity(replications);
    let mut highs = Vec::with_capacity(replications);
    let mut converged = meta.converged;
    let mut idx = alloc::vec![0usize; m];
    for _ in 0..replications {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..m));
        match sobol_meta_interval(&sample.resample(&idx)) {
            Ok(r) => {
                converged &= r.converged;
                lows.push(r.lo);
                highs.push(r.hi);
            }
            Err(Error::DegenerateOutput) => {}
            Err(e) => return Err(e),
        }
    }
    if lows.is_empty() {
        return Err(Error::DegenerateOutput);
    }
    lows.sort_by(f64::total_cmp);
    highs.sort_by(f64::total_cmp);
    let lo = quantile(&lows, alpha_as / 2.0).min(meta.lo);
    let hi = quantile(&highs, 1.0 - alpha_as / 2.0).max(meta.hi);
    Ok(SobolResult {
        index: sample.index,
        s_hat,
        meta_interval: (meta.lo, meta.hi),
        combined_interval: (lo, hi),
        level: combined_level(alpha_as, alpha, m),
        meta_converged: converged,
        replicates: lows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fully_frozen_gives_one() {
        let s = vec![0.3, 1.2, -0.4, 2.0, 0.9];
        assert!((sobol_point_estimate(&s, &s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_output_is_degenerate() {
        assert_eq!(sobol_point_estimate(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]), Err(Error::DegenerateOutput));
    }

    #[test]
    fn zero_eps_collapses_meta_interval() {
        let sample = PickFreezeSample::exact(0, vec![0.0, 1.0, 3.0], vec![0.5, 1.0, 2.0]);
        let r = sobol_meta_interval(&sample).unwrap();
        assert_eq!(r.lo, r.hi);
        assert_eq!(r.lo, sobol_point_estimate(&sample.s, &sample.s_prime).unwrap());
    }

    #[test]
    fn two_point_interval_brackets_estimate() {
        let mut sample = PickFreezeSample::exact(0, vec![0.0, 1.0], vec![0.0, 1.0]);
        sample.eps = vec![0.01; 2];
        sample.eps_prime = vec![0.01; 2];
        let r = sobol_meta_interval(&sample).unwrap();
        assert!(r.converged);
        assert!(r.lo <= 1.0 && 1.0 <= r.hi && r.hi - r.lo > 0.0);
        // closed form: s' endpoints move the covariance by 0.01 each way,
        // the variance is smallest at s = (0.01, 0.99)
        assert!((r.hi - 1.02 / 0.98).abs() < 1e-12);
    }

    #[test]
    fn best_in_interval_finds_interior_maximum() {
        // t / (1 + t^2) peaks at t = 1
        let t = best_in_interval((0.0, 1.0), (1.0, 0.0, 1.0), -3.0, 3.0, -3.0, 1.0);
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enclosure_contains_sweep_result() {
        let s = vec![0.1, 0.5, 0.9, 0.3, 0.7];
        let sp = vec![0.2, 0.4, 1.0, 0.1, 0.8];
        let e = vec![0.02; 5];
        let (elo, ehi) = enclosure(&s, &sp, &e, &e);
        let mut sample = PickFreezeSample::exact(0, s, sp);
        sample.eps = e.clone();
        sample.eps_prime = e;
        let r = sobol_meta_interval(&sample).unwrap();
        assert!(elo <= r.lo && r.hi <= ehi);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert!((quantile(&v, 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn level_formula() {
        let lvl = combined_level(0.05, 1e-5, 1000);
        assert!((lvl - 0.95 * libm::pow(1.0 - 1e-5, 2000.0)).abs() < 1e-15);
        assert!(lvl > 0.93);
    }

    #[test]
    fn hybrid_takes_frozen_coordinate_from_first_point() {
        let a = ParameterPoint::new(vec![1.0, 2.0, 3.0]);
        let b = ParameterPoint::new(vec![4.0, 5.0, 6.0]);
        assert_eq!(hybrid(&a, &b, 1).coords(), &[4.0, 2.0, 6.0]);
    }

    #[test]
    fn bad_risks_and_small_bootstrap_rejected() {
        let sample = PickFreezeSample::exact(0, vec![0.0, 1.0, 3.0], vec![0.5, 1.0, 2.0]);
        assert!(sobol_certified(&sample, 0.0, 200, 1e-5, 1).is_err());
        assert!(sobol_certified(&sample, 0.05, 50, 1e-5, 1).is_err());
    }
}
