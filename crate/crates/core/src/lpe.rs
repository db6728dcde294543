//! One-dimensional local polynomial estimation with a uniform kernel.
//!
//! A prediction at `a` fits a degree-`p` polynomial in `(z - a) / h` by least
//! squares to the training pairs with `|z - a| <= h` and returns the fitted
//! intercept. Windows that cannot support degree `p` fall back to lower
//! degrees; an empty window at degree 0 averages the nearest training points
//! and marks the prediction as a fallback.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Normal matrices with a condition estimate above this are treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest integer strictly smaller than `beta` (so `1.0 -> 0`, `1.5 -> 1`).
pub fn floor_strict(beta: f64) -> usize {
    debug_assert!(beta > 0.0);
    (beta.ceil() - 1.0).max(0.0) as usize
}

/// `max((ln n / n)^(1/(2 beta + 1)), c_h * sqrt((d + ln^2 n) / n))`.
pub fn bandwidth_hn(n: f64, d: usize, beta: f64, c_h: f64) -> f64 {
    let ln = n.ln();
    let smooth = (ln / n).powf(1.0 / (2.0 * beta + 1.0));
    let index = c_h * ((d as f64 + ln * ln) / n).sqrt();
    smooth.max(index)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpePrediction {
    pub value: f64,
    /// Degree actually fitted after any reduction.
    pub degree_used: usize,
    /// Number of training points inside the kernel window.
    pub window: usize,
    /// Set when the window was empty and the nearest points were averaged.
    pub fallback: bool,
    /// Cleared when the query lies outside the model's domain.
    pub in_domain: bool,
}

/// A fitted local polynomial regressor. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    degree: usize,
    bandwidth: f64,
    z: Vec<f64>,
    y: Vec<f64>,
    domain: (f64, f64),
}

impl LinkModel {
    /// Builds a model over `pairs` of `(z, y)`. The domain defaults to the
    /// training range widened by one bandwidth on each side.
    pub fn new(degree: usize, bandwidth: f64, mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::param("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (z, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let domain = (z[0] - bandwidth, z[z.len() - 1] + bandwidth);
        Ok(Self {
            degree,
            bandwidth,
            z,
            y,
            domain,
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Range of the training abscissae.
    pub fn support(&self) -> (f64, f64) {
        (self.z[0], self.z[self.z.len() - 1])
    }

    pub fn predict(&self, a: f64) -> LpePrediction {
        let h = self.bandwidth;
        let lo = self.z.partition_point(|&z| z < a - h);
        let hi = self.z.partition_point(|&z| z <= a + h);
        let in_domain = a >= self.domain.0 && a <= self.domain.1;
        let window = hi - lo;

        for degree in (0..=self.degree).rev() {
            if window < degree + 1 {
                continue;
            }
            if let Some(value) = local_fit(&self.z[lo..hi], &self.y[lo..hi], a, h, degree) {
                return LpePrediction {
                    value,
                    degree_used: degree,
                    window,
                    fallback: false,
                    in_domain,
                };
            }
        }

        let k = (self.degree + 1).max(2).min(self.z.len());
        let (start, end) = nearest_block(&self.z, a, k);
        let value = self.y[start..end].iter().sum::<f64>() / (end - start) as f64;
        LpePrediction {
            value,
            degree_used: 0,
            window,
            fallback: true,
            in_domain,
        }
    }

    pub fn value(&self, a: f64) -> f64 {
        self.predict(a).value
    }
}

/// Evaluates `model` at `a`.
pub fn fit_predict(model: &LinkModel, a: f64) -> LpePrediction {
    model.predict(a)
}

fn local_fit(z: &[f64], y: &[f64], a: f64, h: f64, degree: usize) -> Option<f64> {
    let q = degree + 1;
    if degree == 0 {
        return Some(y.iter().sum::<f64>() / y.len() as f64);
    }
    // moments of t = (z - a) / h up to order 2 * degree
    let mut moments = vec![0.0; 2 * degree + 1];
    let mut rhs = vec![0.0; q];
    for (&zi, &yi) in z.iter().zip(y) {
        let t = (zi - a) / h;
        let mut p = 1.0;
        for (j, m) in moments.iter_mut().enumerate() {
            *m += p;
            if j < q {
                rhs[j] += p * yi;
            }
            p *= t;
        }
    }
    let gram = DMatrix::from_fn(q, q, |r, c| moments[r + c]);
    let sv = gram.clone().singular_values();
    let (max, min) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(mx, mn), &s| (mx.max(s), mn.min(s)));
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return None;
    }
    let sol = gram.lu().solve(&DVector::from_vec(rhs))?;
    let v = sol[0];
    v.is_finite().then_some(v)
}

/// Contiguous block of `k` sorted points closest to `a`.
fn nearest_block(z: &[f64], a: f64, k: usize) -> (usize, usize) {
    let mut right = z.partition_point(|&v| v < a);
    let mut left = right;
    while right - left < k {
        let take_left = match (left > 0, right < z.len()) {
            (true, true) => (a - z[left - 1]) <= (z[right] - a),
            (true, false) => true,
            (false, true) => false,
            (false, false) => break,
        };
        if take_left {
            left -= 1;
        } else {
            right += 1;
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn floor_strict_examples() {
        assert_eq!(floor_strict(1.0), 0);
        assert_eq!(floor_strict(1.5), 1);
        assert_eq!(floor_strict(2.5), 2);
        assert_eq!(floor_strict(3.0), 2);
        assert_eq!(floor_strict(0.4), 0);
    }

    #[test]
    fn bandwidth_examples() {
        let e = std::f64::consts::E;
        for beta in [0.5, 1.5, 2.5] {
            assert_abs_diff_eq!(
                bandwidth_hn(e, 7, beta, 0.0),
                (1.0 / e).powf(1.0 / (2.0 * beta + 1.0)),
                epsilon = 1e-15
            );
        }
        // closed form at n = 12000, d = 4, beta = 1.5: max(0.16726, 0.08767)
        assert_abs_diff_eq!(bandwidth_hn(12000.0, 4, 1.5, 1.0), 0.167_263_762_300_217_3, epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for e in 2..=6 {
            let h = bandwidth_hn(10f64.powi(e), 4, 1.5, 1.0);
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(LinkModel::new(1, 0.5, vec![]), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn constants_are_reproduced() {
        let pairs: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 / 39.0, 3.0)).collect();
        for degree in 0..=3 {
            let m = LinkModel::new(degree, 0.2, pairs.clone()).unwrap();
            for a in [0.1, 0.35, 0.5, 0.9] {
                assert_abs_diff_eq!(m.value(a), 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lines_are_reproduced() {
        let pairs: Vec<(f64, f64)> = (0..25).map(|i| {
            let z = i as f64 / 24.0;
            (z, 2.0 * z + 1.0)
        }).collect();
        let m = LinkModel::new(1, 0.15, pairs).unwrap();
        for a in [0.05, 0.33, 0.61, 0.97] {
            let p = m.predict(a);
            assert!(p.window >= 2);
            assert_abs_diff_eq!(p.value, 2.0 * a + 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let z: [f64; 10] = [0.0, 0.1, 0.22, 0.31, 0.45, 0.5, 0.63, 0.77, 0.8, 0.95];
        let y = [0.3, 0.1, 0.5, 0.4, 0.9, 0.7, 1.1, 0.8, 1.3, 1.2];
        let (a, h): (f64, f64) = (0.3, 0.5);
        // uncentred simple regression on the window, solved by Cramer's rule
        let w: Vec<(f64, f64)> = z
            .iter()
            .zip(&y)
            .filter(|(zi, _)| (**zi - a).abs() <= h)
            .map(|(zi, yi)| (*zi, *yi))
            .collect();
        let n = w.len() as f64;
        let sz: f64 = w.iter().map(|p| p.0).sum();
        let szz: f64 = w.iter().map(|p| p.0 * p.0).sum();
        let sy: f64 = w.iter().map(|p| p.1).sum();
        let szy: f64 = w.iter().map(|p| p.0 * p.1).sum();
        let det = n * szz - sz * sz;
        let intercept = (szz * sy - sz * szy) / det;
        let slope = (n * szy - sz * sy) / det;
        let oracle = intercept + slope * a;

        let m = LinkModel::new(1, h, z.iter().copied().zip(y).collect()).unwrap();
        assert_abs_diff_eq!(m.value(a), oracle, epsilon = 1e-12);
    }

    #[test]
    fn degree_drops_when_window_is_thin() {
        let m = LinkModel::new(2, 0.05, vec![(0.0, 1.0), (0.04, 2.0), (1.0, 5.0)]).unwrap();
        let p = m.predict(0.02);
        assert_eq!(p.window, 2);
        assert_eq!(p.degree_used, 1);
        assert!(!p.fallback);
        assert_abs_diff_eq!(p.value, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_abscissae_reduce_degree() {
        let m = LinkModel::new(1, 0.5, vec![(0.2, 1.0), (0.2, 3.0), (0.2, 2.0)]).unwrap();
        let p = m.predict(0.25);
        assert_eq!(p.degree_used, 0);
        assert_abs_diff_eq!(p.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_window_falls_back_to_neighbours() {
        let m = LinkModel::new(1, 0.01, vec![(0.0, 1.0), (0.1, 3.0), (0.5, 10.0)]).unwrap();
        let p = m.predict(0.06);
        assert!(p.fallback);
        assert_eq!(p.window, 0);
        assert_abs_diff_eq!(p.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_domain_is_flagged() {
        let m = LinkModel::new(1, 0.1, vec![(0.0, 0.0), (0.5, 1.0), (1.0, 2.0)]).unwrap();
        assert!(m.predict(0.5).in_domain);
        assert!(!m.predict(1.5).in_domain);
        let narrowed = m.with_domain(0.2, 0.8);
        assert!(!narrowed.predict(0.1).in_domain);
    }

    #[test]
    fn locality() {
        let base: Vec<(f64, f64)> = (0..30).map(|i| (i as f64 / 29.0, (i as f64).sin())).collect();
        let m1 = LinkModel::new(1, 0.1, base.clone()).unwrap();
        let perturbed: Vec<(f64, f64)> = base
            .iter()
            .map(|&(z, y)| if (z - 0.5).abs() > 0.1 { (z, y + 100.0) } else { (z, y) })
            .collect();
        let m2 = LinkModel::new(1, 0.1, perturbed).unwrap();
        assert_eq!(m1.value(0.5), m2.value(0.5));
    }

    proptest! {
        #[test]
        fn linear_in_responses(
            ys in prop::collection::vec(-5.0f64..5.0, 30),
            ws in prop::collection::vec(-5.0f64..5.0, 30),
            c in -3.0f64..3.0,
            a in 0.05f64..0.95,
            degree in 0usize..3,
        ) {
            let z: Vec<f64> = (0..30).map(|i| (i as f64 + 0.5) / 30.0).collect();
            let model = |y: &[f64]| LinkModel::new(degree, 0.2, z.iter().copied().zip(y.iter().copied()).collect()).unwrap();
            let combo: Vec<f64> = ys.iter().zip(&ws).map(|(a, b)| a + c * b).collect();
            let lhs = model(&combo).value(a);
            let rhs = model(&ys).value(a) + c * model(&ws).value(a);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
