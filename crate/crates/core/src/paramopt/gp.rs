//! Gaussian-process regression with a Matérn-5/2 kernel on the unit cube.
//!
//! The prior mean is the sample mean of the targets. The signal variance has a closed-form
//! maximum-likelihood value for a given lengthscale, so only the (isotropic) lengthscale is
//! searched: a log-spaced grid followed by golden-section refinement of the log marginal
//! likelihood.

use thiserror::Error;

use crate::scalar::{dist, Scalar};

pub const JITTER: f64 = 1e-6;
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (0.05, 5.0);
const GRID: usize = 24;
const GOLDEN_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("no training data")]
    Empty,
    #[error("inputs have inconsistent dimensions")]
    DimensionMismatch,
    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("training data is not finite")]
    NonFinite,
}

/// Matérn-5/2 correlation at distance `r` with lengthscale `l`.
pub fn matern52<T: Scalar>(r: T, l: T) -> T {
    let s = T::lit(5.0f64.sqrt()) * r / l;
    (T::one() + s + s * s / T::lit(3.0)) * (-s).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProcess<T> {
    x: Vec<Vec<T>>,
    y: Vec<T>,
    mean: T,
    lengthscale: T,
    signal_variance: T,
    jitter: T,
    /// Lower Cholesky factor of the unit-variance kernel matrix plus jitter.
    chol: Vec<Vec<T>>,
    /// Solution of `K alpha = y - mean`.
    alpha: Vec<T>,
}

fn cholesky<T: Scalar>(k: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = k.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i][j];
            for p in 0..j {
                s = s - l[i][p] * l[j][p];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward<T: Scalar>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s = s - l[i][p] * x[p];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn backward<T: Scalar>(l: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s = s - l[p][i] * x[p];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Averages targets of identical inputs so the kernel matrix has no duplicate rows.
fn dedupe<T: Scalar>(x: &[Vec<T>], y: &[T]) -> (Vec<Vec<T>>, Vec<T>) {
    let mut xs: Vec<Vec<T>> = Vec::new();
    let mut sums: Vec<(T, usize)> = Vec::new();
    for (xi, &yi) in x.iter().zip(y) {
        match xs.iter().position(|u| u == xi) {
            Some(p) => {
                sums[p].0 = sums[p].0 + yi;
                sums[p].1 += 1;
            }
            None => {
                xs.push(xi.clone());
                sums.push((yi, 1));
            }
        }
    }
    let ys = sums
        .into_iter()
        .map(|(s, c)| s / T::from_usize(c).expect("count fits"))
        .collect();
    (xs, ys)
}

struct Factor<T> {
    chol: Vec<Vec<T>>,
    alpha: Vec<T>,
    jitter: T,
}

fn factor<T: Scalar>(x: &[Vec<T>], yc: &[T], l: T) -> Option<Factor<T>> {
    let n = x.len();
    let mut jitter = T::lit(JITTER);
    for _ in 0..5 {
        let k: Vec<Vec<T>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let c = matern52(dist(&x[i], &x[j]), l);
                        if i == j {
                            c + jitter
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect();
        if let Some(chol) = cholesky(&k) {
            let alpha = backward(&chol, &forward(&chol, yc));
            return Some(Factor { chol, alpha, jitter });
        }
        jitter = jitter * T::lit(10.0);
    }
    None
}

/// Log marginal likelihood with the signal variance profiled out.
fn profile_lml<T: Scalar>(f: &Factor<T>, yc: &[T]) -> (T, T) {
    let n = T::from_usize(yc.len()).expect("len fits");
    let quad: T = yc.iter().zip(&f.alpha).map(|(&a, &b)| a * b).sum();
    let var = (quad / n).max(T::lit(1e-12));
    let logdet: T = f.chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum();
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let lml = -n / T::lit(2.0) * (var.ln() + T::one() + two_pi.ln()) - logdet;
    (lml, var)
}

impl<T: Scalar> GaussianProcess<T> {
    /// Fits hyperparameters by maximizing the marginal likelihood.
    pub fn fit(x: &[Vec<T>], y: &[T]) -> Result<Self, GpError> {
        let (x, y, mean, yc) = Self::prepare(x, y)?;
        let (lo, hi) = (T::lit(LENGTHSCALE_BOUNDS.0).ln(), T::lit(LENGTHSCALE_BOUNDS.1).ln());
        let eval = |log_l: T| -> T {
            factor(&x, &yc, log_l.exp())
                .map(|f| profile_lml(&f, &yc).0)
                .unwrap_or(T::neg_infinity())
        };
        let step = (hi - lo) / T::from_usize(GRID - 1).expect("fits");
        let grid: Vec<T> = (0..GRID).map(|i| lo + step * T::from_usize(i).expect("fits")).collect();
        let scores: Vec<T> = grid.iter().map(|&g| eval(g)).collect();
        let mut best = 0;
        for i in 1..GRID {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID - 1)]);
        let phi = T::lit((5.0f64.sqrt() - 1.0) / 2.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..GOLDEN_STEPS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = eval(d);
            }
        }
        let mid = (a + b) / T::lit(2.0);
        let log_l = if eval(mid) >= scores[best] { mid } else { grid[best] };
        Self::with_lengthscale_prepared(x, y, mean, yc, log_l.exp())
    }

    /// Fits with a fixed lengthscale; used for cheap incremental updates between full refits.
    pub fn with_lengthscale(x: &[Vec<T>], y: &[T], lengthscale: T) -> Result<Self, GpError> {
        let (x, y, mean, yc) = Self::prepare(x, y)?;
        Self::with_lengthscale_prepared(x, y, mean, yc, lengthscale)
    }

    #[allow(clippy::type_complexity)]
    fn prepare(x: &[Vec<T>], y: &[T]) -> Result<(Vec<Vec<T>>, Vec<T>, T, Vec<T>), GpError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(GpError::Empty);
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(GpError::DimensionMismatch);
        }
        if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite);
        }
        let (x, y) = dedupe(x, y);
        let mean = y.iter().copied().sum::<T>() / T::from_usize(y.len()).expect("fits");
        let yc = y.iter().map(|&v| v - mean).collect();
        Ok((x, y, mean, yc))
    }

    fn with_lengthscale_prepared(
        x: Vec<Vec<T>>,
        y: Vec<T>,
        mean: T,
        yc: Vec<T>,
        lengthscale: T,
    ) -> Result<Self, GpError> {
        let f = factor(&x, &yc, lengthscale).ok_or(GpError::NotPositiveDefinite)?;
        let (_, signal_variance) = profile_lml(&f, &yc);
        Ok(Self {
            x,
            y,
            mean,
            lengthscale,
            signal_variance,
            jitter: f.jitter,
            chol: f.chol,
            alpha: f.alpha,
        })
    }

    pub fn lengthscale(&self) -> T {
        self.lengthscale
    }

    pub fn signal_variance(&self) -> T {
        self.signal_variance
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Largest (deduplicated) training target.
    pub fn best_target(&self) -> T {
        self.y.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn log_marginal_likelihood(&self) -> T {
        let yc: Vec<T> = self.y.iter().map(|&v| v - self.mean).collect();
        let f = Factor {
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            jitter: self.jitter,
        };
        profile_lml(&f, &yc).0
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let k: Vec<T> = self
            .x
            .iter()
            .map(|xi| matern52(dist(xi, x), self.lengthscale))
            .collect();
        let mu = self.mean + k.iter().zip(&self.alpha).map(|(&a, &b)| a * b).sum::<T>();
        let v = forward(&self.chol, &k);
        let reduce: T = v.iter().map(|&a| a * a).sum();
        let var = (self.signal_variance * (T::one() + self.jitter - reduce)).max(T::zero());
        (mu, var)
    }
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement<T: Scalar>(mu: T, var: T, best: T) -> T {
    let sd = var.sqrt();
    let gain = mu - best;
    if !(sd > T::lit(1e-12)) {
        return gain.max(T::zero());
    }
    let z = (gain / sd).to_f64_lossy();
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    gain * T::lit(cdf) + sd * T::lit(pdf)
}
