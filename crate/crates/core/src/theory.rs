//! Analytic side of the noisy k-NN analysis: posterior models with a uniform
//! marginal on the unit box, Monte-Carlo masses of the Bayes error and of the
//! regions where noise misleads the vote, and closed-form risk bounds.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::data::{Dataset, Label, NoiseRates};
use crate::error::{Error, Result};
use crate::noise::corrupted_eta;
use crate::par::Execution;
use crate::seed::Seed;

type EtaFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Clean posterior `eta(x) = Pr[y = 1 | x]` over `[0, 1]^dim` with a uniform
/// marginal.
#[derive(Clone)]
pub struct ConditionalModel {
    eta: Arc<EtaFn>,
    dim: usize,
    lipschitz: f64,
}

impl fmt::Debug for ConditionalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalModel")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl ConditionalModel {
    pub fn new(
        dim: usize,
        lipschitz: f64,
        eta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if lipschitz.is_nan() || lipschitz < 0.0 {
            return Err(Error::Domain(format!(
                "Lipschitz constant {lipschitz} must be non-negative"
            )));
        }
        Ok(ConditionalModel {
            eta: Arc::new(eta),
            dim,
            lipschitz,
        })
    }

    /// `eta(x1, x2) = (1 - sin(2 pi x1) sin(2 pi x2)) / 2` on the unit square.
    ///
    /// Each partial derivative is bounded by `pi`, so the Euclidean gradient
    /// norm, and hence the Lipschitz constant, is at most `pi * sqrt(2)`.
    pub fn synthetic() -> Self {
        ConditionalModel {
            eta: Arc::new(|x: &[f64]| {
                0.5 * (1.0 - (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin())
            }),
            dim: 2,
            lipschitz: PI * std::f64::consts::SQRT_2,
        }
    }

    /// Constant posterior (Lipschitz constant 0).
    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!("posterior {value} outside [0, 1]")));
        }
        ConditionalModel::new(dim, 0.0, move |_| value)
    }

    pub fn eta(&self, x: &[f64]) -> f64 {
        (self.eta)(x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `n` i.i.d. examples: `x` uniform on the box, then `y ~ Bernoulli(eta(x))`.
    pub fn sample_labeled(&self, n: usize, seed: Seed) -> Dataset {
        let mut rng = seed.rng();
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        let mut x = vec![0.0; self.dim];
        for _ in 0..n {
            for c in x.iter_mut() {
                *c = rng.gen::<f64>();
            }
            let u: f64 = rng.gen();
            labels.push(Label::from_bool(u < self.eta(&x)));
            features.extend_from_slice(&x);
        }
        Dataset::from_flat(self.dim, features, labels).expect("sampled data is well formed")
    }
}

pub fn make_synthetic_model() -> ConditionalModel {
    ConditionalModel::synthetic()
}

pub fn sample_labeled(model: &ConditionalModel, n: usize, seed: Seed) -> Dataset {
    model.sample_labeled(n, seed)
}

/// Bayes error `(1 - 4/pi^2)/2` of [`ConditionalModel::synthetic`]:
/// `E|sin(2 pi U)| = 2/pi` per coordinate.
pub fn synthetic_bayes_error() -> f64 {
    0.5 * (1.0 - 4.0 / (PI * PI))
}

/// Monte-Carlo result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    fn exact(value: f64) -> Self {
        McEstimate {
            value,
            std_error: 0.0,
            samples: 0,
        }
    }
}

const CHUNK: u64 = 1 << 16;

/// Monte-Carlo settings shared by the mass estimators.
///
/// The sample count is fixed up front from `precision` using the worst-case
/// standard deviation of the integrand, so the standard error is guaranteed
/// below `precision` and every estimator with the same settings sees the same
/// points. Points are drawn in chunks of 65536, chunk `c` from
/// `derive_seed(seed, c)`, and partial sums are reduced in chunk order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub precision: f64,
    pub seed: Seed,
    pub min_samples: u64,
    pub execution: Execution,
}

impl MonteCarlo {
    pub fn new(precision: f64, seed: Seed) -> Self {
        MonteCarlo {
            precision,
            seed,
            min_samples: 0,
            execution: Execution::default(),
        }
    }

    pub fn with_min_samples(mut self, n: u64) -> Self {
        self.min_samples = n;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn samples_for(&self, max_sd: f64) -> Result<u64> {
        if self.precision.is_nan() || self.precision <= 0.0 {
            return Err(Error::Domain(format!(
                "precision {} must be positive",
                self.precision
            )));
        }
        let n = ((max_sd / self.precision).powi(2)).ceil() as u64;
        Ok(n.max(self.min_samples).max(2))
    }

    /// Mean of `f(x)` for `x` uniform on `[0,1]^dim`.
    fn integrate<F>(&self, dim: usize, max_sd: f64, f: F) -> Result<McEstimate>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let samples = self.samples_for(max_sd)?;
        let chunks = samples.div_ceil(CHUNK);
        let partial = self.execution.map_range(chunks as usize, |c| {
            let c = c as u64;
            let len = CHUNK.min(samples - c * CHUNK);
            let mut rng = self.seed.derive(c).rng();
            let mut x = vec![0.0; dim];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                for v in x.iter_mut() {
                    *v = rng.gen::<f64>();
                }
                let y = f(&x);
                s += y;
                s2 += y * y;
            }
            (s, s2)
        });
        let (s, s2) = partial
            .iter()
            .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
        let n = samples as f64;
        let mean = s / n;
        let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok(McEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            samples,
        })
    }
}

/// `E[min(eta, 1 - eta)]`.
pub fn bayes_error(model: &ConditionalModel, mc: &MonteCarlo) -> Result<McEstimate> {
    // integrand lies in [0, 1/2]
    mc.integrate(model.dim, 0.25, |x| {
        let e = model.eta(x);
        e.min(1.0 - e)
    })
}

/// Whether `x` lies in the region where the noisy posterior sits on the
/// other side of 1/2 from the clean one.
fn misled(eta: f64, rates: NoiseRates) -> bool {
    (eta - 0.5) * (corrupted_eta(eta, rates) - 0.5) < 0.0
}

/// Whether `x` lacks a `delta` margin: not confidently positive
/// (`eta > 1/2` and noisy posterior `>= 1/2 + delta`), not confidently
/// negative, and not on the Bayes boundary.
fn margin_deficient(eta: f64, rates: NoiseRates, delta: f64) -> bool {
    let noisy = corrupted_eta(eta, rates);
    let confident_pos = eta > 0.5 && noisy >= 0.5 + delta;
    let confident_neg = eta < 0.5 && noisy <= 0.5 - delta;
    !(confident_pos || confident_neg || eta == 0.5)
}

/// Mass of the region where noise flips the majority side.
///
/// Exactly zero under symmetric rates, where the region is empty.
pub fn a0_probability(
    model: &ConditionalModel,
    rates: NoiseRates,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    if rates.is_symmetric() {
        return Ok(McEstimate::exact(0.0));
    }
    mc.integrate(model.dim, 0.5, |x| {
        f64::from(u8::from(misled(model.eta(x), rates)))
    })
}

/// Mass of the region lacking a `delta` margin on the noisy posterior.
///
/// Non-decreasing in `delta` for fixed Monte-Carlo settings; at `delta = 0`
/// it coincides with [`a0_probability`] up to the null set `eta = 1/2`.
pub fn a_delta_probability(
    model: &ConditionalModel,
    rates: NoiseRates,
    delta: f64,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Domain(format!("delta {delta} must be non-negative")));
    }
    mc.integrate(model.dim, 0.5, |x| {
        f64::from(u8::from(margin_deficient(model.eta(x), rates, delta)))
    })
}

/// Parameters entering the finite-sample bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub lipschitz: f64,
    pub rates: NoiseRates,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.d == 0 {
            return Err(Error::Domain("k, n and d must be positive".into()));
        }
        if self.k > self.n {
            return Err(Error::KTooLarge {
                k: self.k,
                n: self.n,
            });
        }
        if self.lipschitz.is_nan() || self.lipschitz < 0.0 {
            return Err(Error::Domain(
                "Lipschitz constant must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn dims(&self) -> (f64, f64, f64) {
        (self.k as f64, self.n as f64, self.d as f64)
    }
}

/// Margin used by the asymmetric-noise k-NN bound:
/// `max{ 2 sqrt(d) ((1 - tau_plus - tau_minus) L)^(d/(1+d)) (k sqrt(d) / n)^(1/(1+d)), sqrt(ln k / k) }`.
pub fn asymmetric_knn_margin(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if inputs.k < 2 {
        return Err(Error::Domain("margin needs k >= 2".into()));
    }
    let (k, n, d) = inputs.dims();
    let scale = inputs.rates.contraction() * inputs.lipschitz;
    let smooth =
        2.0 * d.sqrt() * scale.powf(d / (1.0 + d)) * (k * d.sqrt() / n).powf(1.0 / (1.0 + d));
    let vote = (k.ln() / k).sqrt();
    Ok(smooth.max(vote))
}

/// Closed-form part of the asymmetric bound:
/// `1/sqrt(k) + 2 ((1 - tau_plus - tau_minus) L / sqrt(d))^(d/(1+d)) (k/n)^(1/(1+d))`.
pub fn asymmetric_knn_tail(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (k, n, d) = inputs.dims();
    let scale = inputs.rates.contraction() * inputs.lipschitz / d.sqrt();
    Ok(1.0 / k.sqrt() + 2.0 * scale.powf(d / (1.0 + d)) * (k / n).powf(1.0 / (1.0 + d)))
}

/// Components of the asymmetric-noise k-NN risk bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetricBound {
    pub bayes_error: McEstimate,
    pub margin: f64,
    pub margin_mass: McEstimate,
    pub tail: f64,
    pub rhs: f64,
}

/// Upper bound on the expected clean risk of k-NN trained on noisy labels:
/// Bayes error + mass lacking the margin + closed-form tail.
pub fn asymmetric_knn_risk_bound(
    inputs: &BoundInputs,
    model: &ConditionalModel,
    mc: &MonteCarlo,
) -> Result<AsymmetricBound> {
    let margin = asymmetric_knn_margin(inputs)?;
    let tail = asymmetric_knn_tail(inputs)?;
    let bayes = bayes_error(model, mc)?;
    let mass = a_delta_probability(model, inputs.rates, margin, mc)?;
    Ok(AsymmetricBound {
        bayes_error: bayes,
        margin,
        margin_mass: mass,
        tail,
        rhs: bayes.value + mass.value + tail,
    })
}

/// Upper bound for symmetric noise `tau`, valid for `k >= 8`:
/// `R* + 2 R*/sqrt(k) + 2 tau / ((1 - 2 tau) sqrt(k)) + 5 max{L, sqrt L} sqrt(d) (k/n)^(1/(1+d))`.
pub fn symmetric_knn_risk_bound(inputs: &BoundInputs, bayes_error: f64) -> Result<f64> {
    inputs.validate()?;
    if inputs.k < 8 {
        return Err(Error::Domain(format!(
            "bound requires k >= 8, got {}",
            inputs.k
        )));
    }
    if !inputs.rates.is_symmetric() {
        return Err(Error::Domain("bound requires symmetric noise rates".into()));
    }
    let tau = inputs.rates.tau_plus();
    let (k, n, d) = inputs.dims();
    let l = inputs.lipschitz;
    let sk = k.sqrt();
    Ok(bayes_error
        + 2.0 * bayes_error / sk
        + 2.0 * tau / ((1.0 - 2.0 * tau) * sk)
        + 5.0 * l.max(l.sqrt()) * d.sqrt() * (k / n).powf(1.0 / (1.0 + d)))
}

/// Noise-free counterpart of [`symmetric_knn_risk_bound`], valid for `k >= 8`:
/// `R* + 2 R*/sqrt(k) + 5 max{L, sqrt L} sqrt(d) (k/n)^(1/(1+d))`.
pub fn noise_free_knn_risk_bound(
    k: usize,
    n: usize,
    d: usize,
    lipschitz: f64,
    bayes_error: f64,
) -> Result<f64> {
    let inputs = BoundInputs {
        k,
        n,
        d,
        lipschitz,
        rates: NoiseRates::none(),
    };
    inputs.validate()?;
    if k < 8 {
        return Err(Error::Domain(format!("bound requires k >= 8, got {k}")));
    }
    let (k, n, d) = inputs.dims();
    let l = lipschitz;
    Ok(bayes_error
        + 2.0 * bayes_error / k.sqrt()
        + 5.0 * l.max(l.sqrt()) * d.sqrt() * (k / n).powf(1.0 / (1.0 + d)))
}

/// Band `(lower, upper)` on the expected clean risk of 1-NN under symmetric noise `tau`:
/// `tau + (1 - 2 tau)(R* -/+ s)` with `s = 3 L sqrt(d) / (2 n^(1/(d+1)))`, the upper side
/// using `2 R*`.
pub fn one_nn_risk_band(
    tau: f64,
    bayes_error: f64,
    lipschitz: f64,
    d: usize,
    n: usize,
) -> Result<(f64, f64)> {
    if !(0.0..0.5).contains(&tau) {
        return Err(Error::Domain(format!("tau {tau} outside [0, 1/2)")));
    }
    if n == 0 || d == 0 {
        return Err(Error::Domain("n and d must be positive".into()));
    }
    let df = d as f64;
    let slack = 3.0 * lipschitz * df.sqrt() / (2.0 * (n as f64).powf(1.0 / (df + 1.0)));
    let w = 1.0 - 2.0 * tau;
    Ok((
        tau + w * (bayes_error - slack),
        tau + w * (2.0 * bayes_error + slack),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn synthetic_eta_values() {
        let m = ConditionalModel::synthetic();
        assert_abs_diff_eq!(m.eta(&[0.25, 0.25]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.eta(&[0.25, 0.75]), 1.0, epsilon = 1e-15);
        for x2 in [0.0, 0.13, 0.5, 0.77] {
            assert_abs_diff_eq!(m.eta(&[0.0, x2]), 0.5, epsilon = 1e-15);
        }
        assert_eq!(m.dim(), 2);
        assert_abs_diff_eq!(m.lipschitz(), PI * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn synthetic_lipschitz_spot_check() {
        let m = ConditionalModel::synthetic();
        let mut rng = Seed(3).rng();
        for _ in 0..20_000 {
            let a = [rng.gen::<f64>(), rng.gen::<f64>()];
            let b = [rng.gen::<f64>(), rng.gen::<f64>()];
            let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!((m.eta(&a) - m.eta(&b)).abs() <= m.lipschitz() * dist + 1e-12);
        }
    }

    #[test]
    fn sampling() {
        let m = ConditionalModel::synthetic();
        assert!(m.sample_labeled(0, Seed(1)).is_empty());
        assert_eq!(m.sample_labeled(50, Seed(1)), m.sample_labeled(50, Seed(1)));
        assert_ne!(m.sample_labeled(50, Seed(1)), m.sample_labeled(50, Seed(2)));
    }

    #[test]
    fn near_boundary_labels_are_balanced() {
        let m = ConditionalModel::synthetic();
        let d = m.sample_labeled(100_000, Seed(77));
        let (mut pos, mut tot) = (0usize, 0usize);
        for ex in d.iter() {
            let e = m.eta(ex.x);
            if (0.45..=0.55).contains(&e) {
                tot += 1;
                pos += usize::from(ex.y.is_positive());
            }
        }
        let frac = pos as f64 / tot as f64;
        assert!((frac - 0.5).abs() <= 0.02, "frac = {frac} over {tot}");
    }

    #[test]
    fn bayes_error_of_constants() {
        let mc = MonteCarlo::new(0.01, Seed(1));
        let zero = ConditionalModel::constant(3, 0.0).unwrap();
        assert_eq!(bayes_error(&zero, &mc).unwrap().value, 0.0);
        let half = ConditionalModel::constant(3, 0.5).unwrap();
        assert_eq!(bayes_error(&half, &mc).unwrap().value, 0.5);
    }

    #[test]
    fn bayes_error_synthetic_moderate_precision() {
        let mc = MonteCarlo::new(5e-4, Seed(8));
        let est = bayes_error(&ConditionalModel::synthetic(), &mc).unwrap();
        assert!(est.std_error < 5e-4);
        assert!((est.value - synthetic_bayes_error()).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn mc_is_schedule_independent() {
        let m = ConditionalModel::synthetic();
        let mc = MonteCarlo::new(1e-3, Seed(5));
        let a = bayes_error(&m, &mc.with_execution(Execution::Sequential)).unwrap();
        let b = bayes_error(&m, &mc.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn a0_zero_cases() {
        let m = ConditionalModel::synthetic();
        let mc = MonteCarlo::new(1e-2, Seed(1));
        assert_eq!(
            a0_probability(&m, NoiseRates::symmetric(0.3).unwrap(), &mc)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            a0_probability(&m, NoiseRates::none(), &mc).unwrap().value,
            0.0
        );
        let r = NoiseRates::symmetric(0.2).unwrap();
        assert_eq!(a_delta_probability(&m, r, 0.0, &mc).unwrap().value, 0.0);
    }

    #[test]
    fn a_delta_large_margin_covers_everything() {
        let m = ConditionalModel::synthetic();
        let mc = MonteCarlo::new(5e-3, Seed(2));
        let r = NoiseRates::new(0.1, 0.3).unwrap();
        assert_eq!(a_delta_probability(&m, r, 0.5, &mc).unwrap().value, 1.0);
        assert_eq!(a_delta_probability(&m, r, 2.0, &mc).unwrap().value, 1.0);
    }

    #[test]
    fn margin_errors() {
        let inputs = BoundInputs {
            k: 1,
            n: 10,
            d: 2,
            lipschitz: 1.0,
            rates: NoiseRates::none(),
        };
        assert!(asymmetric_knn_margin(&inputs).is_err());
        assert!(symmetric_knn_risk_bound(&BoundInputs { k: 7, ..inputs }, 0.1).is_err());
        let asym = BoundInputs {
            k: 9,
            rates: NoiseRates::new(0.1, 0.2).unwrap(),
            ..inputs
        };
        assert!(symmetric_knn_risk_bound(&asym, 0.1).is_err());
        assert!(one_nn_risk_band(0.5, 0.1, 1.0, 2, 10).is_err());
        assert!(a_delta_probability(
            &ConditionalModel::synthetic(),
            NoiseRates::none(),
            -0.1,
            &MonteCarlo::new(0.1, Seed(0))
        )
        .is_err());
    }
}
