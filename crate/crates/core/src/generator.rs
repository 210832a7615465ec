//! Synthetic data.
//!
//! The mixture process draws `A_t ~ Bernoulli(pi)`; normal points come from the
//! reference law `P0` and anomalies sit exactly at `delta` (Dirac `P1`).
//! Oracle p-value streams replace the observations by their p-values directly:
//! `U[0,1]` for normals and `U[0,1/delta]` for anomalies.

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::beta::beta_reg;

use crate::error::{config, Result};
use crate::rng::{self, Rng};

/// Reference (null) distribution `P0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    GaussianStd,
    Student { dof: u32 },
}

impl Reference {
    pub fn validate(&self) -> Result<()> {
        match self {
            Reference::Student { dof: 0 } => config("Student degrees of freedom must be >= 1"),
            _ => Ok(()),
        }
    }

    /// `P(X > x)` for `X ~ P0`.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Reference::GaussianStd => 0.5 * libm::erfc(x / std::f64::consts::SQRT_2),
            Reference::Student { dof } => student_survival(x, dof as f64),
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            Reference::GaussianStd => Sampler::Gaussian,
            Reference::Student { dof } => Sampler::Student {
                chi2: ChiSquared::new(dof as f64).expect("positive dof"),
                dof: dof as f64,
            },
        })
    }

    pub fn label(&self) -> String {
        match self {
            Reference::GaussianStd => "gaussian".into(),
            Reference::Student { dof } => format!("student{dof}"),
        }
    }
}

/// Draws from a [`Reference`]. Student variates use `Z / sqrt(V / nu)` with
/// `V ~ chi2(nu)`.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Gaussian,
    Student { chi2: ChiSquared<f64>, dof: f64 },
}

impl Sampler {
    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Sampler::Gaussian => StandardNormal.sample(rng),
            Sampler::Student { chi2, dof } => {
                let z: f64 = StandardNormal.sample(rng);
                let v = chi2.sample(rng);
                z / (v / dof).sqrt()
            }
        }
    }

    pub fn fill(&self, rng: &mut Rng, out: &mut [f64]) {
        for x in out {
            *x = self.sample(rng);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub pi: f64,
    pub reference: Reference,
    pub anomaly_shift: f64,
    pub length: usize,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return config(format!("anomaly proportion {} outside [0, 1]", self.pi));
        }
        if self.length == 0 {
            return config("series length must be >= 1");
        }
        if !self.anomaly_shift.is_finite() {
            return config("anomaly shift must be finite");
        }
        self.reference.validate()
    }
}

/// Observations with their ground-truth anomaly flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSeries {
    pub values: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&a| a).count()
    }
}

pub fn generate_mixture(cfg: &MixtureConfig) -> Result<LabeledSeries> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, 0);
    mixture_with(cfg.pi, cfg.reference, cfg.anomaly_shift, cfg.length, &mut rng)
}

/// Mixture draw on a caller-provided stream.
pub fn mixture_with(
    pi: f64,
    reference: Reference,
    shift: f64,
    length: usize,
    rng: &mut Rng,
) -> Result<LabeledSeries> {
    let sampler = reference.sampler()?;
    let mut series = LabeledSeries {
        values: Vec::with_capacity(length),
        labels: Vec::with_capacity(length),
    };
    for _ in 0..length {
        let anomaly = rng.random_bool(pi);
        let x = if anomaly { shift } else { sampler.sample(rng) };
        series.values.push(x);
        series.labels.push(anomaly);
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePValueConfig {
    pub pi: f64,
    pub delta: f64,
    pub length: usize,
    pub seed: u64,
}

pub fn generate_oracle_pvalues(cfg: &OraclePValueConfig) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut rng = rng::stream(cfg.seed, 0);
    oracle_pvalues_with(cfg.pi, cfg.delta, cfg.length, &mut rng)
}

pub fn oracle_pvalues_with(
    pi: f64,
    delta: f64,
    length: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(delta >= 1.0) {
        return config(format!("atypicity level {delta} must be >= 1"));
    }
    if !(0.0..=1.0).contains(&pi) {
        return config(format!("anomaly proportion {pi} outside [0, 1]"));
    }
    let mut p = Vec::with_capacity(length);
    let mut labels = Vec::with_capacity(length);
    for _ in 0..length {
        let anomaly = rng.random_bool(pi);
        let u: f64 = rng.random();
        p.push(if anomaly { u / delta } else { u });
        labels.push(anomaly);
    }
    Ok((p, labels))
}

/// `P(T > t)` for Student's t with `nu` degrees of freedom. The two forms of
/// the incomplete beta keep full precision near 0 and in the tails.
fn student_survival(t: f64, nu: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let t2 = t * t;
    let x = nu / (nu + t2);
    let y = t2 / (nu + t2);
    // P(T > |t|)
    let upper = if y < 0.5 {
        0.5 * (1.0 - beta_reg(0.5, 0.5 * nu, y))
    } else {
        0.5 * beta_reg(0.5 * nu, 0.5, x)
    };
    if t >= 0.0 {
        upper
    } else {
        1.0 - upper
    }
}

/// Shift `d` such that a Student(5) tail beyond `d` has the same mass as the
/// standard normal tail beyond `delta_gauss`.
pub fn student_matched_shift(delta_gauss: f64) -> f64 {
    matched_shift(delta_gauss, 5)
}

/// [`student_matched_shift`] for arbitrary degrees of freedom.
pub fn matched_shift(delta_gauss: f64, dof: u32) -> f64 {
    let target = Reference::GaussianStd.survival(delta_gauss);
    let student = Reference::Student { dof: dof.max(1) };
    let sf = |x: f64| student.survival(x);
    // survival is decreasing: find lo with sf(lo) >= target >= sf(hi)
    let mut width = delta_gauss.abs().max(1.0);
    let (mut lo, mut hi) = (-width, width);
    while sf(lo) < target || sf(hi) > target {
        width *= 2.0;
        lo = -width;
        hi = width;
        if width > 1e12 {
            break;
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pi: f64, length: usize) -> MixtureConfig {
        MixtureConfig {
            pi,
            reference: Reference::GaussianStd,
            anomaly_shift: 4.0,
            length,
            seed: 11,
        }
    }

    #[test]
    fn degenerate_proportions() {
        let s = generate_mixture(&cfg(0.0, 500)).unwrap();
        assert_eq!(s.anomaly_count(), 0);
        let s = generate_mixture(&cfg(1.0, 500)).unwrap();
        assert!(s.values.iter().all(|&x| x == 4.0));
        assert!(s.labels.iter().all(|&a| a));
    }

    #[test]
    fn anomaly_count_within_binomial_bounds() {
        // Binomial(10^4, 0.01): mean 100, sd 9.95; [60, 140] is beyond 4 sd.
        for seed in 0..20 {
            let mut c = cfg(0.01, 10_000);
            c.seed = seed;
            let k = generate_mixture(&c).unwrap().anomaly_count();
            assert!((60..=140).contains(&k), "seed {seed}: {k}");
        }
    }

    #[test]
    fn labels_match_dirac_values() {
        let s = generate_mixture(&cfg(0.3, 2000)).unwrap();
        for (x, a) in s.values.iter().zip(&s.labels) {
            assert_eq!(*a, *x == 4.0);
        }
    }

    #[test]
    fn reproducible() {
        assert_eq!(generate_mixture(&cfg(0.1, 300)).unwrap(), generate_mixture(&cfg(0.1, 300)).unwrap());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_mixture(&cfg(1.5, 10)).is_err());
        assert!(generate_mixture(&cfg(0.1, 0)).is_err());
        let mut c = cfg(0.1, 10);
        c.reference = Reference::Student { dof: 0 };
        assert!(generate_mixture(&c).is_err());
        let o = OraclePValueConfig { pi: 0.1, delta: 0.5, length: 10, seed: 1 };
        assert!(generate_oracle_pvalues(&o).is_err());
    }

    #[test]
    fn oracle_anomalies_live_below_one_over_delta() {
        let o = OraclePValueConfig { pi: 0.02, delta: 1000.0, length: 20_000, seed: 3 };
        let (p, a) = generate_oracle_pvalues(&o).unwrap();
        assert!(a.iter().any(|&x| x));
        for (pv, an) in p.iter().zip(&a) {
            if *an {
                assert!(*pv <= 0.001);
            }
        }
    }

    #[test]
    fn oracle_null_cdf_at_half() {
        let o = OraclePValueConfig { pi: 0.0, delta: 1.0, length: 100_000, seed: 5 };
        let (p, _) = generate_oracle_pvalues(&o).unwrap();
        let frac = p.iter().filter(|&&x| x <= 0.5).count() as f64 / p.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn gaussian_moments() {
        // 10^5 normal draws: mean within 3 se, variance within 3 se (se of s^2 ~ sqrt(2/n)).
        let s = generate_mixture(&cfg(0.0, 100_000)).unwrap();
        let n = s.len() as f64;
        let mean = s.values.iter().sum::<f64>() / n;
        let var = s.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn student_moments() {
        // t(5): variance 5/3, kurtosis 9 so var(s^2) = (mu4 - sigma^4)/n = (25 - 25/9)/n.
        let mut c = cfg(0.0, 100_000);
        c.reference = Reference::Student { dof: 5 };
        let s = generate_mixture(&c).unwrap();
        let n = s.len() as f64;
        let mean = s.values.iter().sum::<f64>() / n;
        let var = s.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * (5.0 / 3.0 / n).sqrt());
        let se = ((25.0 - 25.0 / 9.0) / n).sqrt();
        assert!((var - 5.0 / 3.0).abs() < 3.0 * se, "{var}");
    }

    /// Closed-form t(5) survival, written independently of the library.
    fn t5_survival(t: f64) -> f64 {
        let theta = (t / 5f64.sqrt()).atan();
        let c = theta.cos();
        let cdf = 0.5 + (theta + theta.sin() * c * (1.0 + 2.0 / 3.0 * c * c)) / std::f64::consts::PI;
        1.0 - cdf
    }

    #[test]
    fn survival_functions_match_references() {
        let s4 = Reference::GaussianStd.survival(4.0);
        assert!((s4 - 3.167_124_183_311_992e-5).abs() < 1e-17);
        for t in [-3.0, -0.5, -1e-7, 0.0, 1e-9, 1.0, 2.5, 6.0, 40.0] {
            let got = Reference::Student { dof: 5 }.survival(t);
            assert!((got - t5_survival(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn matched_shift_examples() {
        assert!(student_matched_shift(0.0).abs() < 1e-12);
        let d4 = student_matched_shift(4.0);
        assert!((t5_survival(d4) - 3.167_124_183_311_992e-5).abs() < 1e-10);
        assert!(student_matched_shift(3.5) < d4);
        assert!(d4 > 4.0);
    }
}
