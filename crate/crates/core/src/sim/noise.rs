use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Zero-mean, unit-variance additive channel noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3)`.
    Uniform,
    /// `±1` with equal probability.
    Rademacher,
    /// Noise-free channels; for algebraic checks.
    Zero,
}

impl NoiseModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseModel::Gaussian => rng.sample(StandardNormal),
            NoiseModel::Uniform => rng.random_range(-SQRT3..SQRT3),
            NoiseModel::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseModel::Zero => 0.0,
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for z in out {
            *z = self.sample(rng);
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::Uniform => "uniform",
            NoiseModel::Rademacher => "rademacher",
            NoiseModel::Zero => "zero",
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "gaussian" => Ok(NoiseModel::Gaussian),
            "uniform" => Ok(NoiseModel::Uniform),
            "rademacher" => Ok(NoiseModel::Rademacher),
            "zero" => Ok(NoiseModel::Zero),
            other => Err(crate::error::invalid("noise", format!("unknown noise model `{other}`"))),
        }
    }
}
