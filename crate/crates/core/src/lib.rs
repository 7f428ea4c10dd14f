//! Needlet-thresholded deconvolution of probability densities on the sphere
//! observed through random rotations.
//!
//! Observations are `Z = εX` with `X` drawn from an unknown density `f` and
//! `ε` a random rotation with known (or empirically estimated) law. The
//! estimator inverts the noise degree by degree in the rotational Fourier
//! domain, projects onto a needlet frame and hard-thresholds the coefficients.
//!
//! ```
//! use sphdeconv_core::{NeedletFrame, WindowFunction, NoiseModel, NoiseInverse, TargetDensity};
//! use sphdeconv_core::{estimator, noise, simulate};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let model = NoiseModel::ZAxisUniform { a: std::f64::consts::PI / 8.0 };
//! let x = simulate::sample_density(&TargetDensity::reference_bump(), 500, &mut rng);
//! let z = simulate::apply_noise(&x, &model, &mut rng).unwrap();
//!
//! let frame = NeedletFrame::new(estimator::select_j(500), WindowFunction::smooth_bump());
//! let spec = noise::spectrum(&model, frame.max_degree()).unwrap();
//! let inv = NoiseInverse::from_spectrum(&spec, noise::DEFAULT_CONDITION_LIMIT);
//! let est = estimator::NeedletEstimate::compute(&frame, &z, &inv, 1.2732).unwrap();
//! let cfg = estimator::EstimatorConfig::new(500, frame.max_level(), 0.43, 1.2732).unwrap();
//! let expansion = est.threshold(&frame, &inv, &cfg).unwrap();
//! assert_eq!(estimator::survival_counts(&expansion).len(), frame.max_level() + 1);
//! ```

pub mod cubature;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod harmonics;
pub mod needlet;
pub mod noise;
pub mod simulate;

pub use cubature::{CubatureScheme, CubatureSet};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, NeedletEstimate, Survivor, ThresholdedExpansion};
pub use experiment::ExperimentConfig;
pub use harmonics::{EulerRotation, SphereDirection, SphereFunction, SphericalSpectrum};
pub use needlet::{
    FrameCubature, NeedletAtom, NeedletCoefficients, NeedletExpansion, NeedletFrame, WindowFunction,
};
pub use noise::{NoiseInverse, NoiseModel, RotationalSpectrum};
pub use simulate::TargetDensity;
