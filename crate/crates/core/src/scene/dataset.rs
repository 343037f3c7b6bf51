use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_views, inject_aleatoric, inject_transients, CameraRing, NoiseRegion, SceneError, SceneSpec, ViewSet};

/// How training and test views are generated from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub width: usize,
    pub height: usize,
    pub train_views: usize,
    pub test_views: usize,
    /// Azimuth range `[start, end]` of the training cameras, in degrees.
    pub train_azimuth: [f64; 2],
    pub train_elevation_deg: f64,
    pub test_azimuth: [f64; 2],
    pub test_elevation_deg: f64,
    pub seed: u64,
    /// Standard deviation of the noise added to training images.
    pub noise_sigma: f64,
    pub noise_region: NoiseRegion,
    /// Occluding rectangles painted into each training image.
    pub transients: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            train_views: 20,
            test_views: 8,
            train_azimuth: [0.0, 360.0],
            train_elevation_deg: 20.0,
            // offset so no test camera coincides with a training camera
            test_azimuth: [9.0, 369.0],
            test_elevation_deg: 25.0,
            seed: 0,
            noise_sigma: 0.0,
            noise_region: NoiseRegion::All,
            transients: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: ViewSet,
    pub test: ViewSet,
}

impl DatasetConfig {
    pub fn ring(&self, azimuth: [f64; 2], elevation_deg: f64) -> CameraRing {
        CameraRing {
            azimuth_start_deg: azimuth[0],
            azimuth_end_deg: azimuth[1],
            elevation_deg,
            ..CameraRing::full(self.width, self.height)
        }
    }

    pub fn train_ring(&self) -> CameraRing {
        self.ring(self.train_azimuth, self.train_elevation_deg)
    }

    pub fn test_ring(&self) -> CameraRing {
        self.ring(self.test_azimuth, self.test_elevation_deg)
    }

    /// Renders the views and corrupts the training images. Every random
    /// choice comes from its own stream of `seed`.
    pub fn build(&self, scene: &SceneSpec) -> Result<Dataset, SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Invalid("image size must be positive".into()));
        }
        let rng = |stream| {
            let mut r = ChaCha8Rng::seed_from_u64(self.seed);
            r.set_stream(stream);
            r
        };
        let train = generate_views(scene, &self.train_ring(), self.train_views, &mut rng(0))?;
        let test = generate_views(scene, &self.test_ring(), self.test_views, &mut rng(1))?;
        let train = inject_aleatoric(train, self.noise_region, self.noise_sigma, &mut rng(2))?;
        let train = inject_transients(train, self.transients, &mut rng(3));
        Ok(Dataset { train, test })
    }
}
