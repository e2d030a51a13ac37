use serde::{Deserialize, Serialize};

/// Objective weights and guidance behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub w_reproj: f64,
    pub w_inter: f64,
    pub w_temp: f64,
    /// Weight of the planner's contact-schedule term (zero outside `plan`).
    pub w_contact: f64,
    /// Norm bound applied to the combined normalized-space gradient.
    pub clip_norm: f64,
    /// Sampling step count (uniformly strided).
    pub sample_steps: usize,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            w_reproj: 1.0,
            w_inter: 0.5,
            w_temp: 0.1,
            w_contact: 0.0,
            clip_norm: 1.0,
            sample_steps: 50,
        }
    }
}

impl GuidanceConfig {
    pub fn zero_weights(mut self) -> Self {
        self.w_reproj = 0.0;
        self.w_inter = 0.0;
        self.w_temp = 0.0;
        self.w_contact = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), crate::GuidanceError> {
        if self.w_reproj < 0.0 || self.w_inter < 0.0 || self.w_temp < 0.0 || self.w_contact < 0.0 {
            return Err(crate::GuidanceError::Config("weights must be >= 0".into()));
        }
        if self.clip_norm <= 0.0 {
            return Err(crate::GuidanceError::Config("clip norm must be > 0".into()));
        }
        Ok(())
    }
}
