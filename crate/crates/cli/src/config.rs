//! Experiment configuration: JSON with every field optional. Defaults
//! reproduce the reference experiment (monopole at (2.5, 0, 0), microphone
//! plane at x = 2 bounded by |y| <= 2, |z| <= 1.15, K = 3, beta = 0.7,
//! mu = 0.18, 50 rays per simplex).

use std::path::PathBuf;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use sonoshape::acoustics::{Microphone, Monopole, Scene};
use sonoshape::optimizer::{OptimizerParams, SearchMode};
use sonoshape::solver::SolverSettings;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        // 26 vertices / 48 simplices: inside the ~50-element budget the
        // annealing backends are sized for.
        MeshConfig { n_theta: 6, n_phi: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrophoneConfig {
    pub center: DVec3,
    pub half_axis_u: DVec3,
    pub half_axis_v: DVec3,
}

impl Default for MicrophoneConfig {
    fn default() -> Self {
        MicrophoneConfig {
            center: DVec3::new(2.0, 0.0, 0.0),
            half_axis_u: DVec3::new(0.0, 2.0, 0.0),
            half_axis_v: DVec3::new(0.0, 0.0, 1.15),
        }
    }
}

/// Optimizer settings without the solver block, which lives at the top
/// level of the experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub k: usize,
    pub beta: f64,
    pub mu: f64,
    pub iterations: usize,
    pub search_mode: SearchMode,
    pub rays_per_simplex: u32,
    pub seed: u64,
    pub infeasible_retries: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let p = OptimizerParams::default();
        OptimizerConfig {
            k: p.k,
            beta: p.beta,
            mu: p.mu,
            iterations: p.iterations,
            search_mode: p.search_mode,
            rays_per_simplex: p.rays_per_simplex,
            seed: p.seed,
            infeasible_retries: p.infeasible_retries,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshConfig,
    pub monopole: MonopoleConfig,
    pub microphone: MicrophoneConfig,
    pub optimizer: OptimizerConfig,
    pub solver: SolverSettings,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonopoleConfig(pub DVec3);

impl Default for MonopoleConfig {
    fn default() -> Self {
        MonopoleConfig(DVec3::new(2.5, 0.0, 0.0))
    }
}

impl ExperimentConfig {
    pub fn scene(&self) -> Scene {
        Scene {
            monopole: Monopole { position: self.monopole.0 },
            microphone: Microphone {
                center: self.microphone.center,
                half_axis_u: self.microphone.half_axis_u,
                half_axis_v: self.microphone.half_axis_v,
            },
        }
    }

    pub fn optimizer_params(&self) -> OptimizerParams {
        OptimizerParams {
            k: self.optimizer.k,
            beta: self.optimizer.beta,
            mu: self.optimizer.mu,
            iterations: self.optimizer.iterations,
            search_mode: self.optimizer.search_mode,
            rays_per_simplex: self.optimizer.rays_per_simplex,
            seed: self.optimizer.seed,
            solver: self.solver.clone(),
            infeasible_retries: self.optimizer.infeasible_retries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_experiment() {
        let config = ExperimentConfig::default();
        assert_eq!(config.monopole.0, DVec3::new(2.5, 0.0, 0.0));
        assert_eq!(config.optimizer.k, 3);
        assert_eq!(config.optimizer.beta, 0.7);
        assert_eq!(config.optimizer.mu, 0.18);
        assert_eq!(config.optimizer.rays_per_simplex, 50);
        assert_eq!(config.microphone.half_axis_v, DVec3::new(0.0, 0.0, 1.15));
    }

    #[test]
    fn empty_json_parses_to_defaults() {
        let config: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config.mesh.n_theta, 6);
        assert!(config.output_dir.is_none());
    }

    #[test]
    fn partial_overrides_keep_other_defaults() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"monopole": [0.0, 3.0, 2.0], "optimizer": {"beta": 0.3}}"#,
        )
        .unwrap();
        assert_eq!(config.monopole.0, DVec3::new(0.0, 3.0, 2.0));
        assert_eq!(config.optimizer.beta, 0.3);
        assert_eq!(config.optimizer.mu, 0.18);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"typo_field": 1}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let config = ExperimentConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.optimizer.seed, config.optimizer.seed);
        assert_eq!(back.microphone.center, config.microphone.center);
    }
}
