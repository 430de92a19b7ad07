use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PoseNet;
use crate::error::{invalid, Error, Result};
use crate::voxel::VoxelField;

/// One training example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub audio: Vec<VoxelField>,
    pub visual: Option<VoxelField>,
    pub target: VoxelField,
}

/// Mean pre-update sample loss per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("{},{l:e}\n", i + 1));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Per-sample SGD. The visiting order is reshuffled every epoch from the
/// network's seed, so identical inputs give identical logs.
pub fn train_sgd(net: &mut PoseNet, dataset: &[Sample], epochs: usize, lr: f64) -> Result<TrainingLog> {
    if dataset.is_empty() {
        return Err(invalid("training set is empty"));
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(invalid(format!("learning rate must be finite and non-negative, got {lr}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(net.config().seed ^ 0x005e_ed0f_5a4d_u64);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let s = &dataset[i];
            let trace = net.forward_trace(&s.audio, s.visual.as_ref())?;
            let (loss, grads) = net.backward(&trace, &s.target)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, sample: i, loss });
            }
            total += loss;
            if lr > 0.0 {
                net.apply_gradients(&grads, lr)?;
            }
        }
        log.epoch_losses.push(total / dataset.len() as f64);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vec3;
    use crate::network::{make_target, PoseNetConfig};
    use crate::voxel::VoxelGrid;
    use rand::Rng;

    fn fixture(n: usize, seed: u64) -> (PoseNetConfig, Vec<Sample>) {
        let g = VoxelGrid::new(vec3([0.0; 3]), 0.1, [5, 5, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| {
                let p = vec3([rng.random_range(0.1..0.4), rng.random_range(0.1..0.4), rng.random_range(0.1..0.3)]);
                let target = make_target(&[p], &g, 0.1).unwrap();
                let audio = (0..2)
                    .map(|_| {
                        let noise: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() * 0.1).collect();
                        let v = target.values().iter().zip(&noise).map(|(t, n)| t + n).collect();
                        VoxelField::new(g, 1, v).unwrap()
                    })
                    .collect();
                Sample { audio, visual: Some(target.clone()), target }
            })
            .collect();
        let cfg = PoseNetConfig {
            landmarks: 1,
            visual_channels: 1,
            stages: 2,
            stem_widths: vec![2, 2],
            stage_widths: vec![4],
            kernel_size: 3,
            learning_rate: 0.05,
            seed: 9,
        };
        (cfg, samples)
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let (cfg, data) = fixture(3, 1);
        let mut net = PoseNet::new(cfg).unwrap();
        let before = net.clone();
        let log = train_sgd(&mut net, &data, 3, 0.0).unwrap();
        assert_eq!(net, before);
        assert!(log.epoch_losses.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn same_seed_same_log() {
        let (cfg, data) = fixture(4, 2);
        let mut a = PoseNet::new(cfg.clone()).unwrap();
        let mut b = PoseNet::new(cfg).unwrap();
        let la = train_sgd(&mut a, &data, 3, 0.05).unwrap();
        let lb = train_sgd(&mut b, &data, 3, 0.05).unwrap();
        assert_eq!(la.to_csv(), lb.to_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn overfits_single_sample() {
        let (cfg, data) = fixture(1, 3);
        let mut net = PoseNet::new(cfg).unwrap();
        let log = train_sgd(&mut net, &data, 200, 0.05).unwrap();
        let l = &log.epoch_losses;
        assert!(l[199] < 0.1 * l[0], "{} vs {}", l[199], l[0]);
        assert!(l[5..].windows(2).all(|w| w[1] <= w[0]), "{l:?}");
    }

    #[test]
    fn divergence_is_reported() {
        let (cfg, data) = fixture(2, 4);
        let mut net = PoseNet::new(cfg).unwrap();
        match train_sgd(&mut net, &data, 50, 1e6) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let (cfg, data) = fixture(1, 5);
        let mut net = PoseNet::new(cfg).unwrap();
        assert!(train_sgd(&mut net, &[], 1, 0.1).is_err());
        assert!(train_sgd(&mut net, &data, 1, f64::NAN).is_err());
        assert!(TrainingLog { epoch_losses: vec![0.5] }.to_csv().starts_with("epoch,loss\n1,"));
    }
}
