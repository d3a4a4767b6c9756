//! Data-free training: a pool of randomized domains whose coefficients are
//! recycled from the model's own predictions, optimized minibatch by
//! minibatch on the physics-informed slab loss.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Boundary, DomainSpec, MovingCell, Physics};
use crate::error::{Error, Result};
use crate::field::{CoefficientState, FieldLayout, PdeKind};
use crate::model::{Checkpoint, PdeModel};
use crate::nn::{Architecture, NetworkCache};
use crate::optim::Adam;
use crate::residual::{draw_samples, evaluate_loss, CoefficientGradient, LossWeights, SamplePlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub pde: PdeKind,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Chance that a drawn pool entry restarts from zero coefficients.
    pub p_reset: f64,
    /// Chance that a reset also draws fresh geometry.
    pub p_regenerate: f64,
    pub steps: usize,
    pub pool_size: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub sample_plan: SamplePlan,
    pub loss_weights: LossWeights,
    /// Spatial order of `a_z` (flow) or of `z` and `v_z` (wave).
    pub spatial_order: usize,
    /// Spatial order of `p`; ignored for waves.
    #[serde(default = "default_pressure_order")]
    pub pressure_order: usize,
    pub architecture: Architecture,
    /// Factor applied to the freshly drawn output-layer parameters; 0 starts
    /// training from the identity update.
    #[serde(default = "one")]
    pub output_init_scale: f64,
    /// Save a checkpoint every this many steps (0 disables).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Where a pool entry with a non-finite loss is written.
    #[serde(default)]
    pub dump_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn default_pressure_order() -> usize {
    1
}

impl TrainConfig {
    /// Desk-scale defaults: 128x64 flow domains or 64x64 wave domains.
    pub fn default_for(pde: PdeKind) -> Self {
        let (width, height, spatial_order, architecture) = match pde {
            PdeKind::Flow => (128, 64, 2, Architecture::FLOW_DEFAULT),
            PdeKind::Wave => (64, 64, 2, Architecture::WAVE_DEFAULT),
        };
        Self {
            pde,
            batch_size: 50,
            learning_rate: 1e-4,
            p_reset: 0.02,
            p_regenerate: 0.5,
            steps: 1000,
            pool_size: 1000,
            seed: 0,
            width,
            height,
            sample_plan: SamplePlan::default(),
            loss_weights: LossWeights::default_for(pde),
            spatial_order,
            pressure_order: 1,
            architecture,
            output_init_scale: 1.0,
            checkpoint_every: 0,
            dump_dir: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn layout(&self) -> Result<FieldLayout> {
        match self.pde {
            PdeKind::Flow => FieldLayout::flow(self.spatial_order, self.pressure_order),
            PdeKind::Wave => FieldLayout::wave(self.spatial_order),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > self.pool_size {
            return Err(Error::Config(format!(
                "batch size {} must be in 1..=pool size {}",
                self.batch_size, self.pool_size
            )));
        }
        if !(self.output_init_scale >= 0.0 && self.output_init_scale.is_finite()) {
            return Err(Error::Config("output_init_scale must be finite and non-negative".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        for (name, p) in [("p_reset", self.p_reset), ("p_regenerate", self.p_regenerate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        let m = self.architecture.size_multiple();
        if self.width < 8 || self.height < 8 || !self.width.is_multiple_of(m) || !self.height.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "training grid {}x{} must be at least 8x8 and a multiple of {m}",
                self.width, self.height
            )));
        }
        if self.loss_weights.kind() != self.pde {
            return Err(Error::Config("loss weights do not match the PDE kind".into()));
        }
        self.loss_weights.validate()?;
        self.sample_plan.validate()?;
        self.layout()?;
        Ok(())
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Draws a random training domain of the given kind and size.
///
/// Flow: a closed channel with matching inflow and outflow columns (uniform
/// or parabolic, mean speed in `[0, 1.5]`), at most one obstacle (a disk of
/// radius 3 to 12, possibly spinning with `|omega| <= 0.3`, or a box),
/// `mu` log-uniform in `[0.01, 1]` and `rho` log-uniform in `[1, 10]`.
/// Wave: a closed basin with up to four oscillating cells, some of them
/// moving, `k = 10` and `delta = 0.1`.
pub fn randomize_domain<R: Rng + ?Sized>(rng: &mut R, kind: PdeKind, width: usize, height: usize) -> DomainSpec {
    match kind {
        PdeKind::Flow => random_flow(rng, width, height),
        PdeKind::Wave => random_wave(rng, width, height),
    }
}

fn random_flow<R: Rng + ?Sized>(rng: &mut R, w: usize, h: usize) -> DomainSpec {
    let physics = Physics::Flow {
        rho: log_uniform(rng, 1.0, 10.0),
        mu: log_uniform(rng, 0.01, 1.0),
        force: [0.0; 2],
    };
    let mut d = DomainSpec::closed(w, h, physics);
    let speed = rng.gen_range(0.0..=1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let inflow = if rng.gen_bool(0.5) {
        Boundary::Parabolic {
            y_lo: 0.5,
            y_hi: h as f64 - 1.5,
            u_max: 1.5 * speed,
        }
    } else {
        Boundary::Velocity { vx: speed, vy: 0.0 }
    };
    let b = d.add_boundary(inflow);
    for y in 1..h - 1 {
        d.set_solid(0, y, b);
        d.set_solid(w - 1, y, b);
    }
    match rng.gen_range(0..3) {
        0 => {}
        1 => {
            let r = rng.gen_range(3.0..=12.0f64).min((h as f64 - 6.0) / 2.0).max(1.0);
            let cx = rng.gen_range(w as f64 * 0.2..=w as f64 * 0.6);
            let cy = rng.gen_range(r + 2.0..=h as f64 - r - 3.0);
            let b = if rng.gen_bool(0.5) {
                d.add_boundary(Boundary::Rotation {
                    cx,
                    cy,
                    omega: rng.gen_range(-0.3..=0.3),
                })
            } else {
                0
            };
            d.paint_disk(cx, cy, r, b);
        }
        _ => {
            let hw = rng.gen_range(2..=(h / 6).max(2));
            let hh = rng.gen_range(2..=(h / 6).max(2));
            let cx = rng.gen_range(w / 5..=w * 3 / 5);
            let cy = rng.gen_range(hh + 2..=h - hh - 3);
            d.paint_box(cx - hw, cy - hh, cx + hw, cy + hh, 0);
        }
    }
    d
}

fn random_wave<R: Rng + ?Sized>(rng: &mut R, w: usize, h: usize) -> DomainSpec {
    let mut d = DomainSpec::closed(w, h, Physics::Wave { k: 10.0, delta: 0.1 });
    for _ in 0..rng.gen_range(0..=4) {
        let b = d.add_boundary(Boundary::Oscillator {
            amplitude: rng.gen_range(0.5..=1.5),
            omega: rng.gen_range(0.1..=1.0),
            phase: 0.0,
        });
        let x = rng.gen_range(2..w - 2);
        let y = rng.gen_range(2..h - 2);
        if rng.gen_bool(0.25) {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let speed = rng.gen_range(0.05..=0.3);
            d.movers.push(MovingCell {
                x: x as f64,
                y: y as f64,
                vx: speed * angle.cos(),
                vy: speed * angle.sin(),
                boundary: b,
            });
        } else {
            d.set_solid(x, y, b);
        }
    }
    d
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolEntry {
    pub domain: DomainSpec,
    /// Time of the stored slice.
    pub t: f64,
    pub coeffs: Vec<f32>,
    /// Times this entry was drawn since its last reset.
    pub age: u64,
}

#[derive(Debug, Clone)]
pub struct TrainingPool {
    pub entries: Vec<PoolEntry>,
}

impl TrainingPool {
    /// `size` random domains, all starting from zero coefficients.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, config: &TrainConfig, channels: usize) -> Self {
        let n = channels * config.width * config.height;
        let entries = (0..config.pool_size)
            .map(|_| PoolEntry {
                domain: randomize_domain(rng, config.pde, config.width, config.height),
                t: 0.0,
                coeffs: vec![0.0; n],
                age: 0,
            })
            .collect();
        Self { entries }
    }
}

/// Batch-mean losses of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// `L_p` for flow, `L_z` for waves.
    pub l_pde: f64,
    pub l_b: f64,
    pub l_v: f64,
    pub l_tot: f64,
    pub wallclock_ms: u128,
}

impl StepMetrics {
    /// `step, L_p|L_z, L_b, L_v, L_tot, wallclock_ms`
    pub fn log_line(&self) -> String {
        format!(
            "{}, {:.6e}, {:.6e}, {:.6e}, {:.6e}, {}",
            self.step, self.l_pde, self.l_b, self.l_v, self.l_tot, self.wallclock_ms
        )
    }
}

pub struct Trainer {
    config: TrainConfig,
    model: PdeModel<f32>,
    adam: Adam,
    pool: TrainingPool,
    rng: ChaCha8Rng,
    step: usize,
    started: Instant,
    cache: NetworkCache<f32>,
    last_batch: Vec<usize>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout()?;
        let mut model = PdeModel::new(layout, config.architecture, config.seed)?;
        let net = model.network_mut();
        let range = net.output_layer_range();
        net.params[range].iter_mut().for_each(|p| *p *= config.output_init_scale as f32);
        Self::with_model(config, model, None, 0)
    }

    /// Continues from a checkpoint with a fresh pool.
    pub fn resume(config: TrainConfig, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        if *checkpoint.model.layout() != config.layout()? {
            return Err(Error::Config("checkpoint layout differs from the config".into()));
        }
        Self::with_model(config, checkpoint.model, checkpoint.optimizer, checkpoint.step)
    }

    fn with_model(config: TrainConfig, model: PdeModel<f32>, adam: Option<Adam>, step: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let pool = TrainingPool::new(&mut rng, &config, model.layout().channels());
        let mut adam = adam.unwrap_or_else(|| Adam::new(model.network().param_count(), config.learning_rate));
        adam.lr = config.learning_rate;
        Ok(Self {
            config,
            model,
            adam,
            pool,
            rng,
            step,
            started: Instant::now(),
            cache: NetworkCache::default(),
            last_batch: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }
    pub fn model(&self) -> &PdeModel<f32> {
        &self.model
    }
    pub fn pool(&self) -> &TrainingPool {
        &self.pool
    }
    pub fn steps_done(&self) -> usize {
        self.step
    }
    /// Pool indices drawn by the most recent step.
    pub fn last_batch(&self) -> &[usize] {
        &self.last_batch
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.adam.clone()),
            step: self.step,
        }
    }

    /// One minibatch: predict, score the slab, backpropagate, update, and
    /// write the (detached) predictions back into the pool.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let cfg = &self.config;
        let batch = cfg.batch_size;
        let indices = sample(&mut self.rng, self.pool.entries.len(), batch).into_vec();
        let mut grad = vec![0.0f32; self.model.network().param_count()];
        let (mut l_pde, mut l_b, mut l_v, mut l_tot) = (0.0, 0.0, 0.0, 0.0);
        let layout = self.model.layout().clone();
        let inv = 1.0 / batch as f64;
        for &idx in &indices {
            let entry = &mut self.pool.entries[idx];
            entry.age += 1;
            if self.rng.gen_bool(cfg.p_reset) {
                if self.rng.gen_bool(cfg.p_regenerate) {
                    entry.domain = randomize_domain(&mut self.rng, cfg.pde, cfg.width, cfg.height);
                }
                entry.coeffs.fill(0.0);
                entry.t = 0.0;
                entry.age = 0;
            }
            let dt = entry.domain.dt;
            let c0: Vec<f64> = entry.coeffs.iter().map(|&v| v as f64).collect();
            let frame = entry.domain.frame(entry.t + dt);
            let pred = self.model.predict_cached(&frame, &c0, &mut self.cache)?;
            let stored: Vec<f32> = pred.iter().map(|&v| v as f32).collect();
            let c1: Vec<f64> = stored.iter().map(|&v| v as f64).collect();
            let state = CoefficientState::from_slices(layout.clone(), cfg.width, cfg.height, entry.t, dt, c0, c1)?;
            let samples = draw_samples(&frame, &cfg.sample_plan, entry.t, dt, &mut self.rng)?;
            let mut cg = CoefficientGradient::new(stored.len(), [false, true]);
            let report = evaluate_loss(&state, &frame, &samples, &cfg.loss_weights, Some(&mut cg))?;
            if !report.is_finite() || cg.slices[1].iter().any(|g| !g.is_finite()) {
                let path = dump_entry(cfg.dump_dir.as_deref(), self.step, entry)?;
                return Err(Error::NonFiniteLoss {
                    step: self.step,
                    detail: format!("pool entry {idx} written to {}", path.display()),
                });
            }
            cg.slices[1].iter_mut().for_each(|g| *g *= inv);
            self.model.backward(&mut self.cache, &cg.slices[1], &mut grad)?;
            l_pde += inv * (report.l_p + report.l_z);
            l_b += inv * report.l_b;
            l_v += inv * report.l_v;
            l_tot += inv * report.l_tot;
            entry.coeffs = stored;
            entry.t += dt;
        }
        self.adam.step(&mut self.model.network_mut().params, &grad);
        self.step += 1;
        self.last_batch = indices;
        Ok(StepMetrics {
            step: self.step,
            l_pde,
            l_b,
            l_v,
            l_tot,
            wallclock_ms: self.started.elapsed().as_millis(),
        })
    }
}

fn dump_entry(dir: Option<&Path>, step: usize, entry: &PoolEntry) -> Result<PathBuf> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("nonfinite_entry_step{step}.json"));
    std::fs::write(&path, serde_json::to_vec(entry)?)?;
    Ok(path)
}

/// Result of [`train`].
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<StepMetrics>,
}

/// Runs `config.steps` optimizer steps, writing one metrics line per step
/// to `log` and periodic checkpoints to `checkpoint_path`.
pub fn train(config: TrainConfig, mut log: Option<&mut dyn Write>, checkpoint_path: Option<&Path>) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config)?;
    let every = trainer.config.checkpoint_every;
    let mut metrics = Vec::with_capacity(trainer.config.steps);
    for _ in 0..trainer.config.steps {
        let m = trainer.step()?;
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{}", m.log_line())?;
        }
        if let Some(path) = checkpoint_path {
            if every > 0 && m.step % every == 0 {
                trainer.checkpoint().save(path)?;
            }
        }
        metrics.push(m);
    }
    let checkpoint = trainer.checkpoint();
    if let Some(path) = checkpoint_path {
        checkpoint.save(path)?;
    }
    Ok(TrainOutcome { checkpoint, metrics })
}

/// Median of `values`; `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(pde: PdeKind) -> TrainConfig {
        let mut c = TrainConfig::default_for(pde);
        c.width = 16;
        c.height = 16;
        c.pool_size = 6;
        c.batch_size = 3;
        c.steps = 2;
        c.architecture = match pde {
            PdeKind::Flow => Architecture::UNet { base: 2, depth: 2 },
            PdeKind::Wave => Architecture::Plain { hidden: 4, layers: 2 },
        };
        c
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let c = TrainConfig::default_for(PdeKind::Flow);
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let mut bad = c.clone();
        bad.batch_size = bad.pool_size + 1;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.width = 100;
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<TrainConfig>("{\"pde\":\"flow\",\"bogus\":1}").is_err());
    }

    #[test]
    fn same_seed_same_domain() {
        for kind in [PdeKind::Flow, PdeKind::Wave] {
            let a = randomize_domain(&mut ChaCha8Rng::seed_from_u64(4), kind, 64, 32);
            let b = randomize_domain(&mut ChaCha8Rng::seed_from_u64(4), kind, 64, 32);
            assert_eq!(a, b);
            a.validate().unwrap();
        }
    }

    #[test]
    fn pool_write_back_is_the_prediction() {
        let mut t = Trainer::new(tiny(PdeKind::Wave)).unwrap();
        t.step().unwrap();
        let before = t.pool().clone();
        let model = t.model().clone();
        t.step().unwrap();
        for &i in t.last_batch() {
            let old = &before.entries[i];
            let new = &t.pool().entries[i];
            if new.age == 0 {
                continue;
            }
            assert_eq!(new.age, old.age + 1);
            let c0: Vec<f64> = old.coeffs.iter().map(|&v| v as f64).collect();
            let pred = model.predict(&old.domain.frame(old.t + 1.0), &c0).unwrap();
            let expect: Vec<f32> = pred.iter().map(|&v| v as f32).collect();
            assert_eq!(new.coeffs, expect);
        }
    }

    #[test]
    fn full_reset_keeps_coefficients_at_zero_input() {
        let mut c = tiny(PdeKind::Flow);
        c.p_reset = 1.0;
        let mut t = Trainer::new(c).unwrap();
        for _ in 0..2 {
            t.step().unwrap();
            for &i in t.last_batch() {
                assert_eq!(t.pool().entries[i].age, 0);
                assert_eq!(t.pool().entries[i].t, 1.0);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let out = train(tiny(PdeKind::Flow), None, None).unwrap();
            out.metrics.iter().map(|m| m.l_tot).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
