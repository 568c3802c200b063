//! Monte Carlo runs of the honest protocol, per round and in blocks.
//!
//! Randomness comes from ChaCha8 seeded with the master seed; trial `i` reads
//! stream `i`, and rounds consume the stream sequentially, so the position in
//! the stream plays the role of the round counter. A single run uses stream 0.
//!
//! Each round draws, in order: the test flag `T ~ Bernoulli(γ)`; in a test
//! round the inputs `(x, y)` uniform on `{0,1}²`, the win flag
//! `W ~ Bernoulli(ω_exp)` and Alice's bit; in a generation round Alice's bit
//! and the agreement flag `A = B ~ Bernoulli(1−Q)`. Bob's bit is then fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eat::{round_count_tail, BlockSpec};
use crate::error::{Error, Result};

/// Inputs used in generation rounds.
pub const GENERATION_INPUTS: (usize, usize) = (0, 2);

/// z-value of a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HonestDevice {
    pub omega_exp: f64,
    pub qber: f64,
}

impl HonestDevice {
    pub fn new(omega_exp: f64, qber: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega_exp) || !(0.0..=1.0).contains(&qber) {
            return Err(Error::Domain(format!("omega_exp={omega_exp}, qber={qber} must lie in [0,1]")));
        }
        Ok(Self { omega_exp, qber })
    }

    /// Werner-state statistics at QBER `Q`.
    pub fn werner(qber: f64) -> Result<Self> {
        Self::new(crate::keyrates::werner_omega(qber)?, qber)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub t: bool,
    pub x: usize,
    pub y: usize,
    pub a: u8,
    pub b: u8,
    /// `None` exactly in generation rounds.
    pub w: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockRecord {
    pub len: u32,
    /// `None` when the block ran to `s_max` without a test.
    pub w: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    pub aborted: bool,
    pub win_count: u64,
    pub generation_rounds: u64,
    pub disagreements: u64,
    /// Present for block runs.
    pub blocks: Option<Vec<BlockRecord>>,
}

fn draw_round<R: Rng>(rng: &mut R, gamma: f64, dev: &HonestDevice) -> RoundRecord {
    let t = rng.random_bool(gamma);
    if t {
        let x = rng.random_range(0..2usize);
        let y = rng.random_range(0..2usize);
        let w = rng.random_bool(dev.omega_exp);
        let a: u8 = rng.random_range(0..2);
        let b = a ^ u8::from((x & y == 1) != !w);
        RoundRecord { t, x, y, a, b, w: Some(w) }
    } else {
        let a: u8 = rng.random_range(0..2);
        let agree = rng.random_bool(1.0 - dev.qber);
        let (x, y) = GENERATION_INPUTS;
        RoundRecord { t, x, y, a, b: if agree { a } else { 1 - a }, w: None }
    }
}

fn check_threshold_params(omega_exp: f64, delta_est: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&omega_exp) || !(delta_est >= 0.0) {
        return Err(Error::Domain(format!("need omega_exp in [0,1] and delta_est >= 0, got {omega_exp}, {delta_est}")));
    }
    Ok(())
}

/// Parameters of a per-round run. `omega_exp` and `delta_est` set the
/// abort threshold; the device may behave differently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub n: u64,
    pub gamma: f64,
    pub omega_exp: f64,
    pub delta_est: f64,
    pub device: HonestDevice,
}

impl ProtocolConfig {
    pub fn new(n: u64, gamma: f64, omega_exp: f64, delta_est: f64, device: HonestDevice) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma {gamma} not in (0,1]")));
        }
        check_threshold_params(omega_exp, delta_est)?;
        Ok(Self { n, gamma, omega_exp, delta_est, device })
    }

    /// Threshold set from the device's own winning probability.
    pub fn honest(n: u64, gamma: f64, delta_est: f64, device: HonestDevice) -> Result<Self> {
        Self::new(n, gamma, device.omega_exp, delta_est, device)
    }

    /// Abort iff the win count is below this.
    pub fn threshold(&self) -> f64 {
        (self.omega_exp * self.gamma - self.delta_est) * self.n as f64
    }

    /// `exp(−2nδ²)`.
    pub fn hoeffding_bound(&self) -> f64 {
        (-2.0 * self.n as f64 * self.delta_est * self.delta_est).exp()
    }
}

/// Parameters of a block run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockConfig {
    pub m_blocks: u64,
    pub block: BlockSpec,
    pub omega_exp: f64,
    pub delta_est: f64,
    pub device: HonestDevice,
}

impl BlockConfig {
    pub fn new(m_blocks: u64, block: BlockSpec, omega_exp: f64, delta_est: f64, device: HonestDevice) -> Result<Self> {
        check_threshold_params(omega_exp, delta_est)?;
        Ok(Self { m_blocks, block, omega_exp, delta_est, device })
    }

    pub fn honest(m_blocks: u64, block: BlockSpec, delta_est: f64, device: HonestDevice) -> Result<Self> {
        Self::new(m_blocks, block, device.omega_exp, delta_est, device)
    }

    pub fn threshold(&self) -> f64 {
        (self.omega_exp * self.block.test_probability() - self.delta_est) * self.m_blocks as f64
    }

    /// `exp(−2mδ²)`.
    pub fn hoeffding_bound(&self) -> f64 {
        (-2.0 * self.m_blocks as f64 * self.delta_est * self.delta_est).exp()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn per_round<R: Rng>(cfg: &ProtocolConfig, rng: &mut R, mut sink: impl FnMut(RoundRecord)) -> (u64, bool) {
    let mut wins = 0u64;
    for _ in 0..cfg.n {
        let r = draw_round(rng, cfg.gamma, &cfg.device);
        wins += u64::from(r.w == Some(true));
        sink(r);
    }
    (wins, (wins as f64) < cfg.threshold())
}

/// Runs blocks, returning `(wins, total rounds, aborted)`.
fn per_block<R: Rng>(cfg: &BlockConfig, rng: &mut R, mut sink: impl FnMut(RoundRecord), mut block_sink: impl FnMut(BlockRecord)) -> (u64, u64, bool) {
    let mut wins = 0u64;
    let mut rounds = 0u64;
    for _ in 0..cfg.m_blocks {
        let mut len = 0;
        let mut w = None;
        while len < cfg.block.s_max {
            let r = draw_round(rng, cfg.block.gamma, &cfg.device);
            len += 1;
            let test = r.w;
            sink(r);
            if test.is_some() {
                w = test;
                break;
            }
        }
        rounds += u64::from(len);
        wins += u64::from(w == Some(true));
        block_sink(BlockRecord { len, w });
    }
    (wins, rounds, (wins as f64) < cfg.threshold())
}

fn tally(rounds: &[RoundRecord]) -> (u64, u64) {
    let gen: Vec<_> = rounds.iter().filter(|r| !r.t).collect();
    (gen.len() as u64, gen.iter().filter(|r| r.a != r.b).count() as u64)
}

/// One per-round run with full transcript.
pub fn run_protocol(cfg: &ProtocolConfig, seed: u64) -> Transcript {
    let mut rng = stream_rng(seed, 0);
    let mut rounds = Vec::with_capacity(cfg.n as usize);
    let (win_count, aborted) = per_round(cfg, &mut rng, |r| rounds.push(r));
    let (generation_rounds, disagreements) = tally(&rounds);
    Transcript { rounds, aborted, win_count, generation_rounds, disagreements, blocks: None }
}

/// One block run with full transcript.
pub fn run_protocol_blocks(cfg: &BlockConfig, seed: u64) -> Transcript {
    let mut rng = stream_rng(seed, 0);
    let mut rounds = Vec::new();
    let mut blocks = Vec::with_capacity(cfg.m_blocks as usize);
    let (win_count, _, aborted) = per_block(cfg, &mut rng, |r| rounds.push(r), |b| blocks.push(b));
    let (generation_rounds, disagreements) = tally(&rounds);
    Transcript { rounds, aborted, win_count, generation_rounds, disagreements, blocks: Some(blocks) }
}

/// Empirical frequency with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub trials: u64,
    pub hits: u64,
    pub freq: f64,
    pub ci: (f64, f64),
}

impl Frequency {
    pub fn new(hits: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(hits, trials, Z95);
        Self { trials, hits, freq: hits as f64 / trials as f64, ci: (lo, hi) }
    }

    /// Binomial standard deviation of the frequency at rate `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbortEstimate {
    #[serde(flatten)]
    pub frequency: Frequency,
    pub hoeffding_bound: f64,
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    Ok(())
}

/// Abort frequency over `trials` independent per-round runs.
pub fn estimate_abort_probability(cfg: &ProtocolConfig, trials: u64, master_seed: u64) -> Result<AbortEstimate> {
    check_trials(trials)?;
    let aborts = (0..trials)
        .into_par_iter()
        .filter(|&i| per_round(cfg, &mut stream_rng(master_seed, i), |_| {}).1)
        .count() as u64;
    Ok(AbortEstimate { frequency: Frequency::new(aborts, trials), hoeffding_bound: cfg.hoeffding_bound() })
}

/// Abort frequency over `trials` independent block runs.
pub fn estimate_abort_probability_blocks(cfg: &BlockConfig, trials: u64, master_seed: u64) -> Result<AbortEstimate> {
    check_trials(trials)?;
    let aborts = (0..trials)
        .into_par_iter()
        .filter(|&i| per_block(cfg, &mut stream_rng(master_seed, i), |_| {}, |_| {}).2)
        .count() as u64;
    Ok(AbortEstimate { frequency: Frequency::new(aborts, trials), hoeffding_bound: cfg.hoeffding_bound() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundCountStats {
    /// `n̄ = m·s̄`.
    pub expected_rounds: f64,
    pub tail_width: f64,
    pub eps_t: f64,
    pub mean_rounds: f64,
    /// Frequency of `N > n̄ + t`.
    #[serde(flatten)]
    pub tail: Frequency,
}

/// Distribution of the total round count over `trials` block runs.
pub fn round_count_statistics(m_blocks: u64, block: &BlockSpec, device: &HonestDevice, eps_t: f64, trials: u64, seed: u64) -> Result<RoundCountStats> {
    check_trials(trials)?;
    let t = round_count_tail(m_blocks as f64, block.gamma, eps_t)?;
    let cfg = BlockConfig::honest(m_blocks, *block, 0.0, *device)?;
    let n_bar = m_blocks as f64 * block.expected_length();
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|i| per_block(&cfg, &mut stream_rng(seed, i), |_| {}, |_| {}).1)
        .collect();
    let hits = counts.iter().filter(|&&n| n as f64 > n_bar + t).count() as u64;
    let mean_rounds = counts.iter().sum::<u64>() as f64 / trials as f64;
    Ok(RoundCountStats { expected_rounds: n_bar, tail_width: t, eps_t, mean_rounds, tail: Frequency::new(hits, trials) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_devices() {
        let perfect = HonestDevice::new(1.0, 0.0).unwrap();
        let cfg = ProtocolConfig::honest(1000, 1.0, 0.01, perfect).unwrap();
        let t = run_protocol(&cfg, 1);
        assert!(!t.aborted);
        assert_eq!(t.win_count, 1000);
        let losing = HonestDevice::new(0.0, 0.0).unwrap();
        let cfg = ProtocolConfig::new(1000, 1.0, 0.8, 0.01, losing).unwrap();
        assert!(cfg.threshold() > 0.0);
        assert!(run_protocol(&cfg, 1).aborted);
    }

    #[test]
    fn transcript_consistency() {
        let dev = HonestDevice::new(0.85, 0.05).unwrap();
        let cfg = ProtocolConfig::honest(2000, 0.3, 0.02, dev).unwrap();
        let t = run_protocol(&cfg, 9);
        for r in &t.rounds {
            assert_eq!(r.w.is_none(), !r.t);
            if let Some(w) = r.w {
                assert_eq!(w, (r.a ^ r.b) as usize == r.x * r.y);
            }
        }
        assert_eq!(t, run_protocol(&cfg, 9));
        assert_ne!(t.rounds, run_protocol(&cfg, 10).rounds);
    }

    #[test]
    fn single_round_blocks_match() {
        let dev = HonestDevice::new(0.8, 0.02).unwrap();
        let cfg = ProtocolConfig::honest(500, 0.25, 0.01, dev).unwrap();
        let bcfg = BlockConfig::honest(500, BlockSpec::new(0.25, 1).unwrap(), 0.01, dev).unwrap();
        let a = run_protocol(&cfg, 4);
        let b = run_protocol_blocks(&bcfg, 4);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.win_count, b.win_count);
        assert_eq!(a.aborted, b.aborted);
    }

    #[test]
    fn gamma_one_blocks() {
        let dev = HonestDevice::new(0.8, 0.0).unwrap();
        let s = round_count_statistics(200, &BlockSpec::new(1.0, 5).unwrap(), &dev, 0.1, 20, 3).unwrap();
        assert_eq!(s.mean_rounds, 200.0);
        assert_eq!(s.tail.hits, 0);
    }

    #[test]
    fn wilson_basics() {
        let (lo, hi) = wilson_interval(0, 500, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5 && ((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
    }
}
