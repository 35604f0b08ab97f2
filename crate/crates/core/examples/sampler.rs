//! The Metropolis-Hastings velocity sampler on its own.
//!
//! Draws from a two-well energy over the unit speed disk with a random-walk
//! chain and prints a coarse density map next to the exact one, then shows
//! the per-tick estimator (mean of post-burn-in samples) on a quadratic bowl.

use grfswarm::sampler::{sample_velocity, ProposalMode, SamplerParams, VelocityChain};
use grfswarm::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn energy(v: Vec2) -> f64 {
    let well = |c: Vec2, s: f64| (-(v - c).norm_sq() / (2.0 * s * s)).exp();
    -(well(Vec2::new(-0.4, 0.0), 0.15) + 0.5 * well(Vec2::new(0.35, 0.2), 0.12)).ln()
}

const CELLS: usize = 8;

fn cell(v: Vec2) -> Option<(usize, usize)> {
    let f = |x: f64| ((x + 1.0) / 2.0 * CELLS as f64).floor();
    let (i, j) = (f(v.x), f(v.y));
    (i >= 0.0 && j >= 0.0 && i < CELLS as f64 && j < CELLS as f64).then(|| (i as usize, j as usize))
}

fn print_map(title: &str, m: &[[f64; CELLS]; CELLS]) {
    let total: f64 = m.iter().flatten().sum();
    println!("{title}");
    for j in (0..CELLS).rev() {
        let row: String = (0..CELLS).map(|i| format!("{:5.1}", 100.0 * m[i][j] / total)).collect();
        println!("  {row}");
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SamplerParams {
        proposal_sigma: Some(0.25),
        proposal_mode: ProposalMode::Walk,
        ..Default::default()
    }
    .resolve(1.0);

    let mut chain = VelocityChain::new(Vec2::ZERO, &energy, &cfg);
    let mut hist = [[0.0; CELLS]; CELLS];
    let mut accepted = 0;
    let steps = 400_000;
    for _ in 0..steps {
        accepted += chain.step(&energy, &mut rng) as usize;
        if let Some((i, j)) = cell(chain.state()) {
            hist[i][j] += 1.0;
        }
    }
    println!("acceptance {:.2}", accepted as f64 / steps as f64);

    let mut exact = [[0.0; CELLS]; CELLS];
    let n = 400;
    for a in 0..n {
        for b in 0..n {
            let v = Vec2::new(-1.0 + 2.0 * (a as f64 + 0.5) / n as f64, -1.0 + 2.0 * (b as f64 + 0.5) / n as f64);
            if v.norm() <= 1.0 {
                if let Some((i, j)) = cell(v) {
                    exact[i][j] += (-energy(v)).exp();
                }
            }
        }
    }
    print_map("sampled (% per cell)", &hist);
    print_map("exact (% per cell)", &exact);

    let target = Vec2::new(0.3, 0.0);
    let bowl_cfg = SamplerParams { iterations: 200, ..Default::default() }.resolve(1.0);
    let out = sample_velocity(Vec2::ZERO, |v| 50.0 * (v - target).norm_sq(), &bowl_cfg, &mut rng);
    println!("bowl centred at {target:?}: estimate {:?}, {} accepted", out.velocity, out.accepted);
}
