mod common;

use common::{classical_rk4, expm_populations, period_average_quadrature, uniform};
use trimode::classical::{sample_initial, trajectory_from_initial, TrajectoryKind};
use trimode::fock::Block;
use trimode::unitary::BlockHamiltonian;

fn small_blocks(max_dim: usize) -> Vec<Block> {
    let mut out = Vec::new();
    for n in 0..=12 {
        for m in 0..=12 {
            let b = Block::new(n, m);
            if b.dim() <= max_dim {
                out.push(b);
            }
        }
    }
    out
}

#[test]
fn block_propagation_matches_matrix_exponential() {
    let times = [0.0, 0.05, 0.4, 1.3, 4.7, 10.0];
    for block in small_blocks(6) {
        let d = block.dim();
        let eig = BlockHamiltonian::<f64>::new(block).diagonalize().unwrap();
        // Uneven populations so every basis state contributes.
        let raw: Vec<f64> = (0..d).map(|k| 1.0 + k as f64 * 0.37).collect();
        let total: f64 = raw.iter().sum();
        let p0: Vec<f64> = raw.iter().map(|x| x / total).collect();
        for &t in &times {
            let ours = eig.populations_at(&p0, t);
            let reference = expm_populations(block, &p0, t);
            for (a, b) in ours.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-10, "block {block:?} t={t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn closed_form_trajectories_match_hamilton_equations() {
    let times = uniform(5.0, 0.25);
    for i in 0..20 {
        let p = sample_initial(42, i, [0.8f64, 1.5, 1.2]).unwrap();
        let traj = trajectory_from_initial(&p).unwrap();
        let scale = (p.iota.iter().sum::<f64>()).max(1.0);
        let reference = classical_rk4(p.amplitudes(), &times, 2e-4 / scale.sqrt());
        for (t, r) in times.iter().zip(&reference) {
            let ours = traj.actions_at(*t);
            for k in 0..3 {
                assert!((ours[k] - r[k]).abs() < 1e-6, "trajectory {i} t={t}: {ours:?} vs {r:?}");
            }
        }
    }
}

#[test]
fn time_average_matches_period_quadrature() {
    for i in 0..20 {
        let p = sample_initial(7, i, [1.0f64, 5.0, 2.0]).unwrap();
        let traj = trajectory_from_initial(&p).unwrap();
        if traj.kind != TrajectoryKind::Oscillating {
            continue;
        }
        let r = traj.roots;
        let quad = period_average_quadrature(r.a, r.b, r.c, 4000);
        let ours = traj.time_average().unwrap();
        assert!((ours - quad).abs() < 1e-8 * quad.max(1.0), "{ours} vs {quad}");
    }
}
