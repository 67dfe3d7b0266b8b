use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SaddleSystem, SystemLabels};
use crate::dense::spectral_norm_2;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const MAX_DRAWS: usize = 10;

/// Random SPD leading block `L Lᵀ + δ I` (δ = 1e-3·‖L Lᵀ‖₂) and a random sparse
/// full-rank `B`. Deterministic for a fixed seed.
pub fn generate_random_spd_saddle(n_u: usize, n_t: usize, seed: u64) -> Result<SaddleSystem> {
    if n_t == 0 || n_u <= n_t {
        return Err(Error::InvalidParameter(format!(
            "need n_u > n_t >= 1, got n_u={n_u} n_t={n_t}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut l_trip = Vec::new();
    for i in 0..n_u {
        l_trip.push((i, i, rng.gen_range(0.5..1.5)));
        if i > 0 {
            let k = rng.gen_range(0..=i.min(3));
            for j in sample(&mut rng, i, k).into_iter() {
                l_trip.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let l = SparseMatrix::from_triplets(n_u, n_u, &l_trip)?;
    let llt = l.spmm(&l.transpose())?;
    let delta = 1e-3 * spectral_norm_2(&llt.to_dense())?;
    let a = llt.add(&SparseMatrix::from_diagonal(&vec![delta; n_u]))?;

    for draw in 0..MAX_DRAWS {
        let mut b_trip = Vec::new();
        for col in 0..n_t {
            let k = rng.gen_range(1..=3.min(n_u));
            for row in sample(&mut rng, n_u, k).into_iter() {
                let mag = rng.gen_range(0.5..1.5);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                b_trip.push((row, col, sign * mag));
            }
        }
        let b = SparseMatrix::from_triplets(n_u, n_t, &b_trip)?;
        if b.to_dense().rank()? == n_t {
            let labels = SystemLabels {
                generator: "random_spd".into(),
                params: serde_json::json!({ "n_u": n_u, "n_t": n_t, "draws": draw + 1 }),
                seed: Some(seed),
                multiplier_weighting: None,
            };
            return SaddleSystem::new(a, b, labels);
        }
    }
    Err(Error::RankDeficient(format!(
        "B rank deficient after {MAX_DRAWS} draws (n_u={n_u}, n_t={n_t}, seed={seed})"
    )))
}
