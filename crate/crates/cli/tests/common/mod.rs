#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use second_order::{save_embeddings, EmbeddingSet, Vocabulary};

/// `n` words around `components` random centers, each component with its
/// own spread so that some regions are much denser than others.
pub fn gaussian_mixture(n: usize, dim: usize, components: usize, seed: u64) -> EmbeddingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let centers: Vec<Vec<f64>> = (0..components)
        .map(|_| (0..dim).map(|_| normal(&mut rng)).collect())
        .collect();
    let spreads: Vec<f64> = (0..components)
        .map(|_| rng.random_range(0.2..1.5))
        .collect();
    let mut matrix = Vec::with_capacity(n * dim);
    for i in 0..n {
        let c = i % components;
        for x in &centers[c] {
            matrix.push(x + spreads[c] * normal(&mut rng));
        }
    }
    let vocab = Vocabulary::new((0..n).map(|i| format!("w{i}"))).unwrap();
    EmbeddingSet::new(vocab, matrix, dim).unwrap()
}

pub fn write_mixture(path: &Path, n: usize, dim: usize, components: usize, seed: u64) {
    save_embeddings(&gaussian_mixture(n, dim, components, seed), path).unwrap();
}
