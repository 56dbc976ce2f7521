#![allow(dead_code)]

use ratesplit_core::{Ket, Operator, RngStream, Signature, StreamRng};

pub fn rng(seed: u64) -> StreamRng {
    RngStream::new(seed, 0).rng()
}

pub fn sig(legs: &[(&str, usize)]) -> Signature {
    Signature::new(legs.iter().copied()).unwrap()
}

pub fn random_ket(legs: &[(&str, usize)], rng: &mut StreamRng) -> Ket {
    Ket::random(sig(legs), rng)
}

/// Marginal on `legs` of a random pure state with an extra environment of
/// dimension `env`.
pub fn random_density(legs: &[(&str, usize)], env: usize, rng: &mut StreamRng) -> Operator {
    let mut all = legs.to_vec();
    all.push(("Env_", env));
    let keep: Vec<&str> = legs.iter().map(|l| l.0).collect();
    random_ket(&all, rng).reduced(&keep).unwrap()
}

pub fn basis_density(name: &str, dim: usize, k: usize) -> Operator {
    Ket::basis(Signature::single(name, dim).unwrap(), &[k]).unwrap().density()
}
