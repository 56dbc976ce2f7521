//! Seeded configurations for the decoupling experiments.
//!
//! Configuration randomness draws from stream [`CONFIG_STREAM`] of the seed,
//! so it never overlaps the per-trial streams `0..trials`.

use ratesplit_core::decoupling::{HaarSetup, SingleSetup};
use ratesplit_core::{decoupling, Channel, Error, Ket, Result, RngStream, Signature, StreamRng};

pub const CONFIG_STREAM: u64 = u64::MAX;

fn random_ket(legs: &[(&str, usize)], rng: &mut StreamRng) -> Result<Ket> {
    Ok(Ket::random(Signature::new(legs.iter().copied())?, rng))
}

/// Single-sender check: `ρ_AE` is the `(A, E)` marginal of a random pure
/// state on `A, E, F`, and the map `A → R` is either `channel` (one input of
/// dimension `dim`) or a random channel with two Kraus operators.
pub fn single(seed: u64, dim: usize, env_dim: usize, channel: Option<&Channel>) -> Result<SingleSetup> {
    let mut rng = RngStream::new(seed, CONFIG_STREAM).rng();
    let pure = random_ket(&[("A", dim), ("E", env_dim), ("F", 2)], &mut rng)?;
    let rho = pure.reduced(&["A", "E"])?;
    let map = match channel {
        Some(ch) => {
            if ch.inputs().len() != 1 || ch.outputs().len() != 1 {
                return Err(Error::BadPartition("the single-sender check needs a one-input, one-output map".into()));
            }
            ch.with_ports(&["A"], &["R"])?.map().clone()
        }
        None => Channel::random("random", Signature::single("A", dim)?, Signature::single("R", dim)?, 2, &mut rng)?
            .map()
            .clone(),
    };
    Ok(SingleSetup { rho, a: vec!["A".into()], map })
}

fn qmac_channel(channel: Option<&Channel>, rng: &mut StreamRng) -> Result<Channel> {
    match channel {
        Some(ch) => {
            if ch.inputs().len() != 2 || ch.outputs().len() != 1 {
                return Err(Error::BadPartition("Haar checks need a two-input, one-output channel".into()));
            }
            ch.with_ports(&["Ap", "Bp"], &["C"])
        }
        None => Channel::random(
            "random",
            Signature::new([("Ap", 2), ("Bp", 2)])?,
            Signature::single("C", 2)?,
            2,
            rng,
        ),
    }
}

/// One Haar unitary on the helper `B` and one on the sender `A`: random
/// control on `(A, B, Ap, Bp)`, `ψ` on `(A, R1)`, `φ` on `(B, R2)`.
pub fn onehaar(seed: u64, channel: Option<&Channel>) -> Result<HaarSetup> {
    let mut rng = RngStream::new(seed, CONFIG_STREAM).rng();
    let ch = qmac_channel(channel, &mut rng)?;
    let (da, db) = (ch.inputs().dim_of("Ap")?, ch.inputs().dim_of("Bp")?);
    let control = random_ket(&[("A", 2), ("B", 2), ("Ap", da), ("Bp", db)], &mut rng)?;
    let psi = random_ket(&[("A", 2), ("R1", 2)], &mut rng)?;
    let phi = random_ket(&[("B", 2), ("R2", 2)], &mut rng)?;
    Ok(decoupling::onehaar_setup(&control, &["A"], &psi, &["B"], &phi, &ch))
}

/// Independent Haar unitaries on `A1` and `B`, sender `A0`: random control on
/// `(A0, A1, B, Ap, Bp)`, `η` on `(A0, R0)`, transmitted state
/// `ψ^{A1 R1} ⊗ φ^{B R2}`.
pub fn twohaar(seed: u64, channel: Option<&Channel>) -> Result<HaarSetup> {
    let mut rng = RngStream::new(seed, CONFIG_STREAM).rng();
    let ch = qmac_channel(channel, &mut rng)?;
    let (da, db) = (ch.inputs().dim_of("Ap")?, ch.inputs().dim_of("Bp")?);
    let control = random_ket(&[("A0", 2), ("A1", 2), ("B", 2), ("Ap", da), ("Bp", db)], &mut rng)?;
    let eta = random_ket(&[("A0", 2), ("R0", 2)], &mut rng)?;
    let psi = random_ket(&[("A1", 2), ("R1", 2)], &mut rng)?;
    let phi = random_ket(&[("B", 2), ("R2", 2)], &mut rng)?;
    let transmitted = psi.tensor(&phi)?;
    Ok(decoupling::product_haar_setup(&control, &["A0"], &eta, &["A1"], &["B"], &transmitted, &ch))
}
