//! Micro-benchmarks for signing, verification and DID document generation.

use std::time::Instant;

use serde::Serialize;

use crate::channel::{build_offchain_tx, sign_offchain_tx, ExchangeId, SignedOffChainTx, ValueKind};
use crate::codec;
use crate::identity::{build_did_document, create_did, generate_keypair, peer_id, DidDocument, Identity, Multiaddr};

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub name: &'static str,
    pub iterations: usize,
    pub mean_ms: f64,
    /// Sample standard deviation, 0 for a single sample.
    pub stddev_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub timings: Vec<Timing>,
    pub did_document_bytes: usize,
    pub signed_offchain_tx_bytes: usize,
}

fn time<T>(name: &'static str, iterations: usize, mut f: impl FnMut(usize) -> T) -> Timing {
    let samples: Vec<f64> = (0..iterations)
        .map(|i| {
            let t = Instant::now();
            std::hint::black_box(f(i));
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    let n = samples.len().max(1) as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stddev = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Timing {
        name,
        iterations,
        mean_ms: mean,
        stddev_ms: stddev,
    }
}

/// The energy half of iteration `i` of a fixed exchange.
pub fn sample_offchain_tx(seller: &Identity, buyer: &Identity, i: u64) -> SignedOffChainTx {
    let tx = build_offchain_tx(
        ExchangeId::derive(&[b"bench"]),
        i.max(1),
        seller.address(),
        buyer.address(),
        i.max(1),
        ValueKind::EnergyUnits,
    )
    .expect("well-formed sample");
    sign_offchain_tx(&seller.keypair, tx).expect("seller signs its own half")
}

/// A self-controlled document for the identity derived from `seed`.
pub fn sample_did_document(seed: u64) -> DidDocument {
    let secret = codec::sha256(&[b"robocomm/bench-doc", &seed.to_be_bytes()]);
    let kp = generate_keypair(&secret).expect("hash output is a valid scalar");
    let did = create_did(kp.address());
    let endpoint = Multiaddr::tcp_loopback(10333, &peer_id(kp.public_key())).expect("well-formed");
    build_did_document(&did, &kp, endpoint, 0).expect("did matches key")
}

pub fn run_bench(iterations: usize, seed: u64) -> BenchReport {
    let label = |tag: &str| Identity::from_label(&format!("bench/{tag}/{seed}"));
    let (seller, buyer) = (label("seller"), label("buyer"));
    let signed: Vec<SignedOffChainTx> = (0..iterations.max(1) as u64)
        .map(|i| sample_offchain_tx(&seller, &buyer, i + 1))
        .collect();
    let key = *seller.keypair.public_key();

    let timings = vec![
        time("TxSign", iterations, |i| sample_offchain_tx(&seller, &buyer, i as u64 + 1)),
        time("TxVerify", iterations, |i| {
            assert!(signed[i].verify_with(&key));
        }),
        time("DidDocGen", iterations, |i| {
            sample_did_document(seed.wrapping_add(i as u64))
        }),
    ];
    BenchReport {
        timings,
        did_document_bytes: sample_did_document(seed).serialized_len(),
        signed_offchain_tx_bytes: signed[0].serialized_len(),
    }
}
