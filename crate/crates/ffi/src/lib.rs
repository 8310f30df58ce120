//! C ABI over the robocomm core.
//!
//! Conventions:
//! * Every function returns an [`RcStatus`]; results go through out-pointers.
//! * On failure a message is kept per thread and read with
//!   [`rc_last_error_message`].
//! * Handles ([`RcKeyPair`], [`RcLedger`]) are opaque and freed by their
//!   `_free` function. Strings and byte buffers returned by the library are
//!   freed with [`rc_string_free`] and [`rc_bytes_free`].
//! * Panics never cross the boundary; they surface as `RC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use robocomm::channel::{build_offchain_tx, check_offchain_tx, sign_offchain_tx, ExchangeId, SignedOffChainTx, ValueKind};
use robocomm::codec::{Decode, Encode};
use robocomm::identity::{verify, Address, Identity, PublicKey, Signature, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use robocomm::ledger::{Ledger, LedgerConfig, OnChainTx, SignedOnChainTx};
use robocomm::swarm_sim::{compare, SimConfig};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Decode = 4,
    /// The ledger rejected a transaction; see the `ledger_code` out-param.
    LedgerRejected = 5,
    Panic = 6,
}

/// Byte buffer owned by the library.
#[repr(C)]
pub struct RcBytes {
    pub data: *mut u8,
    pub len: usize,
}

impl RcBytes {
    fn from_vec(v: Vec<u8>) -> Self {
        let b = v.into_boxed_slice();
        let len = b.len();
        RcBytes {
            data: Box::into_raw(b) as *mut u8,
            len,
        }
    }
}

/// A secp256k1 key with its DID and endpoint.
pub struct RcKeyPair {
    identity: Identity,
}

/// An in-process ledger.
pub struct RcLedger {
    ledger: Ledger,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(RcStatus, String);

type Res<T> = Result<T, Fail>;

fn fail<T>(status: RcStatus, msg: impl Into<String>) -> Res<T> {
    Err(Fail(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Res<()>) -> RcStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        fail(RcStatus::Panic, msg)
    });
    match outcome {
        Ok(()) => RcStatus::Ok,
        Err(Fail(status, msg)) => {
            let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
            LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
            status
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    p.as_ref().map_or_else(|| fail(RcStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Res<&'a mut T> {
    p.as_mut().map_or_else(|| fail(RcStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn bytes<'a>(p: *const u8, len: usize, name: &str) -> Res<&'a [u8]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(RcStatus::NullPointer, format!("{name} is null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn array<'a, const N: usize>(p: *const u8, name: &str) -> Res<&'a [u8; N]> {
    Ok(bytes(p, N, name)?.try_into().expect("length is N"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return fail(RcStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(RcStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s).expect("no interior nul").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `b` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn rc_bytes_free(b: RcBytes) {
    if !b.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
    }
}

// Keys and DIDs

/// Deterministic key from 32 seed bytes. A zero or out-of-range seed is
/// rejected. The caller supplies the entropy.
///
/// # Safety
/// `seed` points to 32 readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rc_keypair_from_seed(seed: *const u8, port: u16, out_keypair: *mut *mut RcKeyPair) -> RcStatus {
    guard(|| {
        let seed = array::<32>(seed, "seed")?;
        let slot = out(out_keypair, "out_keypair")?;
        let identity = Identity::from_seed(seed, port).or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        *slot = Box::into_raw(Box::new(RcKeyPair { identity }));
        Ok(())
    })
}

/// # Safety
/// `kp` must come from [`rc_keypair_from_seed`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rc_keypair_free(kp: *mut RcKeyPair) {
    if !kp.is_null() {
        drop(Box::from_raw(kp));
    }
}

/// `did:robo:0x…` string; free with [`rc_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_keypair_did(kp: *const RcKeyPair, out_did: *mut *mut c_char) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        *out(out_did, "out_did")? = c_string(kp.identity.did.to_string());
        Ok(())
    })
}

/// Compressed public key (33 bytes) and address (20 bytes). Either output
/// may be null.
///
/// # Safety
/// Non-null outputs must hold 33 and 20 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_keypair_public(kp: *const RcKeyPair, out_public_key: *mut u8, out_address: *mut u8) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        if !out_public_key.is_null() {
            let pk = kp.identity.keypair.public_key().to_bytes();
            ptr::copy_nonoverlapping(pk.as_ptr(), out_public_key, PUBLIC_KEY_LEN);
        }
        if !out_address.is_null() {
            ptr::copy_nonoverlapping(kp.identity.address().0.as_ptr(), out_address, 20);
        }
        Ok(())
    })
}

/// Deterministic low-S ECDSA signature over SHA-256 of `msg`.
///
/// # Safety
/// `msg` holds `len` bytes; `out_signature` holds 64 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_sign(kp: *const RcKeyPair, msg: *const u8, len: usize, out_signature: *mut u8) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        let msg = bytes(msg, len, "msg")?;
        out(out_signature, "out_signature")?;
        let sig = kp.identity.keypair.sign(msg);
        ptr::copy_nonoverlapping(sig.0.as_ptr(), out_signature, SIGNATURE_LEN);
        Ok(())
    })
}

/// Sets `*out_valid`. A malformed key is an error; a bad signature is not.
///
/// # Safety
/// `public_key` holds 33 bytes, `signature` 64, `msg` `len`.
#[no_mangle]
pub unsafe extern "C" fn rc_verify(
    public_key: *const u8,
    msg: *const u8,
    len: usize,
    signature: *const u8,
    out_valid: *mut bool,
) -> RcStatus {
    guard(|| {
        let pk = PublicKey::from_bytes(bytes(public_key, PUBLIC_KEY_LEN, "public_key")?)
            .or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        let sig = Signature(*array::<SIGNATURE_LEN>(signature, "signature")?);
        let msg = bytes(msg, len, "msg")?;
        *out(out_valid, "out_valid")? = verify(&pk, msg, &sig);
        Ok(())
    })
}

/// DID document as JSON; free with [`rc_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_did_document_json(kp: *const RcKeyPair, created_at: u64, out_json: *mut *mut c_char) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        *out(out_json, "out_json")? = c_string(kp.identity.document(created_at).to_json_pretty());
        Ok(())
    })
}

/// Signed `RegisterDid` transaction in canonical bytes, ready for
/// [`rc_ledger_submit`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_tx_register_did(
    kp: *const RcKeyPair,
    created_at: u64,
    reported_energy: u64,
    out_tx: *mut RcBytes,
) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        let id = &kp.identity;
        let tx = OnChainTx::RegisterDid {
            did: id.did,
            document: id.document(created_at),
            multiaddr: id.endpoint.clone(),
            reported_energy,
        }
        .sign(&id.keypair);
        *out(out_tx, "out_tx")? = RcBytes::from_vec(tx.canonical_bytes());
        Ok(())
    })
}

// Ledger

/// New ledger whose genesis authority is `genesis`. Zero parameters keep
/// their defaults.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_new(
    genesis: *const RcKeyPair,
    challenge_period: u64,
    initial_credit: i64,
    out_ledger: *mut *mut RcLedger,
) -> RcStatus {
    guard(|| {
        let g = arg(genesis, "genesis")?;
        let slot = out(out_ledger, "out_ledger")?;
        let mut cfg = LedgerConfig::new(g.identity.address());
        if challenge_period > 0 {
            cfg.challenge_period = challenge_period;
        }
        if initial_credit > 0 {
            cfg.initial_credit = initial_credit;
        }
        *slot = Box::into_raw(Box::new(RcLedger {
            ledger: Ledger::new(cfg),
        }));
        Ok(())
    })
}

/// # Safety
/// `l` must come from [`rc_ledger_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_free(l: *mut RcLedger) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Advance by `n >= 1` blocks; writes the new height if `out_height` is set.
///
/// # Safety
/// Pointers must be valid or `out_height` null.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_advance(l: *mut RcLedger, n: u64, out_height: *mut u64) -> RcStatus {
    guard(|| {
        let l = out(l, "ledger")?;
        let h = l
            .ledger
            .advance_block(n)
            .or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        if let Some(o) = out_height.as_mut() {
            *o = h;
        }
        Ok(())
    })
}

/// Current block height.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_height(l: *const RcLedger, out_height: *mut u64) -> RcStatus {
    guard(|| {
        *out(out_height, "out_height")? = arg(l, "ledger")?.ledger.height();
        Ok(())
    })
}

/// SHA-256 of the canonical state.
///
/// # Safety
/// `out_hash` holds 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_state_hash(l: *const RcLedger, out_hash: *mut u8) -> RcStatus {
    guard(|| {
        let h = arg(l, "ledger")?.ledger.state_hash();
        out(out_hash, "out_hash")?;
        ptr::copy_nonoverlapping(h.as_ptr(), out_hash, 32);
        Ok(())
    })
}

/// Submit a canonical `SignedOnChainTx`. On rejection returns
/// `RC_STATUS_LEDGER_REJECTED` and writes the ledger's error code to
/// `out_ledger_code` (0 on success) if that pointer is set.
///
/// # Safety
/// `tx` holds `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_submit(l: *mut RcLedger, tx: *const u8, len: usize, out_ledger_code: *mut i32) -> RcStatus {
    guard(|| {
        let l = out(l, "ledger")?;
        let raw = bytes(tx, len, "tx")?;
        let stx = SignedOnChainTx::from_canonical_bytes(raw).or_else(|e| fail(RcStatus::Decode, e.to_string()))?;
        let receipt = l.ledger.submit_tx(stx);
        let code = receipt.result.as_ref().err().map_or(0, |e| e.code());
        if let Some(o) = out_ledger_code.as_mut() {
            *o = code;
        }
        match receipt.result {
            Ok(_) => Ok(()),
            Err(e) => fail(RcStatus::LedgerRejected, e.to_string()),
        }
    })
}

/// Settled credit and energy of `address` (20 bytes).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rc_ledger_account(
    l: *const RcLedger,
    address: *const u8,
    out_credit: *mut i64,
    out_energy: *mut u64,
) -> RcStatus {
    guard(|| {
        let l = arg(l, "ledger")?;
        let a = Address(*array::<20>(address, "address")?);
        let Some(acct) = l.ledger.account(&a) else {
            return fail(RcStatus::InvalidArgument, "unknown account");
        };
        *out(out_credit, "out_credit")? = acct.credit_score;
        *out(out_energy, "out_energy")? = acct.energy_level;
        Ok(())
    })
}

// Off-chain transactions

/// Build and sign one half of an iteration. `value_kind` is 0 for energy
/// units and 1 for credits; `value` is cumulative.
///
/// # Safety
/// `exchange_id` holds 16 bytes, `receiver` 20.
#[no_mangle]
pub unsafe extern "C" fn rc_offchain_sign(
    kp: *const RcKeyPair,
    exchange_id: *const u8,
    iteration: u64,
    receiver: *const u8,
    value: u64,
    value_kind: u8,
    out_tx: *mut RcBytes,
) -> RcStatus {
    guard(|| {
        let kp = arg(kp, "kp")?;
        let kind = match value_kind {
            0 => ValueKind::EnergyUnits,
            1 => ValueKind::CreditScore,
            k => return fail(RcStatus::InvalidArgument, format!("unknown value kind {k}")),
        };
        let tx = build_offchain_tx(
            ExchangeId(*array::<16>(exchange_id, "exchange_id")?),
            iteration,
            kp.identity.address(),
            Address(*array::<20>(receiver, "receiver")?),
            value,
            kind,
        )
        .or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        let stx = sign_offchain_tx(&kp.identity.keypair, tx).or_else(|_| fail(RcStatus::InvalidArgument, "not the sender"))?;
        *out(out_tx, "out_tx")? = RcBytes::from_vec(stx.canonical_bytes());
        Ok(())
    })
}

/// Check a signed off-chain transaction against its sender's 33-byte key
/// and the iteration the receiver expects. `*out_accepted` is false for a
/// bad signature, wrong iteration or invalid field.
///
/// # Safety
/// `tx` holds `len` bytes, `sender_key` 33.
#[no_mangle]
pub unsafe extern "C" fn rc_offchain_check(
    tx: *const u8,
    len: usize,
    expected_iteration: u64,
    sender_key: *const u8,
    out_accepted: *mut bool,
) -> RcStatus {
    guard(|| {
        let stx = SignedOffChainTx::from_canonical_bytes(bytes(tx, len, "tx")?)
            .or_else(|e| fail(RcStatus::Decode, e.to_string()))?;
        let pk = PublicKey::from_bytes(bytes(sender_key, PUBLIC_KEY_LEN, "sender_key")?)
            .or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        *out(out_accepted, "out_accepted")? = check_offchain_tx(&stx, expected_iteration, &pk).is_accepted();
        Ok(())
    })
}

// Swarm experiment

/// Paired baseline/trading sweep. `config` is `key = value` text or null for
/// defaults. Writes the JSON summary; free with [`rc_string_free`].
///
/// # Safety
/// `config` is null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rc_simulate(config: *const c_char, out_json: *mut *mut c_char) -> RcStatus {
    guard(|| {
        let mut cfg = SimConfig::default();
        if !config.is_null() {
            cfg.apply_text(text(config, "config")?)
                .or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        }
        let slot = out(out_json, "out_json")?;
        let cmp = compare(&cfg).or_else(|e| fail(RcStatus::InvalidArgument, e.to_string()))?;
        let mut v = serde_json::to_value(&cmp).expect("summary serializes");
        v["directional_holds"] = cmp.directional_holds().into();
        *slot = c_string(v.to_string());
        Ok(())
    })
}
