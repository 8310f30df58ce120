/* C interface to robocomm: DIDs, signatures, the simulated ledger, off-chain transactions and the swarm experiment. */

#ifndef ROBOCOMM_H
#define ROBOCOMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  RC_STATUS_INVALID_UTF8 = 3,
  RC_STATUS_DECODE = 4,
  /**
   * The ledger rejected a transaction; see the `ledger_code` out-param.
   */
  RC_STATUS_LEDGER_REJECTED = 5,
  RC_STATUS_PANIC = 6,
} RcStatus;

/**
 * A secp256k1 key with its DID and endpoint.
 */
typedef struct RcKeyPair RcKeyPair;

/**
 * An in-process ledger.
 */
typedef struct RcLedger RcLedger;

/**
 * Byte buffer owned by the library.
 */
typedef struct RcBytes {
  uint8_t *data;
  size_t len;
} RcBytes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rc_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void rc_string_free(char *s);

/**
 * # Safety
 * `b` must come from this library.
 */
void rc_bytes_free(struct RcBytes b);

/**
 * Deterministic key from 32 seed bytes. A zero or out-of-range seed is
 * rejected. The caller supplies the entropy.
 *
 * # Safety
 * `seed` points to 32 readable bytes; `out` is writable.
 */
enum RcStatus rc_keypair_from_seed(const uint8_t *seed,
                                   uint16_t port,
                                   struct RcKeyPair **out_keypair);

/**
 * # Safety
 * `kp` must come from [`rc_keypair_from_seed`] or be null.
 */
void rc_keypair_free(struct RcKeyPair *kp);

/**
 * `did:robo:0x…` string; free with [`rc_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_keypair_did(const struct RcKeyPair *kp, char **out_did);

/**
 * Compressed public key (33 bytes) and address (20 bytes). Either output
 * may be null.
 *
 * # Safety
 * Non-null outputs must hold 33 and 20 writable bytes.
 */
enum RcStatus rc_keypair_public(const struct RcKeyPair *kp,
                                uint8_t *out_public_key,
                                uint8_t *out_address);

/**
 * Deterministic low-S ECDSA signature over SHA-256 of `msg`.
 *
 * # Safety
 * `msg` holds `len` bytes; `out_signature` holds 64 writable bytes.
 */
enum RcStatus rc_sign(const struct RcKeyPair *kp,
                      const uint8_t *msg,
                      size_t len,
                      uint8_t *out_signature);

/**
 * Sets `*out_valid`. A malformed key is an error; a bad signature is not.
 *
 * # Safety
 * `public_key` holds 33 bytes, `signature` 64, `msg` `len`.
 */
enum RcStatus rc_verify(const uint8_t *public_key,
                        const uint8_t *msg,
                        size_t len,
                        const uint8_t *signature,
                        bool *out_valid);

/**
 * DID document as JSON; free with [`rc_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_did_document_json(const struct RcKeyPair *kp,
                                   uint64_t created_at,
                                   char **out_json);

/**
 * Signed `RegisterDid` transaction in canonical bytes, ready for
 * [`rc_ledger_submit`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_tx_register_did(const struct RcKeyPair *kp,
                                 uint64_t created_at,
                                 uint64_t reported_energy,
                                 struct RcBytes *out_tx);

/**
 * New ledger whose genesis authority is `genesis`. Zero parameters keep
 * their defaults.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_ledger_new(const struct RcKeyPair *genesis,
                            uint64_t challenge_period,
                            int64_t initial_credit,
                            struct RcLedger **out_ledger);

/**
 * # Safety
 * `l` must come from [`rc_ledger_new`] or be null.
 */
void rc_ledger_free(struct RcLedger *l);

/**
 * Advance by `n >= 1` blocks; writes the new height if `out_height` is set.
 *
 * # Safety
 * Pointers must be valid or `out_height` null.
 */
enum RcStatus rc_ledger_advance(struct RcLedger *l, uint64_t n, uint64_t *out_height);

/**
 * Current block height.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_ledger_height(const struct RcLedger *l, uint64_t *out_height);

/**
 * SHA-256 of the canonical state.
 *
 * # Safety
 * `out_hash` holds 32 writable bytes.
 */
enum RcStatus rc_ledger_state_hash(const struct RcLedger *l, uint8_t *out_hash);

/**
 * Submit a canonical `SignedOnChainTx`. On rejection returns
 * `RC_STATUS_LEDGER_REJECTED` and writes the ledger's error code to
 * `out_ledger_code` (0 on success) if that pointer is set.
 *
 * # Safety
 * `tx` holds `len` bytes.
 */
enum RcStatus rc_ledger_submit(struct RcLedger *l,
                               const uint8_t *tx,
                               size_t len,
                               int32_t *out_ledger_code);

/**
 * Settled credit and energy of `address` (20 bytes).
 *
 * # Safety
 * Pointers must be valid.
 */
enum RcStatus rc_ledger_account(const struct RcLedger *l,
                                const uint8_t *address,
                                int64_t *out_credit,
                                uint64_t *out_energy);

/**
 * Build and sign one half of an iteration. `value_kind` is 0 for energy
 * units and 1 for credits; `value` is cumulative.
 *
 * # Safety
 * `exchange_id` holds 16 bytes, `receiver` 20.
 */
enum RcStatus rc_offchain_sign(const struct RcKeyPair *kp,
                               const uint8_t *exchange_id,
                               uint64_t iteration,
                               const uint8_t *receiver,
                               uint64_t value,
                               uint8_t value_kind,
                               struct RcBytes *out_tx);

/**
 * Check a signed off-chain transaction against its sender's 33-byte key
 * and the iteration the receiver expects. `*out_accepted` is false for a
 * bad signature, wrong iteration or invalid field.
 *
 * # Safety
 * `tx` holds `len` bytes, `sender_key` 33.
 */
enum RcStatus rc_offchain_check(const uint8_t *tx,
                                size_t len,
                                uint64_t expected_iteration,
                                const uint8_t *sender_key,
                                bool *out_accepted);

/**
 * Paired baseline/trading sweep. `config` is `key = value` text or null for
 * defaults. Writes the JSON summary; free with [`rc_string_free`].
 *
 * # Safety
 * `config` is null or a NUL-terminated string.
 */
enum RcStatus rc_simulate(const char *config, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBOCOMM_H */
