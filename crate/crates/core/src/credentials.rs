//! Verifiable credentials with one issuer signature per claim.
//!
//! Because every claim carries its own proof, a holder can present any subset
//! of claims without the envelope signature and without revealing anything
//! about the claims it withholds (not even their digests or count).

use std::collections::BTreeSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::codec::{self, hex_array, Decode, DecodeError, Encode, Reader, Writer};
use crate::identity::{create_did, verify, Did, KeyPair, PublicKey, Signature};

const CLAIM_DIGEST_TAG: &[u8] = b"robocomm/vc/claim-digest/v1";
const CLAIM_PROOF_TAG: &[u8] = b"robocomm/vc/claim-proof/v1";
const ENVELOPE_TAG: &[u8] = b"robocomm/vc/envelope/v1";
const HOLDER_TAG: &[u8] = b"robocomm/vc/presentation/v1";
const CREDENTIAL_ID_TAG: &[u8] = b"robocomm/vc/id/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredentialError {
    #[error("a credential needs at least one claim")]
    EmptyClaims,
    #[error("claim keys must be non-empty")]
    EmptyClaimKey,
    #[error("claim key {0:?} appears more than once")]
    DuplicateClaimKey(String),
    #[error("DID does not match the signing keypair")]
    DidKeyMismatch,
    #[error("credential has no claim {0:?}")]
    UnknownClaimKey(String),
    #[error("proof for claim {0} does not verify")]
    BadClaimProof(usize),
    #[error("envelope signature does not verify")]
    BadEnvelope,
    #[error("credential has {claims} claims but {proofs} proofs")]
    ProofCountMismatch { claims: usize, proofs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Claim {
    pub key: String,
    pub value: String,
}

impl Claim {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Claim {
            key: key.into(),
            value: value.into(),
        }
    }

    pub fn digest(&self) -> [u8; 32] {
        codec::sha256(&[CLAIM_DIGEST_TAG, &self.canonical_bytes()])
    }
}

impl Encode for Claim {
    fn encode(&self, w: &mut Writer) {
        w.str(&self.key).str(&self.value);
    }
}

impl Decode for Claim {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Claim {
            key: r.string("claim.key")?,
            value: r.string("claim.value")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimProof {
    #[serde(with = "hex_array")]
    pub claim_digest: [u8; 32],
    pub signature: Signature,
}

impl Encode for ClaimProof {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.claim_digest).put(&self.signature);
    }
}

impl Decode for ClaimProof {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ClaimProof {
            claim_digest: r.array("claim_digest")?,
            signature: r.get()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CredentialId(#[serde(with = "hex_array")] pub [u8; 16]);

impl Encode for CredentialId {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.0);
    }
}

impl Decode for CredentialId {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.array("credential_id").map(CredentialId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialMetadata {
    pub issuer_did: Did,
    pub subject_did: Did,
    pub issued_at: u64,
}

impl Encode for CredentialMetadata {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.issuer_did)
            .put(&self.subject_did)
            .u64(self.issued_at);
    }
}

impl Decode for CredentialMetadata {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(CredentialMetadata {
            issuer_did: r.get()?,
            subject_did: r.get()?,
            issued_at: r.u64()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiableCredential {
    pub credential_id: CredentialId,
    pub metadata: CredentialMetadata,
    pub claims: Vec<Claim>,
    pub proofs: Vec<ClaimProof>,
    pub envelope_signature: Signature,
}

fn claim_proof_message(id: &CredentialId, subject: &Did, claim: &Claim) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CLAIM_PROOF_TAG).put(id).put(subject).put(claim);
    w.into_bytes()
}

fn envelope_message(id: &CredentialId, meta: &CredentialMetadata, digests: &[[u8; 32]]) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(ENVELOPE_TAG).put(id).put(meta);
    w.u32(digests.len() as u32);
    for d in digests {
        w.bytes(d);
    }
    w.into_bytes()
}

fn holder_message(
    id: &CredentialId,
    meta: &CredentialMetadata,
    digests: &[[u8; 32]],
    challenge: &Challenge,
) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(HOLDER_TAG).put(id).put(meta);
    w.u32(digests.len() as u32);
    for d in digests {
        w.bytes(d);
    }
    w.bytes(&challenge.0);
    w.into_bytes()
}

fn verify_claim_proof(
    issuer_key: &PublicKey,
    id: &CredentialId,
    subject: &Did,
    claim: &Claim,
    proof: &ClaimProof,
) -> bool {
    proof.claim_digest == claim.digest()
        && verify(issuer_key, &claim_proof_message(id, subject, claim), &proof.signature)
}

/// Issue a credential under an explicit id. Prefer [`Issuer::issue`], which
/// allocates ids that are unique per issuer.
pub fn issue_vc(
    issuer_keypair: &KeyPair,
    issuer_did: &Did,
    subject_did: &Did,
    claims: Vec<Claim>,
    issued_at: u64,
    credential_id: CredentialId,
) -> Result<VerifiableCredential, CredentialError> {
    if claims.is_empty() {
        return Err(CredentialError::EmptyClaims);
    }
    if create_did(issuer_keypair.address()) != *issuer_did {
        return Err(CredentialError::DidKeyMismatch);
    }
    let mut seen = BTreeSet::new();
    for c in &claims {
        if c.key.is_empty() {
            return Err(CredentialError::EmptyClaimKey);
        }
        if !seen.insert(c.key.as_str()) {
            return Err(CredentialError::DuplicateClaimKey(c.key.clone()));
        }
    }
    let metadata = CredentialMetadata {
        issuer_did: *issuer_did,
        subject_did: *subject_did,
        issued_at,
    };
    let proofs: Vec<ClaimProof> = claims
        .iter()
        .map(|c| ClaimProof {
            claim_digest: c.digest(),
            signature: issuer_keypair.sign(&claim_proof_message(&credential_id, subject_did, c)),
        })
        .collect();
    let digests: Vec<[u8; 32]> = proofs.iter().map(|p| p.claim_digest).collect();
    let envelope_signature =
        issuer_keypair.sign(&envelope_message(&credential_id, &metadata, &digests));
    Ok(VerifiableCredential {
        credential_id,
        metadata,
        claims,
        proofs,
        envelope_signature,
    })
}

impl VerifiableCredential {
    pub fn claim(&self, key: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.key == key)
    }

    pub fn verify_claim(&self, issuer_key: &PublicKey, index: usize) -> bool {
        match (self.claims.get(index), self.proofs.get(index)) {
            (Some(c), Some(p)) => verify_claim_proof(
                issuer_key,
                &self.credential_id,
                &self.metadata.subject_did,
                c,
                p,
            ),
            _ => false,
        }
    }

    /// Envelope over the metadata and the claim digests recomputed from the
    /// claims themselves.
    pub fn verify_envelope(&self, issuer_key: &PublicKey) -> bool {
        let digests: Vec<[u8; 32]> = self.claims.iter().map(Claim::digest).collect();
        verify(
            issuer_key,
            &envelope_message(&self.credential_id, &self.metadata, &digests),
            &self.envelope_signature,
        )
    }

    pub fn verify(&self, issuer_key: &PublicKey) -> Result<(), CredentialError> {
        if self.claims.len() != self.proofs.len() {
            return Err(CredentialError::ProofCountMismatch {
                claims: self.claims.len(),
                proofs: self.proofs.len(),
            });
        }
        if let Some(i) = (0..self.claims.len()).find(|&i| !self.verify_claim(issuer_key, i)) {
            return Err(CredentialError::BadClaimProof(i));
        }
        if !self.verify_envelope(issuer_key) {
            return Err(CredentialError::BadEnvelope);
        }
        Ok(())
    }
}

impl Encode for VerifiableCredential {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.credential_id)
            .put(&self.metadata)
            .seq(&self.claims)
            .seq(&self.proofs)
            .put(&self.envelope_signature);
    }
}

impl Decode for VerifiableCredential {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(VerifiableCredential {
            credential_id: r.get()?,
            metadata: r.get()?,
            claims: r.seq()?,
            proofs: r.seq()?,
            envelope_signature: r.get()?,
        })
    }
}

/// An issuing organisation's signing identity. Allocates credential ids from
/// a per-issuer serial so they never repeat.
#[derive(Debug, Clone)]
pub struct Issuer {
    keypair: KeyPair,
    did: Did,
    next_serial: u64,
}

impl Issuer {
    pub fn new(keypair: KeyPair) -> Self {
        let did = create_did(keypair.address());
        Issuer {
            keypair,
            did,
            next_serial: 0,
        }
    }

    pub fn did(&self) -> Did {
        self.did
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn issue(
        &mut self,
        subject: &Did,
        claims: Vec<Claim>,
        issued_at: u64,
    ) -> Result<VerifiableCredential, CredentialError> {
        let digest = codec::sha256(&[
            CREDENTIAL_ID_TAG,
            self.did.to_string().as_bytes(),
            &self.next_serial.to_be_bytes(),
        ]);
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        let vc = issue_vc(
            &self.keypair,
            &self.did,
            subject,
            claims,
            issued_at,
            CredentialId(id),
        )?;
        self.next_serial += 1;
        Ok(vc)
    }
}

/// Verifier-chosen nonce a presentation must sign over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Challenge(#[serde(with = "hex_array")] pub [u8; 16]);

impl Challenge {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; 16];
        rng.fill_bytes(&mut b);
        Challenge(b)
    }
}

impl Encode for Challenge {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.0);
    }
}

impl Decode for Challenge {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.array("challenge").map(Challenge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedClaim {
    pub claim: Claim,
    pub proof: ClaimProof,
}

impl Encode for DisclosedClaim {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.claim).put(&self.proof);
    }
}

impl Decode for DisclosedClaim {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(DisclosedClaim {
            claim: r.get()?,
            proof: r.get()?,
        })
    }
}

/// Holder-signed, challenge-bound disclosure of a subset of a credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub credential_id: CredentialId,
    pub metadata: CredentialMetadata,
    pub disclosed: Vec<DisclosedClaim>,
    pub challenge: Challenge,
    pub holder_signature: Signature,
}

impl Presentation {
    pub fn disclosed_claim(&self, key: &str) -> Option<&Claim> {
        self.disclosed.iter().map(|d| &d.claim).find(|c| c.key == key)
    }
}

impl Encode for Presentation {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.credential_id)
            .put(&self.metadata)
            .seq(&self.disclosed)
            .put(&self.challenge)
            .put(&self.holder_signature);
    }
}

impl Decode for Presentation {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Presentation {
            credential_id: r.get()?,
            metadata: r.get()?,
            disclosed: r.seq()?,
            challenge: r.get()?,
            holder_signature: r.get()?,
        })
    }
}

/// Disclose exactly the claims named in `disclose_keys`, in credential order.
pub fn present<S: AsRef<str>>(
    vc: &VerifiableCredential,
    subject_keypair: &KeyPair,
    disclose_keys: &[S],
    challenge: Challenge,
) -> Result<Presentation, CredentialError> {
    if create_did(subject_keypair.address()) != vc.metadata.subject_did {
        return Err(CredentialError::DidKeyMismatch);
    }
    let wanted: BTreeSet<&str> = disclose_keys.iter().map(AsRef::as_ref).collect();
    if let Some(missing) = wanted.iter().find(|k| vc.claim(k).is_none()) {
        return Err(CredentialError::UnknownClaimKey(missing.to_string()));
    }
    let disclosed: Vec<DisclosedClaim> = vc
        .claims
        .iter()
        .zip(&vc.proofs)
        .filter(|(c, _)| wanted.contains(c.key.as_str()))
        .map(|(c, p)| DisclosedClaim {
            claim: c.clone(),
            proof: *p,
        })
        .collect();
    let digests: Vec<[u8; 32]> = disclosed.iter().map(|d| d.proof.claim_digest).collect();
    let holder_signature = subject_keypair.sign(&holder_message(
        &vc.credential_id,
        &vc.metadata,
        &digests,
        &challenge,
    ));
    Ok(Presentation {
        credential_id: vc.credential_id,
        metadata: vc.metadata,
        disclosed,
        challenge,
        holder_signature,
    })
}

/// Registry status of a DID as seen by a verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DidStatus {
    Active,
    Revoked,
}

/// What a verifier needs to know about a DID.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DidView {
    pub verification_key: PublicKey,
    pub status: DidStatus,
}

/// Read-only DID registry query.
pub trait DidStatusView {
    fn did_view(&self, did: &Did) -> Option<DidView>;
}

/// Read-only trusted-issuer query.
pub trait IssuerView {
    fn is_trusted_issuer(&self, did: &Did) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    UntrustedIssuer,
    BadClaimProof,
    BadHolderSig,
    ReplayedChallenge,
    RevokedDid,
    UnknownDid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

fn active_key(view: &impl DidStatusView, did: &Did) -> Result<PublicKey, RejectReason> {
    match view.did_view(did) {
        None => Err(RejectReason::UnknownDid),
        Some(v) if v.status == DidStatus::Revoked => Err(RejectReason::RevokedDid),
        Some(v) => Ok(v.verification_key),
    }
}

/// Accept iff the challenge matches, the issuer is trusted and active, the
/// subject is active, every disclosed proof verifies and the holder signed
/// this exact disclosure.
pub fn verify_presentation(
    p: &Presentation,
    issuers: &impl IssuerView,
    dids: &impl DidStatusView,
    expected_challenge: &Challenge,
) -> Verdict {
    match check_presentation(p, issuers, dids, expected_challenge) {
        Ok(()) => Verdict::Accepted,
        Err(reason) => Verdict::Rejected(reason),
    }
}

fn check_presentation(
    p: &Presentation,
    issuers: &impl IssuerView,
    dids: &impl DidStatusView,
    expected_challenge: &Challenge,
) -> Result<(), RejectReason> {
    if p.challenge != *expected_challenge {
        return Err(RejectReason::ReplayedChallenge);
    }
    if !issuers.is_trusted_issuer(&p.metadata.issuer_did) {
        return Err(RejectReason::UntrustedIssuer);
    }
    let issuer_key = active_key(dids, &p.metadata.issuer_did)?;
    let holder_key = active_key(dids, &p.metadata.subject_did)?;
    for d in &p.disclosed {
        if !verify_claim_proof(
            &issuer_key,
            &p.credential_id,
            &p.metadata.subject_did,
            &d.claim,
            &d.proof,
        ) {
            return Err(RejectReason::BadClaimProof);
        }
    }
    let digests: Vec<[u8; 32]> = p.disclosed.iter().map(|d| d.proof.claim_digest).collect();
    let msg = holder_message(&p.credential_id, &p.metadata, &digests, &p.challenge);
    if !verify(&holder_key, &msg, &p.holder_signature) {
        return Err(RejectReason::BadHolderSig);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::identity::Identity;

    #[derive(Default)]
    struct Registry {
        dids: HashMap<Did, DidView>,
        issuers: BTreeSet<Did>,
    }

    impl Registry {
        fn add(&mut self, id: &Identity) {
            self.dids.insert(
                id.did,
                DidView {
                    verification_key: *id.keypair.public_key(),
                    status: DidStatus::Active,
                },
            );
        }
    }

    impl DidStatusView for Registry {
        fn did_view(&self, did: &Did) -> Option<DidView> {
            self.dids.get(did).copied()
        }
    }

    impl IssuerView for Registry {
        fn is_trusted_issuer(&self, did: &Did) -> bool {
            self.issuers.contains(did)
        }
    }

    struct Fixture {
        issuer: Issuer,
        robot: Identity,
        registry: Registry,
    }

    fn fixture() -> Fixture {
        let org = Identity::from_label("org");
        let robot = Identity::from_label("robot");
        let mut registry = Registry::default();
        registry.add(&org);
        registry.add(&robot);
        registry.issuers.insert(org.did);
        Fixture {
            issuer: Issuer::new(org.keypair),
            robot,
            registry,
        }
    }

    fn three_claims() -> Vec<Claim> {
        vec![
            Claim::new("end_of_life_date", "2030-01-01"),
            Claim::new("manufacturer", "Acme Robotics"),
            Claim::new("hardware_spec", "arm64/8GB"),
        ]
    }

    #[test]
    fn single_claim_credential() {
        let mut f = fixture();
        let vc = f
            .issuer
            .issue(&f.robot.did, vec![Claim::new("end_of_life_date", "2030-01-01")], 1)
            .unwrap();
        assert_eq!(vc.proofs.len(), 1);
        vc.verify(f.issuer.keypair().public_key()).unwrap();
    }

    #[test]
    fn empty_and_invalid_claims_rejected() {
        let mut f = fixture();
        assert_eq!(
            f.issuer.issue(&f.robot.did, vec![], 1).unwrap_err(),
            CredentialError::EmptyClaims
        );
        assert_eq!(
            f.issuer
                .issue(&f.robot.did, vec![Claim::new("", "x")], 1)
                .unwrap_err(),
            CredentialError::EmptyClaimKey
        );
        assert!(matches!(
            f.issuer.issue(
                &f.robot.did,
                vec![Claim::new("a", "1"), Claim::new("a", "2")],
                1
            ),
            Err(CredentialError::DuplicateClaimKey(_))
        ));
    }

    #[test]
    fn issuer_did_must_match_keypair() {
        let f = fixture();
        let err = issue_vc(
            &f.robot.keypair,
            &f.issuer.did(),
            &f.robot.did,
            three_claims(),
            0,
            CredentialId([0; 16]),
        )
        .unwrap_err();
        assert_eq!(err, CredentialError::DidKeyMismatch);
    }

    #[test]
    fn credential_ids_are_unique_per_issuer() {
        let mut f = fixture();
        let a = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        let b = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        assert_ne!(a.credential_id, b.credential_id);
    }

    #[test]
    fn mutating_one_claim_breaks_only_its_proof_and_the_envelope() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        let key = *f.issuer.keypair().public_key();
        for target in 0..3 {
            let mut bad = vc.clone();
            bad.claims[target].value.push('!');
            for i in 0..3 {
                assert_eq!(bad.verify_claim(&key, i), i != target, "target {target} proof {i}");
            }
            assert!(!bad.verify_envelope(&key));
        }
    }

    #[test]
    fn selective_disclosure_of_end_of_life_only() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        let challenge = Challenge([9; 16]);
        let p = present(&vc, &f.robot.keypair, &["end_of_life_date"], challenge).unwrap();
        assert_eq!(p.disclosed.len(), 1);
        assert!(p.disclosed_claim("manufacturer").is_none());
        assert_eq!(
            verify_presentation(&p, &f.registry, &f.registry, &challenge),
            Verdict::Accepted
        );
        let bytes = p.canonical_bytes();
        for hidden in ["Acme Robotics", "arm64/8GB"] {
            assert!(!bytes.windows(hidden.len()).any(|w| w == hidden.as_bytes()));
        }
    }

    #[test]
    fn full_disclosure_carries_every_claim() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        let keys: Vec<&str> = vc.claims.iter().map(|c| c.key.as_str()).collect();
        let p = present(&vc, &f.robot.keypair, &keys, Challenge([1; 16])).unwrap();
        let claims: Vec<Claim> = p.disclosed.iter().map(|d| d.claim.clone()).collect();
        assert_eq!(claims, vc.claims);
    }

    #[test]
    fn unknown_key_and_wrong_holder() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        assert_eq!(
            present(&vc, &f.robot.keypair, &["nonexistent"], Challenge([0; 16])).unwrap_err(),
            CredentialError::UnknownClaimKey("nonexistent".into())
        );
        assert_eq!(
            present(&vc, f.issuer.keypair(), &["manufacturer"], Challenge([0; 16])).unwrap_err(),
            CredentialError::DidKeyMismatch
        );
    }

    #[test]
    fn rejection_reasons() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        let ch = Challenge([3; 16]);
        let p = present(&vc, &f.robot.keypair, &["end_of_life_date"], ch).unwrap();

        assert_eq!(
            verify_presentation(&p, &f.registry, &f.registry, &Challenge([4; 16])),
            Verdict::Rejected(RejectReason::ReplayedChallenge)
        );

        let mut tampered = p.clone();
        tampered.disclosed[0].claim.value = "2099-01-01".into();
        assert_eq!(
            verify_presentation(&tampered, &f.registry, &f.registry, &ch),
            Verdict::Rejected(RejectReason::BadClaimProof)
        );

        let mut resigned = p.clone();
        resigned.holder_signature = f.issuer.keypair().sign(b"nope");
        assert_eq!(
            verify_presentation(&resigned, &f.registry, &f.registry, &ch),
            Verdict::Rejected(RejectReason::BadHolderSig)
        );

        let mut reg = Registry::default();
        reg.add(&f.robot);
        assert_eq!(
            verify_presentation(&p, &reg, &f.registry, &ch),
            Verdict::Rejected(RejectReason::UntrustedIssuer)
        );

        f.registry.dids.get_mut(&f.robot.did).unwrap().status = DidStatus::Revoked;
        assert_eq!(
            verify_presentation(&p, &f.registry, &f.registry, &ch),
            Verdict::Rejected(RejectReason::RevokedDid)
        );
        f.registry.dids.remove(&f.robot.did);
        assert_eq!(
            verify_presentation(&p, &f.registry, &f.registry, &ch),
            Verdict::Rejected(RejectReason::UnknownDid)
        );
    }

    #[test]
    fn presentation_signed_by_non_issuer_is_rejected() {
        let f = fixture();
        let rogue = Identity::from_label("rogue");
        let mut forged_issuer = Issuer::new(rogue.keypair.clone());
        let mut vc = forged_issuer
            .issue(&f.robot.did, three_claims(), 1)
            .unwrap();
        // Claim to be from the trusted issuer.
        vc.metadata.issuer_did = f.issuer.did();
        let ch = Challenge([5; 16]);
        let p = present(&vc, &f.robot.keypair, &["manufacturer"], ch).unwrap();
        assert_eq!(
            verify_presentation(&p, &f.registry, &f.registry, &ch),
            Verdict::Rejected(RejectReason::BadClaimProof)
        );
    }

    #[test]
    fn codec_and_json_roundtrip() {
        let mut f = fixture();
        let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
        assert_eq!(
            VerifiableCredential::from_canonical_bytes(&vc.canonical_bytes()).unwrap(),
            vc
        );
        let p = present(&vc, &f.robot.keypair, &["manufacturer"], Challenge([2; 16])).unwrap();
        assert_eq!(Presentation::from_canonical_bytes(&p.canonical_bytes()).unwrap(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Presentation>(&json).unwrap(), p);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn any_strict_subset_verifies(mask in 0u8..7, ch in any::<[u8; 16]>()) {
                let mut f = fixture();
                let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
                let keys: Vec<&str> = vc.claims.iter().enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, c)| c.key.as_str())
                    .collect();
                let p = present(&vc, &f.robot.keypair, &keys, Challenge(ch)).unwrap();
                prop_assert_eq!(p.disclosed.len(), keys.len());
                prop_assert!(verify_presentation(&p, &f.registry, &f.registry, &Challenge(ch)).is_accepted());
            }

            #[test]
            fn mutated_values_never_verify(suffix in "[a-z0-9]{1,8}", which in 0usize..3) {
                let mut f = fixture();
                let vc = f.issuer.issue(&f.robot.did, three_claims(), 1).unwrap();
                let ch = Challenge([7; 16]);
                let keys: Vec<&str> = vc.claims.iter().map(|c| c.key.as_str()).collect();
                let mut p = present(&vc, &f.robot.keypair, &keys, ch).unwrap();
                p.disclosed[which].claim.value.push_str(&suffix);
                prop_assert!(!verify_presentation(&p, &f.registry, &f.registry, &ch).is_accepted());
            }
        }
    }
}
