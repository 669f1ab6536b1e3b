//! Per-organization certificate authorities and attribute-bearing
//! certificates.
//!
//! Every actor in the system authenticates with a [`Certificate`] issued by
//! its organization's [`CertificateAuthority`]. A certificate binds a subject
//! to a set of attribute names under the CA's signature; authorization
//! decisions elsewhere in the crate reduce to [`Certificate::has_attribute`]
//! on a verified certificate. Certificates and CAs are immutable once
//! created.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors from identity creation, certificate issuance and decoding.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("organization id must be non-empty")]
    EmptyOrgId,
    #[error("subject id must be non-empty")]
    EmptySubjectId,
    #[error("invalid attribute name {0:?}: want non-empty [a-z0-9_.-]+")]
    InvalidAttribute(String),
    #[error("malformed certificate encoding: {0}")]
    Malformed(String),
    #[error("certificate for {subject:?} does not verify under issuer {issuer:?}")]
    Unverifiable { subject: String, issuer: String },
}

/// A validated attribute name: non-empty, matching `[a-z0-9_.-]+`.
///
/// Attribute names are case-sensitive by construction (uppercase is simply
/// rejected).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AttributeName(String);

impl AttributeName {
    pub fn new(name: impl Into<String>) -> Result<Self, IdentityError> {
        let name = name.into();
        let ok = !name.is_empty()
            && name
                .bytes()
                .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'.' | b'-'));
        if ok {
            Ok(Self(name))
        } else {
            Err(IdentityError::InvalidAttribute(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AttributeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for AttributeName {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for AttributeName {
    type Error = IdentityError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl TryFrom<&str> for AttributeName {
    type Error = IdentityError;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<AttributeName> for String {
    fn from(a: AttributeName) -> String {
        a.0
    }
}

/// Parse a slice of names into a validated, deduplicated attribute set.
pub fn attribute_set<I, S>(names: I) -> Result<BTreeSet<AttributeName>, IdentityError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    names.into_iter().map(|s| AttributeName::new(s.as_ref())).collect()
}

/// Signing authority for one organization.
///
/// Key generation is the only mutating step; afterwards the CA only signs.
pub struct CertificateAuthority {
    org_id: String,
    signing_key: SigningKey,
}

impl CertificateAuthority {
    /// Create a CA with a key pair drawn from the supplied RNG.
    pub fn generate<R>(org_id: impl Into<String>, rng: &mut R) -> Result<Self, IdentityError>
    where
        R: RngCore + CryptoRng,
    {
        let org_id = org_id.into();
        if org_id.is_empty() {
            return Err(IdentityError::EmptyOrgId);
        }
        Ok(Self {
            org_id,
            signing_key: SigningKey::generate(rng),
        })
    }

    /// Deterministic CA: the key stream is derived from the master seed and
    /// the organization name, so distinct orgs under one seed get distinct
    /// keys and reruns reproduce them exactly.
    pub fn from_seed(org_id: impl Into<String>, seed: u64) -> Result<Self, IdentityError> {
        let org_id = org_id.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(org_id.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha20Rng::from_seed(digest);
        Self::generate(org_id, &mut rng)
    }

    pub fn org_id(&self) -> &str {
        &self.org_id
    }

    pub fn verification_key(&self) -> VerifyingKey {
        self.signing_key.verifying_key()
    }

    /// Issue a certificate binding `subject_id` to `attributes`.
    pub fn issue<I, A>(&self, subject_id: &str, attributes: I) -> Result<Certificate, IdentityError>
    where
        I: IntoIterator<Item = A>,
        A: TryInto<AttributeName, Error = IdentityError>,
    {
        if subject_id.is_empty() {
            return Err(IdentityError::EmptySubjectId);
        }
        let attributes = attributes
            .into_iter()
            .map(|a| a.try_into())
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mut cert = Certificate {
            subject_id: subject_id.to_string(),
            org_id: self.org_id.clone(),
            attributes,
            issuer: self.org_id.clone(),
            signature: Vec::new(),
        };
        cert.signature = self.signing_key.sign(&cert.signing_bytes()).to_vec();
        Ok(cert)
    }
}

impl fmt::Debug for CertificateAuthority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertificateAuthority")
            .field("org_id", &self.org_id)
            .field("verification_key", &hex::encode(self.verification_key().to_bytes()))
            .finish()
    }
}

/// A signed identity: subject, issuing organization and attribute set.
///
/// The signature covers the canonical serialization of
/// `(subject_id, org_id, sorted attributes)`; mutating any field breaks it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_id: String,
    pub org_id: String,
    pub attributes: BTreeSet<AttributeName>,
    pub issuer: String,
    signature: Vec<u8>,
}

fn put_chunk(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Cursor over a length-prefixed byte encoding.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IdentityError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IdentityError::Malformed("truncated".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, IdentityError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn chunk(&mut self) -> Result<&'a [u8], IdentityError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn string(&mut self) -> Result<String, IdentityError> {
        let b = self.chunk()?;
        String::from_utf8(b.to_vec()).map_err(|_| IdentityError::Malformed("invalid utf-8".into()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

impl Certificate {
    /// Canonical byte serialization the signature is computed over:
    /// length-prefixed subject, org, and the sorted attribute list.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_chunk(&mut out, self.subject_id.as_bytes());
        put_chunk(&mut out, self.org_id.as_bytes());
        out.extend_from_slice(&(self.attributes.len() as u32).to_le_bytes());
        for attr in &self.attributes {
            put_chunk(&mut out, attr.as_str().as_bytes());
        }
        out
    }

    /// Full canonical byte form: signing bytes plus issuer and signature.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signing_bytes();
        put_chunk(&mut out, self.issuer.as_bytes());
        put_chunk(&mut out, &self.signature);
        out
    }

    /// Decode the canonical byte form, rejecting anything non-canonical:
    /// bad utf-8, invalid attribute names, unsorted or duplicate attributes,
    /// or trailing bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let mut r = Reader::new(bytes);
        let subject_id = r.string()?;
        let org_id = r.string()?;
        let count = r.u32()? as usize;
        let mut attributes = BTreeSet::new();
        let mut prev: Option<AttributeName> = None;
        for _ in 0..count {
            let attr = AttributeName::new(r.string()?)?;
            if prev.as_ref().is_some_and(|p| *p >= attr) {
                return Err(IdentityError::Malformed("attributes not strictly sorted".into()));
            }
            prev = Some(attr.clone());
            attributes.insert(attr);
        }
        let issuer = r.string()?;
        let signature = r.chunk()?.to_vec();
        if !r.done() {
            return Err(IdentityError::Malformed("trailing bytes".into()));
        }
        Ok(Self {
            subject_id,
            org_id,
            attributes,
            issuer,
            signature,
        })
    }

    /// Human-readable form, one attribute per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("subject: {}\n", self.subject_id));
        out.push_str(&format!("org: {}\n", self.org_id));
        out.push_str(&format!("issuer: {}\n", self.issuer));
        for attr in &self.attributes {
            out.push_str(&format!("attribute: {attr}\n"));
        }
        out.push_str(&format!("signature: {}\n", hex::encode(&self.signature)));
        out
    }

    /// True iff the signature matches the canonical serialization under
    /// `key`. Malformed signatures yield `false`, never an error.
    pub fn verify(&self, key: &VerifyingKey) -> bool {
        let Ok(sig) = Signature::from_slice(&self.signature) else {
            return false;
        };
        key.verify(&self.signing_bytes(), &sig).is_ok()
    }

    /// Attribute assertion is exactly set membership.
    pub fn has_attribute(&self, attr: &AttributeName) -> bool {
        self.attributes.contains(attr)
    }
}

/// Verification keys of the deployment's known organizations.
#[derive(Debug, Clone, Default)]
pub struct CaKeyring {
    keys: HashMap<String, VerifyingKey>,
}

impl CaKeyring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, org_id: impl Into<String>, key: VerifyingKey) {
        self.keys.insert(org_id.into(), key);
    }

    pub fn register_ca(&mut self, ca: &CertificateAuthority) {
        self.register(ca.org_id(), ca.verification_key());
    }

    pub fn key_for(&self, org_id: &str) -> Option<&VerifyingKey> {
        self.keys.get(org_id)
    }

    /// Verify a certificate against the key of its stated issuer. Unknown
    /// issuers verify as `false`.
    pub fn verify(&self, cert: &Certificate) -> bool {
        self.key_for(&cert.issuer).is_some_and(|key| cert.verify(key))
    }
}

/// The authenticated view of a submitter, extracted from a verified
/// certificate. Contract code sees only this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientIdentity {
    pub subject_id: String,
    pub org_id: String,
    pub attributes: BTreeSet<AttributeName>,
}

impl ClientIdentity {
    /// Verify `cert` against the keyring and extract subject, org and
    /// attributes.
    pub fn from_certificate(cert: &Certificate, keyring: &CaKeyring) -> Result<Self, IdentityError> {
        if !keyring.verify(cert) {
            return Err(IdentityError::Unverifiable {
                subject: cert.subject_id.clone(),
                issuer: cert.issuer.clone(),
            });
        }
        Ok(Self {
            subject_id: cert.subject_id.clone(),
            org_id: cert.org_id.clone(),
            attributes: cert.attributes.clone(),
        })
    }

    pub fn has_attribute(&self, attr: &AttributeName) -> bool {
        self.attributes.contains(attr)
    }
}
