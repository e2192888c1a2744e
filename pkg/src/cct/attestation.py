"""Simulated trusted-execution trust layer.

Stands in for the hardware attestation chain: a platform Ed25519 key signs
quotes binding an enclave measurement to an ephemeral session key, clients
verify quotes against a well-known platform verification key, both sides run
X25519 + HKDF to get direction-separated channel keys, and persistent state
is sealed under a key bound to the measurement. None of this is
hardware-backed; the point is to preserve the trust topology (clients trust
a platform root, not the service operator) so the protocol's privacy
properties are machine-checkable.

Primitives: Ed25519 signatures, X25519 key agreement, HKDF-SHA256,
ChaCha20-Poly1305 AEAD.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from cct.errors import AttestationError, EnvelopeError, KeyExchangeError, SealError
from cct.wire import canonical_decode, canonical_encode

MEASUREMENT_LEN = 32
SESSION_ID_LEN = 16
NONCE_LEN = 12

_MEAS_LABEL = b"CCT-MEAS-v1"
_SEAL_LABEL = b"CCT-SEAL-v1"
_SID_LABEL = b"CCT-SID-v1"
_C2E_LABEL = b"CCT-C2E-v1"
_E2C_LABEL = b"CCT-E2C-v1"
_PSIGN_LABEL = b"CCT-PSIGN-v1"

CLIENT_TO_ENCLAVE = "c2e"
ENCLAVE_TO_CLIENT = "e2c"


def _hkdf(ikm: bytes, info: bytes, length: int, salt: bytes | None = None) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=salt, info=info).derive(ikm)


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Measurement:
    """32-byte hash identifying the enclave code and configuration."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != MEASUREMENT_LEN:
            raise ValueError(f"measurement must be {MEASUREMENT_LEN} bytes")

    def hex(self) -> str:
        return self.value.hex()


def compute_measurement(code_version: str, config_digest: bytes) -> Measurement:
    """Deterministic stand-in for a hardware code measurement."""
    if len(config_digest) != 32:
        raise ValueError("config digest must be 32 bytes")
    digest = hashlib.sha256(
        _MEAS_LABEL + code_version.encode("utf-8") + config_digest
    ).digest()
    return Measurement(digest)


# ---------------------------------------------------------------------------
# Platform keys and quotes
# ---------------------------------------------------------------------------

def platform_signing_key(platform_secret: bytes) -> Ed25519PrivateKey:
    """Quote-signing key derived from the platform secret.

    One platform secret drives both quote signing and sealing-key
    derivation, with disjoint HKDF labels.
    """
    if len(platform_secret) != 32:
        raise ValueError("platform secret must be 32 bytes")
    seed = _hkdf(platform_secret, _PSIGN_LABEL, 32)
    return Ed25519PrivateKey.from_private_bytes(seed)


def platform_verify_key(platform_secret: bytes) -> bytes:
    return platform_signing_key(platform_secret).public_key().public_bytes_raw()


@dataclass(frozen=True)
class AttestationQuote:
    """Platform-signed statement binding a measurement to a session key."""

    measurement: Measurement
    enclave_session_pub: bytes
    platform_signature: bytes

    def __post_init__(self):
        if len(self.enclave_session_pub) != 32:
            raise ValueError("enclave session public key must be 32 bytes")
        if len(self.platform_signature) != 64:
            raise ValueError("platform signature must be 64 bytes")

    def signed_payload(self) -> bytes:
        return self.measurement.value + self.enclave_session_pub


def generate_quote(
    signing_key: Ed25519PrivateKey,
    measurement: Measurement,
    enclave_session_pub: bytes,
) -> AttestationQuote:
    payload = measurement.value + enclave_session_pub
    return AttestationQuote(
        measurement=measurement,
        enclave_session_pub=enclave_session_pub,
        platform_signature=signing_key.sign(payload),
    )


def verify_quote(
    quote: AttestationQuote,
    expected_measurement: Measurement,
    verify_key: bytes,
) -> None:
    """Accept iff the signature verifies and the measurement is the expected one.

    Raises AttestationError with reason 'bad_signature' or 'wrong_measurement'.
    """
    try:
        public = Ed25519PublicKey.from_public_bytes(verify_key)
        public.verify(quote.platform_signature, quote.signed_payload())
    except (InvalidSignature, ValueError):
        raise AttestationError("bad_signature") from None
    if quote.measurement != expected_measurement:
        raise AttestationError("wrong_measurement")


# ---------------------------------------------------------------------------
# Session establishment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionKeys:
    """Direction-separated channel keys plus the public session id."""

    client_to_enclave_key: bytes
    enclave_to_client_key: bytes
    session_id: bytes


def _derive_session_keys(shared: bytes) -> SessionKeys:
    return SessionKeys(
        client_to_enclave_key=_hkdf(shared, _C2E_LABEL, 32),
        enclave_to_client_key=_hkdf(shared, _E2C_LABEL, 32),
        session_id=_hkdf(shared, _SID_LABEL, SESSION_ID_LEN),
    )


def _exchange(private: X25519PrivateKey, peer_pub: bytes) -> bytes:
    try:
        shared = private.exchange(X25519PublicKey.from_public_bytes(peer_pub))
    except ValueError:
        raise KeyExchangeError("invalid key exchange") from None
    # cryptography rejects the all-zero output itself, but keep the check
    # explicit: low-order peer keys must never yield usable session keys
    if shared == bytes(32):
        raise KeyExchangeError("invalid key exchange")
    return shared


def establish_session(
    client_ephemeral_secret: X25519PrivateKey, quote: AttestationQuote
) -> SessionKeys:
    """Client side; callers must have verified the quote first."""
    return _derive_session_keys(
        _exchange(client_ephemeral_secret, quote.enclave_session_pub)
    )


def accept_session(
    enclave_ephemeral_secret: X25519PrivateKey, client_session_pub: bytes
) -> SessionKeys:
    """Enclave side of the same derivation."""
    return _derive_session_keys(_exchange(enclave_ephemeral_secret, client_session_pub))


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncryptedEnvelope:
    """AEAD-protected message deliverable only inside the session."""

    session_id: bytes
    sequence: int
    nonce: bytes
    ciphertext: bytes

    def to_wire(self) -> dict:
        return {
            "ciphertext": self.ciphertext.hex(),
            "nonce": self.nonce.hex(),
            "sequence": self.sequence,
            "session_id": self.session_id.hex(),
            "type": "envelope",
        }

    @classmethod
    def from_wire(cls, msg: dict) -> "EncryptedEnvelope":
        return cls(
            session_id=bytes.fromhex(msg["session_id"]),
            sequence=msg["sequence"],
            nonce=bytes.fromhex(msg["nonce"]),
            ciphertext=bytes.fromhex(msg["ciphertext"]),
        )


def _direction_key(keys: SessionKeys, direction: str) -> bytes:
    if direction == CLIENT_TO_ENCLAVE:
        return keys.client_to_enclave_key
    if direction == ENCLAVE_TO_CLIENT:
        return keys.enclave_to_client_key
    raise ValueError(f"unknown direction: {direction!r}")


def _sequence_nonce(sequence: int) -> bytes:
    return bytes(4) + sequence.to_bytes(8, "big")


def encrypt_envelope(
    keys: SessionKeys, direction: str, sequence: int, plaintext: bytes
) -> EncryptedEnvelope:
    if not 0 < sequence < 2**64:
        raise ValueError("sequence out of range")
    nonce = _sequence_nonce(sequence)
    aead = ChaCha20Poly1305(_direction_key(keys, direction))
    ciphertext = aead.encrypt(nonce, plaintext, keys.session_id)
    return EncryptedEnvelope(
        session_id=keys.session_id,
        sequence=sequence,
        nonce=nonce,
        ciphertext=ciphertext,
    )


def decrypt_envelope(
    keys: SessionKeys,
    direction: str,
    envelope: EncryptedEnvelope,
    last_sequence: int = 0,
) -> bytes:
    """Open an envelope, enforcing the strictly-increasing sequence rule.

    last_sequence is the highest sequence accepted so far in this direction;
    anything not strictly above it is a replay.
    """
    if envelope.sequence <= last_sequence:
        raise EnvelopeError("replay")
    if (
        envelope.session_id != keys.session_id
        or envelope.nonce != _sequence_nonce(envelope.sequence)
    ):
        raise EnvelopeError("decrypt failed")
    aead = ChaCha20Poly1305(_direction_key(keys, direction))
    try:
        return aead.decrypt(envelope.nonce, envelope.ciphertext, keys.session_id)
    except InvalidTag:
        raise EnvelopeError("decrypt failed") from None


class SecureChannel:
    """Stateful per-direction sequence bookkeeping over one session.

    Each endpoint owns one; `sender` names the direction this side encrypts.
    """

    def __init__(self, keys: SessionKeys, sender: str):
        if sender not in (CLIENT_TO_ENCLAVE, ENCLAVE_TO_CLIENT):
            raise ValueError(f"unknown direction: {sender!r}")
        self.keys = keys
        self._send_direction = sender
        self._recv_direction = (
            ENCLAVE_TO_CLIENT if sender == CLIENT_TO_ENCLAVE else CLIENT_TO_ENCLAVE
        )
        self._next_send = 1
        self._last_recv = 0

    def encrypt(self, plaintext: bytes) -> EncryptedEnvelope:
        envelope = encrypt_envelope(
            self.keys, self._send_direction, self._next_send, plaintext
        )
        self._next_send += 1
        return envelope

    def decrypt(self, envelope: EncryptedEnvelope) -> bytes:
        plaintext = decrypt_envelope(
            self.keys, self._recv_direction, envelope, self._last_recv
        )
        self._last_recv = envelope.sequence
        return plaintext


# ---------------------------------------------------------------------------
# Sealing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SealedBlob:
    """State encrypted under a key bound to the enclave measurement."""

    nonce: bytes
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return canonical_encode(
            {"ciphertext": self.ciphertext.hex(), "nonce": self.nonce.hex()}
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SealedBlob":
        obj = canonical_decode(raw)
        if not isinstance(obj, dict) or set(obj) != {"ciphertext", "nonce"}:
            raise SealError("unseal failed")
        return cls(
            nonce=bytes.fromhex(obj["nonce"]),
            ciphertext=bytes.fromhex(obj["ciphertext"]),
        )


def _sealing_key(measurement: Measurement, platform_secret: bytes) -> bytes:
    return _hkdf(platform_secret, _SEAL_LABEL, 32, salt=measurement.value)


def seal(data: bytes, measurement: Measurement, platform_secret: bytes) -> SealedBlob:
    nonce = secrets.token_bytes(NONCE_LEN)
    aead = ChaCha20Poly1305(_sealing_key(measurement, platform_secret))
    return SealedBlob(nonce=nonce, ciphertext=aead.encrypt(nonce, data, None))


def unseal(blob: SealedBlob, measurement: Measurement, platform_secret: bytes) -> bytes:
    aead = ChaCha20Poly1305(_sealing_key(measurement, platform_secret))
    try:
        return aead.decrypt(blob.nonce, blob.ciphertext, None)
    except (InvalidTag, ValueError):
        raise SealError("unseal failed") from None
