"""Per-device message authentication with pre-shared HMAC-SHA256 keys.

This stands in for a transport security channel inside the simulator:
authenticity only, no confidentiality. Key distribution is out of scope;
simulation keys are derived deterministically from the scenario seed.
"""

from __future__ import annotations

import hashlib
import hmac

from edgeti.errors import KeyLookupError, ParameterError
from edgeti.domain.types import DeviceId, SignedEnvelope

MAC_KEY_BYTES = 32


def _check_key(key: bytes) -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) != MAC_KEY_BYTES:
        raise ParameterError("MAC key must be exactly 32 bytes")


def sign(payload: bytes, sender: DeviceId, key: bytes) -> SignedEnvelope:
    """Wrap a payload in an envelope authenticated under the sender's key."""
    _check_key(key)
    tag = hmac.new(bytes(key), payload, hashlib.sha256).digest()
    return SignedEnvelope(payload=payload, sender=sender, sig=tag)


def verify(envelope: SignedEnvelope, key: bytes) -> bool:
    """Constant-time check that the envelope's tag matches the key."""
    _check_key(key)
    expected = hmac.new(bytes(key), envelope.payload, hashlib.sha256).digest()
    return hmac.compare_digest(expected, envelope.sig)


def derive_key(seed: int, device: DeviceId) -> bytes:
    """Deterministic 32-byte simulation key for a device."""
    return hashlib.sha256(f"{seed}:key:{device}".encode("utf-8")).digest()


class KeyRing:
    """Registry of pre-shared keys, one per device identity."""

    def __init__(self) -> None:
        self._keys: dict[DeviceId, bytes] = {}

    def register(self, device: DeviceId, key: bytes) -> None:
        _check_key(key)
        self._keys[device] = bytes(key)

    def key_for(self, device: DeviceId) -> bytes:
        try:
            return self._keys[device]
        except KeyError:
            raise KeyLookupError(f"no key registered for {device}") from None

    def knows(self, device: DeviceId) -> bool:
        return device in self._keys

    def devices(self) -> list[DeviceId]:
        return list(self._keys)

    def sign_as(self, device: DeviceId, payload: bytes) -> SignedEnvelope:
        return sign(payload, device, self.key_for(device))

    def verify_envelope(self, envelope: SignedEnvelope) -> bool:
        """True iff the sender is known and the tag verifies under its key."""
        key = self._keys.get(envelope.sender)
        if key is None:
            return False
        return verify(envelope, key)
