"""Deterministic seed derivation.

All randomness in a run flows from one master seed.  Sub-streams (per
realization, per calibration pair, per command) get their own seeds through
``seed_split``, which hashes ``(master_seed, stream_id)`` with SHA-256.  The
derivation is counter-based rather than stateful, so it is stable across
releases and across process layouts: worker k always sees the same seed no
matter how many workers run.
"""

from __future__ import annotations

import hashlib
import struct

__all__ = ["seed_split"]

_DOMAIN = b"smpde.seed_split.v1"


def _encode_stream(stream_id) -> bytes:
    if isinstance(stream_id, bool):
        raise TypeError("stream_id must be an int, str, or tuple, not bool")
    if isinstance(stream_id, int):
        return b"i" + stream_id.to_bytes(16, "little", signed=True)
    if isinstance(stream_id, str):
        raw = stream_id.encode("utf-8")
        return b"s" + struct.pack("<I", len(raw)) + raw
    if isinstance(stream_id, tuple):
        parts = [b"t", struct.pack("<I", len(stream_id))]
        parts.extend(_encode_stream(part) for part in stream_id)
        return b"".join(parts)
    raise TypeError(f"unsupported stream_id type: {type(stream_id).__name__}")


def seed_split(master_seed: int, stream_id) -> int:
    """Derive a 64-bit sub-seed from ``(master_seed, stream_id)``.

    ``stream_id`` may be an int, a str, or a (possibly nested) tuple of
    those.  Identical inputs always produce identical outputs; distinct
    stream ids collide only with SHA-256 birthday probability.
    """
    h = hashlib.sha256()
    h.update(_DOMAIN)
    h.update(int(master_seed).to_bytes(16, "little", signed=True))
    h.update(_encode_stream(stream_id))
    return int.from_bytes(h.digest()[:8], "little")
