"""
On-disk cache of n-fold lattice laws.

File layout (little-endian):
    header  magic b'BJLC', version u16, sha256 key (32 bytes), delta f64,
            origin f64, spill_low, spill_high, spill_mixed, low_ceiling,
            high_floor (5 × f64), length u64
    body    ``length`` float64 cell masses

The cache never changes results: a hit returns exactly the stored array and
a miss recomputes.
"""

import hashlib
import logging
import struct

import numpy as np

from main.utils import canonical_json, lab_setting

from .pmf import LatticePMF

logger = logging.getLogger(__name__)

MAGIC = b'BJLC'
VERSION = 1
HEADER = struct.Struct('<4sH32sdd5dQ')


def cache_key(**parts):
    """32-byte key from (family hash, delta, lo, hi, n, restriction, ...)."""
    return hashlib.sha256(canonical_json(parts).encode('utf-8')).digest()


def _path(key):
    return lab_setting('CACHE_DIR') / f"{key.hex()}.bjlc"


def store(key, pmf):
    path = _path(key)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = HEADER.pack(
        MAGIC, VERSION, key, pmf.delta, pmf.origin,
        pmf.spill_low, pmf.spill_high, pmf.spill_mixed, pmf.low_ceiling, pmf.high_floor,
        pmf.size,
    )
    tmp = path.with_suffix('.tmp')
    with open(tmp, 'wb') as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pmf.masses, dtype='<f8').tobytes())
    tmp.replace(path)
    logger.debug("cached n-fold law %s (%d cells)", key.hex()[:12], pmf.size)
    return path


def load(key):
    """Stored law for ``key`` or None (missing, foreign or damaged file)."""
    path = _path(key)
    if not path.exists():
        return None
    data = path.read_bytes()
    if len(data) < HEADER.size:
        logger.warning("cache file %s is truncated", path.name)
        return None
    (magic, version, stored_key, delta, origin,
     spill_low, spill_high, spill_mixed, low_ceiling, high_floor, length) = HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION or stored_key != key:
        logger.warning("cache file %s has a foreign header", path.name)
        return None
    body = data[HEADER.size:]
    if len(body) != 8 * length:
        logger.warning("cache file %s has a short body", path.name)
        return None
    masses = np.frombuffer(body, dtype='<f8').astype(float)
    return LatticePMF(
        origin=origin, delta=delta, masses=masses,
        spill_low=spill_low, spill_high=spill_high, spill_mixed=spill_mixed,
        low_ceiling=low_ceiling, high_floor=high_floor,
    )
