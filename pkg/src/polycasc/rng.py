"""Counter-based randomness: every variate is a pure function of (key, coordinates).

Replicas and lattice sites are addressed by hashing, never by consuming a
sequential stream, so values do not depend on query order, chunking, or the
number of workers.  The mixer is the splitmix64 finalizer, which has full
avalanche; statistical quality is plenty for Monte Carlo.

All helpers operate on uint64 ndarrays (scalar uint64 arithmetic in numpy
warns on wraparound; array arithmetic wraps silently, which is what we want).
"""

import hashlib

import numpy as np

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)


def mix64(z):
    """Splitmix64 output function on a uint64 array: advance by the golden
    gamma, then finalize. mix64(z) is the first splitmix64 draw from state z.

    errstate because numpy warns on uint64 wraparound in scalar (0-d) ops;
    wraparound is exactly the intended modular arithmetic here.
    """
    with np.errstate(over="ignore"):
        z = np.asarray(z) + GOLDEN
        z = (z ^ (z >> U64(30))) * _M1
        z = (z ^ (z >> U64(27))) * _M2
        return z ^ (z >> U64(31))


def as_u64(values) -> np.ndarray:
    """Reinterpret integers as uint64 mod 2^64 (two's complement for
    negatives; Python ints of any size accepted)."""
    arr = np.asarray(values)
    if arr.dtype == U64:
        return arr
    if arr.dtype.kind == "i":
        return arr.astype(np.int64).view(U64)
    if arr.dtype.kind == "u":
        return arr.astype(U64)
    masked = [int(v) & 0xFFFFFFFFFFFFFFFF for v in np.ravel(arr)]
    return np.asarray(masked, dtype=U64).reshape(arr.shape)


def derive_key(*parts) -> int:
    """64-bit key from a descriptor tuple, for job/study seed derivation.

    Hash-based (blake2b) so any printable descriptor works; stable across
    platforms and processes.
    """
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def replica_seeds(seed: int, start: int, count: int) -> np.ndarray:
    """Slab seeds for replicas [start, start+count): the splitmix64 state
    sequence seed + r*GOLDEN. Depends only on (seed, r), so any chunking or
    worker assignment sees identical environments."""
    r = np.arange(start, start + count, dtype=U64)
    with np.errstate(over="ignore"):
        return as_u64([seed]).reshape(()) + GOLDEN * r


def slab_key(seed) -> np.ndarray:
    """Hash key of the disorder field addressed by ``seed`` (array-friendly)."""
    return mix64(as_u64(seed))


def time_prefix(keys: np.ndarray, j: int) -> np.ndarray:
    """Partial hash after folding the time index; fold coordinates next."""
    return mix64(keys ^ as_u64([j]).reshape(()))


def fold_coord(prefix: np.ndarray, coord) -> np.ndarray:
    """Fold one site coordinate (array broadcast) into a partial hash."""
    return mix64(prefix ^ as_u64(coord))


def uniform01(h: np.ndarray) -> np.ndarray:
    """Map hashes to doubles in the open interval (0, 1)."""
    return ((h >> U64(11)).astype(np.float64) + 0.5) * 2.0**-53


def site_hash(seed, j: int, coords, dim: int = 1) -> np.ndarray:
    """Hash of lattice site(s) at time j. For dim=1 ``coords`` is an integer
    array of x values; for dim>=2 its last axis holds the dim coordinates.
    Pure in (seed, j, site): independent of query order and batching."""
    c = np.asarray(coords, dtype=np.int64)
    prefix = time_prefix(slab_key(seed), j)
    if dim == 1:
        return fold_coord(prefix, c)
    if c.shape[-1] != dim:
        raise ValueError(f"coords last axis {c.shape[-1]} != dim {dim}")
    h = prefix
    for k in range(dim):
        h = fold_coord(h, c[..., k])
    return h
