"""Geometry of the unit 2-torus and reproducible random substreams.

Points live in [0, 1)^2 with side length 1, so the smallest nonzero
eigenvalue of the (negative) Laplacian is 4*pi^2.  All functions are
vectorized: coordinates sit in the last axis of shape ``(..., 2)`` arrays,
and scalars broadcast the usual numpy way.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "wrap",
    "displacement",
    "dist",
    "dist_linf",
    "wrapped_gaussian",
    "RngStream",
]


def wrap(p):
    """Reduce coordinates modulo 1 into [0, 1).

    Parameters
    ----------
    p : array_like, shape (..., 2) or scalar pair
        Points in R^2 (or any broadcastable coordinate array).

    Returns
    -------
    ndarray
        Same shape, every entry in [0, 1).  Non-finite input raises
        ``ValueError``.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("wrap: coordinates must be finite")
    out = np.mod(p, 1.0)
    # np.mod can return 1.0 when p is a tiny negative number; fold it back.
    return np.where(out >= 1.0, out - 1.0, out)


def displacement(x, y):
    """Minimal wrapped difference y - x, componentwise in [-1/2, 1/2).

    For dist(x, y) < 1/2 this is the unique lift of y - x of length < 1/2
    (the inverse exponential map of the flat torus).  The tie at exactly
    +-1/2 is resolved to -1/2, making the map a deterministic function.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    # subtracting the nearest integer is exact for |d| < 1/2, so separations
    # down to machine epsilon survive (a mod-based wrap would round them
    # away through 0.5); round-half-to-even can leave +1/2, fold it to -1/2
    d = d - np.round(d)
    return np.where(d == 0.5, -0.5, d)


def dist(x, y):
    """Euclidean torus distance (2-norm of the minimal displacement)."""
    d = displacement(x, y)
    return np.sqrt(np.sum(d * d, axis=-1))


def dist_linf(x, y):
    """Max-norm torus distance (infinity norm of the minimal displacement)."""
    return np.max(np.abs(displacement(x, y)), axis=-1)


def wrapped_gaussian(variance, rng, size=None):
    """Sample a centered Gaussian on R^2 and wrap it to the torus.

    Sampling on R^2 and reducing mod 1 is exact in law for the periodized
    Gaussian, so no image-sum truncation is involved.  The result is
    returned as a minimal displacement with components in [-1/2, 1/2).

    Parameters
    ----------
    variance : float
        Per-coordinate variance, >= 0.
    rng : RngStream or numpy.random.Generator
    size : int or tuple, optional
        Leading sample shape; the trailing axis is always 2.
    """
    if variance < 0:
        raise ValueError(f"wrapped_gaussian: variance must be >= 0, got {variance}")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    shape = (2,) if size is None else tuple(np.atleast_1d(size)) + (2,)
    if variance == 0:
        return np.zeros(shape)
    z = gen.normal(0.0, np.sqrt(variance), size=shape)
    return displacement(np.zeros_like(z), z)


def _splitmix64(z):
    # Standard splitmix64 finalizer; used to hash-combine stream ids so
    # nested substream derivation stays order-independent.
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class RngStream:
    """Counter-derived random substream of a master seed.

    Distinct ``(master_seed, stream_id)`` pairs yield statistically
    independent PCG64 streams; identical pairs reproduce identical output
    bit-exactly.  A stream is single-owner: share the *ids*, not the
    object, across workers.
    """

    def __init__(self, master_seed, stream_id=0):
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self._generator = None

    @property
    def generator(self):
        """The underlying ``numpy.random.Generator`` (created lazily)."""
        if self._generator is None:
            ss = np.random.SeedSequence(
                entropy=self.master_seed, spawn_key=(self.stream_id,)
            )
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator

    def substream(self, child_id):
        """Derive an independent child stream; deterministic in ``child_id``."""
        mixed = _splitmix64((self.stream_id << 1) ^ _splitmix64(int(child_id)))
        return RngStream(self.master_seed, mixed)

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"
