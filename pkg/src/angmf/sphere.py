"""Primitives for unit vectors on the 2-sphere.

Directions are plain numpy arrays of shape (..., 3).  Everything here is
vectorized over leading axes so grids of normals go through the same code
path as single vectors.
"""

import numpy as np

from .errors import DegenerateVector

# Norm drift tolerated when accepting an "already unit" vector.
UNIT_NORM_TOL = 1e-6


def normalize(v):
    """Scale ``v`` to unit length along the last axis.

    Raises DegenerateVector when any row has zero norm.  Prescaling by the
    largest component keeps the division safe for very large or denormal
    inputs.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise DegenerateVector(f"expected 3 components on the last axis, got shape {v.shape}")
    scale = np.max(np.abs(v), axis=-1, keepdims=True)
    if not np.all(scale > 0.0):
        raise DegenerateVector("zero vector has no direction")
    w = v / scale
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def as_unit(v):
    """Accept a vector that should already be unit length.

    Renormalizes silently while |norm - 1| < 1e-6 and raises
    DegenerateVector for anything further off, which almost always means a
    bookkeeping bug in the caller rather than harmless float drift.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise DegenerateVector(f"expected 3 components on the last axis, got shape {v.shape}")
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if not np.all(np.abs(n - 1.0) < UNIT_NORM_TOL):
        raise DegenerateVector("norm drifted more than 1e-6 from unit length")
    return v / n


def angle_between(u, v):
    """Geodesic angle in [0, pi] between unit vectors.

    The dot product is clamped to [-1, 1] so float drift at (anti)parallel
    inputs cannot push acos out of its domain.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    return np.arccos(d)


def tangent_basis(mu):
    """Deterministic orthonormal basis (e1, e2) of the tangent plane at mu.

    The triple (e1, e2, mu) is right handed: cross(e1, e2) == mu.  The
    helper axis is the world axis least aligned with mu, which keeps the
    cross product well conditioned everywhere on the sphere.
    """
    mu = np.asarray(mu, dtype=np.float64)
    helper = np.zeros_like(mu)
    idx = np.argmin(np.abs(mu), axis=-1)
    np.put_along_axis(helper, np.expand_dims(idx, -1), 1.0, axis=-1)
    e1 = np.cross(helper, mu)
    e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(mu, e1)
    return e1, e2
