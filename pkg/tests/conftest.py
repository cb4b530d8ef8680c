"""Shared helpers for the test suite.

numpy's own Generator is used freely here to produce test cases; the
package code under test only ever draws from angmf.rng.RngState.
"""

import numpy as np


def random_unit(gen, n=None):
    """Uniform random unit vector(s) from a numpy Generator."""
    shape = (3,) if n is None else (n, 3)
    v = gen.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_rotation(gen):
    """Haar-ish random rotation matrix via QR with sign fix."""
    q, r = np.linalg.qr(gen.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
