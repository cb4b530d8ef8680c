"""Synthetic scenes: two-plane boundary mixtures and full training frames.

The corruption model for a pixel near a plane boundary is a two-component
mixture: with probability ``contamination`` its ground truth snaps to the
neighboring plane's normal, and either way it gets symmetric AngMF jitter.
This is the minimal model producing the asymmetric noise that makes
boundary pixels systematically harder than interior ones.

Frame feature recipe (version 1, fixed so trainer results stay
reproducible; ``FEATURE_DIM`` = 6):

    f[0:3]  clean plane normal of the pixel's strip plus uniform noise
            in [-noise_amp, +noise_amp] per component
    f[3]    distance to the nearest plane boundary in pixels, clipped to
            4 and scaled to [0, 1] (1.0 when the frame has one plane)
    f[4:6]  uniform [0, 1) distractor channels

The contamination flip is *not* observable in the features; only its
statistics are (via the distance channel), so a trainer must model it as
per-pixel uncertainty rather than regress it away.

Draw order from the RngState (the determinism contract):
  1. one uniform per boundary pixel, row-major, for the mixture choice;
  2. if jitter is enabled, one radial block then one azimuth block of
     H * W uniforms each, matching the sampler convention;
  3. one block of 5 * H * W uniforms reshaped to (H, W, 5): the first
     three channels perturb f[0:3], the last two fill f[4:6].
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mapio import NormalMap
from .sampling import invert_error_cdf
from .sphere import as_unit, tangent_basis

__all__ = ["TwoPlaneScene", "SyntheticFrame", "sample_boundary_pixels", "make_frame", "FEATURE_DIM"]

FEATURE_DIM = 6
BAND_PX = 2.0


@dataclass(frozen=True)
class TwoPlaneScene:
    normal_a: np.ndarray
    normal_b: np.ndarray
    contamination: float
    jitter_kappa: float

    def __post_init__(self):
        object.__setattr__(self, "normal_a", as_unit(self.normal_a))
        object.__setattr__(self, "normal_b", as_unit(self.normal_b))
        if not 0.0 <= self.contamination < 0.5:
            raise DomainError(f"contamination must lie in [0, 0.5), got {self.contamination}")
        if not (math.isfinite(self.jitter_kappa) and self.jitter_kappa > 0.0):
            raise DomainError(f"jitter_kappa must be finite and > 0, got {self.jitter_kappa}")


@dataclass(frozen=True)
class SyntheticFrame:
    gt: NormalMap
    features: np.ndarray  # (H, W, FEATURE_DIM) float64
    boundary_mask: np.ndarray  # (H, W) bool

    @property
    def height(self):
        return self.gt.height

    @property
    def width(self):
        return self.gt.width


def _jitter(bases, kappa, rng):
    """AngMF jitter around per-row base directions (radial draws, then azimuth)."""
    count = bases.shape[0]
    u = rng.uniform(count)
    phi = 2.0 * math.pi * rng.uniform(count)
    alpha = invert_error_cdf(kappa, u)
    e1, e2 = tangent_basis(bases)
    sin_a = np.sin(alpha)
    return (
        np.cos(alpha)[:, None] * bases
        + (sin_a * np.cos(phi))[:, None] * e1
        + (sin_a * np.sin(phi))[:, None] * e2
    )


def sample_boundary_pixels(scene, rng, count):
    """Draw ``count`` boundary-pixel ground truths from the mixture model.

    Choice uniforms come first (one per sample), then one jitter pass over
    all samples around their chosen base normals.
    """
    count = int(count)
    if count < 0:
        raise DomainError(f"cannot draw {count} samples")
    pick_b = rng.uniform(count) < scene.contamination
    bases = np.where(pick_b[:, None], scene.normal_b, scene.normal_a)
    return _jitter(bases, scene.jitter_kappa, rng)


def make_frame(width, height, plane_normals, rng, jitter_kappa=None,
               contamination=0.0, noise_amp=0.05):
    """Build a SyntheticFrame of vertical plane strips.

    ``plane_normals`` become equal-width vertical strips (the last strip
    absorbs the remainder).  Pixels within ``BAND_PX`` of an internal
    boundary form the boundary mask; their gt flips to the across-edge
    plane with probability ``contamination``.  ``jitter_kappa = None``
    disables jitter entirely (exact plane normals).
    """
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise DomainError(f"frame must be at least 1x1, got {width}x{height}")
    normals = np.stack([as_unit(n) for n in plane_normals])
    n_planes = normals.shape[0]
    if n_planes < 1 or n_planes > width:
        raise DomainError(f"{n_planes} planes do not fit in width {width}")
    if not 0.0 <= contamination < 0.5:
        raise DomainError(f"contamination must lie in [0, 0.5), got {contamination}")
    if jitter_kappa is not None and not (math.isfinite(jitter_kappa) and jitter_kappa > 0.0):
        raise DomainError(f"jitter_kappa must be finite and > 0, got {jitter_kappa}")

    strip = width // n_planes
    cols = np.arange(width)
    plane_of_col = np.minimum(cols // strip, n_planes - 1)
    edges = strip * np.arange(1, n_planes)  # internal boundaries, in column units

    if edges.size:
        dist_per_edge = np.abs((cols + 0.5)[:, None] - edges[None, :])
        nearest = np.argmin(dist_per_edge, axis=1)
        dist = dist_per_edge[cols, nearest]
        # neighbor plane: the one on the other side of the nearest edge
        left_of_edge = (cols + 0.5) < edges[nearest]
        neighbor_of_col = np.where(left_of_edge, nearest + 1, nearest)
        neighbor_of_col = np.clip(neighbor_of_col, 0, n_planes - 1)
    else:
        dist = np.full(width, np.inf)
        neighbor_of_col = plane_of_col.copy()
    boundary_col = dist < BAND_PX

    own = normals[plane_of_col]  # (W, 3)
    neighbor = normals[neighbor_of_col]
    boundary_mask = np.broadcast_to(boundary_col, (height, width)).copy()

    gt = np.broadcast_to(own, (height, width, 3)).astype(np.float64).copy()
    n_boundary = int(boundary_mask.sum())
    if n_boundary:
        flips = rng.uniform(n_boundary) < contamination
        flat_gt = gt.reshape(-1, 3)
        b_idx = np.flatnonzero(boundary_mask.ravel())
        nb = np.broadcast_to(neighbor, (height, width, 3)).reshape(-1, 3)
        flat_gt[b_idx[flips]] = nb[b_idx[flips]]

    if jitter_kappa is not None:
        gt = _jitter(gt.reshape(-1, 3), jitter_kappa, rng).reshape(height, width, 3)

    noise = rng.uniform(5 * height * width).reshape(height, width, 5)
    features = np.empty((height, width, FEATURE_DIM))
    features[..., 0:3] = own[None, :, :] + noise_amp * (2.0 * noise[..., 0:3] - 1.0)
    features[..., 3] = np.broadcast_to(np.minimum(dist, 4.0) / 4.0, (height, width))
    features[..., 4:6] = noise[..., 3:5]

    return SyntheticFrame(
        gt=NormalMap.from_vectors(gt),
        features=features,
        boundary_mask=boundary_mask,
    )
