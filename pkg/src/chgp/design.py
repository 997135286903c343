"""Spatial geometry and experimental designs."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import DomainError

__all__ = [
    "EARTH_RADIUS_KM",
    "Locations",
    "pairwise_dist",
    "condensed_dist",
    "cross_dist",
    "latin_hypercube",
    "maximin_lhs",
    "regular_grid",
    "Semivariogram",
    "directional_semivariogram",
]

EARTH_RADIUS_KM = 6371.0088
METRICS = ("euclidean", "chordal", "great_circle")


@dataclass(frozen=True, eq=False)
class Locations:
    """A set of ``n`` locations and the metric used to measure them.

    For ``"chordal"`` and ``"great_circle"`` the coordinates are
    ``(lon, lat)`` in degrees and distances are in the units of ``radius``.
    """

    coords: np.ndarray
    metric: str = "euclidean"
    radius: float = EARTH_RADIUS_KM

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1:
            raise DomainError("coords must be an (n, d) array with n >= 1")
        if not np.all(np.isfinite(c)):
            raise DomainError("coords must be finite")
        if self.metric not in METRICS:
            raise DomainError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.metric == "euclidean":
            if c.shape[1] not in (1, 2, 3):
                raise DomainError("euclidean locations need d in {1, 2, 3}")
        else:
            if c.shape[1] != 2:
                raise DomainError("spherical locations need (lon, lat) columns")
            if np.any(np.abs(c[:, 0]) > 180) or np.any(np.abs(c[:, 1]) > 90):
                raise DomainError("lon must lie in [-180, 180] and lat in [-90, 90]")
            if not self.radius > 0:
                raise DomainError("radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def subset(self, index):
        return Locations(self.coords[np.asarray(index)], self.metric, self.radius)

    def stack(self, other):
        """Locations of ``self`` followed by ``other`` (same metric)."""
        if (other.metric, other.radius) != (self.metric, self.radius):
            raise DomainError("cannot stack locations with different metrics")
        return Locations(np.vstack([self.coords, other.coords]), self.metric, self.radius)

    def diameter(self):
        """Largest pairwise distance (0 for a single point)."""
        if self.n < 2:
            return 0.0
        return float(condensed_dist(self).max())

    def __eq__(self, other):
        return (
            isinstance(other, Locations)
            and self.metric == other.metric
            and self.radius == other.radius
            and np.array_equal(self.coords, other.coords)
        )


def _unit_vectors(coords):
    lon = np.radians(coords[:, 0])
    lat = np.radians(coords[:, 1])
    return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def _central_angle(a, b):
    """Haversine central angle between (lon, lat) rows of ``a`` and ``b``."""
    lon1, lat1 = np.radians(a[:, 0])[:, None], np.radians(a[:, 1])[:, None]
    lon2, lat2 = np.radians(b[:, 0])[None, :], np.radians(b[:, 1])[None, :]
    hav = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))


def cross_dist(a, b):
    """Distance matrix between two location sets sharing one metric."""
    if (a.metric, a.radius) != (b.metric, b.radius):
        raise DomainError("location sets use different metrics")
    if a.dim != b.dim:
        raise DomainError("location sets have different dimensions")
    if a.metric == "euclidean":
        return cdist(a.coords, b.coords)
    angle = _central_angle(a.coords, b.coords)
    if a.metric == "chordal":
        return 2.0 * a.radius * np.sin(angle / 2.0)
    return a.radius * angle


def condensed_dist(locs):
    """Upper-triangle distances in :func:`scipy.spatial.distance.pdist` order."""
    if locs.metric == "euclidean":
        return pdist(locs.coords)
    full = cross_dist(locs, locs)
    return squareform(full, checks=False)


def pairwise_dist(locs):
    """Symmetric ``n x n`` distance matrix with an exactly zero diagonal."""
    if locs.n == 1:
        return np.zeros((1, 1))
    return squareform(condensed_dist(locs))


def _check_bounds(bounds):
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.ndim != 2 or b.shape[1] != 2 or not np.all(b[:, 1] > b[:, 0]):
        raise DomainError("bounds must be a sequence of (low, high) pairs with low < high")
    return b


def latin_hypercube(n, d, rng):
    """One Latin hypercube sample of ``n`` points in ``[0, 1)^d``."""
    strata = np.stack([rng.permutation(n) for _ in range(d)], axis=1)
    return (strata + rng.random((n, d))) / n


def maximin_lhs(n, bounds, seed, n_candidates=100):
    """Best of ``n_candidates`` Latin hypercube draws by minimum pairwise distance.

    Candidate ``k`` is drawn from its own seed substream, so the result does
    not depend on evaluation order; ties keep the lowest index.  The score is
    computed in the unit cube before scaling to ``bounds``.
    """
    if n < 2:
        raise DomainError("maximin_lhs needs n >= 2")
    if n_candidates < 1:
        raise DomainError("n_candidates must be positive")
    b = _check_bounds(bounds)
    d = b.shape[0]
    best, best_score = None, -np.inf
    for child in np.random.SeedSequence(seed).spawn(n_candidates):
        unit = latin_hypercube(n, d, np.random.Generator(np.random.PCG64(child)))
        score = pdist(unit).min()
        if score > best_score:
            best, best_score = unit, score
    return Locations(b[:, 0] + best * (b[:, 1] - b[:, 0]))


def regular_grid(bounds, counts):
    """Endpoint-inclusive axis-aligned grid; the first coordinate varies slowest."""
    b = _check_bounds(bounds)
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    if counts.shape[0] != b.shape[0]:
        raise DomainError("need one count per dimension")
    if np.any(counts < 2):
        raise DomainError("each grid dimension needs at least 2 points")
    axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(b, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return Locations(np.column_stack([m.ravel() for m in mesh]))


@dataclass(frozen=True)
class Semivariogram:
    """Binned semivariances; ``nan`` marks bins without pairs.

    ``gamma[i, k]`` and ``counts[i, k]`` refer to ``angles[i]`` and the
    distance bin ``[bin_edges[k], bin_edges[k+1])``.  ``omni_*`` pool all
    directions.
    """

    angles: np.ndarray
    angle_tol: float
    bin_edges: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    omni_gamma: np.ndarray
    omni_counts: np.ndarray = field(repr=False)


def _binned(sq_diff, dist, edges):
    k = np.searchsorted(edges, dist, side="right") - 1
    keep = (k >= 0) & (k < len(edges) - 1)
    n_bins = len(edges) - 1
    counts = np.bincount(k[keep], minlength=n_bins)
    sums = np.bincount(k[keep], weights=sq_diff[keep], minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2.0 * counts), np.nan)
    return gamma, counts


def directional_semivariogram(data, angles, angle_tol, bin_edges):
    """Classical directional semivariogram of 2-D data.

    ``gamma(h) = sum (Z_i - Z_j)^2 / (2 |N(h)|)`` over pairs in a distance bin
    and angular sector.  Directions of ``s_j - s_i`` are taken modulo 180
    degrees from the first axis; a pair belongs to the sector of angle ``a``
    when its direction lies in ``[a - angle_tol, a + angle_tol)``.

    Parameters
    ----------
    data : Dataset
        Anything with ``locs`` (2-D euclidean :class:`Locations`) and ``z``.
    angles : sequence of float
        Sector centres in degrees.
    angle_tol : float
        Sector half-width in degrees, in ``(0, 90]``.
    bin_edges : sequence of float
        Increasing distance-bin edges.
    """
    locs, z = data.locs, np.asarray(data.z, dtype=float)
    if locs.metric != "euclidean" or locs.dim != 2:
        raise DomainError("directional semivariograms need 2-D euclidean locations")
    if not 0 < angle_tol <= 90:
        raise DomainError("angle_tol must lie in (0, 90]")
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin_edges must be strictly increasing with at least two entries")
    i, j = np.triu_indices(locs.n, k=1)
    delta = locs.coords[j] - locs.coords[i]
    dist = np.hypot(delta[:, 0], delta[:, 1])
    direction = np.degrees(np.arctan2(delta[:, 1], delta[:, 0])) % 180.0
    sq = (z[i] - z[j]) ** 2
    angles = np.asarray(angles, dtype=float)
    gamma = np.empty((angles.size, edges.size - 1))
    counts = np.empty((angles.size, edges.size - 1), dtype=int)
    for r, a in enumerate(angles):
        off = (direction - a + 90.0) % 180.0 - 90.0
        sel = (off >= -angle_tol) & (off < angle_tol)
        gamma[r], counts[r] = _binned(sq[sel], dist[sel], edges)
    omni_gamma, omni_counts = _binned(sq, dist, edges)
    return Semivariogram(angles, float(angle_tol), edges, gamma, counts, omni_gamma, omni_counts)
