"""Monte Carlo point clouds and local/box dimension estimators.

Clouds are drawn from the realized Gibbs chain: the forward word fixes the
base point through the continued fraction coordinates, the reversed chain
fixes the past word and with it the fiber point.  Dimension estimates use
correlation-style neighbour counting on a sqrt(2) radius ladder, with the
lower radii floored above the coding resolution so the fit never reads the
truncation artifacts as structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InsufficientScales
from .systems import SmaleSystem, fiber_points_bulk, pi_values_bulk
from .thermo import GibbsApprox, _rng

PROVENANCES = ("fiber", "z_marginal", "global", "synthetic")
CHARTS = ("unit_square", "raw")

#: Radius ladder ratio and default scale count for local estimates.
LADDER_RATIO = math.sqrt(2.0)
DEFAULT_SCALES = 8

#: Minimum neighbours for a ladder scale to qualify (median over centers).
MIN_SCALE_COUNT = 50

#: Lower radii are floored at this multiple of the cloud's coding error.
CODING_FLOOR_FACTOR = 10.0


# ---------------------------------------------------------------------------
# clouds

@dataclass(eq=False)
class PointCloud:
    """Sampled points with the provenance needed to interpret radii.

    ``chart`` records the z-coordinate convention: ``unit_square`` means each
    continued fraction value x in (1, inf) is stored as 1/x in (0, 1), a
    smooth chart that leaves local dimensions unchanged; ``raw`` stores x
    itself.  Fiber coordinates are always raw (they are already bounded).
    """

    points: np.ndarray
    provenance: str
    chart: str
    seed: int
    truncation: int
    depth: int
    coding_error: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] not in (1, 2, 4):
            raise ConfigError("points must be (N, d) with d in {1, 2, 4}")
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if self.chart not in CHARTS:
            raise ConfigError(f"unknown chart {self.chart!r}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def diameter(self) -> float:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def to_csv(self, path):
        cols = ",".join(f"x{i + 1}" for i in range(self.dim))
        np.savetxt(path, self.points, delimiter=",", header=cols,
                   comments="", newline="\n", fmt="%.17g")


def sample_measure(g: GibbsApprox, system: SmaleSystem, target: str,
                   n_points: int = None, depth: int = 30, seed: int = 0,
                   chart: str = "unit_square") -> PointCloud:
    """Draw a cloud from the chain: fiber, z-marginal, or joint 4-D.

    Each sample is one two-sided chain realization; the forward word is
    evaluated through the continued fraction coordinates at the cylinder
    midpoint and the past word through the fiber composition at the same
    context, so the two parts of a joint sample share their randomness the
    way the invariant measure couples them.
    """
    if target not in ("fiber", "z_marginal", "global"):
        raise ConfigError(f"unknown target {target!r}")
    if n_points is None:
        n_points = 200_000 if target == "global" else 100_000
    if n_points < 1_000:
        raise ConfigError("need at least 1000 points")
    if depth < 20:
        raise ConfigError("need depth >= 20 for usable coding resolution")
    rng = _rng(seed)
    past_m, past_n, fwd_m, fwd_n = g.sample_two_sided(depth, depth,
                                                      n_points, rng)
    z_err = 2.0 ** (1 - depth)
    fiber_err = system.domain.diameter * system.contraction ** (-depth)
    cols = []
    if target in ("z_marginal", "global"):
        z = pi_values_bulk(fwd_m, fwd_n)
        if chart == "unit_square":
            cols += [1.0 / z.real, 1.0 / z.imag]
        else:
            cols += [z.real, z.imag]
    if target in ("fiber", "global"):
        w = fiber_points_bulk(system, past_m, past_n, fwd_m, fwd_n)
        cols += [w.real, w.imag]
    if target == "fiber":
        err = fiber_err
    elif target == "z_marginal":
        err = z_err
    else:
        err = max(z_err, fiber_err)
    return PointCloud(points=np.column_stack(cols), provenance=target,
                      chart=chart if target != "fiber" else "raw",
                      seed=int(seed), truncation=g.max_digit, depth=int(depth),
                      coding_error=float(err))


# ---------------------------------------------------------------------------
# local dimension

@dataclass(frozen=True)
class LocalDimEstimate:
    per_point_slopes: tuple
    mean: float
    stddev: float
    window: tuple  # (r_min, r_max, n_scales)
    n_centers: int

    def __iter__(self):
        return iter((self.per_point_slopes, self.mean, self.stddev,
                     self.window))


def _radius_ladder(cloud: PointCloud, window) -> np.ndarray:
    if window is not None:
        r_min, r_max, n_scales = window
        n_scales = int(n_scales)
    else:
        r_max = cloud.diameter() / 4.0
        n_scales = DEFAULT_SCALES
        r_min = r_max * LADDER_RATIO ** (-(n_scales - 1))
    if not (0 < r_min < r_max) or n_scales < 4:
        raise ConfigError("window must satisfy 0 < r_min < r_max, >= 4 scales")
    radii = np.geomspace(r_max, r_min, n_scales)
    floor = CODING_FLOOR_FACTOR * cloud.coding_error
    radii = radii[radii >= floor]
    if radii.size < 4:
        raise InsufficientScales(
            f"only {radii.size} ladder scales above the coding floor {floor:g}")
    return radii


def local_dimension(cloud: PointCloud, window=None, n_centers: int = 400,
                    seed: int = 0, workers: int = -1) -> LocalDimEstimate:
    """Mean local scaling exponent of neighbour counts around random centers.

    For each center the slope of log count versus log radius is fitted over
    the qualifying ladder scales; a scale qualifies when its median count
    over centers reaches MIN_SCALE_COUNT, and at least 4 scales must qualify.
    """
    n_centers = int(min(n_centers, cloud.n_points // 10))
    if n_centers < 10:
        raise ConfigError("cloud too small for a local estimate")
    if window is None and cloud.diameter() <= CODING_FLOOR_FACTOR * cloud.coding_error:
        # degenerate cloud (all samples resolve to one point): slope 0 at
        # every center, zero dispersion
        return LocalDimEstimate(per_point_slopes=(0.0,) * n_centers,
                                mean=0.0, stddev=0.0,
                                window=(0.0, 0.0, 0), n_centers=n_centers)
    radii = _radius_ladder(cloud, window)
    rng = _rng(seed)
    idx = rng.choice(cloud.n_points, size=n_centers, replace=False)
    centers = cloud.points[idx]
    tree = cKDTree(cloud.points)
    counts = np.empty((radii.size, n_centers))
    for j, r in enumerate(radii):
        raw = tree.query_ball_point(centers, r, return_length=True,
                                    workers=workers)
        counts[j] = np.asarray(raw, dtype=float) - 1.0  # exclude the center
    qualifying = np.median(counts, axis=1) >= MIN_SCALE_COUNT
    if qualifying.sum() < 4:
        raise InsufficientScales(
            f"only {int(qualifying.sum())} scales reached the median count "
            f"{MIN_SCALE_COUNT}")
    log_r = np.log(radii[qualifying])
    slopes = np.full(n_centers, np.nan)
    for i in range(n_centers):
        c = counts[qualifying, i]
        ok = c >= 1.0
        if ok.sum() < 3:
            continue
        slopes[i] = np.polyfit(log_r[ok], np.log(c[ok]), 1)[0]
    usable = np.isfinite(slopes)
    if usable.sum() < max(10, n_centers // 10):
        raise InsufficientScales("too few centers had enough occupied scales")
    return LocalDimEstimate(
        per_point_slopes=tuple(float(s) for s in slopes),
        mean=float(np.mean(slopes[usable])),
        stddev=float(np.std(slopes[usable])),
        window=(float(radii[qualifying].min()), float(radii[qualifying].max()),
                int(qualifying.sum())),
        n_centers=int(usable.sum()),
    )


# ---------------------------------------------------------------------------
# box dimension

@dataclass(frozen=True)
class BoxDimEstimate:
    value: float
    scales: tuple
    counts: tuple


def box_dimension(cloud: PointCloud, n_scales: int = 8) -> BoxDimEstimate:
    """Slope of log box count over a dyadic mesh ladder.

    A cloud with zero extent (all samples resolve to one point) reports
    dimension 0 directly instead of failing on a degenerate ladder.
    """
    if n_scales < 5:
        raise ConfigError("need at least 5 dyadic scales")
    diam = cloud.diameter()
    floor = max(CODING_FLOOR_FACTOR * cloud.coding_error, 1e-300)
    if diam <= floor:
        return BoxDimEstimate(value=0.0, scales=(), counts=())
    eps_list, counts = [], []
    for j in range(1, n_scales + 1):
        eps = diam / 2.0 ** j
        if eps < floor:
            break
        boxes = np.floor(cloud.points / eps)
        counts.append(len(np.unique(boxes, axis=0)))
        eps_list.append(eps)
    if len(eps_list) < 2:
        return BoxDimEstimate(value=0.0, scales=tuple(eps_list),
                              counts=tuple(counts))
    slope = np.polyfit(np.log(1.0 / np.array(eps_list)),
                       np.log(np.array(counts, dtype=float)), 1)[0]
    return BoxDimEstimate(value=float(slope), scales=tuple(eps_list),
                          counts=tuple(counts))


# ---------------------------------------------------------------------------
# comparison report

@dataclass(frozen=True)
class ExactnessReport:
    bias: float
    dispersion: float
    flags: tuple

    def __iter__(self):
        return iter((self.bias, self.dispersion, self.flags))


def exactness_report(estimate: LocalDimEstimate, predicted: float,
                     bias_tol: float = 0.1,
                     dispersion_tol: float = 0.25) -> ExactnessReport:
    """Compare a measured local dimension against a closed-form prediction."""
    bias = estimate.mean - float(predicted)
    flags = []
    if abs(bias) > bias_tol:
        flags.append("large_bias")
    if estimate.stddev > dispersion_tol:
        flags.append("large_dispersion")
    if estimate.n_centers < 30:
        flags.append("few_centers")
    return ExactnessReport(bias=float(bias), dispersion=float(estimate.stddev),
                           flags=tuple(flags))
