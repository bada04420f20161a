"""Fiber contraction families driven by two-sided pair-digit words.

Each system contracts a closed disk in the plane, with the map at time zero
selected by the forward word: the two reciprocal families read the paired
continued-fraction value of the forward word, the similarity family only its
first symbol.  Composing maps along the past of a two-sided word pins the
fiber point; ``pi2_hat`` performs that composition with an explicit error
bound from the certified contraction factor.

Word-dependent quantities are always evaluated at the midpoint of the exact
cylinder enclosure truncated at the context depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainEscape, InvalidWord
from .words import Box, cf_value_float, check_max_digit, check_pair_word, pair_alphabet, pi_tilde

VARIANTS = ("inverse_conjugate", "inverse_square", "similarity")

#: Tolerance for the image-containment check of fiber maps.
ESCAPE_TOL = 1e-10


# ---------------------------------------------------------------------------
# geometry helpers

@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def contains(self, z: complex, tol: float = 0.0) -> bool:
        return abs(z - self.center) <= self.radius + tol

    def contains_disk(self, other: "Disk", tol: float = 0.0) -> bool:
        return abs(other.center - self.center) + other.radius <= self.radius + tol

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def invert_disk(disk: Disk) -> Disk:
    """Image of a disk not containing 0 under z -> 1/z (again a disk)."""
    c, r = disk.center, disk.radius
    d = abs(c) ** 2 - r ** 2
    if d <= 0:
        raise ValueError("disk contains the origin, inversion image unbounded")
    return Disk(c.conjugate() / d, r / d)


# ---------------------------------------------------------------------------
# similarity ratio/translation schedules

@dataclass(frozen=True)
class SimilaritySchedule:
    """Per-symbol contraction ratios and translations for similarity systems.

    Kinds:
      * ``geometric``: ratio base^-(m+n) with a dyadic packing of the
        translations that stays disjoint for every digit pair.
      * ``equal``: one ratio for all pairs with digits <= grid_digit, centers
        on a uniform grid.
      * ``two_ratio``: ratio_a for m == 1, ratio_b otherwise, same grid.
      * ``custom``: explicit (symbol, ratio, translation) table.

    Ratios must stay in (0, 1/3).
    """

    kind: str = "geometric"
    base: float = 2.0
    ratio: float = 0.125
    ratio_a: float = 0.125
    ratio_b: float = 0.0625
    grid_digit: int = 2
    inner_factor: float = 0.5
    table: tuple = ()  # custom: ((m, n, ratio, re, im), ...)

    def __post_init__(self):
        if self.kind not in ("geometric", "equal", "two_ratio", "custom"):
            raise ConfigError(f"unknown similarity schedule kind {self.kind!r}")
        if not (0.0 < self.inner_factor <= 0.5):
            raise ConfigError("inner factor must lie in (0, 1/2]")
        for r in self._all_ratios():
            if not (0.0 < r < 1.0 / 3.0):
                raise ConfigError(f"ratio {r} outside (0, 1/3)")

    def _all_ratios(self):
        if self.kind == "geometric":
            return [self.base ** -2.0]
        if self.kind == "equal":
            return [self.ratio]
        if self.kind == "two_ratio":
            return [self.ratio_a, self.ratio_b]
        return [row[2] for row in self.table]

    def _custom_row(self, symbol):
        for row in self.table:
            if (row[0], row[1]) == symbol:
                return row
        raise InvalidWord(f"symbol {symbol} not in custom schedule")

    def ratio_of(self, symbol) -> float:
        m, n = symbol
        if self.kind == "geometric":
            return float(self.base) ** -(m + n)
        if self.kind == "equal":
            return self.ratio
        if self.kind == "two_ratio":
            return self.ratio_a if m == 1 else self.ratio_b
        return float(self._custom_row(symbol)[2])

    def translation_of(self, symbol) -> complex:
        m, n = symbol
        if self.kind == "geometric":
            # dyadic packing: gaps shrink like 2^-m while image radii shrink
            # like 2^-(m+n)-1, so neighbouring images never touch
            u = 1.0 - 2.0 ** (1 - m)
            v = 1.0 - 2.0 ** (1 - n)
            return complex(0.6 * u - 0.3, 0.6 * v - 0.3)
        if self.kind in ("equal", "two_ratio"):
            G = self.grid_digit
            if not (1 <= m <= G and 1 <= n <= G):
                raise InvalidWord(f"symbol {symbol} outside grid truncation {G}")
            if G == 1:
                return 0j
            step = 1.0 / (G - 1)
            return complex(-0.5 + (m - 1) * step, -0.5 + (n - 1) * step)
        row = self._custom_row(symbol)
        return complex(row[3], row[4])


# ---------------------------------------------------------------------------
# system descriptor

@dataclass(frozen=True)
class SmaleSystem:
    """One fiber contraction family with certified constants.

    ``contraction`` is the certified uniform expansion factor of the inverse
    branches (> 1); ``distortion_bound``/``distortion_alpha`` parameterise the
    measured Hoelder bound for log-derivative oscillation.  Both are recorded
    diagnostics, not assumptions baked into formulas.
    """

    variant: str
    domain: Disk
    schedule: SimilaritySchedule | None
    contraction: float
    distortion_alpha: float
    distortion_bound: float

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.contraction <= 1.0:
            raise ConfigError("certified contraction factor must exceed 1")


def _grid_points(disk: Disk, n: int) -> np.ndarray:
    """Deterministic point grid covering a disk (boundary included)."""
    side = int(math.sqrt(n))
    xs = np.linspace(-1.0, 1.0, side)
    gx, gy = np.meshgrid(xs, xs)
    pts = gx.ravel() + 1j * gy.ravel()
    pts = pts[np.abs(pts) <= 1.0]
    ring = np.exp(2j * np.pi * np.linspace(0.0, 1.0, 64, endpoint=False))
    pts = np.concatenate([pts, ring])
    return disk.center + disk.radius * pts


def _one_step_sup(variant: str, domain: Disk, schedule) -> float:
    """Analytic upper bound for the one-step derivative modulus."""
    if variant == "inverse_conjugate":
        # |T'| = 1/|conj(z) + p|^2 with p in [1, inf)^2; the minimum modulus
        # of conj(z) + p over the domain sits at p = 1 + 1i
        m = abs(domain.center.conjugate() + (1 + 1j)) - domain.radius
        if m <= 0:
            raise ConfigError("domain touches the singular translate")
        return 1.0 / m ** 2
    if variant == "inverse_square":
        zmax = abs(domain.center) + domain.radius
        m = 2.0 * abs(1 + 1j) - zmax ** 2
        if m <= 0:
            raise ConfigError("domain too large for the square family")
        return 2.0 * zmax / m ** 2
    # similarity: sup ratio over admitted symbols (geometric decays in m+n)
    sched = schedule
    if sched.kind == "custom":
        sups = [row[2] * sched.inner_factor for row in sched.table]
    else:
        sups = [sched.ratio_of(s) * sched.inner_factor
                for s in pair_alphabet(max(2, sched.grid_digit))]
    return max(sups)


def make_system(variant: str,
                schedule: SimilaritySchedule | None = None,
                center: complex | None = None,
                radius: float | None = None) -> SmaleSystem:
    """Construct a system with certified contraction and distortion bounds."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    if variant == "similarity":
        schedule = schedule or SimilaritySchedule()
        domain = Disk(complex(center) if center is not None else 0j,
                      float(radius) if radius is not None else 1.0)
    else:
        if schedule is not None:
            raise ConfigError("ratio schedules only apply to similarity systems")
        domain = Disk(complex(center) if center is not None else 0.5 + 0j,
                      float(radius) if radius is not None else 0.5)
    sup = _one_step_sup(variant, domain, schedule)
    if sup >= 1.0:
        raise ConfigError(f"one-step derivative sup {sup} is not a contraction")
    if variant == "inverse_conjugate":
        mmin = abs(domain.center.conjugate() + (1 + 1j)) - domain.radius
        H, alpha = 2.0 / mmin, 1.0
    elif variant == "inverse_square":
        # log-derivative gradient blows up near z = 0; record a grid-measured
        # bound over the domain instead of an analytic constant
        pts = _grid_points(domain, 900)
        pts = pts[np.abs(pts) > 1e-3]
        g = 1.0 / np.abs(pts) + 4.0 * np.abs(pts) / (2.0 * abs(1 + 1j) - np.abs(pts) ** 2)
        H, alpha = float(np.max(g)), 1.0
    else:
        H, alpha = 0.0, 1.0
    sys_ = SmaleSystem(variant=variant, domain=domain, schedule=schedule,
                       contraction=1.0 / sup, distortion_alpha=alpha,
                       distortion_bound=H)
    if variant == "similarity":
        _validate_similarity_images(sys_)
    return sys_


def _validate_similarity_images(system: SmaleSystem, probe_digit: int = 4):
    """Images of the domain must stay inside the domain (hard requirement)."""
    for sym in pair_alphabet(min(probe_digit, _schedule_digit_limit(system))):
        img = image_disk(system, sym)
        if not system.domain.contains_disk(img, tol=1e-12):
            raise ConfigError(f"similarity image for symbol {sym} escapes the domain")


def _schedule_digit_limit(system: SmaleSystem) -> int:
    sched = system.schedule
    if sched.kind == "geometric":
        return 10**6
    if sched.kind == "custom":
        return max((row[0] for row in sched.table), default=1)
    return sched.grid_digit


# ---------------------------------------------------------------------------
# word contexts

@dataclass(frozen=True)
class FiberWordContext:
    """Forward word plus the depth at which its enclosure is evaluated."""

    forward_word: tuple
    enclosure_depth: int = 12

    def __post_init__(self):
        word = check_pair_word(self.forward_word)
        if not word:
            raise InvalidWord("forward word must be nonempty")
        object.__setattr__(self, "forward_word", word)
        depth = min(int(self.enclosure_depth), len(word))
        if depth < 1:
            raise InvalidWord("enclosure depth must be >= 1")
        object.__setattr__(self, "enclosure_depth", depth)

    @property
    def first_symbol(self):
        return self.forward_word[0]

    def enclosure(self) -> Box:
        return _pi_tilde_cached(self.forward_word[: self.enclosure_depth])

    @property
    def pi_value(self) -> complex:
        return self.enclosure().mid


@lru_cache(maxsize=200_000)
def _pi_tilde_cached(word) -> Box:
    return pi_tilde(word)


@dataclass(frozen=True)
class PastWord:
    """Finite past of a two-sided word, most recent symbol first.

    ``symbols[j - 1]`` is the symbol at time -j.  The forward word supplies
    the continuation every level's context needs; contexts are rebuilt by
    slicing the concatenated two-sided word.
    """

    symbols: tuple
    forward: tuple
    enclosure_depth: int = 12

    def __post_init__(self):
        object.__setattr__(self, "symbols", check_pair_word(self.symbols))
        object.__setattr__(self, "forward", check_pair_word(self.forward))
        if not self.forward:
            raise InvalidWord("a forward word is required to build contexts")

    def __len__(self):
        return len(self.symbols)

    @classmethod
    def constant(cls, symbol, depth: int, enclosure_depth: int = 12) -> "PastWord":
        sym = check_pair_word([symbol])[0]
        return cls(symbols=(sym,) * depth,
                   forward=(sym,) * max(enclosure_depth, 1),
                   enclosure_depth=enclosure_depth)

    def context(self, level: int) -> FiberWordContext:
        """Context of the map applied at time -level (1 <= level <= len)."""
        if not (1 <= level <= len(self.symbols)):
            raise InvalidWord(f"level {level} outside 1..{len(self.symbols)}")
        word = tuple(self.symbols[level - 1 :: -1][: level]) + self.forward
        return FiberWordContext(word, self.enclosure_depth)


# ---------------------------------------------------------------------------
# fiber maps

def fiber_map_at(system: SmaleSystem, pi_value: complex, w: complex,
                 symbol=None) -> complex:
    """Formula layer: apply the time-zero map given the translate value.

    Similarity systems ignore ``pi_value`` and need ``symbol`` instead.
    """
    if system.variant == "inverse_conjugate":
        return 1.0 / (np.conj(w) + pi_value)
    if system.variant == "inverse_square":
        return 1.0 / (w * w + 2.0 * pi_value)
    sched = system.schedule
    r = sched.ratio_of(symbol)
    return r * sched.inner_factor * w + sched.translation_of(symbol)


def fiber_derivative_mod_at(system: SmaleSystem, pi_value: complex, w: complex,
                            symbol=None) -> float:
    """Formula layer: one-step derivative modulus of the time-zero map."""
    if system.variant == "inverse_conjugate":
        return 1.0 / abs(np.conj(w) + pi_value) ** 2
    if system.variant == "inverse_square":
        return 2.0 * abs(w) / abs(w * w + 2.0 * pi_value) ** 2
    return system.schedule.ratio_of(symbol) * system.schedule.inner_factor


def fiber_map(system: SmaleSystem, ctx: FiberWordContext, w: complex) -> complex:
    """Apply the time-zero fiber map of the word in ``ctx`` to a domain point."""
    if not system.domain.contains(w, tol=ESCAPE_TOL):
        raise DomainEscape(f"argument {w} outside the fiber domain")
    img = fiber_map_at(system, ctx.pi_value, w, ctx.first_symbol)
    if not system.domain.contains(img, tol=ESCAPE_TOL):
        raise DomainEscape(f"image {img} escaped the fiber domain")
    return img


def fiber_derivative_mod(system: SmaleSystem, ctx: FiberWordContext,
                         w: complex) -> float:
    """One-step derivative modulus at a domain point."""
    if not system.domain.contains(w, tol=ESCAPE_TOL):
        raise DomainEscape(f"argument {w} outside the fiber domain")
    return fiber_derivative_mod_at(system, ctx.pi_value, w, ctx.first_symbol)


def pi2_hat(system: SmaleSystem, past: PastWord):
    """Fiber point selected by a finite past, with its contraction error bound.

    Composes the maps indexed by the past from the deepest level inward,
    starting at the domain center.  The result lies within
    contraction^-depth * diam(domain) of the true limit point; that bound is
    returned alongside the point.
    """
    w = system.domain.center
    n = len(past)
    for level in range(n, 0, -1):
        w = fiber_map(system, past.context(level), w)
    err = system.contraction ** (-n) * system.domain.diameter
    return w, err


def image_disk(system: SmaleSystem, symbol, tail=None) -> Disk:
    """Disk enclosure of the depth-1 image for a first symbol and fixed tail.

    Exact for the reciprocal-of-conjugate and similarity families, a superset
    for the square family.  ``tail`` is the forward continuation used for the
    translate value (defaults to repeating the symbol).
    """
    sym = check_pair_word([symbol])[0]
    if system.variant == "similarity":
        sched = system.schedule
        rc = sched.ratio_of(sym) * sched.inner_factor
        return Disk(sched.translation_of(sym) + rc * system.domain.center,
                    rc * system.domain.radius)
    word = (sym,) + (tuple(tail) if tail else (sym,) * 11)
    p = FiberWordContext(word).pi_value
    dom = system.domain
    if system.variant == "inverse_conjugate":
        return invert_disk(Disk(dom.center.conjugate() + p, dom.radius))
    # square variant: z^2 over the domain sits inside a disk around center^2
    r2 = 2.0 * abs(dom.center) * dom.radius + dom.radius ** 2
    return invert_disk(Disk(dom.center ** 2 + 2.0 * p, r2))


# ---------------------------------------------------------------------------
# bulk evaluation (float fast path shared with the sampling layer)

def pi_values_bulk(m_digits: np.ndarray, n_digits: np.ndarray) -> np.ndarray:
    """Translate values for rows of pair digits, float continued fractions."""
    re = m_digits[..., 0] + cf_value_float(m_digits[..., 1:])
    im = n_digits[..., 0] + cf_value_float(n_digits[..., 1:])
    return re + 1j * im


def fiber_points_bulk(system: SmaleSystem,
                      past_m: np.ndarray, past_n: np.ndarray,
                      fwd_m: np.ndarray, fwd_n: np.ndarray,
                      ctx_depth: int = 12) -> np.ndarray:
    """Vectorised fiber points for batches of past/forward digit rows.

    ``past_m[:, j]`` is the first digit coordinate at time -(j+1).  Uses the
    float continued-fraction path; results agree with ``pi2_hat`` up to the
    coding error at the given depths.
    """
    size, n_past = past_m.shape
    if system.variant == "similarity":
        sched = system.schedule
        symbols = sorted({(int(m), int(n))
                          for m, n in zip(past_m.ravel(), past_n.ravel())})
        rc = {s: sched.ratio_of(s) * sched.inner_factor for s in symbols}
        tr = {s: sched.translation_of(s) for s in symbols}
        rc_m = np.zeros((max(s[0] for s in symbols) + 1,
                         max(s[1] for s in symbols) + 1))
        tr_m = np.zeros_like(rc_m, dtype=complex)
        for s in symbols:
            rc_m[s], tr_m[s] = rc[s], tr[s]
        w = np.full(size, system.domain.center, dtype=complex)
        for j in range(n_past - 1, -1, -1):
            m, n = past_m[:, j], past_n[:, j]
            w = rc_m[m, n] * w + tr_m[m, n]
        return w
    # concatenated two-sided digit rows: [eta_-n .. eta_-1, eta_0, eta_1, ..]
    all_m = np.concatenate([past_m[:, ::-1], fwd_m], axis=1)
    all_n = np.concatenate([past_n[:, ::-1], fwd_n], axis=1)
    w = np.full(size, system.domain.center, dtype=complex)
    for level in range(n_past, 0, -1):
        start = n_past - level
        stop = min(start + ctx_depth, all_m.shape[1])
        c = pi_values_bulk(all_m[:, start:stop], all_n[:, start:stop])
        if system.variant == "inverse_conjugate":
            w = 1.0 / (np.conj(w) + c)
        else:
            w = 1.0 / (w * w + 2.0 * c)
    return w


def sample_fiber_limit_set(system: SmaleSystem, forward, max_digit: int,
                           depth: int, count: int, seed: int) -> np.ndarray:
    """Points of the fiber limit set over a forward word, one per random past.

    Pasts are drawn uniformly over symbols with digits <= max_digit; each
    returned point is within contraction^-depth * diam of the limit set.
    """
    fwd = check_pair_word(forward)
    if not fwd:
        raise InvalidWord("forward word must be nonempty")
    M = check_max_digit(max_digit)
    rng = np.random.default_rng(seed)
    past_m = rng.integers(1, M + 1, size=(count, depth))
    past_n = rng.integers(1, M + 1, size=(count, depth))
    fwd_m = np.tile([s[0] for s in fwd], (count, 1))
    fwd_n = np.tile([s[1] for s in fwd], (count, 1))
    return fiber_points_bulk(system, past_m, past_n, fwd_m, fwd_n)


# ---------------------------------------------------------------------------
# verification report

@dataclass(frozen=True)
class SystemReport:
    """Measured separation/contraction/distortion diagnostics."""

    variant: str
    max_digit: int
    osc_ok: bool
    min_image_gap: float
    lambda_hat: float
    derivative_band: tuple[float, float]
    distortion_H_hat: float
    distortion_alpha: float


def _osc_min_gap(system: SmaleSystem, max_digit: int, tails) -> float:
    """Smallest pairwise separation of depth-1 images sharing a tail.

    Signed: zero means touching, negative means overlap.  Images over
    distinct first symbols with the same continuation are integer translates
    for the reciprocal families, so sharing the tail is the honest check.
    """
    worst = math.inf
    symbols = pair_alphabet(min(max_digit, _schedule_digit_limit(system))
                            if system.variant == "similarity" else max_digit)
    for tail in tails:
        disks = [image_disk(system, s, tail) for s in symbols]
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                gap = (abs(disks[i].center - disks[j].center)
                       - disks[i].radius - disks[j].radius)
                worst = min(worst, gap)
        if system.variant == "similarity":
            break  # no tail dependence
    return worst


def verify_system(system: SmaleSystem, max_digit: int,
                  samples: int = 4000, seed: int = 0) -> SystemReport:
    """Measure separation, contraction, and distortion on the truncation.

    Failures are reported in the flags, not raised: ``osc_ok`` admits
    touching boundaries (open images stay disjoint), ``lambda_hat`` is the
    reciprocal of the largest sampled one-step derivative, and the distortion
    constant is the steepest sampled Hoelder quotient of log-derivatives.
    """
    M = check_max_digit(max_digit)
    rng = np.random.default_rng(seed)
    alphabet = pair_alphabet(min(M, _schedule_digit_limit(system))
                             if system.variant == "similarity" else M)
    tails = [((1, 1),) * 11, ((M, M),) * 11,
             tuple(map(tuple, rng.integers(1, M + 1, size=(11, 2))))]
    min_gap = _osc_min_gap(system, M, tails)
    osc_ok = bool(min_gap >= -ESCAPE_TOL)

    # one-step derivative band over random symbols, tails, and domain points
    u = rng.random(samples) + 1j * rng.random(samples)
    pts = system.domain.center + system.domain.radius * (2 * u - (1 + 1j))
    pts = pts[np.abs(pts - system.domain.center) <= system.domain.radius]
    derivs = []
    for _ in range(6):
        sym = alphabet[rng.integers(len(alphabet))]
        tail = tuple(map(tuple, rng.integers(1, M + 1, size=(11, 2))))
        ctx = FiberWordContext((sym,) + tail)
        for w in pts[rng.integers(len(pts), size=24)]:
            derivs.append(fiber_derivative_mod(system, ctx, w))
    derivs = np.asarray(derivs)
    band = (float(derivs.min()), float(derivs.max()))
    lambda_hat = 1.0 / band[1]

    # measured Hoelder constant for log-derivative oscillation in the point
    alpha = system.distortion_alpha
    ctx = FiberWordContext((alphabet[0],) + ((1, 1),) * 11)
    sel = pts[rng.integers(len(pts), size=min(200, len(pts)))]
    ld = np.array([math.log(fiber_derivative_mod(system, ctx, w)) for w in sel])
    H_hat = 0.0
    for i in range(len(sel)):
        d = np.abs(sel - sel[i])
        mask = d > 1e-9
        if mask.any():
            H_hat = max(H_hat, float(np.max(np.abs(ld[mask] - ld[i]) / d[mask] ** alpha)))
    return SystemReport(variant=system.variant, max_digit=M, osc_ok=osc_ok,
                        min_image_gap=float(min_gap), lambda_hat=float(lambda_hat),
                        derivative_band=band, distortion_H_hat=float(H_hat),
                        distortion_alpha=alpha)
