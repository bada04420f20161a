"""Gibbs states, pressure, entropies, and Lyapunov exponents on truncations.

Potentials depend on finitely many forward symbols (memory k).  The Gibbs
state of such a potential on the M-truncated shift is the stationary Markov
chain built from Perron eigendata of the weighted transition matrix over
k-word states; its pressure is the log Perron root.  An independent pressure
route sums exp(sup S_n psi) over depth-n cylinders directly, with the sup
computed exactly for finite-memory potentials.

Geometric potentials (s * log of the fiber derivative modulus) have
unbounded memory through the fiber point; they are realized as memory-k
tables by evaluating the derivative at the limit point of the periodic
extension of each k-word.  The Hoelder tail bound for that truncation is
reported as ``potential_error``, never silently absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ConfigError,
    DegenerateExponent,
    DomainEscape,
    EnumerationCapExceeded,
    InvalidWord,
    NonPrimitive,
    SummabilityFailure,
)
from .systems import SmaleSystem
from .words import ENUMERATION_CAP, check_max_digit, check_pair_word, pair_alphabet

#: Cap on the number of k-word states of the transfer matrix.
STATE_CAP = 4096

#: Relative contraction target for limit-point composition depths.
POINT_TOL = 1e-13


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


# ---------------------------------------------------------------------------
# potentials

@dataclass(frozen=True)
class ConstantPotential:
    """psi identically equal to ``value``."""

    value: float

    @property
    def memory(self) -> int:
        return 0


@dataclass(frozen=True)
class GeometricPotential:
    """s * log of the one-step fiber derivative modulus, s >= 0."""

    system: SmaleSystem
    s: float

    def __post_init__(self):
        if not (self.s >= 0.0):
            raise ConfigError("geometric potentials require s >= 0")

    @property
    def memory(self) -> int:
        """Default realization memory: exact for similarity families."""
        return 1 if self.system.variant == "similarity" else 2


@dataclass(frozen=True)
class TablePotential:
    """psi depending on the first ``memory`` symbols through a finite table.

    ``entries`` maps memory-words to finite values; words absent from the
    table are forbidden (transfer weight zero), which is how restricted
    subshifts enter.  ``scale`` multiplies every value, so one base table
    serves a whole parameter family.
    """

    max_digit: int
    memory: int
    entries: tuple
    scale: float = 1.0

    def __post_init__(self):
        check_max_digit(self.max_digit)
        if self.memory < 1:
            raise ConfigError("table memory must be >= 1")
        if not self.entries:
            raise ConfigError("table has no admissible words")
        for word, value in self.entries:
            w = check_pair_word(word)
            if len(w) != self.memory:
                raise InvalidWord(f"table word {word} is not a {self.memory}-word")
            if any(max(sym) > self.max_digit for sym in w):
                raise InvalidWord(f"table word {word} exceeds digit {self.max_digit}")
            if not math.isfinite(value):
                raise ConfigError("table values must be finite")

    @classmethod
    def from_dict(cls, max_digit: int, mapping: dict, scale: float = 1.0) -> "TablePotential":
        entries = []
        for word, value in mapping.items():
            if word and isinstance(word[0], int):
                word = (tuple(word),)  # single symbol given bare
            entries.append((check_pair_word(word), float(value)))
        entries.sort()
        return cls(max_digit=max_digit, memory=len(entries[0][0]) if entries else 1,
                   entries=tuple(entries), scale=scale)

    def value(self, word) -> float:
        """Scaled value on a memory-word; -inf when forbidden."""
        w = check_pair_word(word)[: self.memory]
        for entry_word, value in self.entries:
            if entry_word == w:
                return self.scale * value
        return -math.inf


def _word_code(word, max_digit: int) -> int:
    A = max_digit * max_digit
    code = 0
    for (m, n) in word:
        code = code * A + (m - 1) * max_digit + (n - 1)
    return code


def _base_flat(table: TablePotential, L: int) -> np.ndarray:
    """Unscaled values on L-words (first ``memory`` symbols decide)."""
    M = table.max_digit
    A = M * M
    base = np.full(A ** table.memory, -np.inf)
    for word, value in table.entries:
        base[_word_code(word, M)] = value
    reps = A ** (L - table.memory)
    return np.repeat(base, reps)


def _scaled(base: np.ndarray, scale: float) -> np.ndarray:
    out = np.where(np.isneginf(base), -np.inf, scale * base)
    return out


# ---------------------------------------------------------------------------
# geometric realization

def _composition_depth(system: SmaleSystem) -> int:
    lam = system.contraction
    need = math.log(system.domain.diameter / POINT_TOL) / math.log(lam)
    return max(4, min(4000, math.ceil(need)))


def _digit_planes(codes: np.ndarray, n: int, max_digit: int):
    """Per-position digit arrays (values 1..M) for base-A word codes."""
    A = max_digit * max_digit
    m_cols, n_cols = [], []
    for i in range(n):
        sym = (codes // A ** (n - 1 - i)) % A
        m_cols.append((sym // max_digit + 1).astype(np.int64))
        n_cols.append((sym % max_digit + 1).astype(np.int64))
    return m_cols, n_cols


def _cf_backward(digit_cols, tail: float = 0.5) -> np.ndarray:
    """Backward continued fraction over a list of equal-length digit arrays."""
    x = np.full_like(digit_cols[0], tail, dtype=float)
    for d in reversed(digit_cols):
        x = 1.0 / (x + d)
    return x


def periodic_log_derivatives(system: SmaleSystem, max_digit: int, n: int,
                             window: int = 12) -> np.ndarray:
    """log derivative modulus at the periodic limit point of every n-word.

    Entry ``code`` is log|T'| of the time-zero map of the two-sided periodic
    extension of the word, evaluated at the fiber point pinned by its past.
    The composition depth makes the point accurate to the POINT_TOL scale.
    """
    M = check_max_digit(max_digit)
    A = M * M
    count = A ** n
    if count > ENUMERATION_CAP:
        raise EnumerationCapExceeded(f"{count} periodic words exceed the cap")
    codes = np.arange(count, dtype=np.int64)
    m_cols, n_cols = _digit_planes(codes, n, M)
    if system.variant == "similarity":
        sched = system.schedule
        mods = np.array([sched.ratio_of(s) * sched.inner_factor
                         for s in pair_alphabet(M)])
        sym0 = (m_cols[0] - 1) * M + (n_cols[0] - 1)
        return np.log(mods[sym0])
    # translate values for the n distinct context rotations
    c_rot = []
    for r in range(n):
        cols = [(r + t) % n for t in range(window)]
        re = m_cols[cols[0]] + _cf_backward([m_cols[c] for c in cols[1:]])
        im = n_cols[cols[0]] + _cf_backward([n_cols[c] for c in cols[1:]])
        c_rot.append(re + 1j * im)
    w = np.full(count, system.domain.center, dtype=complex)
    for lev in range(_composition_depth(system), 0, -1):
        c = c_rot[(-lev) % n]
        if system.variant == "inverse_conjugate":
            w = 1.0 / (np.conj(w) + c)
        else:
            w = 1.0 / (w * w + 2.0 * c)
    p0 = c_rot[0]
    if system.variant == "inverse_conjugate":
        mod = 1.0 / np.abs(np.conj(w) + p0) ** 2
    else:
        mod = 2.0 * np.abs(w) / np.abs(w * w + 2.0 * p0) ** 2
    return np.log(mod)


@lru_cache(maxsize=64)
def realized_table(system: SmaleSystem, max_digit: int, memory: int) -> TablePotential:
    """Memory-k table of base log-derivative values (scale 1)."""
    M = check_max_digit(max_digit)
    if memory < 1:
        raise ConfigError("realization memory must be >= 1")
    vals = periodic_log_derivatives(system, M, memory)
    alphabet = pair_alphabet(M)
    words = [()]
    for _ in range(memory):
        words = [w + (s,) for w in words for s in alphabet]
    entries = tuple((w, float(v)) for w, v in zip(words, vals))
    return TablePotential(max_digit=M, memory=memory, entries=entries)


def potential_approx_error(system: SmaleSystem, memory: int) -> float:
    """Hoelder tail bound for the memory-k realization of log|T'|."""
    if system.variant == "similarity":
        return 0.0
    gap = system.domain.diameter * system.contraction ** (-memory)
    return system.distortion_bound * gap ** system.distortion_alpha


def _realize(potential, max_digit: int, memory):
    """(table, approx_error, base_is_log_derivative) for any potential kind."""
    M = check_max_digit(max_digit)
    if isinstance(potential, ConstantPotential):
        entries = tuple(((s,), potential.value) for s in pair_alphabet(M))
        return TablePotential(M, 1, entries), 0.0, False
    if isinstance(potential, TablePotential):
        if potential.max_digit != M:
            raise ConfigError(
                f"table truncation {potential.max_digit} does not match M={M}")
        if memory is not None and memory < potential.memory:
            raise ConfigError("requested memory below the table's own memory")
        return potential, 0.0, False
    if isinstance(potential, GeometricPotential):
        k = potential.memory if memory is None else memory
        base = realized_table(potential.system, M, k)
        table = TablePotential(M, k, base.entries, scale=potential.s)
        err = potential.s * potential_approx_error(potential.system, k)
        return table, err, True
    raise ConfigError(f"unknown potential kind {type(potential).__name__}")


# ---------------------------------------------------------------------------
# transfer-matrix Gibbs construction

@dataclass
class McEstimate:
    """Monte Carlo scalar with its normal-approximation standard error."""

    value: float
    se: float
    n: int

    def __float__(self):
        return float(self.value)


@dataclass(eq=False)
class GibbsApprox:
    """Stationary Markov Gibbs state on k-word states of the truncation.

    ``transition`` rows sum to one; ``stationary`` is its invariant vector;
    ``log_pressure`` is the log Perron root of the weight matrix.  States
    carry the full-alphabet word codes that survived support pruning.
    """

    potential: object
    max_digit: int
    memory: int
    log_pressure: float
    states: np.ndarray = field(repr=False)
    transition: np.ndarray = field(repr=False)
    stationary: np.ndarray = field(repr=False)
    right_vec: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    gram_base: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    potential_error: float = 0.0
    is_geometric: bool = False
    _lookup: np.ndarray = field(default=None, repr=False)
    _cum_fwd: np.ndarray = field(default=None, repr=False)
    _cum_bwd: np.ndarray = field(default=None, repr=False)
    _hat_cache: dict = field(default_factory=dict, repr=False)

    @property
    def alphabet_size(self) -> int:
        return self.max_digit * self.max_digit

    @property
    def n_states(self) -> int:
        return len(self.states)

    def lookup(self) -> np.ndarray:
        """Full word-code -> pruned state index (-1 when pruned)."""
        if self._lookup is None:
            full = np.full(self.alphabet_size ** self.memory, -1, dtype=np.int64)
            full[self.states] = np.arange(self.n_states)
            self._lookup = full
        return self._lookup

    # -- masses ------------------------------------------------------------

    def state_of(self, word) -> int:
        w = check_pair_word(word)
        if len(w) < self.memory:
            raise InvalidWord(f"need at least {self.memory} symbols")
        idx = self.lookup()[_word_code(w[: self.memory], self.max_digit)]
        return int(idx)

    def word_log_mass(self, word) -> float:
        """log mu of the cylinder of a word (any length >= 1)."""
        w = check_pair_word(word)
        L, A = self.memory, self.alphabet_size
        if len(w) < L:
            code = _word_code(w, self.max_digit)
            reps = A ** (L - len(w))
            sel = (self.states >= code * reps) & (self.states < (code + 1) * reps)
            mass = float(self.stationary[sel].sum())
            return math.log(mass) if mass > 0 else -math.inf
        cur = self.lookup()[_word_code(w[:L], self.max_digit)]
        if cur < 0:
            return -math.inf
        out = math.log(self.stationary[cur])
        for sym in w[L:]:
            c = (sym[0] - 1) * self.max_digit + (sym[1] - 1)
            nxt_code = (self.states[cur] % A ** (L - 1)) * A + c
            nxt = self.lookup()[nxt_code]
            if nxt < 0 or self.transition[cur, nxt] <= 0:
                return -math.inf
            out += math.log(self.transition[cur, nxt])
            cur = nxt
        return out

    def symbol_marginal(self) -> np.ndarray:
        """Stationary law of the symbol at one position (full alphabet)."""
        A = self.alphabet_size
        first = self.states // A ** (self.memory - 1)
        out = np.zeros(A)
        np.add.at(out, first, self.stationary)
        return out

    # -- sampling ----------------------------------------------------------

    def _cums(self):
        if self._cum_fwd is None:
            self._cum_fwd = np.cumsum(self.transition, axis=1)
            rev = (self.stationary[None, :] * self.transition.T
                   / self.stationary[:, None])
            rev /= rev.sum(axis=1, keepdims=True)
            self._cum_bwd = np.cumsum(rev, axis=1)
        return self._cum_fwd, self._cum_bwd

    def _step(self, cum, state, rng):
        u = rng.random(len(state))
        return (cum[state] < u[:, None]).sum(axis=1).clip(0, self.n_states - 1)

    def sample_forward(self, n_symbols: int, count: int, rng) -> np.ndarray:
        """Symbol codes of forward words drawn from the stationary chain."""
        rng = _rng(rng)
        L, A = self.memory, self.alphabet_size
        if n_symbols < L:
            raise InvalidWord(f"need at least {L} symbols per draw")
        cum_fwd, _ = self._cums()
        state = rng.choice(self.n_states, size=count, p=self.stationary)
        return self._emit_forward(state, n_symbols, cum_fwd, rng)

    def _emit_forward(self, state, n_symbols, cum_fwd, rng):
        L, A = self.memory, self.alphabet_size
        out = np.empty((len(state), n_symbols), dtype=np.int64)
        code = self.states[state]
        for i in range(L):
            out[:, i] = (code // A ** (L - 1 - i)) % A
        cur = state
        for t in range(L, n_symbols):
            cur = self._step(cum_fwd, cur, rng)
            out[:, t] = self.states[cur] % A
        return out

    def sample_two_sided(self, n_past: int, n_forward: int, count: int, rng):
        """Coupled past and forward words through the time-zero state.

        Past rows are most recent first; the reversed chain of the stationary
        Markov measure generates the past, which is the computable form of
        the conditional measures on fibers.
        """
        rng = _rng(rng)
        cum_fwd, cum_bwd = self._cums()
        A = self.alphabet_size
        state0 = rng.choice(self.n_states, size=count, p=self.stationary)
        past = np.empty((count, n_past), dtype=np.int64)
        cur = state0
        for j in range(n_past):
            cur = self._step(cum_bwd, cur, rng)
            past[:, j] = self.states[cur] // A ** (self.memory - 1)
        fwd = self._emit_forward(state0, n_forward, cum_fwd, rng)
        M = self.max_digit
        return (past // M + 1, past % M + 1, fwd // M + 1, fwd % M + 1)

    def sample_forward_digits(self, n_symbols: int, count: int, rng):
        codes = self.sample_forward(n_symbols, count, rng)
        M = self.max_digit
        return codes // M + 1, codes % M + 1

    # -- Gibbs constant ------------------------------------------------------

    def gibbs_constant_hat(self, depth: int = None) -> float:
        """Max Gibbs ratio deviation over all words of depth <= k+4.

        The ratio compares chain cylinder masses against exp(S_n psi - n P)
        for the realized memory-k potential, whose Birkhoff sums are
        cylinder-constant.  The separate ``potential_error`` field bounds how
        far that realization can sit from the un-truncated potential; folding
        the realization drift into the ratio itself would grow the constant
        exponentially in depth and certify nothing.
        """
        depth = self.memory + 4 if depth is None else int(depth)
        if depth < self.memory:
            raise InvalidWord("depth below the chain memory")
        if depth not in self._hat_cache:
            self._hat_cache[depth] = self._hat_compute(depth)
        return self._hat_cache[depth]

    def _rep_values(self, n: int) -> np.ndarray:
        """S_n psi of the realized potential on every depth-n word."""
        A = self.alphabet_size
        codes = np.arange(A ** n, dtype=np.int64)
        S = np.zeros(A ** n)
        rot = codes
        for _ in range(n):
            S = S + self.gram[rot // A ** (n - self.memory)]
            rot = (rot % A ** (n - 1)) * A + rot // A ** (n - 1)
        return S

    def _step_matrix(self) -> np.ndarray:
        """log transition probability by (source full code, appended symbol)."""
        A, L = self.alphabet_size, self.memory
        with np.errstate(divide="ignore"):
            logP = np.log(self.transition)
        succ_code = (self.states % A ** (L - 1))[:, None] * A + np.arange(A)[None, :]
        succ_idx = self.lookup()[succ_code]
        valid = succ_idx >= 0
        src = np.arange(self.n_states)[:, None].repeat(A, axis=1)
        vals = np.where(valid, logP[src, np.where(valid, succ_idx, 0)], -np.inf)
        step = np.full((A ** L, A), -np.inf)
        step[self.states] = vals
        return step

    def _hat_compute(self, depth: int) -> float:
        A, L = self.alphabet_size, self.memory
        if A ** depth > ENUMERATION_CAP:
            raise EnumerationCapExceeded(f"{A**depth} words exceed the cap")
        logpi = np.full(A ** L, -np.inf)
        logpi[self.states] = np.log(self.stationary)
        step = self._step_matrix()
        worst = 1.0
        codes = np.arange(A ** L, dtype=np.int64)
        logm = logpi
        for n in range(L, depth + 1):
            S = self._rep_values(n)
            ratio = logm - (S - n * self.log_pressure)
            finite = np.isfinite(ratio)
            if finite.any():
                worst = max(worst, float(np.exp(np.abs(ratio[finite]).max())))
            if n < depth:
                end_code = codes % (A ** L)
                logm = (logm[:, None] + step[end_code]).ravel()
                codes = (codes[:, None] * A + np.arange(A)[None, :]).ravel()
        return worst


def _prune_support(support: np.ndarray) -> np.ndarray:
    alive = np.ones(support.shape[0], dtype=bool)
    while True:
        sub = support & alive[:, None] & alive[None, :]
        new = alive & sub.any(axis=1) & sub.any(axis=0)
        if np.array_equal(new, alive):
            return alive
        alive = new


def _check_primitive(support: np.ndarray):
    n = support.shape[0]
    exponent = (n - 1) ** 2 + 1
    B = support.astype(float)
    steps = max(0, math.ceil(math.log2(exponent))) if exponent > 1 else 0
    for _ in range(steps):
        B = (B @ B) > 0
        B = B.astype(float)
    if not (B > 0).all():
        raise NonPrimitive("transition support is not primitive")


@lru_cache(maxsize=256)
def gibbs_markov(potential, max_digit: int, memory: int = None) -> GibbsApprox:
    """Gibbs state of a finite-memory potential on the M-truncation.

    States are k-words; the weight of an allowed transition is exp of the
    potential on the source window.  Forbidden words prune the support; the
    remainder must be primitive.
    """
    M = check_max_digit(max_digit)
    table, err, geo = _realize(potential, M, memory)
    L = max(memory or 1, table.memory)
    A = M * M
    if A ** L > STATE_CAP:
        raise EnumerationCapExceeded(
            f"{A**L} states exceed the cap {STATE_CAP}; lower the memory")
    base = _base_flat(table, L)
    gram = _scaled(base, table.scale)
    idx = np.arange(A ** L, dtype=np.int64)
    succ = (idx % A ** (L - 1))[:, None] * A + np.arange(A)[None, :]
    # boundary: exact end gram plus max-plus tail over L-1 future symbols
    tail = np.zeros(A ** L)
    for _ in range(L - 1):
        tail = np.max(gram[succ] + tail[succ], axis=1)
    boundary = gram + tail

    logW = np.full((A ** L, A ** L), -np.inf)
    logW[idx[:, None], succ] = gram[idx][:, None]
    support = np.isfinite(logW)
    alive = _prune_support(support)
    if not alive.any():
        raise NonPrimitive("no admissible bi-infinite words")
    keep = np.where(alive)[0]
    sub = logW[np.ix_(keep, keep)]
    _check_primitive(np.isfinite(sub))

    m0 = sub[np.isfinite(sub)].max()
    W = np.exp(sub - m0)
    vals, vecs = np.linalg.eig(W)
    i = int(np.argmax(np.abs(vals)))
    rho = vals[i]
    if abs(rho.imag) > 1e-9 * abs(rho.real) or rho.real <= 0:
        raise NonPrimitive("Perron root not isolated and positive")
    h = np.real(vecs[:, i])
    h = h if h.sum() > 0 else -h
    lvals, lvecs = np.linalg.eig(W.T)
    j = int(np.argmax(np.abs(lvals)))
    nu = np.real(lvecs[:, j])
    nu = nu if nu.sum() > 0 else -nu
    if (h <= 0).any() or (nu <= 0).any():
        raise NonPrimitive("Perron eigenvectors not strictly positive")
    rho = float(rho.real)
    nu = nu / (nu @ h)
    P = W * h[None, :] / (rho * h[:, None])
    P = np.where(np.isfinite(sub), P, 0.0)
    P /= P.sum(axis=1, keepdims=True)
    pi = nu * h
    pi /= pi.sum()

    return GibbsApprox(
        potential=potential, max_digit=M, memory=L,
        log_pressure=float(np.log(rho) + m0),
        states=keep, transition=P, stationary=pi, right_vec=h,
        gram=gram, gram_base=base, boundary=boundary,
        potential_error=err, is_geometric=geo,
    )


# ---------------------------------------------------------------------------
# pressure by direct cylinder sums

@dataclass(frozen=True)
class PressureEstimate:
    """Cylinder-sum pressure: naive levels plus the bias-free difference."""

    truncation: int
    depth_values: tuple
    extrapolated: float
    error_est: float
    log_partition: tuple
    potential_error: float


def _log_partition(gram: np.ndarray, L: int, A: int, depth: int) -> float:
    """log sum over depth-n cylinders of exp(exact sup of S_n psi)."""
    N = depth + L - 1
    if A ** N > ENUMERATION_CAP:
        raise EnumerationCapExceeded(
            f"(M^2)^{N} = {A**N} cylinder extensions exceed the cap")
    codes = np.arange(A ** N, dtype=np.int64)
    S = np.zeros(A ** N)
    for i in range(depth):
        win = (codes // A ** (N - i - L)) % A ** L
        S = S + gram[win]
    sup = S.reshape(A ** depth, A ** (N - depth)).max(axis=1)
    finite = sup[np.isfinite(sup)]
    if finite.size == 0:
        raise SummabilityFailure("all depth cylinders forbidden")
    return float(logsumexp(finite))


def pressure_cylinder_sum(potential, max_digit: int, depth: int,
                          memory: int = None) -> PressureEstimate:
    """Pressure from cylinder sums P_n = (1/n) log sum exp(sup S_n psi).

    The sup over each cylinder is exact for the realized finite-memory
    potential (max over the boundary extensions); the memory-realization
    error of geometric potentials is reported, not bounded here.  The
    extrapolated value is the successive difference log Z_n - log Z_{n-1},
    which removes the O(1/n) bias of the naive quotient.
    """
    if depth < 2:
        raise InvalidWord("need depth >= 2 to extrapolate")
    M = check_max_digit(max_digit)
    table, err, _ = _realize(potential, M, memory)
    L = max(memory or 1, table.memory)
    A = M * M
    gram = _scaled(_base_flat(table, L), table.scale)
    logZ = [_log_partition(gram, L, A, j) for j in range(1, depth + 1)]
    if not math.isfinite(logZ[0]):
        raise SummabilityFailure("depth-1 cylinder sum is not finite")
    depth_values = tuple(z / j for j, z in enumerate(logZ, start=1))
    extrapolated = logZ[-1] - logZ[-2]
    return PressureEstimate(
        truncation=M, depth_values=depth_values, extrapolated=extrapolated,
        error_est=abs(depth_values[-1] - extrapolated),
        log_partition=tuple(logZ), potential_error=err,
    )


# ---------------------------------------------------------------------------
# entropies

def entropy(g: GibbsApprox) -> float:
    """Entropy rate of the stationary chain."""
    P = g.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log(P), 0.0)
    return float(-(g.stationary @ plogp.sum(axis=1)))


def potential_mean(g: GibbsApprox) -> float:
    """Integral of the potential against the Gibbs state."""
    return float(g.stationary @ g.gram[g.states])


def variational_gap(g: GibbsApprox) -> float:
    """|h + int psi - P|; zero up to eigensolver precision for Gibbs states."""
    return abs(entropy(g) + potential_mean(g) - g.log_pressure)


@dataclass(frozen=True)
class MarginalEntropyDetails:
    which: int
    depth: int
    block_entropies: tuple
    rates: tuple
    value: float
    gap: float


def _state_digit_codes(g: GibbsApprox, which: int) -> np.ndarray:
    """Base-M digit-word code of each state's projected digits."""
    A, M, L = g.alphabet_size, g.max_digit, g.memory
    codes = np.zeros(g.n_states, dtype=np.int64)
    for i in range(L):
        sym = (g.states // A ** (L - 1 - i)) % A
        d = sym // M if which == 1 else sym % M
        codes = codes * M + d
    return codes


def marginal_entropy_details(g: GibbsApprox, which: int, depth: int
                             ) -> MarginalEntropyDetails:
    """Digit-marginal block entropies by the forward (hidden-Markov) sweep.

    Exact cylinder masses of the digit factor are accumulated per digit word
    while summing over the hidden pair-symbol states.
    """
    if which not in (1, 2):
        raise InvalidWord("marginal coordinate must be 1 or 2")
    M, L = g.max_digit, g.memory
    if depth < L + 1:
        raise InvalidWord(f"need depth >= {L + 1}")
    if M ** depth * g.n_states > 5 * 10 ** 7:
        raise EnumerationCapExceeded("digit-word sweep exceeds the cap")
    alpha = np.zeros((M ** L, g.n_states))
    alpha[_state_digit_codes(g, which), np.arange(g.n_states)] = g.stationary
    A = g.alphabet_size
    last_sym = g.states % A
    last_digit = last_sym // M if which == 1 else last_sym % M
    H = []
    for n in range(L, depth + 1):
        nu = alpha.sum(axis=1)
        nz = nu[nu > 0]
        H.append(float(-(nz * np.log(nz)).sum()))
        if n < depth:
            T = alpha @ g.transition
            alpha = np.zeros((T.shape[0], M, g.n_states))
            for d in range(M):
                cols = last_digit == d
                alpha[:, d, cols] = T[:, cols]
            alpha = alpha.reshape(-1, g.n_states)
    rates = tuple(b - a for a, b in zip(H, H[1:]))
    gap = abs(rates[-1] - rates[-2]) if len(rates) >= 2 else math.inf
    return MarginalEntropyDetails(which=which, depth=depth,
                                  block_entropies=tuple(H), rates=rates,
                                  value=rates[-1], gap=gap)


def marginal_entropy(g: GibbsApprox, which: int, depth: int = 8) -> float:
    """Entropy rate H_n - H_{n-1} of one digit-coordinate marginal."""
    return marginal_entropy_details(g, which, depth).value


# ---------------------------------------------------------------------------
# Lyapunov exponents

def lyapunov_marginal(g: GibbsApprox, which: int, n_samples: int = 2000,
                      orbit_len: int = 100, rng_seed=0,
                      window: int = 12) -> McEstimate:
    """Birkhoff average of -log of the digit-map derivative modulus.

    Each orbit contributes the average of 2 log(x_{t+1} + d_t) with x the
    continued-fraction value of the digit suffix over a sliding window.
    """
    if which not in (1, 2):
        raise InvalidWord("marginal coordinate must be 1 or 2")
    if orbit_len < 50:
        raise InvalidWord("orbit_len must be >= 50")
    rng = _rng(rng_seed)
    m_d, n_d = g.sample_forward_digits(orbit_len + window, n_samples, rng)
    d = m_d if which == 1 else n_d
    x = np.empty((n_samples, orbit_len))
    tail = np.full(n_samples, 0.5)
    for t in range(orbit_len):
        cols = [d[:, t + 1 + u] for u in range(window)]
        xcur = tail.copy()
        for col in reversed(cols):
            xcur = 1.0 / (xcur + col)
        x[:, t] = xcur
    per_orbit = (2.0 * np.log(x + d[:, :orbit_len])).mean(axis=1)
    return McEstimate(value=float(per_orbit.mean()),
                      se=float(per_orbit.std(ddof=1) / math.sqrt(n_samples)),
                      n=n_samples)


def lyapunov_fiber(g: GibbsApprox, system: SmaleSystem, n_samples: int = 4000,
                   past_depth: int = 40, rng_seed=0,
                   window: int = 12) -> McEstimate:
    """Monte Carlo -int log|T'| at fiber points from backward sampling."""
    if past_depth < 10:
        raise InvalidWord("past_depth must be >= 10")
    from .systems import fiber_points_bulk, pi_values_bulk
    rng = _rng(rng_seed)
    past_m, past_n, fwd_m, fwd_n = g.sample_two_sided(
        past_depth, max(window, g.memory), n_samples, rng)
    pts = fiber_points_bulk(system, past_m, past_n, fwd_m, fwd_n,
                            ctx_depth=window)
    if system.variant == "similarity":
        sched = system.schedule
        mods = np.array([sched.ratio_of(s) * sched.inner_factor
                         for s in pair_alphabet(g.max_digit)])
        sym0 = (fwd_m[:, 0] - 1) * g.max_digit + (fwd_n[:, 0] - 1)
        vals = -np.log(mods[sym0])
    else:
        off = system.domain.radius + 1e-6
        if (np.abs(pts - system.domain.center) > off).any():
            raise DomainEscape("sampled fiber points left the domain")
        p0 = pi_values_bulk(fwd_m[:, :window], fwd_n[:, :window])
        if system.variant == "inverse_conjugate":
            mod = 1.0 / np.abs(np.conj(pts) + p0) ** 2
        else:
            mod = 2.0 * np.abs(pts) / np.abs(pts * pts + 2.0 * p0) ** 2
        vals = -np.log(mod)
    return McEstimate(value=float(vals.mean()),
                      se=float(vals.std(ddof=1) / math.sqrt(n_samples)),
                      n=n_samples)


def lyapunov_fiber_exact(g: GibbsApprox) -> float:
    """Exact chain expectation -int of the realized log-derivative table.

    Defined for geometric potentials only; this is the exponent the
    dimension formulas use so that pressure, entropy, and the exponent obey
    the exact chain identities.
    """
    if not g.is_geometric:
        raise ConfigError("exact fiber exponent needs a geometric potential")
    return float(-(g.stationary @ g.gram_base[g.states]))


def lyapunov_fiber_table_mc(g: GibbsApprox, n_samples: int = 4000,
                            orbit_len: int = 50, rng_seed=0) -> McEstimate:
    """Monte Carlo of the realized table integrand along chain orbits."""
    if not g.is_geometric:
        raise ConfigError("table Monte Carlo needs a geometric potential")
    rng = _rng(rng_seed)
    codes = g.sample_forward(orbit_len + g.memory - 1, n_samples, rng)
    A, L = g.alphabet_size, g.memory
    word = np.zeros((n_samples, orbit_len), dtype=np.int64)
    for i in range(L):
        word = word * A + codes[:, i : i + orbit_len]
    per_orbit = (-g.gram_base[word]).mean(axis=1)
    return McEstimate(value=float(per_orbit.mean()),
                      se=float(per_orbit.std(ddof=1) / math.sqrt(n_samples)),
                      n=n_samples)


# ---------------------------------------------------------------------------
# derivative identity and measure summaries

def pressure_derivative_check(system: SmaleSystem, s: float,
                              h_step: float = 1e-3, max_digit: int = 3,
                              memory: int = None, n_samples: int = None,
                              orbit_len: int = 50, rng_seed=0):
    """(fd, integral): centered pressure difference vs int log|T'| d mu.

    ``fd`` differentiates the realized pressure in s.  The integral is the
    chain expectation of the realized log-derivative (exact when n_samples
    is None, Monte Carlo over chain orbits otherwise); both sides therefore
    refer to the same realized potential.
    """
    if s - h_step < 0:
        raise ConfigError("s - h_step must stay nonnegative")
    p_hi = gibbs_markov(GeometricPotential(system, s + h_step), max_digit, memory)
    p_lo = gibbs_markov(GeometricPotential(system, s - h_step), max_digit, memory)
    fd = (p_hi.log_pressure - p_lo.log_pressure) / (2.0 * h_step)
    g = gibbs_markov(GeometricPotential(system, s), max_digit, memory)
    if n_samples is None:
        integral = -lyapunov_fiber_exact(g)
        return fd, integral
    mc = lyapunov_fiber_table_mc(g, n_samples, orbit_len, rng_seed)
    return fd, McEstimate(value=-mc.value, se=mc.se, n=mc.n)


@dataclass(frozen=True)
class MeasureStats:
    """Entropies and exponents of one Gibbs state, marginals included."""

    h_mu: float
    h_mu1: float
    h_mu2: float
    chi1: float
    chi2: float
    chi_T: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (self.chi1 > 0 and self.chi2 > 0 and self.chi_T > 0):
            raise DegenerateExponent("all Lyapunov exponents must be positive")


def measure_stats(g: GibbsApprox, system: SmaleSystem, depth: int = 8,
                  n_samples: int = 4000, orbit_len: int = 100,
                  past_depth: int = 40, rng_seed=0,
                  exact_fiber: bool = None) -> MeasureStats:
    """Assemble the entropy/exponent summary of one Gibbs state.

    chi_T uses the exact table expectation when the potential is geometric
    (keeping the summary consistent with the dimension formulas) and falls
    back to the Monte Carlo fiber estimate otherwise.
    """
    ss = np.random.SeedSequence(rng_seed).spawn(3)
    h = entropy(g)
    h1 = marginal_entropy(g, 1, depth)
    h2 = marginal_entropy(g, 2, depth)
    chi1 = lyapunov_marginal(g, 1, n_samples, orbit_len, ss[0]).value
    chi2 = lyapunov_marginal(g, 2, n_samples, orbit_len, ss[1]).value
    use_exact = g.is_geometric if exact_fiber is None else exact_fiber
    if use_exact:
        chi_T = lyapunov_fiber_exact(g)
    else:
        chi_T = lyapunov_fiber(g, system, n_samples, past_depth, ss[2]).value
    return MeasureStats(h_mu=h, h_mu1=min(h1, h), h_mu2=min(h2, h),
                        chi1=chi1, chi2=chi2, chi_T=chi_T,
                        lambda1=math.exp(-chi1), lambda2=math.exp(-chi2))
