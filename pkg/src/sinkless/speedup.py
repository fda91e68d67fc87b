"""Round elimination between sinkless colouring and sinkless orientation.

All constructions run on the infinite 3-regular edge-coloured tree, whose
nodes are reduced colour words (see :mod:`sinkless.local_sim`). Within it:

* the colour-``c`` edge at the root is ``{(), (c,)}``, with ``()`` as side 0;
* ``N^t(e)`` for that edge is ``CanonicalBall(d, t, c).tree_words()``;
* ``N^t(u)`` for ``u = ()`` is ``node_ball_words(d, t)``.

Every conditional probability is an exact count over all completions of the
free region, compared against thresholds that are exact dyadic rationals.

Colouring to orientation (same radius ``t``): colour ``c`` is a candidate of
``u`` when ``Pr[B(u) = c | N^t(e_c)] >= K``. The edge points away from the
endpoint that alone has ``c`` as a candidate; otherwise it points towards
the side whose tapes are lexicographically smaller, and a fully symmetric
edge ball is a flagged tie resolved towards side 0.

Orientation to colouring (radius ``t - 1``): colour ``c`` is a candidate of
``u`` when ``Pr[e_c points at u | N^{t-1}(u)] <= L``; the output is the
smallest candidate, or 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from .errors import PreconditionError
from .estimator import FORBIDDEN, SINK, conditional_counts, event_probabilities
from .graph_core import EdgeColouredGraph
from .local_sim import (DENSE_BITS, TABLE_STREAM, AlgorithmTable, CanonicalBall, TapeBlock,
                        node_ball_words, stream)

__all__ = [
    "Z",
    "SpeedupConfig",
    "ceil_root",
    "random_node_table",
    "candidate_colours",
    "colouring_to_orientation",
    "orientation_to_colouring",
    "speedup_step",
    "StepResult",
    "SpeedupTrace",
    "TraceRecord",
    "iterate_to_zero",
    "zero_round_floor",
    "zero_round_tables",
    "ColouringAnalysis",
    "OrientationAnalysis",
    "step_bound",
    "empty_candidate_bound",
    "not_a_sink_violations",
    "intersection_bound",
    "nice_node_violations",
]

Z = 4 * 6 ** 0.25
DENOM_BITS = 32


def ceil_root(x: Fraction, k: int, denom_bits: int = DENOM_BITS) -> Fraction:
    """Smallest ``m / 2**denom_bits`` whose ``k``-th power is at least ``x``."""
    x = Fraction(x)
    if x < 0:
        raise PreconditionError("root of a negative number")
    target = x * (1 << (denom_bits * k))
    need = -(-target.numerator // target.denominator)  # ceil
    m = int(round(float(need) ** (1.0 / k))) if need else 0
    while m > 0 and (m - 1) ** k >= need:
        m -= 1
    while m ** k < need:
        m += 1
    return Fraction(m, 1 << denom_bits)


@dataclass(frozen=True)
class SpeedupConfig:
    """Thresholds ``K`` (candidate colours) and ``L`` (candidate out-colours)."""

    K: Fraction
    L: Fraction

    def __post_init__(self):
        if not (0 < self.K <= 1 and 0 < self.L <= 1):
            raise PreconditionError("thresholds must lie in (0, 1]")

    @classmethod
    def from_p(cls, p: Fraction) -> "SpeedupConfig":
        """``K^3 >= p`` and ``L^4 >= 6K``, both rounded up on a 2^-32 grid and capped at 1."""
        floor = Fraction(1, 1 << DENOM_BITS)
        K = min(max(ceil_root(p, 3), floor), Fraction(1))
        L = min(max(ceil_root(6 * K, 4), floor), Fraction(1))
        return cls(K, L)


def step_bound(p: float) -> float:
    return Z * p ** (1 / 12)


def random_node_table(d: int, t: int, R: int, seed: int) -> AlgorithmTable:
    """Uniformly random output colour for every tape assignment of the radius-``t`` ball."""
    ball = CanonicalBall(d, t)
    rng = stream(seed, TABLE_STREAM, d, t, R)
    bits = R * ball.size
    if bits > DENSE_BITS:
        raise PreconditionError(f"{bits}-bit table exceeds the dense budget")
    return AlgorithmTable(ball, R, rng.integers(0, d, size=1 << bits).astype(np.int8))


def _edge_words(d: int, t: int, c: int) -> list:
    return CanonicalBall(d, t, c).tree_words(())


def _shell(d: int, t: int) -> list:
    return [w for w in node_ball_words(d, t) if len(w) == t]


def _ge(counts: np.ndarray, total: int, threshold: Fraction) -> np.ndarray:
    """``counts / total >= threshold`` elementwise, exactly."""
    return counts.astype(object) * threshold.denominator >= threshold.numerator * total


def _le(counts: np.ndarray, total: int, threshold: Fraction) -> np.ndarray:
    return counts.astype(object) * threshold.denominator <= threshold.numerator * total


def _lt(counts: np.ndarray, total: int, threshold: Fraction) -> np.ndarray:
    return counts.astype(object) * threshold.denominator < threshold.numerator * total


class ColouringAnalysis:
    """Conditional output probabilities of a node table ``B`` given each edge ball.

    For colour ``c`` and each assignment of ``N^t(e_c)`` (indexed in edge-ball
    address order), ``count_u[c]`` / ``count_v[c]`` count completions of
    ``N^t(u) \\ N^t(e)`` / ``N^t(v) \\ N^t(e)`` under which ``B(u) = c`` /
    ``B(v) = c``; ``free_u[c]`` / ``free_v[c]`` are the completion counts.
    """

    def __init__(self, B: AlgorithmTable, budget: int = DENSE_BITS):
        if B.ball.edge_rooted:
            raise PreconditionError("need a node table")
        self.B = B
        self.d, self.t, self.R = B.ball.d, B.ball.t, B.R
        self.count_u, self.count_v, self.free_u, self.free_v = {}, {}, {}, {}
        for c in range(self.d):
            E = _edge_words(self.d, self.t, c)
            for side, centre in ((0, ()), (1, (c,))):
                ball = node_ball_words(self.d, self.t, centre)
                free = [w for w in ball if w not in set(E)]

                def hit(block, ball=ball, c=c):
                    return B.lookup(block.pack(ball)) == c

                counts = conditional_counts(hit, E, free, self.R, budget)
                total = 1 << (self.R * len(free))
                if side == 0:
                    self.count_u[c], self.free_u[c] = counts, total
                else:
                    self.count_v[c], self.free_v[c] = counts, total

    def membership(self, c: int, K: Fraction) -> tuple[np.ndarray, np.ndarray]:
        """Whether ``c`` is a candidate of side 0 (u) and of side 1 (v), per edge-ball tape."""
        return (_ge(self.count_u[c], self.free_u[c], K),
                _ge(self.count_v[c], self.free_v[c], K))

    def nice(self, c: int, K: Fraction) -> np.ndarray:
        """``Pr[B(u) = c = B(v) | N^t(e)] < K^2``; the two factors are independent on a tree."""
        joint = self.count_u[c].astype(object) * self.count_v[c].astype(object)
        return _lt(joint, self.free_u[c] * self.free_v[c], K * K)


def candidate_colours(B: AlgorithmTable, ball_tape: Mapping[tuple, int], K: Fraction,
                      analysis: ColouringAnalysis | None = None) -> frozenset[int]:
    """``C(u)`` for the root ``u = ()`` given tapes on (at least) every incident edge ball.

    ``ball_tape`` maps tree words to tapes; only the words of ``N^t(e_c)``
    are read for colour ``c``.
    """
    a = analysis or ColouringAnalysis(B)
    out = set()
    for c in range(a.d):
        index = 0
        for w in _edge_words(a.d, a.t, c):
            index = (index << a.R) | int(ball_tape[w])
        in_u, _ = a.membership(c, K)
        if in_u[index]:
            out.add(c)
    return frozenset(out)


def _orient_table(d: int, t: int, c: int, R: int, in_u: np.ndarray, in_v: np.ndarray) -> AlgorithmTable:
    ball = CanonicalBall(d, t, c)
    half = ball.size // 2
    index = np.arange(1 << (R * ball.size), dtype=np.int64)
    side0 = index >> (R * half)
    side1 = index & ((1 << (R * half)) - 1)
    # arbitrary branch: point at the lexicographically smaller side
    head = np.where(side1 < side0, 1, 0)
    tie = side0 == side1
    only_u = in_u & ~in_v
    only_v = in_v & ~in_u
    head = np.where(only_u, 1, np.where(only_v, 0, head)).astype(np.int8)
    tie = tie & ~only_u & ~only_v
    return AlgorithmTable(ball, R, head, tie)


def colouring_to_orientation(B: AlgorithmTable, K: Fraction,
                             analysis: ColouringAnalysis | None = None) -> dict[int, AlgorithmTable]:
    """Edge family ``B'`` of radius ``t`` built from node table ``B`` of radius ``t``."""
    a = analysis or ColouringAnalysis(B)
    out = {}
    for c in range(a.d):
        in_u, in_v = a.membership(c, K)
        out[c] = _orient_table(a.d, a.t, c, a.R, np.asarray(in_u, dtype=bool), np.asarray(in_v, dtype=bool))
    return out


class OrientationAnalysis:
    """Inward probabilities of an edge family given the root's radius-``t-1`` ball.

    ``inward[c][i]`` counts completions of ``N^t(e_c) \\ N^{t-1}(u)`` in which
    ``e_c`` points at ``u = ()`` (u evaluates as side 0), for the ``i``-th
    assignment of ``N^{t-1}(u)``; ``free[c]`` is the completion count.
    """

    def __init__(self, family: Mapping[int, AlgorithmTable], budget: int = DENSE_BITS):
        first = family[0]
        self.family = family
        self.d, self.t, self.R = first.ball.d, first.ball.t, first.R
        if self.t < 1:
            raise PreconditionError("orientation_to_colouring needs t >= 1")
        self.U = node_ball_words(self.d, self.t - 1)
        self.inward, self.free = {}, {}
        for c in range(self.d):
            E = _edge_words(self.d, self.t, c)
            free = [w for w in E if w not in set(self.U)]
            table = family[c]

            def hit(block, E=E, table=table):
                return table.lookup(block.pack(E)) == 0

            self.inward[c] = conditional_counts(hit, self.U, free, self.R, budget)
            self.free[c] = 1 << (self.R * len(free))

    def membership(self, c: int, L: Fraction) -> np.ndarray:
        return _le(self.inward[c], self.free[c], L)


def orientation_to_colouring(family: Mapping[int, AlgorithmTable], L: Fraction,
                             analysis: OrientationAnalysis | None = None) -> AlgorithmTable:
    """Node table ``B''`` of radius ``t - 1``: smallest candidate out-colour, else 0."""
    a = analysis or OrientationAnalysis(family)
    size = 1 << (a.R * len(a.U))
    values = np.zeros(size, dtype=np.int8)
    chosen = np.zeros(size, dtype=bool)
    for c in range(a.d):
        member = np.asarray(a.membership(c, L), dtype=bool)
        take = member & ~chosen
        values[take] = c
        chosen |= member
    return AlgorithmTable(CanonicalBall(a.d, a.t - 1), a.R, values)


@dataclass
class StepResult:
    orientation: dict[int, AlgorithmTable]
    colouring: AlgorithmTable
    config: SpeedupConfig
    bound: float  # 4 * 6^(1/4) * p^(1/12)
    bound_exact: Fraction  # 4L with L^4 >= 6K, K^3 >= p; never below ``bound`` beyond grid rounding
    colouring_analysis: ColouringAnalysis = field(repr=False)
    orientation_analysis: OrientationAnalysis = field(repr=False)


def speedup_step(B: AlgorithmTable, p: Fraction, budget: int = DENSE_BITS) -> StepResult:
    """One colouring -> orientation -> colouring round trip, losing one round."""
    if B.ball.t < 1:
        raise PreconditionError("speedup_step needs t >= 1")
    config = SpeedupConfig.from_p(Fraction(p))
    ca = ColouringAnalysis(B, budget)
    family = colouring_to_orientation(B, config.K, ca)
    oa = OrientationAnalysis(family, budget)
    B2 = orientation_to_colouring(family, config.L, oa)
    return StepResult(family, B2, config, step_bound(float(p)), 4 * config.L, ca, oa)


# --- conditional bound checks on the canonical tree ---------------------------

def empty_candidate_bound(analysis: ColouringAnalysis, K: Fraction, budget: int = DENSE_BITS):
    """Largest ``Pr[C(u) = {} | N^{t-1}(u)]`` over all fixed tapes, and whether all are ``<= 3K``."""
    a = analysis
    if a.t < 1:
        raise PreconditionError("needs t >= 1")
    fixed = node_ball_words(a.d, a.t - 1)
    shell = _shell(a.d, a.t)
    members = [a.membership(c, K)[0] for c in range(a.d)]

    def empty(block):
        out = np.ones(len(block), dtype=bool)
        for c in range(a.d):
            out &= ~np.asarray(members[c], dtype=bool)[block.pack(_edge_words(a.d, a.t, c))]
        return out

    counts = conditional_counts(empty, fixed, shell, a.R, budget)
    total = 1 << (a.R * len(shell))
    worst = Fraction(int(counts.max()), total)
    return worst, bool(np.all(_le(counts, total, 3 * K)))


def not_a_sink_violations(analysis: ColouringAnalysis, family: Mapping[int, AlgorithmTable],
                          K: Fraction, budget: int = DENSE_BITS) -> int:
    """Tapes on ``N^t(u)`` where ``C(u)`` is non-empty, all incident edge balls are nice,
    yet ``u`` has no outgoing edge."""
    a = analysis
    block = TapeBlock.enumerate(node_ball_words(a.d, a.t), a.R, budget)
    nonempty = np.zeros(len(block), dtype=bool)
    all_nice = np.ones(len(block), dtype=bool)
    has_out = np.zeros(len(block), dtype=bool)
    for c in range(a.d):
        index = block.pack(_edge_words(a.d, a.t, c))
        nonempty |= np.asarray(a.membership(c, K)[0], dtype=bool)[index]
        all_nice &= np.asarray(a.nice(c, K), dtype=bool)[index]
        has_out |= family[c].lookup(index) == 1
    return int(np.sum(nonempty & all_nice & ~has_out))


def intersection_bound(analysis: OrientationAnalysis, L: Fraction, budget: int = DENSE_BITS):
    """Largest ``Pr[c in C'(u) and c in C'(v) | N^{t-1}(e_c)]`` and whether all are ``<= 2L``."""
    a = analysis
    worst = Fraction(0)
    ok = True
    for c in range(a.d):
        member = np.asarray(a.membership(c, L), dtype=bool)
        fixed = _edge_words(a.d, a.t - 1, c) if a.t >= 2 else []
        E = _edge_words(a.d, a.t, c)
        free = [w for w in E if w not in set(fixed)]
        at_u = node_ball_words(a.d, a.t - 1, ())
        at_v = node_ball_words(a.d, a.t - 1, (c,))

        def both(block):
            return member[block.pack(at_u)] & member[block.pack(at_v)]

        counts = conditional_counts(both, fixed, free, a.R, budget)
        total = 1 << (a.R * len(free))
        worst = max(worst, Fraction(int(counts.max()), total))
        ok &= bool(np.all(_le(counts, total, 2 * L)))
    return worst, ok


def nice_node_violations(analysis: OrientationAnalysis, L: Fraction, budget: int = DENSE_BITS) -> int:
    """Fixed ``N^{t-1}(u)`` tapes that are nice (``Pr[sink | N^{t-1}(u)] <= L^3``) yet ``C'(u)`` is empty."""
    a = analysis
    shell = _shell(a.d, a.t)

    def sink(block):
        out = np.ones(len(block), dtype=bool)
        for c in range(a.d):
            out &= a.family[c].lookup(block.pack(_edge_words(a.d, a.t, c))) == 0
        return out

    counts = conditional_counts(sink, a.U, shell, a.R, budget)
    nice = np.asarray(_le(counts, 1 << (a.R * len(shell)), L ** 3), dtype=bool)
    nonempty = np.zeros(len(counts), dtype=bool)
    for c in range(a.d):
        nonempty |= np.asarray(a.membership(c, L), dtype=bool)
    return int(np.sum(nice & ~nonempty))


# --- iteration ---------------------------------------------------------------

@dataclass
class TraceRecord:
    t: int
    p: Fraction  # measured max forbidden-configuration probability on the host
    tie_mass: Fraction  # largest tie mass over host sites at this level
    chained_bound: float  # b_0 = p_0, b_{i+1} = z * b_i^(1/12)
    step_bound: float | None = None  # z * p_{i-1}^(1/12) for i >= 1
    step_bound_exact: Fraction | None = None  # 4L of the step that produced this level
    sink: Fraction | None = None  # measured sink probability of the intermediate orientation
    sink_bound_exact: Fraction | None = None  # 6K of that step


@dataclass
class SpeedupTrace:
    records: list[TraceRecord]
    tables: list[AlgorithmTable] = field(repr=False, default_factory=list)

    def holds(self) -> bool:
        """Every level obeys ``p_{i+1} <= 4L_i + tie mass`` (exact) and the sink bound ``<= 6K_i + tie``."""
        for r in self.records[1:]:
            if r.p > r.step_bound_exact + r.tie_mass:
                return False
            if r.sink > r.sink_bound_exact + r.tie_mass:
                return False
        return True

    def to_csv(self, comments=()) -> str:
        lines = [f"# {c}" for c in comments]
        lines.append("t_i,p_i_num,p_i_den,bound_i")
        for r in self.records:
            lines.append(f"{r.t},{r.p.numerator},{r.p.denominator},{r.chained_bound!r}")
        return "\n".join(lines) + "\n"


def _round_up(x: float) -> float:
    return math.nextafter(x, math.inf)


def iterate_to_zero(B0: AlgorithmTable, host: EdgeColouredGraph, budget: int = DENSE_BITS) -> SpeedupTrace:
    """Apply :func:`speedup_step` until radius 0, measuring exact probabilities on ``host``."""
    m0 = event_probabilities(B0, host, FORBIDDEN, budget=budget)
    records = [TraceRecord(B0.ball.t, m0.value, m0.tie_mass, float(m0.value))]
    tables = [B0]
    B, p = B0, m0.value
    while B.ball.t >= 1:
        step = speedup_step(B, p, budget)
        sink = event_probabilities(step.orientation, host, SINK, budget=budget)
        nxt = event_probabilities(step.colouring, host, FORBIDDEN, budget=budget)
        prev = records[-1]
        records.append(TraceRecord(
            step.colouring.ball.t, nxt.value, max(nxt.tie_mass, sink.tie_mass),
            _round_up(step_bound(prev.chained_bound)), _round_up(step.bound), step.bound_exact,
            sink.value, 6 * step.config.K))
        tables.append(step.colouring)
        B, p = step.colouring, nxt.value
    return SpeedupTrace(records, tables)


# --- zero rounds ---------------------------------------------------------------

def zero_round_floor(B: AlgorithmTable) -> Fraction:
    """``max_c Pr[B = c]^2``: the forbidden probability at the worst colour class."""
    if B.ball.t != 0 or B.ball.edge_rooted:
        raise PreconditionError("zero_round_floor needs a 0-round node table")
    values = np.asarray([v for _, v in B.entries()])
    total = 1 << B.R
    q = [Fraction(int(np.sum(values == c)), total) for c in range(B.ball.d)]
    return max(x * x for x in q)


def zero_round_tables(R: int, d: int = 3) -> Iterator[AlgorithmTable]:
    """All ``d ** (2 ** R)`` 0-round node tables."""
    ball = CanonicalBall(d, 0)
    size = 1 << R
    for code in range(d ** size):
        values = np.zeros(size, dtype=np.int8)
        x = code
        for i in range(size):
            x, values[i] = divmod(x, d)
        yield AlgorithmTable(ball, R, values)
