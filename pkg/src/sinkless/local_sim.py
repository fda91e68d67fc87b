"""LOCAL-model execution on edge-coloured graphs.

Because the input graph carries a proper edge colouring, ports are colours:
a position in a tree-like neighbourhood is addressed by the sequence of edge
colours walked from the root, with no colour repeated twice in a row. These
*reduced words* also name the nodes of the infinite d-regular coloured tree,
which is where canonical (host-independent) computations happen.

Random tapes are ``R``-bit integers per node, bit 0 being the most
significant, so integer order equals lexicographic order of bit strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError, GirthError, PreconditionError, ResourceError, RoundBudgetExceeded
from .graph_core import EdgeColouredGraph
from .problems import Colouring, Orientation

__all__ = [
    "Word",
    "extend",
    "node_ball_words",
    "CanonicalBall",
    "RandomTape",
    "sample_tape",
    "stream",
    "TapeBlock",
    "AlgorithmTable",
    "BallEmbedding",
    "embed",
    "eval_table",
    "NodeView",
    "MessageAlgorithm",
    "MessageRun",
    "run_message_passing",
    "GatherAlgorithm",
    "DENSE_BITS",
    "format_table",
    "parse_table",
    "format_tape",
    "parse_tape",
]

Word = tuple[int, ...]
DENSE_BITS = 24

# stream ids for seed splitting; see stream()
TAPE_STREAM = 1
MC_STREAM = 2
MT_STREAM = 3
TABLE_STREAM = 4
LUBY_STREAM = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; e.g. ``stream(seed, TAPE_STREAM, v)``."""
    return np.random.default_rng([int(seed), *map(int, key)])


def extend(word: Word, colours: Iterable[int]) -> Word:
    """Walk ``colours`` from ``word`` in the coloured tree, cancelling back-steps."""
    out = list(word)
    for c in colours:
        if out and out[-1] == c:
            out.pop()
        else:
            out.append(c)
    return tuple(out)


def _words(d: int, length: int, avoid_first: int | None = None) -> list[Word]:
    """All reduced words of exactly ``length`` not starting with ``avoid_first``."""
    level = [()]
    for i in range(length):
        level = [w + (c,) for w in level for c in range(d)
                 if (not w or w[-1] != c) and not (i == 0 and c == avoid_first)]
    return level


def node_ball_words(d: int, t: int, centre: Word = ()) -> list[Word]:
    """Tree nodes within distance ``t`` of ``centre``, in canonical address order."""
    return [extend(centre, w) for k in range(t + 1) for w in _words(d, k)]


@dataclass(frozen=True)
class CanonicalBall:
    """Radius-``t`` neighbourhood of a node (``root_colour is None``) or of an edge.

    Node-rooted addresses are reduced words sorted by ``(len, word)``.
    Edge-rooted addresses are ``(side, word)`` with ``word`` not starting with
    the root colour and of length at most ``t - 1``, sorted by
    ``(side, len, word)``: the edge ball is the union of the two radius-``t-1``
    balls of its endpoints. Side 0 is the lower-indexed endpoint on a host.
    """

    d: int
    t: int
    root_colour: int | None = None

    @property
    def edge_rooted(self) -> bool:
        return self.root_colour is not None

    @cached_property
    def addresses(self) -> tuple:
        if not self.edge_rooted:
            return tuple(w for k in range(self.t + 1) for w in _words(self.d, k))
        return tuple((s, w) for s in (0, 1) for k in range(self.t)
                     for w in _words(self.d, k, avoid_first=self.root_colour))

    @property
    def size(self) -> int:
        return len(self.addresses)

    def tree_words(self, centre: Word = ()) -> list[Word]:
        """Place the ball in the coloured tree; edge balls use the edge ``{centre, centre+c}``."""
        if not self.edge_rooted:
            return [extend(centre, a) for a in self.addresses]
        other = extend(centre, (self.root_colour,))
        return [extend(centre if s == 0 else other, w) for s, w in self.addresses]

    def expected_size(self) -> int:
        d, t = self.d, self.t
        if self.edge_rooted:
            if t == 0:
                return 0
            return 2 * sum((d - 1) ** k for k in range(t))
        if d == 2:
            return 1 + 2 * t
        return 1 + d * ((d - 1) ** t - 1) // (d - 2)


@dataclass(frozen=True)
class RandomTape:
    R: int
    bits: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.bits)

    def bit_string(self, v: int) -> str:
        return format(self.bits[v], f"0{self.R}b")

    def y(self, v: int) -> str:
        """Odd-index bits of node ``v``'s tape."""
        return self.bit_string(v)[1::2]

    def z(self, v: int) -> str:
        """Even-index bits of node ``v``'s tape."""
        return self.bit_string(v)[0::2]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int64)


def sample_tape(graph: EdgeColouredGraph | int, R: int, seed: int) -> RandomTape:
    """Uniform bits; node ``v`` draws from its own stream so tapes do not depend on ``n``."""
    if R < 1:
        raise PreconditionError("R must be at least 1")
    n = graph if isinstance(graph, int) else graph.n
    bits = []
    for v in range(n):
        rng = stream(seed, TAPE_STREAM, v)
        raw = rng.integers(0, 2, size=R)
        bits.append(int("".join(map(str, raw)), 2))
    return RandomTape(R, tuple(bits))


class TapeBlock:
    """A batch of joint tape assignments over an ordered list of keys.

    Keys are tree words or host node ids. ``enumerate`` yields all
    ``2**(R*len(keys))`` assignments with ``keys[0]`` most significant, so a
    prefix of keys selects contiguous row groups. Every key read through
    :meth:`column` is recorded in ``accessed``. Keys in ``fixed`` read as
    constants and are not part of the enumerated space.
    """

    def __init__(self, keys: Sequence[Hashable], R: int, *, rows: np.ndarray | None = None,
                 matrix: np.ndarray | None = None, fixed: Mapping[Hashable, int] | None = None):
        self.fixed = dict(fixed or {})
        self.keys = list(keys)
        self.position = {k: i for i, k in enumerate(self.keys)}
        if len(self.position) != len(self.keys):
            raise PreconditionError("duplicate keys in tape block")
        self.R = R
        self._rows = rows
        self._matrix = matrix
        self.accessed: set = set()

    @classmethod
    def enumerate(cls, keys: Sequence[Hashable], R: int, budget: int = DENSE_BITS,
                  fixed: Mapping[Hashable, int] | None = None) -> "TapeBlock":
        bits = R * len(keys)
        if bits > budget:
            raise ResourceError(f"{bits} free bits exceed the enumeration budget of {budget}; "
                                "use Monte Carlo estimation")
        return cls(keys, R, rows=np.arange(1 << bits, dtype=np.int64), fixed=fixed)

    @classmethod
    def sample(cls, keys: Sequence[Hashable], R: int, samples: int, rng: np.random.Generator) -> "TapeBlock":
        matrix = rng.integers(0, 1 << R, size=(samples, len(keys)), dtype=np.int64)
        return cls(keys, R, matrix=matrix)

    def __len__(self) -> int:
        return len(self._rows) if self._rows is not None else self._matrix.shape[0]

    def column(self, key: Hashable) -> np.ndarray:
        self.accessed.add(key)
        if key in self.fixed:
            return np.full(len(self), self.fixed[key], dtype=np.int64)
        j = self.position[key]
        if self._matrix is not None:
            return self._matrix[:, j]
        shift = self.R * (len(self.keys) - 1 - j)
        return (self._rows >> shift) & ((1 << self.R) - 1)

    def pack(self, keys: Sequence[Hashable]) -> np.ndarray:
        out = np.zeros(len(self), dtype=np.int64)
        for key in keys:
            out = (out << self.R) | self.column(key)
        return out


@dataclass(frozen=True, eq=False)
class AlgorithmTable:
    """Executable t-round algorithm: output as a function of the ball's tapes.

    Node tables output a colour in ``[d]``. Edge tables output the side
    (0 or 1) the edge points *towards*. ``ties`` marks entries decided by
    the fallback rule on fully symmetric tapes. Tables whose index space
    fits in :data:`DENSE_BITS` bits use numpy arrays; larger ones are dicts
    over the entries actually present.
    """

    ball: CanonicalBall
    R: int
    values: Any
    ties: Any = None

    @property
    def output_kind(self) -> str:
        return "direction" if self.ball.edge_rooted else "colour"

    @property
    def bits(self) -> int:
        return self.R * self.ball.size

    @property
    def dense(self) -> bool:
        return isinstance(self.values, np.ndarray)

    def lookup(self, index: np.ndarray) -> np.ndarray:
        if self.dense:
            return self.values[index]
        try:
            return np.fromiter((self.values[int(i)] for i in index), dtype=np.int64, count=len(index))
        except KeyError as exc:
            raise PreconditionError(f"table has no entry for tape index {exc.args[0]:#x}") from None

    def tie_lookup(self, index: np.ndarray) -> np.ndarray:
        if self.ties is None:
            return np.zeros(len(index), dtype=bool)
        if isinstance(self.ties, np.ndarray):
            return self.ties[index]
        return np.fromiter((int(i) in self.ties for i in index), dtype=bool, count=len(index))

    def __call__(self, tapes: Sequence[int]) -> int:
        """Output for one assignment given per-address tapes in address order."""
        index = 0
        for x in tapes:
            index = (index << self.R) | int(x)
        return int(self.lookup(np.array([index]))[0])

    def entries(self):
        if self.dense:
            return enumerate(self.values.tolist())
        return sorted(self.values.items())

    @classmethod
    def from_function(cls, ball: CanonicalBall, R: int, fn) -> "AlgorithmTable":
        """Tabulate ``fn(tapes)`` over all assignments; ``fn`` may return ``(output, tie)``."""
        bits = R * ball.size
        values = np.zeros(1 << bits, dtype=np.int8)
        ties = np.zeros(1 << bits, dtype=bool)
        mask = (1 << R) - 1
        for index in range(1 << bits):
            tapes = [(index >> (R * (ball.size - 1 - a))) & mask for a in range(ball.size)]
            out = fn(tapes)
            if isinstance(out, tuple):
                values[index], ties[index] = out
            else:
                values[index] = out
        return cls(ball, R, values, ties if ties.any() else None)

    @classmethod
    def constant(cls, ball: CanonicalBall, R: int, value: int) -> "AlgorithmTable":
        return cls(ball, R, np.full(1 << (R * ball.size), value, dtype=np.int8))


EdgeAlgorithm = Mapping[int, AlgorithmTable]  # root colour -> edge table


@dataclass(frozen=True)
class BallEmbedding:
    source: int | tuple[int, int]
    ball: CanonicalBall
    placement: tuple[int, ...]


def _follow(graph: EdgeColouredGraph, start: int, word: Word) -> int:
    v = start
    for c in word:
        v = int(graph.port_table[v, c])
        if v < 0:
            raise PreconditionError(f"missing colour-{c} edge while walking {word} from {start}")
    return v


def required_girth(ball: CanonicalBall) -> int:
    """Girth strictly above this value is required to embed ``ball``."""
    return 2 * ball.t + 1 if ball.edge_rooted else 2 * ball.t


def check_girth(graph: EdgeColouredGraph, bound: int) -> None:
    report = graph.girth_report
    if report.girth <= bound:
        raise GirthError(f"girth {report.girth} must exceed {bound}", report.witness_cycle)


def embed(graph: EdgeColouredGraph, source: int | Sequence[int], ball: CanonicalBall) -> BallEmbedding:
    """Colour-respecting placement of ``ball`` around a node or an edge of ``graph``."""
    check_girth(graph, required_girth(ball))
    if ball.edge_rooted:
        u, v = sorted(source)
        if graph.colour_of(u, v) != ball.root_colour:
            raise PreconditionError(f"edge {(u, v)} does not have colour {ball.root_colour}")
        ends = (u, v)
        placement = tuple(_follow(graph, ends[s], w) for s, w in ball.addresses)
        src: int | tuple[int, int] = (u, v)
    else:
        placement = tuple(_follow(graph, int(source), w) for w in ball.addresses)
        src = int(source)
    if len(set(placement)) != len(placement):
        raise GirthError(f"ball around {src} does not embed injectively")
    return BallEmbedding(src, ball, placement)


def _placements(graph: EdgeColouredGraph, starts: np.ndarray, words: Sequence[Word]) -> np.ndarray:
    """Vectorised walk: result[i, a] is the node reached from starts[i] along words[a]."""
    ports = graph.port_table
    out = np.empty((len(starts), len(words)), dtype=np.int64)
    for a, w in enumerate(words):
        cur = starts.copy()
        for c in w:
            cur = ports[cur, c]
        out[:, a] = cur
    return out


def eval_table(algorithm: AlgorithmTable | EdgeAlgorithm, graph: EdgeColouredGraph,
               tape: RandomTape) -> Colouring | Orientation:
    """Run a table algorithm everywhere: a node table gives a colouring, an edge family an orientation."""
    bits = tape.as_array()
    if isinstance(algorithm, AlgorithmTable) and not algorithm.ball.edge_rooted:
        ball = algorithm.ball
        check_girth(graph, required_girth(ball))
        place = _placements(graph, np.arange(graph.n), ball.addresses)
        index = np.zeros(graph.n, dtype=np.int64)
        for a in range(ball.size):
            index = (index << tape.R) | bits[place[:, a]]
        return Colouring(tuple(int(x) for x in algorithm.lookup(index)))
    family = algorithm
    heads = {}
    ties = set()
    for c, table in family.items():
        check_girth(graph, required_girth(table.ball))
        sel = [i for i, col in enumerate(graph.colours) if col == c]
        if not sel:
            continue
        ends = np.array([graph.edges[i] for i in sel], dtype=np.int64)
        index = np.zeros(len(sel), dtype=np.int64)
        for s, w in table.ball.addresses:
            nodes = _placements(graph, ends[:, s], [w])[:, 0]
            index = (index << tape.R) | bits[nodes]
        head_side = table.lookup(index)
        tie = table.tie_lookup(index)
        for k, i in enumerate(sel):
            e = graph.edges[i]
            heads[e] = e[int(head_side[k])]
            if tie[k]:
                ties.add(e)
    missing = set(graph.edges) - set(heads)
    if missing:
        raise PreconditionError(f"no edge table for colour of edge {min(missing)}")
    return Orientation(heads, frozenset(ties))


# --- message passing ---------------------------------------------------------

@dataclass(frozen=True)
class NodeView:
    """What a node knows before round 1."""

    node: int
    ports: tuple
    tape: int
    R: int
    n: int
    delta: int
    label: Any = None


class MessageAlgorithm:
    """Synchronous LOCAL algorithm.

    Each round every node sends one message per port, receives one per port,
    then computes. ``output`` returns ``None`` until the node announces.
    """

    declared_rounds: int | None = None

    def init(self, view: NodeView) -> Any:
        raise NotImplementedError

    def send(self, state: Any, round_no: int) -> Mapping[Any, Any]:
        return {}

    def receive(self, state: Any, round_no: int, inbox: Mapping[Any, Any]) -> Any:
        return state

    def output(self, state: Any) -> Any:
        raise NotImplementedError


@dataclass
class MessageRun:
    outputs: list
    rounds_used: int
    announce_round: list[int]
    states: list = field(default_factory=list, repr=False)


def _ports(graph: EdgeColouredGraph, v: int) -> tuple:
    if graph.colours is not None:
        return tuple(range(graph.d))
    return graph.adjacency[v]


def run_message_passing(algorithm: MessageAlgorithm, graph: EdgeColouredGraph, tape: RandomTape,
                        max_rounds: int, labels: Sequence[Any] | None = None) -> MessageRun:
    """Lock-step execution; ``rounds_used`` is the round in which the last node announced.

    Ports are edge colours on coloured graphs and neighbour ids otherwise.
    """
    if max_rounds < 0:
        raise PreconditionError("max_rounds must be non-negative")
    coloured = graph.colours is not None
    states = [algorithm.init(NodeView(v, _ports(graph, v), tape.bits[v], tape.R, graph.n, graph.d,
                                      None if labels is None else labels[v]))
              for v in range(graph.n)]
    outputs: list = [None] * graph.n
    announced = [-1] * graph.n

    def collect(r: int) -> None:
        for v, st in enumerate(states):
            if announced[v] < 0:
                out = algorithm.output(st)
                if out is not None:
                    outputs[v] = out
                    announced[v] = r

    collect(0)
    r = 0
    while min(announced, default=0) < 0:
        if r == max_rounds:
            raise RoundBudgetExceeded(r, MessageRun(outputs, r, announced, states))
        r += 1
        inboxes: list[dict] = [dict() for _ in range(graph.n)]
        for v, st in enumerate(states):
            for port, msg in algorithm.send(st, r).items():
                w = graph.neighbour(v, port) if coloured else port
                inboxes[w][port if coloured else v] = msg
        states = [algorithm.receive(st, r, inboxes[v]) for v, st in enumerate(states)]
        collect(r)
    return MessageRun(outputs, max(announced, default=0), announced, states)


class GatherAlgorithm(MessageAlgorithm):
    """Gather the radius-``t`` ball for ``t`` rounds, then apply a table.

    Knowledge is a map from reduced word (relative to the node) to
    ``(node id, tape)``. For an edge family the output is a map
    ``colour -> head node id``; node ids are learned in round 1, so edge
    families need at least one round.
    """

    def __init__(self, algorithm: AlgorithmTable | EdgeAlgorithm):
        self.algorithm = algorithm
        if isinstance(algorithm, AlgorithmTable):
            if algorithm.ball.edge_rooted:
                raise PreconditionError("pass edge tables as a colour -> table mapping")
            self.node_table = algorithm
            self.t = algorithm.ball.t
        else:
            self.node_table = None
            self.t = max(max(tb.ball.t for tb in algorithm.values()), 1)
        self.declared_rounds = self.t

    def init(self, view: NodeView):
        return {"id": view.node, "round": 0, "know": {(): (view.node, view.tape)}, "R": view.R}

    def send(self, state, round_no):
        return {c: state["know"] for c in range(self._d(state))}

    def _d(self, state):
        if self.node_table is not None:
            return self.node_table.ball.d
        return next(iter(self.algorithm.values())).ball.d

    def receive(self, state, round_no, inbox):
        know = dict(state["know"])
        for c, theirs in sorted(inbox.items()):
            for w, val in theirs.items():
                know.setdefault(extend((c,), w), val)
        return {**state, "round": round_no, "know": know}

    def output(self, state):
        if state["round"] < self.t:
            return None
        know = state["know"]
        if self.node_table is not None:
            return self.node_table([know[a][1] for a in self.node_table.ball.addresses])
        me = state["id"]
        heads = {}
        for c, table in self.algorithm.items():
            other = know[(c,)][0]
            mine_is_side0 = me < other
            tapes = []
            for s, w in table.ball.addresses:
                prefix = () if (s == 0) == mine_is_side0 else (c,)
                tapes.append(know[extend(prefix, w)][1])
            side = table(tapes)
            ends = (me, other) if mine_is_side0 else (other, me)
            heads[c] = ends[side]
        return heads


# --- text formats ----------------------------------------------------------

def format_table(table: AlgorithmTable, comments: Sequence[str] = ()) -> str:
    """Header ``d t root_kind [root_colour] output_kind R``, then ``tape_hex output [tie]``."""
    ball = table.ball
    head = [ball.d, ball.t, "edge" if ball.edge_rooted else "node"]
    if ball.edge_rooted:
        head.append(ball.root_colour)
    head += [table.output_kind, table.R]
    width = max(1, math.ceil(table.bits / 4))
    lines = [f"# {c}" for c in comments]
    lines.append(" ".join(map(str, head)))
    if isinstance(table.ties, np.ndarray):
        tie_set = set(np.flatnonzero(table.ties).tolist())
    else:
        tie_set = set(table.ties or ())
    for index, out in table.entries():
        suffix = " tie" if index in tie_set else ""
        lines.append(f"{index:0{width}x} {out}{suffix}")
    return "\n".join(lines) + "\n"


def parse_table(text: str, source: str = "<table>") -> AlgorithmTable:
    header = None
    entries: dict[int, int] = {}
    ties: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            header = _parse_table_header(parts, source, lineno)
            continue
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "tie"):
            raise FormatError(source, lineno, "entry must be 'tape_hex output [tie]'")
        try:
            index, out = int(parts[0], 16), int(parts[1])
        except ValueError:
            raise FormatError(source, lineno, "malformed entry") from None
        ball, R = header
        if index >= 1 << (R * ball.size):
            raise FormatError(source, lineno, "tape index outside table domain")
        limit = 2 if ball.edge_rooted else ball.d
        if not 0 <= out < limit:
            raise FormatError(source, lineno, f"output {out} outside [0, {limit})")
        if index in entries:
            raise FormatError(source, lineno, "duplicate entry")
        entries[index] = out
        if len(parts) == 3:
            ties.add(index)
    if header is None:
        raise FormatError(source, 0, "missing header")
    ball, R = header
    bits = R * ball.size
    if bits <= DENSE_BITS and len(entries) == 1 << bits:
        values = np.zeros(1 << bits, dtype=np.int8)
        for i, out in entries.items():
            values[i] = out
        tie_arr = None
        if ties:
            tie_arr = np.zeros(1 << bits, dtype=bool)
            tie_arr[list(ties)] = True
        return AlgorithmTable(ball, R, values, tie_arr)
    return AlgorithmTable(ball, R, entries, frozenset(ties) or None)


def _parse_table_header(parts, source, lineno):
    try:
        d, t = int(parts[0]), int(parts[1])
        kind = parts[2]
        if kind == "node":
            if len(parts) != 5 or parts[3] != "colour":
                raise ValueError
            return CanonicalBall(d, t), int(parts[4])
        if kind == "edge":
            if len(parts) != 6 or parts[4] != "direction":
                raise ValueError
            return CanonicalBall(d, t, int(parts[3])), int(parts[5])
        raise ValueError
    except (ValueError, IndexError):
        raise FormatError(source, lineno,
                          "header must be 'd t node colour R' or 'd t edge c direction R'") from None


def format_tape(tape: RandomTape, comments: Sequence[str] = ()) -> str:
    width = max(1, math.ceil(tape.R / 4))
    lines = [f"# {c}" for c in comments]
    lines.append(f"{len(tape)} {tape.R}")
    lines += [f"{x:0{width}x}" for x in tape.bits]
    return "\n".join(lines) + "\n"


def parse_tape(text: str, source: str = "<tape>") -> RandomTape:
    header = None
    bits = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            try:
                header = tuple(int(x) for x in line.split())
                n, R = header
            except ValueError:
                raise FormatError(source, lineno, "header must be 'n R'") from None
            continue
        try:
            x = int(line, 16)
        except ValueError:
            raise FormatError(source, lineno, "expected a hex tape") from None
        if x >= 1 << header[1]:
            raise FormatError(source, lineno, "tape wider than R bits")
        bits.append(x)
    if header is None:
        raise FormatError(source, 0, "missing header")
    if len(bits) != header[0]:
        raise FormatError(source, 0, f"expected {header[0]} tapes, found {len(bits)}")
    return RandomTape(header[1], tuple(bits))
