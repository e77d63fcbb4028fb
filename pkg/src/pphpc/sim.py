"""The PPHPC predator-prey model on a toroidal grid.

The hot loops are numba kernels operating on flat numpy arrays; :class:`World`
wraps them so each schedule phase can also be driven and inspected from
Python.

RNG consumption order (single xoshiro256** stream per replication):

* init: every cell countdown in row-major ``(x, y)`` order, then for each
  prey ``x, y, energy``, then for each predator ``x, y, energy``;
* move: one direction draw per agent, in storage order;
* act: the Fisher-Yates shuffle of the agents alive at phase start, then
  per visited agent the prey pick (predators on a cell with prey) followed by
  the reproduction draw (only when energy exceeds the threshold).
"""

from __future__ import annotations

import enum
from dataclasses import astuple, dataclass, fields

import numba
import numpy as np

from pphpc.rng import randbelow, seed_state

PREY = 0
PREDATOR = 1

# per-iteration event log columns
EV_BIRTH_PREY = 0
EV_BIRTH_PRED = 1
EV_STARVE_PREY = 2
EV_STARVE_PRED = 3
EV_EATEN_PREY = 4
N_EVENTS = 5

COLUMNS = (
    "total_prey",
    "total_predators",
    "total_food",
    "mean_energy_prey",
    "mean_energy_predators",
    "mean_c",
)


class ParamError(ValueError):
    """Invalid simulation parameter; ``field`` names the offender."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class AgentKind(enum.IntEnum):
    PREY = PREY
    PREDATOR = PREDATOR


@dataclass(frozen=True)
class SimParams:
    """The 14 integer model parameters, in the canonical argument order."""

    grid_x: int
    grid_y: int
    init_prey: int
    init_predators: int
    iterations: int
    prey_gain: int
    predator_gain: int
    prey_loss: int
    predator_loss: int
    prey_repro_threshold: int
    predator_repro_threshold: int
    prey_repro_prob: int
    predator_repro_prob: int
    cell_food_restart: int

    def __post_init__(self):
        lower = {
            "grid_x": 1, "grid_y": 1, "init_prey": 0, "init_predators": 0,
            "iterations": 0, "prey_gain": 0, "predator_gain": 0,
            "prey_loss": 1, "predator_loss": 1, "prey_repro_threshold": 1,
            "predator_repro_threshold": 1, "prey_repro_prob": 0,
            "predator_repro_prob": 0, "cell_food_restart": 1,
        }
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ParamError(f.name, f"expected an integer, got {value!r}")
            if value < lower[f.name]:
                raise ParamError(f.name, f"must be >= {lower[f.name]}, got {value}")
        for name in ("prey_repro_prob", "predator_repro_prob"):
            if getattr(self, name) > 100:
                raise ParamError(name, f"percent must be <= 100, got {getattr(self, name)}")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_sequence(cls, values) -> SimParams:
        values = list(values)
        if len(values) != 14:
            raise ValueError(f"expected 14 parameters, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[int, ...]:
        return astuple(self)

    def replace(self, **changes) -> SimParams:
        return SimParams(**{**dict(zip(self.field_names(), self.as_tuple())), **changes})

    def _array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.int64)


# indices into SimParams._array()
_GX, _GY, _NPREY, _NPRED, _ITERS = 0, 1, 2, 3, 4
_GAIN, _LOSS, _THRESH, _PROB = 5, 7, 9, 11  # + kind offset
_CR = 13


@dataclass
class Agent:
    kind: AgentKind
    energy: int
    cell: tuple[int, int]


# --- kernels -----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _init_kernel(p, rng, cap):
    gx, gy = p[_GX], p[_GY]
    cells = np.empty(gx * gy, dtype=np.int64)
    for c in range(gx * gy):
        cells[c] = randbelow(rng, p[_CR] + 1)
    n = p[_NPREY] + p[_NPRED]
    kind = np.empty(cap, dtype=np.int8)
    energy = np.zeros(cap, dtype=np.int64)
    ax = np.empty(cap, dtype=np.int64)
    ay = np.empty(cap, dtype=np.int64)
    for i in range(n):
        k = PREY if i < p[_NPREY] else PREDATOR
        kind[i] = k
        ax[i] = randbelow(rng, gx)
        ay[i] = randbelow(rng, gy)
        emax = max(1, 2 * p[_GAIN + k])
        energy[i] = 1 + randbelow(rng, emax)
    return cells, kind, energy, ax, ay, n


@numba.njit(cache=True, nogil=True)
def _compact(kind, energy, ax, ay, n):
    """Drop agents with energy <= 0, keeping the survivors' order."""
    j = 0
    for i in range(n):
        if energy[i] > 0:
            if j != i:
                kind[j] = kind[i]
                energy[j] = energy[i]
                ax[j] = ax[i]
                ay[j] = ay[i]
            j += 1
    return j


@numba.njit(cache=True, nogil=True)
def _move_kernel(p, kind, energy, ax, ay, n, rng, events):
    gx, gy = p[_GX], p[_GY]
    for i in range(n):
        d = randbelow(rng, 4)
        if d == 0:
            ax[i] = (ax[i] - 1) % gx
        elif d == 1:
            ax[i] = (ax[i] + 1) % gx
        elif d == 2:
            ay[i] = (ay[i] - 1) % gy
        else:
            ay[i] = (ay[i] + 1) % gy
        k = kind[i]
        energy[i] -= p[_LOSS + k]
        if energy[i] <= 0:
            events[EV_STARVE_PREY + k] += 1
    return _compact(kind, energy, ax, ay, n)


@numba.njit(cache=True, nogil=True)
def _grow_kernel(cells):
    for c in range(cells.size):
        if cells[c] > 0:
            cells[c] -= 1


@numba.njit(cache=True, nogil=True)
def _act_kernel(p, cells, kind, energy, ax, ay, n, rng, events):
    """Feed-then-reproduce for every agent alive at phase start.

    Requires ``kind.size >= 2 * n``: each acting agent spawns at most one child.
    Eaten prey are marked with energy 0 and compacted out at the end.
    """
    gy = p[_GY]
    cap = kind.size
    head = np.full(cells.size, -1, dtype=np.int64)
    nxt = np.empty(cap, dtype=np.int64)
    for i in range(n):
        if kind[i] == PREY:
            c = ax[i] * gy + ay[i]
            nxt[i] = head[c]
            head[c] = i

    order = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = randbelow(rng, i + 1)
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp

    total = n
    for t in range(n):
        a = order[t]
        if energy[a] <= 0:
            continue  # eaten earlier in this phase
        k = kind[a]
        c = ax[a] * gy + ay[a]
        if k == PREY:
            if cells[c] == 0:
                energy[a] += p[_GAIN]
                cells[c] = p[_CR]
        else:
            live = 0
            q = head[c]
            while q >= 0:
                if energy[q] > 0:
                    live += 1
                q = nxt[q]
            if live > 0:
                pick = randbelow(rng, live)
                q = head[c]
                while True:
                    if energy[q] > 0:
                        if pick == 0:
                            break
                        pick -= 1
                    q = nxt[q]
                energy[q] = 0
                events[EV_EATEN_PREY] += 1
                energy[a] += p[_GAIN + PREDATOR]
        if energy[a] > p[_THRESH + k]:
            if randbelow(rng, 100) < p[_PROB + k]:
                child = energy[a] // 2
                energy[a] -= child
                kind[total] = k
                energy[total] = child
                ax[total] = ax[a]
                ay[total] = ay[a]
                if k == PREY:
                    nxt[total] = head[c]
                    head[c] = total
                events[EV_BIRTH_PREY + k] += 1
                total += 1
    return _compact(kind, energy, ax, ay, total)


@numba.njit(cache=True, nogil=True)
def _collect_kernel(cells, kind, energy, n, out):
    cnt0 = 0
    cnt1 = 0
    e0 = 0
    e1 = 0
    for i in range(n):
        if kind[i] == PREY:
            cnt0 += 1
            e0 += energy[i]
        else:
            cnt1 += 1
            e1 += energy[i]
    food = 0
    csum = 0
    for c in range(cells.size):
        if cells[c] == 0:
            food += 1
        csum += cells[c]
    out[0] = cnt0
    out[1] = cnt1
    out[2] = food
    out[3] = e0 / cnt0 if cnt0 > 0 else 0.0
    out[4] = e1 / cnt1 if cnt1 > 0 else 0.0
    out[5] = csum / cells.size


@numba.njit(cache=True, nogil=True)
def _grow_storage(arr, cap):
    new = np.zeros(cap, dtype=arr.dtype)
    new[: arr.size] = arr
    return new


@numba.njit(cache=True, nogil=True)
def _run_kernel(p, rng):
    iters = p[_ITERS]
    cap = max(16, 2 * (p[_NPREY] + p[_NPRED]))
    cells, kind, energy, ax, ay, n = _init_kernel(p, rng, cap)
    out = np.empty((iters + 1, 6), dtype=np.float64)
    events = np.zeros((iters, N_EVENTS), dtype=np.int64)
    _collect_kernel(cells, kind, energy, n, out[0])
    for t in range(iters):
        n = _move_kernel(p, kind, energy, ax, ay, n, rng, events[t])
        _grow_kernel(cells)
        if 2 * n > kind.size:
            cap = 4 * n
            kind = _grow_storage(kind, cap)
            energy = _grow_storage(energy, cap)
            ax = _grow_storage(ax, cap)
            ay = _grow_storage(ay, cap)
        n = _act_kernel(p, cells, kind, energy, ax, ay, n, rng, events[t])
        _collect_kernel(cells, kind, energy, n, out[t + 1])
    return out, events


# --- Python surface ----------------------------------------------------------

@dataclass
class SimOutput:
    """Per-iteration outputs; ``data[t]`` holds the six columns at iteration t.

    Row 0 is the state right after initialization.
    """

    data: np.ndarray
    events: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != 6:
            raise ValueError(f"expected an (n, 6) array, got shape {self.data.shape}")

    def __len__(self):
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SimOutput):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    @property
    def total_prey(self):
        return self.data[:, 0]

    @property
    def total_predators(self):
        return self.data[:, 1]

    @property
    def total_food(self):
        return self.data[:, 2]

    @property
    def mean_energy_prey(self):
        return self.data[:, 3]

    @property
    def mean_energy_predators(self):
        return self.data[:, 4]

    @property
    def mean_c(self):
        return self.data[:, 5]


class World:
    """Mutable model state: cell countdowns, agents, RNG and iteration."""

    def __init__(self, params: SimParams, seed: int):
        self.params = params
        self._p = params._array()
        self.rng = seed_state(seed)
        cap = max(16, 2 * (params.init_prey + params.init_predators))
        cells, self.kind, self.energy, self.ax, self.ay, self.n = _init_kernel(
            self._p, self.rng, cap
        )
        self.cells = cells.reshape(params.grid_x, params.grid_y)
        self.iteration = 0
        self.events = np.zeros(N_EVENTS, dtype=np.int64)

    @property
    def agents(self) -> list[Agent]:
        return [
            Agent(AgentKind(int(self.kind[i])), int(self.energy[i]),
                  (int(self.ax[i]), int(self.ay[i])))
            for i in range(self.n)
        ]

    def count(self, kind: AgentKind) -> int:
        return int(np.count_nonzero(self.kind[: self.n] == kind))

    def add_agent(self, kind: AgentKind, energy: int, cell: tuple[int, int]) -> None:
        """Append an agent (test/scenario setup helper)."""
        self._reserve(self.n + 1)
        i = self.n
        self.kind[i] = kind
        self.energy[i] = energy
        self.ax[i], self.ay[i] = cell
        self.n += 1

    def clear_agents(self) -> None:
        self.n = 0

    def _reserve(self, cap: int) -> None:
        if cap <= self.kind.size:
            return
        cap = max(cap, 2 * self.kind.size)
        self.kind = _grow_storage(self.kind, cap)
        self.energy = _grow_storage(self.energy, cap)
        self.ax = _grow_storage(self.ax, cap)
        self.ay = _grow_storage(self.ay, cap)

    def move_phase(self) -> None:
        self.n = _move_kernel(
            self._p, self.kind, self.energy, self.ax, self.ay, self.n, self.rng, self.events
        )

    def grow_food_phase(self) -> None:
        _grow_kernel(self.cells.reshape(-1))

    def act_phase(self) -> None:
        self._reserve(2 * self.n)
        self.n = _act_kernel(
            self._p, self.cells.reshape(-1), self.kind, self.energy, self.ax, self.ay,
            self.n, self.rng, self.events,
        )

    def collect_outputs(self) -> np.ndarray:
        out = np.empty(6, dtype=np.float64)
        _collect_kernel(self.cells.reshape(-1), self.kind, self.energy, self.n, out)
        return out

    def step(self) -> np.ndarray:
        self.move_phase()
        self.grow_food_phase()
        self.act_phase()
        self.iteration += 1
        return self.collect_outputs()


def init_world(params: SimParams, seed: int) -> World:
    return World(params, seed)


def run_simulation(params: SimParams, seed: int) -> SimOutput:
    """Run one replication; returns ``iterations + 1`` output rows."""
    out, events = _run_kernel(params._array(), seed_state(seed))
    return SimOutput(out, events)
