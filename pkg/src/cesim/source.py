"""Poisson pair source with randomized detunings and stochastic routing.

Generated events are the ground truth of the stochastic pipeline: each one
records the detuning drawn for the pair, the branch orientation, the
first-splitter routing of both photons and the pre-analyzer splitter port
each photon would exit.  Emission times live on an integer picosecond grid
so the serialized stream is exact.

Determinism contract: a fixed seed yields a bit-identical batch.  The
random draws happen in a fixed order (emission times, detunings,
orientations, route 1, route 2, port 1, port 2) from a single generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .interferometer import Orientation
from .optics import Path, Pol, Port


def poisson_pair_probability(mu: float) -> float:
    """Probability that an emission window holds exactly two photons."""
    if not math.isfinite(mu) or mu < 0:
        raise ValueError("mean photon number must be non-negative")
    return math.exp(-mu) * mu * mu / 2.0


def multi_pair_error_ratio(mu: float) -> float:
    """P(n >= 3) / P(n = 2), the relative weight of higher bunches.

    Small values justify treating two-photon windows as the only
    coincidence-relevant events.  The tail is summed term by term; the
    complementary closed form cancels catastrophically for small mu.
    """
    if not math.isfinite(mu) or mu <= 0:
        raise ValueError("mean photon number must be positive")
    tail = 0.0
    term = math.exp(-mu) * mu**3 / 6.0  # P(n = 3)
    k = 3
    while term > tail * 1e-18 or k == 3:
        tail += term
        k += 1
        term *= mu / k
        if k > 10_000:
            break
    return tail / poisson_pair_probability(mu)


class GridMode(Enum):
    GRID = "grid"
    UNIFORM = "uniform"


@dataclass(frozen=True, slots=True)
class DetuningGrid:
    """Detuning law: uniform over a discrete grid or a continuous interval."""

    mode: GridMode
    lo: float
    hi: float
    step: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError("detuning bounds must be finite with lo <= hi")
        if self.mode is GridMode.GRID:
            if self.step is None or not math.isfinite(self.step) or self.step <= 0:
                raise ValueError("grid mode needs a positive step")
            n = (self.hi - self.lo) / self.step
            if abs(n - round(n)) > 1e-9:
                raise ValueError("grid span must be an integer number of steps")

    @classmethod
    def default_grid(cls, delta_big: float) -> "DetuningGrid":
        """21 points spanning -2*delta_big .. +2*delta_big in steps of delta_big/5."""
        return cls(GridMode.GRID, -2.0 * delta_big, 2.0 * delta_big, delta_big / 5.0)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DetuningGrid":
        return cls(GridMode.UNIFORM, lo, hi)

    def values(self) -> np.ndarray:
        if self.mode is not GridMode.GRID:
            raise ValueError("only grid mode has discrete values")
        n = int(round((self.hi - self.lo) / self.step)) + 1
        return self.lo + self.step * np.arange(n)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.mode is GridMode.GRID:
            values = self.values()
            return values[rng.integers(0, len(values), n)]
        return rng.uniform(self.lo, self.hi, n)


@dataclass(frozen=True, slots=True)
class SourceConfig:
    mu: float = 0.1
    rate: float = 1.0e6
    duration: float = 1.0
    delta_big: float = 1.0e6
    grid: DetuningGrid | None = None
    seed: int = 0
    laser_linewidth: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu <= 0:
            raise ValueError("mu must be positive")
        if not math.isfinite(self.rate) or self.rate <= 0:
            raise ValueError("rate must be positive")
        if not math.isfinite(self.duration) or self.duration <= 0:
            raise ValueError("duration must be positive")
        if not math.isfinite(self.delta_big) or self.delta_big <= 0:
            raise ValueError("delta_big must be positive")
        if self.laser_linewidth < 0 or not math.isfinite(self.laser_linewidth):
            raise ValueError("laser linewidth must be finite and non-negative")
        if self.laser_linewidth >= 0.1 * self.delta_big:
            warnings.warn(
                "laser linewidth is not small against the modulation bandwidth; "
                "the frequency-path correlation degrades",
                stacklevel=2,
            )

    @property
    def effective_grid(self) -> DetuningGrid:
        return self.grid if self.grid is not None else DetuningGrid.default_grid(self.delta_big)

    @property
    def pair_rate(self) -> float:
        """Two-photon emission rate: attempts thinned by the window statistics."""
        return self.rate * poisson_pair_probability(self.mu)


class PairClass(Enum):
    SAME_PATH = "same-path"
    CROSS_PATH = "cross-path"


@dataclass(frozen=True, slots=True)
class PairEvent:
    """One generated photon pair with its ground-truth routing."""

    pair_id: int
    delta_f: float
    orientation: Orientation
    route1: Path
    route2: Path
    port1: Port
    port2: Port
    t_emit_ps: int

    @property
    def cross_path(self) -> bool:
        return self.route1 is not self.route2

    @property
    def pair_class(self) -> PairClass:
        return PairClass.CROSS_PATH if self.cross_path else PairClass.SAME_PATH

    @property
    def shared_path(self) -> Path | None:
        return None if self.cross_path else self.route1

    @property
    def t_emit(self) -> float:
        return self.t_emit_ps * 1e-12


_PATHS = (Path.PATH1, Path.PATH2)
_PORTS = (Port.A, Port.B)


@dataclass(slots=True)
class PairBatch:
    """Column-wise batch of pair events (numpy arrays, one row per pair)."""

    pair_id: np.ndarray       # uint32
    delta_f: np.ndarray       # float64, signed sample from the detuning law
    orientation_sign: np.ndarray  # int8, +1 if arm 1 carries the positive branch
    route1: np.ndarray        # uint8, 1 or 2
    route2: np.ndarray        # uint8
    port1: np.ndarray         # uint8, 0 = port A, 1 = port B
    port2: np.ndarray         # uint8
    t_emit_ps: np.ndarray     # uint64

    def __len__(self) -> int:
        return len(self.pair_id)

    @property
    def cross_mask(self) -> np.ndarray:
        return self.route1 != self.route2

    def event(self, i: int) -> PairEvent:
        return PairEvent(
            pair_id=int(self.pair_id[i]),
            delta_f=float(self.delta_f[i]),
            orientation=Orientation.PLUS_MINUS if self.orientation_sign[i] > 0 else Orientation.MINUS_PLUS,
            route1=_PATHS[int(self.route1[i]) - 1],
            route2=_PATHS[int(self.route2[i]) - 1],
            port1=_PORTS[int(self.port1[i])],
            port2=_PORTS[int(self.port2[i])],
            t_emit_ps=int(self.t_emit_ps[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self.event(i)


def pol_at(path: Path, port: Port) -> Pol:
    """Polarization a photon from ``path`` carries into ``port``'s analyzer."""
    return Pol.V if (path is Path.PATH1) == (port is Port.A) else Pol.H


def _draw_fields(rng: np.random.Generator, cfg: SourceConfig, t_emit_s: np.ndarray) -> PairBatch:
    n = len(t_emit_s)
    delta_f = cfg.effective_grid.sample(rng, n)
    orientation = (rng.integers(0, 2, n, dtype=np.int8) * 2 - 1).astype(np.int8)
    route1 = rng.integers(1, 3, n, dtype=np.uint8)
    route2 = rng.integers(1, 3, n, dtype=np.uint8)
    port1 = rng.integers(0, 2, n, dtype=np.uint8)
    port2 = rng.integers(0, 2, n, dtype=np.uint8)
    return PairBatch(
        pair_id=np.arange(n, dtype=np.uint32),
        delta_f=delta_f,
        orientation_sign=orientation,
        route1=route1,
        route2=route2,
        port1=port1,
        port2=port2,
        t_emit_ps=np.rint(t_emit_s * 1e12).astype(np.uint64),
    )


def sample_pairs(cfg: SourceConfig) -> PairBatch:
    """All pair events inside ``cfg.duration`` seconds.

    The pair count is Poisson with mean pair_rate * duration and the
    emission times are uniform over the window, which realizes a Poisson
    process at the thinned rate.
    """
    rng = np.random.default_rng(cfg.seed)
    n = int(rng.poisson(cfg.pair_rate * cfg.duration))
    t_emit = np.sort(rng.uniform(0.0, cfg.duration, n))
    return _draw_fields(rng, cfg, t_emit)


def sample_n_pairs(cfg: SourceConfig, n: int) -> PairBatch:
    """Exactly ``n`` pair events with exponential inter-emission times."""
    if n < 0:
        raise ValueError("pair count must be non-negative")
    rng = np.random.default_rng(cfg.seed)
    gaps = rng.exponential(1.0 / cfg.pair_rate, n)
    t_emit = np.cumsum(gaps)
    return _draw_fields(rng, cfg, t_emit)
