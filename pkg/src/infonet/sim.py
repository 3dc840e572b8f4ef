"""Greedy mutual-information episodes and dataset files.

The agent lives on cell centers and moves one cell per step (8 neighbours
or stay, clamped at the field edge).  With the FOV sensor it also picks any
heading bin.  Each step: act greedily, measure the true target, update the
belief, then compute the exact map and its coefficients for the posterior.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, pose_at, uniform_belief
from .histfilter import update
from .infomap import fisher_map, mi_map, mi_states, normalize_map
from .io import FormatError, read_container, write_container
from .sensors import LikelihoodTable, build_table, make_sensor, sample, sensor_from_dict
from .spectral import DEFAULT_K, SpectralBasis, decompose

log = logging.getLogger(__name__)

DATASET_VERSION = 1
STREAM_TRAIN = 0
STREAM_EVAL = 1

# stay first so that ties (e.g. an all-zero objective) resolve to not moving
MOVES = ((0, 0), (-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class AgentState:
    i: int
    j: int
    h: int = 0

    def pose(self, grid: GridSpec, with_heading: bool):
        return pose_at(grid, (self.i, self.j), self.h if with_heading else None)


@dataclass(frozen=True)
class ActionSet:
    """Index ``a`` means move ``a // headings`` and heading bin ``a % headings``."""

    headings: int = 1
    moves: tuple = MOVES

    def __len__(self):
        return len(self.moves) * self.headings

    def successor(self, grid: GridSpec, state: AgentState, a: int) -> AgentState:
        if not 0 <= a < len(self):
            raise IndexError(f"action {a} out of range")
        di, dj = self.moves[a // self.headings]
        i = min(max(state.i + di, 0), grid.n - 1)
        j = min(max(state.j + dj, 0), grid.n - 1)
        h = a % self.headings if self.headings > 1 else state.h
        return AgentState(i, j, h)


def action_set(sensor, grid: GridSpec) -> ActionSet:
    return ActionSet(grid.heading_bins if sensor.uses_heading else 1)


def state_index(table: LikelihoodTable, state: AgentState) -> int:
    return table.state_index((state.i, state.j), state.h if table.modality == "fov" else None)


def greedy_action(b, sensor, state: AgentState, actions: ActionSet, grid: GridSpec,
                  table: LikelihoodTable) -> int:
    """Action whose successor state has the largest mutual information.

    Ties go to the lowest action index.
    """
    if len(actions) == 0:
        raise ValueError("empty action set")
    succ = [actions.successor(grid, state, a) for a in range(len(actions))]
    values = mi_states(b, table, [state_index(table, s) for s in succ])
    return int(np.argmax(values))


@dataclass
class EpisodeConfig:
    steps: int = 20
    modality: str = "bearing"
    metric: str = "mutual"
    seed: int = 0
    start: tuple | None = None
    start_heading: int = 0
    K: int | None = None
    sigma: float = 10.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.modality not in ("bearing", "fov"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.metric not in ("mutual", "fisher"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "fisher" and self.modality != "bearing":
            raise ValueError("Fisher maps are defined for the bearing sensor only")
        if self.K is None:
            self.K = DEFAULT_K[self.modality]

    def start_state(self, grid: GridSpec) -> AgentState:
        i, j = self.start if self.start is not None else (grid.n // 2, grid.n // 2)
        return AgentState(i, j, self.start_heading)


@dataclass
class Sample:
    belief: np.ndarray
    map: np.ndarray
    coeffs: np.ndarray
    step: int
    episode: int


@dataclass
class EpisodeResult:
    samples: list[Sample]
    target: tuple
    states: list[AgentState]
    measurements: list = field(default_factory=list)
    beliefs: list[np.ndarray] = field(default_factory=list)
    maps: list[np.ndarray] = field(default_factory=list)


class Simulator:
    """Bundles the grid, sensor, likelihood table, and basis for an episode config."""

    def __init__(self, config: EpisodeConfig, grid: GridSpec | None = None, table: LikelihoodTable | None = None):
        self.config = config
        self.grid = grid or GridSpec()
        self.sensor = make_sensor(config.modality, config.sigma)
        self.table = table if table is not None else build_table(self.sensor, self.grid)
        if not self.table.matches(self.sensor, self.grid):
            raise ValueError("likelihood table does not match the episode's sensor/grid")
        self.basis = SpectralBasis(self.grid, config.K, config.modality)
        self.actions = action_set(self.sensor, self.grid)

    def exact_map(self, b) -> np.ndarray:
        if self.config.metric == "fisher":
            raw = fisher_map(b, self.grid, self.config.sigma)
        else:
            raw = mi_map(b, self.table)
        return normalize_map(raw).values

    def random_target(self, rng: np.random.Generator, start: AgentState) -> tuple:
        n = self.grid.n
        k = int(rng.integers(n * n - 1))
        if k >= start.i * n + start.j:
            k += 1
        return divmod(k, n)

    def run_episode(self, rng: np.random.Generator, episode_id: int = 0, target=None) -> EpisodeResult:
        cfg, grid, sensor = self.config, self.grid, self.sensor
        state = cfg.start_state(grid)
        if target is None:
            target = self.random_target(rng, state)
        b = uniform_belief(grid)
        res = EpisodeResult([], tuple(target), [state])
        for step in range(cfg.steps):
            a = greedy_action(b, sensor, state, self.actions, grid, self.table)
            state = self.actions.successor(grid, state, a)
            pose = state.pose(grid, sensor.uses_heading)
            z = sample(sensor, pose, target, grid, rng)
            b = update(b, sensor, pose, z, grid, self.table, state_index(self.table, state))
            m = self.exact_map(b)
            c = decompose(m, self.basis).values
            res.states.append(state)
            res.measurements.append(z)
            res.beliefs.append(b)
            res.maps.append(m)
            res.samples.append(Sample(b.astype(np.float32), m.astype(np.float32),
                                      c.astype(np.float32), step, episode_id))
        return res


def run_episode(config: EpisodeConfig, sensor, grid: GridSpec, rng: np.random.Generator,
                table: LikelihoodTable | None = None, episode_id: int = 0) -> EpisodeResult:
    sim = Simulator(config, grid, table)
    if sim.sensor != sensor:
        raise ValueError("sensor does not match the episode config")
    return sim.run_episode(rng, episode_id)


def episode_rngs(seed: int, count: int, stream: int = STREAM_TRAIN) -> list[np.random.Generator]:
    """Independent per-episode generators; training and evaluation use disjoint streams."""
    seqs = np.random.SeedSequence([seed, stream]).spawn(count)
    return [np.random.default_rng(s) for s in seqs]


@dataclass
class Dataset:
    manifest: dict
    beliefs: np.ndarray
    maps: np.ndarray
    coeffs: np.ndarray
    steps: np.ndarray
    episodes: np.ndarray

    def __len__(self):
        return len(self.beliefs)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(**self.manifest["grid"])

    @property
    def modality(self) -> str:
        return self.manifest["modality"]


def generate_dataset(num_episodes: int, config: EpisodeConfig, path=None, grid: GridSpec | None = None,
                     stream: int = STREAM_TRAIN) -> Dataset:
    """Run ``num_episodes`` seeded episodes and optionally write them to ``path``."""
    if num_episodes < 1:
        raise ValueError("need at least one episode")
    sim = Simulator(config, grid)
    samples, targets = [], []
    for e, rng in enumerate(episode_rngs(config.seed, num_episodes, stream)):
        res = sim.run_episode(rng, e)
        samples += res.samples
        targets.append(list(res.target))
        log.info("episode %d/%d done", e + 1, num_episodes)
    manifest = {
        "kind": "dataset",
        "format_version": DATASET_VERSION,
        "grid": sim.grid.to_dict(),
        "sensor": sim.sensor.to_dict(),
        "modality": config.modality,
        "metric": config.metric,
        "K": config.K,
        "ordering": 1,
        "steps": config.steps,
        "episodes": num_episodes,
        "num_samples": len(samples),
        "seed": config.seed,
        "stream": stream,
        "targets": targets,
    }
    ds = Dataset(
        manifest,
        np.stack([s.belief for s in samples]),
        np.stack([s.map for s in samples]),
        np.stack([s.coeffs for s in samples]),
        np.array([s.step for s in samples], dtype=np.int32),
        np.array([s.episode for s in samples], dtype=np.int32),
    )
    if path is not None:
        save_dataset(ds, path)
    return ds


def save_dataset(ds: Dataset, path) -> None:
    try:
        write_container(path, ds.manifest, {
            "beliefs": ds.beliefs, "maps": ds.maps, "coeffs": ds.coeffs,
            "steps": ds.steps, "episodes": ds.episodes,
        })
    except OSError as exc:
        raise OSError(f"could not write dataset to {path}: {exc}") from exc


def load_dataset(path) -> Dataset:
    manifest, arrays = read_container(path)
    if manifest.get("kind") != "dataset":
        raise FormatError(f"{path}: not a dataset file")
    if manifest.get("format_version") != DATASET_VERSION:
        raise FormatError(f"{path}: dataset version {manifest.get('format_version')} not supported")
    return Dataset(manifest, arrays["beliefs"], arrays["maps"], arrays["coeffs"],
                   arrays["steps"], arrays["episodes"])


def sensor_of(ds: Dataset):
    return sensor_from_dict(ds.manifest["sensor"])
