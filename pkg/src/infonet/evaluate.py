"""Map quality (KL divergences), timing benchmarks, and map rendering."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .grid import GridSpec
from .infomap import fisher_map, mi_map, normalize_map
from .neural.nets import build_coeff_net, build_map_net
from .sim import STREAM_EVAL, EpisodeConfig, Simulator, episode_rngs
from .spectral import CLAMP_FLOOR, DEFAULT_K, SpectralBasis, decompose, reconstruct

NORM_TOL = 1e-6


def kl_divergence(P, Q) -> float:
    """D(P || Q) in nats.  Q is floored at 1e-12 and renormalized first.

    Identical inputs give exactly 0; otherwise a clamped reconstruction
    (whose minimum sits just under the floor after renormalizing) would be
    nudged by the floor and score a rounding-level divergence against itself.
    """
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Q.shape}")
    for name, a in (("P", P), ("Q", Q)):
        if not np.all(np.isfinite(a)) or a.min() < 0 or abs(a.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"{name} is not a normalized distribution (sum={a.sum():.9g})")
    if np.array_equal(P, Q):
        return 0.0
    if Q.min() < CLAMP_FLOOR:
        Q = np.maximum(Q, CLAMP_FLOOR)
        Q = Q / Q.sum()
    mask = P > 0
    return max(float(np.sum(P[mask] * np.log(P[mask] / Q[mask]))), 0.0)


class ExactModel:
    """Stand-in for a trained network that returns exact maps or coefficients.

    Useful as an oracle baseline: plugged into ``evaluate_quality`` it makes
    both network-facing divergences exactly zero.
    """

    def __init__(self, sim: Simulator, arch: str):
        self.sim, self.arch = sim, arch
        self.modality = sim.config.modality
        self.meta = {"K": sim.config.K, "metric": sim.config.metric}

    def predict(self, belief):
        m = self.sim.exact_map(np.asarray(belief, dtype=np.float64))
        return m if self.arch == "map" else decompose(m, self.sim.basis).values


@dataclass
class QualityReport:
    modality: str
    metric: str
    K: int
    episodes: int
    steps: int
    seed: int
    # per_step[s] holds the means over episodes at step s
    per_step: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": "quality", "modality": self.modality, "metric": self.metric,
            "K": self.K, "episodes": self.episodes, "steps": self.steps, "seed": self.seed,
            "per_step": self.per_step, "mean": self.mean,
        }


QUALITY_KEYS = ("d_map", "d_coeff", "d_trunc")


def evaluate_quality(map_net, coeff_net, num_episodes: int = 100, seed: int = 0, steps: int = 20,
                     metric: str | None = None, grid: GridSpec | None = None,
                     sim: Simulator | None = None) -> QualityReport:
    """Run fresh greedy episodes and score the networks at every step.

    ``d_map``   = D(phi || phi_net)               network map vs exact map
    ``d_coeff`` = D(recon(c) || recon(c_net))     reconstruction from network vs exact coefficients
    ``d_trunc`` = D(phi || recon(c))              reconstruction from exact coefficients vs exact map

    Either network may be None; its divergence is then reported as NaN.
    """
    nets = [m for m in (map_net, coeff_net) if m is not None]
    modality = nets[0].modality if nets else (sim.config.modality if sim else "bearing")
    for m in nets:
        if m.modality != modality:
            raise ValueError(f"network modality {m.modality!r} differs from {modality!r}")
    if map_net is not None and getattr(map_net, "arch", "map") != "map":
        raise ValueError("map_net is not a map network")
    if coeff_net is not None and getattr(coeff_net, "arch", "coeff") != "coeff":
        raise ValueError("coeff_net is not a coefficient network")
    if metric is None:
        metric = next((m.meta.get("metric") for m in nets if m.meta.get("metric")), "mutual")
    K = coeff_net.meta.get("K", DEFAULT_K[modality]) if coeff_net is not None else DEFAULT_K[modality]
    if sim is None:
        sim = Simulator(EpisodeConfig(steps=steps, modality=modality, metric=metric, seed=seed, K=K), grid)
    elif sim.config.modality != modality:
        raise ValueError(f"simulator modality {sim.config.modality!r} differs from {modality!r}")
    cfg = sim.config
    basis = sim.basis if cfg.K == K else SpectralBasis(sim.grid, K, modality)
    for m in nets:
        if getattr(m, "grid", sim.grid) != sim.grid:
            raise ValueError("network grid differs from the evaluation grid")

    sums = np.zeros((cfg.steps, 3))
    for rng in episode_rngs(seed, num_episodes, STREAM_EVAL):
        res = sim.run_episode(rng)
        for s in range(len(res.samples)):
            b = res.beliefs[s]
            phi = res.maps[s]
            c = decompose(phi, basis).values
            phi_t = reconstruct(c, basis)
            d_map = kl_divergence(phi, _as_dist(map_net.predict(b))) if map_net is not None else np.nan
            if coeff_net is not None:
                d_coeff = kl_divergence(phi_t, reconstruct(coeff_net.predict(b), basis))
            else:
                d_coeff = np.nan
            sums[s] += (d_map, d_coeff, kl_divergence(phi, phi_t))
    means = sums / num_episodes
    report = QualityReport(modality, cfg.metric, K, num_episodes, cfg.steps, seed)
    report.per_step = [{"step": s, **{k: _num(v) for k, v in zip(QUALITY_KEYS, row)}}
                       for s, row in enumerate(means)]
    report.mean = {k: _num(v) for k, v in zip(QUALITY_KEYS, means.mean(axis=0))}
    return report


def _as_dist(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return m / m.sum()


def _num(v):
    v = float(v)
    return None if np.isnan(v) else v


# timing

@dataclass
class BenchmarkConfig:
    modality: str = "bearing"
    metric: str = "mutual"
    reps: int = 10
    warmup: int = 2
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    K: int | None = None
    map_net: object = None
    coeff_net: object = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("benchmark needs at least one repetition")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if self.K is None:
            self.K = DEFAULT_K[self.modality]


def _time(fn, reps: int, warmup: int) -> dict:
    for _ in range(warmup):
        fn()
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return {"median": statistics.median(ts), "mean": statistics.fmean(ts), "reps": reps}


def benchmark_timing(config: BenchmarkConfig) -> dict:
    """Wall time of exact vs network maps and coefficients, single-threaded.

    The likelihood table is built once beforehand and not timed.  True
    coefficient time includes generating the true map.  When no trained
    networks are supplied, freshly initialized ones of the same
    architecture are timed (inference cost does not depend on weights).
    """
    cfg = config
    sim = Simulator(EpisodeConfig(modality=cfg.modality, metric=cfg.metric, K=cfg.K, seed=cfg.seed), cfg.grid)
    map_net = cfg.map_net or build_map_net(cfg.grid, cfg.modality, seed=cfg.seed)
    coeff_net = cfg.coeff_net or build_coeff_net(cfg.grid, len(sim.basis), cfg.modality, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    b = rng.dirichlet(np.ones(cfg.grid.num_cells)).reshape(cfg.grid.n, cfg.grid.n)

    def true_map():
        raw = fisher_map(b, sim.grid) if cfg.metric == "fisher" else mi_map(b, sim.table)
        return normalize_map(raw).values

    with threadpool_limits(limits=1):
        res = {
            "true_map": _time(true_map, cfg.reps, cfg.warmup),
            "true_coeffs": _time(lambda: decompose(true_map(), sim.basis), cfg.reps, cfg.warmup),
            "nn_map": _time(lambda: map_net.predict(b), cfg.reps, cfg.warmup),
            "nn_coeffs": _time(lambda: coeff_net.predict(b), cfg.reps, cfg.warmup),
        }
    med = {k: v["median"] for k, v in res.items()}
    return {
        "kind": "timing",
        "modality": cfg.modality,
        "metric": cfg.metric,
        "n": cfg.grid.n,
        "heading_bins": cfg.grid.heading_bins,
        "K": cfg.K,
        "reps": cfg.reps,
        "warmup": cfg.warmup,
        "threads": 1,
        "timings": res,
        "ratios": {
            "map": med["true_map"] / med["nn_map"],
            "coeffs": med["true_coeffs"] / med["nn_coeffs"],
        },
    }


# rendering

def map_slice(m, heading_bin: int | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 2:
        return m
    if m.ndim != 3:
        raise ValueError(f"expected an (n, n) or (n, n, H) map, got shape {m.shape}")
    h = 0 if heading_bin is None else heading_bin
    if not 0 <= h < m.shape[2]:
        raise IndexError(f"heading bin {h} out of range [0, {m.shape[2]})")
    return m[:, :, h]


def render_map(m, path, fmt: str = "pgm", heading_bin: int | None = None) -> np.ndarray:
    """Write a map (or one heading slice of an SE(2) map) as 16-bit PGM or CSV.

    PGM pixels are ``round(65535 * v / max v)``; row 0 is grid row i=0.
    CSV has a header ``i,j,value`` and one row per cell in row-major order.
    Returns the rendered 2-D slice.
    """
    s = map_slice(m, heading_bin)
    if fmt == "pgm":
        top = s.max()
        scaled = np.zeros_like(s) if top <= 0 else s / top * 65535.0
        pix = np.clip(np.rint(scaled), 0, 65535).astype(">u2")
        with open(path, "wb") as fh:
            fh.write(f"P5\n{s.shape[1]} {s.shape[0]}\n65535\n".encode("ascii"))
            fh.write(pix.tobytes())
    elif fmt == "csv":
        with open(path, "w") as fh:
            fh.write("i,j,value\n")
            for i in range(s.shape[0]):
                for j in range(s.shape[1]):
                    fh.write(f"{i},{j},{s[i, j]:.17g}\n")
    else:
        raise ValueError(f"unknown render format {fmt!r}")
    return s


def read_csv_map(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_i, n_j = int(rows[:, 0].max()) + 1, int(rows[:, 1].max()) + 1
    out = np.zeros((n_i, n_j))
    out[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2]
    return out


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[4], dtype=dtype, count=w * h).reshape(h, w)
