"""Agent-based simulation of trust build-up between two opposite profiles.

Each step one new object appears and every agent's rating of it equals its
profile (+1 or -1). Agents signal independently with probability ``eta``.
For every structural edge i -> j, agent i sees j's rating if j signalled
and otherwise the system's trust-weighted prediction for j, gets a utility
from it and updates its trust in j. S~ is rebuilt once per step after all
updates.

Runs are seeded from ``SeedSequence(seed, spawn_key=(run, ...))`` so run r
uses the same random streams at every grid point of a sweep.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .dynamics import smoothed_trust
from .graph import RandomGraphSpec, TrustGraph, generate_random_graph
from .metric import DEFAULT_BETA, RowNormalizedMatrix


@dataclass(frozen=True)
class SimulationConfig:
    n_agents: int = 500
    mean_degree: float = 7.0
    eta: float = 0.25
    gamma: float = 0.75
    beta: float = DEFAULT_BETA
    u_thr: float = 0.5
    steps: int = 50
    runs: int = 100
    seed: int = 0
    normalization: str = "bootstrap"
    strategy: str = "exact"
    walk_cutoff: int = 100
    tol: float = 1e-10
    sign_follows_utility: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.n_agents < 2 or self.n_agents % 2:
            raise ValueError("n_agents must be even and >= 2 (two equal profiles)")
        if self.steps < 1 or self.runs < 1:
            raise ValueError("steps and runs must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        if self.normalization not in ("bootstrap", "strict"):
            raise ValueError("normalization must be 'bootstrap' or 'strict'")
        if self.strategy not in ("exact", "iterative", "truncated"):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def replace(self, **changes) -> "SimulationConfig":
        return SimulationConfig(**{**asdict(self), **changes})

    def solver_kwargs(self) -> dict:
        if self.strategy == "iterative":
            return {"tol": self.tol}
        if self.strategy == "truncated":
            return {"walk_cutoff": self.walk_cutoff}
        return {}


@dataclass
class StepRecord:
    t: int
    mean_same_trust: float
    mean_cross_trust: float
    phi: float
    phi_time_avg: float


@dataclass
class SimulationState:
    t: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    profiles: np.ndarray
    rng: np.random.Generator
    S_tilde: RowNormalizedMatrix
    utilities: np.ndarray | None = None
    records: list = field(default_factory=list)

    @property
    def n_agents(self) -> int:
        return self.profiles.size

    @property
    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_agents), np.diff(self.indptr))

    @property
    def trust(self) -> TrustGraph:
        return TrustGraph.from_csr(self.n_agents, self.indptr, self.indices, self.weights)


def make_profiles(n: int) -> np.ndarray:
    """First half +1, second half -1."""
    pi = np.ones(n)
    pi[n // 2:] = -1.0
    return pi


def _run_seeds(seed: int, run: int):
    graph_ss = np.random.SeedSequence(seed, spawn_key=(run, 0))
    dyn_ss = np.random.SeedSequence(seed, spawn_key=(run, 1))
    graph_seed = int(graph_ss.generate_state(1, np.uint64)[0])
    return graph_seed, np.random.default_rng(dyn_ss)


def _smooth(state_like, cfg: SimulationConfig, indptr, indices, weights, n):
    return smoothed_trust(
        indptr, indices, weights, n, cfg.beta, cfg.normalization, cfg.strategy,
        **cfg.solver_kwargs(),
    )


def performance(state: SimulationState, cfg: SimulationConfig | None = None) -> float:
    """Phi = (1/n) sum_i sum_j u_ij T_ij / sum_k T_ik with this step's utilities.

    Agents whose trust row sums to zero contribute nothing; Phi is 0 before
    the first step.
    """
    if state.utilities is None:
        return 0.0
    return _phi(state.sources, state.weights, state.utilities, state.n_agents)


def _phi(src, weights, utilities, n):
    sums = np.bincount(src, weights=weights, minlength=n)
    denom = sums[src]
    ok = denom > 0.0
    return float(np.sum(utilities[ok] * weights[ok] / denom[ok]) / n)


def _trust_means(src, dst, weights, profiles):
    same = profiles[src] == profiles[dst]
    m_same = float(weights[same].mean()) if same.any() else 0.0
    m_cross = float(weights[~same].mean()) if (~same).any() else 0.0
    return m_same, m_cross


def _record(state: SimulationState, phi_sum: float) -> StepRecord:
    src = state.sources
    m_same, m_cross = _trust_means(src, state.indices, state.weights, state.profiles)
    phi = performance(state)
    avg = (phi_sum + phi) / state.t if state.t > 0 else 0.0
    return StepRecord(state.t, m_same, m_cross, phi, avg)


def initial_state(cfg: SimulationConfig, run: int = 0, graph: TrustGraph | None = None,
                  profiles=None) -> SimulationState:
    """t = 0: random graph (unless given), all trust 0."""
    graph_seed, rng = _run_seeds(cfg.seed, run)
    if graph is None:
        graph = generate_random_graph(RandomGraphSpec(cfg.n_agents, cfg.mean_degree, graph_seed))
    n = graph.n_agents
    pi = make_profiles(n) if profiles is None else np.asarray(profiles, dtype=np.float64)
    indptr, indices, weights = graph.to_csr()
    S_tilde = _smooth(None, cfg, indptr, indices, weights, n)
    state = SimulationState(0, indptr, indices, weights, pi, rng, S_tilde)
    state.records.append(_record(state, 0.0))
    return state


def step(state: SimulationState, cfg: SimulationConfig, backend=None) -> SimulationState:
    """Advance one time step in place and return the state."""
    k = backend or kernels
    n = state.n_agents
    pi = state.profiles
    predictions = state.S_tilde.values @ pi
    signalled = (state.rng.random(n) < cfg.eta).astype(np.uint8)
    new_w, u = k.edge_step(
        state.sources, state.indices, state.weights, pi, signalled, predictions,
        cfg.gamma, cfg.u_thr, cfg.sign_follows_utility,
    )
    phi_sum = sum(r.phi for r in state.records[1:])
    state.weights = new_w
    state.utilities = u
    state.t += 1
    state.S_tilde = _smooth(None, cfg, state.indptr, state.indices, new_w, n)
    state.records.append(_record(state, phi_sum))
    return state


def simulate_run(cfg: SimulationConfig, run: int = 0) -> list[StepRecord]:
    state = initial_state(cfg, run)
    for _ in range(cfg.steps):
        step(state, cfg)
    return state.records


@dataclass
class TimeSeriesResult:
    """Per-run, per-step series with shape (runs, steps + 1)."""

    config: SimulationConfig
    same: np.ndarray
    cross: np.ndarray
    phi: np.ndarray
    phi_time_avg: np.ndarray

    @staticmethod
    def _stderr(a):
        if a.shape[0] < 2:
            return np.zeros(a.shape[1])
        return a.std(axis=0, ddof=1) / np.sqrt(a.shape[0])

    @property
    def mean_same(self):
        return self.same.mean(axis=0)

    @property
    def mean_cross(self):
        return self.cross.mean(axis=0)

    @property
    def mean_phi(self):
        return self.phi.mean(axis=0)

    @property
    def stderr_same(self):
        return self._stderr(self.same)

    @property
    def stderr_cross(self):
        return self._stderr(self.cross)

    @property
    def stderr_phi(self):
        return self._stderr(self.phi)

    def convergence_step(self, threshold: float = 0.8):
        """First t at which mean same-profile trust reaches ``threshold``."""
        hits = np.flatnonzero(self.mean_same >= threshold)
        return int(hits[0]) if hits.size else None

    def rows(self) -> list[dict]:
        out = []
        ms, mc, mp = self.mean_same, self.mean_cross, self.mean_phi
        ss, sc, sphi = self.stderr_same, self.stderr_cross, self.stderr_phi
        mpa = self.phi_time_avg.mean(axis=0)
        for t in range(ms.size):
            out.append({
                "d": self.config.mean_degree,
                "eta": self.config.eta,
                "t": t,
                "mean_same_trust": float(ms[t]),
                "mean_cross_trust": float(mc[t]),
                "phi": float(mp[t]),
                "stderr_same_trust": float(ss[t]),
                "stderr_cross_trust": float(sc[t]),
                "stderr_phi": float(sphi[t]),
                "phi_time_avg": float(mpa[t]),
                "runs": self.config.runs,
            })
        return out


SWEEP_COLUMNS = [
    "d", "eta", "t", "mean_same_trust", "mean_cross_trust", "phi",
    "stderr_same_trust", "stderr_cross_trust", "stderr_phi", "phi_time_avg", "runs",
]


def _run_job(args):
    cfg, run = args
    return simulate_run(cfg, run)


def run(cfg: SimulationConfig) -> TimeSeriesResult:
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    return _collect(cfg, results)


def _collect(cfg, results) -> TimeSeriesResult:
    def grab(attr):
        return np.array([[getattr(rec, attr) for rec in recs] for recs in results])

    return TimeSeriesResult(
        cfg,
        grab("mean_same_trust"),
        grab("mean_cross_trust"),
        grab("phi"),
        grab("phi_time_avg"),
    )


def sweep(cfg: SimulationConfig, degrees, etas) -> dict:
    """Run every (d, eta) grid point; returns ``{(d, eta): TimeSeriesResult}``."""
    cells = [cfg.replace(mean_degree=float(d), eta=float(e)) for d, e in itertools.product(degrees, etas)]
    jobs = [(c, r) for c in cells for r in range(c.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            flat = list(pool.map(_run_job, jobs, chunksize=max(1, cfg.runs // cfg.workers)))
    else:
        flat = [_run_job(j) for j in jobs]
    out = {}
    for n, c in enumerate(cells):
        out[(c.mean_degree, c.eta)] = _collect(c, flat[n * c.runs:(n + 1) * c.runs])
    return out


def sweep_rows(results: dict) -> list[dict]:
    rows = []
    for key in sorted(results):
        rows.extend(results[key].rows())
    return rows
