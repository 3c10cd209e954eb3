"""Equivalence classes, ensemble statistics, and parameter sweeps.

Basis states whose occupation autocorrelations coincide scatter probes
identically, so measurement can never tell them apart: each signature
group is an absorbing subspace of the detection dynamics.  A long
trajectory localizes into one group, and the fraction of trajectories
ending in group k reproduces the group's weight in the initial state.
This module classifies, runs the ensembles, and aggregates the
statistics that exhibit both facts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .kernel import (
    GAUSSIAN,
    PatternTable,
    ScatteringSetup,
    build_pattern_table,
    density_cdf,
    density_quantile,
    grid_quadrature,
    scatter_density,
    signature_groups,
)
from .lattice import (
    FockBasis,
    HubbardParams,
    LatticeSpec,
    ManyBodyState,
    build_hamiltonian,
    enumerate_basis,
    ground_state,
)
from .trajectory import (
    CONVERGENCE_THRESHOLD,
    EventKind,
    RngStream,
    TrajectoryRecord,
    trajectory_seed,
)

if TYPE_CHECKING:
    from .config import RunConfig


@dataclass(frozen=True)
class EquivalenceClass:
    """Basis states sharing one scattering pattern.

    signature is the occupation autocorrelation (C_0, ..., C_{M-1});
    members are the occupation tuples, indices their basis positions.
    """

    signature: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]
    indices: np.ndarray = field(compare=False, repr=False)


def build_classes(basis: FockBasis) -> tuple[EquivalenceClass, ...]:
    """Partition the basis into scattering-equivalence classes.

    Classes are ordered by signature, descending lexicographically, so
    the single-site (most sharply diffracting) class comes first and the
    flattest pattern last.  The partition depends only on the occupation
    lists, never on probe parameters.
    """
    classes = []
    for sig, idx in signature_groups(basis):
        members = tuple(basis.states[i] for i in idx)
        classes.append(EquivalenceClass(sig, members, idx))
    return tuple(classes)


def class_weights(state: ManyBodyState, classes) -> np.ndarray:
    """Summed probability of each equivalence class in the given state."""
    probs = state.probabilities
    return np.array([float(np.sum(probs[c.indices])) for c in classes])


def class_probabilities_initial(state: ManyBodyState, classes) -> np.ndarray:
    """Predicted end-state proportions: the class weights of the prepared
    state.  Measurement preserves these in expectation, so they are what
    a large ensemble of trajectories converges to."""
    return class_weights(state, classes)


def bin_edges(n_bins: int) -> np.ndarray:
    """Uniform left-closed bin edges over [-pi, pi)."""
    return np.linspace(-math.pi, math.pi, n_bins + 1)


def bin_centers(n_bins: int) -> np.ndarray:
    edges = bin_edges(n_bins)
    return 0.5 * (edges[:-1] + edges[1:])


def bin_angles(angles, n_bins: int) -> np.ndarray:
    """Histogram counts of angles over the uniform [-pi, pi) bins."""
    a = np.asarray(angles, dtype=np.float64)
    if a.size == 0:
        return np.zeros(n_bins, dtype=np.int64)
    k = _bin_index(a, n_bins)
    return np.bincount(k, minlength=n_bins).astype(np.int64)


def _bin_index(theta, n_bins: int):
    k = np.floor((np.asarray(theta) + math.pi) * (n_bins / (2.0 * math.pi)))
    return np.clip(k.astype(np.int64), 0, n_bins - 1)


def angle_histogram(records, n_bins: int) -> np.ndarray:
    """Pooled scatter-angle counts over a collection of trajectories."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    angles = np.concatenate([r.scatter_angles() for r in records]) \
        if records else np.array([])
    return bin_angles(angles, n_bins)


def predicted_bin_masses(state: ManyBodyState, table: PatternTable,
                         n_bins: int) -> np.ndarray:
    """Conditional probability of each angle bin given that a scatter
    happened, computed from the state's own density surface.

    Integrates the same piecewise-linear density the sampler draws from,
    so sampled histograms converge to exactly these masses.
    """
    dens = scatter_density(state, table)
    cdf = density_cdf(table.theta_grid, dens, bin_edges(n_bins))
    masses = np.diff(cdf)
    return masses / cdf[-1]


@dataclass
class EnsembleStats:
    """Aggregated results of n_traj independent trajectories.

    class_proportions counts converged trajectories only (their final
    dominant class); convergence_rate reports how many converged.
    histogram pools every scatter angle of the whole ensemble;
    histogram_predicted holds the matching bin masses (summing to 1)
    computed from the initial state.  mean_class_weights tracks the
    ensemble-averaged class weights at snapshot_indices.
    """

    n_traj: int
    n_events: int
    n_bins: int
    master_seed: int
    seeds: np.ndarray = field(repr=False)
    class_signatures: tuple[tuple[int, ...], ...] = ()
    class_proportions: np.ndarray = field(default=None, repr=False)
    class_proportions_predicted: np.ndarray = field(default=None, repr=False)
    histogram: np.ndarray = field(default=None, repr=False)
    histogram_predicted: np.ndarray = field(default=None, repr=False)
    convergence_rate: float = 0.0
    final_class_weights: np.ndarray = field(default=None, repr=False)
    converged_mask: np.ndarray = field(default=None, repr=False)
    end_class_index: np.ndarray = field(default=None, repr=False)
    snapshot_indices: np.ndarray = field(default=None, repr=False)
    mean_class_weights: np.ndarray = field(default=None, repr=False)
    scatter_counts: np.ndarray = field(default=None, repr=False)
    n_scatter_total: int = 0
    aborted_count: int = 0


def run_ensemble(initial: ManyBodyState, n_traj: int, n_events: int,
                 table: PatternTable, classes, master_seed: int,
                 n_bins: int = 600, snapshot_stride: int = 50,
                 workers: int = 1) -> EnsembleStats:
    """Run n_traj independently seeded trajectories and aggregate.

    Each trajectory evolves the squared magnitudes of the coefficients;
    every recorded quantity (event kinds, angles, class weights) depends
    on the state only through them, and both projections act on
    magnitudes by state-independent positive factors, so nothing is lost
    by dropping the phases.  Results are merged by trajectory index, so
    they do not depend on the execution order or the worker count.
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    if n_events < 1:
        raise ValueError(f"n_events must be >= 1, got {n_events}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    group_arrays = [c.indices for c in classes]
    snap_idx = _snapshot_indices(n_events, snapshot_stride)
    seeds = np.array([trajectory_seed(master_seed, i) for i in range(n_traj)],
                     dtype=np.uint64)

    starts = [(n_traj * w) // workers for w in range(workers + 1)]
    chunks = [(seeds[a:b]) for a, b in zip(starts, starts[1:]) if b > a]

    args = [(initial.probabilities, table, group_arrays, chunk, n_events,
             n_bins, snap_idx) for chunk in chunks]
    if workers == 1 or len(chunks) <= 1:
        parts = [_ensemble_chunk(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_ensemble_chunk_star, args))

    histogram = np.sum([p["histogram"] for p in parts], axis=0)
    final_w = np.concatenate([p["final_weights"] for p in parts], axis=0)
    snaps = np.concatenate([p["snapshots"] for p in parts], axis=0)
    scatter_counts = np.concatenate([p["scatter_counts"] for p in parts])
    aborted = int(sum(p["aborted"] for p in parts))

    converged = np.max(final_w, axis=1) > CONVERGENCE_THRESHOLD
    end_class = np.argmax(final_w, axis=1)
    k = len(classes)
    n_conv = int(np.count_nonzero(converged))
    if n_conv > 0:
        proportions = np.bincount(end_class[converged],
                                  minlength=k).astype(float) / n_conv
    else:
        proportions = np.zeros(k)

    return EnsembleStats(
        n_traj=n_traj, n_events=n_events, n_bins=n_bins,
        master_seed=master_seed, seeds=seeds,
        class_signatures=tuple(c.signature for c in classes),
        class_proportions=proportions,
        class_proportions_predicted=class_weights(initial, classes),
        histogram=histogram,
        histogram_predicted=predicted_bin_masses(initial, table, n_bins),
        convergence_rate=n_conv / n_traj,
        final_class_weights=final_w,
        converged_mask=converged,
        end_class_index=end_class,
        snapshot_indices=snap_idx,
        mean_class_weights=np.mean(snaps, axis=0),
        scatter_counts=scatter_counts,
        n_scatter_total=int(histogram.sum()),
        aborted_count=aborted)


def _snapshot_indices(n_events: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ValueError(f"snapshot_stride must be >= 1, got {stride}")
    idx = sorted({0, n_events, *range(stride, n_events + 1, stride)})
    return np.array(idx, dtype=np.int64)


def _ensemble_chunk_star(args):
    return _ensemble_chunk(*args)


def _ensemble_chunk(p0, table, groups, seeds, n_events, n_bins, snap_idx):
    """Run one contiguous block of trajectories in probability space."""
    setup = table.setup
    grid = table.theta_grid
    weights = table.weights
    ns_prob = table.ns_prob
    occ = table.basis.occupations.astype(np.float64)
    sites = np.arange(occ.shape[1], dtype=np.float64)
    k0 = setup.k0_a
    gaussian = setup.envelope == GAUSSIAN
    env_width = (setup.k0_a * setup.sigma_a) ** 2 if gaussian else 0.0
    bin_scale = n_bins / (2.0 * math.pi)

    n_chunk = len(seeds)
    n_groups = len(groups)
    histogram = np.zeros(n_bins, dtype=np.int64)
    final_weights = np.empty((n_chunk, n_groups))
    snapshots = np.empty((n_chunk, len(snap_idx), n_groups))
    scatter_counts = np.zeros(n_chunk, dtype=np.int64)
    aborted = 0

    for t, seed in enumerate(seeds):
        rng = RngStream(int(seed))
        p = p0.copy()
        si = 0
        if snap_idx[si] == 0:
            snapshots[t, si] = [p[ix].sum() for ix in groups]
            si += 1
        dead = False
        for m in range(1, n_events + 1):
            if not dead:
                p_ns = float(p @ ns_prob)
                r = rng.uniform()
                if r < p_ns:
                    q = p * ns_prob
                else:
                    v = (r - p_ns) / (1.0 - p_ns)
                    dens = p @ weights
                    theta = density_quantile(grid, dens, v)
                    b = int((theta + math.pi) * bin_scale)
                    histogram[min(max(b, 0), n_bins - 1)] += 1
                    scatter_counts[t] += 1
                    amps = occ @ np.exp(-1j * (k0 * math.sin(theta)) * sites)
                    mult = np.abs(amps) ** 2
                    if gaussian:
                        mult = mult * math.exp(
                            -2.0 * env_width * (1.0 - math.cos(theta)))
                    q = p * mult
                s = q.sum()
                if s > 0.0 and math.isfinite(s):
                    p = q / s
                else:
                    # keep the last healthy state; the trajectory is
                    # reported as aborted rather than poisoning the stats
                    dead = True
                    aborted += 1
            if si < len(snap_idx) and m == snap_idx[si]:
                snapshots[t, si] = [p[ix].sum() for ix in groups]
                si += 1
        final_weights[t] = [p[ix].sum() for ix in groups]

    return {"histogram": histogram, "final_weights": final_weights,
            "snapshots": snapshots, "scatter_counts": scatter_counts,
            "aborted": aborted}


@dataclass(frozen=True)
class SweepRow:
    """One ground state along the interaction sweep."""

    uj: float
    energy: float
    predicted: np.ndarray
    proportions: np.ndarray
    convergence_rate: float


def sweep_uj(uj_values, lattice: LatticeSpec, setup: ScatteringSetup,
             n_traj: int, n_events: int, master_seed: int,
             n_bins: int = 600, snapshot_stride: int = 50,
             workers: int = 1) -> list[SweepRow]:
    """Ensemble per interaction strength, plus the ground-state predictions.

    Each U/J value prepares its own ground state with J = 1 as the energy
    unit; math.inf is accepted as the hard-interaction limit and realized
    as J = 0, U = 1.  Every row derives its trajectory seeds from
    (master_seed, row index), so rows are independent and the whole sweep
    is reproducible.
    """
    values = list(uj_values)
    for uj in values:
        if not (uj >= 0):
            raise ValueError(f"U/J values must be >= 0, got {uj}")

    basis = enumerate_basis(lattice)
    classes = build_classes(basis)
    table = build_pattern_table(basis, setup)

    rows = []
    for i, uj in enumerate(values):
        if math.isinf(uj):
            params = HubbardParams(J=0.0, U=1.0)
        else:
            params = HubbardParams(J=1.0, U=float(uj))
        energy, psi = ground_state(build_hamiltonian(basis, params), basis)
        stats = run_ensemble(psi, n_traj, n_events, table, classes,
                             master_seed=trajectory_seed(master_seed, i),
                             n_bins=n_bins, snapshot_stride=snapshot_stride,
                             workers=workers)
        rows.append(SweepRow(uj=float(uj), energy=energy,
                             predicted=stats.class_proportions_predicted,
                             proportions=stats.class_proportions,
                             convergence_rate=stats.convergence_rate))
    return rows


@dataclass
class PreparedSystem:
    """Ground state plus all precomputed tables for one configuration."""

    basis: FockBasis
    classes: tuple[EquivalenceClass, ...]
    table: PatternTable
    params: HubbardParams
    energy: float
    initial_state: ManyBodyState


def prepare_system(cfg: "RunConfig") -> PreparedSystem:
    """Diagonalize and tabulate everything a run needs from its config."""
    lattice = cfg.lattice_spec()
    params = cfg.hubbard_params()
    basis = enumerate_basis(lattice)
    classes = build_classes(basis)
    table = build_pattern_table(basis, cfg.scattering_setup())
    energy, state = ground_state(build_hamiltonian(basis, params), basis)
    return PreparedSystem(basis=basis, classes=classes, table=table,
                          params=params, energy=energy, initial_state=state)
