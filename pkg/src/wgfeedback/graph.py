"""Random-graph bookkeeping: atoms as vertices, doubly excited pairs as edges."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .network import pair_index

PROB_TOL = 1e-9
CONSENSUS_TOL = 1e-3


@dataclass(frozen=True)
class GraphSnapshot:
    time: float
    vertex_probs: np.ndarray
    edge_probs: dict = field(default_factory=dict)  # (j, l) -> p_jl, 0-based j < l
    complement: float = 0.0

    def __post_init__(self) -> None:
        v = np.asarray(self.vertex_probs, dtype=float)
        object.__setattr__(self, "vertex_probs", v)
        vals = np.concatenate([v, np.fromiter(self.edge_probs.values(), float)])
        if np.any(vals < -PROB_TOL) or np.any(vals > 1 + PROB_TOL):
            raise ValueError("probabilities must lie in [0, 1]")

    @staticmethod
    def build(time: float, vertex_probs, edge_probs=None) -> "GraphSnapshot":
        edge_probs = dict(edge_probs or {})
        rest = 1.0 - float(np.sum(vertex_probs)) - float(sum(edge_probs.values()))
        if rest < -1e-6:
            raise ValueError(f"probabilities exceed one by {-rest:.3g}")
        return GraphSnapshot(float(time), np.asarray(vertex_probs, float), edge_probs, max(rest, 0.0))

    def to_json(self) -> dict:
        return {
            "t": self.time,
            "vertices": [float(p) for p in self.vertex_probs],
            "edges": [[j + 1, l + 1, float(p)] for (j, l), p in sorted(self.edge_probs.items())],
            "complement": self.complement,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _check_time(times, t) -> None:
    if t < times[0] - 1e-12 or t > times[-1] + 1e-9 * max(1.0, abs(times[-1])):
        raise ValueError(f"t={t} outside [{times[0]}, {times[-1]}]")


def snapshot_one_excitation(run, t: float) -> GraphSnapshot:
    """Vertex probabilities |c_j(t)|^2 of a single-excitation run."""
    traj = run.trajectory
    _check_time(traj.times, t)
    c = traj.at(t)
    return GraphSnapshot.build(t, np.abs(c) ** 2)


def snapshot_two_excitation(pair_traj, photon_field, t: float, n_atoms: int | None = None) -> GraphSnapshot:
    """Edges from pair amplitudes, vertices from the one-photon sector at a recorded field time."""
    _check_time(pair_traj.times, t)
    c = pair_traj.at(t)
    if n_atoms is None:
        from .two_excitation import n_atoms_for_pairs

        n_atoms = n_atoms_for_pairs(len(c))
    edges = {p: float(abs(a) ** 2) for p, a in zip(pair_index(n_atoms), c)}
    if photon_field is None:
        return GraphSnapshot.build(t, np.zeros(n_atoms), edges)
    ft = photon_field.times
    i = int(np.argmin(np.abs(ft - t)))
    if abs(ft[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"photon field has no record at t={t}")
    amps = photon_field.amplitudes[i]
    if amps.shape[0] != n_atoms:
        raise ValueError("photon field and pair state disagree on atom count")
    vp = np.trapezoid(np.abs(amps) ** 2, photon_field.kgrid, axis=-1)
    return GraphSnapshot.build(t, vp, edges)


def consensus_metric(values) -> float:
    """max_{j,p} |v_j - v_p|; complex input gives the amplitude deviation."""
    v = np.asarray(values)
    if v.size == 0:
        raise ValueError("need at least one value")
    if np.iscomplexobj(v):
        return float(np.max(np.abs(v[:, None] - v[None, :])))
    return float(np.max(v) - np.min(v))


def reached_consensus(values, tol: float = CONSENSUS_TOL) -> bool:
    return consensus_metric(values) < tol
