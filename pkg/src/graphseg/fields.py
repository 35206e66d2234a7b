"""Shared solver state: fidelity sets, random phase-field initialization,
and the relative-change stopping criterion."""

from dataclasses import dataclass

import numpy as np

from graphseg.simplex import project_rows

__all__ = ["FidelitySet", "random_label_field", "stop_ratio"]


@dataclass(frozen=True)
class FidelitySet:
    """Labeled node indices, one-hot target rows, and fidelity strength mu.

    mu expands to the per-node weight mu_i = mu on labeled nodes and 0
    elsewhere (soft assignment: labeled nodes may still change state).
    """

    indices: np.ndarray
    targets: np.ndarray
    mu: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        tgt = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "targets", tgt)
        if idx.size != np.unique(idx).size:
            raise ValueError("fidelity indices must be distinct")
        if idx.size and idx.min() < 0:
            raise ValueError("fidelity indices must be nonnegative")
        if tgt.shape[0] != idx.size:
            raise ValueError("one target row required per fidelity index")
        if tgt.size and not (
            np.all((tgt == 0) | (tgt == 1)) and np.all(tgt.sum(axis=1) == 1)
        ):
            raise ValueError("fidelity targets must be one-hot simplex vertices")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")

    @property
    def n_classes(self):
        return self.targets.shape[1]

    @property
    def labels(self):
        return np.argmax(self.targets, axis=1)

    def covers_all_classes(self):
        return np.unique(self.labels).size == self.n_classes

    @classmethod
    def from_labels(cls, indices, labels, n_classes, mu):
        labels = np.asarray(labels, dtype=np.int64)
        targets = np.zeros((labels.size, n_classes))
        targets[np.arange(labels.size), labels] = 1.0
        return cls(np.asarray(indices, dtype=np.int64), targets, mu)


def random_label_field(n_vertices, fidelity, seed):
    """Initial phase field: uniform(0,1) entries, rows projected to the
    simplex, fidelity rows overwritten by their one-hot targets."""
    rng = np.random.default_rng(seed)
    u = project_rows(rng.uniform(size=(n_vertices, fidelity.n_classes)))
    u[fidelity.indices] = fidelity.targets
    return u


def stop_ratio(u_new, u_old):
    """max_i ||u_i^new - u_i^old||^2 / max_i ||u_i^new||^2."""
    num = np.max(np.sum((u_new - u_old) ** 2, axis=1))
    den = np.max(np.sum(u_new**2, axis=1))
    return num / den
