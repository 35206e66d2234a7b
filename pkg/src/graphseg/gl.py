"""Multiclass Ginzburg-Landau minimization by convex splitting.

The energy combines a Laplacian smoothing term, a product multi-well
potential pulling each row toward a simplex vertex, and a soft quadratic
fidelity penalty on labeled nodes. The update treats the convex part
implicitly in the truncated spectral basis and the concave part
explicitly, then projects each row back to the Gibbs simplex.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from graphseg.fields import random_label_field, stop_ratio
from graphseg.graph import NormalizedLaplacian
from graphseg.simplex import nearest_vertices, project_rows
from graphseg.spectral import SpectralBasis

__all__ = [
    "GLConfig",
    "GLResult",
    "multiclass_energy",
    "well_derivative",
    "gl_step",
    "gl_segment",
]


@dataclass(frozen=True)
class GLConfig:
    """Parameters of the convex-splitting scheme.

    c defaults to mu + 1/epsilon, the lower bound guaranteeing the
    convexity/concavity of the energy split.
    """

    n_e: int
    epsilon: float = 1.0
    dt: float = 0.1
    mu: float = 30.0
    eta: float = 1e-7
    c: float = None
    max_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("epsilon", "dt", "mu", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.c is None:
            object.__setattr__(self, "c", self.mu + 1.0 / self.epsilon)
        for name in ("c",):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_e < 1 or self.max_iters < 1:
            raise ValueError("n_e and max_iters must be >= 1")
        if self.c < self.mu + 1.0 / self.epsilon - 1e-12:
            raise ValueError("convexity constant must satisfy c >= mu + 1/epsilon")


@dataclass(frozen=True)
class GLResult:
    """Final phase field, per-node labels, and run diagnostics."""

    field: np.ndarray
    labels: np.ndarray
    iterations: int
    converged: bool
    final_energy: float
    wall_time: float = field(default=0.0, compare=False)


def _row_l1_to_vertices(u):
    """A[i, l] = ||u_i - e_l||_1 for each row i and class l."""
    s = np.sum(np.abs(u), axis=1, keepdims=True)
    return s - np.abs(u) + np.abs(u - 1.0)


def multiclass_energy(u, operator, fidelity, epsilon):
    """Ginzburg-Landau energy: smoothing + multi-well potential + fidelity.

    operator may be a NormalizedLaplacian, a sparse/dense matrix, or a
    SpectralBasis (the smoothing term is then evaluated in the truncated
    basis).
    """
    u = np.asarray(u, dtype=float)
    if isinstance(operator, SpectralBasis):
        if operator.n_vertices != u.shape[0]:
            raise ValueError("field and basis dimensions do not match")
        proj = operator.eigenvectors.T @ u
        smoothing = float(np.sum(operator.eigenvalues[:, None] * proj**2))
    else:
        mat = operator.matrix if isinstance(operator, NormalizedLaplacian) else operator
        if mat.shape[0] != u.shape[0]:
            raise ValueError("field and Laplacian dimensions do not match")
        smoothing = float(np.sum(u * (mat @ u)))

    q = 0.25 * _row_l1_to_vertices(u) ** 2
    potential = float(np.sum(np.prod(q, axis=1)))

    diff = u[fidelity.indices] - fidelity.targets
    fid = 0.5 * fidelity.mu * float(np.sum(diff**2))
    return 0.5 * epsilon * smoothing + potential / (2.0 * epsilon) + fid


def well_derivative(u):
    """Gradient T of the multi-well product potential, row-wise.

    T_ik = sum_l (1/2)(1 - 2 delta_kl) ||u_i - e_l||_1
           prod_{m != l} (1/4) ||u_i - e_m||_1^2,
    valid for rows with entries in [0, 1].
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("well_derivative received non-finite entries")
    a = _row_l1_to_vertices(u)
    q = 0.25 * a**2
    k = u.shape[1]
    loo = np.empty_like(q)  # leave-one-out products of q over classes
    for l in range(k):
        cols = [m for m in range(k) if m != l]
        loo[:, l] = np.prod(q[:, cols], axis=1) if cols else 1.0
    g = a * loo
    return 0.5 * np.sum(g, axis=1, keepdims=True) - g


def _propagator(basis, cfg):
    """Diagonal weights 1 / (1 + C dt + epsilon dt lambda_k)."""
    return 1.0 / (1.0 + cfg.c * cfg.dt + cfg.epsilon * cfg.dt * basis.eigenvalues)


def gl_step(u, basis, fidelity, cfg):
    """One convex-splitting update followed by row-wise simplex projection."""
    if basis.n_e != cfg.n_e:
        raise ValueError(f"basis has {basis.n_e} eigenpairs, config expects {cfg.n_e}")
    if u.shape[0] != basis.n_vertices:
        raise ValueError("field and basis dimensions do not match")
    r = (1.0 + cfg.c * cfg.dt) * u - (cfg.dt / (2.0 * cfg.epsilon)) * well_derivative(u)
    r[fidelity.indices] -= cfg.dt * fidelity.mu * (u[fidelity.indices] - fidelity.targets)
    z = _propagator(basis, cfg)[:, None] * (basis.eigenvectors.T @ r)
    u_new = basis.eigenvectors @ z
    if not np.all(np.isfinite(u_new)):
        raise FloatingPointError("non-finite values in convex-splitting update")
    return project_rows(u_new)


def gl_segment(basis, fidelity, cfg):
    """Run the convex-splitting iteration to the relative-change criterion.

    Starts from a seeded random simplex field with fidelity rows set to
    their targets; stops when
    max_i ||u_i^{n+1} - u_i^n||^2 / max_i ||u_i^{n+1}||^2 < eta
    or at max_iters (non-converged flag). Labels are the nearest simplex
    vertices of the final rows.
    """
    if fidelity.indices.size == 0:
        raise ValueError("fidelity set must be nonempty")
    if not fidelity.covers_all_classes():
        raise ValueError("fidelity set must contain samples of every class")
    start = time.perf_counter()
    u = random_label_field(basis.n_vertices, fidelity, cfg.seed)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        u_new = gl_step(u, basis, fidelity, cfg)
        if stop_ratio(u_new, u) < cfg.eta:
            u = u_new
            converged = True
            break
        u = u_new
    energy = multiclass_energy(u, basis, fidelity, cfg.epsilon)
    return GLResult(
        field=u,
        labels=nearest_vertices(u),
        iterations=iterations,
        converged=converged,
        final_energy=energy,
        wall_time=time.perf_counter() - start,
    )
