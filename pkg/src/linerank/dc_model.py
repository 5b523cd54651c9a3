"""Linearized network model: flows as a linear map of bus injections.

Branch susceptances form a weighted graph Laplacian over the buses. Its
Moore-Penrose pseudoinverse turns net injections into phase angles, and
the chained map (susceptance times incidence times pseudoinverse) gives
the distribution-factor matrix sending injections straight to branch
flows. Everything internal is per-unit on the case's MVA base; CSV
writers convert back to MW at the edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case_io import GridCase, susceptance as branch_susceptance
from .errors import NetworkError, NumericError


@dataclass(frozen=True)
class DCModel:
    """Dense linear flow model for one case.

    Arrays are read-only. Branch axis follows case file order, bus axis
    follows bus order in the file, and the stochastic/deterministic
    splits keep that same relative order.
    """

    case: GridCase
    bus_ids: tuple[int, ...]
    stochastic_ids: tuple[int, ...]
    deterministic_ids: tuple[int, ...]
    incidence: np.ndarray            # (m, b) entries in {-1, 0, +1}
    susceptance: np.ndarray          # (m,)
    laplacian: np.ndarray            # (b, b)
    laplacian_pinv: np.ndarray       # (b, b)
    ptdf: np.ndarray                 # (m, b) injections -> flows
    ptdf_stochastic: np.ndarray      # (m, d) columns at stochastic buses
    ptdf_deterministic: np.ndarray   # (m, b-d)
    mean_injection: np.ndarray       # (d,) pu, stochastic buses
    fixed_injection: np.ndarray      # (b-d,) pu, deterministic buses
    nominal_flow: np.ndarray         # (m,) pu
    gamma: np.ndarray                # (m,) pu thermal limits, inf if unrated

    @property
    def n_branches(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_buses(self) -> int:
        return self.incidence.shape[1]

    @property
    def n_stochastic(self) -> int:
        return self.ptdf_stochastic.shape[1]

    def flow_samples(self, p: np.ndarray) -> np.ndarray:
        """Map stochastic injections (n, d) in pu to branch flows (n, m) in pu."""
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != self.n_stochastic:
            raise NumericError(
                f"expected samples shaped (n, {self.n_stochastic}), got {p.shape}"
            )
        base = self.ptdf_deterministic @ self.fixed_injection
        return p @ self.ptdf_stochastic.T + base

    def flows(self, p: np.ndarray) -> np.ndarray:
        """Map one stochastic injection vector (d,) in pu to branch flows (m,).

        Deterministic buses contribute their fixed injections; the full-vector
        map for all buses at once is ``model.ptdf @ x``.
        """
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (self.n_stochastic,):
            raise NumericError(
                f"expected injection shaped ({self.n_stochastic},), got {p.shape}"
            )
        return self.flow_samples(p[None, :])[0]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def pinv_laplacian(matrix: np.ndarray, expected_nullity: int = 1) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below b * machine-epsilon * max-eigenvalue count as zero.
    The nullity must match ``expected_nullity`` exactly: a connected
    network's Laplacian has the all-ones vector as its only null space,
    and each extra null direction means one extra island.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    b = matrix.shape[0]
    eigval, eigvec = np.linalg.eigh(matrix)
    tol = b * np.finfo(np.float64).eps * float(eigval[-1])
    nullity = int(np.count_nonzero(eigval < tol))
    if nullity > expected_nullity:
        raise NetworkError(
            f"network is disconnected: {nullity} islands "
            f"(expected {expected_nullity})"
        )
    if nullity < expected_nullity:
        raise NumericError(
            f"expected a {expected_nullity}-dimensional null space, found {nullity}"
        )
    inv = np.where(eigval < tol, 0.0, 1.0 / np.where(eigval < tol, 1.0, eigval))
    return (eigvec * inv) @ eigvec.T


def build_dc_model(case: GridCase) -> DCModel:
    """Assemble the dense flow model for a parsed case."""
    b = case.n_buses
    m = case.n_branches
    pos = {bus.id: i for i, bus in enumerate(case.buses)}

    incidence = np.zeros((m, b))
    beta = np.empty(m)
    gamma = np.empty(m)
    for k, br in enumerate(case.branches):
        incidence[k, pos[br.from_bus]] = 1.0
        incidence[k, pos[br.to_bus]] = -1.0
        beta[k] = branch_susceptance(br)
        gamma[k] = br.rating / case.base_mva if br.rating > 0 else np.inf

    laplacian = incidence.T @ (beta[:, None] * incidence)
    laplacian_pinv = pinv_laplacian(laplacian)
    ptdf = beta[:, None] * (incidence @ laplacian_pinv)

    s_cols = [i for i, bus in enumerate(case.buses) if bus.is_stochastic]
    d_cols = [i for i, bus in enumerate(case.buses) if bus.is_deterministic]
    mu = np.array([case.net_injection(case.buses[i].id) for i in s_cols]) / case.base_mva
    fixed = np.array([case.net_injection(case.buses[i].id) for i in d_cols]) / case.base_mva

    ptdf_s = ptdf[:, s_cols]
    ptdf_d = ptdf[:, d_cols]
    nominal = ptdf_s @ mu + ptdf_d @ fixed

    return DCModel(
        case=case,
        bus_ids=tuple(bus.id for bus in case.buses),
        stochastic_ids=tuple(case.buses[i].id for i in s_cols),
        deterministic_ids=tuple(case.buses[i].id for i in d_cols),
        incidence=_freeze(incidence),
        susceptance=_freeze(beta),
        laplacian=_freeze(laplacian),
        laplacian_pinv=_freeze(laplacian_pinv),
        ptdf=_freeze(ptdf),
        ptdf_stochastic=_freeze(ptdf_s),
        ptdf_deterministic=_freeze(ptdf_d),
        mean_injection=_freeze(mu),
        fixed_injection=_freeze(fixed),
        nominal_flow=_freeze(nominal),
        gamma=_freeze(gamma),
    )


def dump_matrix(arr: np.ndarray) -> str:
    """Render a vector or matrix as ``row,col,value`` CSV text."""
    arr = np.atleast_2d(np.asarray(arr))
    lines = ["row,col,value"]
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            lines.append(f"{i},{j},{float(arr[i, j])!r}")
    return "\n".join(lines) + "\n"
