"""Spectrum of the random-walk matrix and the cluster-structure quantities built on it."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .checks import CheckResult
from .graph import Graph, GraphError, Partition, VolumeConvention, planted_rho_upper

JACOBI_MAX_SWEEPS = 30
JACOBI_OFF_TOL = 1e-12
#: above this size ``method="auto"`` hands the matrix to LAPACK
JACOBI_AUTO_MAX_N = 160


class SpectralError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # column i is f_{i+1}

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def f(self, i: int) -> np.ndarray:
        """The i-th eigenvector, 1-based as in lambda_1 >= ... >= lambda_n."""
        return self.eigenvectors[:, i - 1]

    def lam(self, i: int) -> float:
        return float(self.eigenvalues[i - 1])

    def top(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, :k]


def random_walk_matrix(g: Graph) -> np.ndarray:
    """P = A / d, or (A + diag(loops)) / D for a lifted graph."""
    lifted = g.lifted_degree()
    if g.n == 0:
        return np.zeros((0, 0))
    if not (lifted == lifted[0]).all():
        raise SpectralError("random walk matrix needs a regular graph; lift it first")
    D = int(lifted[0])
    if D == 0:
        raise SpectralError("graph has no edges")
    P = g.adjacency_matrix()
    P[np.diag_indices(g.n)] += g.loop_weight
    return P / D


def indicator(n: int, S) -> np.ndarray:
    """Normalised indicator chi_S: 1/|S| on S, 0 elsewhere."""
    x = np.zeros(n)
    idx = np.atleast_1d(np.asarray(S, dtype=np.int64))
    if idx.size == 0:
        raise SpectralError("indicator of an empty set")
    x[idx] = 1.0 / idx.size
    return x


def _round_robin(n_even: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """n_even - 1 rounds of n_even/2 disjoint pairs covering every pair once."""
    players = list(range(n_even))
    rounds = []
    for _ in range(n_even - 1):
        half = n_even // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(A: np.ndarray) -> float:
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_eigh(
    A: np.ndarray, *, max_sweeps: int = JACOBI_MAX_SWEEPS, off_tol: float = JACOBI_OFF_TOL
) -> tuple[np.ndarray, np.ndarray, int]:
    """Cyclic Jacobi on a symmetric matrix; returns (values, vectors, sweeps).

    Rotations are applied in round-robin order so that each step annihilates
    n/2 disjoint off-diagonal pairs at once. Stops once the off-diagonal
    Frobenius norm is below ``off_tol * max(1, ||A||_F)``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V, 0
    size = n + (n % 2)
    if size != n:
        # a dummy row/column that never couples to the rest
        A = np.pad(A, ((0, 1), (0, 1)))
        V = np.eye(size)
    schedule = _round_robin(size)
    scale = max(1.0, float(np.linalg.norm(A)))
    for sweep in range(1, max_sweeps + 1):
        for p, q in schedule:
            apq = A[p, q]
            active = np.abs(apq) > 1e-150
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
        A = 0.5 * (A + A.T)
        if _off_norm(A) <= off_tol * scale:
            break
    else:
        raise SpectralError(f"Jacobi did not converge in {max_sweeps} sweeps (off={_off_norm(A):.3e})")
    return np.diag(A)[:n].copy(), V[:n, :n].copy(), sweep


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for i in range(out.shape[1]):
        v = out[:, i]
        total = v.sum()
        if abs(total) > 1e-9:
            flip = total < 0
        else:
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            flip = bool(nz.size) and v[nz[0]] < 0
        if flip:
            out[:, i] = -v
    return out


def eigendecompose(P: np.ndarray, tol: float = 1e-8, method: str = "auto") -> Spectrum:
    """Full symmetric eigendecomposition, eigenvalues in descending order.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    :data:`JACOBI_AUTO_MAX_N` nodes). Eigenvector signs are fixed so that each
    vector has a non-negative sum.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise SpectralError("matrix must be square")
    if not np.allclose(P, P.T, atol=tol, rtol=0):
        raise SpectralError("matrix is not symmetric")
    if method == "auto":
        method = "jacobi" if P.shape[0] <= JACOBI_AUTO_MAX_N else "lapack"
    if method == "jacobi":
        vals, vecs, _ = jacobi_eigh(P)
    elif method == "lapack":
        vals, vecs = np.linalg.eigh(0.5 * (P + P.T))
    else:
        raise SpectralError(f"unknown method {method!r}")
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    vecs = _canonical_signs(vecs)
    if P.size:
        resid = np.linalg.norm(P @ vecs - vecs * vals, axis=0).max()
        if resid > tol:
            raise SpectralError(f"eigen-residual {resid:.3e} exceeds {tol:g}")
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return Spectrum(vals, vecs)


def graph_spectrum(g: Graph, tol: float = 1e-8, method: str = "auto") -> Spectrum:
    return eigendecompose(random_walk_matrix(g), tol=tol, method=method)


def top_k_projector(spec: Spectrum, k: int) -> np.ndarray:
    if not 1 <= k <= spec.n:
        raise SpectralError(f"k={k} out of range [1, {spec.n}]")
    F = spec.top(k)
    return F @ F.T


@dataclass(frozen=True, eq=False)
class ClusterBasis:
    tilde_chi: np.ndarray  # n x k, column i = projection of f_i onto the indicator span
    hat_chi: np.ndarray  # n x k, Gram-Schmidt of tilde_chi
    distances: np.ndarray  # ||hat_chi_i - f_i||
    alpha: np.ndarray  # per node

    @property
    def k(self) -> int:
        return self.hat_chi.shape[1]

    @property
    def epsilon(self) -> float:
        return float(self.distances.max())


def cluster_basis(spec: Spectrum, p: Partition, tol: float = 1e-8) -> ClusterBasis:
    k = p.k
    if k > spec.n or p.n != spec.n:
        raise SpectralError("partition does not fit the spectrum")
    E = np.zeros((spec.n, k))
    for j in range(k):
        members = p.members(j)
        E[members, j] = 1.0 / math.sqrt(len(members))
    F = spec.top(k)
    tilde = E @ (E.T @ F)
    hat = np.zeros_like(tilde)
    for i in range(k):
        v = tilde[:, i].copy()
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            v -= hat[:, :i] @ (hat[:, :i].T @ v)
        nv = np.linalg.norm(v)
        if nv <= tol * max(1.0, norm0) or nv <= tol:
            raise SpectralError(
                f"Gram-Schmidt degenerate at index {i + 1}: projection of f_{i + 1} lies in the span "
                "of its predecessors; the partition does not match the top-k eigenspace"
            )
        hat[:, i] = v / nv
    diff = F - hat
    return ClusterBasis(
        tilde_chi=tilde,
        hat_chi=hat,
        distances=np.linalg.norm(diff, axis=0),
        alpha=np.sqrt(np.sum(diff * diff, axis=1)),
    )


def epsilon_formula(k: int, upsilon: float) -> float:
    """k * sqrt(k / upsilon), i.e. the distortion bound with constant 1."""
    return k * math.sqrt(k / upsilon)


@dataclass
class GoodNodes:
    good: np.ndarray
    threshold: float
    bad_count_bound: float
    n: int

    @property
    def bad_count(self) -> int:
        return self.n - len(self.good)


def good_node_threshold(k: int, epsilon: float, C: float, beta: float, n: int) -> float:
    return k * epsilon * math.sqrt(C * math.log(n) * math.log(1 / beta) / (beta * n))


def good_nodes(basis: ClusterBasis, C_good: float = 1.0, beta: float = 0.5, n: int | None = None, atol: float = 1e-10) -> GoodNodes:
    if not 0 < beta <= 0.5:
        raise SpectralError(f"beta={beta} must lie in (0, 1/2]")
    n = len(basis.alpha) if n is None else n
    k = basis.k
    thr = good_node_threshold(k, basis.epsilon, C_good, beta, n)
    good = np.flatnonzero(basis.alpha <= thr + atol)
    bound = beta * n / (C_good * k * math.log(n) * math.log(1 / beta))
    return GoodNodes(good=good, threshold=thr, bad_count_bound=bound, n=n)


@dataclass
class GapReport:
    upsilon: float
    gap_score: float
    T: int
    lambda_k: float
    lambda_k1: float
    rho_upper: float
    beta: float
    k: int
    n: int
    C_T: float
    well_clustered_constant: float
    convention: str
    epsilon_formula: float

    def to_json(self) -> dict:
        return {key: _fmt_json(v) for key, v in asdict(self).items()}


def _fmt_json(v):
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v


def rounds_for_gap(n: int, spectral_gap: float, C_T: float = 5.0) -> int:
    """ceil(C_T * ln n / (1 - lambda_{k+1})), at least 1."""
    return max(1, math.ceil(C_T * math.log(n) / spectral_gap))


def gap_score(upsilon: float, k: int, beta: float, n: int, constant: float = 1.0) -> float:
    scale = k**5 * beta**-3 * math.log(1 / beta) ** 4 * math.log(n)
    return upsilon / (constant * scale)


def gap_report(
    g: Graph,
    p: Partition,
    spec: Spectrum,
    conv: VolumeConvention | str = VolumeConvention.PAPER_LITERAL,
    C_T: float = 5.0,
    well_clustered_constant: float = 1.0,
    tol: float = 1e-9,
) -> GapReport:
    conv = VolumeConvention.parse(conv)
    k = p.k
    if k >= spec.n:
        raise SpectralError("need k < n for lambda_{k+1}")
    lam_k, lam_k1 = spec.lam(k), spec.lam(k + 1)
    if lam_k1 >= 1 - tol:
        raise SpectralError(f"lambda_{k + 1}={lam_k1:.6g} is 1: the graph has more than k components")
    rho = planted_rho_upper(g, p, conv)
    if rho == 0:
        raise SpectralError("planted partition has zero conductance; upsilon is undefined")
    gap = 1 - lam_k1
    ups = gap / rho
    beta = p.balance
    return GapReport(
        upsilon=ups,
        gap_score=gap_score(ups, k, beta, spec.n, well_clustered_constant) if beta < 1 else math.inf,
        T=rounds_for_gap(spec.n, gap, C_T),
        lambda_k=lam_k,
        lambda_k1=lam_k1,
        rho_upper=rho,
        beta=beta,
        k=k,
        n=spec.n,
        C_T=C_T,
        well_clustered_constant=well_clustered_constant,
        convention=conv.value,
        epsilon_formula=epsilon_formula(k, ups),
    )


def cheeger_check(spec: Spectrum, k: int, rho_exact: float, tol: float = 1e-9) -> CheckResult:
    lower = (1 - spec.lam(k)) / 2
    gap = 1 - spec.lam(k)
    ratio = rho_exact / math.sqrt(gap) if gap > tol else None
    return CheckResult(
        name=f"cheeger-lower k={k}",
        passed=lower <= rho_exact + tol,
        details={"lower": lower, "rho": rho_exact, "rho_over_sqrt_gap": ratio},
    )


# -- exports -----------------------------------------------------------------

def write_spectrum_csv(spec: Spectrum, path: str | Path) -> None:
    rows = ["index,eigenvalue"] + [f"{i + 1},{v:.12g}" for i, v in enumerate(spec.eigenvalues)]
    Path(path).write_text("\n".join(rows) + "\n")


def write_basis_csv(basis: ClusterBasis, good: GoodNodes, path: str | Path) -> None:
    mask = np.zeros(len(basis.alpha), dtype=bool)
    mask[good.good] = True
    rows = ["node,alpha,good"] + [f"{v},{a:.12g},{int(m)}" for v, (a, m) in enumerate(zip(basis.alpha, mask))]
    Path(path).write_text("\n".join(rows) + "\n")


def write_gap_report(report: GapReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
