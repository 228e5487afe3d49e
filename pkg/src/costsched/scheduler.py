"""User selection: geometry-based (GUS), full-CSI greedy (GWC) and random.

The GUS variants only ever see the visibility matrix ``V`` (users x
clusters), never a fading realization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator

GUS_THRESHOLD = "gus-threshold"
GUS_MINCORR = "gus-mincorr"
GWC = "gwc"
RS = "rs"
SCHEDULERS = (GUS_THRESHOLD, GUS_MINCORR, GWC, RS)


class VisibilityMatrix(np.ndarray):
    """Non-negative K x N_C matrix of geometry-derived user-cluster gains."""

    def __new__(cls, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("visibility matrix must be 2-D")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("visibility matrix entries must be finite and non-negative")
        return arr.view(cls)


@dataclass
class ScheduleResult:
    selected: list[int]
    method: str
    diagnostics: list[float] = field(default_factory=list)
    eps: float | None = None

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected ids must be unique")


def build_v_matrix(drop, a_vr: np.ndarray | None = None, a_c: np.ndarray | None = None) -> VisibilityMatrix:
    """``v = sqrt(L_p) * A_VR * sqrt(A_C)`` for every user/cluster pair.

    ``a_vr`` and ``a_c`` default to the drop's true gains; the robustness
    path passes perturbed ones.
    """
    g = drop.gains
    a_vr = g.a_vr if a_vr is None else a_vr
    a_c = g.a_c if a_c is None else a_c
    return VisibilityMatrix(np.sqrt(g.path_gain)[:, None] * a_vr * np.sqrt(a_c))


def active_clusters(row, eta: float = 0.01) -> set[int]:
    """Clusters holding at least ``eta`` of the row's total power."""
    p = np.asarray(row, dtype=float) ** 2
    total = p.sum()
    if total <= 0:
        return set()
    return set(np.flatnonzero(p >= eta * total).tolist())


def activity_sets(v, eta: float = 0.01) -> list[set[int]]:
    return [active_clusters(row, eta) for row in np.asarray(v)]


def common_cluster_count(m: int, n: int, sets) -> int:
    return len(sets[m] & sets[n])


def mean_common_clusters(selected, sets) -> float:
    sel = list(selected)
    if len(sel) < 2:
        return 0.0
    counts = [common_cluster_count(a, b, sets)
              for i, a in enumerate(sel) for b in sel[i + 1:]]
    return float(np.mean(counts))


def _cosines(v: np.ndarray, norms: np.ndarray, ref: int) -> np.ndarray:
    denom = norms * norms[ref]
    dots = np.abs(v @ v[ref])
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def gus_threshold(v: VisibilityMatrix, k_s: int, eps_h: float) -> ScheduleResult:
    """Greedy max-norm picks, pruning every user whose cosine with the latest pick is >= eps_h."""
    if not 0 < eps_h <= 1:
        raise ValueError("eps_h must lie in (0, 1]")
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    v = np.asarray(v, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    pool = np.ones(len(v), dtype=bool)
    selected, diag = [], []
    while len(selected) < k_s and pool.any():
        cand = np.flatnonzero(pool)
        pick = int(cand[np.argmax(norms[cand])])    # argmax returns the lowest id on ties
        selected.append(pick)
        diag.append(float(norms[pick]))
        pool[pick] = False
        pool &= _cosines(v, norms, pick) < eps_h
    return ScheduleResult(selected, GUS_THRESHOLD, diag, eps_h)


def gus_mincorr(v: VisibilityMatrix, k_s: int) -> ScheduleResult:
    """Max-norm first pick, then repeatedly the user least correlated with the latest pick."""
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    v = np.asarray(v, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    if len(v) == 0:
        return ScheduleResult([], GUS_MINCORR)
    pick = int(np.argmax(norms))
    selected, diag = [pick], [float(norms[pick])]
    pool = np.ones(len(v), dtype=bool)
    pool[pick] = False
    while len(selected) < k_s and pool.any():
        cand = np.flatnonzero(pool)
        cos = _cosines(v, norms, pick)[cand]
        pick = int(cand[np.argmin(cos)])
        selected.append(pick)
        diag.append(float(cos.min()))
        pool[pick] = False
    return ScheduleResult(selected, GUS_MINCORR, diag)


def semi_orthogonal(h: np.ndarray, k_s: int, eps_g: float, tol: float = 1e-10) -> ScheduleResult:
    """Semi-orthogonal greedy selection on full CSI.

    Each round picks the candidate with the largest component orthogonal to
    the span of the users already picked, then keeps only candidates whose
    normalized correlation with that component is below ``eps_g``.
    Candidates that lie (numerically) in the span are skipped.
    """
    h = np.asarray(h, dtype=complex)
    norms = np.linalg.norm(h, axis=0)
    pool = norms > 0
    basis = np.zeros((h.shape[0], 0), dtype=complex)
    selected, diag = [], []
    while len(selected) < k_s and pool.any():
        cand = np.flatnonzero(pool)
        resid = h[:, cand] - basis @ (basis.conj().T @ h[:, cand])
        rnorm = np.linalg.norm(resid, axis=0)
        usable = rnorm > tol * norms[cand]
        if not usable.any():
            break
        pool[cand[~usable]] = False
        best = int(np.argmax(np.where(usable, rnorm, -1.0)))
        pick = int(cand[best])
        g = resid[:, best] / rnorm[best]
        selected.append(pick)
        diag.append(float(rnorm[best]))
        pool[pick] = False
        basis = np.column_stack([basis, g])
        rest = np.flatnonzero(pool)
        corr = np.abs(g.conj() @ h[:, rest]) / norms[rest]
        pool[rest[corr >= eps_g]] = False
    return ScheduleResult(selected, GWC, diag, eps_g)


def gwc(h_full: np.ndarray, k_s: int, eps_g: float | None = None, grid=None,
        rate_fn=None) -> ScheduleResult:
    """Full-CSI greedy baseline.

    With a ``grid`` of thresholds and a ``rate_fn(h_selected) -> float``,
    every threshold is tried and the selection with the highest rate wins
    (ties keep the earliest grid value).  Otherwise ``eps_g`` is used as is.
    """
    if grid is None or rate_fn is None:
        if eps_g is None:
            raise ValueError("need eps_g or a (grid, rate_fn) pair")
        return semi_orthogonal(h_full, k_s, eps_g)
    best, best_rate = None, -np.inf
    for eps in grid:
        res = semi_orthogonal(h_full, k_s, eps)
        rate = rate_fn(h_full[:, res.selected]) if res.selected else 0.0
        if rate > best_rate:
            best, best_rate = res, rate
    return best


def random_selection(k: int, k_s: int, rng) -> ScheduleResult:
    if k_s > k:
        raise ValueError("cannot select more users than exist")
    gen = as_generator(rng)
    return ScheduleResult([int(i) for i in gen.choice(k, size=k_s, replace=False)], RS)


def estimation_load(method: str, m: int, k: int, k_s: int) -> int:
    """Channel coefficients the BS must estimate per scheduling interval."""
    if method == GWC:
        return m * k
    if method in (GUS_THRESHOLD, GUS_MINCORR, RS):
        return m * k_s
    raise ValueError(f"unknown scheduler {method!r}")
