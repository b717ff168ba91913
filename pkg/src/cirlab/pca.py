"""Metric-matrix normalization, standardization, and principal components.

The pipeline mirrors the workload-characterization methodology: each metric
column is optionally divided row-wise by a cost column (the "reference
cycles" stand-in), standardized to zero mean and unit sample variance, and
decomposed into principal components. Scores are S = Y L with L the
orthonormal eigenvector matrix of the correlation matrix, so the loading
l_ij is the weight of metric i on component j.

The eigensolver is a cyclic Jacobi iteration: deterministic, dependency
free, and exact enough at this scale (off-diagonal Frobenius norm below
1e-12, at most 100 sweeps).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


class PcaError(Exception):
    pass


@dataclass(frozen=True)
class MetricMatrix:
    rows: tuple[str, ...]  # benchmark names
    cols: tuple[str, ...]  # metric names
    values: np.ndarray  # shape (N, K)
    provenance: tuple[str, ...] = ()  # per row: "interpreter" | "ingested"
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise PcaError("matrix shape does not match row/column names")
        if len(self.cols) < 2:
            raise PcaError("need at least two metric columns")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.cols.index(name)]

    def without_rows(self, names: set[str]) -> "MetricMatrix":
        keep = [i for i, r in enumerate(self.rows) if r not in names]
        prov = tuple(self.provenance[i] for i in keep) if self.provenance else ()
        return MetricMatrix(
            tuple(self.rows[i] for i in keep), self.cols, self.values[keep],
            prov, self.diagnostics,
        )


def read_metrics_csv(text: str, provenance: str = "ingested") -> MetricMatrix:
    """Ingest a metrics CSV: header `benchmark,<metric>...`, one row each.

    Scientific notation is accepted. Columns empty in every row are dropped
    with a diagnostic; rows with gaps in surviving columns are rejected.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[0] != "benchmark":
        raise PcaError('metrics CSV must start with a "benchmark" column')
    cols = header[1:]
    raw_rows = [r for r in reader if r]
    diagnostics: list[str] = []
    empty = [
        j for j in range(len(cols))
        if all(len(r) <= j + 1 or r[j + 1].strip() == "" for r in raw_rows)
    ]
    if empty:
        diagnostics.append(
            "dropped empty column(s): " + ", ".join(cols[j] for j in empty)
        )
    keep = [j for j in range(len(cols)) if j not in empty]
    names: list[str] = []
    data: list[list[float]] = []
    for r in raw_rows:
        vals = []
        ok = True
        for j in keep:
            cell = r[j + 1].strip() if len(r) > j + 1 else ""
            if cell == "":
                diagnostics.append(f"row {r[0]!r} rejected: missing {cols[j]!r}")
                ok = False
                break
            try:
                vals.append(float(cell))
            except ValueError:
                diagnostics.append(f"row {r[0]!r} rejected: bad value {cell!r} in {cols[j]!r}")
                ok = False
                break
        if ok:
            names.append(r[0])
            data.append(vals)
    return MetricMatrix(
        tuple(names), tuple(cols[j] for j in keep),
        np.array(data, dtype=float).reshape(len(names), len(keep)),
        tuple(provenance for _ in names), tuple(diagnostics),
    )


def normalize(m: MetricMatrix, refcol: str, skip: set[str] | None = None) -> MetricMatrix:
    """Divide every non-skipped column row-wise by `refcol`, then drop it.

    Rows whose reference value is zero or negative are rejected with a
    diagnostic; utilization-style columns (default {"cpu"}) pass through.
    """
    if skip is None:
        skip = {"cpu"}
    if refcol not in m.cols:
        raise PcaError(f"reference column {refcol!r} not present")
    ref = m.column(refcol)
    good = ref > 0
    diagnostics = list(m.diagnostics)
    for i in np.flatnonzero(~good):
        diagnostics.append(f"row {m.rows[i]!r} rejected: nonpositive {refcol}")
    out_cols = [c for c in m.cols if c != refcol]
    data = np.empty((int(good.sum()), len(out_cols)))
    rows = tuple(r for i, r in enumerate(m.rows) if good[i])
    prov = tuple(pv for i, pv in enumerate(m.provenance) if good[i]) if m.provenance else ()
    for j, c in enumerate(out_cols):
        col = m.column(c)[good]
        data[:, j] = col if c in skip else col / ref[good]
    return MetricMatrix(rows, tuple(out_cols), data, prov, tuple(diagnostics))


def standardize(m: MetricMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Y, means, stds): each column shifted to mean 0 and sample std 1."""
    means = m.values.mean(axis=0)
    stds = m.values.std(axis=0, ddof=1)
    flat = [m.cols[j] for j in np.flatnonzero(stds == 0)]
    if flat:
        raise PcaError("constant column(s): " + ", ".join(flat))
    return (m.values - means) / stds, means, stds


def _jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted. Raises if the
    off-diagonal Frobenius norm has not dropped below `tol` in time.
    """
    a = a.copy()
    k = a.shape[0]
    v = np.eye(k)

    def offdiag() -> float:
        off = a - np.diag(np.diag(a))
        return float(np.sqrt((off**2).sum()))

    for _ in range(max_sweeps):
        if offdiag() < tol:
            return np.diag(a).copy(), v
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    # rotation angle underflows; zero the entry directly
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = diff / (2 * apq)
                if abs(theta) > 1e100:
                    t = 1.0 / (2 * theta)
                elif theta != 0:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1))
                else:
                    t = 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                rot = np.eye(k)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    if offdiag() < tol:
        return np.diag(a).copy(), v
    raise PcaError(f"eigensolver did not converge (off-diagonal norm {offdiag():.3e})")


@dataclass(frozen=True)
class PcaModel:
    metrics: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    loadings: np.ndarray  # (K, K), columns are components
    eigenvalues: np.ndarray  # descending
    scores: np.ndarray  # (N, K)
    explained: np.ndarray  # eigenvalues / K

    @property
    def k(self) -> int:
        return len(self.metrics)


def pca_fit(y: np.ndarray, metrics: tuple[str, ...],
            means: np.ndarray | None = None, stds: np.ndarray | None = None) -> PcaModel:
    """Fit components to an already-standardized matrix Y."""
    n, k = y.shape
    if n < 2:
        raise PcaError("need at least two observations")
    corr = (y.T @ y) / (n - 1)
    eigvals, eigvecs = _jacobi_eigh(corr)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # sign convention: the largest-magnitude entry of each component is positive
    for j in range(k):
        col = eigvecs[:, j]
        lead = np.argmax(np.abs(col))
        if col[lead] < 0:
            eigvecs[:, j] = -col
    scores = y @ eigvecs
    return PcaModel(
        metrics,
        means if means is not None else np.zeros(k),
        stds if stds is not None else np.ones(k),
        eigvecs, eigvals, scores, eigvals / k,
    )


def fit_metrics(m: MetricMatrix, refcol: str | None = None,
                skip: set[str] | None = None) -> PcaModel:
    """Full pipeline: optional normalization, standardization, then PCA."""
    if refcol is not None:
        m = normalize(m, refcol, skip)
    y, means, stds = standardize(m)
    return pca_fit(y, m.cols, means, stds)


def top_components(model: PcaModel, j: int) -> list[list[tuple[str, float]]]:
    """Per-component (metric, signed loading), ordered by |loading| descending."""
    if not 1 <= j <= model.k:
        raise PcaError(f"component count {j} out of range 1..{model.k}")
    out = []
    for c in range(j):
        col = model.loadings[:, c]
        # magnitudes equal to 1e-12 count as ties, broken by metric name
        ranked = sorted(
            zip(model.metrics, col), key=lambda kv: (-round(abs(kv[1]), 12), kv[0])
        )
        out.append([(name, float(v)) for name, v in ranked])
    return out


def render_loadings_csv(model: PcaModel, j: int) -> str:
    """Component table layout: (metric, loading) column pairs per component."""
    tables = top_components(model, j)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([h for c in range(j) for h in (f"PC{c+1} metric", f"PC{c+1} loading")])
    for row in range(model.k):
        w.writerow([cell for c in range(j) for cell in
                    (tables[c][row][0], f"{tables[c][row][1]:+.4f}")])
    return buf.getvalue()


def render_scores_csv(model: PcaModel, rows: tuple[str, ...]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["benchmark"] + [f"PC{c+1}" for c in range(model.k)])
    for name, score in zip(rows, model.scores):
        w.writerow([name] + [f"{v:.6f}" for v in score])
    return buf.getvalue()


def render_variance_csv(model: PcaModel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "eigenvalue", "explained", "cumulative"])
    cum = 0.0
    for c in range(model.k):
        cum += float(model.explained[c])
        w.writerow([f"PC{c+1}", f"{model.eigenvalues[c]:.9f}",
                    f"{model.explained[c]:.6f}", f"{cum:.6f}"])
    return buf.getvalue()
