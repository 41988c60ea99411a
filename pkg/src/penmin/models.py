"""Collections of linear projection models and their least-squares estimators.

A model is an orthogonal projection of R^n stored through an orthonormal
basis of its column space (memory O(n*dim) instead of O(n^2)); the dense
projector is only materialized on demand for small instances.  Regressogram
collections (piecewise-constant fits on contiguous blocks) are the built-in
generator; arbitrary orthonormal bases are accepted as well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._validate import as_float_vector

ORTHONORMALITY_TOL = 1e-10
SPAN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectionModel:
    """One candidate model: an orthogonal projection of R^n.

    Parameters
    ----------
    id : str
        Unique identifier within a collection.
    basis : np.ndarray, shape (n, dim)
        Matrix with orthonormal columns spanning the model.  The induced
        projector is ``basis @ basis.T``.  ``dim == 0`` (the null model)
        is allowed.
    kind : str
        Generator tag ("regressogram" or "custom"); drives JSON round-trips.
    params : dict
        Generator parameters (e.g. ``{"pieces": k}``).
    """

    id: str
    basis: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("model id must be a non-empty string")
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-d array of shape (n, dim)")
        n, d = b.shape
        if d > n:
            raise ValueError(f"model dimension {d} exceeds sample size {n}")
        if d > 0 and not np.all(np.isfinite(b)):
            raise ValueError("basis must contain only finite values")
        gram_err = np.max(np.abs(b.T @ b - np.eye(d)), initial=0.0)
        if gram_err > ORTHONORMALITY_TOL:
            raise ValueError(
                f"basis columns are not orthonormal (max deviation {gram_err:.2e}); "
                "use ProjectionModel.from_basis to re-orthonormalize"
            )
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_basis(cls, id: str, basis, kind: str = "custom", params: dict | None = None) -> "ProjectionModel":
        """Build a model from a (possibly non-orthonormal) full-rank basis.

        The columns are re-orthonormalized with a QR factorization; the span
        is unchanged.  Raises ``ValueError`` on rank deficiency.
        """
        b = np.asarray(basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-d array of shape (n, dim)")
        if b.shape[1] == 0:
            return cls(id, b, kind=kind, params=params or {})
        q, r = np.linalg.qr(b)
        diag = np.abs(np.diag(r))
        scale = max(np.max(np.abs(b)), 1.0)
        if np.any(diag <= 1e-12 * scale * b.shape[0]):
            raise ValueError("basis is rank deficient; cannot orthonormalize")
        return cls(id, q, kind=kind, params=params or {})

    @classmethod
    def null(cls, n: int, id: str = "null") -> "ProjectionModel":
        """The zero-dimensional model (projector 0)."""
        return cls(id, np.zeros((n, 0)), kind="null")

    def projector(self) -> np.ndarray:
        """Materialize the dense n x n projector (small instances only)."""
        return self.basis @ self.basis.T

    def project(self, y) -> np.ndarray:
        """Apply the projector to a length-n vector without forming it."""
        y = as_float_vector(y, self.n, "y")
        return self.basis @ (self.basis.T @ y)


@dataclass(frozen=True, eq=False)
class ModelCollection:
    """A finite family of projection models over a common sample size.

    ``nested_flag`` is computed at construction: it is true iff each model's
    column space contains the previous one's (checked exactly through block
    edges for regressograms, numerically otherwise).
    """

    n: int
    models: tuple[ProjectionModel, ...]
    nested_flag: bool = field(init=False)

    def __post_init__(self):
        models = tuple(self.models)
        if not models:
            raise ValueError("collection must contain at least one model")
        object.__setattr__(self, "models", models)
        if any(m.n != self.n for m in models):
            raise ValueError("all models must share the collection's sample size")
        ids = [m.id for m in models]
        if len(set(ids)) != len(ids):
            raise ValueError("model ids must be unique")
        object.__setattr__(self, "nested_flag", _compute_nested(models))

    def __iter__(self):
        return iter(self.models)

    def __len__(self):
        return len(self.models)

    def __getitem__(self, model_id: str) -> ProjectionModel:
        for m in self.models:
            if m.id == model_id:
                return m
        raise KeyError(model_id)

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.models]

    def dims(self) -> dict[str, int]:
        return {m.id: m.dim for m in self.models}


@dataclass(frozen=True)
class SignalSpec:
    """The true mean F of the observations Y = F + noise."""

    values: np.ndarray

    def __post_init__(self):
        v = as_float_vector(self.values, name="F")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


def _compute_nested(models: Sequence[ProjectionModel]) -> bool:
    if len(models) <= 1:
        return True
    if all(m.kind == "regressogram" for m in models):
        n = models[0].n
        edge_sets = [set(regressogram_edges(n, m.params["pieces"]).tolist()) for m in models]
        return all(edge_sets[i] <= edge_sets[i + 1] for i in range(len(models) - 1))
    for prev, nxt in zip(models, models[1:]):
        if prev.dim > nxt.dim:
            return False
        if prev.dim == 0:
            continue
        # span(prev) <= span(nxt) iff projecting prev's basis onto nxt leaves no residual
        resid = prev.basis - nxt.basis @ (nxt.basis.T @ prev.basis)
        if np.max(np.abs(resid)) > SPAN_TOL:
            return False
    return True


# ---------------------------------------------------------------------------
# Regressogram generator
# ---------------------------------------------------------------------------

def regressogram_id(pieces: int) -> str:
    return f"k{pieces}"


def regressogram_edges(n: int, pieces: int) -> np.ndarray:
    """0-based block edges: block j covers [edges[j], edges[j+1])."""
    if pieces < 1 or pieces > n:
        raise ValueError(f"piece count must be in [1, {n}], got {pieces}")
    j = np.arange(pieces + 1)
    return -((-j * n) // pieces)  # ceil(j*n/pieces)


def regressogram_basis(n: int, pieces: int) -> np.ndarray:
    edges = regressogram_edges(n, pieces)
    basis = np.zeros((n, pieces))
    for j in range(pieces):
        lo, hi = edges[j], edges[j + 1]
        basis[lo:hi, j] = 1.0 / math.sqrt(hi - lo)
    return basis


def regressogram_model(n: int, pieces: int) -> ProjectionModel:
    return ProjectionModel(
        regressogram_id(pieces),
        regressogram_basis(n, pieces),
        kind="regressogram",
        params={"pieces": int(pieces)},
    )


def regressogram_collection(n: int, piece_counts: Iterable[int]) -> ModelCollection:
    """Histogram-type models on contiguous blocks, one per piece count.

    Block j of the k-piece partition covers indices
    ``ceil((j-1)n/k) .. ceil(jn/k) - 1`` (0-based); the basis columns are the
    normalized block indicators, so the model dimension equals k.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = [int(k) for k in piece_counts]
    if not counts:
        raise ValueError("piece_counts must be non-empty")
    if any(k2 <= k1 for k1, k2 in zip(counts, counts[1:])):
        raise ValueError("piece_counts must be strictly increasing")
    return ModelCollection(n, tuple(regressogram_model(n, k) for k in counts))


def blockwise_project(y: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Project onto the block-indicator span: replace each block by its mean."""
    lens = edges[1:] - edges[:-1]
    cs = np.concatenate(([0.0], np.cumsum(y)))
    means = (cs[edges[1:]] - cs[edges[:-1]]) / lens
    return np.repeat(means, lens)


def regressogram_emp_risks(y, piece_counts: Iterable[int]) -> dict[str, float]:
    """Empirical risks of all regressogram fits in O(n + sum(k)) via cumsums.

    Matches ``fit(regressogram_model(n, k), y)[1]`` exactly up to rounding;
    usable far beyond the scale where dense bases are practical.
    """
    y = as_float_vector(y, name="y")
    n = y.size
    cs = np.concatenate(([0.0], np.cumsum(y)))
    total = float(y @ y)
    out = {}
    for k in piece_counts:
        e = regressogram_edges(n, k)
        bs = cs[e[1:]] - cs[e[:-1]]
        proj = float(np.sum(bs * bs / (e[1:] - e[:-1])))
        out[regressogram_id(k)] = max(total - proj, 0.0) / n
    return out


# ---------------------------------------------------------------------------
# Least-squares fits and approximation error
# ---------------------------------------------------------------------------

def fit(model: ProjectionModel, y) -> tuple[np.ndarray, float]:
    """Least-squares fit: returns (F_hat, empirical risk).

    ``F_hat`` is the projection of ``y`` onto the model; the empirical risk
    is ``||y - F_hat||^2 / n``.
    """
    y = as_float_vector(y, model.n, "y")
    f_hat = model.basis @ (model.basis.T @ y)
    resid = y - f_hat
    return f_hat, float(resid @ resid) / model.n


def emp_risks(collection: ModelCollection, y) -> dict[str, float]:
    """Empirical risk of every model in the collection."""
    y = as_float_vector(y, collection.n, "y")
    return {m.id: fit(m, y)[1] for m in collection}


def bias(model: ProjectionModel, f) -> float:
    """Approximation error ``||(I - Pi) F||^2 / n`` of the model at signal F."""
    if isinstance(f, SignalSpec):
        f = f.values
    f = as_float_vector(f, model.n, "F")
    resid = f - model.basis @ (model.basis.T @ f)
    return float(resid @ resid) / model.n


def bias_profile(dims: Mapping[str, int], biases: Mapping[str, float]) -> tuple[float, str, float]:
    """Reduce per-model biases to (B, m1, B').

    B is the minimal bias, m1 the model realizing it (ties: largest
    dimension, then smallest id), and B' the minimal bias among models with
    dimension at most dim(m1)/20 (``math.inf`` when that set is empty).
    """
    if set(dims) != set(biases) or not dims:
        raise ValueError("dims and biases must share a non-empty key set")
    m1 = min(dims, key=lambda i: (biases[i], -dims[i], i))
    b = float(biases[m1])
    cutoff = dims[m1] / 20.0
    small = [biases[i] for i in dims if dims[i] <= cutoff]
    b_prime = float(min(small)) if small else math.inf
    return b, m1, b_prime


def collection_bias_profile(collection: ModelCollection, f) -> tuple[float, str, float]:
    """(B, m1, B') for a collection: see :func:`bias_profile`."""
    biases = {m.id: bias(m, f) for m in collection}
    return bias_profile(collection.dims(), biases)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def collection_to_config(collection: ModelCollection) -> dict:
    """JSON-able description for generator-based collections."""
    models = []
    for m in collection:
        if m.kind not in ("regressogram", "null"):
            raise ValueError(
                f"model {m.id!r} has kind {m.kind!r}; "
                "use save_collection_binary for arbitrary bases"
            )
        models.append({"id": m.id, "dim": m.dim, "kind": m.kind, "params": dict(m.params)})
    return {"n": collection.n, "models": models}


def collection_from_config(config: Mapping) -> ModelCollection:
    n = int(config["n"])
    models = []
    for entry in config["models"]:
        kind = entry["kind"]
        if kind == "regressogram":
            m = regressogram_model(n, int(entry["params"]["pieces"]))
            m = ProjectionModel(entry["id"], m.basis, kind="regressogram", params=m.params)
        elif kind == "null":
            m = ProjectionModel.null(n, entry["id"])
        else:
            raise ValueError(f"unknown generator kind {kind!r}")
        if m.dim != int(entry["dim"]):
            raise ValueError(f"dim mismatch for model {entry['id']!r}")
        models.append(m)
    return ModelCollection(n, tuple(models))


def save_collection_binary(collection: ModelCollection, prefix) -> tuple[Path, Path]:
    """Write arbitrary bases as a column-major float64 blob plus JSON header."""
    prefix = Path(prefix)
    header = {"n": collection.n, "models": []}
    offset = 0
    with open(prefix.with_suffix(".bin"), "wb") as fh:
        for m in collection:
            blob = np.asfortranarray(m.basis).tobytes(order="F")
            fh.write(blob)
            header["models"].append({"id": m.id, "dim": m.dim, "offset": offset})
            offset += len(blob)
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2))
    return json_path, prefix.with_suffix(".bin")


def load_collection_binary(prefix) -> ModelCollection:
    prefix = Path(prefix)
    header = json.loads(prefix.with_suffix(".json").read_text())
    n = int(header["n"])
    raw = prefix.with_suffix(".bin").read_bytes()
    models = []
    for entry in header["models"]:
        d = int(entry["dim"])
        off = int(entry["offset"])
        flat = np.frombuffer(raw, dtype=np.float64, count=n * d, offset=off)
        basis = flat.reshape((n, d), order="F")
        models.append(ProjectionModel(entry["id"], basis))
    return ModelCollection(n, tuple(models))
