"""Experimental data containers, CSV loading, and the interference network."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class DataError(ValueError):
    """Raised when input data violates the experiment-data invariants."""


class Adjacency:
    """Undirected simple graph over ``n`` units, stored as a sorted edge set.

    Each edge is kept once as ``(min(i, j), max(i, j))``. A CSR matrix is built
    lazily for computing neighbourhood exposures.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        self.n = int(n)
        cleaned = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise DataError(f"self-loop at unit {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DataError(f"edge ({i}, {j}) index out of range for n={self.n}")
            cleaned.add((min(i, j), max(i, j)))
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(cleaned))
        self._csr = None

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return isinstance(other, Adjacency) and self.n == other.n and self.edges == other.edges

    def __repr__(self):
        return f"Adjacency(n={self.n}, edges={len(self.edges)})"

    def __getstate__(self):
        return {"n": self.n, "edges": self.edges}

    def __setstate__(self, state):
        self.n = state["n"]
        self.edges = state["edges"]
        self._csr = None

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._csr is None:
            if self.edges:
                e = np.asarray(self.edges, dtype=np.int64)
                rows = np.concatenate([e[:, 0], e[:, 1]])
                cols = np.concatenate([e[:, 1], e[:, 0]])
            else:
                rows = cols = np.empty(0, dtype=np.int64)
            data = np.ones(rows.size)
            self._csr = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def dense(self) -> np.ndarray:
        return self.matrix.toarray().astype(np.int8)

    def neighbors(self, i: int) -> np.ndarray:
        m = self.matrix
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def exposure(self, assignment) -> np.ndarray:
        """Count of treated neighbours for every unit."""
        z = np.asarray(assignment, dtype=float)
        return np.asarray(self.matrix @ z).ravel()

    @classmethod
    def from_clusters(cls, cluster_ids) -> "Adjacency":
        """Complete graph within each cluster, nothing across clusters."""
        cluster_ids = np.asarray(cluster_ids)
        edges = []
        for c in np.unique(cluster_ids):
            members = np.flatnonzero(cluster_ids == c)
            for a in range(members.size):
                for b in range(a + 1, members.size):
                    edges.append((members[a], members[b]))
        return cls(cluster_ids.size, edges)


@dataclass(frozen=True, eq=False)
class ExperimentData:
    """Observed outcomes, binary treatments, covariates, and optional structure."""

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray
    cluster_ids: np.ndarray | None = None
    adjacency: Adjacency | None = None
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.outcomes, dtype=float).reshape(-1)
        n = y.size
        z_raw = np.asarray(self.treatments).reshape(-1)
        X = np.array(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(n, -1) if n else X.reshape(0, 0)
        if n < 2:
            raise DataError("need at least 2 units")
        if z_raw.size != n or X.shape[0] != n:
            raise DataError(
                f"length mismatch: outcomes {n}, treatments {z_raw.size}, covariates {X.shape[0]}"
            )
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
            raise DataError("non-finite value in outcomes or covariates")
        try:
            z_float = z_raw.astype(float)
        except (TypeError, ValueError) as exc:
            raise DataError("non-binary treatment") from exc
        if not np.all(np.isin(z_float, (0.0, 1.0))):
            raise DataError("non-binary treatment")
        z = z_float.astype(np.int8)
        clusters = None
        if self.cluster_ids is not None:
            clusters = np.asarray(self.cluster_ids)
            if clusters.size != n:
                raise DataError("cluster_ids length mismatch")
            if not np.issubdtype(clusters.dtype, np.integer):
                as_float = clusters.astype(float)
                if not np.all(np.isfinite(as_float)) or np.any(as_float != np.round(as_float)):
                    raise DataError("cluster ids must be integers")
                clusters = as_float.astype(np.int64)
            clusters = clusters.astype(np.int64)
        if self.adjacency is not None and self.adjacency.n != n:
            raise DataError("adjacency size does not match number of units")
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("covariate_names length mismatch")
        for arr in (y, z, X):
            arr.setflags(write=False)
        if clusters is not None:
            clusters.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "treatments", z)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "cluster_ids", clusters)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.outcomes.size

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def replace(self, **changes) -> "ExperimentData":
        fields = dict(
            outcomes=self.outcomes,
            treatments=self.treatments,
            covariates=self.covariates,
            cluster_ids=self.cluster_ids,
            adjacency=self.adjacency,
            covariate_names=self.covariate_names,
        )
        fields.update(changes)
        if "covariates" in changes and "covariate_names" not in changes:
            fields["covariate_names"] = ()
        return ExperimentData(**fields)

    def equals(self, other: "ExperimentData") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            same(self.outcomes, other.outcomes)
            and same(self.treatments, other.treatments)
            and same(self.covariates, other.covariates)
            and same(self.cluster_ids, other.cluster_ids)
            and self.covariate_names == other.covariate_names
            and self.adjacency == other.adjacency
        )


@dataclass(frozen=True)
class Schema:
    """Mapping from column names to data roles."""

    outcome: str
    treatment: str
    covariates: tuple[str, ...] = ()
    cluster: str | None = None

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Schema":
        return cls(
            outcome=mapping["outcome"],
            treatment=mapping["treatment"],
            covariates=tuple(mapping.get("covariates", ())),
            cluster=mapping.get("cluster"),
        )


def _parse_float(cell: str, column: str, row: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell {cell!r} in column {column!r}, row {row}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {cell!r} in column {column!r}, row {row}")
    return value


def load_csv(path, schema: Schema | Mapping, adjacency: Adjacency | None = None) -> ExperimentData:
    """Read a header-row CSV into :class:`ExperimentData`, preserving row order."""
    if not isinstance(schema, Schema):
        schema = Schema.from_mapping(schema)
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"empty file: {path} has no data rows")

    wanted = [schema.outcome, schema.treatment, *schema.covariates]
    if schema.cluster is not None:
        wanted.append(schema.cluster)
    col = {}
    for name in wanted:
        if name not in header:
            raise DataError(f"missing column {name!r}")
        col[name] = header.index(name)

    def column(name):
        j = col[name]
        out = []
        for r, row in enumerate(rows, start=2):
            if j >= len(row):
                raise DataError(f"missing cell in column {name!r}, row {r}")
            out.append(_parse_float(row[j].strip(), name, r))
        return np.array(out)

    y = column(schema.outcome)
    z = column(schema.treatment)
    if not np.all(np.isin(z, (0.0, 1.0))):
        bad = z[~np.isin(z, (0.0, 1.0))][0]
        raise DataError(f"non-binary treatment value {bad:g}")
    n = y.size
    X = np.column_stack([column(c) for c in schema.covariates]) if schema.covariates else np.empty((n, 0))
    clusters = column(schema.cluster) if schema.cluster is not None else None
    return ExperimentData(
        outcomes=y,
        treatments=z,
        covariates=X,
        cluster_ids=clusters,
        adjacency=adjacency,
        covariate_names=tuple(schema.covariates),
    )


def write_csv(data: ExperimentData, path, schema: Schema | None = None) -> Schema:
    """Write ``data`` as CSV; returns the schema that reads it back."""
    if schema is None:
        schema = Schema(
            outcome="y",
            treatment="z",
            covariates=data.covariate_names,
            cluster="cluster" if data.cluster_ids is not None else None,
        )
    header = [schema.outcome, schema.treatment, *schema.covariates]
    if schema.cluster is not None:
        header.append(schema.cluster)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n):
            row = [repr(float(data.outcomes[i])), str(int(data.treatments[i]))]
            row += [repr(float(v)) for v in data.covariates[i]]
            if schema.cluster is not None:
                row.append(str(int(data.cluster_ids[i])))
            w.writerow(row)
    return schema


def load_edges(path, n: int, index_base: int = 0) -> Adjacency:
    """Read an undirected edge list (two integer columns, optional header)."""
    if index_base not in (0, 1):
        raise ValueError("index_base must be 0 or 1")
    edges = []
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"edge row {lineno} needs two columns")
            try:
                i, j = int(row[0]), int(row[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"non-integer edge at row {lineno}: {row!r}") from None
            edges.append((i - index_base, j - index_base))
    return Adjacency(n, edges)


def write_edges(adjacency: Adjacency, path, index_base: int = 0) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j"])
        for i, j in adjacency.edges:
            w.writerow([i + index_base, j + index_base])


def neighborhood_treatment(adjacency: Adjacency, assignment: Sequence[int]) -> np.ndarray:
    """Indicator that a unit has at least one treated neighbour."""
    return (adjacency.exposure(assignment) > 0).astype(np.int8)
