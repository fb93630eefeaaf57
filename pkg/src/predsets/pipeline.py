"""Areal workflow: aggregate records, pick neighbors, fit priors, compare sets."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import direct_set, indirect_set
from .eb import OptimizerConfig, estimate_prior_for_area

__all__ = [
    "InputError",
    "ObservationRecord",
    "ArealDataset",
    "NeighborGraph",
    "AreaReport",
    "read_records",
    "read_centroids",
    "read_adjacency",
    "read_gamma",
    "ingest_records",
    "knn_neighbors",
    "analyze_area",
    "analyze_all",
    "export_reports",
    "load_reports",
    "RATIOS_HEADER",
]

RATIOS_HEADER = ("area_id", "N", "card_direct", "card_indirect", "ratio")


class InputError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class ObservationRecord:
    area_id: str
    species_id: str
    count: int


@dataclass
class ArealDataset:
    """J areas by K species count matrix with optional J x 2 centroids."""

    areas: list[str]
    species: list[str]
    counts: np.ndarray
    centroids: np.ndarray | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.areas), len(self.species)):
            raise InputError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.areas)} areas x {len(self.species)} species"
            )
        if np.any(self.counts < 0):
            raise InputError("counts must be non-negative")
        if len(set(self.areas)) != len(self.areas) or len(set(self.species)) != len(self.species):
            raise InputError("area and species identifiers must be unique")
        if self.centroids is not None:
            self.centroids = np.asarray(self.centroids, dtype=float)
            if self.centroids.shape != (len(self.areas), 2):
                raise InputError("centroids must be a J x 2 array")

    @property
    def N(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def area_index(self, area_id: str) -> int:
        try:
            return self.areas.index(area_id)
        except ValueError:
            raise InputError(f"unknown area {area_id!r}") from None


@dataclass
class NeighborGraph:
    """Per-area lists of neighbor indices into ``ArealDataset.areas``."""

    neighbors: list[list[int]]

    def __post_init__(self):
        for i, nb in enumerate(self.neighbors):
            if i in nb:
                raise InputError(f"area {i} lists itself as a neighbor")

    def __getitem__(self, i):
        return self.neighbors[i]

    def __len__(self):
        return len(self.neighbors)


@dataclass
class AreaReport:
    area_id: str
    N: int
    direct_included: list[str]
    indirect_included: list[str]
    cardinality_direct: int
    cardinality_indirect: int
    ratio: float
    gamma: list[float]
    neighbors: list[str]
    converged: bool
    fallback: bool
    fit_iterations: int
    fit_grad_norm: float
    fit_loglik: float
    fit_message: str
    disagreements: list[dict] = field(default_factory=list)

    @property
    def log_N(self) -> float:
        return math.log(self.N) if self.N > 0 else float("-inf")

    @property
    def gamma_summary(self) -> list[float]:
        return [round(g, 2) for g in self.gamma]


# -- input ----------------------------------------------------------------------


def _read_table(path, header: tuple[str, ...]):
    """Yield (line_number, row) for a comma-separated file with a fixed header."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise InputError(f"{path}: expected header {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: row {reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def read_records(path) -> list[ObservationRecord]:
    """Read ``area_id,species_id,count`` rows.

    Row numbers in error messages are file line numbers (the header is line 1).
    """
    out = []
    for line, (area, species, count) in _read_table(path, ("area_id", "species_id", "count")):
        try:
            n = int(count)
        except ValueError:
            raise InputError(f"{path}: row {line}: count {count!r} is not an integer") from None
        out.append((line, ObservationRecord(area, species, n)))
    return _checked(out)


def _checked(numbered):
    rows = []
    for line, rec in numbered:
        if not rec.area_id:
            raise InputError(f"row {line}: empty area_id")
        if not rec.species_id:
            raise InputError(f"row {line}: empty species_id")
        if rec.count < 0:
            raise InputError(f"row {line}: negative count {rec.count}")
        rows.append(rec)
    return rows


def ingest_records(rows) -> ArealDataset:
    """Sum counts per (area, species) into a dense matrix.

    Areas and species are sorted lexicographically.  ``rows`` may hold
    :class:`ObservationRecord` objects or ``(area, species, count)`` tuples;
    row numbers in errors are 1-based positions in ``rows``.
    """
    numbered = []
    for i, r in enumerate(rows, start=1):
        if not isinstance(r, ObservationRecord):
            try:
                area, species, count = r
            except (TypeError, ValueError):
                raise InputError(f"row {i}: expected (area_id, species_id, count)") from None
            if not isinstance(count, (int, np.integer)) or isinstance(count, bool):
                raise InputError(f"row {i}: count {count!r} is not an integer")
            r = ObservationRecord(str(area), str(species), int(count))
        numbered.append((i, r))
    if not numbered:
        raise InputError("no observation records")
    rows = _checked(numbered)
    areas = sorted({r.area_id for r in rows})
    species = sorted({r.species_id for r in rows})
    a_idx = {a: i for i, a in enumerate(areas)}
    s_idx = {s: i for i, s in enumerate(species)}
    counts = np.zeros((len(areas), len(species)), dtype=np.int64)
    for r in rows:
        counts[a_idx[r.area_id], s_idx[r.species_id]] += r.count
    return ArealDataset(areas=areas, species=species, counts=counts)


def read_centroids(path, dataset: ArealDataset) -> ArealDataset:
    """Attach ``area_id,x,y`` centroids; every area in the dataset needs one."""
    coords = {}
    for line, (area, x, y) in _read_table(path, ("area_id", "x", "y")):
        try:
            coords[area] = (float(x), float(y))
        except ValueError:
            raise InputError(f"{path}: row {line}: non-numeric coordinate") from None
        if not all(map(math.isfinite, coords[area])):
            raise InputError(f"{path}: row {line}: non-finite coordinate")
    missing = [a for a in dataset.areas if a not in coords]
    if missing:
        raise InputError(f"{path}: no centroid for area {missing[0]!r}")
    return ArealDataset(
        areas=dataset.areas,
        species=dataset.species,
        counts=dataset.counts,
        centroids=np.array([coords[a] for a in dataset.areas]),
    )


def read_adjacency(path, dataset: ArealDataset) -> NeighborGraph:
    """Neighbor lists from ``area_id,neighbor_id`` pairs (directed, as listed)."""
    index = {a: i for i, a in enumerate(dataset.areas)}
    lists: list[list[int]] = [[] for _ in dataset.areas]
    for line, (area, nb) in _read_table(path, ("area_id", "neighbor_id")):
        for name in (area, nb):
            if name not in index:
                raise InputError(f"{path}: row {line}: unknown area {name!r}")
        if area == nb:
            raise InputError(f"{path}: row {line}: area {area!r} listed as its own neighbor")
        if index[nb] not in lists[index[area]]:
            lists[index[area]].append(index[nb])
    return NeighborGraph([sorted(nb) for nb in lists])


def read_gamma(path, species: list[str]) -> np.ndarray:
    """Read ``species_id,gamma`` rows into a vector aligned with ``species``."""
    values = {}
    for line, (sp, g) in _read_table(path, ("species_id", "gamma")):
        try:
            values[sp] = float(g)
        except ValueError:
            raise InputError(f"{path}: row {line}: gamma {g!r} is not a number") from None
        if not (math.isfinite(values[sp]) and values[sp] >= 0):
            raise InputError(f"{path}: row {line}: gamma must be finite and non-negative")
    unknown = sorted(set(values) - set(species))
    if unknown:
        raise InputError(f"{path}: unknown species {unknown[0]!r}")
    # species not listed get no prior mass
    return np.array([values.get(s, 0.0) for s in species])


# -- neighbors --------------------------------------------------------------------


def knn_neighbors(dataset: ArealDataset, k: int = 5) -> NeighborGraph:
    """The ``k`` areas closest by Euclidean centroid distance, self excluded.

    Equal distances are broken by area order (areas are sorted by id).
    """
    if dataset.centroids is None:
        raise InputError("k-nearest neighbors need centroids")
    J = len(dataset.areas)
    if not 1 <= k < J:
        raise InputError(f"k must satisfy 1 <= k < {J}, got {k}")
    c = dataset.centroids
    dist = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    idx = np.arange(J)
    out = []
    for i in range(J):
        others = idx[idx != i]
        # lexsort: last key is primary
        order = np.lexsort((others, dist[i, others]))
        out.append([int(j) for j in others[order[:k]]])
    return NeighborGraph(out)


# -- analysis -----------------------------------------------------------------------


def _pct(count, total):
    return 100.0 * count / total if total > 0 else 0.0


def analyze_area(
    dataset: ArealDataset,
    graph,
    area_index: int,
    alpha: float = 0.05,
    config: OptimizerConfig | None = None,
    uniform_prior: float | None = None,
) -> AreaReport:
    """Direct and indirect sets for one area; the prior comes from its neighbors only.

    With ``uniform_prior=c`` no prior is fitted and gamma is ``c`` everywhere.
    If the fit does not converge the indirect set falls back to the direct
    set and the report is flagged.
    """
    x = dataset.counts[area_index]
    N = int(x.sum())
    nbrs = list(getattr(graph, "neighbors", graph)[area_index])
    direct = direct_set(x, alpha)

    if uniform_prior is not None:
        gamma = np.full(len(dataset.species), float(uniform_prior))
        converged, iterations, grad_norm, loglik, message = True, 0, 0.0, float("nan"), "uniform prior override"
    else:
        fit = estimate_prior_for_area(area_index, dataset, graph, config)
        gamma = fit.gamma
        converged, iterations, grad_norm, loglik, message = (
            fit.converged, fit.iterations, fit.grad_norm, fit.loglik, fit.message,
        )

    fallback = not converged
    indirect = direct if fallback else indirect_set(x, gamma, alpha)

    species = dataset.species
    disagreements = []
    for k in sorted(direct.included ^ indirect.included):
        disagreements.append(
            {
                "species_id": species[k],
                "in_direct": k in direct.included,
                "in_indirect": k in indirect.included,
                "count": int(x[k]),
                "own_pct": _pct(int(x[k]), N),
                "neighbor_pct": {
                    dataset.areas[j]: _pct(int(dataset.counts[j, k]), int(dataset.counts[j].sum())) for j in nbrs
                },
                "gamma": float(gamma[k]),
            }
        )

    return AreaReport(
        area_id=dataset.areas[area_index],
        N=N,
        direct_included=[species[k] for k in sorted(direct.included)],
        indirect_included=[species[k] for k in sorted(indirect.included)],
        cardinality_direct=direct.cardinality,
        cardinality_indirect=indirect.cardinality,
        ratio=indirect.cardinality / direct.cardinality,
        gamma=[float(g) for g in gamma],
        neighbors=[dataset.areas[j] for j in nbrs],
        converged=bool(converged),
        fallback=fallback,
        fit_iterations=int(iterations),
        fit_grad_norm=float(grad_norm),
        fit_loglik=float(loglik),
        fit_message=message,
        disagreements=disagreements,
    )


def analyze_all(
    dataset: ArealDataset,
    graph,
    alpha: float = 0.05,
    config: OptimizerConfig | None = None,
    uniform_prior: float | None = None,
) -> list[AreaReport]:
    """One :class:`AreaReport` per area, in dataset order."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if len(getattr(graph, "neighbors", graph)) != len(dataset.areas):
        raise InputError("neighbor graph does not match the dataset")
    return [
        analyze_area(dataset, graph, j, alpha=alpha, config=config, uniform_prior=uniform_prior)
        for j in range(len(dataset.areas))
    ]


# -- output -------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _json_float(v):
    # JSON has no inf/nan; use null so the file stays standard
    return v if math.isfinite(v) else None


def _report_to_json(r: AreaReport) -> dict:
    d = asdict(r)
    d["fit_loglik"] = _json_float(r.fit_loglik)
    d["log_N"] = _json_float(r.log_N)
    return d


def export_reports(reports: list[AreaReport], out_dir) -> dict[str, Path]:
    """Write ``ratios.csv``, ``sample_sizes.csv``, ``disagreements.csv`` and ``reports.json``.

    Output bytes depend only on ``reports``.
    """
    if not reports:
        raise ValueError("no reports to export")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    paths = {
        "ratios": out / "ratios.csv",
        "sample_sizes": out / "sample_sizes.csv",
        "disagreements": out / "disagreements.csv",
        "reports": out / "reports.json",
    }
    try:
        with paths["ratios"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RATIOS_HEADER)
            for r in reports:
                w.writerow([r.area_id, r.N, r.cardinality_direct, r.cardinality_indirect, _fmt(r.ratio)])

        with paths["sample_sizes"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["area_id", "N", "log_N"])
            for r in reports:
                w.writerow([r.area_id, r.N, _fmt(r.log_N) if r.N > 0 else ""])

        with paths["disagreements"].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["area_id", "species_id", "set", "own_pct", "neighbor_id", "neighbor_pct", "gamma"])
            for r in reports:
                for d in r.disagreements:
                    which = "direct" if d["in_direct"] else "indirect"
                    for nb, pct in d["neighbor_pct"].items():
                        w.writerow(
                            [r.area_id, d["species_id"], which, f"{d['own_pct']:.2f}", nb, f"{pct:.2f}", f"{d['gamma']:.2f}"]
                        )

        with paths["reports"].open("w", encoding="utf-8") as fh:
            json.dump([_report_to_json(r) for r in reports], fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror}") from None
    return paths


def load_reports(path) -> list[AreaReport]:
    """Parse ``reports.json`` back into :class:`AreaReport` objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    out = []
    for d in raw:
        d = dict(d)
        d.pop("log_N", None)
        if d["fit_loglik"] is None:
            d["fit_loglik"] = float("nan")
        out.append(AreaReport(**d))
    return out
