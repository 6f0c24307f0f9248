"""Typed containers for labelled representations plus loading, binning, splits.

A representation set pairs an N x m matrix of real-valued neuron activations
("latents") with an N x n matrix of integer factor labels described by a
factor schema. The on-disk form is a CSV with header z0..z{m-1},g0..g{n-1}
next to a JSON schema sidecar {"factors": [{"name": ..., "cardinality": ...}]}.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataIOError,
    HeaderMismatchError,
    LabelOutOfRangeError,
    MalformedCsvError,
    NonFiniteLatentError,
    SchemaError,
    SplitError,
    ValidationError,
)
from .util import atomic_write_text

SCHEMA_VERSION = 1

QUANTILE = "quantile"
EQUAL_WIDTH = "equal_width"
BIN_STRATEGIES = (QUANTILE, EQUAL_WIDTH)

DEFAULT_BINS = 20


@dataclass(frozen=True)
class FactorSchema:
    """Ordered list of named discrete generative factors.

    Args:
        names: one unique name per factor.
        cardinalities: number of classes per factor, each >= 2.
    """

    names: tuple[str, ...]
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.cardinalities):
            raise SchemaError("names and cardinalities must have equal length")
        if len(self.names) == 0:
            raise SchemaError("schema must declare at least one factor")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"factor names must be unique, got {list(self.names)}")
        for name, k in zip(self.names, self.cardinalities):
            if not isinstance(k, int) or isinstance(k, bool) or k < 2:
                raise SchemaError(f"factor {name!r}: cardinality must be an int >= 2, got {k!r}")

    @property
    def n_factors(self) -> int:
        return len(self.names)

    def index_of(self, factor: int | str) -> int:
        """Resolve a factor given by name or index to its index."""
        if isinstance(factor, str):
            try:
                return self.names.index(factor)
            except ValueError:
                raise SchemaError(f"unknown factor name {factor!r}") from None
        idx = int(factor)
        if not 0 <= idx < self.n_factors:
            raise SchemaError(f"factor index {idx} out of range for {self.n_factors} factors")
        return idx

    def to_json_dict(self) -> dict:
        return {
            "factors": [
                {"name": name, "cardinality": k}
                for name, k in zip(self.names, self.cardinalities)
            ]
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "FactorSchema":
        if not isinstance(payload, dict) or "factors" not in payload:
            raise SchemaError('schema JSON must be an object with a "factors" list')
        factors = payload["factors"]
        if not isinstance(factors, list) or not factors:
            raise SchemaError('"factors" must be a non-empty list')
        names, cards = [], []
        for i, entry in enumerate(factors):
            if not isinstance(entry, dict) or "name" not in entry or "cardinality" not in entry:
                raise SchemaError(f'factor {i}: each entry needs "name" and "cardinality"')
            names.append(str(entry["name"]))
            card = entry["cardinality"]
            if not isinstance(card, int) or isinstance(card, bool):
                raise SchemaError(f"factor {entry['name']!r}: cardinality must be an integer")
            cards.append(card)
        return cls(tuple(names), tuple(cards))


@dataclass(frozen=True)
class RepresentationSet:
    """Immutable (latents, labels, schema) triple with shape/range guarantees.

    Invariants enforced at construction: latents is N x m float64 and finite;
    labels is N x n integer with column j in [0, cardinality_j); m >= n; N >= 1.
    """

    latents: np.ndarray
    labels: np.ndarray
    schema: FactorSchema

    def __post_init__(self):
        latents = np.asarray(self.latents, dtype=np.float64)
        labels = np.asarray(self.labels)
        if latents.ndim != 2 or labels.ndim != 2:
            raise ValidationError("latents and labels must both be 2-D arrays")
        if latents.shape[0] != labels.shape[0]:
            raise ValidationError(
                f"row mismatch: {latents.shape[0]} latent rows vs {labels.shape[0]} label rows"
            )
        if latents.shape[0] < 1:
            raise ValidationError("representation set must contain at least one row")
        if labels.shape[1] != self.schema.n_factors:
            raise ValidationError(
                f"label columns ({labels.shape[1]}) must match schema factors ({self.schema.n_factors})"
            )
        if latents.shape[1] < labels.shape[1]:
            raise ValidationError(
                f"need at least as many neurons as factors: m={latents.shape[1]} < n={labels.shape[1]}"
            )
        if not np.all(np.isfinite(latents)):
            row, col = np.argwhere(~np.isfinite(latents))[0]
            raise NonFiniteLatentError(int(row), f"z{col}", float(latents[row, col]))
        if not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise ValidationError("labels must be integers")
            labels = as_int
        else:
            labels = labels.astype(np.int64)
        for j, (name, k) in enumerate(zip(self.schema.names, self.schema.cardinalities)):
            col = labels[:, j]
            bad = np.where((col < 0) | (col >= k))[0]
            if bad.size:
                raise LabelOutOfRangeError(int(bad[0]), f"g{j}", int(col[bad[0]]), name, k)
        latents = latents.copy()
        labels = labels.copy()
        latents.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "latents", latents)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.latents.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.latents.shape[1]

    @property
    def n_factors(self) -> int:
        return self.schema.n_factors

    def subset(self, indices: np.ndarray) -> "RepresentationSet":
        """Row subset as a new set (indices kept in the given order)."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise ValidationError("cannot build an empty representation subset")
        return RepresentationSet(self.latents[indices], self.labels[indices], self.schema)


@dataclass(frozen=True)
class DiscretizedNeuron:
    """Result of binning one neuron.

    Attributes:
        bins: per-row bin index in [0, n_bins).
        boundaries: sorted upper-edge thresholds between consecutive bins
            (length = effective bins - 1); a value equal to a boundary falls
            in the lower bin.
        strategy: "quantile" or "equal_width".
        requested_bins: the B that was asked for.
        degenerate: True when the values collapsed into a single bin.
        level_mapped: True when the values had <= B distinct levels and were
            mapped bijectively, sorted level -> bin index.
    """

    bins: np.ndarray
    boundaries: np.ndarray
    strategy: str
    requested_bins: int
    degenerate: bool = False
    level_mapped: bool = False

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) + 1


@dataclass(frozen=True)
class SplitSpec:
    """Declarative train/test split.

    kind="random": test set is floor(N * test_fraction) rows drawn by the
    seeded RNG. kind="cg_exclusion": the test set is exactly the rows where
    factor_a == value_a and factor_b == value_b.
    """

    kind: str
    test_fraction: float | None = None
    seed: int | None = None
    factor_a: int | str | None = None
    value_a: int | None = None
    factor_b: int | str | None = None
    value_b: int | None = None

    def __post_init__(self):
        if self.kind == "random":
            if self.test_fraction is None or not (0.0 < float(self.test_fraction) < 1.0):
                raise SplitError(f"random split needs test_fraction in (0, 1), got {self.test_fraction!r}")
            if self.seed is None:
                raise SplitError("random split needs a seed")
        elif self.kind == "cg_exclusion":
            missing = [f for f in ("factor_a", "value_a", "factor_b", "value_b") if getattr(self, f) is None]
            if missing:
                raise SplitError(f"cg_exclusion split is missing {missing}")
        else:
            raise SplitError(f"unknown split kind {self.kind!r}")


def load_schema(schema_path: str | Path) -> FactorSchema:
    """Read a factor schema JSON sidecar."""
    schema_path = Path(schema_path)
    try:
        text = schema_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read schema file {schema_path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {schema_path} is not valid JSON: {exc}") from exc
    return FactorSchema.from_json_dict(payload)


def write_schema(schema: FactorSchema, schema_path: str | Path) -> None:
    atomic_write_text(Path(schema_path), json.dumps(schema.to_json_dict(), indent=2) + "\n")


def expected_header(n_neurons: int, n_factors: int) -> list[str]:
    return [f"z{i}" for i in range(n_neurons)] + [f"g{j}" for j in range(n_factors)]


def _parse_header(header: list[str], n_factors: int) -> int:
    """Validate the z/g header layout and return the neuron count."""
    stripped = [h.strip() for h in header]
    n_g = sum(1 for h in stripped if h.startswith("g"))
    n_z = len(stripped) - n_g
    if n_z < 1:
        raise HeaderMismatchError("header has no z columns", line=1)
    expected = expected_header(n_z, n_g)
    if stripped != expected:
        raise HeaderMismatchError(
            f"expected columns {expected}, got {stripped}", line=1
        )
    if n_g != n_factors:
        raise HeaderMismatchError(
            f"header has {n_g} label columns but schema declares {n_factors} factors", line=1
        )
    return n_z


def load_representation_set(data_path: str | Path, schema_path: str | Path) -> RepresentationSet:
    """Load a CSV + schema sidecar pair into a validated RepresentationSet.

    Raises distinct errors naming the offending row/column: header mismatch,
    ragged or unparseable rows, out-of-range labels, non-finite latents.
    """
    schema = load_schema(schema_path)
    data_path = Path(data_path)
    try:
        text = data_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read data file {data_path}: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedCsvError("file is empty", line=1) from None
    n_z = _parse_header(header, schema.n_factors)
    n_cols = n_z + schema.n_factors

    latent_rows: list[list[float]] = []
    label_rows: list[list[int]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n_cols:
            raise MalformedCsvError(
                f"expected {n_cols} fields, got {len(row)}", line=line_no
            )
        latents = []
        for i in range(n_z):
            field_name = f"z{i}"
            try:
                value = float(row[i])
            except ValueError:
                raise MalformedCsvError(
                    f"cannot parse latent value {row[i]!r}", line=line_no, column=field_name
                ) from None
            if not math.isfinite(value):
                raise NonFiniteLatentError(line_no, field_name, row[i])
            latents.append(value)
        labels = []
        for j in range(schema.n_factors):
            field_name = f"g{j}"
            raw = row[n_z + j].strip()
            try:
                value = int(raw)
            except ValueError:
                raise MalformedCsvError(
                    f"cannot parse label value {raw!r}", line=line_no, column=field_name
                ) from None
            k = schema.cardinalities[j]
            if not 0 <= value < k:
                raise LabelOutOfRangeError(line_no, field_name, value, schema.names[j], k)
            labels.append(value)
        latent_rows.append(latents)
        label_rows.append(labels)

    if not latent_rows:
        raise MalformedCsvError("file contains a header but no data rows", line=1)
    return RepresentationSet(
        np.array(latent_rows, dtype=np.float64),
        np.array(label_rows, dtype=np.int64),
        schema,
    )


def write_representation_set(
    rep: RepresentationSet, data_path: str | Path, schema_path: str | Path
) -> None:
    """Write the CSV + schema pair; floats rendered full-precision (repr).

    write -> load round-trips to bit-identical latents and labels.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(expected_header(rep.n_neurons, rep.n_factors))
    for i in range(rep.n_rows):
        writer.writerow(
            [repr(float(v)) for v in rep.latents[i]] + [str(int(v)) for v in rep.labels[i]]
        )
    atomic_write_text(Path(data_path), buf.getvalue())
    write_schema(rep.schema, schema_path)


def discretize_neuron(
    values: Sequence[float] | np.ndarray,
    n_bins: int = DEFAULT_BINS,
    strategy: str = QUANTILE,
) -> DiscretizedNeuron:
    """Bin one neuron's values into at most n_bins ordinal bins.

    Quantile strategy places boundaries at the k/B empirical quantiles;
    equal_width slices [min, max] evenly. Values with <= B distinct levels
    are mapped bijectively (sorted level -> bin) regardless of strategy, so
    exactly-discrete neurons keep their alphabet. Ties on a boundary go to
    the lower bin. All-identical values collapse to bin 0 and are flagged
    degenerate.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValidationError("values must be a non-empty 1-D array")
    if not np.all(np.isfinite(values)):
        idx = int(np.argwhere(~np.isfinite(values))[0][0])
        raise NonFiniteLatentError(idx, "z", float(values[idx]))
    if not isinstance(n_bins, int) or isinstance(n_bins, bool) or n_bins < 1:
        raise ValidationError(f"n_bins must be a positive integer, got {n_bins!r}")
    if strategy not in BIN_STRATEGIES:
        raise ValidationError(f"unknown binning strategy {strategy!r}, expected one of {BIN_STRATEGIES}")

    levels = np.unique(values)
    if levels.size == 1:
        bins = np.zeros(values.shape, dtype=np.int64)
        return DiscretizedNeuron(
            bins=_frozen(bins),
            boundaries=_frozen(np.empty(0, dtype=np.float64)),
            strategy=strategy,
            requested_bins=n_bins,
            degenerate=n_bins > 1,
            level_mapped=True,
        )

    if levels.size <= n_bins:
        # Already-discrete values: sorted level k becomes bin k exactly.
        boundaries = (levels[:-1] + levels[1:]) / 2.0
        bins = np.searchsorted(levels, values)
        return DiscretizedNeuron(
            bins=_frozen(bins.astype(np.int64)),
            boundaries=_frozen(boundaries),
            strategy=strategy,
            requested_bins=n_bins,
            level_mapped=True,
        )

    if strategy == QUANTILE:
        qs = np.arange(1, n_bins) / n_bins
        boundaries = np.quantile(values, qs)
    else:
        lo, hi = float(levels[0]), float(levels[-1])
        boundaries = lo + (hi - lo) * np.arange(1, n_bins) / n_bins

    boundaries = np.asarray(boundaries, dtype=np.float64)
    # A value equal to a boundary belongs to the lower bin.
    bins = np.searchsorted(boundaries, values, side="left").astype(np.int64)
    return DiscretizedNeuron(
        bins=_frozen(bins),
        boundaries=_frozen(boundaries),
        strategy=strategy,
        requested_bins=n_bins,
    )


def split_indices(rep: RepresentationSet, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return (train_indices, test_indices) for the split, both sorted ascending.

    The two index arrays are disjoint and their union is exactly range(N).
    """
    n = rep.n_rows
    if spec.kind == "random":
        n_test = int(math.floor(n * float(spec.test_fraction)))
        if n_test < 1 or n_test >= n:
            raise SplitError(
                f"random split with test_fraction={spec.test_fraction} on N={n} rows "
                f"leaves an empty side (test={n_test})"
            )
        rng = np.random.default_rng(spec.seed)
        perm = rng.permutation(n)
        test = np.sort(perm[:n_test])
        train = np.sort(perm[n_test:])
        return train, test

    a = rep.schema.index_of(spec.factor_a)
    b = rep.schema.index_of(spec.factor_b)
    if a == b:
        raise SplitError(f"cg_exclusion needs two distinct factors, got {spec.factor_a!r} twice")
    for idx, value, tag in ((a, spec.value_a, "value_a"), (b, spec.value_b, "value_b")):
        k = rep.schema.cardinalities[idx]
        if not 0 <= int(value) < k:
            raise SplitError(
                f"{tag}={value} out of range for factor {rep.schema.names[idx]!r} (cardinality {k})"
            )
    mask = (rep.labels[:, a] == int(spec.value_a)) & (rep.labels[:, b] == int(spec.value_b))
    test = np.where(mask)[0]
    train = np.where(~mask)[0]
    if test.size == 0:
        raise SplitError(
            f"cg_exclusion pair ({rep.schema.names[a]}={spec.value_a}, "
            f"{rep.schema.names[b]}={spec.value_b}) matches no rows"
        )
    if train.size == 0:
        raise SplitError(
            f"cg_exclusion pair ({rep.schema.names[a]}={spec.value_a}, "
            f"{rep.schema.names[b]}={spec.value_b}) matches every row; nothing left to train on"
        )
    return train, test


def make_split(
    rep: RepresentationSet, spec: SplitSpec
) -> tuple[RepresentationSet, RepresentationSet]:
    """Materialize the split as (train_set, test_set)."""
    train_idx, test_idx = split_indices(rep, spec)
    return rep.subset(train_idx), rep.subset(test_idx)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr
