"""Survey schemas, coded response matrices, and the latent-vector layout.

A schema lists the survey items in a canonical order: binary and ordinal
items first, nominal items after them.  Each binary/ordinal item contributes
one coordinate to the underlying latent vector; a nominal item with K levels
contributes a block of K - 1 coordinates.  Responses are coded 1..K per item
(level 1 is the reference level of a nominal item), and missing cells are a
hard load error rather than something to impute.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

__all__ = [
    "ItemSpec",
    "SurveySchema",
    "ResponseMatrix",
    "LatentLayout",
    "SchemaError",
    "ResponseError",
    "parse_schema",
    "serialize_schema",
    "load_responses",
    "latent_layout",
]

KINDS = ("binary", "ordinal", "nominal")


class SchemaError(ValueError):
    """Malformed or inconsistent schema document."""


class ResponseError(ValueError):
    """Malformed response file or a cell that violates the schema."""


@dataclass(frozen=True)
class ItemSpec:
    """One survey item: its name, measurement kind, and ordered level labels."""

    name: str
    kind: str
    level_labels: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"item {self.name!r}: unknown kind {self.kind!r}")
        k = len(self.level_labels)
        if k < 2:
            raise SchemaError(f"item {self.name!r}: needs at least 2 levels, got {k}")
        if self.kind == "binary" and k != 2:
            raise SchemaError(f"binary item {self.name!r} must have exactly 2 levels, got {k}")
        if len(set(self.level_labels)) != k:
            raise SchemaError(f"item {self.name!r}: duplicate level labels")

    @property
    def levels(self) -> int:
        """Number of response levels K."""
        return len(self.level_labels)


@dataclass(frozen=True)
class SurveySchema:
    """Canonically ordered item list with derived dimensions.

    Attributes
    ----------
    items : tuple of ItemSpec
        Binary/ordinal items in positions 0..O-1, nominal items after.
    source_positions : tuple of int
        For each canonical position, the item's index in the parsed document
        (records the permutation applied on load).
    """

    items: tuple[ItemSpec, ...]
    source_positions: tuple[int, ...] = field(compare=False, default=())

    def __post_init__(self):
        names = [it.name for it in self.items]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate item names in schema")
        seen_nominal = False
        for it in self.items:
            if it.kind == "nominal":
                seen_nominal = True
            elif seen_nominal:
                raise SchemaError("items are not in canonical order (nominal items must come last)")
        if not self.source_positions:
            object.__setattr__(self, "source_positions", tuple(range(len(self.items))))

    @property
    def J(self) -> int:
        return len(self.items)

    @property
    def O(self) -> int:
        """Count of binary plus ordinal items."""
        return sum(1 for it in self.items if it.kind != "nominal")

    @property
    def D(self) -> int:
        """Latent dimension: O + sum of (K_j - 1) over nominal items."""
        return self.O + sum(it.levels - 1 for it in self.items if it.kind == "nominal")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(it.name for it in self.items)


@dataclass(frozen=True)
class LatentLayout:
    """Per-item contiguous index ranges into the D-dimensional latent vector.

    Ranges are half-open 0-based (start, stop) pairs: width 1 for
    binary/ordinal items, width K_j - 1 for nominal items.  They are
    disjoint, ordered, and cover 0..D-1 exactly.
    """

    ranges: tuple[tuple[int, int], ...]

    @property
    def D(self) -> int:
        return self.ranges[-1][1] if self.ranges else 0

    def block(self, j: int) -> slice:
        start, stop = self.ranges[j]
        return slice(start, stop)


@dataclass(frozen=True)
class ResponseMatrix:
    """N x J matrix of observed responses coded 1..K_j, canonical column order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or not np.issubdtype(v.dtype, np.integer):
            raise ResponseError("response matrix must be a 2-D integer array")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]


def _canonicalize(items: list[ItemSpec]) -> tuple[tuple[ItemSpec, ...], tuple[int, ...]]:
    order = sorted(range(len(items)), key=lambda i: items[i].kind == "nominal")
    return tuple(items[i] for i in order), tuple(order)


def parse_schema(text: str) -> SurveySchema:
    """Parse a TOML or JSON schema document into canonical order.

    Each item entry needs ``name``, ``kind`` in {"binary", "ordinal",
    "nominal"}, and ``levels``: the ordered list of level label strings (the
    first label of a nominal item is its reference level; for ordinal items
    the author is responsible for ordering labels low-to-high).
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"schema document is not valid JSON: {e}") from e
    else:
        try:
            doc = _toml.loads(text)
        except _toml.TOMLDecodeError as e:
            raise SchemaError(f"schema document is not valid TOML: {e}") from e
    if not isinstance(doc, dict) or "items" not in doc:
        raise SchemaError("schema document must have a top-level 'items' array")
    raw = doc["items"]
    if not isinstance(raw, list) or not raw:
        raise SchemaError("'items' must be a non-empty array")

    items = []
    for pos, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"item #{pos + 1} is not a table/object")
        missing = {"name", "kind", "levels"} - set(entry)
        if missing:
            raise SchemaError(f"item #{pos + 1}: missing field(s) {sorted(missing)}")
        labels = entry["levels"]
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            raise SchemaError(f"item {entry['name']!r}: 'levels' must be an array of strings")
        items.append(ItemSpec(str(entry["name"]), str(entry["kind"]), tuple(labels)))

    ordered, perm = _canonicalize(items)
    return SurveySchema(ordered, perm)


def serialize_schema(schema: SurveySchema) -> str:
    """Render a schema back to its JSON document form (canonical order)."""
    doc = {
        "items": [
            {"name": it.name, "kind": it.kind, "levels": list(it.level_labels)}
            for it in schema.items
        ]
    }
    return json.dumps(doc, indent=2)


def latent_layout(schema: SurveySchema) -> LatentLayout:
    """Index ranges of each item's latent coordinates within the D-vector."""
    ranges = []
    start = 0
    for it in schema.items:
        width = 1 if it.kind != "nominal" else it.levels - 1
        ranges.append((start, start + width))
        start += width
    return LatentLayout(tuple(ranges))


def _code_cell(cell: str, item: ItemSpec, row: int) -> int:
    cell = cell.strip()
    if not cell:
        raise ResponseError(f"missing cell at row {row}, column {item.name!r}")
    try:
        return item.level_labels.index(cell) + 1
    except ValueError:
        pass
    try:
        code = int(cell)
    except ValueError:
        raise ResponseError(
            f"unknown label {cell!r} at row {row}, column {item.name!r}"
        ) from None
    if not 1 <= code <= item.levels:
        raise ResponseError(
            f"code {code} out of range 1..{item.levels} at row {row}, column {item.name!r}"
        )
    return code


def load_responses(source, schema: SurveySchema) -> ResponseMatrix:
    """Load a CSV of responses and code it against the schema.

    The header row must contain exactly the schema's item names, in any
    order; columns are permuted to canonical order.  Cells may be level
    labels or 1-based integer codes.  Any empty cell, unknown label,
    out-of-range code, or ragged row is an error naming the offending
    row and column.
    """
    if hasattr(source, "read"):
        return _load_rows(csv.reader(source), schema)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _load_rows(csv.reader(fh), schema)


def _load_rows(reader, schema: SurveySchema) -> ResponseMatrix:
    try:
        header = next(reader)
    except StopIteration:
        raise ResponseError("empty response file") from None
    header = [h.strip() for h in header]
    names = list(schema.names)
    unknown = set(header) - set(names)
    if unknown:
        raise ResponseError(f"unknown column(s) in response file: {sorted(unknown)}")
    missing = set(names) - set(header)
    if missing:
        raise ResponseError(f"response file missing column(s): {sorted(missing)}")
    if len(header) != len(names):
        raise ResponseError("duplicate columns in response file header")
    col_of = [header.index(name) for name in names]

    rows = []
    for r, record in enumerate(reader, start=1):
        if len(record) != len(header):
            raise ResponseError(
                f"row {r} has {len(record)} cells, expected {len(header)}"
            )
        rows.append(
            [_code_cell(record[col_of[j]], schema.items[j], r) for j in range(len(names))]
        )
    if not rows:
        raise ResponseError("response file has a header but no data rows")
    return ResponseMatrix(np.asarray(rows, dtype=np.int64))


def write_responses(path, Y: ResponseMatrix, schema: SurveySchema, labels: bool = False):
    """Write a response matrix as CSV (integer codes or level labels)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema.names)
    if labels:
        for row in Y.values:
            w.writerow(
                [schema.items[j].level_labels[row[j] - 1] for j in range(schema.J)]
            )
    else:
        w.writerows(Y.values.tolist())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
