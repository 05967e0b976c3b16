"""CSV and JSON formats for rankings, similarity sources, datasets and models.

Formats::

    rankings.csv    test_class[,source],rank1,...,rankK   (class names)
    similarity.csv  test_class,<train class names...>
    dataset.csv     label,f0,f1,...
    *.json          models, suites and priors

Floats are written with ``repr`` so a write/parse round trip is exact.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .baseline_classifiers import Dataset
from .prior_learning import ClassPrior, RankingSample, SemanticPrior
from .ranking_core import Ranking, TopKList
from .ranking_models import MallowsModel, model_from_dict
from .zero_shot import SimilaritySource


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str, column: int | None = None):
        where = f"{path}:{line}" + (f":{column}" if column is not None else "")
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.column = path, line, column


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(path, rows: Iterable[Sequence[Any]]) -> None:
    atomic_write_text(path, _csv_text(rows))


def fmt(x: float) -> str:
    return repr(float(x))


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if row and any(cell.strip() for cell in row):
                yield reader.line_num, [cell.strip() for cell in row]


def _float(path, line, col, cell):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(path, line, f"non-numeric cell {cell!r}", col) from None
    if not np.isfinite(value):
        raise ParseError(path, line, f"non-finite cell {cell!r}", col)
    return value


# -- JSON --------------------------------------------------------------------

def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj: Any) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path) -> Any:
    with open(path) as fh:
        return json.load(fh)


# -- rankings ------------------------------------------------------------------

def write_rankings(path, samples: Sequence[RankingSample], train_classes: Sequence[str]) -> None:
    with_source = any(s.source_tag for s in samples)
    k = max((s.ranking.k for s in samples), default=0)
    header = ["test_class"] + (["source"] if with_source else [])
    header += [f"rank{i}" for i in range(1, k + 1)]
    rows = [header]
    for s in samples:
        lead = [s.test_class] + ([s.source_tag] if with_source else [])
        rows.append(lead + [train_classes[i] for i in s.ranking.prefix])
    write_csv(path, rows)


def parse_rankings(path, train_classes: Sequence[str],
                   test_classes: Sequence[str] | None = None) -> list[RankingSample]:
    index = {name: i for i, name in enumerate(train_classes)}
    known_tests = None if test_classes is None else set(test_classes)
    rows = _read_rows(path)
    try:
        line, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "empty rankings file") from None
    if not header or header[0] != "test_class":
        raise ParseError(path, line, "header must start with 'test_class'", 1)
    lead = 2 if len(header) > 1 and header[1] == "source" else 1
    out = []
    for line, row in rows:
        z = row[0]
        if known_tests is not None and z not in known_tests:
            raise ParseError(path, line, f"unknown test class {z!r}", 1)
        names = [cell for cell in row[lead:] if cell]
        if not names:
            raise ParseError(path, line, "ranking row lists no classes")
        items = []
        for col, name in enumerate(names, start=lead + 1):
            if name not in index:
                raise ParseError(path, line, f"unknown class name {name!r}", col)
            if index[name] in items:
                raise ParseError(path, line, f"class {name!r} repeated in ranking row", col)
            items.append(index[name])
        tag = row[1] if lead == 2 else ""
        out.append(RankingSample(z, TopKList(tuple(items), len(train_classes)), tag))
    return out


# -- similarity ------------------------------------------------------------------

def write_similarity(path, src: SimilaritySource) -> None:
    rows = [["test_class", *src.train_classes]]
    for z, row in zip(src.test_classes, src.matrix):
        rows.append([z, *(fmt(v) for v in row)])
    write_csv(path, rows)


def parse_similarity(path, train_classes: Sequence[str] | None = None,
                     name: str | None = None) -> SimilaritySource:
    """Read a similarity CSV; columns are matched to ``train_classes`` by name."""
    rows = _read_rows(path)
    try:
        line, header = next(rows)
    except StopIteration:
        raise ParseError(path, 1, "empty similarity file") from None
    if not header or header[0] != "test_class":
        raise ParseError(path, line, "header must start with 'test_class'", 1)
    cols = header[1:]
    if len(set(cols)) != len(cols):
        raise ParseError(path, line, "duplicate training class in header")
    if train_classes is None:
        train_classes = cols
    elif set(cols) != set(train_classes):
        missing = sorted(set(train_classes) - set(cols))
        extra = sorted(set(cols) - set(train_classes))
        raise ParseError(path, line, f"header classes mismatch (missing {missing}, unknown {extra})")
    perm = [cols.index(name_) for name_ in train_classes]
    tests, matrix = [], []
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(path, line, f"expected {len(header)} cells, got {len(row)}")
        if row[0] in tests:
            raise ParseError(path, line, f"test class {row[0]!r} repeated", 1)
        values = [_float(path, line, col + 2, cell) for col, cell in enumerate(row[1:])]
        tests.append(row[0])
        matrix.append([values[p] for p in perm])
    if not tests:
        raise ParseError(path, line, "no similarity rows")
    return SimilaritySource(name or Path(path).stem, np.array(matrix), tests, train_classes)


# -- datasets ------------------------------------------------------------------

def write_dataset(path, data: Dataset) -> None:
    d = data.features.shape[1]
    rows = [["label", *(f"f{i}" for i in range(d))]]
    for label, x in zip(data.labels, data.features):
        rows.append([data.class_names[label], *(fmt(v) for v in x)])
    write_csv(path, rows)


def parse_dataset(path, class_names: Sequence[str] | None = None) -> Dataset:
    """Read a dataset CSV.  Without ``class_names`` the sorted label set is used."""
    rows = list(_read_rows(path))
    if not rows:
        raise ParseError(path, 1, "empty dataset file")
    line, header = rows[0]
    if not header or header[0] != "label":
        raise ParseError(path, line, "header must start with 'label'", 1)
    if class_names is None:
        class_names = sorted({row[0] for _, row in rows[1:]})
    index = {n: i for i, n in enumerate(class_names)}
    labels, feats = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(path, line, f"expected {len(header)} cells, got {len(row)}")
        if row[0] not in index:
            raise ParseError(path, line, f"unknown class name {row[0]!r}", 1)
        labels.append(index[row[0]])
        feats.append([_float(path, line, col + 2, c) for col, c in enumerate(row[1:])])
    x = np.array(feats, dtype=float).reshape(len(feats), len(header) - 1)
    return Dataset(x, np.array(labels, dtype=np.int64), list(class_names))


# -- priors ----------------------------------------------------------------------

def priors_to_dict(prior: SemanticPrior, train_classes: Sequence[str]) -> dict[str, Any]:
    classes = []
    for z in prior.classes:
        e = prior.entries[z]
        params = e.model.to_dict() if isinstance(e.model, MallowsModel) else e.model.to_dict(e.k)
        classes.append({
            "test_class": z,
            "consensus": [train_classes[i] for i in e.consensus.order],
            "k": e.k,
            "parameters": params,
            "diagnostics": {"objective": e.objective, "iterations": e.iterations,
                            "converged": e.converged},
        })
    return {"model_kind": prior.model_kind, "train_classes": list(train_classes),
            "classes": classes}


def priors_from_dict(d: dict[str, Any]) -> tuple[SemanticPrior, list[str]]:
    train = list(d["train_classes"])
    index = {n: i for i, n in enumerate(train)}
    entries, order = {}, []
    for c in d["classes"]:
        z = c["test_class"]
        diag = c["diagnostics"]
        entries[z] = ClassPrior(Ranking(tuple(index[n] for n in c["consensus"])),
                                model_from_dict(c["parameters"]), int(c["k"]),
                                diag["objective"], int(diag["iterations"]),
                                bool(diag["converged"]))
        order.append(z)
    return SemanticPrior(order, entries, d["model_kind"]), train
