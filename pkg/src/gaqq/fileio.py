"""CSV ingestion, model files and benchmark reports.

CSV dialect: comma separated, '.' decimal point, UTF-8, optional header row.
Model files are versioned JSON text; every float is written with 17
significant digits so that ``load_model(save_model(m))`` is bit-exact.
"""
from dataclasses import dataclass
import csv
import hashlib
import json
import logging
import math
import os

import numpy as np

from .estimator import Dataset, ModelParams
from .exceptions import InvalidInput, ParseError, SchemaError, UnsupportedVersion

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MISSING = {"", "na", "nan", "null", "none", "?"}


# ---------------------------------------------------------------------------
# CSV input


@dataclass(frozen=True)
class DataSchema:
    """Which columns hold the label, the response and the features.

    Columns are given by header name or 0-based index. ``feature_columns=None``
    means every column that is neither the label nor the response.
    """

    label_column: object = 0
    response_column: object = -1
    feature_columns: tuple = None
    has_header: bool = True


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    return [r for r in rows if any(cell.strip() for cell in r)]


def resolve_column(col, header, width, what):
    if isinstance(col, str) and not col.lstrip("-").isdigit():
        if header is None:
            raise InvalidInput(f"{what} column {col!r} given by name but the file has no header")
        if col not in header:
            raise InvalidInput(f"{what} column {col!r} not in header {header}")
        return header.index(col)
    idx = int(col)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise InvalidInput(f"{what} column index {col} outside 0..{width - 1}")
    return idx


def parse_cell(cell, row, column):
    text = cell.strip()
    if text.lower() in MISSING:
        raise ParseError(f"missing value at row {row}, column {column!r}", row, column)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} at row {row}, column {column!r}", row, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value at row {row}, column {column!r}", row, column)
    return value


def _label_key(label):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def read_table(path, has_header=True):
    """Return ``(header or None, rows)`` with every row checked for width."""
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path} is empty", None, None)
    header = [h.strip() for h in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    width = len(rows[0])
    first = 2 if has_header else 1
    for i, r in enumerate(body):
        if len(r) != width:
            raise ParseError(f"row {first + i} has {len(r)} cells, expected {width}",
                             first + i, None)
    return header, body


def load_csv(path, schema: DataSchema = DataSchema()) -> Dataset:
    """Read a labelled data table.

    The returned :class:`Dataset` keeps the file's row order, puts the
    response in the last coordinate and maps the labels onto 1..K (numeric
    labels in numeric order, others lexicographically). The mapping is stored
    in ``dataset.label_mapping`` and a warning is logged when it is not the
    identity.
    """
    header, body = read_table(path, schema.has_header)
    width = len(header) if header is not None else len(body[0]) if body else 0
    label_idx = resolve_column(schema.label_column, header, width, "label")
    resp_idx = resolve_column(schema.response_column, header, width, "response")
    if label_idx == resp_idx:
        raise InvalidInput("label and response columns must differ")
    if schema.feature_columns is None:
        feats = [j for j in range(width) if j not in (label_idx, resp_idx)]
    else:
        feats = [resolve_column(c, header, width, "feature") for c in schema.feature_columns]
        if label_idx in feats or resp_idx in feats:
            raise InvalidInput("feature columns overlap the label or response column")
    if not feats:
        raise InvalidInput("need at least one feature column")
    names = header if header is not None else [str(j) for j in range(width)]
    first = 2 if schema.has_header else 1

    cols = feats + [resp_idx]
    w = np.empty((len(body), len(cols)))
    raw_labels = []
    for i, r in enumerate(body):
        for j, c in enumerate(cols):
            w[i, j] = parse_cell(r[c], first + i, names[c])
        lab = r[label_idx].strip()
        if lab.lower() in MISSING:
            raise ParseError(f"missing label at row {first + i}", first + i, names[label_idx])
        raw_labels.append(lab)

    distinct = sorted(set(raw_labels), key=_label_key)
    if len(distinct) < 2:
        raise InvalidInput(f"{path} contains a single class")
    mapping = {lab: k + 1 for k, lab in enumerate(distinct)}
    if any(_label_key(lab)[1] != k for lab, k in mapping.items()):
        logger.warning("labels remapped to 1..%d: %s", len(distinct), mapping)
    z = np.array([mapping[lab] for lab in raw_labels])
    return Dataset(w, z, label_mapping=mapping, column_names=[names[c] for c in cols])


def load_features(path, model: ModelParams, has_header=True, exclude=()):
    """Predictor matrix for a fitted model.

    With a header and feature names stored in the model, columns are picked by
    name; otherwise every column not listed in ``exclude`` is used in file
    order. Returns ``(x, header, body)``.
    """
    header, body = read_table(path, has_header)
    width = len(header) if header is not None else len(body[0]) if body else 0
    skip = {resolve_column(c, header, width, "excluded") for c in exclude}
    names = model.meta.get("column_names")
    if header is not None and names and all(nm in header for nm in names[:-1]):
        cols = [header.index(nm) for nm in names[:-1]]
    else:
        cols = [j for j in range(width) if j not in skip]
    if len(cols) != model.p - 1:
        raise InvalidInput(f"model expects {model.p - 1} predictors, file gives {len(cols)}")
    labels = header if header is not None else [str(j) for j in range(width)]
    first = 2 if has_header else 1
    x = np.empty((len(body), len(cols)))
    for i, r in enumerate(body):
        for j, c in enumerate(cols):
            x[i, j] = parse_cell(r[c], first + i, labels[c])
    return x, header, body


# ---------------------------------------------------------------------------
# model files


def _fmt(v):
    return format(float(v), ".17g") if math.isfinite(v) else "null"


def _emit(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_emit(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if obj and isinstance(obj[0], (list, tuple)):
            inner = [f"{pad}  {_emit(v, indent + 1)}" for v in obj]
            return "[\n" + ",\n".join(inner) + f"\n{pad}]"
        return "[" + ", ".join(_emit(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    return json.dumps(str(obj))


def data_fingerprint(data: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.w).tobytes())
    h.update(np.ascontiguousarray(data.z, dtype=np.int64).tobytes())
    return h.hexdigest()


def model_to_text(model: ModelParams) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "K": model.k_classes,
        "p": model.p,
        "lambda1": float(model.lambda1),
        "lambda2": float(model.lambda2),
        "pi": model.pi,
        "mu": model.mu,
        "delta": model.delta,
        "c_hat": model.c_hat,
        "sigma_hat": model.sigma_hat,
        "sigma_x_pinv": model.sigma_x_pinv,
        "meta": {k: v for k, v in sorted(model.meta.items())},
    }
    return _emit(doc) + "\n"


def save_model(model: ModelParams, path) -> None:
    text = model_to_text(model)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _matrix(doc, key, shape):
    try:
        a = np.array(doc[key], dtype=float)
    except KeyError:
        raise SchemaError(f"model file lacks {key!r}") from None
    except (TypeError, ValueError):
        raise SchemaError(f"{key!r} is not numeric") from None
    if a.shape != shape:
        raise SchemaError(f"{key!r} has shape {a.shape}, expected {shape}")
    return a


def model_from_text(text: str) -> ModelParams:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise SchemaError("model file lacks format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise UnsupportedVersion(f"model format {doc['format_version']!r} is not supported "
                                 f"(this build reads {FORMAT_VERSION})")
    try:
        K, p = int(doc["K"]), int(doc["p"])
        lambda1, lambda2 = float(doc["lambda1"]), float(doc["lambda2"])
        kind = str(doc["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad model header: {exc}") from None
    sx = doc.get("sigma_x_pinv")
    meta = doc.get("meta") or {}
    if isinstance(meta.get("label_mapping"), dict):
        meta["label_mapping"] = {str(k): int(v) for k, v in meta["label_mapping"].items()}
    return ModelParams(
        mu=_matrix(doc, "mu", (K, p)),
        c_hat=_matrix(doc, "c_hat", (p, p)),
        sigma_hat=_matrix(doc, "sigma_hat", (p, p)),
        pi=_matrix(doc, "pi", (K,)),
        delta=_matrix(doc, "delta", (K - 1, p)),
        lambda1=lambda1, lambda2=lambda2, kind=kind, meta=meta,
        sigma_x_pinv=None if sx is None else _matrix(doc, "sigma_x_pinv", (p - 1, p - 1)),
    )


def load_model(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())


# ---------------------------------------------------------------------------
# reports


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def write_benchmark(results, per_rep_path, summary_path) -> None:
    """Per-replication rows and per-method summaries of :func:`run_benchmark` output.

    ``me`` is in percent; standard errors are sample sd / sqrt(reps).
    """
    reps, summary = [], []
    for res in results:
        sid = res.scenario.scenario_id
        for rep, me, rm in res.per_rep:
            reps.append([sid, res.method, rep, _fmt(me), _fmt(rm)])
        summary.append([sid, res.method, res.reps, res.failed, _fmt(res.me_mean),
                        _fmt(res.me_se), _fmt(res.rmspe_mean), _fmt(res.rmspe_se)])
    _write_csv(per_rep_path, ["scenario_id", "method", "rep", "me", "rmspe"], reps)
    _write_csv(summary_path, ["scenario_id", "method", "reps", "failed", "me_mean", "me_se",
                              "rmspe_mean", "rmspe_se"], summary)


def write_predictions(path, preds, inverse_labels=None) -> None:
    rows = []
    for i in range(len(preds)):
        z = int(preds.z_hat[i])
        lab = inverse_labels.get(z, z) if inverse_labels else z
        rows.append([i, _fmt(preds.y_hat[i]), lab])
    _write_csv(path, ["row", "y_hat", "z_hat"], rows)


def write_dataset(path, w, z, names=None) -> None:
    p = w.shape[1]
    names = names or [f"x{j + 1}" for j in range(p - 1)] + ["y"]
    _write_csv(path, list(names) + ["label"],
               [[_fmt(v) for v in w[i]] + [int(z[i])] for i in range(w.shape[0])])
