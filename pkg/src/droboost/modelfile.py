"""Plain-text model and trace files.

Model layout (one item per line, floats written with ``repr`` so they read
back bit-exactly)::

    droboost-model 1
    n_features <d>
    loss <kind>
    delta <value>
    terms <count>
    term <alpha> <n_nodes>
    <feature> <threshold> <value>     # preorder; feature -1 marks a leaf
    ...
"""

from __future__ import annotations

from pathlib import Path

from .core import DataError, Ensemble
from .learners import LEAF, Tree

MAGIC = "droboost-model"
VERSION = 1
TRACE_COLUMNS = ("iteration", "robust_loss", "empirical_loss", "kl", "beta", "alpha", "delta", "learner")


def _tree_lines(tree: Tree):
    for f, thr, v in zip(tree.feature.tolist(), tree.threshold.tolist(), tree.value.tolist()):
        yield f"{f} {thr!r} {v!r}"


def dumps_model(ensemble: Ensemble, n_features: int, loss: str = "exponential", delta="") -> str:
    lines = [f"{MAGIC} {VERSION}", f"n_features {n_features}", f"loss {loss}", f"delta {delta}",
             f"terms {len(ensemble)}"]
    for alpha, tree in ensemble.terms:
        lines.append(f"term {alpha!r} {tree.n_nodes}")
        lines.extend(_tree_lines(tree))
    return "\n".join(lines) + "\n"


def _tree_from_preorder(nodes, n_features):
    feature, threshold, value = zip(*nodes)
    left = [LEAF] * len(nodes)
    right = [LEAF] * len(nodes)

    def walk(k):
        if feature[k] == LEAF:
            return k + 1
        left[k] = k + 1
        nxt = walk(k + 1)
        right[k] = nxt
        return walk(nxt)

    end = walk(0)
    if end != len(nodes):
        raise DataError("malformed tree: node count does not match its preorder structure")
    return Tree(feature, threshold, value, left, right, n_features)


def loads_model(text: str):
    """Returns ``(ensemble, meta)`` where meta holds n_features, loss and delta."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    it = iter(lines)

    def field(name):
        try:
            key, _, rest = next(it).partition(" ")
        except StopIteration:
            raise DataError(f"model file truncated before {name!r}") from None
        if key != name:
            raise DataError(f"model file: expected {name!r}, got {key!r}")
        return rest.strip()

    try:
        version = int(field(MAGIC))
        if version != VERSION:
            raise DataError(f"unsupported model version {version}")
        n_features = int(field("n_features"))
        meta = {"n_features": n_features, "loss": field("loss"), "delta": field("delta")}
        terms = []
        for _ in range(int(field("terms"))):
            alpha_s, n_nodes_s = field("term").split()
            nodes = []
            for _ in range(int(n_nodes_s)):
                f, thr, v = next(it).split()
                nodes.append((int(f), float(thr), float(v)))
            terms.append((float(alpha_s), _tree_from_preorder(nodes, n_features)))
    except (ValueError, StopIteration) as exc:
        raise DataError(f"malformed model file: {exc}") from None
    return Ensemble(tuple(terms)), meta


def save_model(path, ensemble: Ensemble, n_features: int, loss: str = "exponential", delta="") -> None:
    Path(path).write_text(dumps_model(ensemble, n_features, loss, delta), encoding="utf-8")


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such model file: {path}")
    return loads_model(path.read_text(encoding="utf-8"))


def write_trace(path, trace, header: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in header.items():
            fh.write(f"# {key}={val}\n")
        fh.write("\t".join(TRACE_COLUMNS) + "\n")
        for rec in trace.records:
            fh.write("\t".join(
                f"{getattr(rec, c)!r}" if isinstance(getattr(rec, c), float) else str(getattr(rec, c))
                for c in TRACE_COLUMNS
            ) + "\n")


def read_trace(path):
    """Returns ``(header, rows)``; rows are dicts keyed by column name."""
    header, rows, columns = {}, [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            header[key] = val
        elif columns is None:
            columns = line.split("\t")
        elif line:
            rows.append(dict(zip(columns, line.split("\t"))))
    return header, rows
