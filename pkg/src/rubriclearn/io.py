"""Dataset ingestion and artifact persistence.

JSON artifacts carry ``schema_version``; JSON Lines artifacts carry it on
every record. Writes go through a temp file and an atomic rename.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import InputError
from .records import PreferencePair, Rubric, ThemeTipsRubric
from .selection import CoreSet

SCHEMA_VERSION = 1
PathLike = Union[str, Path]

TRACE_COLUMNS = ("step", "rubric_id", "marginal_gain", "coding_rate_after")
BATCH_COLUMNS = ("batch", "gain")


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _read_json(path: PathLike, kind: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {data.get('schema_version')!r}")
    if data.get("kind") != kind:
        raise InputError(f"{path}: expected a {kind!r} document, found {data.get('kind')!r}")
    return data


# -- preference data -------------------------------------------------------------


def convert_chosen_rejected(record: dict, pair_id: Optional[str] = None) -> PreferencePair:
    """Map a ``{prompt, chosen, rejected}`` record onto a pair with ``chosen`` as A."""
    try:
        query = record.get("prompt", record.get("query"))
        chosen, rejected = record["chosen"], record["rejected"]
    except KeyError as exc:
        raise InputError(f"chosen/rejected record lacks {exc}") from exc
    if query is None:
        raise InputError("chosen/rejected record lacks a prompt")
    pid = pair_id if pair_id is not None else str(record.get("id", ""))
    return PreferencePair(pid, query, chosen, rejected, "A", record.get("critique"))


def parse_pairs(lines: Iterable[str], source: str = "<dataset>") -> list[PreferencePair]:
    pairs: list[PreferencePair] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise InputError("record must be a JSON object")
            if "chosen" in record and "rejected" in record:
                pair = convert_chosen_rejected(record, str(record.get("id", f"line{lineno}")))
            else:
                pair = PreferencePair.from_dict(record)
        except (ValueError, InputError) as exc:
            raise InputError(f"{source}:{lineno}: {exc}") from exc
        if pair.id in seen:
            raise InputError(f"{source}:{lineno}: duplicate pair id {pair.id!r}")
        seen.add(pair.id)
        pairs.append(pair)
    if not pairs:
        raise InputError(f"{source}: no preference pairs found")
    return pairs


def load_pairs(path: PathLike) -> list[PreferencePair]:
    with open(path, encoding="utf-8") as f:
        return parse_pairs(f, str(path))


def save_pairs(pairs: Sequence[PreferencePair], path: PathLike) -> None:
    atomic_write_text(path, "".join(json.dumps(p.to_dict(), ensure_ascii=False) + "\n" for p in pairs))


# -- rubric pool -------------------------------------------------------------------


def save_pool(rubrics: Sequence[Rubric], path: PathLike) -> None:
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, **r.to_dict()}, ensure_ascii=False) for r in rubrics]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_pool(path: PathLike) -> list[Rubric]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if d.get("schema_version") != SCHEMA_VERSION:
                    raise InputError(f"unsupported schema_version {d.get('schema_version')!r}")
                out.append(Rubric.from_dict(d))
            except (ValueError, KeyError, AttributeError) as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    return out


# -- core set ------------------------------------------------------------------------


def core_document(core: CoreSet, rubrics: Sequence[Rubric] = (), batch_gain_history: Sequence[float] = ()) -> dict:
    by_id = {r.id: r for r in rubrics}
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "core",
        **core.to_dict(),
        "rubrics": [{"id": i, "text": by_id[i].text} for i in core.rubric_ids if i in by_id],
        "batch_gain_history": [float(g) for g in batch_gain_history],
    }


def save_core(core: CoreSet, path: PathLike, rubrics: Sequence[Rubric] = (), batch_gain_history: Sequence[float] = ()) -> None:
    atomic_write_text(path, _dump(core_document(core, rubrics, batch_gain_history)))


def load_core_document(path: PathLike) -> dict:
    return _read_json(path, "core")


def load_core(path: PathLike) -> CoreSet:
    d = load_core_document(path)
    try:
        return CoreSet.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed core document ({exc})") from exc


# -- Theme-Tips rubric -------------------------------------------------------------


def save_theme_tips(rubric: ThemeTipsRubric, path: PathLike) -> None:
    atomic_write_text(path, _dump({"schema_version": SCHEMA_VERSION, "kind": "theme_tips", **rubric.to_dict()}))


def load_theme_tips(path: PathLike) -> ThemeTipsRubric:
    d = _read_json(path, "theme_tips")
    try:
        return ThemeTipsRubric.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed theme_tips document ({exc})") from exc


def load_rubric_set(path: PathLike) -> Union[ThemeTipsRubric, list[Rubric]]:
    """Theme-Tips JSON, a core JSON (its rubric texts), or a pool JSONL."""
    path = Path(path)
    if path.suffix == ".jsonl":
        return load_pool(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind == "theme_tips":
        return load_theme_tips(path)
    if kind == "core":
        return [Rubric(r["id"], r["text"]) for r in _read_json(path, "core")["rubrics"]]
    raise InputError(f"{path}: not a rubric set (expected theme_tips, core or .jsonl pool)")


# -- trace export ----------------------------------------------------------------------


def _csv(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_csv(core: CoreSet) -> str:
    rows = [(i, p.rubric_id, repr(p.marginal_gain), repr(p.coding_rate_after)) for i, p in enumerate(core.trace.picks, 1)]
    return _csv(rows, TRACE_COLUMNS)


def batch_csv(gains: Sequence[float]) -> str:
    return _csv([(i, repr(float(g))) for i, g in enumerate(gains, 1)], BATCH_COLUMNS)


def export_trace(core_path: PathLike, trace_path: PathLike, batch_path: PathLike) -> None:
    d = load_core_document(core_path)
    core = CoreSet.from_dict(d)
    atomic_write_text(trace_path, trace_csv(core))
    atomic_write_text(batch_path, batch_csv(d.get("batch_gain_history", [])))
