"""Data ingestion, fit persistence, and run manifests.

Input contract: UTF-8 CSV or TSV with a header naming ``user``, ``type``,
and either ``t`` (float days) or ``date`` (ISO-8601 calendar date, mapped to
a day offset from the corpus minimum).  Lines starting with ``#`` are
ignored, which lets every emitted CSV carry a manifest reference as its
first line and still round-trip through the parser.

Fit files are versioned JSON with a checksum; floats serialize via their
shortest round-trip representation, so save/load is bit-exact.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import FitFileError, InputError
from .estimation import FitResult
from .model import BranchingEstimate, EventSequence, HawkesParams

FIT_FORMAT = "periodic-hawkes/fit"
FIT_VERSION = 1
LIBRARY_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# Event ingestion


@dataclass(frozen=True)
class ParseResult:
    """Parsed per-user sequences plus everything needed to interpret them."""

    sequences: dict[str, EventSequence]
    vocabulary: list[str]
    horizon: float
    min_date: _dt.date | None
    row_errors: list[tuple[int, str]]
    excluded_users: list[str]
    total_rows: int


def _split_line(line: str, delimiter: str) -> list[str]:
    return [cell.strip() for cell in line.rstrip("\n").rstrip("\r").split(delimiter)]


def parse_events(
    path: str | Path,
    fmt: str | None = None,
    min_events: int = 90,
    horizon: float | None = None,
    vocabulary: list[str] | None = None,
) -> ParseResult:
    """Read an event table into per-user sequences.

    Users with fewer than ``min_events`` events are excluded (and listed in
    the result).  Malformed rows are collected with their line numbers
    rather than aborting the parse; structural problems (missing file,
    missing columns, no valid rows) raise :class:`InputError`.

    The observation window defaults to ``max observed day + 1`` so the final
    day contributes a full bucket; pass ``horizon`` to override.  Passing a
    ``vocabulary`` pins the label-to-index mapping (unknown labels become
    row errors); otherwise labels map to indices by first appearance among
    kept users.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    if fmt is None:
        fmt = "tsv" if path.suffix.lower() == ".tsv" else "csv"
    if fmt not in ("csv", "tsv"):
        raise InputError(f"unknown format {fmt!r} (expected 'csv' or 'tsv')")
    delimiter = "\t" if fmt == "tsv" else ","

    with open(path, encoding="utf-8") as handle:
        lines = handle.readlines()
    rows: list[tuple[int, list[str]]] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        rows.append((lineno, _split_line(line, delimiter)))
    if not rows:
        raise InputError(f"{path}: file contains no data rows")

    header_line, header = rows[0]
    columns = {name.lower(): k for k, name in enumerate(header)}
    if "user" not in columns or "type" not in columns:
        raise InputError(f"{path}: header must name 'user' and 'type' columns")
    if "t" in columns:
        time_col, time_mode = columns["t"], "t"
    elif "date" in columns:
        time_col, time_mode = columns["date"], "date"
    else:
        raise InputError(f"{path}: header must name a 't' or 'date' column")
    user_col, type_col = columns["user"], columns["type"]
    width = max(user_col, type_col, time_col) + 1

    row_errors: list[tuple[int, str]] = []
    raw: list[tuple[str, object, str]] = []  # (user, time-or-date, label)
    for lineno, cells in rows[1:]:
        if len(cells) < width:
            row_errors.append((lineno, f"expected at least {width} columns"))
            continue
        user = cells[user_col]
        label = cells[type_col]
        if not user or not label:
            row_errors.append((lineno, "empty user or type"))
            continue
        if time_mode == "t":
            try:
                t = float(cells[time_col])
            except ValueError:
                row_errors.append((lineno, f"unparseable time {cells[time_col]!r}"))
                continue
            if not np.isfinite(t) or t < 0:
                row_errors.append((lineno, f"time must be finite and >= 0, got {t}"))
                continue
            raw.append((user, t, label))
        else:
            try:
                date = _dt.date.fromisoformat(cells[time_col])
            except ValueError:
                row_errors.append((lineno, f"unparseable date {cells[time_col]!r}"))
                continue
            raw.append((user, date, label))
    if not raw:
        raise InputError(f"{path}: no valid event rows (see {len(row_errors)} row errors)")

    min_date: _dt.date | None = None
    if time_mode == "date":
        min_date = min(entry[1] for entry in raw)  # type: ignore[type-var]
        raw = [(u, float((d - min_date).days), lab) for u, d, lab in raw]  # type: ignore[operator]

    by_user: dict[str, list[tuple[float, str]]] = {}
    for user, t, label in raw:
        by_user.setdefault(user, []).append((float(t), label))  # type: ignore[arg-type]

    kept = {u: evs for u, evs in by_user.items() if len(evs) >= min_events}
    excluded = [u for u in by_user if u not in kept]
    if vocabulary is None:
        vocab: list[str] = []
        seen: dict[str, int] = {}
        for user, t, label in raw:
            if user in kept and label not in seen:
                seen[label] = len(vocab)
                vocab.append(label)
    else:
        vocab = list(vocabulary)
        seen = {label: k for k, label in enumerate(vocab)}

    max_time = max((t for u, evs in kept.items() for t, _ in evs), default=0.0)
    if horizon is None:
        horizon = float(np.floor(max_time)) + 1.0
    elif horizon < max_time:
        raise InputError(
            f"explicit horizon {horizon} is below the latest event time {max_time}"
        )

    sequences: dict[str, EventSequence] = {}
    for user, events in kept.items():
        times = np.array([t for t, _ in events])
        labels = [lab for _, lab in events]
        unknown = [lab for lab in labels if lab not in seen]
        if unknown:
            raise InputError(
                f"labels {sorted(set(unknown))!r} are not in the pinned vocabulary"
            )
        types = np.array([seen[lab] for lab in labels], dtype=np.int64)
        order = np.argsort(times, kind="stable")  # stable: ties keep input order
        sequences[user] = EventSequence(
            times[order], types[order], horizon, max(len(vocab), 1)
        )

    return ParseResult(
        sequences=sequences,
        vocabulary=vocab,
        horizon=float(horizon),
        min_date=min_date,
        row_errors=row_errors,
        excluded_users=sorted(excluded),
        total_rows=len(rows) - 1,
    )


def write_events_csv(
    path: str | Path,
    seq: EventSequence,
    vocabulary: list[str] | None = None,
    user: str = "sim",
    manifest_id: str | None = None,
) -> Path:
    """Write an event trace as ``user,t,type`` with full float precision."""
    path = Path(path)
    labels = vocabulary if vocabulary is not None else [str(u) for u in range(seq.num_types)]
    lines = []
    if manifest_id:
        lines.append(f"# manifest_id={manifest_id}")
    lines.append("user,t,type")
    for t, u in zip(seq.times, seq.types):
        lines.append(f"{user},{float(t)!r},{labels[int(u)]}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Fit persistence


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _fit_payload(
    result: FitResult, vocabulary: list[str] | None, manifest_id: str | None
) -> dict:
    params = result.params
    return {
        "format": FIT_FORMAT,
        "version": FIT_VERSION,
        "library_version": LIBRARY_VERSION,
        "manifest_id": manifest_id or "",
        "vocabulary": list(vocabulary) if vocabulary is not None else [],
        "params": {
            "mu": params.mu.tolist(),
            "delta": params.delta.tolist(),
            "excitation": params.excitation.tolist(),
            "omega": params.omega,
            "days": params.days,
        },
        "branching": {
            "background": result.branching.background.tolist(),
            "child": result.branching.child.tolist(),
            "parent": result.branching.parent.tolist(),
            "probability": result.branching.probability.tolist(),
        },
        "trace": list(result.trace),
        "param_deltas": list(result.param_deltas),
        "converged": result.converged,
        "iterations": result.iterations,
        "clipped": result.clipped,
    }


def save_fit(
    result: FitResult,
    path: str | Path,
    vocabulary: list[str] | None = None,
    manifest_id: str | None = None,
) -> Path:
    """Persist a fit as versioned, checksummed, human-readable JSON."""
    path = Path(path)
    payload = _fit_payload(result, vocabulary, manifest_id)
    payload["checksum"] = hashlib.sha256(_canonical_json(payload).encode()).hexdigest()
    _atomic_write_text(path, json.dumps(payload, indent=1, allow_nan=False) + "\n")
    return path


def read_fit_document(path: str | Path) -> dict:
    """Load, verify, and return the full fit payload (including vocabulary)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise FitFileError(f"{path}: unreadable or truncated fit file ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != FIT_FORMAT:
        raise FitFileError(f"{path}: not a fit file")
    if payload.get("version") != FIT_VERSION:
        raise FitFileError(
            f"{path}: unsupported fit file version {payload.get('version')!r} "
            f"(expected {FIT_VERSION})"
        )
    stored = payload.pop("checksum", None)
    recomputed = hashlib.sha256(_canonical_json(payload).encode()).hexdigest()
    if stored != recomputed:
        raise FitFileError(f"{path}: checksum mismatch (corrupt or edited file)")
    payload["checksum"] = stored
    return payload


def load_fit(path: str | Path) -> FitResult:
    """Inverse of :func:`save_fit`; numeric fields round-trip bit-exactly."""
    payload = read_fit_document(path)
    p = payload["params"]
    params = HawkesParams(
        mu=np.array(p["mu"]),
        delta=np.array(p["delta"]),
        excitation=np.array(p["excitation"]),
        omega=p["omega"],
    )
    b = payload["branching"]
    branching = BranchingEstimate(
        background=np.array(b["background"]),
        child=np.array(b["child"], dtype=np.int64),
        parent=np.array(b["parent"], dtype=np.int64),
        probability=np.array(b["probability"]),
    )
    return FitResult(
        params=params,
        branching=branching,
        trace=list(payload["trace"]),
        converged=bool(payload["converged"]),
        iterations=int(payload["iterations"]),
        param_deltas=list(payload["param_deltas"]),
        clipped=int(payload["clipped"]),
    )


# ---------------------------------------------------------------------------
# Run manifests


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run, plus a content-derived id.

    ``manifest_id`` hashes (command, config, seed, input digest, library
    version) -- not the timestamp -- so identical runs share an id and all
    output files referencing it are bit-identical across repeats.
    """

    command: str
    config: dict
    seed: int
    input_digest: str
    library_version: str = LIBRARY_VERSION
    created_utc: str = field(default="")
    manifest_id: str = field(default="")

    def __post_init__(self):
        identity = _canonical_json(
            {
                "command": self.command,
                "config": self.config,
                "seed": self.seed,
                "input_digest": self.input_digest,
                "library_version": self.library_version,
            }
        )
        object.__setattr__(
            self, "manifest_id", hashlib.sha256(identity.encode()).hexdigest()[:16]
        )
        if not self.created_utc:
            stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            object.__setattr__(self, "created_utc", stamp)


def write_manifest(manifest: RunManifest, directory: str | Path) -> Path:
    path = Path(directory) / "manifest.json"
    _atomic_write_text(path, json.dumps(asdict(manifest), indent=1, sort_keys=True) + "\n")
    return path


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
