"""The small UCI benchmark bundle: download, checksum bookkeeping and loading.

Each dataset is normalized to a comma-delimited file with a header row in
the data directory (``$DMRF_DATA``, default ``~/.cache/dmrf``). Checksums of
downloaded archives are recorded in ``SHA256SUMS`` on first fetch and
verified on every later fetch; entries with a ``sha256`` pin are verified
against the pin as well.

Tic-tac-toe needs no download: the UCI endgame table is exactly the set of
terminal boards of games where x moves first, so it is rebuilt by
enumerating every game.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .data import Dataset, load_csv
from .errors import DataError

UCI_STATIC = "https://archive.ics.uci.edu/static/public"


@dataclass(frozen=True)
class BundleEntry:
    name: str
    url: str | None
    member: str | None
    label: str
    task: str
    log_label: bool = False
    sha256: str | None = None


def _data_dir() -> Path:
    return Path(os.environ.get("DMRF_DATA", Path.home() / ".cache" / "dmrf"))


# -- tic-tac-toe ------------------------------------------------------------------------

SQUARES = ("top-left", "top-middle", "top-right", "middle-left", "middle-middle",
           "middle-right", "bottom-left", "bottom-middle", "bottom-right")
_LINES = ((0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6))


def _winner(board: str) -> str | None:
    for a, b, c in _LINES:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def tictactoe_endgames() -> list[tuple[str, str]]:
    """All terminal boards of x-first games as ``(board, class)`` pairs.

    ``class`` is ``positive`` when x has three in a row. Rows come positives
    first, each block in lexicographic order with x < o < b.
    """
    terminal: set[str] = set()
    seen: set[str] = set()
    stack = ["b" * 9]
    while stack:
        board = stack.pop()
        if board in seen:
            continue
        seen.add(board)
        if _winner(board) or "b" not in board:
            terminal.add(board)
            continue
        player = "x" if board.count("x") == board.count("o") else "o"
        for i, cell in enumerate(board):
            if cell == "b":
                stack.append(board[:i] + player + board[i + 1:])
    rank = str.maketrans("xob", "012")
    rows = [(b, "positive" if _winner(b) == "x" else "negative") for b in terminal]
    rows.sort(key=lambda r: (r[1] != "positive", r[0].translate(rank)))
    return rows


def _write_tictactoe(path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{s}-square" for s in SQUARES] + ["Class"])
        for board, label in tictactoe_endgames():
            writer.writerow(list(board) + [label])


# -- converters for downloaded archives ------------------------------------------------

def _whitespace_table(raw: bytes, header: list[str]) -> list[list[str]]:
    rows = [line.split() for line in raw.decode().splitlines() if line.strip()]
    return [header] + rows


def _comma_table(raw: bytes, header: list[str] | None = None) -> list[list[str]]:
    rows = [row for row in csv.reader(io.StringIO(raw.decode())) if row]
    return ([header] if header else []) + rows


def _excel_table(raw: bytes, header: list[str] | None = None) -> list[list[str]]:
    try:
        import pandas as pd  # optional; only needed for spreadsheet sources
        frame = pd.read_excel(io.BytesIO(raw))
    except ImportError as exc:
        raise DataError("reading .xlsx sources needs pandas and openpyxl: pip install 'artifact[fetch]'") from exc
    return [list(map(str, frame.columns))] + frame.astype(str).values.tolist()


VERTEBRAL_COLUMNS = ["pelvic_incidence", "pelvic_tilt", "lumbar_lordosis_angle",
                     "sacral_slope", "pelvic_radius", "grade_of_spondylolisthesis", "class"]

BUNDLE: dict[str, BundleEntry] = {
    "tic-tac-toe": BundleEntry("tic-tac-toe", None, None, "Class", "classification"),
    "vertebral": BundleEntry("vertebral", f"{UCI_STATIC}/212/vertebral+column.zip",
                             "column_3C.dat", "class", "classification"),
    "blogger": BundleEntry("blogger", f"{UCI_STATIC}/245/blogger.zip", ".xlsx", "-1", "classification"),
    "ale": BundleEntry("ale", f"{UCI_STATIC}/844/average+localization+error+ale+in+sensor+node+localization+process+in+wsns.zip",
                       ".csv", "ale", "regression"),
}

CONVERTERS: dict[str, Callable[[bytes], list[list[str]]]] = {
    "vertebral": lambda raw: _whitespace_table(raw, VERTEBRAL_COLUMNS),
    "blogger": _excel_table,
    "ale": _comma_table,
}


def dataset_path(name: str) -> Path:
    return _data_dir() / f"{name}.csv"


def available(name: str) -> bool:
    return dataset_path(name).exists()


def _read_sums(path: Path) -> dict[str, str]:
    if not path.exists():
        return {}
    return dict(line.split()[::-1] for line in path.read_text().splitlines() if line.strip())


def _extract(archive: bytes, member: str) -> bytes:
    with zipfile.ZipFile(io.BytesIO(archive)) as zf:
        names = [n for n in zf.namelist() if n.endswith(member)]
        if not names:
            raise DataError(f"archive has no member ending in {member!r}")
        return zf.read(names[0])


def fetch(name: str, force: bool = False, timeout: float = 60.0) -> Path:
    """Materialize dataset ``name`` in the data directory and return its CSV path."""
    if name not in BUNDLE:
        raise DataError(f"unknown dataset {name!r}; bundle holds {', '.join(BUNDLE)}")
    entry = BUNDLE[name]
    target = dataset_path(name)
    if target.exists() and not force:
        return target
    target.parent.mkdir(parents=True, exist_ok=True)
    if entry.url is None:
        _write_tictactoe(target)
        return target
    try:
        with urllib.request.urlopen(entry.url, timeout=timeout) as response:
            archive = response.read()
    except OSError as exc:
        raise DataError(f"cannot download {name} from {entry.url}: {exc}") from exc
    digest = hashlib.sha256(archive).hexdigest()
    sums_path = target.parent / "SHA256SUMS"
    sums = _read_sums(sums_path)
    expected = entry.sha256 or sums.get(name)
    if expected and digest != expected:
        raise DataError(f"checksum mismatch for {name}: got {digest}, expected {expected}")
    sums[name] = digest
    sums_path.write_text("".join(f"{h}  {n}\n" for n, h in sorted(sums.items())))
    table = CONVERTERS[name](_extract(archive, entry.member))
    with open(target, "w", newline="") as fh:
        csv.writer(fh).writerows(table)
    return target


def load(name: str) -> Dataset:
    """Load a fetched bundle dataset; raises :class:`DataError` when it is absent."""
    entry = BUNDLE[name]
    path = dataset_path(name)
    if not path.exists():
        raise DataError(f"dataset {name!r} is not fetched; run `dmrf fetch {name}`")
    return load_csv(path, label=entry.label, has_header=True, log_label=entry.log_label,
                    task=entry.task, name=name)
