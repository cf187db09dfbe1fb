"""
Utility functions for the onriccati package: matrix files, seeded generators
and CSV output.
"""

import csv
from typing import IO, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import MatrixFileError

CSV_FLOAT_FORMAT = "%.17g"


def _tokens(text: str) -> Iterator[Tuple[int, str]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0]
        for token in content.split():
            yield lineno, token


def parse_matrices(text: str, count: int = None) -> List[np.ndarray]:
    """
    Parse consecutive matrix blocks.

    Each block is a header "rows cols" followed by rows*cols whitespace-separated
    row-major decimal entries. ``#`` starts a comment.

    Args:
        text: File contents.
        count: Number of blocks expected; ``None`` reads until the end.

    Returns:
        The parsed matrices.

    Raises:
        MatrixFileError: With the offending line number on malformed input.
    """
    tokens = _tokens(text)
    last_line = 0
    matrices: List[np.ndarray] = []
    while count is None or len(matrices) < count:
        header = []
        for lineno, token in tokens:
            last_line = lineno
            try:
                value = int(token)
            except ValueError:
                raise MatrixFileError(
                    f"expected an integer dimension, got {token!r}", lineno
                )
            if value < 1:
                raise MatrixFileError(
                    f"dimension must be positive, got {value}", lineno
                )
            header.append(value)
            if len(header) == 2:
                break
        if not header and count is None:
            break
        if len(header) < 2:
            message = (
                "incomplete matrix header" if header
                else f"expected {count} matrices, found {len(matrices)}"
            )
            raise MatrixFileError(message, last_line + 1)
        rows, cols = header
        entries = []
        for lineno, token in tokens:
            last_line = lineno
            try:
                entries.append(float(token))
            except ValueError:
                raise MatrixFileError(f"expected a number, got {token!r}", lineno)
            if not np.isfinite(entries[-1]):
                raise MatrixFileError(f"non-finite entry {token!r}", lineno)
            if len(entries) == rows * cols:
                break
        if len(entries) < rows * cols:
            raise MatrixFileError(
                f"{rows}x{cols} matrix needs {rows * cols} entries, got {len(entries)}",
                last_line + 1,
            )
        matrices.append(np.array(entries).reshape(rows, cols))
    extra = next(tokens, None)
    if extra is not None:
        raise MatrixFileError(f"unexpected trailing content {extra[1]!r}", extra[0])
    return matrices


def read_matrices(path: str, count: int = None) -> List[np.ndarray]:
    """Read matrix blocks from ``path``; I/O failures surface as ``MatrixFileError``."""
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as exc:
        raise MatrixFileError(f"cannot read {path}: {exc}") from exc
    return parse_matrices(text, count)


def format_matrix(M) -> str:
    """One matrix block in the file format, entries with 17 significant digits."""
    mat = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    lines.extend(" ".join(CSV_FLOAT_FORMAT % v for v in row) for row in mat)
    return "\n".join(lines) + "\n"


def make_rng(seed) -> np.random.Generator:
    """Generator on Philox-4x64, the pinned counter-based bit generator."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed, count: int) -> List[np.random.Generator]:
    """``count`` independent Philox streams derived from a seed or ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return CSV_FLOAT_FORMAT % value
    return str(value)


def write_csv(stream: IO[str], header: Sequence[str], rows) -> None:
    """Write ``rows`` under ``header`` with floats in 17 significant digits."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
