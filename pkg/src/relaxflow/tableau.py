"""Double Butcher tableaux for implicit-explicit Runge-Kutta pairs.

Data model for a pair of tableaux (an explicit one and a diagonally implicit
one sharing the stage count), built-in coefficient sets, a small plain-text
file format, structural classification, global stiff accuracy, and checks of
the classical order conditions up to order three.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "TableauError",
    "TableauParseError",
    "ButcherTableau",
    "ImexPair",
    "SchemeKind",
    "SchemeType",
    "OrderReport",
    "classify",
    "is_globally_stiffly_accurate",
    "check_order",
    "builtin",
    "builtin_names",
    "parse_tableau_text",
    "parse_tableau_file",
    "serialize",
]

_ROW_SUM_TOL = 1e-12


class TableauError(ValueError):
    """Invalid tableau data: bad shape, triangularity, or inconsistent pair."""


class TableauParseError(TableauError):
    """Malformed tableau file.  ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _freeze(arr, shape, what: str) -> np.ndarray:
    a = np.array(arr, dtype=float)
    if a.shape != shape:
        raise TableauError(f"{what}: expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """One Runge-Kutta tableau (A, b, c) with s stages.

    Arrays are made read-only so a tableau can be shared freely between
    threads and runs.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise TableauError(f"A must be square, got shape {a.shape}")
        s = a.shape[0]
        if s < 1:
            raise TableauError("tableau needs at least one stage")
        object.__setattr__(self, "a", _freeze(a, (s, s), "A"))
        object.__setattr__(self, "b", _freeze(self.b, (s,), "b"))
        object.__setattr__(self, "c", _freeze(self.c, (s,), "c"))

    @property
    def s(self) -> int:
        return self.a.shape[0]

    def is_strictly_lower_triangular(self) -> bool:
        return bool(np.all(self.a[np.triu_indices(self.s)] == 0.0))

    def is_lower_triangular(self) -> bool:
        return bool(np.all(self.a[np.triu_indices(self.s, k=1)] == 0.0))

    def row_sum_mismatch(self) -> float:
        """max_i |c_i - sum_j a_ij|; the usual convention, checked not forced."""
        return float(np.max(np.abs(self.c - self.a.sum(axis=1))))


@dataclass(frozen=True, eq=False)
class ImexPair:
    """An explicit tableau and a diagonally implicit tableau, same stage count.

    The explicit part must be strictly lower triangular, the implicit part
    lower triangular.  A row-sum mismatch (c_i != sum_j a_ij) is legal but
    unusual, so it is warned about rather than rejected.
    """

    explicit: ButcherTableau
    implicit: ButcherTableau
    name: str = ""
    comment: str = ""

    def __post_init__(self):
        if self.explicit.s != self.implicit.s:
            raise TableauError(
                f"stage count mismatch: explicit {self.explicit.s}, "
                f"implicit {self.implicit.s}"
            )
        if not self.explicit.is_strictly_lower_triangular():
            raise TableauError("explicit tableau must be strictly lower triangular")
        if not self.implicit.is_lower_triangular():
            raise TableauError("implicit tableau must be lower triangular")
        for label, tab in (("explicit", self.explicit), ("implicit", self.implicit)):
            mism = tab.row_sum_mismatch()
            if mism > _ROW_SUM_TOL:
                warnings.warn(
                    f"{label} tableau of {self.name or 'pair'}: c differs from "
                    f"row sums of A by {mism:.3e}",
                    stacklevel=2,
                )

    @property
    def s(self) -> int:
        return self.explicit.s


class SchemeKind(Enum):
    TYPE_A = "A"
    TYPE_CK = "CK"
    TYPE_ARS = "ARS"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class SchemeType:
    """Structural classification of the implicit tableau."""

    kind: SchemeKind
    invertible_a: bool
    zero_first_row: bool
    zero_first_column: bool


def _smallest_singular_value(mat: np.ndarray) -> float:
    if mat.size == 0:
        return 0.0
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def classify(pair: ImexPair, tol: float | None = None) -> SchemeType:
    """Classify the implicit tableau as type A, CK, or ARS.

    Type A: A invertible.  Type CK: first row of A vanishes and the trailing
    (s-1)x(s-1) block is invertible.  Type ARS: CK with, in addition, a zero
    first column.  The most specific label wins (ARS is a subset of CK).
    Invertibility is decided by the smallest singular value exceeding ``tol``
    (default 1e-12 times the largest |a_ij|).
    """
    a = pair.implicit.a
    s = pair.s
    scale = float(np.max(np.abs(a)))
    if tol is None:
        tol = 1e-12 * max(scale, 1.0)
    zero_first_row = bool(np.max(np.abs(a[0, :]), initial=0.0) <= tol)
    zero_first_col = bool(np.max(np.abs(a[1:, 0]), initial=0.0) <= tol)
    invertible_a = _smallest_singular_value(a) > tol

    if zero_first_row and s >= 2:
        a_hat = a[1:, 1:]
        if _smallest_singular_value(a_hat) > tol:
            kind = SchemeKind.TYPE_ARS if zero_first_col else SchemeKind.TYPE_CK
        else:
            kind = SchemeKind.UNCLASSIFIED
    elif invertible_a:
        kind = SchemeKind.TYPE_A
    else:
        kind = SchemeKind.UNCLASSIFIED
    return SchemeType(
        kind=kind,
        invertible_a=invertible_a,
        zero_first_row=zero_first_row,
        zero_first_column=zero_first_col,
    )


def is_globally_stiffly_accurate(pair: ImexPair, tol: float = 1e-12) -> bool:
    """True iff b equals the last row of A for both tableaux and c_s = 1 for both.

    For such a pair the step output coincides with the last stage value.
    """
    ex, im = pair.explicit, pair.implicit
    return (
        float(np.max(np.abs(im.b - im.a[-1, :]))) <= tol
        and float(np.max(np.abs(ex.b - ex.a[-1, :]))) <= tol
        and abs(im.c[-1] - 1.0) <= tol
        and abs(ex.c[-1] - 1.0) <= tol
    )


@dataclass(frozen=True)
class OrderReport:
    """Residuals of the classical order conditions for both tableaux.

    Keys: ``b_sum`` (order 1), ``bc`` (order 2), ``bcc``/``bAc`` (order 3).
    ``coupling_waiver`` is true iff c~ = c and b~ = b, in which case the mixed
    explicit/implicit coupling conditions up to order three are implied by the
    per-tableau ones and need no separate check.
    """

    p: int
    explicit: dict
    implicit: dict
    coupling_waiver: bool

    def max_residual(self) -> float:
        vals = list(self.explicit.values()) + list(self.implicit.values())
        return max(abs(v) for v in vals)

    def satisfied(self, tol: float = 1e-12) -> bool:
        return self.max_residual() <= tol


def _order_residuals(tab: ButcherTableau, p: int) -> dict:
    b, c, a = tab.b, tab.c, tab.a
    res = {"b_sum": float(b.sum() - 1.0)}
    if p >= 2:
        res["bc"] = float(b @ c - 0.5)
    if p >= 3:
        res["bcc"] = float(b @ (c * c) - 1.0 / 3.0)
        res["bAc"] = float(b @ (a @ c) - 1.0 / 6.0)
    return res


def check_order(pair: ImexPair, p: int) -> OrderReport:
    """Evaluate the classical conditions for order p (1 <= p <= 3) per tableau."""
    if p not in (1, 2, 3):
        raise ValueError(f"order conditions implemented for p in 1..3, got {p}")
    waiver = bool(
        np.array_equal(pair.explicit.c, pair.implicit.c)
        and np.array_equal(pair.explicit.b, pair.implicit.b)
    ) or bool(
        np.max(np.abs(pair.explicit.c - pair.implicit.c)) <= 1e-14
        and np.max(np.abs(pair.explicit.b - pair.implicit.b)) <= 1e-14
    )
    return OrderReport(
        p=p,
        explicit=_order_residuals(pair.explicit, p),
        implicit=_order_residuals(pair.implicit, p),
        coupling_waiver=waiver,
    )


def attained_order(pair: ImexPair, tol: float = 1e-12) -> int:
    """Largest p in 0..3 whose per-tableau conditions hold within tol."""
    best = 0
    for p in (1, 2, 3):
        if check_order(pair, p).satisfied(tol):
            best = p
        else:
            break
    return best


# ---------------------------------------------------------------------------
# built-in pairs
# ---------------------------------------------------------------------------

def _ars111() -> ImexPair:
    """First-order implicit-explicit Euler pair of ARS type."""
    explicit = ButcherTableau(
        a=[[0.0, 0.0], [1.0, 0.0]], b=[1.0, 0.0], c=[0.0, 1.0]
    )
    implicit = ButcherTableau(
        a=[[0.0, 0.0], [0.0, 1.0]], b=[0.0, 1.0], c=[0.0, 1.0]
    )
    return ImexPair(explicit, implicit, name="ARS111")


def _sp111() -> ImexPair:
    """One-stage splitting pair: forward Euler with backward Euler (type A)."""
    explicit = ButcherTableau(a=[[0.0]], b=[1.0], c=[0.0])
    implicit = ButcherTableau(a=[[1.0]], b=[1.0], c=[1.0])
    return ImexPair(explicit, implicit, name="SP111")


def _midpoint_ars() -> ImexPair:
    """Second-order midpoint pair (ARS type, b = b~, c = c~)."""
    explicit = ButcherTableau(
        a=[[0.0, 0.0], [0.5, 0.0]], b=[0.0, 1.0], c=[0.0, 0.5]
    )
    implicit = ButcherTableau(
        a=[[0.0, 0.0], [0.0, 0.5]], b=[0.0, 1.0], c=[0.0, 0.5]
    )
    return ImexPair(explicit, implicit, name="MIDPOINT-ARS")


def _ssp332() -> ImexPair:
    # Coefficients transcribed from Pareschi & Russo, J. Sci. Comput. 25 (2005),
    # scheme IMEX-SSP2(3,3,2): explicit part is the optimal 3-stage 2nd-order
    # SSP Runge-Kutta, implicit part the L-stable DIRK with b = b~.
    third = 1.0 / 3.0
    explicit = ButcherTableau(
        a=[[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.5, 0.0]],
        b=[third, third, third],
        c=[0.0, 0.5, 1.0],
    )
    implicit = ButcherTableau(
        a=[[0.25, 0.0, 0.0], [0.0, 0.25, 0.0], [third, third, third]],
        b=[third, third, third],
        c=[0.25, 0.25, 1.0],
    )
    return ImexPair(
        explicit,
        implicit,
        name="SSP332",
        comment="source: Pareschi & Russo (2005), IMEX-SSP2(3,3,2)",
    )


_BUILTINS = {
    "ARS111": _ars111,
    "SP111": _sp111,
    "MIDPOINT-ARS": _midpoint_ars,
    "SSP332": _ssp332,
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def builtin(name: str) -> ImexPair:
    """Return a built-in pair by name (case-insensitive, '_' same as '-')."""
    key = name.strip().upper().replace("_", "-")
    try:
        return _BUILTINS[key]()
    except KeyError:
        raise TableauError(
            f"unknown built-in pair {name!r}; available: {', '.join(builtin_names())}"
        ) from None


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------
#
#   # optional comment lines
#   s <stages>
#   explicit
#   <s rows of s coefficients>      rows of A~
#   <s coefficients>                b~
#   <s coefficients>                c~
#   implicit
#   <A rows> <b> <c>                same layout
#
# '#' starts a comment; blank lines are ignored; entries may use scientific
# notation.  serialize() followed by parse gives back the same text.

def serialize(pair: ImexPair) -> str:
    lines = []
    if pair.name:
        lines.append(f"# name: {pair.name}")
    if pair.comment:
        lines.append(f"# {pair.comment}")
    lines.append(f"s {pair.s}")

    def emit(tab: ButcherTableau, label: str):
        lines.append(label)
        for row in tab.a:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in tab.b))
        lines.append(" ".join(repr(float(v)) for v in tab.c))

    emit(pair.explicit, "explicit")
    emit(pair.implicit, "implicit")
    return "\n".join(lines) + "\n"


def _parse_row(token_line: str, line_no: int, s: int) -> list[float]:
    parts = token_line.split()
    if len(parts) != s:
        raise TableauParseError(
            f"expected {s} entries, found {len(parts)}", line_no
        )
    vals = []
    for tok in parts:
        try:
            vals.append(float(tok))
        except ValueError:
            raise TableauParseError(f"non-numeric entry {tok!r}", line_no) from None
    return vals


def parse_tableau_text(text: str) -> ImexPair:
    """Parse the text format above into a validated pair."""
    name = ""
    comment = ""
    # (line_no, content) with comments/blanks stripped
    rows: list[tuple[int, str]] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.lower().startswith("name:"):
                name = body[5:].strip()
            elif body and not comment:
                comment = body
            continue
        rows.append((i, stripped))

    if not rows:
        raise TableauParseError("empty tableau file", 1)

    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(rows):
            last = rows[-1][0] if rows else 1
            raise TableauParseError(f"unexpected end of file, wanted {what}", last)
        item = rows[pos]
        pos += 1
        return item

    line_no, header = take("'s <stages>'")
    parts = header.split()
    if len(parts) != 2 or parts[0] != "s":
        raise TableauParseError("expected 's <stages>' header", line_no)
    try:
        s = int(parts[1])
    except ValueError:
        raise TableauParseError(f"non-numeric stage count {parts[1]!r}", line_no) from None
    if s < 1:
        raise TableauParseError(f"stage count must be positive, got {s}", line_no)

    def read_block(label: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        line_no, word = take(f"'{label}'")
        if word != label:
            raise TableauParseError(f"expected {label!r} section, found {word!r}", line_no)
        a = np.zeros((s, s))
        first_line = None
        for i in range(s):
            ln, content = take(f"row {i + 1} of {label} A")
            if first_line is None:
                first_line = ln
            a[i, :] = _parse_row(content, ln, s)
        ln_b, content = take(f"{label} b row")
        b = np.array(_parse_row(content, ln_b, s))
        ln_c, content = take(f"{label} c row")
        c = np.array(_parse_row(content, ln_c, s))
        return a, b, c, first_line if first_line is not None else line_no

    ae, be, ce, ex_line = read_block("explicit")
    ai, bi, ci, im_line = read_block("implicit")
    if pos != len(rows):
        raise TableauParseError("trailing content after tableau", rows[pos][0])

    # triangularity diagnosed here so the error can name a file line
    for i in range(s):
        for j in range(i, s):
            if ae[i, j] != 0.0:
                raise TableauParseError(
                    f"explicit tableau not strictly lower triangular at a[{i + 1},{j + 1}]",
                    ex_line + i,
                )
        for j in range(i + 1, s):
            if ai[i, j] != 0.0:
                raise TableauParseError(
                    f"implicit tableau not lower triangular at a[{i + 1},{j + 1}]",
                    im_line + i,
                )

    return ImexPair(
        explicit=ButcherTableau(a=ae, b=be, c=ce),
        implicit=ButcherTableau(a=ai, b=bi, c=ci),
        name=name,
        comment=comment,
    )


def parse_tableau_file(path) -> ImexPair:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tableau_text(fh.read())
