"""Butcher tableaus: registry of the energy-optimized explicit methods and
classical baselines, validation against claimed orders, direct coefficient
residuals, and a JSON file format.

Float registry entries are transcribed digit-for-digit from their source;
exact entries are rationals.  For exact tableaus c must equal the row sums of
A exactly; float tableaus are checked to 1e-12.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from . import bseries
from .trees import RootedTree

Entry = Union[Fraction, float]

ROW_SUM_TOL = 1e-12

__all__ = [
    "ButcherTableau",
    "ValidationReport",
    "registry",
    "get_method",
    "rk22",
    "validate",
    "pep_residuals",
    "tableau_to_json",
    "tableau_from_json",
    "write_tableau",
    "read_tableau",
    "as_float_arrays",
]


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (A, b, c) of an explicit RK method.

    kind is 'exact' (Fraction entries) or 'float'; entries never mix.  A must
    be strictly lower triangular.  claimed_p / claimed_q record the orders the
    method is supposed to have, for validation.
    """

    name: str
    A: tuple[tuple[Entry, ...], ...]
    b: tuple[Entry, ...]
    c: tuple[Entry, ...]
    kind: str
    claimed_p: int | None = None
    claimed_q: int | None = None

    @property
    def s(self) -> int:
        return len(self.b)

    def structural_problems(self) -> list[str]:
        out = []
        s = self.s
        if len(self.A) != s or any(len(row) != s for row in self.A):
            out.append(f"A must be {s}x{s}")
            return out
        if len(self.c) != s:
            out.append(f"c must have {s} entries")
            return out
        for i in range(s):
            for j in range(i, s):
                if self.A[i][j] != 0:
                    out.append(f"A[{i}][{j}] = {self.A[i][j]} breaks strict lower triangularity")
        for i in range(s):
            rs = sum(self.A[i][:i], Fraction(0) if self.kind == "exact" else 0.0)
            if self.kind == "exact":
                ok = rs == self.c[i]
            else:
                ok = abs(rs - self.c[i]) <= ROW_SUM_TOL
            if not ok:
                out.append(f"row sum {rs} of stage {i} differs from c[{i}] = {self.c[i]}")
        bsum = sum(self.b)
        if self.kind == "exact":
            if bsum != 1:
                out.append(f"sum(b) = {bsum} must be 1")
        elif abs(bsum - 1.0) > ROW_SUM_TOL:
            out.append(f"sum(b) = {bsum} must be 1")
        return out

    def as_float(self) -> "ButcherTableau":
        """Demoted copy for numerical integration (exact is never promoted)."""
        if self.kind == "float":
            return self
        return ButcherTableau(
            self.name,
            tuple(tuple(float(x) for x in row) for row in self.A),
            tuple(float(x) for x in self.b),
            tuple(float(x) for x in self.c),
            "float",
            self.claimed_p,
            self.claimed_q,
        )


def as_float_arrays(t: ButcherTableau) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ft = t.as_float()
    return np.array(ft.A), np.array(ft.b), np.array(ft.c)


def _exact(name, A, b, p=None, q=None) -> ButcherTableau:
    A = tuple(tuple(Fraction(x) for x in row) for row in A)
    b = tuple(Fraction(x) for x in b)
    c = tuple(sum(row, Fraction(0)) for row in A)
    return ButcherTableau(name, A, b, c, "exact", p, q)


def _float(name, A, b, c, p=None, q=None) -> ButcherTableau:
    return ButcherTableau(
        name,
        tuple(tuple(float(x) for x in row) for row in A),
        tuple(float(x) for x in b),
        tuple(float(x) for x in c),
        "float",
        p,
        q,
    )


def rk22(alpha: Entry) -> ButcherTableau:
    """The two-stage second-order family: c2 = alpha, b2 = 1/(2 alpha)."""
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    if isinstance(alpha, Fraction):
        half = Fraction(1, 2)
        return _exact(
            f"RK22({alpha})",
            [[0, 0], [alpha, 0]],
            [1 - half / alpha, half / alpha],
            p=2,
        )
    a = float(alpha)
    return _float(
        f"RK22({a:g})",
        [[0.0, 0.0], [a, 0.0]],
        [1.0 - 0.5 / a, 0.5 / a],
        [0.0, a],
        p=2,
    )


def _pep223() -> ButcherTableau:
    t = rk22(Fraction(2, 3))
    return ButcherTableau(
        "PEP(2,2,3)", t.A, t.b, t.c, "exact", 2, 3
    )


def _pep324() -> ButcherTableau:
    return _exact(
        "PEP(3,2,4)",
        [
            [0, 0, 0],
            [Fraction(1, 3), 0, 0],
            [Fraction(-5, 48), Fraction(15, 16), 0],
        ],
        [Fraction(1, 10), Fraction(1, 2), Fraction(2, 5)],
        p=2,
        q=4,
    )


def _pep425() -> ButcherTableau:
    # exact rationals; c derived from the row sums of A
    return _exact(
        "PEP(4,2,5)",
        [
            [0, 0, 0, 0],
            [Fraction(1, 10), 0, 0, 0],
            [Fraction(-35816, 35721), Fraction(56795, 35721), 0, 0],
            [
                Fraction(11994761, 5328000),
                Fraction(-11002961, 4420800),
                Fraction(215846127, 181744000),
                0,
            ],
        ],
        [
            Fraction(-17, 222),
            Fraction(6250, 15657),
            Fraction(5250987, 10382126),
            Fraction(4000, 23307),
        ],
        p=2,
        q=5,
    )


def _pep526() -> ButcherTableau:
    A = [[0.0] * 5 for _ in range(5)]
    A[1][0] = 0.193445628056365
    A[2][0] = -0.090431947690469
    A[2][1] = 0.646659568003039
    A[3][0] = -0.059239621354435
    A[3][1] = 0.598571867726670
    A[3][2] = -0.010476084304794
    A[4][0] = 0.173154586278662
    A[4][1] = 0.043637751980064
    A[4][2] = 0.949323298732961
    A[4][3] = -0.262838451019868
    b = [
        0.054828314201395,
        0.310080077556546,
        0.531276882919990,
        -0.135494569336049,
        0.239309294658118,
    ]
    c = [0.0, 0.193445628056365, 0.55622762031257, 0.528856162067441, 0.9032771859718189]
    return _float("PEP(5,2,6)", A, b, c, p=2, q=6)


def _pep636() -> ButcherTableau:
    A = [[0.0] * 6 for _ in range(6)]
    A[1][0] = 0.12316523079127038
    A[2][0] = -0.53348119048187126
    A[2][1] = 1.1200645707708279
    A[3][0] = 0.35987162974687092
    A[3][1] = -0.17675778446586507
    A[3][2] = 0.7331973326225617
    A[4][0] = 0.015700424346522388
    A[4][1] = 0.02862938097533644
    A[4][2] = -0.014047147149911631
    A[4][3] = -0.015653338246176568
    A[5][0] = -1.9608805853984794
    A[5][1] = -0.82154709029385564
    A[5][2] = -0.0033631561953843502
    A[5][3] = 0.046367461001250457
    A[5][4] = 2.782035718578454
    b = [
        0.78642719559722885,
        0.69510370728230297,
        0.42190724518033551,
        0.21262030193155254,
        -0.70167978222250704,
        -0.41437866776891263,
    ]
    c = [
        0.0,
        0.12316523079127044,
        0.58658338028895673,
        0.91631117790356775,
        0.014629319925770667,
        0.042612347691984923,
    ]
    return _float("PEP(6,3,6)", A, b, c, p=3, q=6)


def _pep746() -> ButcherTableau:
    A = [[0.0] * 7 for _ in range(7)]
    A[1][0] = -0.10731260966924323
    A[2][0] = 0.14772934954602848
    A[2][1] = -0.12537555684690285
    A[3][0] = 0.7016079790308741
    A[3][1] = -0.75094597518803941
    A[3][2] = 0.76631666070124027
    A[4][0] = -0.8967481787471202
    A[4][1] = -0.43795858531068965
    A[4][2] = 1.7727346351832869
    A[4][3] = 0.1706052810617312
    A[5][0] = 1.6243872270239892
    A[5][1] = -0.69700589895015241
    A[5][2] = -0.3861309831750398
    A[5][3] = -0.032848941899304235
    A[5][4] = 0.30227620385295728
    A[6][0] = -0.32463926305048885
    A[6][1] = -0.3480143346241919
    A[6][2] = 1.3500419757109139
    A[6][3] = 0.039096802121597336
    A[6][4] = -0.17851883247877129
    A[6][5] = 0.010142489530892661
    b = [
        -0.69203318482299292,
        0.0074442860308153933,
        0.93216717844052677,
        -1.159431111205361,
        0.27787978605406632,
        0.93890392164164138,
        0.69506912386130404,
    ]
    c = [
        0.0,
        -0.10731260966924323,
        0.022353792699125609,
        0.71697866454407488,
        0.60863315218720804,
        0.81067760685245005,
        0.54810883720995185,
    ]
    return _float("PEP(7,4,6)", A, b, c, p=4, q=6)


def _pep756() -> ButcherTableau:
    A = [[0.0] * 7 for _ in range(7)]
    A[1][0] = 0.34288981581855521
    A[2][0] = 0.16800230418143236
    A[2][1] = 0.1262987524809161
    A[3][0] = 0.4326925567104672
    A[3][1] = -0.24221982610439177
    A[3][2] = 0.15241708521248304
    A[4][0] = 0.019843989305203335
    A[4][1] = 0.20330206481276515
    A[4][2] = -0.3494376489494413
    A[4][3] = 0.09780248603799992
    A[5][0] = 3.5441758455721732
    A[5][1] = 9.884560134482289
    A[5][2] = -3.7993663287883006
    A[5][3] = -6.07804112569088
    A[5][4] = -2.820029405964353
    A[6][0] = -16.625817935606782
    A[6][1] = -49.999620978741511
    A[6][2] = 22.3661445506308
    A[6][3] = 30.50526767511958
    A[6][4] = 13.408435545803448
    A[6][5] = 1.3455911427944685
    b = [
        0.15881394125505754,
        3.390357323579911e-13,
        0.4109696726168125,
        -1.6409254928717294e-13,
        -0.056173857997504642,
        0.40542999348169673,
        0.08096025064376304,
    ]
    # published c3 drops a digit relative to the row sum; c is derived here
    c = [sum(A[i][:i], 0.0) for i in range(7)]
    return _float("PEP(7,5,6)", A, b, c, p=5, q=6)


def _rk33() -> ButcherTableau:
    # Kutta's third-order method, the documented baseline choice
    return _exact(
        "RK(3,3)",
        [
            [0, 0, 0],
            [Fraction(1, 2), 0, 0],
            [Fraction(-1), Fraction(2), 0],
        ],
        [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)],
        p=3,
        q=3,
    )


def _rk44() -> ButcherTableau:
    return _exact(
        "RK(4,4)",
        [
            [0, 0, 0, 0],
            [Fraction(1, 2), 0, 0, 0],
            [0, Fraction(1, 2), 0, 0],
            [0, 0, Fraction(1), 0],
        ],
        [Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6)],
        p=4,
        q=4,
    )


_BUILDERS = {
    "rk22": lambda: rk22(Fraction(1, 2)),
    "rk33": _rk33,
    "rk44": _rk44,
    "pep223": _pep223,
    "pep324": _pep324,
    "pep425": _pep425,
    "pep526": _pep526,
    "pep636": _pep636,
    "pep746": _pep746,
    "pep756": _pep756,
}


def registry() -> dict[str, ButcherTableau]:
    """All built-in methods keyed by short name.  rk22 defaults to alpha=1/2;
    use rk22(alpha) for other members of the family."""
    return {k: make() for k, make in _BUILDERS.items()}


def get_method(name: str, alpha: Entry | None = None) -> ButcherTableau:
    key = name.lower()
    if key == "rk22" and alpha is not None:
        return rk22(alpha)
    reg = registry()
    if key in reg:
        return reg[key]
    by_display = {t.name.lower(): t for t in reg.values()}
    if key in by_display:
        return by_display[key]
    raise KeyError(f"unknown method {name!r}; known: {', '.join(sorted(reg))}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    name: str
    ok: bool
    problems: tuple[str, ...]
    classical_order: int | None
    pep_order: int | None
    claimed_p: int | None
    claimed_q: int | None

    def __str__(self) -> str:
        status = "ok" if self.ok else "FAILED"
        lines = [f"{self.name}: {status}"]
        for p in self.problems:
            lines.append(f"  - {p}")
        if self.classical_order is not None:
            lines.append(f"  classical order: {self.classical_order}")
            lines.append(f"  energy-preservation order: {self.pep_order}")
        return "\n".join(lines)


def validate(t: ButcherTableau, order_cap: int | None = None) -> ValidationReport:
    """Check structural invariants, then certify (p, q) against any claim.

    The order search runs one order past the claim so that equality (not just
    a lower bound) is certified.
    """
    problems = t.structural_problems()
    if problems:
        return ValidationReport(
            t.name, False, tuple(problems), None, None, t.claimed_p, t.claimed_q
        )
    if order_cap is None:
        claim = max(filter(None, (t.claimed_p, t.claimed_q)), default=4)
        order_cap = min(claim + 1, 8)
    u = bseries.elementary_weights(t, order_cap)
    p = bseries.classical_order(u)
    q = bseries.pep_order(t, order_cap)
    if t.claimed_p is not None and p != t.claimed_p:
        problems.append(f"classical order {p} != claimed {t.claimed_p}")
    if t.claimed_q is not None and q != t.claimed_q:
        problems.append(f"energy-preservation order {q} != claimed {t.claimed_q}")
    return ValidationReport(
        t.name, not problems, tuple(problems), p, q, t.claimed_p, t.claimed_q
    )


# ---------------------------------------------------------------------------
# direct coefficient residuals


def pep_residuals(t: ButcherTableau, q: int) -> dict[str, Entry]:
    """Energy-preservation residuals as explicit sums over (A, b, c).

    Evaluated directly from the coefficients, independent of the series
    pipeline.  Orders 3 and 4 are the published sums.  Two of the order-5
    relations are re-derived here: the published versions drop the terms
    carrying the order-4 flow coefficient of the tree [[.,.]] and are only
    valid when that coefficient vanishes.
    """
    if q not in (3, 4, 5):
        raise ValueError("direct residuals are available for q in {3, 4, 5}")
    A, b, c = t.A, t.b, t.c
    s = t.s
    one = Fraction(1) if t.kind == "exact" else 1.0
    rng = range(s)

    def S(f):
        return sum(f(i) for i in rng)

    bc2 = S(lambda i: b[i] * c[i] ** 2)
    if q == 3:
        return {"3.1": bc2 - one / 3}

    Ac = [sum(A[i][j] * c[j] for j in rng) for i in rng]
    Ac2 = [sum(A[i][j] * c[j] ** 2 for j in rng) for i in rng]
    b_Ac = S(lambda i: b[i] * Ac[i])
    b_AAc = S(lambda i: b[i] * sum(A[i][j] * Ac[j] for j in rng))
    b_cAc = S(lambda i: b[i] * c[i] * Ac[i])
    b_Ac2 = S(lambda i: b[i] * Ac2[i])
    bc3 = S(lambda i: b[i] * c[i] ** 3)
    if q == 4:
        return {
            "4.1": b_AAc - (b_Ac - one / 8),
            "4.2": b_cAc - one / 2 * b_Ac2 - one / 12,
            "4.3": bc3 - one / 4,
        }

    b_cAAc = S(lambda i: b[i] * c[i] * sum(A[i][j] * Ac[j] for j in rng))
    b_AAc2 = S(lambda i: b[i] * sum(A[i][j] * Ac2[j] for j in rng))
    b_AcAc = S(lambda i: b[i] * sum(A[i][j] * c[j] * Ac[j] for j in rng))
    b_Ac_sq = S(lambda i: b[i] * Ac[i] ** 2)
    b_c2Ac = S(lambda i: b[i] * c[i] ** 2 * Ac[i])
    b_Ac3 = S(lambda i: b[i] * sum(A[i][j] * c[j] ** 3 for j in rng))
    bc4 = S(lambda i: b[i] * c[i] ** 4)
    return {
        "5.1": b_cAAc + one / 2 * b_AAc2 - (b_AAc + one / 2 * b_Ac2 - one / 2 * b_Ac + one / 24),
        "5.2": 2 * b_AcAc - b_Ac_sq - (b_AAc + 2 * b_Ac2 - 2 * b_Ac + one / 8),
        "5.3": b_c2Ac - one / 3 * b_Ac3 - (one / 2 * b_Ac - one / 2 * b_Ac2 + one / 24),
        "5.4": bc4 - one / 5,
    }


# ---------------------------------------------------------------------------
# tableau files


def _entry_to_json(x: Entry):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


def _entry_from_json(x) -> Entry:
    if isinstance(x, str):
        num, _, den = x.partition("/")
        return Fraction(int(num), int(den) if den else 1)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"tableau entries must be numbers or 'p/q' strings, got {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    return float(x)


def tableau_to_json(t: ButcherTableau) -> dict:
    return {
        "name": t.name,
        "A": [[_entry_to_json(x) for x in row] for row in t.A],
        "b": [_entry_to_json(x) for x in t.b],
        "c": [_entry_to_json(x) for x in t.c],
    }


def tableau_from_json(data: Mapping) -> ButcherTableau:
    A = [[_entry_from_json(x) for x in row] for row in data["A"]]
    b = [_entry_from_json(x) for x in data["b"]]
    c = [_entry_from_json(x) for x in data["c"]] if data.get("c") is not None else None
    entries = [x for row in A for x in row] + list(b) + (c or [])
    exact = all(isinstance(x, Fraction) for x in entries)
    if c is None:
        zero = Fraction(0) if exact else 0.0
        c = [sum(row, zero) for row in A]
    name = str(data.get("name", "user"))
    if exact:
        return ButcherTableau(
            name, tuple(tuple(row) for row in A), tuple(b), tuple(c), "exact"
        )
    return ButcherTableau(
        name,
        tuple(tuple(float(x) for x in row) for row in A),
        tuple(float(x) for x in b),
        tuple(float(x) for x in c),
        "float",
    )


def write_tableau(t: ButcherTableau, path) -> None:
    with open(path, "w") as fh:
        json.dump(tableau_to_json(t), fh, indent=2)
        fh.write("\n")


def read_tableau(path) -> ButcherTableau:
    with open(path) as fh:
        return tableau_from_json(json.load(fh))
