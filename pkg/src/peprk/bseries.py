"""Coefficient-level B-series algebra.

Series are maps from rooted trees to scalars under the normalization

    B(a, hf, y) = a(empty) y + sum_tau h^|tau| / sigma(tau) * a_tau * F_f(tau)(y).

The module computes elementary weights of a Butcher tableau, converts between
a method's map coefficients and the coefficients of the vector field whose
unit-time flow reproduces the map, tests energy preservation order by order,
and derives the explicit linear conditions order by order.

All symbolic work is exact: rationals via fractions.Fraction, null spaces and
least squares by rational elimination.  Floating-point series use the same
code paths with float coefficients and documented tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .trees import (
    MAX_ORDER,
    OrderCapExceeded,
    RootedTree,
    conjugacy_classes,
    density,
    ep_conjugate,
    generate_trees,
    leaves,
    symmetry,
    trees_of_order,
)

Scalar = Union[Fraction, float]

#: per-condition tolerance when deciding the classical order of a float series
ORDER_CONDITION_TOL = 1e-10
#: tolerance on the energy-defect residual norm for float series
DEFECT_TOL = 1e-8

CONDITION_ORDER_CAP = 8  # derivation beyond this is out of scope

__all__ = [
    "Scalar",
    "ORDER_CONDITION_TOL",
    "DEFECT_TOL",
    "CONDITION_ORDER_CAP",
    "CoefficientSeries",
    "LinearCondition",
    "elementary_weights",
    "exact_flow_weights",
    "classical_order",
    "modified_equation",
    "map_from_flow",
    "ep_flow_defect",
    "pep_order",
    "derive_conditions",
    "conditions_on_weights",
]


def _is_zero(x) -> bool:
    if isinstance(x, (Fraction, int, float)):
        return x == 0
    z = getattr(x, "is_zero", None)
    if z is not None:
        return bool(z)
    return x == 0


def _zero_for(kind: str):
    if kind == "exact":
        return Fraction(0)
    if kind == "float":
        return 0.0
    if kind == "symbolic":
        import sympy

        return sympy.Integer(0)
    raise ValueError(f"unknown scalar kind {kind!r}")


@dataclass(frozen=True)
class CoefficientSeries:
    """Tree-indexed coefficients of one B-series.

    kind is 'map' (numerical one-step map, coefficient 1 on the empty tree),
    'flow' (vector field, coefficient 0 on the empty tree), or 'exact-flow'.
    scalar_kind records whether coefficients are exact rationals, floats, or
    symbolic expressions; kinds never mix within one series.
    """

    kind: str
    max_order: int
    coeffs: dict[RootedTree, Scalar]
    empty_coeff: Scalar
    scalar_kind: str = "exact"

    def __post_init__(self) -> None:
        if self.kind not in ("map", "flow", "exact-flow"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        for t in generate_trees(self.max_order):
            if t not in self.coeffs:
                raise ValueError(f"missing coefficient for {t!r}")

    def __getitem__(self, tree: RootedTree) -> Scalar:
        return self.coeffs[tree]

    def truncated(self, max_order: int) -> "CoefficientSeries":
        return CoefficientSeries(
            self.kind,
            max_order,
            {t: self.coeffs[t] for t in generate_trees(max_order)},
            self.empty_coeff,
            self.scalar_kind,
        )


# ---------------------------------------------------------------------------
# elementary weights and the exact flow


def elementary_weights(tableau, max_order: int) -> CoefficientSeries:
    """Map-series coefficients of an explicit RK method.

    Standard recursion on stage vectors: a leaf contributes c, joining a node
    multiplies the A-images of its children componentwise, and the weight is
    the b-dot-product.  Exact tableaus give exact weights.
    """
    if not (1 <= max_order <= MAX_ORDER):
        raise OrderCapExceeded(f"max_order must be in 1..{MAX_ORDER}")
    exact = tableau.kind == "exact"
    A = tableau.A
    b = tableau.b
    c = tableau.c
    s = len(b)

    memo: dict[RootedTree, tuple] = {}

    def stage_vec(t: RootedTree) -> tuple:
        # componentwise (A phi)(t): for a leaf this is c
        got = memo.get(t)
        if got is not None:
            return got
        kids = t.children()
        if not kids:
            out = tuple(c)
        else:
            prods = _stage_product(kids)
            out = tuple(
                sum(A[i][j] * prods[j] for j in range(s)) for i in range(s)
            )
        memo[t] = out
        return out

    def _stage_product(kids: Sequence[RootedTree]) -> tuple:
        prods = [Fraction(1) if exact else 1.0] * s
        for k in kids:
            sv = stage_vec(k)
            prods = [p * v for p, v in zip(prods, sv)]
        return tuple(prods)

    coeffs: dict[RootedTree, Scalar] = {}
    for t in generate_trees(max_order):
        kids = t.children()
        if not kids:
            coeffs[t] = sum(b)
        else:
            prods = _stage_product(kids)
            coeffs[t] = sum(b[i] * prods[i] for i in range(s))
    one = Fraction(1) if exact else 1.0
    return CoefficientSeries(
        "map", max_order, coeffs, one, "exact" if exact else "float"
    )


def exact_flow_weights(max_order: int) -> CoefficientSeries:
    """Series of the exact solution map: 1/density on every tree."""
    if not (1 <= max_order <= MAX_ORDER):
        raise OrderCapExceeded(f"max_order must be in 1..{MAX_ORDER}")
    coeffs = {t: Fraction(1, density(t)) for t in generate_trees(max_order)}
    return CoefficientSeries("exact-flow", max_order, coeffs, Fraction(1), "exact")


def classical_order(u: CoefficientSeries, tol: float = ORDER_CONDITION_TOL) -> int:
    """Largest p such that u matches the exact flow on all trees of order <= p."""
    if u.kind == "flow":
        raise ValueError("classical_order expects a map-type series")
    p = 0
    for n in range(1, u.max_order + 1):
        for t in trees_of_order(n):
            target = Fraction(1, density(t))
            if u.scalar_kind == "exact":
                ok = u[t] == target
            else:
                ok = abs(u[t] - float(target)) <= tol
            if not ok:
                return p
        p = n
    return p


# ---------------------------------------------------------------------------
# map <-> flow conversion


@lru_cache(maxsize=None)
def _graft(base: RootedTree, node: int, scion: RootedTree) -> RootedTree:
    """Attach scion's root as a new child of the given node of base."""
    levels = base.levels
    shift = levels[node]
    grown = (
        levels[: node + 1]
        + tuple(lv + shift for lv in scion.levels)
        + levels[node + 1 :]
    )
    return RootedTree(grown)


def _lie_derivative(
    a_coeffs: Mapping[RootedTree, Scalar],
    a_empty: Scalar,
    w_coeffs: Mapping[RootedTree, Scalar],
    max_order: int,
    zero: Scalar,
) -> dict[RootedTree, Scalar]:
    """Coefficients of the derivative of the series `a` along the vector
    field `w` (w vanishes on the empty tree).

    Differentiating F(tau) along w grafts every w-tree onto every node of
    tau, so the coefficient on a tree t collects a(tau) w(theta) / (sigma *
    sigma) over all graft decompositions of t, rescaled by sigma(t).
    """
    res: dict[RootedTree, Scalar] = {t: zero for t in generate_trees(max_order)}
    if not _is_zero(a_empty):
        for t in generate_trees(max_order):
            wv = w_coeffs.get(t, zero)
            if not _is_zero(wv):
                res[t] = res[t] + a_empty * wv
    for tau, av in a_coeffs.items():
        if tau.order >= max_order or _is_zero(av):
            continue
        for theta_order in range(1, max_order - tau.order + 1):
            for theta in trees_of_order(theta_order):
                wv = w_coeffs.get(theta, zero)
                if _is_zero(wv):
                    continue
                coef = av * wv / (symmetry(tau) * symmetry(theta))
                for node in range(tau.order):
                    res[_graft(tau, node, theta)] += coef
    for t in list(res):
        if not _is_zero(res[t]):
            res[t] = res[t] * symmetry(t)
    return res


def map_from_flow(v: CoefficientSeries) -> CoefficientSeries:
    """Series of the unit-time exact flow of the vector field with series v.

    Taylor expansion of the flow: sum over k of the k-fold derivative of the
    identity along v, divided by k!.  This inverts modified_equation.
    """
    if v.kind != "flow":
        raise ValueError("map_from_flow expects a flow-type series")
    N = v.max_order
    zero = _zero_for(v.scalar_kind)
    one = zero + 1
    acc = {t: zero for t in generate_trees(N)}
    cur = {t: zero for t in generate_trees(N)}
    cur_empty = one
    fact = 1
    for k in range(1, N + 1):
        cur = _lie_derivative(cur, cur_empty, v.coeffs, N, zero)
        cur_empty = zero
        fact *= k
        for t in cur:
            if not _is_zero(cur[t]):
                acc[t] = acc[t] + cur[t] / fact
    return CoefficientSeries("map", N, acc, one, v.scalar_kind)


def modified_equation(u: CoefficientSeries) -> CoefficientSeries:
    """Flow coefficients v of the modified vector field of a map series u.

    Determined order by order: at order n the new coefficient enters the
    unit-time flow linearly, so v_t is u_t minus the order-n part of the
    flow of the lower-order truncation.
    """
    if u.kind == "flow":
        raise ValueError("modified_equation expects a map-type series")
    zero = _zero_for(u.scalar_kind)
    single = RootedTree.single()
    u_root = u[single]
    if u.scalar_kind == "exact":
        consistent = u_root == 1 and u.empty_coeff == 1
    elif u.scalar_kind == "float":
        consistent = abs(u_root - 1.0) <= 1e-12 and abs(u.empty_coeff - 1.0) <= 1e-12
    else:
        consistent = True
    if not consistent:
        raise ValueError("series is not consistent: empty and single-node coefficients must be 1")
    N = u.max_order
    v_coeffs = {t: zero for t in generate_trees(N)}
    v_coeffs[single] = u_root
    v = CoefficientSeries("flow", N, v_coeffs, zero, u.scalar_kind)
    for n in range(2, N + 1):
        flowed = map_from_flow(v)
        for t in trees_of_order(n):
            v.coeffs[t] = u[t] - flowed[t]
    return v


# ---------------------------------------------------------------------------
# exact linear algebra on Fractions


def _rref(mat: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    m = [row[:] for row in mat]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def _nullspace(mat: list[list[Fraction]], cols: int) -> list[list[Fraction]]:
    if not mat:
        return [
            [Fraction(int(i == j)) for j in range(cols)] for i in range(cols)
        ]
    red, pivots = _rref(mat)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * cols
        vec[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            vec[pc] = -red[r][fc]
        basis.append(vec)
    return basis


def _exact_lstsq_sq_residual(
    M: list[list[Fraction]], rhs: list[Fraction]
) -> Fraction:
    """Exact squared 2-norm of the least-squares residual of M x = rhs."""
    rows = len(M)
    cols = len(M[0]) if rows else 0
    # normal equations N x = g are always consistent
    N = [
        [sum(M[k][i] * M[k][j] for k in range(rows)) for j in range(cols)]
        for i in range(cols)
    ]
    g = [sum(M[k][i] * rhs[k] for k in range(rows)) for i in range(cols)]
    aug = [N[i] + [g[i]] for i in range(cols)]
    red, pivots = _rref(aug) if cols else ([], [])
    x = [Fraction(0)] * cols
    for r, pc in enumerate(pivots):
        if pc == cols:  # inconsistent: impossible for normal equations
            raise ArithmeticError("normal equations inconsistent")
        x[pc] = red[r][cols]
    rtr = sum(v * v for v in rhs)
    xtg = sum(x[i] * g[i] for i in range(cols))
    res = rtr - xtg
    if res < 0:
        raise ArithmeticError("negative residual in exact least squares")
    return res


# ---------------------------------------------------------------------------
# the energy-preservation test


def _mu_system(
    cls: Sequence[RootedTree],
) -> tuple[list[RootedTree], list[list[Fraction]]]:
    """Coefficient matrix of the solvability system for one conjugacy class.

    One column per (tree, leaf) pair; the pair adds +1 to the row of its own
    tree and the leaf parity to the row of the conjugate (both to the same
    row when the conjugate is the tree itself).
    """
    ts = sorted(cls)
    idx = {t: i for i, t in enumerate(ts)}
    columns = []
    for t in ts:
        for lf in leaves(t):
            conj, parity = ep_conjugate(t, lf)
            col = [Fraction(0)] * len(ts)
            col[idx[t]] += 1
            col[idx[conj]] += parity
            columns.append(col)
    M = [[col[r] for col in columns] for r in range(len(ts))]
    return ts, M


@lru_cache(maxsize=None)
def _classes_of_order(order: int) -> tuple[tuple[RootedTree, ...], ...]:
    return tuple(conjugacy_classes(order)[order])


def ep_flow_defect(v: CoefficientSeries, order: int) -> Scalar:
    """Residual of the energy-preserving representation at one order.

    Solves the linear system for the representation coefficients in the
    least-squares sense; zero exactly when the order-`order` part of the flow
    admits the signed tree/conjugate combination.  Exact series return the
    squared residual as a rational (zero iff solvable); float series return
    the residual 2-norm.
    """
    if v.kind != "flow":
        raise ValueError("ep_flow_defect expects a flow-type series")
    if not (2 <= order <= v.max_order):
        raise ValueError("order must lie in 2..max_order of the series")
    exact = v.scalar_kind == "exact"
    if v.scalar_kind == "symbolic":
        raise ValueError("defect evaluation needs numeric coefficients")
    total = Fraction(0) if exact else 0.0
    for cls in _classes_of_order(order):
        ts, M = _mu_system(cls)
        if exact:
            rhs = [v[t] / symmetry(t) for t in ts]
            total += _exact_lstsq_sq_residual(M, rhs)
        else:
            import scipy.linalg

            A = np.array([[float(x) for x in row] for row in M])
            rhs = np.array([v[t] / symmetry(t) for t in ts], dtype=float)
            sol = scipy.linalg.lstsq(A, rhs, lapack_driver="gelsy")[0]
            r = A @ sol - rhs
            total += float(r @ r)
    return total if exact else math.sqrt(total)


def pep_order(tableau, cap: int, defect_tol: float = DEFECT_TOL) -> int:
    """Largest q <= cap with vanishing energy defect at every order 2..q."""
    if not (1 <= cap <= MAX_ORDER):
        raise OrderCapExceeded(f"cap must be in 1..{MAX_ORDER}")
    u = elementary_weights(tableau, cap)
    v = modified_equation(u)
    exact = v.scalar_kind == "exact"
    q = 1
    for n in range(2, cap + 1):
        d = ep_flow_defect(v, n)
        ok = (d == 0) if exact else (d < defect_tol)
        if not ok:
            break
        q = n
    return q


# ---------------------------------------------------------------------------
# explicit conditions


@dataclass(frozen=True)
class LinearCondition:
    """One canonical affine constraint on series coefficients.

    target is 'flow-coeffs' (constraint on flow coefficients of one order) or
    'map-weights' (constraint on elementary weights; may carry quadratic
    monomials, which only occur at order six).  Coefficients are coprime
    integers after clearing denominators and the first term is positive.
    """

    target: str
    terms: tuple[tuple[RootedTree, Fraction], ...]
    rhs: Fraction
    quad_terms: tuple[tuple[tuple[RootedTree, RootedTree], Fraction], ...] = ()

    @classmethod
    def canonical(
        cls,
        target: str,
        terms: Mapping[RootedTree, Fraction],
        rhs: Fraction,
        quad_terms: Mapping[tuple[RootedTree, RootedTree], Fraction] | None = None,
    ) -> "LinearCondition":
        lin = sorted(
            ((t, Fraction(c)) for t, c in terms.items() if c != 0),
            key=lambda tc: tc[0],
        )
        quad = sorted(
            (
                (tuple(sorted(pair)), Fraction(c))
                for pair, c in (quad_terms or {}).items()
                if c != 0
            ),
            key=lambda qc: qc[0],
        )
        if not lin and not quad:
            raise ValueError("a condition needs at least one nonzero term")
        rhs = Fraction(rhs)
        allc = [c for _, c in lin] + [c for _, c in quad] + ([rhs] if rhs else [])
        denom_lcm = math.lcm(*(c.denominator for c in allc))
        num_gcd = math.gcd(*(abs(c.numerator * denom_lcm // c.denominator) for c in allc))
        scale = Fraction(denom_lcm, num_gcd)
        lead = lin[0][1] if lin else quad[0][1]
        if lead < 0:
            scale = -scale
        return cls(
            target,
            tuple((t, c * scale) for t, c in lin),
            rhs * scale,
            tuple((p, c * scale) for p, c in quad),
        )

    def evaluate(self, values: Union[CoefficientSeries, Mapping[RootedTree, Scalar], Callable]):
        if isinstance(values, CoefficientSeries):
            get = values.coeffs.__getitem__
        elif callable(values):
            get = values
        else:
            get = values.__getitem__
        acc = -self.rhs
        for t, c in self.terms:
            acc = acc + c * get(t)
        for (t1, t2), c in self.quad_terms:
            acc = acc + c * get(t1) * get(t2)
        return acc

    @property
    def order(self) -> int:
        tops = [t.order for t, _ in self.terms]
        tops += [t1.order + t2.order for (t1, t2), _ in self.quad_terms]
        return max(tops)

    def sort_key(self):
        return (
            self.order,
            tuple((t.order, t.levels) for t, _ in self.terms),
            tuple(c for _, c in self.terms),
            tuple(
                (t1.order, t1.levels, t2.order, t2.levels)
                for (t1, t2), _ in self.quad_terms
            ),
            self.rhs,
        )

    def __str__(self) -> str:
        sym = "v" if self.target == "flow-coeffs" else "u"
        parts = []
        for t, c in self.terms:
            parts.append((c, f"{sym}{t.to_bracket()}"))
        for (t1, t2), c in self.quad_terms:
            parts.append((c, f"{sym}{t1.to_bracket()}*{sym}{t2.to_bracket()}"))
        bits = []
        for i, (c, name) in enumerate(parts):
            mag = abs(c)
            body = name if mag == 1 else f"{mag}*{name}"
            if i == 0:
                bits.append(body if c > 0 else f"-{body}")
            else:
                bits.append(f"+ {body}" if c > 0 else f"- {body}")
        return " ".join(bits) + f" = {self.rhs}"


@lru_cache(maxsize=None)
def derive_conditions(order: int) -> tuple[LinearCondition, ...]:
    """All linear conditions on flow coefficients of one order.

    Per conjugacy class, the left null space of the solvability system is
    computed by exact elimination; each null vector, applied to the
    sigma-scaled coefficients, yields one condition.
    """
    if not (2 <= order <= CONDITION_ORDER_CAP):
        raise OrderCapExceeded(f"order must be in 2..{CONDITION_ORDER_CAP}")
    out = []
    for cls in _classes_of_order(order):
        ts, M = _mu_system(cls)
        # left null space of M = null space of M transpose
        Mt = [list(col) for col in zip(*M)]
        basis = _nullspace(Mt, len(ts))
        if not basis:
            continue
        # unique canonical basis of the space spanned by the null vectors
        red, _ = _rref(basis)
        for w in red:
            if all(x == 0 for x in w):
                continue
            terms = {
                t: wi / symmetry(t) for t, wi in zip(ts, w) if wi != 0
            }
            out.append(LinearCondition.canonical("flow-coeffs", terms, Fraction(0)))
    return tuple(sorted(out, key=LinearCondition.sort_key))


def _bushy(order: int) -> RootedTree:
    return RootedTree((1,) + (2,) * (order - 1))


@lru_cache(maxsize=None)
def conditions_on_weights(order: int) -> tuple[LinearCondition, ...]:
    """Order-`order` energy conditions rewritten on elementary weights.

    Assumes classical order at least two and the conditions of the lower
    orders (the bushy weights of lower orders are pinned to 1/k, matching how
    the printed lists are normalized).  At order six the rewrite is genuinely
    quadratic in the weights; those conditions carry quad_terms.
    """
    if not (3 <= order <= 6):
        raise OrderCapExceeded("weight conditions are derived for orders 3..6")
    import sympy

    single = RootedTree.single()
    tall2 = RootedTree((1, 2))
    sym_of: dict[RootedTree, sympy.Symbol] = {}
    coeffs: dict[RootedTree, object] = {}
    for k in range(1, order + 1):
        for i, t in enumerate(trees_of_order(k)):
            if t == single:
                coeffs[t] = sympy.Integer(1)
            elif t == tall2:
                coeffs[t] = sympy.Rational(1, 2)
            else:
                s = sympy.Symbol(f"u{k}_{i}")
                sym_of[t] = s
                coeffs[t] = s
    u = CoefficientSeries("map", order, coeffs, sympy.Integer(1), "symbolic")
    v = modified_equation(u)
    subs = {
        sym_of[_bushy(k)]: sympy.Rational(1, k) for k in range(3, order)
    }
    tree_of = {s: t for t, s in sym_of.items()}
    out = []
    for cond in derive_conditions(order):
        expr = sympy.Integer(0)
        for t, c in cond.terms:
            expr += sympy.Rational(c.numerator, c.denominator) * v[t]
        expr = sympy.expand(expr.subs(subs))
        lin: dict[RootedTree, Fraction] = {}
        quad: dict[tuple[RootedTree, RootedTree], Fraction] = {}
        const = Fraction(0)
        for monom, coef in expr.as_coefficients_dict().items():
            frac = Fraction(int(sympy.numer(coef)), int(sympy.denom(coef)))
            if monom == 1:
                const += frac
            elif monom in tree_of:
                lin[tree_of[monom]] = lin.get(tree_of[monom], Fraction(0)) + frac
            elif monom.is_Pow and monom.base in tree_of and monom.exp == 2:
                key = (tree_of[monom.base], tree_of[monom.base])
                quad[key] = quad.get(key, Fraction(0)) + frac
            elif monom.is_Mul:
                factors = monom.args
                if len(factors) == 2 and all(f in tree_of for f in factors):
                    key = tuple(sorted(tree_of[f] for f in factors))
                    quad[key] = quad.get(key, Fraction(0)) + frac
                else:
                    raise ArithmeticError(f"unexpected monomial {monom}")
            else:
                raise ArithmeticError(f"unexpected monomial {monom}")
        out.append(
            LinearCondition.canonical("map-weights", lin, -const, quad)
        )
    return tuple(sorted(out, key=LinearCondition.sort_key))
