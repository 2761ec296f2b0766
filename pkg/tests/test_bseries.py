"""Series algebra: weights, map<->flow conversion, defects, and conditions.

Golden data comes from the published condition lists; where the print is
demonstrably wrong (see the decisions ledger outside this package) the
corrected value is asserted and the literal print is kept as a strict xfail.
"""
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peprk import bseries as bs
from peprk import methods as mt
from peprk.trees import RootedTree, density, generate_trees, parse_bracket, trees_of_order

F = Fraction
pb = parse_bracket


def flow_series(values, max_order, root_coeff=F(1)):
    co = {t: F(0) for t in generate_trees(max_order)}
    co[RootedTree.single()] = root_coeff
    for bracket, val in values.items():
        co[pb(bracket)] = F(val)
    return bs.CoefficientSeries("flow", max_order, co, F(0), "exact")


class TestExactFlowWeights:
    def test_values(self):
        ef = bs.exact_flow_weights(4)
        assert ef[pb("[]")] == 1
        assert ef[pb("[[]]")] == F(1, 2)
        assert ef[pb("[[],[]]")] == F(1, 3)
        assert ef[pb("[[[]]]")] == F(1, 6)

    def test_unit_time_flow_of_bare_field_reproduces_inverse_density(self):
        # strongest internal identity for the grafting machinery
        v = flow_series({}, 6)
        u = bs.map_from_flow(v)
        for t in generate_trees(6):
            assert u[t] == F(1, density(t))

    def test_classical_order_is_max(self):
        assert bs.classical_order(bs.exact_flow_weights(6)) == 6


class TestElementaryWeights:
    def test_consistency_weight(self):
        for key in ("rk22", "rk44", "pep223", "pep425"):
            u = bs.elementary_weights(mt.registry()[key], 3)
            assert u[pb("[]")] == 1

    def test_pep223_bushy3(self):
        u = bs.elementary_weights(mt.registry()["pep223"], 3)
        assert u[pb("[[],[]]")] == F(1, 3)

    def test_rk22_half_bushy3(self):
        u = bs.elementary_weights(mt.rk22(F(1, 2)), 3)
        assert u[pb("[[],[]]")] == F(1, 4)

    def test_exact_tableau_gives_exact_series(self):
        u = bs.elementary_weights(mt.registry()["pep425"], 5)
        assert u.scalar_kind == "exact"
        assert all(isinstance(x, Fraction) for x in u.coeffs.values())

    def test_classical_orders_of_registry(self):
        expect = {"rk22": 2, "rk33": 3, "rk44": 4, "pep223": 2, "pep324": 2,
                  "pep425": 2, "pep526": 2, "pep636": 3, "pep746": 4, "pep756": 5}
        for key, p in expect.items():
            u = bs.elementary_weights(mt.registry()[key], p + 1)
            assert bs.classical_order(u) == p, key


class TestModifiedEquation:
    def test_exact_flow_maps_to_bare_field(self):
        v = bs.modified_equation(bs.exact_flow_weights(6))
        assert v[RootedTree.single()] == 1
        assert all(v[t] == 0 for t in generate_trees(6) if t.order >= 2)

    def test_map_flow_relations_through_order_four(self):
        # closed-form relations for methods of classical order >= 2; the two
        # mixed-tree constants are the corrected values 1/12 and 1/8
        for key in ("rk22", "rk33", "rk44", "pep223", "pep324", "pep425"):
            u = bs.elementary_weights(mt.registry()[key], 4)
            v = bs.modified_equation(u)
            t3, b3 = pb("[[[]]]"), pb("[[],[]]")
            t4, b4 = pb("[[[[]]]]"), pb("[[],[],[]]")
            mixـ = pb("[[[],[]]]")
            pair = pb("[[[]],[]]")
            assert u[pb("[[]]")] == F(1, 2)
            assert u[t3] == v[t3] + F(1, 6)
            assert u[b3] == v[b3] + F(1, 3)
            assert u[t4] == v[t4] + v[t3] + F(1, 24)
            assert u[mix_] == v[mix_] + F(1, 2) * v[b3] + v[t3] + F(1, 12)
            assert u[pair] == v[pair] + F(1, 2) * v[b3] + F(1, 2) * v[t3] + F(1, 8)
            assert u[b4] == v[b4] + F(3, 2) * v[b3] + F(1, 4)

    def test_round_trip_on_exact_tableaus(self):
        for key in ("rk22", "rk33", "rk44", "pep223", "pep324", "pep425"):
            u = bs.elementary_weights(mt.registry()[key], 6)
            v = bs.modified_equation(u)
            back = bs.map_from_flow(v)
            assert all(back[t] == u[t] for t in generate_trees(6))

    def test_flow_vanishes_through_classical_order(self):
        for key, p in (("rk33", 3), ("rk44", 4), ("pep425", 2)):
            u = bs.elementary_weights(mt.registry()[key], p + 1)
            v = bs.modified_equation(u)
            for t in generate_trees(p):
                if t.order >= 2:
                    assert v[t] == 0

    def test_rejects_inconsistent_series(self):
        co = {t: F(0) for t in generate_trees(2)}
        co[RootedTree.single()] = F(2)
        u = bs.CoefficientSeries("map", 2, co, F(1), "exact")
        with pytest.raises(ValueError):
            bs.modified_equation(u)


class TestEnergyDefect:
    def test_exact_flow_has_zero_defect(self):
        v = bs.modified_equation(bs.exact_flow_weights(6))
        for n in range(2, 7):
            assert bs.ep_flow_defect(v, n) == 0

    def test_pep223_zero_at_three_nonzero_at_four(self):
        u = bs.elementary_weights(mt.registry()["pep223"], 4)
        v = bs.modified_equation(u)
        assert bs.ep_flow_defect(v, 3) == 0
        assert bs.ep_flow_defect(v, 4) > 0

    def test_lone_bushy_coefficient_is_forbidden(self):
        v = flow_series({"[[],[]]": 1}, 3)
        assert bs.ep_flow_defect(v, 3) > 0

    def test_free_trees_allow_any_coefficient(self):
        # tall trees of odd order and the order-5 example with a repeated
        # depth-2 conjugate carry no constraint
        v = flow_series({"[[[]]]": 7, "[[[],[]],[]]": F(-3, 2), "[[[[[]]]]]": 5}, 5)
        for n in range(2, 6):
            assert bs.ep_flow_defect(v, n) == 0

    def test_pep_orders_of_registry(self):
        # exact methods match their published claims; the float methods
        # certify at the orders proven in the ledger analysis
        expect = {"rk22": 2, "rk33": 3, "rk44": 4, "pep223": 3, "pep324": 4,
                  "pep425": 5, "pep526": 5, "pep636": 4, "pep746": 5, "pep756": 6}
        for key, q in expect.items():
            t = mt.registry()[key]
            assert bs.pep_order(t, q + 1) == q, key

    @pytest.mark.xfail(
        strict=True,
        reason="published q=6 claims fail the order-6 flow conditions "
        "(defects ~1e-3; see decisions ledger)",
    )
    def test_published_pep_order_claims_for_remaining_float_methods(self):
        for key in ("pep526", "pep636", "pep746"):
            t = mt.registry()[key]
            assert bs.pep_order(t, 7) == t.claimed_q, key

    def test_float_and_exact_defects_agree_in_zero_pattern(self):
        t = mt.registry()["pep425"]
        tf = t.as_float()
        for n in range(2, 7):
            u = bs.elementary_weights(tf, 7)
            v = bs.modified_equation(u)
            d = bs.ep_flow_defect(v, n)
            exact_zero = bs.ep_flow_defect(
                bs.modified_equation(bs.elementary_weights(t, 7)), n
            ) == 0
            assert (d < 1e-10) == exact_zero


def canon_flow(entries):
    terms = {pb(b): F(c) for b, c in entries}
    return bs.LinearCondition.canonical("flow-coeffs", terms, F(0))


GOLDEN_FLOW = {
    2: [[("[[]]", 1)]],
    3: [[("[[],[]]", 1)]],
    4: [
        [("[[[[]]]]", 1)],
        [("[[[],[]]]", F(1, 2)), ("[[],[[]]]", -1)],
        [("[[],[],[]]", 1)],
    ],
    5: [
        [("[[[[],[]]]]", F(1, 2)), ("[[[[]]],[]]", 1)],
        [("[[[[]],[]]]", 1), ("[[[]],[[]]]", F(-1, 2))],
        [("[[[]],[],[]]", 1), ("[[[],[],[]]]", F(-1, 3))],
        [("[[],[],[],[]]", 1)],
    ],
    6: [
        [("[[[[[[]]]]]]", 1)],
        [("[[],[[[],[]]]]", 1)],
        [("[[[[]],[[]]]]", 1)],
        [("[[],[],[],[],[]]", 1)],
        [("[[[[[],[]]]]]", F(1, 2)), ("[[[[[]]]],[]]", -1)],
        [("[[[[],[],[]]]]", F(1, 6)), ("[[[[]]],[],[]]", F(1, 2))],
        [("[[[[]],[],[]]]", F(1, 2)), ("[[[]],[[]],[]]", F(-1, 2))],
        [("[[[],[],[],[]]]", F(1, 24)), ("[[[]],[],[],[]]", F(-1, 6))],
        [("[[[],[],[]],[]]", F(1, 6)), ("[[[],[]],[],[]]", F(-1, 4))],
        [("[[[[]],[]],[]]", 1), ("[[[[],[]],[]]]", F(1, 2)), ("[[[],[]],[[]]]", F(-1, 2))],
        [("[[[[[]],[]]]]", 1), ("[[[[[]]],[]]]", -1), ("[[[[]]],[[]]]", 1)],
    ],
}


class TestFlowConditions:
    @pytest.mark.parametrize("order", [2, 3, 4, 5, 6])
    def test_published_lists_reproduced_verbatim(self, order):
        got = set(bs.derive_conditions(order))
        want = {canon_flow(entries) for entries in GOLDEN_FLOW[order]}
        assert got == want

    def test_counts(self):
        assert [len(bs.derive_conditions(n)) for n in (2, 3, 4, 5, 6)] == [1, 1, 3, 4, 11]

    def test_cumulative_counts_match_published_table(self):
        cum, out = 1, [1]
        for n in range(2, 7):
            cum += len(bs.derive_conditions(n))
            out.append(cum)
        assert out == [1, 2, 3, 6, 10, 21]

    def test_condition_order_cap(self):
        with pytest.raises(bs.OrderCapExceeded):
            bs.derive_conditions(9)

    def test_canonical_scaling(self):
        for n in range(2, 7):
            for c in bs.derive_conditions(n):
                nums = [x for _, x in c.terms] + [c.rhs]
                assert all(f.denominator == 1 for f in nums)
                assert math.gcd(*(abs(int(f)) for f in nums)) in (0, 1)
                assert c.terms[0][1] > 0

    def test_defect_zero_iff_conditions_hold(self):
        import random

        rnd = random.Random(11)
        for order in (3, 4, 5, 6):
            conds = bs.derive_conditions(order)
            for _ in range(12):
                co = {
                    t: F(rnd.randint(-4, 4), rnd.randint(1, 4))
                    for t in generate_trees(order)
                }
                co[RootedTree.single()] = F(1)
                v = bs.CoefficientSeries("flow", order, co, F(0), "exact")
                lhs = bs.ep_flow_defect(v, order) == 0
                rhs = all(c.evaluate(v) == 0 for c in conds)
                assert lhs == rhs


def canon_weights(entries, rhs, quad=()):
    terms = {pb(b): F(c) for b, c in entries}
    q = {(pb(b1), pb(b2)): F(c) for b1, b2, c in quad}
    return bs.LinearCondition.canonical("map-weights", terms, F(rhs), q)


class TestWeightConditions:
    def test_order_three(self):
        assert list(bs.conditions_on_weights(3)) == [
            canon_weights([("[[],[]]", 1)], F(1, 3))
        ]

    def test_order_four_verbatim(self):
        got = set(bs.conditions_on_weights(4))
        want = {
            canon_weights([("[[[[]]]]", 1), ("[[[]]]", -1)], F(-1, 8)),
            canon_weights([("[[[]],[]]", 1), ("[[[],[]]]", F(-1, 2))], F(1, 12)),
            canon_weights([("[[],[],[]]", 1)], F(1, 4)),
        }
        assert got == want

    def test_order_five_corrected_lines(self):
        # lines 1 and 4 as published; lines 2 and 3 with the corrected
        # right-hand sides (see ledger); all exactly as derived
        got = set(bs.conditions_on_weights(5))
        want = {
            canon_weights(
                [("[[[[]]],[]]", 1), ("[[[[],[]]]]", F(1, 2)), ("[[[[]]]]", -1),
                 ("[[[],[]]]", F(-1, 2)), ("[[[]]]", F(1, 2)), ("[[[]],[]]", -2),
                 ("[[[],[]]]", 1)],
                F(1, 24) - F(2, 12),
            ),
            canon_weights(
                [("[[[[]],[]]]", 2), ("[[[]],[[]]]", -1), ("[[[[]]]]", -1),
                 ("[[[],[]]]", -2), ("[[[]]]", 2)],
                F(1, 8),
            ),
            canon_weights(
                [("[[[]],[],[]]", 1), ("[[[],[],[]]]", F(-1, 3)),
                 ("[[[]]]", F(-1, 2)), ("[[[],[]]]", F(1, 2))],
                F(1, 24),
            ),
            canon_weights([("[[],[],[],[]]", 1)], F(1, 5)),
        }
        assert got == want

    @pytest.mark.xfail(
        strict=True,
        reason="published order-5 weight-condition lines 2-3 are misprinted; "
        "solutions of the printed system have nonzero energy defect",
    )
    def test_order_five_literal_publication(self):
        got = set(bs.conditions_on_weights(5))
        printed_line3 = canon_weights(
            [("[[[]],[],[]]", 1), ("[[[],[],[]]]", F(-1, 3))], F(1, 12)
        )
        assert printed_line3 in got

    def test_order_six_count_and_quadratic_line(self):
        got = bs.conditions_on_weights(6)
        assert len(got) == 11
        quads = [c for c in got if c.quad_terms]
        assert quads == [
            canon_weights(
                [("[[[[]]]]", 1), ("[[[[[]]]]]", -2), ("[[[[[[]]]]]]", 2)],
                0,
                quad=[("[[[]]]", "[[[]]]", -1)],
            )
        ]
        for c in got:
            if not c.quad_terms:
                assert all(t.order <= 6 for t, _ in c.terms)

    def test_solutions_of_derived_systems_have_zero_defect(self):
        # adjudication oracle: pick random solutions of the weight-condition
        # system and verify the mu-system defect vanishes at every order
        import random

        rnd = random.Random(23)
        order = 5
        trees = [t for t in generate_trees(order) if t.order >= 3]
        rows = []
        for n in range(3, order + 1):
            for c in bs.conditions_on_weights(n):
                row = [F(0)] * (len(trees) + 1)
                for t, co in c.terms:
                    row[trees.index(t)] = co
                row[-1] = c.rhs
                rows.append(row)
        red, piv = bs._rref(rows)
        for _ in range(6):
            vals = [F(rnd.randint(-3, 3), rnd.randint(1, 3)) for _ in trees]
            for r, p in enumerate(piv):
                vals[p] = red[r][-1] - sum(
                    red[r][j] * vals[j] for j in range(len(trees)) if j not in piv
                )
            co = {RootedTree.single(): F(1), pb("[[]]"): F(1, 2)}
            co.update(dict(zip(trees, vals)))
            u = bs.CoefficientSeries("map", order, co, F(1), "exact")
            v = bs.modified_equation(u)
            for n in range(2, order + 1):
                assert bs.ep_flow_defect(v, n) == 0


def random_exact_tableau(rnd, s, second_order=False):
    A = [[F(0)] * s for _ in range(s)]
    for i in range(1, s):
        for j in range(i):
            A[i][j] = F(rnd.randint(-2, 2), rnd.randint(1, 3))
    if second_order:
        # enforce sum(b) = 1 and b.c = 1/2 on the last two weights
        c = [sum(row, F(0)) for row in A]
        while True:
            b = [F(rnd.randint(-2, 2), rnd.randint(1, 3)) for _ in range(s)]
            den = c[-1] - c[-2]
            if den != 0 and c[-2] != c[-1]:
                break
            A[s - 1][0] += F(1, 7)
            c = [sum(row, F(0)) for row in A]
        rest = b[: s - 2]
        sum_rest = sum(rest, F(0))
        dot_rest = sum(bi * ci for bi, ci in zip(rest, c[: s - 2]))
        # solve b_{s-1}, b_s
        b2 = (F(1, 2) - dot_rest - (1 - sum_rest) * c[-2]) / den
        b1 = 1 - sum_rest - b2
        b = rest + [b1, b2]
    else:
        b = [F(rnd.randint(-2, 2), rnd.randint(1, 3)) for _ in range(s - 1)]
        b.append(1 - sum(b, F(0)))
    name = "random"
    c = tuple(sum(row, F(0)) for row in A)
    return mt.ButcherTableau(name, tuple(tuple(r) for r in A), tuple(b), c, "exact")


class TestCrossPipeline:
    def test_weight_conditions_match_defect_on_random_corpus(self):
        # cumulative zero-set identity across the two independent pipelines
        import random

        rnd = random.Random(5)
        tableaus = [random_exact_tableau(rnd, rnd.randint(2, 4), True) for _ in range(25)]
        tableaus += [mt.registry()[k] for k in ("pep223", "pep324", "pep425", "rk44")]
        for t in tableaus:
            u = bs.elementary_weights(t, 5)
            if bs.classical_order(u) < 2:
                continue
            v = bs.modified_equation(u)
            for n in (3, 4, 5):
                weights_zero = all(
                    all(c.evaluate(u) == 0 for c in bs.conditions_on_weights(k))
                    for k in range(3, n + 1)
                )
                defect_zero = all(bs.ep_flow_defect(v, k) == 0 for k in range(2, n + 1))
                assert weights_zero == defect_zero


@st.composite
def small_exact_tableau(draw):
    import random

    seed = draw(st.integers(min_value=0, max_value=10**6))
    rnd = random.Random(seed)
    s = draw(st.integers(min_value=2, max_value=4))
    return random_exact_tableau(rnd, s)


class TestHypothesisInvariants:
    @settings(max_examples=25, deadline=None)
    @given(small_exact_tableau())
    def test_round_trip_is_exact(self, t):
        u = bs.elementary_weights(t, 5)
        v = bs.modified_equation(u)
        back = bs.map_from_flow(v)
        assert all(back[tt] == u[tt] for tt in generate_trees(5))

    @settings(max_examples=25, deadline=None)
    @given(small_exact_tableau())
    def test_flow_vanishes_below_classical_order(self, t):
        u = bs.elementary_weights(t, 4)
        p = bs.classical_order(u)
        v = bs.modified_equation(u)
        for tt in generate_trees(min(p, 4)):
            if tt.order >= 2:
                assert v[tt] == 0

    @settings(max_examples=15, deadline=None)
    @given(small_exact_tableau())
    def test_defect_nonnegative_and_reproducible(self, t):
        u = bs.elementary_weights(t, 4)
        v = bs.modifi ed_equation(u) if False else bs.modified_equation(u)
        d1 = bs.ep_flow_defect(v, 4)
        d2 = bs.ep_flow_defect(v, 4)
        assert d1 == d2 >= 0
