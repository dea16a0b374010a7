from __future__ import annotations

import itertools

import numpy as np
import pytest

from blastgp.interpreter import (eval_individual, eval_node, eval_team_batch,
                                 make_context, precompute_features, prepare_reads,
                                 throughput_bench)
from blastgp.primitives import Role
from blastgp.sexpr import from_sexpr
from blastgp.trees import Individual, random_tree

from conftest import make_record

RISING_QUAL = tuple((i + 5) / 10.0 for i in range(36))  # 0.5 .. 4.0, all distinct


def tree(text, role, table):
    return from_sexpr(text, role, table)


def team(table, p0="Qual", p1="Qual", res="Sum0"):
    return Individual(tree(p0, Role.PREPASS0, table),
                      tree(p1, Role.PREPASS1, table),
                      tree(res, Role.RESULT, table))


def run_node(text, record, table, role=Role.PREPASS0, base_pos=1):
    ctx = make_context(record, phase=role, base_pos=base_pos)
    return eval_node(tree(text, role, table), ctx, table), ctx


class TestFeatures:
    def test_uniform_base_mix_has_full_entropy(self):
        f = precompute_features(make_record("ACGT" * 9))
        assert f.entropy_total == pytest.approx(2.0, abs=1e-12)

    def test_mononucleotide_read(self):
        f = precompute_features(make_record("A" * 36))
        assert f.entropy_total == 0.0
        assert list(f.run_len) == list(range(1, 37))

    def test_run_resets_on_change(self):
        f = precompute_features(make_record("GGGT" + "A" * 32))
        assert list(f.run_len[:5]) == [1, 2, 3, 1, 1]

    def test_all_n_entropy_two_bits(self):
        # each N adds 1/4 to every base count, so the mix stays uniform
        f = precompute_features(make_record("N" * 36))
        assert f.entropy_total == pytest.approx(2.0, abs=1e-12)
        assert f.count_n == 36

    def test_n_breaks_runs_but_runs_of_n_count(self):
        f = precompute_features(make_record("AANNA" + "C" * 31))
        assert list(f.run_len[:5]) == [1, 2, 1, 2, 1]

    def test_entropy_prefix_bounds(self, rng):
        for _ in range(50):
            bases = "".join("ACGTN"[i] for i in rng.integers(0, 5, 36))
            f = precompute_features(make_record(bases))
            assert np.all(f.entropy_prefix >= 0.0)
            assert np.all(f.entropy_prefix <= 2.0 + 1e-12)


class TestPrimitiveSemantics:
    def test_protected_div(self, table):
        r = make_record("ACGT")
        assert run_node("(DIV 5 0)", r, table)[0] == 1.0
        assert run_node("(DIV 5 2)", r, table)[0] == 2.5

    def test_orn_skips_second_argument(self, table):
        r = make_record("ACGT")
        v, ctx = run_node("(ORN 1 (set_Aux1 9))", r, table)
        assert v == 1.0
        assert ctx.aux1 == 0.0  # skipped argument left no side effect

    def test_orn_false_path(self, table):
        r = make_record("ACGT")
        assert run_node("(ORN -1 2)", r, table)[0] == 1.0
        assert run_node("(ORN -1 -2)", r, table)[0] == -1.0
        assert run_node("(ORN 0 0)", r, table)[0] == -1.0  # truth is strictly > 0
        _, ctx = run_node("(ORN -1 (set_Aux1 9))", r, table)
        assert ctx.aux1 == 9.0

    def test_iflte_takes_only_one_branch(self, table):
        r = make_record("ACGT")
        v, ctx = run_node("(IFLTE 1 2 3 (set_Aux1 9))", r, table)
        assert v == 3.0 and ctx.aux1 == 0.0
        v, ctx = run_node("(IFLTE 2 1 (set_Aux1 9) 4)", r, table)
        assert v == 4.0 and ctx.aux1 == 0.0
        assert run_node("(IFLTE 2 2 3 4)", r, table)[0] == 3.0  # <= is inclusive

    def test_set_and_sum_aux(self, table):
        r = make_record("ACGT")
        v, ctx = run_node("(ADD (set_Aux2 5) (sum_Aux2 2))", r, table)
        assert ctx.aux2 == 7.0
        assert v == 12.0  # set returns 5, sum returns the updated cell (7)

    def test_base_identity_terminals(self, table):
        r = make_record("ACGTN" + "A" * 31)
        for pos, (hit, miss) in enumerate([("A", "C"), ("C", "A"), ("G", "T"),
                                           ("T", "G"), ("N", "A")], start=1):
            assert run_node(hit, r, table, base_pos=pos)[0] == 1.0
            assert run_node(miss, r, table, base_pos=pos)[0] == -1.0

    def test_arithmetic_and_reads(self, table):
        r = make_record("ACGT", qual=RISING_QUAL, x=0.25, y=0.75)
        assert run_node("(SUB 7 2)", r, table)[0] == 5.0
        assert run_node("(MUL 3 4)", r, table)[0] == 12.0
        assert run_node("len", r, table)[0] == 36.0
        assert run_node("X", r, table)[0] == 0.25
        assert run_node("Y", r, table)[0] == 0.75
        assert run_node("Qual", r, table, base_pos=36)[0] == 4.0
        assert run_node("pos", r, table, base_pos=7)[0] == 7.0
        assert run_node("CountN", r, table)[0] == 0.0


class TestLook:
    def test_look_shifts_position_dependent_terminals(self, table):
        r = make_record("AC" + "G" * 34, qual=RISING_QUAL)
        assert run_node("(LOOK Qual)", r, table, base_pos=1)[0] == 0.6
        assert run_node("(LOOK (LOOK Qual))", r, table, base_pos=1)[0] == 0.7
        assert run_node("(LOOK pos)", r, table, base_pos=5)[0] == 6.0

    def test_look_clamps_at_final_base(self, table):
        r = make_record("ACGT", qual=RISING_QUAL)
        assert run_node("(LOOK Qual)", r, table, base_pos=36)[0] == 4.0
        assert run_node("(LOOK (LOOK (LOOK Qual)))", r, table, base_pos=35)[0] == 4.0
        assert run_node("(LOOK pos)", r, table, base_pos=36)[0] == 36.0

    def test_nested_look_reads_min_p_plus_n(self, table):
        r = make_record("ACGT", qual=RISING_QUAL)
        for p in (1, 20, 34, 36):
            for n_look in (1, 2, 5):
                text = "(LOOK " * n_look + "Qual" + ")" * n_look
                expect = RISING_QUAL[min(p + n_look, 36) - 1]
                assert run_node(text, r, table, base_pos=p)[0] == expect

    def test_look_applies_to_every_position_dependent_terminal(self, table):
        bases = "GGGT" + "A" * 32
        r = make_record(bases, qual=RISING_QUAL)
        feats = precompute_features(r)
        ctx = make_context(r, phase=Role.PREPASS1, base_pos=1)
        ctx.m[:] = np.arange(1.0, 37.0)
        for n_look in (1, 2, 34, 40):
            eff = min(1 + n_look, 36)
            wrap = lambda t: "(LOOK " * n_look + t + ")" * n_look
            for text, expect in [
                ("Run", float(feats.run_len[eff - 1])),
                ("S", feats.entropy_prefix[eff - 1]),
                ("M", float(eff)),
                ("G", 1.0 if bases[eff - 1] == "G" else -1.0),
                ("pos", float(eff)),
            ]:
                tr = from_sexpr(wrap(text), Role.PREPASS1, table)
                assert eval_node(tr, ctx, table) == pytest.approx(expect, rel=1e-15)

    def test_look_restores_after_subtree(self, table):
        r = make_record("ACGT", qual=RISING_QUAL)
        v, _ = run_node("(ADD (LOOK Qual) Qual)", r, table, base_pos=1)
        assert v == pytest.approx(0.6 + 0.5)

    def test_deepest_legal_chain_evaluates(self, table):
        # 1021 nested LOOKs exercise the kernel's frame stack bound
        from blastgp.primitives import Op
        from blastgp.trees import MAX_TREE_NODES, Tree
        n = MAX_TREE_NODES - 1
        chain = Tree(np.array([Op.LOOK] * n + [Op.QUAL], dtype=np.int16),
                     np.full(n + 1, -1, dtype=np.int32), Role.PREPASS0)
        r = make_record("ACGT", qual=RISING_QUAL)
        ctx = make_context(r, phase=Role.PREPASS0, base_pos=1)
        assert eval_node(chain, ctx, table) == 4.0  # clamped to the last base
        assert ctx.op_counter == MAX_TREE_NODES


RINGS = {"A": 2, "C": 1, "G": 2, "T": 1, "N": 0}
COMPLEMENTS = ({"A", "T"}, {"C", "G"})


class TestBaseComparisons:
    def test_exhaustive_pair_table(self, table):
        # base_pos holds the standard base; LOOK reaches the compared one
        for std, looked in itertools.product("ACGTN", repeat=2):
            r = make_record(std + looked + "A" * 34)
            self_v = run_node("(LOOK Self)", r, table)[0]
            comp_v = run_node("(LOOK Complement)", r, table)[0]
            size_v = run_node("(LOOK Samesize)", r, table)[0]
            opp_v = run_node("(LOOK Opposite)", r, table)[0]
            assert self_v == (1.0 if std == looked else -1.0)
            assert comp_v == (1.0 if {std, looked} in COMPLEMENTS else -1.0)
            assert size_v == (1.0 if RINGS[std] == RINGS[looked] else -1.0)
            # OPPOSITE is exactly "all three false"
            assert opp_v == (1.0 if (self_v, comp_v, size_v) == (-1.0,) * 3 else -1.0)

    def test_spec_singled_out_pairs(self, table):
        r = make_record("AT" + "G" * 34)
        assert run_node("(LOOK Complement)", r, table)[0] == 1.0
        r = make_record("CT" + "G" * 34)
        assert run_node("(LOOK Samesize)", r, table)[0] == 1.0
        r = make_record("AC" + "G" * 34)
        assert run_node("(LOOK Samesize)", r, table)[0] == -1.0

    def test_without_look_comparisons_are_reflexive(self, table):
        for b in "ACGTN":
            r = make_record(b * 36)
            assert run_node("Self", r, table, base_pos=3)[0] == 1.0
            assert run_node("Opposite", r, table, base_pos=3)[0] == -1.0


class TestTeamSchedule:
    def test_constant_prepass_fills_memory_and_sum(self, table):
        ind = team(table, p0="1", p1="1", res="Sum0")
        pred, ctx = eval_individual(ind, make_record("ACGT"), table)
        assert pred == 36.0
        assert ctx.sum0 == 36.0
        assert np.array_equal(ctx.m, np.ones(36))

    def test_memory_holds_per_position_prepass0_returns(self, table):
        r = make_record("ACGT", qual=RISING_QUAL)
        ind = team(table, p0="(MUL pos Qual)", p1="M", res="Sum1")
        pred, ctx = eval_individual(ind, r, table)
        expect_m = np.array([(i + 1) * RISING_QUAL[i] for i in range(36)])
        assert np.allclose(ctx.m, expect_m, rtol=1e-15)
        assert ctx.sum0 == pytest.approx(expect_m.sum(), rel=1e-12)
        # prepass1 read back m[i] at each position, so sum1 == sum0
        assert ctx.sum1 == pytest.approx(ctx.sum0, rel=1e-12)

    def test_result_phase_reads_final_position(self, table):
        r = make_record("ACGT" * 9, qual=RISING_QUAL)
        ind = team(table, p0="pos", p1="1", res="M")
        pred, _ = eval_individual(ind, r, table)
        assert pred == 36.0  # M in the result phase reads the last cell
        ind = team(table, p0="1", p1="1", res="S")
        pred, _ = eval_individual(ind, r, table)
        assert pred == pytest.approx(2.0, abs=1e-12)  # whole-read entropy

    def test_aux_persists_across_all_calls(self, table):
        ind = team(table, p0="(sum_Aux1 1)", p1="(sum_Aux1 1)", res="Aux1")
        pred, ctx = eval_individual(ind, make_record("ACGT"), table)
        assert pred == 72.0
        assert ctx.aux1 == 72.0

    def test_fresh_context_per_record(self, table):
        ind = team(table, p0="(sum_Aux1 1)", p1="1", res="Aux1")
        prepared = prepare_reads([make_record("ACGT"), make_record("GGTA")])
        preds, _ = eval_team_batch(ind, prepared, table)
        assert np.array_equal(preds, [36.0, 36.0])  # no leakage between reads

    def test_sum0_readable_from_prepass1(self, table):
        ind = team(table, p0="1", p1="Sum0", res="Sum1")
        pred, _ = eval_individual(ind, make_record("ACGT"), table)
        assert pred == 36.0 * 36.0

    def test_lazy_branch_never_fires_across_schedule(self, table):
        ind = team(table, p0="(IFLTE 1 2 Qual (sum_Aux1 1))",
                   p1="(ORN 1 (sum_Aux1 1))", res="Aux1")
        pred, ctx = eval_individual(ind, make_record("ACGT"), table)
        assert pred == 0.0 and ctx.aux1 == 0.0

    def test_op_count_289_for_7_1_1_team(self, table):
        ind = team(table, p0="(ADD (MUL pos Qual) (SUB S Run))", p1="Qual", res="Sum0")
        assert ind.tree_sizes() == (7, 1, 1)
        _, ctx = eval_individual(ind, make_record("ACGT"), table)
        assert ctx.op_counter == 7 * 36 + 1 * 36 + 1 == 289

    def test_batch_matches_stepwise_path(self, table, rng):
        records = []
        for _ in range(20):
            bases = "".join("ACGTN"[i] for i in rng.integers(0, 5, 36))
            qual = tuple(float(q) / 10.0 for q in rng.integers(0, 41, 36))
            records.append(make_record(bases, qual, x=float(rng.random()),
                                       y=float(rng.random())))
        prepared = prepare_reads(records)
        for _ in range(10):
            ind = Individual(random_tree(Role.PREPASS0, "grow", 5, rng, len(table)),
                             random_tree(Role.PREPASS1, "grow", 5, rng, len(table)),
                             random_tree(Role.RESULT, "grow", 5, rng, len(table)))
            batch, ops = eval_team_batch(ind, prepared, table)
            singles = []
            total_ops = 0
            for rec in records:
                p, ctx = eval_individual(ind, rec, table)
                singles.append(p)
                total_ops += ctx.op_counter
            np.testing.assert_array_equal(batch, np.array(singles))
            assert ops == total_ops

    def test_determinism(self, table, rng):
        ind = Individual(random_tree(Role.PREPASS0, "grow", 6, rng, len(table)),
                         random_tree(Role.PREPASS1, "grow", 6, rng, len(table)),
                         random_tree(Role.RESULT, "grow", 6, rng, len(table)))
        prepared = prepare_reads([make_record("ACGTN" + "C" * 31, qual=RISING_QUAL)])
        a, _ = eval_team_batch(ind, prepared, table)
        b, _ = eval_team_batch(ind, prepared, table)
        assert np.array_equal(a, b)


class TestFigureFourTeam:
    """The simplified generation-10 E-value team, against an independent oracle."""

    def test_crafted_record_matches_direct_evaluation(self, table):
        qual = tuple(((i * 7) % 41) / 10.0 for i in range(36))  # includes a zero
        r = make_record("ACGT", qual=qual)
        ind = team(table, p0="(MUL pos Qual)", p1="(DIV pos Qual)", res="(MUL Sum0 Sum1)")
        pred, _ = eval_individual(ind, r, table)
        s1 = sum((i + 1) * qual[i] for i in range(36))
        s2 = sum((i + 1) / qual[i] if qual[i] != 0.0 else 1.0 for i in range(36))
        assert pred == pytest.approx(s1 * s2, rel=1e-12)


class TestBench:
    def test_reports_positive_rate_and_variance(self, table):
        ind = team(table, p0="(ADD (MUL pos Qual) (SUB S Run))", p1="Qual", res="Sum0")
        records = [make_record("ACGT", qual=RISING_QUAL) for _ in range(200)]
        rep = throughput_bench(ind, records, table, repeats=3)
        assert rep.ops_per_pass == 289 * 200
        assert rep.best_rate > 0
        assert len(rep.rates) == 3
        assert "rate sd" in rep.to_text()
        assert rep.to_tsv().startswith("pass\tseconds")
