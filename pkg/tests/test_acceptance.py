"""Acceptance suite: every criterion the engine must meet, one test each.

Numbered tests 1-13 pin the worked medical-record example end to end
(answers, degrees, scores, orderings), each value asserted exactly or at the
stated 1e-9 tolerance. Criterion 14 runs the randomized property suites with
counted cases (>= 500 each) under a shared 10-second budget.
"""

import random
import time
from dataclasses import dataclass
from fractions import Fraction

from qrelax import (
    NumericRange,
    PairTable,
    SimilarityConfig,
    evaluate,
    evaluate_naive,
    load_taxonomy,
    parse_query,
    sim_taxonomy,
    translate,
)
from qrelax.algebra import canonical_key
from qrelax.relaxation import Operator, enumerate_dc, relax_one_step
from qrelax.values import Degree
from qrelax.weighting import (
    Agg,
    DcMode,
    WeightingPolicy,
    filter_threshold,
    rank_candidates,
    score_table,
    weight_candidate,
)
from gen import (
    CONSTANT_POOL,
    apply_step_logically,
    random_database,
    random_query,
    random_rule,
)
from test_algebra import CORRESPONDENCE_CASES
from test_relaxation import check_soundness

TOL = Fraction(1, 10**9)
_suite_stats: dict[str, tuple[int, float]] = {}


def _exact(actual: Degree, expected: Degree) -> bool:
    return abs(actual - expected) <= TOL


def _passed(number: int, text: str) -> None:
    print(f"ACCEPTANCE {number:>2}: PASS - {text}")


def weighted_candidates(spj, db, rules, cfg, policy):
    candidates = relax_one_step(spj, db, rules)
    for cand in candidates:
        cand.weighted = weight_candidate(cand, spj, cfg, policy)
        cand.filtered = filter_threshold(cand.weighted, policy.min_sim)
        cand.score = score_table(cand.filtered, policy.table_agg)
    return candidates


def test_criterion_01_running_query_fails(db, running_spj):
    table = evaluate(running_spj, db)
    assert table.rows == frozenset()
    assert table.columns == ("x",)
    _passed(1, "the running example query returns an empty table")


def test_criterion_02_correspondence_table_conformance(db):
    for text, expected in CORRESPONDENCE_CASES:
        spj = translate(parse_query(text), db.schemas)
        fast, naive = evaluate(spj, db), evaluate_naive(spj, db)
        assert fast == naive
        assert fast.rows == frozenset(expected)
    _passed(2, "all 7 logic/algebra correspondences match the naive oracle")


def test_criterion_03_drop_answers(db, running_spj):
    drop_first, drop_second = enumerate_dc(running_spj)
    assert evaluate(drop_second.query, db).rows == frozenset({("Pete",)})
    assert evaluate(drop_first.query, db).rows == frozenset({("Mary",)})
    _passed(3, "dropping each occurrence yields exactly Pete and Mary")


def _running_candidates(db, rules, sim_cfg, running_spj, **policy_kwargs):
    policy = WeightingPolicy(**policy_kwargs)
    return weighted_candidates(running_spj, db, rules, sim_cfg, policy), policy


def _pick(candidates, operator, position=0):
    return [c for c in candidates if c.step.operator is operator][position]


def test_criterion_04_anti_instantiation_answers(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(db, rules, sim_cfg, running_spj)
    eq = _pick(candidates, Operator.AI_EQ)
    flu = _pick(candidates, Operator.AI_CONST, 0)
    cough = _pick(candidates, Operator.AI_CONST, 1)
    assert eq.answers.rows == frozenset({("Pete", "Mary")})
    assert flu.answers.rows == frozenset(
        {("Mary", "Cough"), ("Mary", "BrokenLeg"), ("Mary", "Sinusitis")}
    )
    assert cough.answers.rows == frozenset({("Pete", "Flu")})
    _passed(4, "the three anti-instantiation candidates answer as published")


def test_criterion_05_replacement_answer(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(db, rules, sim_cfg, running_spj)
    gr = _pick(candidates, Operator.GR)
    assert gr.answers.rows == frozenset({("Mary",)})
    _passed(5, "the treatment rule rewrites the query to answer Mary")


def test_criterion_06_anti_instantiation_degrees(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(db, rules, sim_cfg, running_spj)
    flu = _pick(candidates, Operator.AI_CONST, 0)
    cough = _pick(candidates, Operator.AI_CONST, 1)
    assert _exact(flu.weighted.degrees[("Mary", "Cough")], Fraction(4, 5))
    assert _exact(flu.weighted.degrees[("Mary", "BrokenLeg")], Fraction(2, 5))
    assert _exact(flu.weighted.degrees[("Mary", "Sinusitis")], Fraction(9, 10))
    assert _exact(cough.weighted.degrees[("Pete", "Flu")], Fraction(4, 5))
    _passed(6, "anti-instantiation degrees are 0.8/0.4/0.9 and 0.8")


def test_criterion_07_table_comparison(db, rules, sim_cfg, running_spj):
    by_max, _ = _running_candidates(db, rules, sim_cfg, running_spj, table_agg=Agg.MAX)
    flu, cough = _pick(by_max, Operator.AI_CONST, 0), _pick(by_max, Operator.AI_CONST, 1)
    assert _exact(flu.score, Fraction(9, 10)) and _exact(cough.score, Fraction(4, 5))
    ranked = rank_candidates(by_max)
    assert ranked.index(flu) < ranked.index(cough)

    by_avg, _ = _running_candidates(db, rules, sim_cfg, running_spj, table_agg=Agg.AVG)
    flu, cough = _pick(by_avg, Operator.AI_CONST, 0), _pick(by_avg, Operator.AI_CONST, 1)
    assert _exact(flu.score, Fraction(7, 10)) and _exact(cough.score, Fraction(4, 5))
    ranked = rank_candidates(by_avg)
    assert ranked.index(cough) < ranked.index(flu)
    _passed(7, "max scores 0.9 vs 0.8, avg scores 0.7 vs 0.8, both orderings hold")


def test_criterion_08_equality_degree(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(db, rules, sim_cfg, running_spj)
    eq = _pick(candidates, Operator.AI_EQ)
    assert _exact(eq.weighted.degrees[("Pete", "Mary")], Fraction(9, 10))
    _passed(8, "the split name equality weighs (Pete, Mary) at 0.9")


def test_criterion_09_threshold(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(
        db, rules, sim_cfg, running_spj, min_sim=Fraction(1, 2)
    )
    flu = _pick(candidates, Operator.AI_CONST, 0)
    assert flu.weighted.rows - flu.filtered.rows == {("Mary", "BrokenLeg")}
    _passed(9, "threshold 0.5 withholds exactly the BrokenLeg row")


def test_criterion_10_syntactic_drop_degree(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(
        db, rules, sim_cfg, running_spj, dc_mode=DcMode.SYNTACTIC_ARITY
    )
    for cand in (c for c in candidates if c.step.operator is Operator.DC):
        assert all(_exact(d, Fraction(1, 2)) for d in cand.weighted.degrees.values())
        assert cand.weighted.rows
    _passed(10, "syntactic drop degree is the uniform arity ratio 0.5")


def test_criterion_11_semantic_drop_degrees(db, sim_cfg):
    spj = translate(parse_query("exists n: Ill(n, d) & Ill(n, Cough)"), db.schemas)
    policy = WeightingPolicy(dc_mode=DcMode.SEMANTIC)
    candidates = weighted_candidates(spj, db, None, sim_cfg, policy)
    drop_second = [
        c for c in candidates
        if c.step.operator is Operator.DC and c.step.dc_occurrence == 2
    ][0]
    expected = {
        ("Cough",): Fraction(1),
        ("Flu",): Fraction(4, 5),
        ("BrokenLeg",): Fraction(2, 5),
        ("Sinusitis",): Fraction(7, 10),
    }
    assert drop_second.weighted.rows == frozenset(expected)
    for row, degree in expected.items():
        assert _exact(drop_second.weighted.degrees[row], degree)
    _passed(11, "semantic drop degrees are 1.0/0.8/0.4/0.7 on the disease table")


def test_criterion_12_replacement_degree(db, rules, sim_cfg, running_spj):
    candidates, _ = _running_candidates(db, rules, sim_cfg, running_spj)
    gr = _pick(candidates, Operator.GR)
    assert gr.weighted.rows
    assert all(_exact(d, Fraction(1, 2)) for d in gr.weighted.degrees.values())
    _passed(12, "every replacement answer carries the rule degree 0.5")


def test_criterion_13_numeric_similarity():
    r = NumericRange(Fraction(0), Fraction(1000))
    assert r.sim(Fraction(100), Fraction(110)) == Fraction(99, 100)
    _passed(13, "numeric scaling gives sim(100, 110) = 0.99 exactly")


# --- criterion 14: randomized property suites ------------------------------


def _timed(name):
    def wrap(fn):
        def run(*args, **kwargs):
            start = time.monotonic()
            cases = fn(*args, **kwargs)
            _suite_stats[name] = (cases, time.monotonic() - start)
            assert cases >= 500, f"{name}: only {cases} cases"
            return cases

        return run

    return wrap


@_timed("oracle equivalence")
def _suite_oracle_equivalence():
    rng = random.Random(0xE0)
    for _ in range(500):
        db = random_database(rng)
        spj = translate(random_query(rng, db), db.schemas)
        assert evaluate(spj, db) == evaluate_naive(spj, db)
    return 500


@_timed("similarity provider laws")
def _suite_similarity_laws():
    rng = random.Random(0xE1)
    values = CONSTANT_POOL + ["Unknown1", "Unknown2"]
    cases = 0
    while cases < 500:
        entries = {
            tuple(sorted(rng.sample(CONSTANT_POOL, 2))): Fraction(rng.randint(0, 100), 100)
            for _ in range(rng.randint(0, 8))
        }
        providers = [PairTable(entries, Fraction(rng.randint(0, 100), 100))]
        lo = Fraction(rng.randint(0, 50))
        providers.append(NumericRange(lo, lo + rng.randint(1, 100)))
        size = rng.randint(2, 7)
        parent = {f"N{i}": f"N{rng.randint(0, i - 1)}" for i in range(1, size)}
        taxonomy = load_taxonomy(
            "child,parent\n" + "\n".join(f"{c},{p}" for c, p in parent.items())
        )
        measure = rng.choice(["wupalmer", "path", "lch"])
        for provider in providers:
            if isinstance(provider, NumericRange):
                a = lo + Fraction(rng.randint(0, 100), 2)
                b = lo + Fraction(rng.randint(0, 100), 2)
            else:
                a, b = rng.choice(values), rng.choice(values)
            forward, backward = provider.sim(a, b), provider.sim(b, a)
            assert 0 <= forward <= 1 and forward == backward
            assert provider.sim(a, a) == 1
            cases += 1
        nodes = sorted(taxonomy.depth)
        a, b = rng.choice(nodes), rng.choice(nodes)
        forward = sim_taxonomy(taxonomy, measure, a, b)
        assert 0 <= forward <= 1
        assert sim_taxonomy(taxonomy, measure, b, a) == forward
        assert sim_taxonomy(taxonomy, measure, a, a) == 1
        cases += 1
    return cases


@_timed("generalization soundness")
def _suite_soundness():
    rng = random.Random(0xE2)
    cases = 0
    while cases < 500:
        db = random_database(rng)
        spj = translate(random_query(rng, db), db.schemas)
        original = evaluate(spj, db)
        for cand in relax_one_step(spj, db, None, ops_selected=("DC", "AI")):
            check_soundness(original, cand)
            cases += 1
    return cases


@_timed("algebra/logic commutation")
def _suite_commutation():
    rng = random.Random(0xE3)
    cases = 0
    while cases < 500:
        db = random_database(rng)
        q = random_query(rng, db)
        spj = translate(q, db.schemas)
        rules = RuleBase((random_rule(rng, db),))
        for cand in relax_one_step(spj, db, rules):
            logical = apply_step_logically(q, cand.step, db)
            assert canonical_key(translate(logical, db.schemas)) == canonical_key(cand.query)
            cases += 1
    return cases


def _random_sim_config(rng) -> SimilarityConfig:
    providers = {}
    for attr in ("A", "B", "C"):
        entries = {
            tuple(sorted(rng.sample(CONSTANT_POOL, 2))): Fraction(rng.randint(0, 100), 100)
            for _ in range(rng.randint(0, 6))
        }
        providers[attr] = PairTable(entries, Fraction(rng.randint(0, 100), 100))
    return SimilarityConfig(providers, Fraction(rng.randint(0, 100), 100))


def _scored(spj, db, cfg, policy):
    candidates = relax_one_step(spj, db, None, ops_selected=("DC", "AI"))
    for cand in candidates:
        cand.weighted = weight_candidate(cand, spj, cfg, policy)
        cand.filtered = filter_threshold(cand.weighted, policy.min_sim)
        cand.score = score_table(cand.filtered, policy.table_agg)
    return candidates


@_timed("ranking determinism")
def _suite_ranking_determinism():
    rng = random.Random(0xE4)
    cases = 0
    while cases < 500:
        db = random_database(rng)
        spj = translate(random_query(rng, db), db.schemas)
        cfg = _random_sim_config(rng)
        policy = WeightingPolicy(table_agg=rng.choice([Agg.MAX, Agg.AVG]))
        candidates = _scored(spj, db, cfg, policy)
        baseline = rank_candidates(candidates)
        for _ in range(5):
            shuffled = list(candidates)
            rng.shuffle(shuffled)
            assert rank_candidates(shuffled) == baseline
            cases += 1
    return cases


@dataclass(frozen=True)
class _ScaledConfig(SimilarityConfig):
    """Every similarity uniformly multiplied by a constant factor."""

    kappa: Degree = Fraction(1)

    def sim(self, attribute, a, b):
        return self.kappa * SimilarityConfig.sim(self, attribute, a, b)


@_timed("scale invariance of the ranking")
def _suite_argmax_invariance():
    rng = random.Random(0xE5)
    cases = 0
    while cases < 500:
        db = random_database(rng)
        spj = translate(random_query(rng, db), db.schemas)
        base_cfg = _random_sim_config(rng)
        for kappa in (Fraction(1, 2), Fraction(9, 10)):
            scaled_cfg = _ScaledConfig(base_cfg.providers, base_cfg.default_sim, kappa)
            for agg in (Agg.MAX, Agg.AVG):
                policy = WeightingPolicy(table_agg=agg)
                base = _scored(spj, db, base_cfg, policy)
                scaled = _scored(spj, db, scaled_cfg, policy)
                for b_cand, s_cand in zip(base, scaled):
                    assert s_cand.score == kappa * b_cand.score
                    for row, degree in b_cand.weighted.degrees.items():
                        assert s_cand.weighted.degrees[row] == kappa * degree
                base_order = [c.order_key for c in rank_candidates(base)]
                scaled_order = [c.order_key for c in rank_candidates(scaled)]
                assert base_order == scaled_order
                cases += 1
    return cases


def test_criterion_14_property_suites():
    _suite_oracle_equivalence()
    _suite_similarity_laws()
    _suite_soundness()
    _suite_commutation()
    _suite_ranking_determinism()
    _suite_argmax_invariance()
    total_cases = sum(c for c, _ in _suite_stats.values())
    total_time = sum(t for _, t in _suite_stats.values())
    for name, (cases, elapsed) in _suite_stats.items():
        print(f"  property suite [{name}]: {cases} cases in {elapsed:.2f}s")
    assert total_time < 10.0, f"property suites took {total_time:.2f}s"
    _passed(14, f"{total_cases} random cases across 6 suites in {total_time:.2f}s")
