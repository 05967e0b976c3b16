"""Acceptance suite: one test and one PASS/FAIL line per criterion."""

import hashlib
import itertools
import math
import time

import numpy as np
from click.testing import CliRunner
from scipy.special import log_softmax

from _oracles import discordant_pairs
from rankzsl.cli import main
from rankzsl.evaluation import (
    derive_seeds,
    loo_1nn_discriminability,
    loo_bayes_ranking,
    run_benchmark,
)
from rankzsl.prior_learning import (
    consensus_objective,
    kemeny_exhaustive,
    mallows_consensus,
    mallows_fit_lambda,
    pl_log_likelihood,
)
from rankzsl.ranking_core import (
    Ranking,
    TopKList,
    enumerate_rankings,
    enumerate_topk,
    hausdorff_topk_table,
    kendall_distance,
    kendall_topk_distance,
    ranking_from_scores,
)
from rankzsl.ranking_models import (
    MallowsModel,
    PlackettLuceModel,
    mallows_log_phi,
    mallows_log_prob,
    mallows_sample_many,
    pl_log_prob,
)
from rankzsl.score_rankers import PairwiseScores, deterministic_rank_ovo, pl_ranker_log_prob
from rankzsl.synthetic import synth_crowd, synth_similarity_sources, synth_world
from rankzsl.zero_shot import pr_classify


def test_criterion_1_distance_correctness(acceptance_report):
    start = time.perf_counter()
    rs = list(enumerate_rankings(5))
    kendall_bad = sum(kendall_distance(a, b) != discordant_pairs(a.order, b.order)
                      for a, b in itertools.product(rs, rs))
    topk_bad = topk_pairs = 0
    for c in range(1, 7):
        for k in range(1, c + 1):
            lists = list(enumerate_topk(c, k))
            oracle = hausdorff_topk_table(c, k)
            closed = np.array([[kendall_topk_distance(a, b) for b in lists] for a in lists])
            topk_bad += int((closed != oracle).sum())
            topk_pairs += closed.size
    elapsed = time.perf_counter() - start
    passed = kendall_bad == 0 and topk_bad == 0 and elapsed < 60
    acceptance_report(1, "distance correctness", passed,
                      f"{len(rs) ** 2} full pairs, {kendall_bad} mismatches; {topk_pairs} top-K "
                      f"pairs, {topk_bad} mismatches; {elapsed:.1f}s")
    assert passed


def test_criterion_2_normalization(acceptance_report):
    rng = np.random.default_rng(derive_seeds(2, 1)[0])
    worst_pl = worst_mallows = 0.0
    for _ in range(50):
        c = int(rng.integers(1, 7))
        pl = PlackettLuceModel(rng.normal(0, 2, c))
        mode = Ranking(tuple(rng.permutation(c)))
        lam = float(rng.exponential(1.5))
        for k in range(1, c + 1):
            lists = list(enumerate_topk(c, k))
            worst_pl = max(worst_pl, abs(sum(math.exp(pl_log_prob(pl, t)) for t in lists) - 1))
            m = MallowsModel(mode, lam, k)
            worst_mallows = max(worst_mallows,
                                abs(sum(math.exp(mallows_log_prob(m, t)) for t in lists) - 1))
    passed = worst_pl < 1e-9 and worst_mallows < 1e-9
    acceptance_report(2, "normalization", passed,
                      f"max |sum-1|: PL {worst_pl:.1e}, Mallows {worst_mallows:.1e}")
    assert passed


def test_criterion_3_closed_form_phi(acceptance_report):
    worst = 0.0
    for lam in (0.0, 0.1, 1.0, 5.0):
        for c in range(1, 7):
            for k in range(1, c + 1):
                # exhaustive sum of exp(-lam * sum V_j) around the identity mode
                exact = 0.0
                for t in enumerate_topk(c, k):
                    placed, v = set(), 0
                    for item in t.prefix:
                        v += sum(1 for y in range(item) if y not in placed)
                        placed.add(item)
                    exact += math.exp(-lam * v)
                rel = abs(math.exp(mallows_log_phi(lam, c, k)) - exact) / exact
                worst = max(worst, rel)
    passed = worst < 1e-9
    acceptance_report(3, "closed-form phi", passed, f"max relative error {worst:.1e}")
    assert passed


def test_criterion_4_estimation(acceptance_report):
    rng = np.random.default_rng(derive_seeds(4, 1)[0])
    worst_grad = 0.0
    for _ in range(20):
        c = int(rng.integers(2, 9))
        k = int(rng.integers(1, c + 1))
        theta = rng.normal(0, 1.5, c)
        lists = [TopKList(tuple(rng.permutation(c)[:k]), c) for _ in range(30)]
        _, g = pl_log_likelihood(theta, lists)
        h = 1e-5
        fd = np.array([(pl_log_likelihood(theta + h * e, lists)[0]
                        - pl_log_likelihood(theta - h * e, lists)[0]) / (2 * h)
                       for e in np.eye(c)])
        worst_grad = max(worst_grad, np.linalg.norm(g - fd) / np.linalg.norm(fd))

    local_ok = exact_hits = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        mode = Ranking(tuple(r.permutation(5)))
        lists = [x.top(5) for x in mallows_sample_many(MallowsModel(mode, 2.0, 5), 25, r)]
        cons = mallows_consensus(lists, 5)
        obj = consensus_objective(lists, cons)
        neighbours = []
        for p in range(4):
            o = list(cons.order)
            o[p], o[p + 1] = o[p + 1], o[p]
            neighbours.append(consensus_objective(lists, Ranking(tuple(o))))
        local_ok += min(neighbours) >= obj
        exact_hits += cons == kemeny_exhaustive(lists, 5)

    true_mode = Ranking((2, 4, 0, 1, 3))
    draws = mallows_sample_many(MallowsModel(true_mode, 1.5, 5), 5000, seed=0)
    lam = mallows_fit_lambda([x.top(5) for x in draws], true_mode)

    passed = worst_grad < 1e-5 and local_ok == 100 and exact_hits >= 95 and abs(lam - 1.5) <= 0.15
    acceptance_report(4, "estimation", passed,
                      f"PL grad rel err {worst_grad:.1e}; locally optimal {local_ok}/100; "
                      f"equals exhaustive {exact_hits}/100; lambda {lam:.4f} for 1.5")
    assert passed


def test_criterion_5_ranker_identities(acceptance_report):
    rng = np.random.default_rng(derive_seeds(5, 1)[0])
    worst = 0.0
    for _ in range(200):
        s = rng.normal(0, 5, int(rng.integers(2, 10)))
        ls = log_softmax(s)
        for i in range(s.size):
            worst = max(worst, abs(pl_ranker_log_prob(s, TopKList((i,), s.size)) - ls[i]))
    shift_ok = 0
    for _ in range(1000):
        c = int(rng.integers(2, 8))
        s = rng.normal(0, 3, c)
        priors = [Ranking(tuple(rng.permutation(c))) for _ in range(int(rng.integers(1, 6)))]
        k = int(rng.integers(1, c + 1))
        shift = float(rng.normal(0, 100))
        shift_ok += pr_classify(s, priors, k).index == pr_classify(s + shift, priors, k).index
    ovo_ok = ovo_total = 0
    for _ in range(3000):
        c = int(rng.integers(2, 9))
        g = rng.integers(-3, 4, c).astype(float) if rng.random() < 0.5 else rng.normal(size=c)
        ovo_total += 1
        ovo_ok += deterministic_rank_ovo(PairwiseScores.from_differences(g)) == ranking_from_scores(g)
    passed = worst <= 1e-12 and shift_ok == 1000 and ovo_ok == ovo_total
    acceptance_report(5, "ranker identities", passed,
                      f"K=1 max |diff| {worst:.1e}; shift-invariant {shift_ok}/1000; "
                      f"ovo = score order {ovo_ok}/{ovo_total}")
    assert passed


def test_criterion_6_result1_discriminability(acceptance_report):
    start = time.perf_counter()
    world_seed, source_seed = derive_seeds(6, 2)
    world = synth_world(40, 10, seed=world_seed)[0]
    sources = synth_similarity_sources(world, 5, distortion=0.05, seed=source_seed)
    euclid = loo_1nn_discriminability(sources, "euclidean")
    normed = loo_1nn_discriminability(sources, "euclidean_normalized")
    kendall = loo_1nn_discriminability(sources, "kendall_topk", 2)
    elapsed = time.perf_counter() - start
    passed = kendall - euclid >= 0.15
    acceptance_report(6, "Kendall top-2 vs Euclidean discriminability", passed,
                      f"Euclidean {euclid:.2f}, normalized {normed:.2f}, Kendall K=2 "
                      f"{kendall:.2f}; {elapsed:.1f}s")
    assert passed


def test_criterion_7_crowd_loo(acceptance_report):
    world_seed, crowd_seed = derive_seeds(7, 2)
    world = synth_world(40, 10, seed=world_seed)[0]
    crowd = synth_crowd(world, 50, lam=2.0, k=10, seed=crowd_seed)
    acc = loo_bayes_ranking(crowd, world.test_classes, "mallows", k=5)
    passed = acc >= 0.85
    acceptance_report(7, "crowd leave-one-out Bayes (Mallows, K=5)", passed,
                      f"accuracy {acc:.3f} over {len(crowd)} surveys")
    assert passed


def _best(rows, method):
    return max(r["accuracy"] for r in rows if r["method"] == method)


def _pr(rows):
    return next(r["accuracy"] for r in rows if r["method"] == "pr" and r["setting"] == "pl")


def test_criterion_8_end_to_end_zero_shot(acceptance_report):
    start = time.perf_counter()
    low = [run_benchmark(seed, 0.25) for seed in range(5)]
    moderate = [run_benchmark(seed, 1.0) for seed in range(5)]
    low_pr = float(np.mean([_pr(rows) for rows in low]))
    ordering = [(_pr(rows), _best(rows, "dr"), _best(rows, "ds")) for rows in moderate]
    order_ok = sum(pr >= dr and pr >= ds for pr, dr, ds in ordering)
    elapsed = time.perf_counter() - start
    passed = low_pr >= 0.8 and order_ok == 5 and elapsed < 300
    detail = ", ".join(f"{pr:.3f}/{dr:.3f}/{ds:.3f}" for pr, dr, ds in ordering)
    acceptance_report(8, "end-to-end zero-shot", passed,
                      f"low-noise mean PR {low_pr:.3f}; moderate PR/bestDR/bestDS per seed: "
                      f"{detail}; ordering holds on {order_ok}/5; {elapsed:.0f}s")
    assert passed


def _digest(directory):
    return {str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.rglob("*")) if p.is_file()}


def _every_command(out):
    runner = CliRunner()

    def run(*args):
        res = runner.invoke(main, [str(a) for a in args])
        assert res.exit_code == 0, res.output

    w = out / "w"
    sims = [a for i in range(5) for a in ("--similarity", w / f"source_{i}.csv")]
    run("synth", "--out-dir", w, "--seed", 9, "--n-train", 20, "--n-test", 5,
        "--samples-per-class", 10, "--surveys", 10)
    for mode in ("multiclass", "ovr", "ovo"):
        run("train", "--data", w / "train.csv", "--mode", mode, "--out", out / f"{mode}.json")
    for model in ("pl", "mallows"):
        run("priors", *sims, "--model", model, "--out", out / f"{model}.json")
    run("priors", "--rankings", w / "crowd_rankings.csv", "--train-classes-from",
        w / "world.json", "--out", out / "crowd.json")
    for method, suite, extra in [("pr", "multiclass", ["--priors", out / "pl.json"]),
                                 ("pr", "ovo", ["--priors", out / "mallows.json"]),
                                 ("dr", "ovr", ["--priors", out / "pl.json"]),
                                 ("ds", "ovr", [*sims, "--agg", "arithm"])]:
        run("classify", "--suite", out / f"{suite}.json", "--test", w / "test.csv",
            "--method", method, *extra, "--out", out / f"pred_{method}_{suite}.csv")
    run("eval", "--task", "zeroshot", "--suite", out / "ovr.json", "--test", w / "test.csv",
        "--method", "ds", *sims, "--agg", "indiv", "--out", out / "zs.csv",
        "--confusion-out", out / "conf.csv")
    run("eval", "--task", "discriminability", *sims, "--k", 2, "--out", out / "disc.csv")
    run("eval", "--task", "crowd", "--rankings", w / "crowd_rankings.csv",
        "--train-classes-from", w / "world.json", "--k", 5, "--out", out / "crowd_loo.csv")
    run("eval", "--task", "benchmark", "--noise", 0.5, "--n-seeds", 1, "--seed", 3,
        "--out", out / "bench.csv")
    run("distances", *sims, "--out", out / "dist.csv")


def test_criterion_9_cli_determinism(acceptance_report, tmp_path):
    _every_command(tmp_path / "first")
    _every_command(tmp_path / "second")
    a, b = _digest(tmp_path / "first"), _digest(tmp_path / "second")
    differing = sorted(k for k in a if a[k] != b.get(k))
    passed = a.keys() == b.keys() and not differing
    acceptance_report(9, "CLI determinism", passed,
                      f"{len(a)} output files, {len(differing)} differ")
    assert passed
