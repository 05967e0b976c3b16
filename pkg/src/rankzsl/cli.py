"""Command-line front end.

Every subcommand writes its outputs atomically; identical flags and seed
give byte-identical files.  ``--config FILE`` (YAML or JSON, flat mapping of
option names) supplies defaults that explicit flags override.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import fileio
from .baseline_classifiers import LinearSuite, fit_binary_suite, fit_multinomial_logistic
from .evaluation import (
    derive_seeds,
    loo_1nn_discriminability,
    loo_bayes_ranking,
    pairwise_distances,
    run_benchmark,
    source_rankings,
    zero_shot_eval,
)
from .prior_learning import FitConfig, learn_priors
from .synthetic import synth_crowd, synth_similarity_sources, synth_world
from .zero_shot import aggregate_similarities, similarity_priors

logger = logging.getLogger("rankzsl")

AGG_METHODS = {"arithm": "arithmetic", "geom": "geometric"}


def _load_config(ctx: click.Context, _param, path):
    if path is None:
        return None
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise click.BadParameter("config must be a mapping of option names to values")
    flat = {str(k).replace("-", "_"): v for k, v in cfg.items()}
    ctx.default_map = {name: flat for name in ctx.command.commands}
    return path


class _Group(click.Group):
    """Turns library errors into a one-line diagnostic and exit code 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ValueError, KeyError, OSError, RuntimeError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


@click.group(cls=_Group)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config,
              is_eager=True, expose_value=False, help="YAML/JSON file of default option values.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Ranking-based zero-shot classification toolkit."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _train_classes_from(path) -> list[str]:
    d = fileio.read_json(path)
    for key in ("train_classes", "class_names"):
        if key in d:
            return list(d[key])
    raise click.UsageError(f"{path} has neither 'train_classes' nor 'class_names'")


def _read_sources(paths, train_classes=None):
    if not paths:
        raise click.UsageError("at least one --similarity file is required")
    sources = [fileio.parse_similarity(p, train_classes) for p in paths]
    first = sources[0]
    for s in sources[1:]:
        if s.test_classes != first.test_classes:
            raise click.UsageError(f"{s.name}: test classes differ from {first.name}")
    return sources


def _cfg(eta, seed) -> FitConfig:
    return FitConfig(eta=eta, seed=seed)


# -- synth ---------------------------------------------------------------------

@main.command()
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--n-train", default=40, show_default=True)
@click.option("--n-test", default=10, show_default=True)
@click.option("--feature-dim", default=50, show_default=True)
@click.option("--samples-per-class", default=50, show_default=True)
@click.option("--noise", default=1.0, show_default=True, help="Feature noise level.")
@click.option("--n-sources", default=5, show_default=True)
@click.option("--distortion", default=0.05, show_default=True)
@click.option("--surveys", default=50, show_default=True, help="Crowd surveys per test class.")
@click.option("--crowd-lambda", default=2.0, show_default=True)
@click.option("--crowd-k", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_dir, n_train, n_test, feature_dim, samples_per_class, noise, n_sources,
          distortion, surveys, crowd_lambda, crowd_k, seed):
    """Generate a synthetic world, datasets, similarity sources and a crowd."""
    out = Path(out_dir)
    world_seed, source_seed, crowd_seed = derive_seeds(seed, 3)
    world, train, test = synth_world(n_train, n_test, feature_dim, samples_per_class, noise,
                                     world_seed)
    sources = synth_similarity_sources(world, n_sources, distortion, source_seed)
    crowd = synth_crowd(world, surveys, crowd_lambda, crowd_k, crowd_seed)
    fileio.write_json(out / "world.json", world.to_dict())
    fileio.write_dataset(out / "train.csv", train)
    fileio.write_dataset(out / "test.csv", test)
    for src in sources:
        fileio.write_similarity(out / f"{src.name}.csv", src)
    fileio.write_rankings(out / "crowd_rankings.csv", crowd, world.train_classes)
    fileio.write_rankings(out / "source_rankings.csv", source_rankings(sources),
                          world.train_classes)
    click.echo(f"wrote synthetic world to {out}")


# -- train ---------------------------------------------------------------------

@main.command()
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mode", type=click.Choice(["ovr", "ovo", "multiclass"]), default="multiclass",
              show_default=True)
@click.option("--reg", default=1e-3, show_default=True)
@click.option("--calibrate/--no-calibrate", default=None,
              help="Platt scaling (default: on for ovr/ovo, off for multiclass).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def train(data, mode, reg, calibrate, out):
    """Fit a linear classifier suite on a training-domain dataset."""
    ds = fileio.parse_dataset(data)
    if mode == "multiclass":
        if calibrate:
            raise click.UsageError("Platt calibration is only available for ovr/ovo suites")
        suite = fit_multinomial_logistic(ds, reg)
    else:
        suite = fit_binary_suite(ds, mode, reg, calibrate=True if calibrate is None else calibrate)
    fileio.write_json(out, suite.to_dict())
    click.echo(f"wrote {mode} suite over {ds.n_classes} classes to {out}")


# -- priors --------------------------------------------------------------------

@main.command()
@click.option("--rankings", type=click.Path(exists=True, dir_okay=False), multiple=True)
@click.option("--similarity", type=click.Path(exists=True, dir_okay=False), multiple=True)
@click.option("--train-classes-from", type=click.Path(exists=True, dir_okay=False),
              help="world.json or suite.json naming the training classes.")
@click.option("--model", type=click.Choice(["pl", "mallows"]), default="pl", show_default=True)
@click.option("--prior-k", type=int, default=None, help="Truncate input rankings to top-K.")
@click.option("--eta", default=0.01, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def priors(rankings, similarity, train_classes_from, model, prior_k, eta, seed, out):
    """Learn per-test-class ranking priors from ranking files or similarity sources."""
    train_classes = _train_classes_from(train_classes_from) if train_classes_from else None
    samples = []
    if similarity:
        sources = _read_sources(similarity, train_classes)
        train_classes = list(sources[0].train_classes)
        samples += source_rankings(sources)
    if rankings:
        if train_classes is None:
            raise click.UsageError("--rankings needs --train-classes-from or --similarity")
        for path in rankings:
            samples += fileio.parse_rankings(path, train_classes)
    if not samples:
        raise click.UsageError("give --rankings and/or --similarity")
    if prior_k is not None:
        samples = [type(s)(s.test_class, s.ranking.truncate(prior_k), s.source_tag)
                   for s in samples]
    test_classes = list(dict.fromkeys(s.test_class for s in samples))
    prior = learn_priors(samples, test_classes, model, _cfg(eta, seed))
    fileio.write_json(out, fileio.priors_to_dict(prior, train_classes))
    click.echo(f"wrote {model} priors for {len(test_classes)} test classes to {out}")


# -- classify / eval zeroshot ----------------------------------------------------

def _zero_shot_inputs(suite_path, test_path, method, priors_path, similarity, agg):
    suite = LinearSuite.from_dict(fileio.read_json(suite_path))
    if method == "pr" and priors_path is None:
        raise click.UsageError("pr needs --priors")
    if method == "ds" and not similarity:
        raise click.UsageError("ds needs --similarity")
    if method == "ds" and suite.mode == "ovo":
        raise click.UsageError("ds needs per-class probabilities (ovr or multiclass suite)")
    variants = []  # (setting name, priors, similarity source)
    if priors_path is not None and method in ("pr", "dr"):
        prior, train_classes = fileio.priors_from_dict(fileio.read_json(priors_path))
        if train_classes != suite.class_names:
            raise click.UsageError("priors and suite disagree on training classes")
        variants.append(("priors", prior, None))
        test_classes = prior.classes
    else:
        sources = _read_sources(similarity, suite.class_names)
        test_classes = list(sources[0].test_classes)
        if agg == "indiv":
            variants += [(s.name, similarity_priors(s), s) for s in sources]
        else:
            merged = aggregate_similarities(sources, AGG_METHODS[agg])
            variants.append((agg, similarity_priors(merged), merged))
    test = fileio.parse_dataset(test_path, test_classes)
    return suite, test, test_classes, variants


def _prediction_rows(test_classes, result):
    rows = [["sample_id", "predicted_class", *test_classes]]
    for i, (p, s) in enumerate(zip(result.predictions, result.scores)):
        rows.append([i, test_classes[p], *(fileio.fmt(v) for v in s)])
    return rows


_zero_shot_options = [
    click.option("--suite", type=click.Path(exists=True, dir_okay=False), required=True),
    click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False),
                 required=True),
    click.option("--method", type=click.Choice(["dr", "pr", "ds"]), default="pr",
                 show_default=True),
    click.option("--priors", "priors_path", type=click.Path(exists=True, dir_okay=False)),
    click.option("--similarity", type=click.Path(exists=True, dir_okay=False), multiple=True),
    click.option("--agg", type=click.Choice(["arithm", "geom", "indiv"]), default="arithm",
                 show_default=True),
    click.option("--k", default=4, show_default=True, help="Top-K list length."),
    click.option("--top-m", default=5, show_default=True, help="DS: similar classes used."),
]


def zero_shot_options(f):
    for opt in reversed(_zero_shot_options):
        f = opt(f)
    return f


@main.command()
@zero_shot_options
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def classify(suite, test_path, method, priors_path, similarity, agg, k, top_m, out):
    """Predict test-domain classes for every sample of a dataset."""
    if agg == "indiv":
        raise click.UsageError("classify needs a single similarity: use --agg arithm or geom")
    suite_, test, test_classes, variants = _zero_shot_inputs(
        suite, test_path, method, priors_path, similarity, agg)
    _, prior, sim = variants[0]
    res = zero_shot_eval(method, suite_, test, priors=prior, similarity=sim, k=k, top_m=top_m)
    fileio.write_csv(out, _prediction_rows(test_classes, res))
    click.echo(f"{method}: accuracy {res.accuracy:.4f} on {len(res.predictions)} samples")


# -- eval ----------------------------------------------------------------------

@main.command(name="eval")
@click.option("--task", type=click.Choice(["discriminability", "crowd", "zeroshot", "benchmark"]),
              required=True)
@click.option("--suite", type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["dr", "pr", "ds"]), default="pr", show_default=True)
@click.option("--priors", "priors_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--similarity", type=click.Path(exists=True, dir_okay=False), multiple=True)
@click.option("--rankings", type=click.Path(exists=True, dir_okay=False))
@click.option("--train-classes-from", type=click.Path(exists=True, dir_okay=False))
@click.option("--agg", type=click.Choice(["arithm", "geom", "indiv"]), default="arithm",
              show_default=True)
@click.option("--model", type=click.Choice(["pl", "mallows"]), default="mallows",
              show_default=True)
@click.option("--metric", type=click.Choice(["euclidean", "euclidean_normalized", "kendall_topk"]),
              multiple=True, help="Discriminability metrics (default: all).")
@click.option("--k", default=4, show_default=True, help="Top-K list length.")
@click.option("--top-m", default=5, show_default=True)
@click.option("--eta", default=0.01, show_default=True)
@click.option("--noise", "noise_levels", type=float, multiple=True,
              help="Benchmark noise levels (default: 0.25 and 1.0).")
@click.option("--n-seeds", default=5, show_default=True, help="Benchmark seeds per noise level.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--confusion-out", type=click.Path(dir_okay=False))
def eval_(task, suite, test_path, method, priors_path, similarity, rankings, train_classes_from,
          agg, model, metric, k, top_m, eta, noise_levels, n_seeds, seed, out, confusion_out):
    """Run an evaluation protocol and write a CSV result table."""
    cfg = _cfg(eta, seed)
    if task == "discriminability":
        sources = _read_sources(similarity)
        rows = [["metric", "k", "accuracy"]]
        for m in metric or ("euclidean", "euclidean_normalized", "kendall_topk"):
            acc = loo_1nn_discriminability(sources, m, k)
            rows.append([m, k if m == "kendall_topk" else "", fileio.fmt(acc)])
    elif task == "crowd":
        if rankings is None or train_classes_from is None:
            raise click.UsageError("crowd needs --rankings and --train-classes-from")
        samples = fileio.parse_rankings(rankings, _train_classes_from(train_classes_from))
        test_classes = list(dict.fromkeys(s.test_class for s in samples))
        acc = loo_bayes_ranking(samples, test_classes, model, k, cfg)
        rows = [["model", "k", "accuracy"], [model, k, fileio.fmt(acc)]]
    elif task == "zeroshot":
        if suite is None or test_path is None:
            raise click.UsageError("zeroshot needs --suite and --test")
        suite_, test, test_classes, variants = _zero_shot_inputs(
            suite, test_path, method, priors_path, similarity, agg)
        rows = [["method", "setting", "k", "accuracy",
                 *(f"acc_{z}" for z in test_classes)]]
        confusion_rows = [["setting", "true\\predicted", *test_classes]]
        accs = []
        for name, prior, sim in variants:
            res = zero_shot_eval(method, suite_, test, priors=prior, similarity=sim, k=k,
                                 top_m=top_m)
            accs.append(res.accuracy)
            confusion_rows += [[name, z, *row]
                               for z, row in zip(test_classes, res.confusion.tolist())]
            rows.append([method, name, k, fileio.fmt(res.accuracy),
                         *(fileio.fmt(v) for v in res.per_class)])
        if len(variants) > 1:
            rows.append([method, "indiv_mean", k, fileio.fmt(float(np.mean(accs))),
                         *([""] * len(test_classes))])
        if confusion_out:
            fileio.write_csv(confusion_out, confusion_rows)
    else:
        rows = [["seed", "noise_level", "method", "suite", "setting", "k", "accuracy"]]
        for noise in noise_levels or (0.25, 1.0):
            for s in range(seed, seed + n_seeds):
                for r in run_benchmark(s, noise, k=k, top_m=top_m, cfg=cfg):
                    rows.append([r["seed"], r["noise_level"], r["method"], r["suite"],
                                 r["setting"], r["k"], fileio.fmt(r["accuracy"])])
    fileio.write_csv(out, rows)
    click.echo(f"wrote {task} results to {out}")


# -- distances -----------------------------------------------------------------

@main.command()
@click.option("--similarity", type=click.Path(exists=True, dir_okay=False), multiple=True,
              required=True)
@click.option("--metric", type=click.Choice(["euclidean", "euclidean_normalized", "kendall_topk"]),
              default="kendall_topk", show_default=True)
@click.option("--k", default=2, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def distances(similarity, metric, k, out):
    """Pairwise distance table between all (source, test class) rows."""
    d, labels = pairwise_distances(_read_sources(similarity), metric, k)
    names = [f"{src}:{z}" for src, z in labels]
    fileio.write_csv(out, [["item", *names]] + [
        [n, *(fileio.fmt(v) for v in row)] for n, row in zip(names, d)])
    click.echo(f"wrote {len(names)}x{len(names)} {metric} distances to {out}")


if __name__ == "__main__":
    main()
