"""Command-line surface tying the package together.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Failures print a
single-line JSON object on stderr (``{"error": <code>, "message": ...}``)
so callers can dispatch on the error kind without scraping text.  All
artifact writes are atomic, and every command that draws randomness takes
``--seed`` so artifacts are byte-reproducible.
"""

import json
import sys

import click

from . import benchmark as bench
from . import dgp, io
from .diagnostics import falsify
from .errors import ConfigError, KacgmError
from .forest import RfConfig
from .interpret import ate_from_pdp, pdp, prp, simplify_pipeline
from .kernels import KernelConfig
from .queries import (Intervention, counterfactual, sample_interventional,
                      sample_observational)
from .scm import EMPIRICAL, KDE, HyperGrid, train_model


# --- config plumbing ---------------------------------------------------------

_CONFIG_KEYS = {"kernel", "forest", "permutations", "margins", "grid",
                "prune_threshold", "noise", "server"}


def _load_config(path):
    cfg = io.load_config(path)
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigError("unknown config keys: %s" % ", ".join(sorted(unknown)))
    return cfg


def _kernel(cfg):
    if "kernel" not in cfg:
        return None
    return KernelConfig(**cfg["kernel"])


def _forest(cfg):
    if "forest" not in cfg:
        return None
    return RfConfig(**cfg["forest"])


def _permutations(cfg, default=199):
    return int(cfg.get("permutations", default))


def _grid(cfg):
    if "grid" not in cfg:
        return None
    kw = dict(cfg["grid"])
    for key in ("hidden", "grid_size", "learning_rates", "l1", "multiplicative"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return HyperGrid(**kw)


def _parse_assignments(graph, pairs, standardized):
    """Turn repeated ``node=value`` options into an Intervention."""
    assignments = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(
                "intervention %r is not of the form node=value" % (pair,))
        name, text = pair.split("=", 1)
        name = name.strip()
        if name not in graph.names:
            raise ConfigError("unknown node %r in intervention" % (name,))
        try:
            if graph.node(name).kind == "categorical":
                value = int(text)
            else:
                value = float(text)
        except ValueError:
            raise click.UsageError(
                "intervention value %r for %r is not numeric" % (text, name))
        assignments[name] = value
    return Intervention(assignments, standardized=standardized)


def _parse_seeds(text):
    """Seed list syntax: '0,1,5' or a half-open range '0:10'."""
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _echo_json(document):
    click.echo(io.canonical_json(document))


def _write_or_echo(out, document):
    if out:
        io.write_json(out, document)
        click.echo("wrote %s" % out)
    else:
        _echo_json(document)


# --- command group -----------------------------------------------------------

@click.group()
def cli():
    """Causal generative modelling with spline-network mechanisms."""


@cli.command()
@click.option("--dataset", required=True,
              type=click.Choice(list(dgp.DGP_IDS) + ["sensitivity"]),
              help="Benchmark data-generating process.")
@click.option("--n", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mixed", is_flag=True,
              help="Replace the third node with its ternary discretization.")
@click.option("--alpha", type=float, default=0.0, show_default=True,
              help="Noise-coupling strength (sensitivity dataset only).")
@click.option("--out", type=click.Path(), required=True,
              help="Destination CSV.")
@click.option("--graph-out", type=click.Path(), default=None,
              help="Also write the generating graph as JSON.")
def generate(dataset, n, seed, mixed, alpha, out, graph_out):
    """Draw a dataset from one of the built-in ground-truth simulators."""
    if dataset == "sensitivity":
        if mixed:
            raise ConfigError("the sensitivity dataset has no mixed variant")
        columns, handle = dgp.sensitivity_generate(
            dgp.SensitivityConfig(alpha=alpha, n=n, seed=seed))
    else:
        columns, handle = dgp.generate(dgp.DgpSpec(dataset, n=n, seed=seed,
                                                   mixed=mixed))
    io.write_csv(out, handle.graph, columns)
    if graph_out:
        io.save_graph(graph_out, handle.graph)
    click.echo("wrote %d rows of %s to %s" % (n, dataset, out))


@cli.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True),
              required=True, help="Graph JSON file.")
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="Training CSV.")
@click.option("--out", type=click.Path(), required=True,
              help="Destination model file.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--kaam", is_flag=True,
              help="Restrict the grid to additive models (no hidden layer).")
@click.option("--noise", type=click.Choice([EMPIRICAL, KDE]),
              default=EMPIRICAL, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON overrides (grid, forest).")
def train(graph_path, data_path, out, seed, kaam, noise, config_path):
    """Fit one spline-network mechanism per node over the hyper grid."""
    cfg = _load_config(config_path)
    graph = io.load_graph(graph_path)
    columns = io.read_csv(data_path, graph)
    grid = _grid(cfg) or HyperGrid()
    if kaam:
        grid = grid.kaam()
    model = train_model(graph, columns, grid, seed=seed, noise_kind=noise,
                        selection_forest=_forest(cfg))
    io.save_model(model, out)
    for report in model.metadata["selection"]:
        if report["root"]:
            click.echo("node %-12s root (no mechanism search)" % report["node"])
        else:
            w = report["winner"]
            click.echo(
                "node %-12s winner of %d candidates: hidden=%d grid=%d "
                "lr=%g l1=%g mult=%s (val=%.4g acc=%.3f)"
                % (report["node"], len(report["candidates"]), w["hidden"],
                   w["grid_size"], w["learning_rate"], w["l1"],
                   w["multiplicative"], w["validation"], w["accuracy"]))
    click.echo("wrote %s" % out)


@cli.command(name="falsify")
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="Held-out CSV.")
@click.option("--out", type=click.Path(), default=None,
              help="Destination report JSON (stdout when omitted).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
def falsify_cmd(model_path, data_path, out, seed, config_path):
    """Run the assumption-falsification battery on held-out data."""
    cfg = _load_config(config_path)
    model = io.load_model(model_path)
    columns = io.read_csv(data_path, model.graph)
    report = falsify(model, columns, n_permutations=_permutations(cfg),
                     seed=seed, kernel=_kernel(cfg), forest=_forest(cfg))
    click.echo("mmd_obs=%.4g rf_acc_obs=%.3f dhsic_p=%.3f"
               % (report.mmd_obs, report.rf_acc_obs, report.dhsic_pvalue),
               err=True)
    _write_or_echo(out, report.to_dict())


def _sample_impl(model_path, n, seed, do, standardized, out):
    model = io.load_model(model_path)
    if do:
        intervention = _parse_assignments(model.graph, do, standardized)
        batch = sample_interventional(model, intervention, n, seed=seed)
    else:
        batch = sample_observational(model, n, seed=seed)
    io.write_csv(out, model.graph, batch.columns)
    click.echo("wrote %d rows to %s" % (n, out))


_SAMPLE_OPTIONS = [
    click.option("--model", "model_path", type=click.Path(exists=True),
                 required=True),
    click.option("--n", type=click.IntRange(min=1), required=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--do", multiple=True, metavar="NODE=VALUE",
                 help="Clamp a node (repeatable)."),
    click.option("--standardized", is_flag=True,
                 help="Read continuous --do values as standardized units."),
    click.option("--out", type=click.Path(), required=True,
                 help="Destination CSV."),
]


def _with_options(options):
    def deco(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return deco


@cli.command()
@_with_options(_SAMPLE_OPTIONS)
def sample(model_path, n, seed, do, standardized, out):
    """Draw observational (or, with --do, interventional) rows."""
    _sample_impl(model_path, n, seed, do, standardized, out)


@cli.command()
@_with_options(_SAMPLE_OPTIONS)
def intervene(model_path, n, seed, do, standardized, out):
    """Draw rows under an intervention (requires at least one --do)."""
    if not do:
        raise click.UsageError("intervene requires at least one --do NODE=VALUE")
    _sample_impl(model_path, n, seed, do, standardized, out)


@cli.command(name="counterfactual")
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="CSV of factual rows.")
@click.option("--do", multiple=True, metavar="NODE=VALUE", required=True)
@click.option("--standardized", is_flag=True)
@click.option("--override", is_flag=True,
              help="Accept non-point-identified queries; discrete "
                   "descendants come back as probabilities plus a seeded "
                   "redraw.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True,
              help="Destination CSV of counterfactual rows.")
def counterfactual_cmd(model_path, data_path, do, standardized, override,
                       seed, out):
    """Answer 'what would these rows look like under do(...)'."""
    model = io.load_model(model_path)
    factual = io.read_csv(data_path, model.graph)
    intervention = _parse_assignments(model.graph, do, standardized)
    result = counterfactual(model, factual, intervention, override=override,
                            seed=seed)
    io.write_csv(out, model.graph, result.rows.columns)
    click.echo("wrote %s (point_valued=%s)" % (out, result.point_valued))
    if result.category_probs:
        probs_out = out + ".probs.json"
        io.write_json(probs_out, {node: probs.tolist()
                                  for node, probs in result.category_probs.items()})
        click.echo("wrote %s" % probs_out)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="Data the staged diagnostics run against.")
@click.option("--out-prefix", required=True,
              help="Staged artifacts land at PREFIX.<stage>.model.json / "
                   "PREFIX.<stage>.report.json.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON overrides (margins, prune_threshold, "
                                 "permutations).")
def simplify(model_path, data_path, out_prefix, seed, config_path):
    """Prune and symbolically substitute, gating each stage on diagnostics."""
    cfg = _load_config(config_path)
    model = io.load_model(model_path)
    columns = io.read_csv(data_path, model.graph)
    kwargs = {}
    if "prune_threshold" in cfg:
        kwargs["prune_threshold"] = float(cfg["prune_threshold"])
    if "margins" in cfg:
        rel, abs_ = cfg["margins"]
        kwargs["margins"] = (float(rel), float(abs_))
    result = simplify_pipeline(model, columns, seed=seed,
                               n_permutations=_permutations(cfg), **kwargs)
    summary = []
    for stage in result.stages:
        io.save_model(stage.model, "%s.%s.model.json" % (out_prefix, stage.name))
        io.write_json("%s.%s.report.json" % (out_prefix, stage.name),
                      stage.report.to_dict())
        summary.append({
            "stage": stage.name,
            "accepted": stage.accepted,
            "mmd_obs": stage.report.mmd_obs,
            "rf_acc_obs": stage.report.rf_acc_obs,
            "details": stage.details,
        })
        click.echo("stage %-9s %s  mmd_obs=%.3g rf_acc=%.3f"
                   % (stage.name,
                      "accepted" if stage.accepted else "rejected",
                      stage.report.mmd_obs, stage.report.rf_acc_obs))
    io.write_json("%s.summary.json" % out_prefix, {"stages": summary})
    click.echo("final stage: %s" % result.final.stage)


@cli.command(name="pdp")
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--node", required=True)
@click.option("--parent", required=True)
@click.option("--points", type=click.IntRange(min=2), default=41,
              show_default=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              default=None, help="Background rows (needed for deep nets).")
@click.option("--from", "from_value", type=float, default=None,
              help="With --to: also report the effect of moving the parent.")
@click.option("--to", "to_value", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
def pdp_cmd(model_path, node, parent, points, data_path, from_value,
            to_value, out):
    """Partial-dependence of one mechanism on one parent."""
    model = io.load_model(model_path)
    data = io.read_csv(data_path, model.graph) if data_path else None
    curve = pdp(model, node, parent, data=data, n_points=points)
    document = curve.to_dict()
    if (from_value is None) != (to_value is None):
        raise click.UsageError("--from and --to must be given together")
    if from_value is not None:
        document["ate"] = ate_from_pdp(curve, from_value, to_value)
        document["ate_from"] = from_value
        document["ate_to"] = to_value
    _write_or_echo(out, document)


@cli.command(name="prp")
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--node", required=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="CSV holding the row to decompose.")
@click.option("--row", "row_index", type=click.IntRange(min=0), default=0,
              show_default=True)
@click.option("--out", type=click.Path(), default=None)
def prp_cmd(model_path, node, data_path, row_index, out):
    """Per-parent contribution decomposition for one row."""
    model = io.load_model(model_path)
    columns = io.read_csv(data_path, model.graph)
    n = len(columns[model.graph.names[0]])
    if row_index >= n:
        raise ConfigError("row %d out of range for %d rows" % (row_index, n))
    row = {name: columns[name][row_index] for name in columns}
    decomposition = prp(model, node, row, row_id=row_index)
    _write_or_echo(out, decomposition.to_dict())


@cli.command(name="formula")
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--node", default=None,
              help="Single node (default: every symbolic mechanism).")
@click.option("--decimals", type=click.IntRange(min=1), default=3,
              show_default=True)
@click.option("--out", type=click.Path(), default=None)
def formula_cmd(model_path, node, decimals, out):
    """Render extracted symbolic mechanisms as text formulas."""
    model = io.load_model(model_path)
    if node is not None:
        nodes = [node]
        if node not in model.graph.names:
            raise ConfigError("unknown node %r" % (node,))
    else:
        nodes = [name for name in model.graph.names
                 if model.mechanism(name).symbolic is not None]
    lines = []
    for name in nodes:
        mech = model.mechanism(name)
        if mech.symbolic is None:
            raise ConfigError("node %r has no symbolic mechanism; run "
                              "simplify first" % (name,))
        lines.append("%s = %s" % (name, mech.symbolic.formula(decimals=decimals)))
    text = "\n".join(lines) + "\n"
    if out:
        io.atomic_write_text(out, text)
        click.echo("wrote %s" % out)
    else:
        click.echo(text, nl=False)


@cli.command(name="benchmark")
@click.option("--dataset", "datasets", multiple=True,
              type=click.Choice(dgp.DGP_IDS),
              help="Repeatable; default is every dataset.")
@click.option("--n", "n_values", multiple=True, type=click.IntRange(min=20),
              default=(1000,), show_default=True)
@click.option("--seeds", default="0:3", show_default=True,
              help="Comma list or half-open range a:b.")
@click.option("--variant", type=click.Choice(["kan", "kaam", "true"]),
              default="kan", show_default=True)
@click.option("--mixed", is_flag=True, help="Use the ternary-third-node "
                                            "variant of each dataset.")
@click.option("--rounded", is_flag=True,
              help="With --mixed data: treat the ternary column as "
                   "continuous (round-and-clip ablation).")
@click.option("--int-samples", type=click.IntRange(min=10), default=500,
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Destination JSON (cells + aggregate).")
def benchmark_cmd(datasets, n_values, seeds, variant, mixed, rounded,
                  int_samples, out):
    """Score a model family against the ground-truth simulators."""
    if rounded and not mixed:
        raise click.UsageError("--rounded requires --mixed")
    spec_ids = tuple(datasets) if datasets else dgp.DGP_IDS
    seed_list = _parse_seeds(seeds)
    if not seed_list:
        raise click.UsageError("empty seed list")
    if rounded:
        factory, label = bench.rounded_factory(), "rounded"
    elif variant == "kan":
        factory, label = bench.kacgm_factory(), "kan"
    elif variant == "kaam":
        factory, label = bench.kaam_factory(), "kaam"
    else:
        factory, label = bench.true_scm_factory(), "true"
    if mixed and not rounded:
        label += "+mixed"

    def progress(cell):
        click.echo("  %-18s n=%-5d seed=%-3d rf_obs=%.3f mmd_obs=%.4f"
                   % (cell.spec_id, cell.n, cell.seed, cell.rf_acc_obs,
                      cell.mmd_obs), err=True)

    results = bench.run_benchmark(
        factory, spec_ids=spec_ids, n_values=tuple(n_values),
        seeds=seed_list, mixed=mixed, variant=label,
        int_samples=int_samples, progress=progress)
    table = bench.aggregate(results)
    header = ("variant", "n", "cells", "rf_acc_obs", "mmd_obs",
              "rf_acc_int_mean", "mmd_int_mean", "mae_cf")
    click.echo(" ".join("%-16s" % h for h in header))
    for row in table:
        cells = []
        for key in header:
            value = row.get(key)
            if isinstance(value, float):
                cells.append("%-16.4f" % value)
            else:
                cells.append("%-16s" % (value if value is not None else "-"))
        click.echo(" ".join(cells))
    if out:
        io.write_json(out, {"cells": [c.to_dict() for c in results],
                            "aggregate": table})
        click.echo("wrote %s" % out)


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True),
              required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data", "data_path", type=click.Path(exists=True),
              default=None, help="Evaluation CSV backing /api/diagnostics "
                                 "and GET /api/prp.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON overrides (server.max_n, "
                                 "server.cors_origins, permutations).")
def serve(model_path, host, port, data_path, config_path):
    """Serve the model over HTTP for interactive exploration."""
    from .server import ServerConfig, run_server

    cfg = _load_config(config_path)
    server_cfg = dict(cfg.get("server", {}))
    config = ServerConfig(
        model_path=model_path,
        host=host,
        port=port,
        eval_data_path=data_path,
        n_permutations=_permutations(cfg, default=199),
        **server_cfg,
    )
    run_server(config)


# --- entry points --------------------------------------------------------------

def _emit_error(code, message, **extra):
    document = {"error": code, "message": str(message)}
    document.update(extra)
    sys.stderr.write(json.dumps(io._jsonify(document), sort_keys=True) + "\n")


def run_cli(argv=None):
    """Invoke the CLI programmatically; returns the exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        _emit_error("usage", exc.format_message())
        return 2
    except click.ClickException as exc:
        _emit_error("cli", exc.format_message())
        return 1
    except KacgmError as exc:
        extra = {}
        offenders = getattr(exc, "offenders", None)
        if offenders:
            extra["offenders"] = list(offenders)
        if getattr(exc, "row", None) is not None:
            extra["row"] = exc.row
            extra["column"] = exc.column
        _emit_error(exc.code, exc, **extra)
        return 1
    except OSError as exc:
        _emit_error("io", exc)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
