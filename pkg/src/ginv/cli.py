"""Command-line experiment runner.

    ginv run --experiment purity --n 2 --b 0.5 --samples 100 --seed 7
    ginv report result.json --format csv

Each run writes one self-contained JSON result (schema 1). Results are
byte-identical across reruns of the same config except for the wall_time_s
field. Exit codes: 0 success, 2 config validation error, 3 runtime error.
"""

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, analysis, datasets, models, observables
from .analysis import (
    MidpointRule,
    ThresholdRule,
    classification_report_to_dict,
    classify,
    concentration_experiment,
    concentration_result_to_dict,
    empirical_moments,
    moment_report_to_dict,
)
from .groups import (
    LocalUnitarySampler,
    OrthogonalSampler,
    SymmetricSampler,
    UnitarySampler,
    commutant_analysis,
)
from .models import IdentityAnsatz, ModelSpec, evaluate, swap_test_model
from .tensor import bell_state, dm, random_statevector, zero_state
from .train import TrainConfig, graph_invariant_model, optimize


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration."""


def worker_count():
    """Worker cap from GINV_THREADS (default 1, i.e. sequential)."""
    raw = os.environ.get("GINV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


GRAPH_PRESETS = {
    "triangle": datasets.Graph(3, {(0, 1), (1, 2), (0, 2)}),
    "path3": datasets.Graph(3, {(0, 1), (1, 2)}),
    "cycle4": datasets.Graph(4, {(0, 1), (1, 2), (2, 3), (0, 3)}),
    "star4": datasets.Graph(4, {(0, 1), (0, 2), (0, 3)}),
}

# Per-experiment config schema: field -> (type, default). None means required.
SCHEMAS = {
    "purity": {"n": (int, 2), "b": (float, 0.5), "samples": (int, 100)},
    "time_reversal_states": {
        "n": (int, 2),
        "samples": (int, 200),
        "observable": (str, "odd_y"),  # odd_y | bell
        "eps": (float, None),
        "mc_samples": (int, 20000),
    },
    "time_reversal_dynamics": {
        "n": (int, 3),
        "samples": (int, 200),
        "eps": (float, 0.1),
        "mc_samples": (int, 20000),
    },
    "entanglement": {
        "n": (int, 3),
        "b": (float, 0.5),
        "measure": (str, "meyer_wallach"),
        "samples": (int, 100),
    },
    "graph": {
        "g0": (str, "triangle"),
        "g1": (str, "path3"),
        "t": (float, 1.0),
        "samples": (int, 100),
        "iterations": (int, 60),
        "learning_rate": (float, 0.5),
    },
    "commutant": {
        "group": (str, "unitary"),  # unitary | orthogonal | local_unitary | symmetric
        "n": (int, None),
        "d": (int, 4),  # ignored by local_unitary/symmetric, which need --n
        "k": (int, 2),
        "trials": (int, 20),
    },
    "concentration": {
        "family": (str, "conventional_odd_y"),
        "n_min": (int, 1),
        "n_max": (int, 5),
        "samples": (int, 20000),
    },
    "ancilla": {"n": (int, 1), "samples": (int, 50)},
}

COMMON_FIELDS = {"experiment", "seed", "shots", "output"}


def validate_config(raw):
    """Normalise a raw config dict against the experiment schema."""
    if "experiment" not in raw:
        raise ConfigError("missing required field 'experiment'")
    experiment = raw["experiment"]
    if experiment not in SCHEMAS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {sorted(SCHEMAS)}"
        )
    schema = SCHEMAS[experiment]
    unknown = set(raw) - COMMON_FIELDS - set(schema)
    if unknown:
        raise ConfigError(f"unknown config fields for {experiment}: {sorted(unknown)}")
    config = {
        "experiment": experiment,
        "seed": int(raw.get("seed", 0)),
        "shots": int(raw.get("shots", 0)),
    }
    if config["shots"] < 0:
        raise ConfigError("shots must be >= 0")
    for name, (typ, default) in schema.items():
        value = raw.get(name, default)
        if value is not None:
            try:
                value = typ(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"field {name}: {exc}") from exc
        config[name] = value
    return config


def _sampler_for(group, n, d, seed):
    if group == "unitary":
        if d is None:
            d = 2**n if n else None
        if d is None:
            raise ConfigError("unitary group needs --d or --n")
        return UnitarySampler(d, seed)
    if group == "orthogonal":
        if d is None:
            d = 2**n if n else None
        if d is None:
            raise ConfigError("orthogonal group needs --d or --n")
        return OrthogonalSampler(d, seed)
    if group == "local_unitary":
        if n is None:
            raise ConfigError("local_unitary group needs --n")
        return LocalUnitarySampler(n, seed)
    if group == "symmetric":
        if n is None:
            raise ConfigError("symmetric group needs --n")
        return SymmetricSampler(n, seed)
    raise ConfigError(f"unknown group {group!r}")


def _resolve_graph(name):
    if name in GRAPH_PRESETS:
        return GRAPH_PRESETS[name]
    try:
        return datasets.graph_from_dict(json.loads(name))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(
            f"graph {name!r} is neither a preset {sorted(GRAPH_PRESETS)} "
            f'nor inline JSON {{"n": ..., "edges": [[j, k], ...]}}'
        ) from exc


# ---------------------------------------------------------------------------
# Experiment runners. Each returns a JSON-serialisable payload.


def run_purity(config, rng):
    n = config["n"]
    data = datasets.purity_dataset(n, config["samples"], config["b"], rng)
    model = ModelSpec("H1", 2, IdentityAnsatz(4**n), observables.swap_operator(n))
    report = classify(data, model, MidpointRule(), shots=config["shots"], rng=rng)
    return {"classification": classification_report_to_dict(report)}


def run_time_reversal_states(config, rng):
    n = config["n"]
    d = 2**n
    data = datasets.time_reversal_state_dataset(n, config["samples"], rng)
    # default window: tight for exact evaluation, half the class value
    # when shot noise smears the estimates
    if config["observable"] == "bell":
        model = ModelSpec("H1", 2, IdentityAnsatz(d * d), observables.bell_projector(n))
        c = 1.0 / d
        eps = 1.0 / (2 * d) if config["shots"] > 0 else 1e-8
    elif config["observable"] == "odd_y":
        obs, _ = observables.pauli_string("Y" + "I" * (n - 1))
        model = ModelSpec("H1", 1, IdentityAnsatz(d), obs)
        c = 0.0
        eps = 1.0 / (2 * d) if config["shots"] > 0 else 1e-8
    else:
        raise ConfigError(f"observable must be odd_y or bell, got {config['observable']!r}")
    if config["eps"] is not None:
        eps = config["eps"]
    report = classify(data, model, ThresholdRule(c, eps), shots=config["shots"], rng=rng)
    moments = empirical_moments(
        model,
        UnitarySampler(d, config["seed"] + 1),
        dm(zero_state(n)),
        config["mc_samples"],
        max_workers=worker_count(),
    )
    return {
        "classification": classification_report_to_dict(report),
        "moments": moment_report_to_dict(moments),
        "threshold": {"c": c, "eps": eps},
    }


def run_time_reversal_dynamics(config, rng):
    n = config["n"]
    d = 2**n
    data = datasets.time_reversal_dynamics_dataset(n, config["samples"], rng)
    model = ModelSpec(
        "H2",
        2,
        IdentityAnsatz(d * d),
        observables.bell_projector(n),
        psi_in=bell_state(n),
    )
    report = classify(
        data, model, ThresholdRule(1.0, config["eps"]), shots=config["shots"], rng=rng
    )
    moments = empirical_moments(
        model,
        UnitarySampler(d, config["seed"] + 1),
        None,
        config["mc_samples"],
        max_workers=worker_count(),
    )
    return {
        "classification": classification_report_to_dict(report),
        "moments": moment_report_to_dict(moments),
    }


def run_entanglement(config, rng):
    n = config["n"]
    measure = config["measure"]
    data = datasets.entanglement_dataset(n, config["samples"], config["b"], measure, rng)
    obs = observables.entanglement_observable(measure, n)
    model = ModelSpec("H1", 2, IdentityAnsatz(4**n), obs)
    report = classify(data, model, MidpointRule(), shots=config["shots"], rng=rng)
    oracle = observables.ENTANGLEMENT_MEASURES[measure]
    max_oracle_dev = max(
        abs(evaluate(model, item.state) - oracle(item.state)) for item in data
    )
    return {
        "classification": classification_report_to_dict(report),
        "max_oracle_deviation": max_oracle_dev,
    }


def run_graph(config, rng):
    g0 = _resolve_graph(config["g0"])
    g1 = _resolve_graph(config["g1"])
    t = config["t"]
    if g0.n != g1.n:
        raise ConfigError("reference graphs must have the same node count")
    n = g0.n
    # One representative per class suffices: the trained model is exactly
    # permutation-invariant, so its value is constant on each class.
    reps = [
        datasets.LabeledState(datasets.graph_state(g0, t), 0),
        datasets.LabeledState(datasets.graph_state(g1, t), 1),
    ]
    trainable = graph_invariant_model(n)
    train_config = TrainConfig(
        learning_rate=config["learning_rate"],
        iterations=config["iterations"],
        seed=config["seed"],
        loss="mse_labels",
    )
    result = optimize(trainable, reps, train_config)
    h0 = trainable.value_fn(result.theta, reps[0].state)
    h1 = trainable.value_fn(result.theta, reps[1].state)
    test = datasets.graph_dataset(g0, g1, config["samples"], t, rng)
    midpoint = (h0 + h1) / 2
    correct = 0
    for item in test:
        value = trainable.value_fn(result.theta, item.state)
        pred = int(value > midpoint) if h1 >= h0 else int(value <= midpoint)
        correct += pred == item.label
    return {
        "final_loss": result.loss_trace[-1],
        "loss_trace": result.loss_trace,
        "theta": [float(x) for x in result.theta],
        "class_values": {"0": h0, "1": h1},
        "gap": abs(h1 - h0),
        "test_accuracy": correct / len(test),
    }


def run_commutant(config, rng):
    sampler = _sampler_for(config["group"], config["n"], config["d"], config["seed"])
    report = commutant_analysis(sampler, config["k"], n_samples=config["trials"])
    return {
        "dimension": report.dimension,
        "gap_ratio": None if np.isinf(report.gap_ratio) else report.gap_ratio,
        "cutoff": report.cutoff,
        "ambiguous": report.ambiguous,
        "singular_values_head": [float(s) for s in report.singular_values[:8]],
    }


def run_concentration(config, rng):
    result = concentration_experiment(
        config["family"],
        range(config["n_min"], config["n_max"] + 1),
        config["samples"],
        seed=config["seed"],
        max_workers=worker_count(),
    )
    return {"concentration": concentration_result_to_dict(result)}


def run_ancilla(config, rng):
    n = config["n"]
    u = models.swap_test_unitary(n)
    z_anc = models.ancilla_observable(observables.PAULI["Z"], n).matrix
    z_swap = np.kron(
        observables.PAULI["Z"], observables.swap_operator(n).matrix
    )
    conj_dev = float(np.abs(u.conj().T @ z_anc @ u - z_swap).max())
    model = swap_test_model(n)
    purity_dev = 0.0
    for _ in range(config["samples"]):
        psi = random_statevector(2**n, rng)
        rho = dm(psi)
        purity_dev = max(purity_dev, abs(evaluate(model, rho) - 1.0))
    return {"conjugation_deviation": conj_dev, "max_purity_deviation": purity_dev}


RUNNERS = {
    "purity": run_purity,
    "time_reversal_states": run_time_reversal_states,
    "time_reversal_dynamics": run_time_reversal_dynamics,
    "entanglement": run_entanglement,
    "graph": run_graph,
    "commutant": run_commutant,
    "concentration": run_concentration,
    "ancilla": run_ancilla,
}


def run(config):
    """Execute one experiment config; returns the full result dict."""
    config = validate_config(dict(config))
    rng = np.random.default_rng(config["seed"])
    start = time.perf_counter()
    payload = RUNNERS[config["experiment"]](config, rng)
    elapsed = time.perf_counter() - start
    result = {
        "schema": 1,
        "version": __version__,
        "config": {k: v for k, v in config.items() if k != "output"},
    }
    result.update(payload)
    result["wall_time_s"] = elapsed
    return result


def write_result(result, path):
    """Atomic JSON write; a failed run never leaves a partial file."""
    text = json.dumps(result, sort_keys=True, indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Reporting


def _md_table(headers, rows):
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def format_report(result, fmt):
    if "concentration" in result:
        rows = [
            (r["n"], r["empirical_var"], r["analytic_var"])
            for r in result["concentration"]["rows"]
        ]
        if fmt == "csv":
            lines = ["n,empirical_var,analytic_var"]
            lines += [
                f"{n},{ev!r},{'' if av is None else repr(av)}" for n, ev, av in rows
            ]
            return "\n".join(lines) + "\n"
        body = _md_table(["n", "empirical_var", "analytic_var"], rows)
        return body + f"\nlog2 slope: {result['concentration']['slope']!r}\n"
    if "classification" in result:
        rep = result["classification"]
        con = rep["confusion"]
        if fmt == "csv":
            lines = ["metric,value"]
            lines += [f"accuracy,{rep['accuracy']!r}"]
            lines += [f"mean_label_{k},{v!r}" for k, v in sorted(rep["class_means"].items())]
            lines += [f"{k},{v}" for k, v in sorted(con.items())]
            return "\n".join(lines) + "\n"
        table = _md_table(
            ["", "pred 1", "pred 0"],
            [
                ("true 1", con["tp"], con["fn"]),
                ("true 0", con["fp"], con["tn"]),
            ],
        )
        return table + f"\naccuracy: {rep['accuracy']!r}\n"
    if "moments" in result or "dimension" in result or "conjugation_deviation" in result:
        flat = {
            k: v
            for k, v in result.items()
            if k not in ("schema", "version", "config", "wall_time_s")
        }
        rows = sorted(_flatten(flat).items())
        if fmt == "csv":
            return "key,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"
        return _md_table(["key", "value"], rows)
    raise ConfigError("result file contains no reportable payload")


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = ";".join(str(x) for x in v)
        else:
            out[key] = v
    return out


# ---------------------------------------------------------------------------
# Entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="ginv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one experiment")
    runp.add_argument("--config", help="JSON config file (flags override it)")
    runp.add_argument("--experiment", choices=sorted(SCHEMAS))
    runp.add_argument("--n", type=int)
    runp.add_argument("--d", type=int)
    runp.add_argument("--k", type=int)
    runp.add_argument("--b", type=float)
    runp.add_argument("--t", type=float)
    runp.add_argument("--eps", type=float)
    runp.add_argument("--samples", type=int)
    runp.add_argument("--mc-samples", dest="mc_samples", type=int)
    runp.add_argument("--shots", type=int)
    runp.add_argument("--seed", type=int)
    runp.add_argument("--measure")
    runp.add_argument("--observable")
    runp.add_argument("--group")
    runp.add_argument("--family")
    runp.add_argument("--n-min", dest="n_min", type=int)
    runp.add_argument("--n-max", dest="n_max", type=int)
    runp.add_argument("--g0")
    runp.add_argument("--g1")
    runp.add_argument("--trials", type=int)
    runp.add_argument("--iterations", type=int)
    runp.add_argument("--learning-rate", dest="learning_rate", type=float)
    runp.add_argument("--output", "-o", help="result path (default result.json)")

    repp = sub.add_parser("report", help="format a result file")
    repp.add_argument("result", help="result JSON produced by 'ginv run'")
    repp.add_argument("--format", choices=("csv", "md"), default="csv")
    repp.add_argument("--output", "-o", help="write here instead of stdout")
    return parser


def _cmd_run(args):
    raw = {}
    if args.config:
        with open(args.config) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        raw.update(loaded)
    for key in (
        "experiment n d k b t eps samples mc_samples shots seed measure observable "
        "group family n_min n_max g0 g1 trials iterations learning_rate"
    ).split():
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    output = args.output or raw.pop("output", None) or "result.json"
    raw.pop("output", None)
    result = run(raw)
    write_result(result, output)
    print(f"wrote {output}")
    return 0


def _cmd_report(args):
    with open(args.result) as fh:
        try:
            result = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"result file is not valid JSON: {exc}") from exc
    text = format_report(result, args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_report(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
