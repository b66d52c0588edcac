"""Haar-moment formulas, concentration experiments, and classification.

Closed forms implemented here:

  mean over Haar conjugations of a single-copy model:   Tr[O] / d
  variance for a traceless O on Haar-scrambled input:
      Tr[O^2] (Tr[rho_in^2] / (d^2-1) - 1 / (d (d^2-1)))
  mean of the Bell-projector model over Haar inputs:    2 / (d (d+1))

Every formula has a Monte-Carlo companion (empirical_moments); the
statistical acceptance window is four standard errors throughout.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .datasets import LabeledUnitary
from .groups import UnitarySampler, permutation_operator
from .models import (
    IdentityAnsatz,
    ModelSpec,
    conjugated_observable,
    estimate_with_shots,
    evaluate,
)
from .observables import bell_projector
from .tensor import dm, expectation_copies, purity, zero_state


@dataclass
class MomentReport:
    analytic_mean: float | None
    analytic_var: float | None
    empirical_mean: float
    empirical_var: float
    stderr: float
    samples: int


@dataclass
class ClassificationReport:
    rule: dict
    class_means: dict
    confusion: dict  # keys tp, fp, tn, fn (label 1 is positive)
    accuracy: float
    p_c_given_0: float | None = None
    misclassification_bound: float | None = None
    cantelli: float | None = None
    values: list = field(default_factory=list, repr=False)
    labels: list = field(default_factory=list, repr=False)


def haar_mean_conventional(obs, d):
    """Mean of Tr[V rho V^dag O] over Haar V: Tr[O]/d, independent of rho."""
    return float(np.real(np.trace(obs.matrix))) / d


def haar_var_time_reversal(obs, rho_in, d):
    """Variance of a traceless single-copy model over Haar-scrambled rho_in."""
    tr_o = np.real(np.trace(obs.matrix))
    if abs(tr_o) > 1e-10:
        raise ValueError(f"observable must be traceless, Tr[O] = {tr_o}")
    tr_o2 = float(np.real(np.trace(obs.matrix @ obs.matrix)))
    p_in = purity(rho_in)
    return tr_o2 * (p_in / (d**2 - 1) - 1.0 / (d * (d**2 - 1)))


def haar_mean_enhanced_bell(d):
    """Mean of the Bell-projector model over Haar-scrambled pure inputs."""
    return 2.0 / (d * (d + 1))


def misclassification_probability(p_c_given_0):
    """P(0|c) = P(c|0) / (1 + P(c|0)) for balanced classes."""
    if not 0.0 <= p_c_given_0 <= 1.0:
        raise ValueError("probability outside [0, 1]")
    return p_c_given_0 / (1.0 + p_c_given_0)


def cantelli_bound(variance, delta):
    """One-sided tail bound Var / (Var + delta^2)."""
    if variance < 0 or delta <= 0:
        raise ValueError("need variance >= 0 and delta > 0")
    return variance / (variance + delta**2)


def _is_bell_projector(model):
    obs = conjugated_observable(model).matrix
    ref = bell_projector(model.n).matrix
    return obs.shape == ref.shape and np.abs(obs - ref).max() < 1e-9


def _registered_moments(model, sampler, template):
    """Closed-form moments for recognised (model, sampler) pairs, else Nones."""
    mean = var = None
    d = sampler.dim
    if model.hclass == "H1" and model.copies == 1 and sampler.kind in (
        "unitary",
        "local_unitary",
    ):
        mean = haar_mean_conventional(model.observable, d)
        obs = conjugated_observable(model)
        if (
            sampler.kind == "unitary"
            and template is not None
            and abs(np.real(np.trace(obs.matrix))) < 1e-10
        ):
            var = haar_var_time_reversal(obs, template, d)
    elif sampler.kind == "unitary" and _is_bell_projector(model):
        # twirling the Bell projector over W x W gives (1 + SWAP)/(d(d+1)),
        # so the closed-form mean needs a symmetric-subspace input: a
        # swap-symmetric psi_in for H2, or any pure template for H1 (psi x
        # psi is automatically symmetric)
        if model.hclass == "H2":
            swap = permutation_operator(
                (1, 0), target="copies", qubits_per_copy=model.n
            ).matrix
            sym = np.real(model.psi_in.conj() @ swap @ model.psi_in)
            if abs(sym - 1.0) < 1e-9:
                mean = haar_mean_enhanced_bell(d)
        elif (
            model.hclass == "H1"
            and model.copies == 2
            and template is not None
            and abs(purity(template) - 1.0) < 1e-9
        ):
            mean = haar_mean_enhanced_bell(d)
    return mean, var


def empirical_moments(model, sampler, input_template, samples, max_workers=1):
    """Monte-Carlo mean/variance of the model over group-scrambled inputs.

    For H1/H3 models each draw conjugates ``input_template`` by a sampled
    element; for H2 models the sampled element itself is the input.
    Analytic fields are filled when a closed form is registered for the
    (model, sampler) combination.

    Group elements are always drawn sequentially from the sampler, so the
    result is identical for any ``max_workers``; workers only share the
    pure evaluation step.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    obs = conjugated_observable(model)

    def value_of(v):
        if model.hclass == "H2":
            return evaluate(model, v)
        x = v @ input_template @ v.conj().T
        if model.hclass == "H1":
            return expectation_copies(x, model.copies, obs.matrix)
        return evaluate(model, x)

    values = np.empty(samples)
    chunk = 512
    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for start in range(0, samples, chunk):
                stop = min(start + chunk, samples)
                elements = [sampler.sample() for _ in range(stop - start)]
                values[start:stop] = list(pool.map(value_of, elements))
    else:
        for i in range(samples):
            values[i] = value_of(sampler.sample())
    mean, var = _registered_moments(model, sampler, input_template)
    std = float(values.std(ddof=1))
    return MomentReport(
        analytic_mean=mean,
        analytic_var=var,
        empirical_mean=float(values.mean()),
        empirical_var=float(values.var(ddof=1)),
        stderr=std / np.sqrt(samples),
        samples=samples,
    )


@dataclass
class ThresholdRule:
    """Assign label 1 when the value lands in [c - eps, c + eps]."""

    c: float
    eps: float


@dataclass
class MidpointRule:
    """Threshold halfway between the two class means."""


@dataclass
class NearestClassMeanRule:
    """Assign the label whose class mean is closest."""


def _rule_dict(rule):
    d = {"kind": type(rule).__name__.removesuffix("Rule").lower()}
    d.update(asdict(rule))
    return d


def classify(dataset, model, rule, shots=0, rng=None):
    """Run the model over a labeled dataset and score a decision rule.

    With shots = 0 the exact expectation is used; otherwise each value is
    a finite-shot estimate drawn from ``rng``.
    """
    values = []
    labels = []
    for item in dataset:
        x = item.unitary if isinstance(item, LabeledUnitary) else item.state
        if shots > 0:
            values.append(estimate_with_shots(model, x, shots, rng).estimate)
        else:
            values.append(evaluate(model, x))
        labels.append(item.label)
    values = np.array(values)
    labels = np.array(labels)
    m0 = float(values[labels == 0].mean()) if (labels == 0).any() else 0.0
    m1 = float(values[labels == 1].mean()) if (labels == 1).any() else 0.0

    if isinstance(rule, ThresholdRule):
        pred = (np.abs(values - rule.c) <= rule.eps).astype(int)
    elif isinstance(rule, MidpointRule):
        thr = (m0 + m1) / 2
        pred = (values > thr).astype(int) if m1 >= m0 else (values <= thr).astype(int)
    elif isinstance(rule, NearestClassMeanRule):
        pred = (np.abs(values - m1) <= np.abs(values - m0)).astype(int)
    else:
        raise ValueError(f"unknown rule {rule!r}")

    tp = int(((pred == 1) & (labels == 1)).sum())
    tn = int(((pred == 0) & (labels == 0)).sum())
    fp = int(((pred == 1) & (labels == 0)).sum())
    fn = int(((pred == 0) & (labels == 1)).sum())
    accuracy = (tp + tn) / len(labels)

    p_c0 = bound = cant = None
    if (labels == 0).any():
        p_c0 = float((pred[labels == 0] == 1).mean())
        bound = misclassification_probability(p_c0)
        if isinstance(rule, ThresholdRule):
            var0 = float(values[labels == 0].var(ddof=1)) if tn + fp > 1 else 0.0
            delta = abs(m0 - rule.c)
            if delta > 0:
                cant = cantelli_bound(var0, delta)
    return ClassificationReport(
        rule=_rule_dict(rule),
        class_means={"0": m0, "1": m1},
        confusion={"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        accuracy=accuracy,
        p_c_given_0=p_c0,
        misclassification_bound=bound,
        cantelli=cant,
        values=[float(v) for v in values],
        labels=[int(x) for x in labels],
    )


# ---------------------------------------------------------------------------
# Concentration experiments


@dataclass
class ConcentrationRow:
    n: int
    empirical_var: float
    analytic_var: float | None


@dataclass
class ConcentrationResult:
    family: str
    rows: list
    slope: float
    samples: int


def _conventional_family(n, seed, label_class):
    from .observables import pauli_string

    obs, _ = pauli_string("Y" + "I" * (n - 1))
    model = ModelSpec("H1", 1, IdentityAnsatz(2**n), obs)
    sampler = _class_sampler(n, seed, label_class)
    template = dm(zero_state(n))
    analytic = (
        haar_var_time_reversal(obs, template, 2**n) if label_class == 0 else 0.0
    )
    return model, sampler, template, analytic


def _enhanced_family(n, seed, label_class):
    model = ModelSpec("H1", 2, IdentityAnsatz(4**n), bell_projector(n))
    sampler = _class_sampler(n, seed, label_class)
    template = dm(zero_state(n))
    return model, sampler, template, None if label_class == 0 else 0.0


def _class_sampler(n, seed, label_class):
    from .groups import OrthogonalSampler

    if label_class == 0:
        return UnitarySampler(2**n, seed)
    return OrthogonalSampler(2**n, seed)


CONCENTRATION_FAMILIES = {
    "conventional_odd_y": _conventional_family,
    "enhanced_bell": _enhanced_family,
}


def concentration_experiment(
    family, n_range, samples, seed=0, label_class=0, max_workers=1
):
    """Per-n model variance over group-scrambled inputs, with log2 slope.

    ``family`` is a name from CONCENTRATION_FAMILIES or a callable
    (n, seed, label_class) -> (model, sampler, template, analytic_var).
    """
    builder = CONCENTRATION_FAMILIES.get(family, family)
    if isinstance(builder, str):
        raise ValueError(f"unknown concentration family {family!r}")
    rows = []
    for n in n_range:
        model, sampler, template, analytic = builder(n, seed + n, label_class)
        report = empirical_moments(
            model, sampler, template, samples, max_workers=max_workers
        )
        rows.append(ConcentrationRow(n, report.empirical_var, analytic))
    ns = np.array([r.n for r in rows], dtype=float)
    evs = np.array([max(r.empirical_var, 1e-300) for r in rows])
    slope = float(np.polyfit(ns, np.log2(evs), 1)[0]) if len(rows) > 1 else 0.0
    name = family if isinstance(family, str) else getattr(family, "__name__", "custom")
    return ConcentrationResult(family=name, rows=rows, slope=slope, samples=samples)


# ---------------------------------------------------------------------------
# Report serialization


def moment_report_to_dict(report):
    return asdict(report)


def classification_report_to_dict(report):
    return asdict(report)


def concentration_result_to_dict(result):
    return {
        "family": result.family,
        "samples": result.samples,
        "slope": result.slope,
        "rows": [asdict(r) for r in result.rows],
    }


def report_to_json(report, path=None):
    if isinstance(report, MomentReport):
        payload = moment_report_to_dict(report)
    elif isinstance(report, ClassificationReport):
        payload = classification_report_to_dict(report)
    elif isinstance(report, ConcentrationResult):
        payload = concentration_result_to_dict(report)
    else:
        raise ValueError(f"unserializable report {type(report).__name__}")
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def concentration_to_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n", "empirical_var", "analytic_var"])
    for row in result.rows:
        writer.writerow(
            [row.n, repr(row.empirical_var), "" if row.analytic_var is None else repr(row.analytic_var)]
        )
    return buf.getvalue()


def classification_to_csv(report):
    """One row per classified item: index, model value, true label."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["index", "value", "label"])
    for i, (value, label) in enumerate(zip(report.values, report.labels)):
        writer.writerow([i, repr(value), label])
    return buf.getvalue()
