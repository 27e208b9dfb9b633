"""Assumption falsification for trained models.

A fitted additive-noise model makes testable claims: extracted residuals
should be independent of their parents (per node, HSIC) and jointly
independent of each other (dHSIC), and generated samples should be
indistinguishable from held-out data (MMD + random-forest two-sample
accuracy).  ``falsify`` gathers all of it into one report so a bad model
class can be rejected from observational data alone.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import encode_matrix, n_rows, validate_columns
from .errors import ShapeError
from .forest import RfConfig, c2st_rf
from .kernels import KernelConfig, dhsic, hsic, mmd2, permutation_pvalue
from .queries import sample_interventional, sample_observational
from .rng import substream_seed

DEFAULT_PERMUTATIONS = 199


@dataclass
class NodeTest:
    node: str
    parents: tuple
    hsic_statistic: float
    hsic_pvalue: float

    def to_dict(self):
        return {
            "node": self.node,
            "parents": list(self.parents),
            "hsic_statistic": self.hsic_statistic,
            "hsic_pvalue": self.hsic_pvalue,
        }


@dataclass
class InterventionTest:
    label: str
    mmd: float
    rf_accuracy: float

    def to_dict(self):
        return {"label": self.label, "mmd": self.mmd, "rf_accuracy": self.rf_accuracy}


@dataclass
class TestReport:
    """Falsification summary: independence tests plus distribution match."""

    node_tests: list
    dhsic_statistic: float
    dhsic_pvalue: float
    mmd_obs: float
    rf_acc_obs: float
    interventions: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "node_tests": [t.to_dict() for t in self.node_tests],
            "dhsic_statistic": self.dhsic_statistic,
            "dhsic_pvalue": self.dhsic_pvalue,
            "mmd_obs": self.mmd_obs,
            "rf_acc_obs": self.rf_acc_obs,
            "interventions": [t.to_dict() for t in self.interventions],
            "notes": list(self.notes),
        }


def _encoded_std_matrix(model, columns, names=None):
    std = model.standardizer.apply(columns)
    return encode_matrix(model.graph, std, names or model.graph.names)


def c2st_batches(real, synthetic, config=None, seed=None):
    """Two-sample forest accuracy on SampleBatch inputs (one-hot encoded)."""
    if real.graph.names != synthetic.graph.names:
        raise ShapeError("sample batches disagree on schema")
    return c2st_rf(real.matrix(), synthetic.matrix(), config, seed=seed)


def falsify(model, held_out, interventions=None, n_permutations=DEFAULT_PERMUTATIONS,
            seed=0, kernel=None, forest=None):
    """Run the full assumption-falsification battery against held-out data.

    ``interventions`` optionally supplies reference interventional data as a
    list of ``(intervention, columns)`` pairs (e.g. drawn from a ground-truth
    simulator); each is compared against the model's own interventional
    samples.
    """
    columns = validate_columns(model.graph, held_out)
    n = n_rows(columns)
    kernel = kernel or KernelConfig()
    forest = forest or RfConfig()
    notes = []

    std = model.standardizer.apply(columns)
    residuals = {}
    for name in model.continuous_nodes():
        mech = model.mechanisms[name]
        residuals[name] = np.asarray(std[name], float) - mech.ghat(model.graph, std)

    node_tests = []
    for name in model.continuous_nodes():
        parents = model.graph.parents(name)
        if not parents:
            continue
        u = residuals[name][:, None]
        pa = encode_matrix(model.graph, std, parents)
        stat, pval = permutation_pvalue(
            lambda a, b: hsic(a, b, kernel, kernel), [u, pa],
            n_permutations=n_permutations,
            seed=substream_seed(seed, "hsic", name),
        )
        node_tests.append(NodeTest(node=name, parents=tuple(parents),
                                   hsic_statistic=stat, hsic_pvalue=pval))
    if not node_tests:
        notes.append("no non-root continuous nodes; per-node HSIC skipped")

    def _dhsic_stat(*parts):
        vs = parts if len(parts) > 1 else parts[0]
        return dhsic(list(vs), [kernel] * len(vs))

    residual_list = [residuals[name][:, None] for name in model.continuous_nodes()]
    if len(residual_list) >= 2:
        dhsic_stat, dhsic_p = permutation_pvalue(
            _dhsic_stat, residual_list,
            n_permutations=n_permutations,
            seed=substream_seed(seed, "dhsic"),
        )
    else:
        dhsic_stat, dhsic_p = 0.0, 1.0
        notes.append("fewer than two continuous nodes; joint dHSIC skipped")

    generated = sample_observational(model, n, seed=substream_seed(seed, "obs"))
    real_mat = _encoded_std_matrix(model, columns)
    gen_mat = _encoded_std_matrix(model, generated.columns)
    mmd_obs = mmd2(real_mat, gen_mat, kernel)
    rf_obs = c2st_rf(real_mat, gen_mat, forest, seed=substream_seed(seed, "c2st"))

    intervention_tests = []
    for i, (intervention, reference) in enumerate(interventions or ()):
        ref_cols = validate_columns(model.graph, reference)
        m = n_rows(ref_cols)
        sampled = sample_interventional(
            model, intervention, m, seed=substream_seed(seed, "int", i)
        )
        ref_mat = _encoded_std_matrix(model, ref_cols)
        got_mat = _encoded_std_matrix(model, sampled.columns)
        label = ", ".join(
            "do(%s=%g)" % (k, v) for k, v in intervention.assignments.items()
        )
        intervention_tests.append(InterventionTest(
            label=label,
            mmd=mmd2(ref_mat, got_mat, kernel),
            rf_accuracy=c2st_rf(ref_mat, got_mat, forest,
                                seed=substream_seed(seed, "int-c2st", i)),
        ))

    rejected = [t.node for t in node_tests if t.hsic_pvalue < 0.05]
    if rejected:
        notes.append(
            "residual independence rejected at 0.05 for: " + ", ".join(rejected)
        )
    else:
        notes.append("residual independence not rejected at 0.05 for any node")

    return TestReport(
        node_tests=node_tests,
        dhsic_statistic=dhsic_stat,
        dhsic_pvalue=dhsic_p,
        mmd_obs=mmd_obs,
        rf_acc_obs=rf_obs,
        interventions=intervention_tests,
        notes=notes,
    )
