"""Causal generative modelling with spline-network structural equations.

A model here is a typed DAG plus one learned mechanism per node: continuous
nodes follow additive-noise equations whose functions are spline networks,
categorical nodes get softmax heads sampled by inverse-CDF.  On top of the
generative core sit falsification diagnostics (kernel independence and
two-sample tests), an interpretability pipeline (pruning, symbolic
substitution, partial-dependence and per-parent decompositions), synthetic
ground-truth benchmarks, a CLI, and an HTTP query server.
"""

from .errors import (ConfigError, CyclicGraphError, DegenerateDataError,
                     DivergenceError, GraphError, IdentifiabilityError,
                     InputDomainError, KacgmError, ModelFileError, ParseError,
                     ShapeError, SymbolicFitError,
                     UnsupportedDecompositionError)
from .graph import CausalGraph, NodeSpec
from .kernels import KernelConfig, dhsic, hsic, median_heuristic, mmd2, permutation_pvalue
from .forest import RandomForest, RfConfig, c2st_rf
from .scm import (EMPIRICAL, KDE, UNIFORM, HyperGrid, KacgmModel, Mechanism,
                  NoiseModel, Standardizer, train_model)
from .queries import (CfResult, Intervention, counterfactual,
                      counterfactual_identifiable, sample_interventional,
                      sample_observational)
from .diagnostics import TestReport, falsify
from .symbolic import SymbolicAtom, SymbolicMechanism, fit_symbolic_edge, parse_formula, render_formula
from .interpret import (PdpCurve, PrpDecomposition, SimplifyResult,
                        ate_from_pdp, pdp, prp, simplify_pipeline,
                        symbolic_substitute)
from .dgp import DGP_IDS, DgpSpec, SensitivityConfig, generate, sensitivity_generate
from .io import load_graph, load_model, read_csv, save_graph, save_model, write_csv

__version__ = "0.1.0"

__all__ = [
    "CausalGraph", "NodeSpec",
    "KernelConfig", "mmd2", "hsic", "dhsic", "median_heuristic",
    "permutation_pvalue",
    "RandomForest", "RfConfig", "c2st_rf",
    "HyperGrid", "KacgmModel", "Mechanism", "NoiseModel", "Standardizer",
    "train_model", "EMPIRICAL", "KDE", "UNIFORM",
    "Intervention", "CfResult", "counterfactual",
    "counterfactual_identifiable", "sample_observational",
    "sample_interventional",
    "TestReport", "falsify",
    "SymbolicAtom", "SymbolicMechanism", "fit_symbolic_edge",
    "render_formula", "parse_formula",
    "PdpCurve", "PrpDecomposition", "SimplifyResult", "pdp", "prp",
    "ate_from_pdp", "symbolic_substitute", "simplify_pipeline",
    "DGP_IDS", "DgpSpec", "SensitivityConfig", "generate",
    "sensitivity_generate",
    "read_csv", "write_csv", "load_graph", "save_graph", "load_model",
    "save_model",
    "KacgmError", "ShapeError", "InputDomainError", "ConfigError",
    "GraphError", "CyclicGraphError", "DegenerateDataError",
    "DivergenceError", "IdentifiabilityError",
    "UnsupportedDecompositionError", "ParseError", "ModelFileError",
    "SymbolicFitError",
    "__version__",
]
