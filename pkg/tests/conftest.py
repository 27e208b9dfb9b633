"""Shared fixtures: small trained models and a hand-built logistic model.

Trained-model fixtures are session-scoped because even a single-candidate
hyper grid costs a few seconds per graph; tests must not mutate them.
"""

import numpy as np
import pytest

from kacgm import dgp
from kacgm import symbolic as sb
from kacgm.graph import CausalGraph, NodeSpec
from kacgm.scm import (EMPIRICAL, UNIFORM, HyperGrid, KacgmModel, Mechanism,
                       NoiseModel, Standardizer, train_model)

#: single-candidate grid used wherever a test only needs *a* trained model
TINY_GRID = HyperGrid(hidden=(0,), grid_size=(5,), learning_rates=(0.3,),
                      l1=(0.001,), multiplicative=(False,), epochs=80,
                      batch_size=0)

# acceptance-criteria result lines, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_ischemia_model():
    """Hand-built logistic mechanism with published quadratic coefficients.

    The `ischemia` node's logit is
        0.055*age_s^2 + 0.173*age_s + 0.031*bmi_s^2 + 0.114*bmi_s
        + 0.046*sys_s^2 + 0.155*sys_s - 1.871 + 0.743*[diabetes=1]
    over standardized continuous inputs and a one-hot diabetes encoding.
    """
    graph = CausalGraph(
        nodes=(
            NodeSpec("age", "continuous"),
            NodeSpec("bmi", "continuous"),
            NodeSpec("systolic", "continuous"),
            NodeSpec("diabetes", "categorical", levels=2),
            NodeSpec("ischemia", "categorical", levels=2),
        ),
        edges=(("age", "ischemia"), ("bmi", "ischemia"),
               ("systolic", "ischemia"), ("diabetes", "ischemia")),
    )
    standardizer = Standardizer(
        {"age": (60.0, 10.0), "bmi": (27.5, 5.0), "systolic": (120.0, 20.0)}
    )

    def quad(c, lin):
        b = lin / (2.0 * c)
        return sb.SymbolicAtom("quadratic", 1.0, b, c, -c * b * b)

    layer = sb.SymbolicLayer(
        [[quad(0.055, 0.173)],
         [quad(0.031, 0.114)],
         [quad(0.046, 0.155)],
         [sb.SymbolicAtom("constant", 1.0, 0.0, 0.0, -1.871)],
         [sb.SymbolicAtom("linear", 1.0, 0.0, 0.743, 0.0)]],
        ["sum"],
    )
    mech = sb.SymbolicMechanism(
        ("age", "bmi", "systolic", "diabetes=0", "diabetes=1"),
        [layer], head="sigmoid",
    )
    mechanisms = {
        "age": Mechanism("age", "continuous", (), ()),
        "bmi": Mechanism("bmi", "continuous", (), ()),
        "systolic": Mechanism("systolic", "continuous", (), ()),
        "diabetes": Mechanism("diabetes", "categorical", (), (),
                              root_probs=np.array([0.7, 0.3]), levels=2),
        "ischemia": Mechanism(
            "ischemia", "categorical",
            ("age", "bmi", "systolic", "diabetes"),
            ("age", "bmi", "systolic", "diabetes=0", "diabetes=1"),
            symbolic=mech, levels=2),
    }
    noise = {name: NoiseModel(EMPIRICAL, samples=np.zeros(1))
             for name in ("age", "bmi", "systolic")}
    noise["diabetes"] = NoiseModel(UNIFORM)
    noise["ischemia"] = NoiseModel(UNIFORM)
    return KacgmModel(graph=graph, standardizer=standardizer,
                      mechanisms=mechanisms, noise=noise, stage="symbolic",
                      metadata={"noise_kind": EMPIRICAL})


@pytest.fixture
def ischemia_model():
    return make_ischemia_model()


@pytest.fixture(scope="session")
def chain3_trained():
    """(model, raw columns, truth handle) for continuous chain3_linear."""
    raw, handle = dgp.generate(dgp.DgpSpec("chain3_linear", n=400, seed=11))
    model = train_model(handle.graph, raw, TINY_GRID, seed=3)
    return model, raw, handle


@pytest.fixture(scope="session")
def mixed_trained():
    """(model, raw columns, truth handle) for chain4_linear with ternary x3."""
    raw, handle = dgp.generate(
        dgp.DgpSpec("chain4_linear", n=400, seed=9, mixed=True))
    model = train_model(handle.graph, raw, TINY_GRID, seed=2)
    return model, raw, handle
