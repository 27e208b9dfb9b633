import pytest

from kacgm.errors import ConfigError, CyclicGraphError, GraphError
from kacgm.graph import CausalGraph, NodeSpec


def chain():
    return CausalGraph(
        nodes=(NodeSpec("a", "continuous"), NodeSpec("b", "continuous"),
               NodeSpec("c", "categorical", levels=3)),
        edges=(("a", "b"), ("b", "c")),
    )


def test_basic_accessors():
    g = chain()
    assert g.names == ("a", "b", "c")
    assert g.parents("b") == ("a",)
    assert g.parents("a") == ()
    assert g.node("c").kind == "categorical" and g.node("c").levels == 3
    with pytest.raises(GraphError):
        g.node("zz")


def test_topological_order_and_descendants():
    g = CausalGraph(
        nodes=tuple(NodeSpec(n, "continuous") for n in "abcd"),
        edges=(("a", "c"), ("b", "c"), ("c", "d")),
    )
    order = g.topological_order()
    assert order.index("c") > order.index("a")
    assert order.index("c") > order.index("b")
    assert order.index("d") > order.index("c")
    assert g.descendants(["a"]) == {"c", "d"}
    assert g.descendants(["d"]) == set()
    assert g.descendants(["a", "b"]) == {"c", "d"}


def test_cycle_rejected():
    with pytest.raises(CyclicGraphError):
        CausalGraph(
            nodes=(NodeSpec("a", "continuous"), NodeSpec("b", "continuous")),
            edges=(("a", "b"), ("b", "a")),
        )


def test_validation_errors():
    with pytest.raises(GraphError):  # duplicate node
        CausalGraph(nodes=(NodeSpec("a", "continuous"),
                           NodeSpec("a", "continuous")), edges=())
    with pytest.raises(GraphError):  # edge endpoint missing
        CausalGraph(nodes=(NodeSpec("a", "continuous"),),
                    edges=(("a", "zz"),))
    with pytest.raises(GraphError):  # duplicate edge
        CausalGraph(nodes=(NodeSpec("a", "continuous"),
                           NodeSpec("b", "continuous")),
                    edges=(("a", "b"), ("a", "b")))
    with pytest.raises(CyclicGraphError):  # self-loop
        CausalGraph(nodes=(NodeSpec("a", "continuous"),),
                    edges=(("a", "a"),))
    with pytest.raises(ConfigError):  # categorical needs >= 2 levels
        NodeSpec("a", "categorical", levels=1)
    with pytest.raises(ConfigError):  # continuous must not declare levels
        NodeSpec("a", "continuous", levels=3)
    with pytest.raises(ConfigError):
        NodeSpec("a", "fuzzy")


def test_dict_round_trip_and_unknown_fields():
    g = chain()
    doc = g.to_dict()
    clone = CausalGraph.from_dict(doc)
    assert clone.to_dict() == doc
    assert clone.names == g.names
    with pytest.raises(GraphError):
        CausalGraph.from_dict({"nodes": doc["nodes"], "edges": doc["edges"],
                               "color": "red"})
    with pytest.raises(GraphError):
        bad = {"nodes": [dict(doc["nodes"][0], weight=2)],
               "edges": []}
        CausalGraph.from_dict(bad)
    with pytest.raises(GraphError):
        CausalGraph.from_dict(["not", "a", "dict"])
