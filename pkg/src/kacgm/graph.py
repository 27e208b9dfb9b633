"""Directed acyclic graphs over typed (continuous / categorical) nodes."""

from dataclasses import dataclass

from .errors import ConfigError, CyclicGraphError, GraphError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class NodeSpec:
    """One variable: a name, a kind, and (for categoricals) a level count."""

    name: str
    kind: str = CONTINUOUS
    levels: int = 0

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ConfigError("node name must be a non-empty string")
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ConfigError("unknown node kind %r" % (self.kind,))
        if self.kind == CATEGORICAL and int(self.levels) < 2:
            raise ConfigError(
                "categorical node %r needs at least two levels" % (self.name,)
            )
        if self.kind == CONTINUOUS and self.levels:
            raise ConfigError("continuous node %r must not declare levels" % (self.name,))


class CausalGraph:
    """Immutable DAG; node order is the declaration order.

    Parents and topological ties are always resolved in declaration order so
    every downstream artifact (mechanism input order, sampling order) is
    reproducible from the graph file alone.
    """

    def __init__(self, nodes, edges):
        self.nodes = tuple(
            n if isinstance(n, NodeSpec) else NodeSpec(**n) for n in nodes
        )
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise GraphError("duplicate node names")
        self._index = {n.name: i for i, n in enumerate(self.nodes)}
        canon = []
        seen = set()
        for parent, child in edges:
            if parent not in self._index or child not in self._index:
                raise GraphError("edge (%s, %s) references unknown node" % (parent, child))
            if parent == child:
                raise CyclicGraphError("self-loop on %s" % parent)
            if (parent, child) in seen:
                raise GraphError("duplicate edge (%s, %s)" % (parent, child))
            seen.add((parent, child))
            canon.append((parent, child))
        self.edges = tuple(canon)
        self._parents = {n.name: [] for n in self.nodes}
        self._children = {n.name: [] for n in self.nodes}
        for parent, child in self.edges:
            self._parents[child].append(parent)
            self._children[parent].append(child)
        order = {name: i for i, name in enumerate(names)}
        for table in (self._parents, self._children):
            for name in table:
                table[name] = tuple(sorted(table[name], key=order.__getitem__))
        self._topo = self._topological_order()

    @property
    def names(self):
        return tuple(n.name for n in self.nodes)

    def node(self, name):
        if name not in self._index:
            raise GraphError("unknown node %r" % (name,))
        return self.nodes[self._index[name]]

    def __contains__(self, name):
        return name in self._index

    def parents(self, name):
        return self._parents[name]

    def children(self, name):
        return self._children[name]

    def is_root(self, name):
        return not self._parents[name]

    def _topological_order(self):
        indeg = {n.name: len(self._parents[n.name]) for n in self.nodes}
        out = []
        remaining = [n.name for n in self.nodes]
        while remaining:
            pick = None
            for name in remaining:
                if indeg[name] == 0:
                    pick = name
                    break
            if pick is None:
                raise CyclicGraphError("graph contains a cycle: %s" % self._find_cycle())
            remaining.remove(pick)
            out.append(pick)
            for child in self._children[pick]:
                indeg[child] -= 1
        return tuple(out)

    def _find_cycle(self):
        color = {n.name: 0 for n in self.nodes}
        stack = []

        def visit(name):
            color[name] = 1
            stack.append(name)
            for child in self._children[name]:
                if color[child] == 1:
                    i = stack.index(child)
                    return stack[i:] + [child]
                if color[child] == 0:
                    found = visit(child)
                    if found:
                        return found
            stack.pop()
            color[name] = 2
            return None

        for n in self.nodes:
            if color[n.name] == 0:
                found = visit(n.name)
                if found:
                    return " -> ".join(found)
        return "<none>"

    def topological_order(self):
        """Parents-before-children order, ties broken by declaration order."""
        return self._topo

    def descendants(self, names):
        """All strict descendants of the given set of nodes."""
        if isinstance(names, str):
            names = [names]
        for name in names:
            if name not in self._index:
                raise GraphError("unknown node %r" % (name,))
        out = set()
        frontier = list(names)
        while frontier:
            current = frontier.pop()
            for child in self._children[current]:
                if child not in out:
                    out.add(child)
                    frontier.append(child)
        return out

    def to_dict(self):
        return {
            "nodes": [
                {"name": n.name, "kind": n.kind, **({"levels": n.levels} if n.kind == CATEGORICAL else {})}
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict):
            raise GraphError("graph payload must be an object")
        unknown = set(payload) - {"nodes", "edges"}
        if unknown:
            raise GraphError("unknown graph fields: %s" % ", ".join(sorted(unknown)))
        nodes = []
        for item in payload.get("nodes", []):
            extra = set(item) - {"name", "kind", "levels"}
            if extra:
                raise GraphError(
                    "unknown node fields on %r: %s"
                    % (item.get("name"), ", ".join(sorted(extra)))
                )
            nodes.append(NodeSpec(
                name=item["name"],
                kind=item.get("kind", CONTINUOUS),
                levels=int(item.get("levels", 0)),
            ))
        return cls(nodes=nodes, edges=[tuple(e) for e in payload.get("edges", [])])


def topological_order(graph):
    return graph.topological_order()
