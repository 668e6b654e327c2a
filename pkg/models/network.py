"""
Network data model: the JSON document schema, the validated Network and its
unit-capacity expansion
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator

from models.errors import CycleError, NetworkSchemaError, UnknownNodeError


class EdgeSpec(BaseModel):
    """One directed edge of the document; capacity counts unit channels"""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    tail: str = Field(alias="from", min_length=1)
    head: str = Field(alias="to", min_length=1)
    capacity: PositiveInt = 1

    @field_validator("capacity", mode="before")
    @classmethod
    def _integral(cls, value):
        # integers only; 2.0 is rejected too
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("capacity must be a positive integer")
        return value


class Network(BaseModel):
    """
    Directed acyclic multigraph with ordered sources and targets

    Order in `sources` fixes the index i of a_i, order in `targets` the index j
    of t_j. Instances are immutable once validated.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    name: str = "network"
    nodes: Tuple[str, ...]
    edges: Tuple[EdgeSpec, ...] = ()
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]

    def model_post_init(self, __context) -> None:
        duplicates = [n for n, c in Counter(self.nodes).items() if c > 1]
        if duplicates:
            raise NetworkSchemaError(f"duplicate node ids: {duplicates}")
        if not self.sources:
            raise NetworkSchemaError("sources must be nonempty")
        if not self.targets:
            raise NetworkSchemaError("targets must be nonempty")
        if len(set(self.sources)) != len(self.sources) or len(set(self.targets)) != len(self.targets):
            raise NetworkSchemaError("sources and targets must not repeat")
        known = set(self.nodes)
        for edge in self.edges:
            for endpoint in (edge.tail, edge.head):
                if endpoint not in known:
                    raise UnknownNodeError(f"edge {edge.tail}->{edge.head} references unknown node {endpoint!r}")
            if edge.tail == edge.head:
                raise CycleError(f"self-loop at {edge.tail}")
        for role, names in (("source", self.sources), ("target", self.targets)):
            for name in names:
                if name not in known:
                    raise UnknownNodeError(f"{role} {name!r} is not a declared node")
        graph = self.graph()
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            raise CycleError(f"network has a cycle: {[edge[:2] for edge in cycle]}")

    def graph(self) -> nx.MultiDiGraph:
        """networkx view with one edge per document edge, capacity attribute attached"""
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.nodes)
        for edge in self.edges:
            graph.add_edge(edge.tail, edge.head, capacity=edge.capacity)
        return graph

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "nodes": list(self.nodes),
            "edges": [{"from": e.tail, "to": e.head, "capacity": e.capacity} for e in self.edges],
            "sources": list(self.sources),
            "targets": list(self.targets),
        }

    def without_edge(self, tail: str, head: str) -> "Network":
        """Copy with the first tail->head edge removed"""
        edges = list(self.edges)
        for i, edge in enumerate(edges):
            if edge.tail == tail and edge.head == head:
                del edges[i]
                break
        else:
            raise UnknownNodeError(f"no edge {tail}->{head}")
        return self.model_copy(update={"edges": tuple(edges)}).revalidate()

    def with_edge(self, tail: str, head: str, capacity: int = 1) -> "Network":
        edge = EdgeSpec(tail=tail, head=head, capacity=capacity)
        return self.model_copy(update={"edges": self.edges + (edge,)}).revalidate()

    def revalidate(self) -> "Network":
        return Network.model_validate(self.model_dump(by_alias=True))


@dataclass(frozen=True)
class UnitEdge:
    """A capacity-one channel; `index` numbers parallel channels between the same pair"""

    tail: str
    head: str
    index: int
    origin: int

    @property
    def key(self) -> str:
        return f"{self.tail}->{self.head}#{self.index}"


@dataclass
class UnitNetwork:
    """Unit-capacity multigraph produced from a Network by capacity expansion"""

    name: str
    nodes: Tuple[str, ...]
    edges: Tuple[UnitEdge, ...]
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    provenance: Dict[str, int] = field(default_factory=dict)

    def incoming(self, node: str) -> List[UnitEdge]:
        """Incoming unit edges ordered by (peer id, parallel index)"""
        return sorted((e for e in self.edges if e.head == node), key=lambda e: (e.tail, e.index))

    def outgoing(self, node: str) -> List[UnitEdge]:
        """Outgoing unit edges ordered by (peer id, parallel index)"""
        return sorted((e for e in self.edges if e.tail == node), key=lambda e: (e.head, e.index))
