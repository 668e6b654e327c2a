"""
Graph service: network parsing, capacity expansion and multicast feasibility
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import networkx as nx
from networkx.algorithms.flow import edmonds_karp
from pydantic import ValidationError

from models.errors import NetworkSchemaError
from models.network import Network, UnitEdge, UnitNetwork

logger = logging.getLogger(__name__)

SUPER_SOURCE = "__sigma__"


@dataclass
class FeasibilityResult:
    """Outcome of the multicast max-flow check"""

    feasible: bool
    required: int
    flows: Dict[str, int] = field(default_factory=dict)
    target: Optional[str] = None
    flow: Optional[int] = None

    def describe(self) -> str:
        per_target = ", ".join(f"{flow} to {t}" for t, flow in self.flows.items())
        if self.feasible:
            return f"feasible: max-flow {per_target}"
        return f"infeasible: max-flow {self.flow} to {self.target} (need {self.required}); {per_target}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feasible": self.feasible,
            "required": self.required,
            "flows": dict(self.flows),
            "target": self.target,
            "flow": self.flow,
        }


def parse_network(document: Union[str, bytes, Mapping[str, Any]]) -> Network:
    """
    Parse and validate a network document

    Args:
        document: JSON text or an already decoded mapping

    Returns:
        Validated Network

    Raises:
        NetworkSchemaError, UnknownNodeError, CycleError
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise NetworkSchemaError(f"network document is not valid JSON: {e}") from e
    if not isinstance(document, Mapping):
        raise NetworkSchemaError("network document must be a JSON object")
    try:
        network = Network.model_validate(dict(document))
    except ValidationError as e:
        raise NetworkSchemaError(f"network document violates the schema: {e}") from e
    logger.debug(f"Parsed network {network.name}: {len(network.nodes)} nodes, {len(network.edges)} edges")
    return network


def load_network(path: Union[str, Path]) -> Network:
    """Read a network document from disk; the file stem names the network if unnamed"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise NetworkSchemaError(f"cannot read {path}: {e}") from e
    if isinstance(document := _decode(text), dict) and "name" not in document:
        document["name"] = path.stem
    return parse_network(document)


def _decode(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkSchemaError(f"{e}") from e


def expand_capacities(net: Network) -> UnitNetwork:
    """Replace every capacity-c edge by c parallel unit edges, remembering provenance"""
    counters: Dict[tuple, int] = {}
    edges: List[UnitEdge] = []
    provenance: Dict[str, int] = {}
    for origin, spec in enumerate(net.edges):
        for _ in range(spec.capacity):
            index = counters.get((spec.tail, spec.head), 0)
            counters[(spec.tail, spec.head)] = index + 1
            unit = UnitEdge(spec.tail, spec.head, index, origin)
            edges.append(unit)
            provenance[unit.key] = origin
    return UnitNetwork(
        name=net.name,
        nodes=tuple(net.nodes),
        edges=tuple(edges),
        sources=tuple(net.sources),
        targets=tuple(net.targets),
        provenance=provenance,
    )


def _as_unit(net) -> UnitNetwork:
    return net if isinstance(net, UnitNetwork) else expand_capacities(net)


def _flow_graph(net: UnitNetwork) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(net.nodes)
    for edge in net.edges:
        if graph.has_edge(edge.tail, edge.head):
            graph[edge.tail][edge.head]["capacity"] += 1
        else:
            graph.add_edge(edge.tail, edge.head, capacity=1)
    return graph


def max_flow(net: UnitNetwork, src: str, sink: str) -> int:
    """Maximum src->sink flow on the unit multigraph (BFS augmenting paths)"""
    net = _as_unit(net)
    if src == sink:
        raise ValueError("source and sink must differ")
    graph = _flow_graph(net)
    for node in (src, sink):
        if node not in graph:
            raise KeyError(f"unknown node {node!r}")
    value = nx.maximum_flow_value(graph, src, sink, flow_func=edmonds_karp)
    return int(value)


def min_cut_bruteforce(net: UnitNetwork, src: str, sink: str) -> int:
    """Minimum src/sink cut by enumerating every vertex bipartition; test oracle only"""
    net = _as_unit(net)
    others = [n for n in net.nodes if n not in (src, sink)]
    best = None
    for size in range(len(others) + 1):
        for chosen in itertools.combinations(others, size):
            side = set(chosen) | {src}
            cut = sum(1 for e in net.edges if e.tail in side and e.head not in side)
            best = cut if best is None else min(best, cut)
    return best or 0


def with_super_source(net: UnitNetwork) -> UnitNetwork:
    """Attach σ with one virtual unit edge to every source"""
    sigma = SUPER_SOURCE
    while sigma in net.nodes:
        sigma += "_"
    virtual = tuple(UnitEdge(sigma, s, 0, -1) for s in net.sources)
    return UnitNetwork(
        name=net.name,
        nodes=(sigma,) + tuple(net.nodes),
        edges=virtual + tuple(net.edges),
        sources=(sigma,),
        targets=tuple(net.targets),
        provenance=dict(net.provenance),
    )


def multicast_feasible(net: Network) -> FeasibilityResult:
    """
    Check the min-cut max-flow condition for multicast at rate |S|

    Args:
        net: Validated network

    Returns:
        FeasibilityResult; on failure the first violating target and its flow
    """
    unit = _as_unit(net)
    augmented = with_super_source(unit)
    sigma = augmented.sources[0]
    required = len(unit.sources)
    result = FeasibilityResult(feasible=True, required=required)
    for target in unit.targets:
        flow = max_flow(augmented, sigma, target)
        result.flows[target] = flow
        if flow < required and result.feasible:
            result.feasible = False
            result.target = target
            result.flow = flow
    if result.feasible:
        logger.info(f"Network {unit.name} is multicast feasible at rate {required}")
    else:
        logger.warning(f"Network {unit.name}: {result.describe()}")
    return result


def topological_order(net) -> List[str]:
    """Topological node order with lexicographic tie-breaking"""
    unit = _as_unit(net)
    graph = nx.MultiDiGraph()
    graph.add_nodes_from(unit.nodes)
    graph.add_edges_from((e.tail, e.head) for e in unit.edges)
    return list(nx.lexicographical_topological_sort(graph))
