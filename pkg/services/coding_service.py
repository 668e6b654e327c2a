"""
Coding service: random linear multicast code construction and its classical
evaluation
"""

import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

from models.code import CodingStep, LinearCode, NodeCoding, StepKind, virtual_in, virtual_out
from models.errors import CodeConstructionError, FieldSizeError, InfeasibleNetworkError
from models.field import FieldElem, is_prime
from models.network import Network, UnitNetwork
from services.field_service import choose_field_size, left_inverse, mat_vec, matrix_rank, vec_combine
from services.graph_service import expand_capacities, multicast_feasible, topological_order

logger = logging.getLogger(__name__)


def node_inputs(net: UnitNetwork, node: str) -> List[str]:
    """Ordered input channels of a node: virtual input (sources) then physical edges"""
    keys = [virtual_in(node)] if node in net.sources else []
    return keys + [e.key for e in net.incoming(node)]


def node_outputs(net: UnitNetwork, node: str) -> List[str]:
    """Ordered output channels: physical edges then |S| virtual outputs (targets)"""
    keys = [e.key for e in net.outgoing(node)]
    if node in net.targets:
        keys += [virtual_out(node, i) for i in range(1, len(net.sources) + 1)]
    return keys


class CodingService:
    """Builds LinearCode instances with a bounded number of random attempts"""

    def __init__(self, retry_budget: Optional[int] = None):
        self.retry_budget = retry_budget if retry_budget is not None else int(os.getenv("QNC_RETRY_BUDGET", "64"))

    def construct_linear_code(self, net, p: int, seed: int = 0) -> LinearCode:
        """
        Draw random local coefficients until every target can decode

        Nodes with a single input forward it unchanged; nodes with two or
        more inputs draw each gamma uniformly from F_p.

        Args:
            net: Network or UnitNetwork
            p: Prime field size
            seed: Seed of the coefficient generator

        Returns:
            LinearCode with full-rank decoding at every target

        Raises:
            InfeasibleNetworkError: max-flow condition violated
            CodeConstructionError: retry budget exhausted
        """
        unit = net if isinstance(net, UnitNetwork) else expand_capacities(net)
        if not is_prime(p):
            raise FieldSizeError(f"field size {p} is not prime")
        feasibility = multicast_feasible(unit)
        if not feasibility.feasible:
            raise InfeasibleNetworkError(feasibility.target, feasibility.flow, feasibility.required)
        recommended = choose_field_size(unit)
        if p < recommended:
            logger.warning(f"F_{p} is below the recommended F_{recommended} for {len(unit.targets)} targets")

        h = len(unit.sources)
        order = topological_order(unit)
        rng = np.random.default_rng(seed)

        for attempt in range(1, self.retry_budget + 1):
            local_physical: Dict[str, np.ndarray] = {}
            vectors: Dict[str, List[int]] = {}
            for i, source in enumerate(unit.sources):
                vectors[virtual_in(source)] = [1 if k == i else 0 for k in range(h)]
            for node in order:
                inputs = node_inputs(unit, node)
                outputs = [e.key for e in unit.outgoing(node)]
                if len(inputs) == 1:
                    gamma = np.ones((1, len(outputs)), dtype=np.int64)
                else:
                    gamma = rng.integers(0, p, size=(len(inputs), len(outputs)))
                local_physical[node] = gamma
                in_vectors = [vectors[key] for key in inputs]
                for j, key in enumerate(outputs):
                    vectors[key] = vec_combine(in_vectors, gamma[:, j], p, h)

            deficient = [
                t for t in unit.targets
                if matrix_rank([vectors[key] for key in node_inputs(unit, t)], p) < h
            ]
            if deficient:
                logger.debug(f"Attempt {attempt}: targets {deficient} cannot decode over F_{p}")
                continue

            decoding = {}
            for t in unit.targets:
                rows = [vectors[key] for key in node_inputs(unit, t)]
                decoding[t] = left_inverse(rows, p)
                for i in range(h):
                    vectors[virtual_out(t, i + 1)] = [1 if k == i else 0 for k in range(h)]

            local = {}
            for node in order:
                inputs = node_inputs(unit, node)
                gamma = [list(row) for row in local_physical[node].tolist()]
                if node in unit.targets:
                    for k, row in enumerate(gamma):
                        row.extend(decoding[node][i][k] for i in range(h))
                local[node] = NodeCoding(
                    inputs=tuple(inputs),
                    outputs=tuple(node_outputs(unit, node)),
                    gamma=tuple(tuple(int(x) for x in row) for row in gamma),
                )

            code = LinearCode(
                network=unit.name,
                p=p,
                sources=unit.sources,
                targets=unit.targets,
                order=tuple(order),
                local=local,
                global_vectors={k: tuple(v) for k, v in vectors.items()},
                decoding={t: tuple(tuple(int(x) for x in row) for row in d) for t, d in decoding.items()},
                seed=seed,
                attempts=attempt,
            )
            logger.info(f"Constructed linear code for {unit.name} over F_{p} after {attempt} attempt(s)")
            return code

        logger.error(f"No full-rank code for {unit.name} over F_{p} in {self.retry_budget} attempts")
        raise CodeConstructionError(
            f"no full-rank code over F_{p} after {self.retry_budget} attempts; try a larger prime field"
        )


def construct_linear_code(net, p: int, seed: int = 0) -> LinearCode:
    """Module-level shortcut using the environment-configured retry budget"""
    return CodingService().construct_linear_code(net, p, seed)


def _values(inputs: Sequence, p: int) -> List[int]:
    values = []
    for a in inputs:
        if isinstance(a, FieldElem):
            if a.p != p:
                raise ValueError(f"input from F_{a.p} given to a code over F_{p}")
            values.append(a.value)
        else:
            values.append(int(a) % p)
    return values


def classical_simulate(code: LinearCode, inputs: Sequence) -> Dict[str, List[int]]:
    """
    Run the code on concrete source symbols

    Args:
        code: The linear code
        inputs: a_1..a_h as integers or FieldElem

    Returns:
        Mapping target -> values on its virtual outputs, in order
    """
    p = code.p
    a = _values(inputs, p)
    if len(a) != code.rate:
        raise ValueError(f"expected {code.rate} inputs, got {len(a)}")
    carried: Dict[str, int] = {virtual_in(s): a[i] for i, s in enumerate(code.sources)}
    for node in code.order:
        coding = code.local[node]
        incoming = [carried[key] for key in coding.inputs]
        transfer = [[int(row[j]) for row in coding.gamma] for j in range(len(coding.outputs))]
        carried.update(zip(coding.outputs, mat_vec(transfer, incoming, p)))
    return {t: [carried[virtual_out(t, i)] for i in range(1, code.rate + 1)] for t in code.targets}


def global_encoding_vectors(code: LinearCode) -> Dict[str, List[int]]:
    """Encoding vector of every edge, virtual edges included"""
    return {key: list(vector) for key, vector in code.global_vectors.items()}


def classify(node: str, coding: NodeCoding, sources: Sequence[str], targets: Sequence[str]) -> StepKind:
    if node in targets:
        return StepKind.TARGET_DECODE
    if node in sources:
        return StepKind.SOURCE_PREP
    if len(coding.inputs) == 1 and all(g == 1 for g in coding.gamma[0]):
        return StepKind.FAN_OUT
    return StepKind.CODING


def compile_steps(code: LinearCode) -> List[CodingStep]:
    """Topologically ordered coding steps, one per node"""
    steps = []
    for node in code.order:
        coding = code.local[node]
        steps.append(CodingStep(
            node=node,
            kind=classify(node, coding, code.sources, code.targets),
            inputs=coding.inputs,
            outputs=coding.outputs,
            gamma=coding.gamma,
        ))
    return steps
