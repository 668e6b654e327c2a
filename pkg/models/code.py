"""
Linear network code models
"""

from enum import Enum
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field


def virtual_in(source: str) -> str:
    """Key of the virtual incoming edge that hands a_i to source s_i"""
    return f"in:{source}"


def virtual_out(target: str, i: int) -> str:
    """Key of the i-th virtual outgoing edge of a target (1-based, carries a_i)"""
    return f"out:{target}#{i}"


def is_virtual(key: str) -> bool:
    return key.startswith("in:") or key.startswith("out:")


class StepKind(str, Enum):
    SOURCE_PREP = "source-prep"
    CODING = "coding"
    FAN_OUT = "fan-out"
    TARGET_DECODE = "target-decode"


class NodeCoding(BaseModel):
    """Local coding of one node: gamma[i][j] maps input i to output j"""

    model_config = ConfigDict(frozen=True)

    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    gamma: Tuple[Tuple[int, ...], ...]


class CodingStep(BaseModel):
    """One node's work in topological order"""

    model_config = ConfigDict(frozen=True)

    node: str
    kind: StepKind
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    gamma: Tuple[Tuple[int, ...], ...]

    @property
    def physical_outputs(self) -> List[str]:
        return [key for key in self.outputs if not is_virtual(key)]

    @property
    def virtual_outputs(self) -> List[str]:
        return [key for key in self.outputs if is_virtual(key)]


class LinearCode(BaseModel):
    """
    A linear multicast code over F_p

    `local` holds every node's gamma matrix over its ordered inputs (virtual
    input first for sources) and outputs (virtual outputs last for targets).
    `global_vectors` maps every edge key, virtual ones included, to its
    encoding vector. `decoding[t]` is D_t with D_t * (incoming values) = a.
    """

    model_config = ConfigDict(frozen=True)

    network: str = "network"
    p: int
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    order: Tuple[str, ...]
    local: Dict[str, NodeCoding]
    global_vectors: Dict[str, Tuple[int, ...]]
    decoding: Dict[str, Tuple[Tuple[int, ...], ...]]
    seed: int = 0
    attempts: int = Field(default=1, ge=1)

    @property
    def rate(self) -> int:
        return len(self.sources)

    def to_json(self, indent: int = 2) -> str:
        return self.model_dump_json(indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "LinearCode":
        return cls.model_validate_json(text)
