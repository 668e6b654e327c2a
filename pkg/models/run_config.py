"""
Run configuration and input-state specifiers
"""

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.errors import InputStateError
from models.program import TargetSelection

logger = logging.getLogger(__name__)

RENORMALIZE_TOLERANCE = 1e-6


class InputSpec(BaseModel):
    """
    Input state specifier: zero, plus, random(seed) or an explicit amplitude list

    Text forms accepted by `parse`: "zero", "plus", "random:7",
    "0.6,0.8j" (comma separated Python complex literals).
    """

    model_config = ConfigDict(frozen=True)

    kind: str = "zero"
    seed: Optional[int] = None
    amplitudes: Optional[Tuple[complex, ...]] = None

    @classmethod
    def parse(cls, text: str) -> "InputSpec":
        text = text.strip()
        if text in ("zero", "plus"):
            return cls(kind=text)
        if text.startswith("random"):
            _, _, seed = text.partition(":")
            try:
                return cls(kind="random", seed=int(seed) if seed else 0)
            except ValueError as e:
                raise InputStateError(f"bad random seed in {text!r}") from e
        try:
            amplitudes = tuple(complex(part.replace(" ", "")) for part in text.split(","))
        except ValueError as e:
            raise InputStateError(f"cannot parse input specifier {text!r}") from e
        return cls(kind="explicit", amplitudes=amplitudes)

    def vector(self, p: int, registers: int) -> np.ndarray:
        """Normalized amplitude vector over `registers` qudits of dimension p"""
        size = p ** registers
        if self.kind == "zero":
            vector = np.zeros(size, dtype=np.complex128)
            vector[0] = 1.0
            return vector
        if self.kind == "plus":
            return np.full(size, 1 / np.sqrt(size), dtype=np.complex128)
        if self.kind == "random":
            return haar_random_state(size, self.seed or 0)
        if self.kind != "explicit" or self.amplitudes is None:
            raise InputStateError(f"unknown input kind {self.kind!r}")
        vector = np.asarray(self.amplitudes, dtype=np.complex128)
        if vector.size != size:
            raise InputStateError(f"{vector.size} amplitudes given, {registers} qudits of dimension {p} need {size}")
        norm = np.sqrt(np.vdot(vector, vector).real)
        if norm == 0:
            raise InputStateError("input amplitudes are all zero")
        if abs(norm - 1.0) > RENORMALIZE_TOLERANCE:
            logger.warning(f"Input amplitudes have norm {norm:.6f}; renormalizing")
        return vector / norm

    def describe(self) -> str:
        if self.kind == "random":
            return f"random:{self.seed}"
        if self.kind == "explicit":
            return ",".join(str(a) for a in self.amplitudes or ())
        return self.kind


def haar_random_state(size: int, seed: int) -> np.ndarray:
    """Haar-random pure state: normalized vector of i.i.d. complex Gaussians"""
    rng = np.random.default_rng(seed)
    vector = rng.normal(size=size) + 1j * rng.normal(size=size)
    return vector / np.linalg.norm(vector)


class RunConfig(BaseModel):
    """Everything that determines a protocol run; identical configs give identical transcripts"""

    model_config = ConfigDict(frozen=True)

    network_path: Path
    field: Optional[int] = Field(default=None, ge=2)
    code_seed: int = 0
    seed: int = 0
    select: Optional[str] = None
    perm: Optional[str] = None
    input: InputSpec = InputSpec()
    retire_early: Optional[bool] = None

    def selection(self, default_targets) -> TargetSelection:
        if self.select is None:
            return TargetSelection.parse(",".join(default_targets), self.perm)
        return TargetSelection.parse(self.select, self.perm)
