"""
Property report model
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class Failure(BaseModel):
    case: str
    witness: Dict[str, Any] = Field(default_factory=dict)


class PropertyReport(BaseModel):
    """Result of checking one property over a set of instances; holds iff `failures` is empty"""

    property: str
    instance: str
    cases: int = 0
    failures: List[Failure] = Field(default_factory=list)
    min_fidelity: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def passed(self, count: int = 1) -> None:
        self.cases += count

    def fail(self, case: str, **witness) -> None:
        self.cases += 1
        self.failures.append(Failure(case=case, witness=witness))

    def observe_fidelity(self, value: float) -> None:
        self.min_fidelity = value if self.min_fidelity is None else min(self.min_fidelity, value)

    def summary_row(self) -> str:
        status = "ok" if self.ok else "FAIL"
        line = f"{self.property:<22} {self.instance:<36} {self.cases:>7} {len(self.failures):>8}  {status}"
        if self.min_fidelity is not None:
            line += f"  min fidelity {self.min_fidelity:.12f}"
        return line
