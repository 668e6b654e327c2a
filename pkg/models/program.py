"""
Quantum program, bookkeeping tables and the run transcript
"""

import json
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from models.errors import SelectionError


class Op(str, Enum):
    ALLOCATE = "allocate"
    PREPARE_PLUS = "prepare-plus"
    CONTROLLED_ADD = "controlled-add"
    TRANSMIT = "transmit"
    FOURIER_MEASURE = "fourier-measure"
    PHASE_CORRECT = "phase-correct"
    TELEPORT_PAIR = "teleport-pair"


class Instruction(BaseModel):
    """
    One program instruction executed at `node`

    registers are role labels: (target,) for allocate / prepare-plus /
    fourier-measure / phase-correct, (control, target) for controlled-add,
    (register,) plus `edge` for transmit.
    """

    model_config = ConfigDict(frozen=True)

    op: Op
    node: str
    registers: Tuple[str, ...]
    coefficient: Optional[int] = None
    edge: Optional[str] = None


class QuantumProgram(BaseModel):
    """Compiled Clifford program for steps (i)-(iii) of the protocol"""

    model_config = ConfigDict(frozen=True)

    network: str
    p: int
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    instructions: Tuple[Instruction, ...]
    retire_early: bool = False

    @property
    def rate(self) -> int:
        return len(self.sources)

    @property
    def transmissions(self) -> int:
        return sum(1 for ins in self.instructions if ins.op is Op.TRANSMIT)

    def of(self, op: Op) -> List[Instruction]:
        return [ins for ins in self.instructions if ins.op is op]

    def peak_registers(self) -> int:
        """Largest number of simultaneously live registers while executing the program"""
        live = peak = 0
        for ins in self.instructions:
            if ins.op is Op.ALLOCATE:
                live += 1
                peak = max(peak, live)
            elif ins.op is Op.FOURIER_MEASURE and self.retire_early:
                live -= 1
        return peak


def source_role(i: int) -> str:
    """S'_i, the source-side qudit of cat state i (1-based)"""
    return f"S'{i}"


def input_role(i: int) -> str:
    """S_i, the register holding the i-th qudit of the input state"""
    return f"S{i}"


def edge_role(key: str) -> str:
    return f"R[{key}]"


def target_role(j: int, i: int) -> str:
    """T_{j,i}: qudit of target t_j belonging to cat state i (both 1-based)"""
    return f"T{j},{i}"


def is_edge_role(role: str) -> bool:
    return role.startswith("R[")


class FunctionalTable(BaseModel):
    """Linear functional of each register's basis value in terms of a"""

    model_config = ConfigDict(validate_assignment=True)

    p: int
    rate: int
    entries: Dict[str, Tuple[int, ...]] = Field(default_factory=dict)

    def zero(self, role: str) -> None:
        self.entries[role] = tuple([0] * self.rate)

    def basis(self, role: str, i: int) -> None:
        self.entries[role] = tuple(1 if k == i else 0 for k in range(self.rate))

    def add_scaled(self, target: str, control: str, gamma: int) -> None:
        t = self.entries[target]
        c = self.entries[control]
        self.entries[target] = tuple((x + gamma * y) % self.p for x, y in zip(t, c))

    def evaluate(self, role: str, a) -> int:
        return sum(int(x) * int(y) for x, y in zip(self.entries[role], a)) % self.p

    def __getitem__(self, role: str) -> Tuple[int, ...]:
        return self.entries[role]

    def __contains__(self, role: str) -> bool:
        return role in self.entries


class PhaseFunctional(BaseModel):
    """b with accumulated phase omega^(b.a), plus the outcome log y0"""

    p: int
    b: Tuple[int, ...]
    outcomes: List[Tuple[str, int]] = Field(default_factory=list)

    @classmethod
    def zero(cls, p: int, rate: int) -> "PhaseFunctional":
        return cls(p=p, b=tuple([0] * rate))

    def absorb(self, role: str, outcome: int, functional) -> None:
        """Record outcome y on a register with functional f: b -= y * f"""
        self.outcomes.append((role, int(outcome)))
        self.b = tuple((x - int(outcome) * int(f)) % self.p for x, f in zip(self.b, functional))


class TargetSelection(BaseModel):
    """
    Ordered subset T0 of the targets and a permutation pi

    permutation[k] is the 0-based position in `targets` that receives the
    k-th input qudit.
    """

    model_config = ConfigDict(frozen=True)

    targets: Tuple[str, ...]
    permutation: Tuple[int, ...]

    @classmethod
    def identity(cls, targets) -> "TargetSelection":
        targets = tuple(targets)
        return cls(targets=targets, permutation=tuple(range(len(targets))))

    @classmethod
    def parse(cls, select: str, perm: Optional[str] = None) -> "TargetSelection":
        """Build from CLI text: "t1,t2" and a 1-based permutation "2,1" """
        targets = tuple(name.strip() for name in select.split(",") if name.strip())
        if perm is None:
            return cls.identity(targets)
        try:
            permutation = tuple(int(x) - 1 for x in perm.split(","))
        except ValueError as e:
            raise SelectionError(f"permutation {perm!r} is not a list of integers") from e
        return cls(targets=targets, permutation=permutation)

    def validate_against(self, all_targets, rate: int) -> None:
        if len(self.targets) != rate:
            raise SelectionError(f"selection has {len(self.targets)} targets, need exactly {rate}")
        if len(set(self.targets)) != len(self.targets):
            raise SelectionError("selected targets must be distinct")
        unknown = [t for t in self.targets if t not in all_targets]
        if unknown:
            raise SelectionError(f"not targets of the network: {unknown}")
        if sorted(self.permutation) != list(range(rate)):
            raise SelectionError(f"{[k + 1 for k in self.permutation]} is not a permutation of 1..{rate}")

    def target_for(self, k: int) -> str:
        """Target node receiving input qudit k (0-based)"""
        return self.targets[self.permutation[k]]


class TranscriptEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: str
    node: str
    instruction: str
    registers: Tuple[str, ...] = ()
    coefficient: Optional[int] = None
    outcome: Optional[int] = None
    message: Optional[Dict[str, Any]] = None


PRE_SELECTION_STEPS = ("prepare", "propagate", "measure", "correct")
OUTCOME_DEPENDENT = ("phase-correct", "shift-correct")


class Transcript(BaseModel):
    """Ordered log of gates, transmissions, outcomes and classical messages"""

    entries: List[TranscriptEntry] = Field(default_factory=list)

    def log(self, step: str, node: str, instruction: str, registers=(), **extra) -> TranscriptEntry:
        entry = TranscriptEntry(step=step, node=node, instruction=instruction, registers=tuple(registers), **extra)
        self.entries.append(entry)
        return entry

    def send(self, step: str, sender: str, receiver: str, payload: Any, registers=()) -> TranscriptEntry:
        """Record a free classical message"""
        return self.log(step, sender, "classical-message", registers,
                        message={"from": sender, "to": receiver, "payload": payload})

    def to_jsonl(self) -> str:
        return "".join(entry.model_dump_json(exclude_none=True) + "\n" for entry in self.entries)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        return cls(entries=[TranscriptEntry.model_validate(json.loads(line)) for line in text.splitlines() if line.strip()])

    def prefix(self, steps=PRE_SELECTION_STEPS) -> "Transcript":
        """Leading entries whose step is in `steps` (steps (i)-(iii) by default)"""
        head = []
        for entry in self.entries:
            if entry.step not in steps:
                break
            head.append(entry)
        return Transcript(entries=head)

    def outcomes(self) -> List[int]:
        return [e.outcome for e in self.entries if e.outcome is not None]

    def count(self, instruction: str) -> int:
        return sum(1 for e in self.entries if e.instruction == instruction)

    def without_outcomes(self) -> List[Dict[str, Any]]:
        """Entries with outcome values and message payloads blanked"""
        stripped = []
        for entry in self.entries:
            data = entry.model_dump(exclude_none=True)
            data.pop("outcome", None)
            if data["instruction"] in OUTCOME_DEPENDENT:
                data.pop("coefficient", None)
            if "message" in data:
                data["message"] = {k: v for k, v in data["message"].items() if k != "payload"}
            stripped.append(data)
        return stripped
