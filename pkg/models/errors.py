"""
Exception hierarchy shared by the services and the command-line surface
"""

from typing import Optional


class QuantumNetworkError(Exception):
    """Base class for every domain failure raised by the services"""


class NetworkSchemaError(QuantumNetworkError):
    """Network document is malformed or violates the schema"""


class UnknownNodeError(QuantumNetworkError):
    """An edge, source or target references a node that was never declared"""


class CycleError(QuantumNetworkError):
    """Network contains a directed cycle"""


class InfeasibleNetworkError(QuantumNetworkError):
    """Multicast max-flow condition fails for some target"""

    def __init__(self, target: str, flow: int, required: int):
        self.target = target
        self.flow = flow
        self.required = required
        super().__init__(
            f"infeasible: max-flow to {target} is {flow}, need {required}"
        )


class FieldMismatchError(QuantumNetworkError, TypeError):
    """Operands live in different prime fields"""


class NoInverseError(QuantumNetworkError, ZeroDivisionError):
    """Zero has no multiplicative inverse"""


class CodeConstructionError(QuantumNetworkError):
    """Random linear code construction failed"""


class RegisterBudgetError(QuantumNetworkError):
    """State vector would exceed the configured amplitude budget"""


class EntanglementError(QuantumNetworkError):
    """A register set expected to be in a product state is entangled"""


class ImpossibleOutcomeError(QuantumNetworkError):
    """A forced measurement outcome has zero probability"""

    def __init__(self, register: str, outcome: int, probability: Optional[float] = None):
        self.register = register
        self.outcome = outcome
        self.probability = probability
        super().__init__(
            f"outcome {outcome} on {register} has probability {probability}"
        )


class SelectionError(QuantumNetworkError):
    """Ordered target selection or permutation is malformed"""


class InputStateError(QuantumNetworkError):
    """Input state specifier cannot be turned into a pure state"""


class FieldSizeError(QuantumNetworkError, ValueError):
    """Requested field size is not a prime of at least 2"""


class RunConfigError(QuantumNetworkError):
    """Run options fail validation"""
