"""
Protocol service: compiles a linear code into the quantum multicast program
and executes it on the state-vector simulator

Steps: prepare S'_i in |+>, propagate the code (controlled-adds), Fourier
measure every edge register and fix the phase at t_1, then turn the chosen
targets' cat legs into EPR pairs and teleport the input through them.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from models.code import LinearCode
from models.errors import (
    EntanglementError,
    InfeasibleNetworkError,
    InputStateError,
    SelectionError,
)
from models.network import Network, UnitNetwork
from models.program import (
    FunctionalTable,
    Instruction,
    Op,
    PhaseFunctional,
    QuantumProgram,
    TargetSelection,
    Transcript,
    edge_role,
    input_role,
    is_edge_role,
    source_role,
    target_role,
)
from services.coding_service import CodingService, compile_steps
from services.field_service import choose_field_size
from services.graph_service import expand_capacities, multicast_feasible
from services.simulator_service import (
    Basis,
    RegisterLabel,
    StateVector,
    add_register,
    apply_controlled_add,
    apply_fourier,
    apply_phase,
    apply_shift,
    attach,
    discard,
    empty_state,
    fidelity,
    measure,
    reduced_state,
)

logger = logging.getLogger(__name__)

StepCallback = Callable[[int, Instruction, StateVector], None]
StageCallback = Callable[[str, StateVector], None]


@dataclass(frozen=True)
class EprPair:
    """Maximally entangled pair sum_x |x>_S'k |x>_T(j*,k) / sqrt(p)"""

    source_register: str
    target_register: str
    source: str
    target: str


@dataclass
class RunResult:
    """Outcome of a full run; unpacks to (fidelity, transcript)"""

    fidelity: float
    transcript: Transcript
    p: int
    transmissions: int
    code: LinearCode
    program: QuantumProgram
    selection: TargetSelection
    delivered: List[str] = field(default_factory=list)
    phase: Optional[PhaseFunctional] = None

    def __iter__(self) -> Iterator:
        return iter((self.fidelity, self.transcript))


def _role_of(code: LinearCode, key: str) -> str:
    """Register role carrying the value of edge `key`"""
    if key.startswith("in:"):
        return source_role(code.sources.index(key[3:]) + 1)
    if key.startswith("out:"):
        target, _, i = key[4:].rpartition("#")
        return target_role(code.targets.index(target) + 1, int(i))
    return edge_role(key)


def compile_program(code: LinearCode, retire_early: bool = False) -> QuantumProgram:
    """
    Compile a linear code into the quantum program for the prepare, propagate
    and measure/correct steps

    Every output channel gets a fresh register, loaded by controlled-adds
    with the nonzero local coefficients; physical outputs are then
    transmitted to the next node. With `retire_early`, each edge register is
    Fourier measured right after its receiving node has used it; otherwise
    all edge measurements follow propagation.

    Args:
        code: The linear code
        retire_early: Interleave measurements to bound live registers

    Returns:
        QuantumProgram ending with one phase-correct per T_(1,k)
    """
    p = code.p
    steps = compile_steps(code)
    consumer = {key: step.node for step in steps for key in step.inputs}
    instructions: List[Instruction] = []

    for i, source in enumerate(code.sources, 1):
        role = source_role(i)
        instructions.append(Instruction(op=Op.ALLOCATE, node=source, registers=(role,)))
        instructions.append(Instruction(op=Op.PREPARE_PLUS, node=source, registers=(role,)))

    edge_registers: List[str] = []
    for step in steps:
        in_roles = [_role_of(code, key) for key in step.inputs]
        for j, key in enumerate(step.outputs):
            out = _role_of(code, key)
            instructions.append(Instruction(op=Op.ALLOCATE, node=step.node, registers=(out,)))
            if is_edge_role(out):
                edge_registers.append(key)
            for i, control in enumerate(in_roles):
                gamma = step.gamma[i][j] % p
                if gamma:
                    instructions.append(Instruction(
                        op=Op.CONTROLLED_ADD, node=step.node, registers=(control, out), coefficient=gamma,
                    ))
        for key in step.physical_outputs:
            instructions.append(Instruction(
                op=Op.TRANSMIT, node=step.node, registers=(edge_role(key),), edge=key,
            ))
        if retire_early:
            for role in in_roles:
                if is_edge_role(role):
                    instructions.append(Instruction(op=Op.FOURIER_MEASURE, node=step.node, registers=(role,)))

    if not retire_early:
        for key in edge_registers:
            instructions.append(Instruction(op=Op.FOURIER_MEASURE, node=consumer[key], registers=(edge_role(key),)))

    first_target = code.targets[0]
    for k in range(1, code.rate + 1):
        instructions.append(Instruction(op=Op.PHASE_CORRECT, node=first_target, registers=(target_role(1, k),)))

    program = QuantumProgram(
        network=code.network,
        p=p,
        sources=code.sources,
        targets=code.targets,
        instructions=tuple(instructions),
        retire_early=retire_early,
    )
    logger.debug(f"Compiled {len(instructions)} instructions for {code.network} "
                 f"(peak {program.peak_registers()} registers, retire_early={retire_early})")
    return program


def deferred_peak_registers(code: LinearCode) -> int:
    """Live registers when all edge measurements are deferred: h + |E| + |T| * h"""
    edges = sum(1 for key in code.global_vectors if not key.startswith(("in:", "out:")))
    return code.rate + edges + len(code.targets) * code.rate


def _measure_edge(state: StateVector, role: str, table: FunctionalTable, phase: PhaseFunctional,
                  transcript: Transcript, rng, forced: Optional[Dict[str, int]], first_target: str,
                  step: str) -> int:
    r = state.index_of(role)
    owner = state.labels[r].owner
    outcome, _ = measure(state, r, Basis.FOURIER, rng, (forced or {}).get(role))
    phase.absorb(role, outcome.value, table[role])
    transcript.log(step, owner, Op.FOURIER_MEASURE.value, (role,), outcome=outcome.value)
    transcript.send(step, owner, first_target, outcome.value, (role,))
    return outcome.value


def run_propagation(program: QuantumProgram, state: Optional[StateVector] = None,
                    table: Optional[FunctionalTable] = None, *, rng=None,
                    transcript: Optional[Transcript] = None, phase: Optional[PhaseFunctional] = None,
                    forced: Optional[Dict[str, int]] = None,
                    on_step: Optional[StepCallback] = None) -> Tuple[StateVector, FunctionalTable]:
    """
    Execute prepare and propagate instructions, keeping the functional table

    In a deferred program the trailing measurements are left to
    `measure_and_fix`; in an early-retirement program each edge register is
    measured, its outcome absorbed into `phase` and the register dropped.

    Args:
        program: Compiled program
        state: Starting state (an empty state over F_p when omitted)
        table: Functional table to extend
        rng: Generator for early measurements
        transcript: Log to append to
        phase: Accumulated phase functional for early measurements
        forced: Post-selected outcomes by role
        on_step: Called as on_step(index, instruction, state) after each instruction

    Returns:
        (state, table)
    """
    p = program.p
    state = state if state is not None else empty_state(p)
    table = table if table is not None else FunctionalTable(p=p, rate=program.rate)
    transcript = transcript if transcript is not None else Transcript()
    phase = phase if phase is not None else PhaseFunctional.zero(p, program.rate)
    first_target = program.targets[0]
    heads: Dict[str, str] = {}

    for index, ins in enumerate(program.instructions):
        if ins.op is Op.PHASE_CORRECT or (ins.op is Op.FOURIER_MEASURE and not program.retire_early):
            break
        if ins.op is Op.ALLOCATE:
            (role,) = ins.registers
            add_register(state, ins.node, role)
            table.zero(role)
            step = "prepare" if ins.node in program.sources and role.startswith("S'") else "propagate"
            transcript.log(step, ins.node, ins.op.value, ins.registers)
        elif ins.op is Op.PREPARE_PLUS:
            (role,) = ins.registers
            apply_fourier(state, state.index_of(role))
            table.basis(role, program.sources.index(ins.node))
            transcript.log("prepare", ins.node, ins.op.value, ins.registers)
        elif ins.op is Op.CONTROLLED_ADD:
            control, target = ins.registers
            apply_controlled_add(state, state.index_of(control), state.index_of(target), ins.coefficient)
            table.add_scaled(target, control, ins.coefficient)
            transcript.log("propagate", ins.node, ins.op.value, ins.registers, coefficient=ins.coefficient)
        elif ins.op is Op.TRANSMIT:
            (role,) = ins.registers
            heads[role] = _head_of(ins.edge)
            r = state.index_of(role)
            state.labels[r] = RegisterLabel(heads[role], role)
            transcript.log("propagate", ins.node, ins.op.value, ins.registers,
                           message={"edge": ins.edge, "from": ins.node, "to": heads[role]})
        elif ins.op is Op.FOURIER_MEASURE:
            (role,) = ins.registers
            _measure_edge(state, role, table, phase, transcript, rng, forced, first_target, "measure")
            discard(state, state.index_of(role))
        if on_step is not None:
            on_step(index, ins, state)
    return state, table


def _head_of(edge_key: str) -> str:
    head, _, _ = edge_key.partition("->")[2].rpartition("#")
    return head


def measure_and_fix(state: StateVector, table: FunctionalTable, *, rng=None,
                    transcript: Optional[Transcript] = None, phase: Optional[PhaseFunctional] = None,
                    forced: Optional[Dict[str, int]] = None, order: str = "forward",
                    first_target: Optional[str] = None) -> Tuple[StateVector, PhaseFunctional]:
    """
    Fourier-measure the remaining edge registers, send outcomes to t_1 and
    apply Z(-b_k) on T_(1,k)

    Args:
        state: State after propagation
        table: Functional table of the registers
        rng: Seeded generator
        transcript: Log to append to
        phase: Phase functional accumulated so far (early measurements)
        forced: Post-selected outcomes by role
        order: "forward" (creation order) or "reverse"
        first_target: Name of t_1; taken from the owner of T1,1 when omitted

    Returns:
        (state with the GHZ-type cat states, final phase functional)
    """
    transcript = transcript if transcript is not None else Transcript()
    phase = phase if phase is not None else PhaseFunctional.zero(table.p, table.rate)
    if first_target is None:
        first_target = state.labels[state.index_of(target_role(1, 1))].owner
    roles = [role for role in state.roles() if is_edge_role(role)]
    if order == "reverse":
        roles.reverse()
    elif order != "forward":
        raise ValueError(f"unknown measurement order {order!r}")

    for role in roles:
        _measure_edge(state, role, table, phase, transcript, rng, forced, first_target, "measure")
    for role in roles:
        discard(state, state.index_of(role))

    for k in range(1, table.rate + 1):
        role = target_role(1, k)
        correction = (-phase.b[k - 1]) % table.p
        apply_phase(state, state.index_of(role), correction)
        transcript.log("correct", first_target, Op.PHASE_CORRECT.value, (role,), coefficient=correction)
    logger.debug(f"Phase functional b={phase.b} corrected at {first_target}")
    return state, phase


def distill_epr(state: StateVector, selection: TargetSelection, targets: Sequence[str], *, rng=None,
                transcript: Optional[Transcript] = None,
                forced: Optional[Dict[str, int]] = None) -> Tuple[StateVector, List[EprPair]]:
    """
    Reduce each cat state to an EPR pair between s_k and its selected target

    Unselected legs T_(j,k) are Fourier measured and their outcomes sent to
    s_k. The legs leave phase omega^(b_k a) with b_k = -(sum of outcomes),
    cancelled with Z(-b_k) on S'_k.

    Args:
        state: State holding the h cat states
        selection: (T0, pi); input qudit k goes to selection.target_for(k)
        targets: All targets of the network in order
        rng: Seeded generator
        transcript: Log to append to
        forced: Post-selected outcomes by role

    Returns:
        (state, pairs in input order)
    """
    rate = sum(1 for role in state.roles() if role.startswith("S'"))
    targets = list(targets)
    selection.validate_against(targets, rate)
    transcript = transcript if transcript is not None else Transcript()
    transcript.log("select", "*", "select", message={
        "targets": list(selection.targets),
        "permutation": [k + 1 for k in selection.permutation],
    })

    pairs = []
    for k in range(1, rate + 1):
        chosen = selection.target_for(k - 1)
        kept = targets.index(chosen) + 1
        source_register = source_role(k)
        source = state.labels[state.index_of(source_register)].owner
        b = 0
        legs = [target_role(j, k) for j in range(1, len(targets) + 1) if j != kept]
        for role in legs:
            r = state.index_of(role)
            owner = state.labels[r].owner
            outcome, _ = measure(state, r, Basis.FOURIER, rng, (forced or {}).get(role))
            b = (b - outcome.value) % state.p
            transcript.log("distill", owner, Op.FOURIER_MEASURE.value, (role,), outcome=outcome.value)
            transcript.send("distill", owner, source, outcome.value, (role,))
        correction = (-b) % state.p
        apply_phase(state, state.index_of(source_register), correction)
        transcript.log("distill", source, Op.PHASE_CORRECT.value, (source_register,), coefficient=correction)
        for role in legs:
            discard(state, state.index_of(role))
        pairs.append(EprPair(source_register, target_role(kept, k), source, chosen))
    return state, pairs


def _epr_vector(p: int) -> np.ndarray:
    vector = np.zeros(p * p, dtype=np.complex128)
    vector[[x * p + x for x in range(p)]] = 1 / np.sqrt(p)
    return vector


def teleport(state: StateVector, input_registers: Sequence[str], pairs: Sequence[EprPair], *, rng=None,
             transcript: Optional[Transcript] = None,
             forced: Optional[Dict[str, int]] = None) -> Tuple[StateVector, List[str]]:
    """
    Teleport input register S_k through pair k for every k

    Per pair (A = S'_k at s_k, B at the target): controlled-add S_k -> A
    with coefficient p - 1, measure A (m) and S_k in the Fourier basis (y),
    send (m, y) and apply X(-m) then Z(y) on B.

    Returns:
        (state, target registers now holding the input qudits, in input order)

    Raises:
        EntanglementError: a pair is not the expected maximally entangled state
    """
    if len(input_registers) != len(pairs):
        raise ValueError(f"{len(input_registers)} input registers for {len(pairs)} pairs")
    transcript = transcript if transcript is not None else Transcript()
    forced = forced or {}
    p = state.p
    epr = _epr_vector(p)
    delivered = []
    for data, pair in zip(input_registers, pairs):
        a, b = state.index_of(pair.source_register), state.index_of(pair.target_register)
        overlap = abs(np.vdot(epr, reduced_state(state, [a, b]))) ** 2
        if overlap < 1 - 1e-6:
            raise EntanglementError(
                f"{pair.source_register}/{pair.target_register} is not a maximally entangled pair (overlap {overlap:.6f})"
            )
        transcript.log("teleport", pair.source, Op.TELEPORT_PAIR.value,
                       (data, pair.source_register, pair.target_register))
        apply_controlled_add(state, state.index_of(data), a, p - 1)
        transcript.log("teleport", pair.source, Op.CONTROLLED_ADD.value, (data, pair.source_register),
                       coefficient=p - 1)
        m, _ = measure(state, state.index_of(pair.source_register), Basis.COMPUTATIONAL, rng,
                       forced.get(pair.source_register))
        transcript.log("teleport", pair.source, "measure", (pair.source_register,), outcome=m.value)
        y, _ = measure(state, state.index_of(data), Basis.FOURIER, rng, forced.get(data))
        transcript.log("teleport", pair.source, Op.FOURIER_MEASURE.value, (data,), outcome=y.value)
        transcript.send("teleport", pair.source, pair.target, [m.value, y.value], (data, pair.source_register))

        target = state.index_of(pair.target_register)
        shift, correction = (-m.value) % p, y.value % p
        apply_shift(state, target, shift)
        transcript.log("teleport", pair.target, "shift-correct", (pair.target_register,), coefficient=shift)
        apply_phase(state, target, correction)
        transcript.log("teleport", pair.target, Op.PHASE_CORRECT.value, (pair.target_register,),
                       coefficient=correction)
        discard(state, state.index_of(pair.source_register))
        discard(state, state.index_of(data))
        delivered.append(pair.target_register)
    return state, delivered


def check_functional_table(state: StateVector, table: FunctionalTable) -> List[str]:
    """
    Verify every supported basis state is consistent with the table

    For each basis index with nonzero amplitude, the S'_i digits give a and
    every other tabled register must read table[role] . a.

    Returns:
        Violation descriptions (empty when the table holds)
    """
    roles = state.roles()
    tabled = [(r, role) for r, role in enumerate(roles) if role in table]
    sources = [state.index_of(source_role(i)) for i in range(1, table.rate + 1)]
    violations = []
    for index in np.flatnonzero(np.abs(state.amplitudes) > 1e-12):
        digits = np.unravel_index(int(index), [state.p] * state.n)
        a = [int(digits[r]) for r in sources]
        for r, role in tabled:
            expected = table.evaluate(role, a)
            if int(digits[r]) != expected:
                violations.append(f"basis {int(index)}: {role} holds {int(digits[r])}, functional gives {expected}")
    return violations


class ProtocolService:
    """Runs the whole multicast protocol with environment-configured limits"""

    def __init__(self, coding_service: Optional[CodingService] = None, max_amplitudes: Optional[int] = None,
                 tolerance: Optional[float] = None):
        self.coding_service = coding_service or CodingService()
        self.max_amplitudes = max_amplitudes if max_amplitudes is not None else int(
            os.getenv("QNC_MAX_AMPLITUDES", str(1 << 22)))
        self.tolerance = tolerance if tolerance is not None else float(os.getenv("QNC_TOLERANCE", "1e-9"))

    def prepare(self, net, p: Optional[int] = None, code_seed: int = 0,
                retire_early: Optional[bool] = None) -> Tuple[UnitNetwork, LinearCode, QuantumProgram]:
        """Feasibility check, code construction and compilation"""
        unit = net if isinstance(net, UnitNetwork) else expand_capacities(net)
        feasibility = multicast_feasible(unit)
        if not feasibility.feasible:
            raise InfeasibleNetworkError(feasibility.target, feasibility.flow, feasibility.required)
        if len(unit.sources) > len(unit.targets):
            raise SelectionError(f"{len(unit.sources)} sources but only {len(unit.targets)} targets")
        p = p if p is not None else choose_field_size(unit)
        code = self.coding_service.construct_linear_code(unit, p, code_seed)
        if retire_early is None:
            retire_early = p ** deferred_peak_registers(code) > self.max_amplitudes
            if retire_early:
                logger.info(f"Deferred measurement needs {p}^{deferred_peak_registers(code)} amplitudes; "
                            f"retiring edge registers early")
        return unit, code, compile_program(code, retire_early=retire_early)

    def run_full(self, net, input_state, selection: Optional[TargetSelection] = None, seed: int = 0,
                 code_seed: int = 0, p: Optional[int] = None, retire_early: Optional[bool] = None,
                 measurement_order: str = "forward",
                 on_step: Optional[StepCallback] = None,
                 on_stage: Optional[StageCallback] = None) -> RunResult:
        """
        End-to-end run: code, program, simulation and fidelity check

        Args:
            net: Network or UnitNetwork
            input_state: Amplitude vector over h qudits of dimension p
            selection: Targets and permutation (first h targets, identity when omitted)
            seed: Seed of the measurement generator
            code_seed: Seed of the coefficient generator
            p: Field size (smallest prime >= |T| when omitted)
            retire_early: Force or forbid early measurement (automatic when None)
            measurement_order: Order of deferred edge measurements
            on_step: Per-instruction callback during propagation
            on_stage: Per-stage callback, see `execute`

        Returns:
            RunResult; unpacks as (fidelity, transcript)
        """
        unit, code, program = self.prepare(net, p, code_seed, retire_early)
        return self.execute(unit, code, program, input_state, selection, seed=seed,
                            measurement_order=measurement_order, on_step=on_step, on_stage=on_stage)

    def execute(self, unit: UnitNetwork, code: LinearCode, program: QuantumProgram, input_state,
                selection: Optional[TargetSelection] = None, seed: int = 0, measurement_order: str = "forward",
                on_step: Optional[StepCallback] = None,
                on_stage: Optional[StageCallback] = None) -> RunResult:
        """
        Simulate an already compiled program; see `run_full`

        on_stage(name, state) is called after the propagate, correct,
        distill and teleport stages.
        """
        on_stage = on_stage or (lambda name, state: None)
        p, h = code.p, code.rate
        if selection is None:
            selection = TargetSelection.identity(unit.targets[:h])
        selection.validate_against(unit.targets, h)

        vector = np.asarray(input_state, dtype=np.complex128).reshape(-1)
        if vector.size != p ** h:
            raise InputStateError(f"input has {vector.size} amplitudes, {h} qudits over F_{p} need {p ** h}")
        if abs(np.vdot(vector, vector).real - 1.0) > 1e-6:
            raise InputStateError("input state is not normalized")

        rng = np.random.default_rng(seed)
        transcript = Transcript()
        state = empty_state(p, self.max_amplitudes)
        state.tolerance = self.tolerance
        table = FunctionalTable(p=p, rate=h)
        phase = PhaseFunctional.zero(p, h)

        state, table = run_propagation(program, state, table, rng=rng, transcript=transcript, phase=phase,
                                       on_step=on_step)
        on_stage("propagate", state)
        state, phase = measure_and_fix(state, table, rng=rng, transcript=transcript, phase=phase,
                                       order=measurement_order, first_target=unit.targets[0])
        on_stage("correct", state)
        state, pairs = distill_epr(state, selection, unit.targets, rng=rng, transcript=transcript)
        on_stage("distill", state)

        inputs = [input_role(k) for k in range(1, h + 1)]
        attach(state, vector / np.linalg.norm(vector), [pair.source for pair in pairs], inputs)
        state, delivered = teleport(state, inputs, pairs, rng=rng, transcript=transcript)
        on_stage("teleport", state)

        by_position = sorted(range(h), key=lambda k: selection.permutation[k])
        for k in by_position:
            transcript.log("relabel", selection.target_for(k), "relabel", (delivered[k],), message={
                "qudit": k + 1, "position": selection.permutation[k] + 1, "register": delivered[k],
            })
        value = fidelity(state, vector, [state.index_of(role) for role in delivered])
        logger.info(f"Run on {unit.name} over F_{p}: fidelity {value:.12f}, "
                    f"{program.transmissions} quantum transmissions")
        return RunResult(
            fidelity=value,
            transcript=transcript,
            p=p,
            transmissions=program.transmissions,
            code=code,
            program=program,
            selection=selection,
            delivered=delivered,
            phase=phase,
        )


def run_full(net: Network, input_state, selection: Optional[TargetSelection] = None, seed: int = 0,
             code_seed: int = 0, p: Optional[int] = None, retire_early: Optional[bool] = None) -> RunResult:
    """Module-level shortcut using environment-configured limits"""
    return ProtocolService().run_full(net, input_state, selection, seed=seed, code_seed=code_seed, p=p,
                                      retire_early=retire_early)
