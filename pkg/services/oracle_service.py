"""
Oracle service: brute-force property checks on small instances

Expected states are built here directly with numpy from the statements
being checked; only the end-to-end, cat-state and deferral checks drive the
protocol itself.
"""

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import ImpossibleOutcomeError
from models.network import Network
from models.program import Op, PhaseFunctional, TargetSelection, source_role, target_role
from models.report import PropertyReport
from models.run_config import haar_random_state
from services.coding_service import CodingService, classical_simulate
from services.field_service import choose_field_size
from services.graph_service import expand_capacities, load_network
from services.protocol_service import ProtocolService, measure_and_fix, run_propagation
from services.simulator_service import (
    Basis,
    RegisterLabel,
    StateVector,
    apply_phase,
    clone,
    measure,
    reduced_state,
)

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"
QUANTUM_FIXTURES = ("single_edge", "two_paths", "butterfly", "combination_3_2")
CLASSICAL_FIXTURES = QUANTUM_FIXTURES + ("combination_4_2",)
EXHAUSTIVE_INPUT_LIMIT = 1024
TOLERANCE = 1e-9


def _workers(workers: Optional[int]) -> int:
    return workers if workers is not None else int(os.getenv("QNC_WORKERS", "1"))


def _digits(index: int, p: int, n: int) -> List[int]:
    """Base-p digits of a basis index, most significant first"""
    return [int(d) for d in np.unravel_index(index, [p] * n)] if n else []


def _index(digits: Sequence[int], p: int) -> int:
    value = 0
    for d in digits:
        value = value * p + int(d)
    return value


def _random_amplitudes(rng: np.random.Generator, size: int) -> np.ndarray:
    vector = rng.normal(size=size) + 1j * rng.normal(size=size)
    return vector / np.linalg.norm(vector)


def _aligned_distance(actual: np.ndarray, expected: np.ndarray) -> float:
    """|actual - e^(i phi) expected| minimized over the global phase"""
    overlap = np.vdot(expected, actual)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(actual - phase * expected))


def load_fixture(name: str) -> Network:
    return load_network(FIXTURES_DIR / f"{name}.json")


def fourier_phase_instance(p: int, f: np.ndarray, g: np.ndarray, alpha: np.ndarray) -> List[Tuple[Tuple[int, ...], float]]:
    """
    Check the Fourier-measurement phase rule on one instance, for every outcome

    Builds sum_x alpha_x |f(x)>_A |g(x)>_B, Fourier-measures every B register
    with a forced outcome y and compares what is left on A with
    sum_x omega^(-y.g(x)) alpha_x |f(x)> (normalized, up to global phase).

    Args:
        p: Prime dimension
        f: n_a x k matrix over F_p
        g: n_b x k matrix over F_p
        alpha: p^k amplitudes indexed by x

    Returns:
        (outcome, distance) for every outcome that disagrees
    """
    f, g = np.asarray(f, dtype=np.int64) % p, np.asarray(g, dtype=np.int64) % p
    n_a, k = f.shape
    n_b = g.shape[0]
    n = n_a + n_b
    omega = np.exp(2j * np.pi / p)
    xs = [np.array(_digits(i, p, k)) for i in range(p ** k)]

    lhs = np.zeros(p ** n, dtype=np.complex128)
    for i, x in enumerate(xs):
        lhs[_index(list(f @ x % p) + list(g @ x % p), p)] += alpha[i]
    norm = np.linalg.norm(lhs)
    if norm < TOLERANCE:
        return []
    labels = [RegisterLabel("A", f"A{i}") for i in range(n_a)] + [RegisterLabel("B", f"B{i}") for i in range(n_b)]

    failures = []
    for outcome in itertools.product(range(p), repeat=n_b):
        rhs = np.zeros(p ** n_a, dtype=np.complex128)
        for i, x in enumerate(xs):
            rhs[_index(f @ x % p, p)] += omega ** int(-np.dot(outcome, g @ x % p) % p) * alpha[i]
        rhs_norm = np.linalg.norm(rhs)
        probability = (rhs_norm / norm) ** 2 / p ** n_b

        state = StateVector(p, lhs / norm, labels, tolerance=TOLERANCE)
        try:
            for j, y in enumerate(outcome):
                measure(state, n_a + j, Basis.FOURIER, forced=y)
        except ImpossibleOutcomeError:
            if probability > TOLERANCE:
                failures.append((tuple(outcome), float(probability)))
            continue
        if probability < 1e-12:
            failures.append((tuple(outcome), 0.0))
            continue
        residual = reduced_state(state, list(range(n_a)))
        distance = _aligned_distance(residual, rhs / rhs_norm)
        if distance > TOLERANCE:
            failures.append((tuple(outcome), distance))
    return failures


def fourier_phase_check(n: int = 4, p: int = 2, trials: int = 50, seed: int = 0) -> PropertyReport:
    """Random linear f, g and amplitudes; every outcome of every trial is checked"""
    if n < 2:
        raise ValueError("need at least one register on each side")
    rng = np.random.default_rng(seed)
    report = PropertyReport(property="fourier-phase", instance=f"n={n}, p={p}, {trials} trials")
    for trial in range(trials):
        n_a = int(rng.integers(1, n))
        k = int(rng.integers(1, n + 1))
        f = rng.integers(0, p, size=(n_a, k))
        g = rng.integers(0, p, size=(n - n_a, k))
        alpha = _random_amplitudes(rng, p ** k)
        failures = fourier_phase_instance(p, f, g, alpha)
        report.passed(p ** (n - n_a) - len(failures))
        for outcome, distance in failures:
            report.fail(f"trial {trial}", outcome=list(outcome), distance=distance, f=f.tolist(), g=g.tolist())
    return report


def phase_correction_instance(p: int, b: Sequence[int], alpha: np.ndarray) -> float:
    """
    Build sum_x omega^(b.x) alpha_x |x>, apply Z(-b_i) on register i and
    return the largest amplitude deviation from sum_x alpha_x |x>
    """
    n = len(b)
    omega = np.exp(2j * np.pi / p)
    phased = np.array([
        omega ** (int(np.dot(b, _digits(i, p, n))) % p) * alpha[i] for i in range(p ** n)
    ], dtype=np.complex128)
    state = StateVector(p, phased, [RegisterLabel("", f"x{i}") for i in range(n)])
    for r, coefficient in enumerate(b):
        apply_phase(state, r, -int(coefficient))
    return float(np.max(np.abs(state.amplitudes - alpha)))


def phase_correction_check(n: int = 6, p: int = 3, trials: int = 100, seed: int = 0) -> PropertyReport:
    rng = np.random.default_rng(seed)
    report = PropertyReport(property="phase-correction", instance=f"n={n}, p={p}, {trials} trials")
    for trial in range(trials):
        b = [int(x) for x in rng.integers(0, p, size=n)]
        alpha = _random_amplitudes(rng, p ** n)
        deviation = phase_correction_instance(p, b, alpha)
        if deviation > TOLERANCE:
            report.fail(f"trial {trial}", b=b, deviation=deviation)
        else:
            report.passed()
    return report


def born_frequency_check(state: StateVector, r: int, basis: Basis = Basis.COMPUTATIONAL,
                         trials: int = 10_000, seed: int = 0) -> PropertyReport:
    """Sampled outcome counts stay within 3 sigma of the Born probabilities"""
    rng = np.random.default_rng(seed)
    basis = Basis(basis)
    probabilities = _born_probabilities(state, r, basis)
    counts = np.zeros(state.p, dtype=np.int64)
    for _ in range(trials):
        outcome, _ = measure(clone(state), r, basis, rng)
        counts[outcome.value] += 1
    report = PropertyReport(property="born-frequency", instance=f"register {state.labels[r].role}, {basis.value}, {trials} shots")
    for value, (count, probability) in enumerate(zip(counts, probabilities)):
        sigma = np.sqrt(trials * probability * (1 - probability))
        if abs(count - trials * probability) > 3 * sigma + 1e-12:
            report.fail(f"outcome {value}", count=int(count), expected=float(trials * probability), sigma=float(sigma))
        else:
            report.passed()
    return report


def _born_probabilities(state: StateVector, r: int, basis: Basis) -> np.ndarray:
    """Marginal of |<y|psi>|^2, Fourier outcomes through an explicit inverse DFT matrix"""
    p = state.p
    psi = np.moveaxis(state.tensor(), r, 0).reshape(p, -1)
    if basis is Basis.FOURIER:
        dft = np.array([[np.exp(-2j * np.pi * x * y / p) for x in range(p)] for y in range(p)]) / np.sqrt(p)
        psi = dft @ psi
    weights = (np.abs(psi) ** 2).sum(axis=1)
    return weights / weights.sum()


def default_born_state() -> StateVector:
    """Two qutrits with uneven weights on the first register"""
    amplitudes = np.array([1, 0.5j, 0, 0, 1, 0, 0.5, 0, 1j], dtype=np.complex128)
    amplitudes /= np.linalg.norm(amplitudes)
    return StateVector(3, amplitudes, [RegisterLabel("", "q0"), RegisterLabel("", "q1")])


def classical_code_check(networks: Iterable[Tuple[str, Network]], code_seed: int = 0,
                         p: Optional[int] = None) -> PropertyReport:
    """Every target decodes every input vector (sampled past EXHAUSTIVE_INPUT_LIMIT inputs)"""
    report = PropertyReport(property="classical-decoding", instance="")
    names = []
    coding = CodingService()
    for name, net in networks:
        names.append(name)
        unit = expand_capacities(net)
        field = p if p is not None else choose_field_size(unit)
        code = coding.construct_linear_code(unit, field, code_seed)
        h = code.rate
        if field ** h <= EXHAUSTIVE_INPUT_LIMIT:
            inputs = itertools.product(range(field), repeat=h)
        else:
            rng = np.random.default_rng(code_seed)
            inputs = (tuple(int(x) for x in rng.integers(0, field, size=h)) for _ in range(EXHAUSTIVE_INPUT_LIMIT))
        for a in inputs:
            decoded = classical_simulate(code, a)
            wrong = {t: values for t, values in decoded.items() if values != list(a)}
            if wrong:
                report.fail(f"{name} a={list(a)}", decoded=wrong)
            else:
                report.passed()
    report.instance = ", ".join(names)
    return report


def expected_cat_states(p: int, rate: int, targets: int) -> np.ndarray:
    """prod_k sum_a |a>^(targets + 1) / sqrt(p) over registers S'k, T1,k, ..., T|T|,k"""
    cat = np.zeros(p ** (targets + 1), dtype=np.complex128)
    for a in range(p):
        cat[_index([a] * (targets + 1), p)] = 1 / np.sqrt(p)
    vector = np.ones(1, dtype=np.complex128)
    for _ in range(rate):
        vector = np.kron(vector, cat)
    return vector


def cat_state_check(name: str, net: Network, p: Optional[int] = None, code_seed: int = 0,
                    limit: int = 256, seed: int = 0) -> PropertyReport:
    """
    After measurement and correction the state is exactly |S| cat states,
    for every forced outcome vector (sampled when there are more than `limit`)
    """
    service = ProtocolService()
    unit, code, program = service.prepare(net, p, code_seed)
    p, h, targets = code.p, code.rate, code.targets
    measured = [ins.registers[0] for ins in program.instructions if ins.op is Op.FOURIER_MEASURE]
    expected = expected_cat_states(p, h, len(targets))
    order = [role for k in range(1, h + 1)
             for role in [source_role(k)] + [target_role(j, k) for j in range(1, len(targets) + 1)]]

    total = p ** len(measured)
    if total <= limit:
        outcomes: Iterable = itertools.product(range(p), repeat=len(measured))
    else:
        rng = np.random.default_rng(seed)
        outcomes = (tuple(int(x) for x in rng.integers(0, p, size=len(measured))) for _ in range(limit))

    base = None
    if not program.retire_early:
        base, base_table = run_propagation(program)
    report = PropertyReport(property="cat-states", instance=f"{name} over F_{p}, {len(measured)} measured registers")
    for outcome in outcomes:
        forced = dict(zip(measured, outcome))
        phase = PhaseFunctional.zero(p, h)
        if base is None:
            state, table = run_propagation(program, phase=phase, forced=forced)
        else:
            state, table = clone(base), base_table.model_copy(deep=True)
        state, phase = measure_and_fix(state, table, phase=phase, forced=forced, first_target=targets[0])
        actual = reduced_state(state, [state.index_of(role) for role in order])
        deviation = float(np.max(np.abs(actual - expected)))
        if deviation > TOLERANCE:
            report.fail(f"outcomes {list(outcome)}", deviation=deviation, b=list(phase.b))
        else:
            report.passed()
    return report


def _selections(targets: Sequence[str], rate: int) -> List[TargetSelection]:
    """Every target subset of size `rate` with every permutation"""
    return [
        TargetSelection(targets=subset, permutation=perm)
        for subset in itertools.combinations(targets, rate)
        for perm in itertools.permutations(range(rate))
    ]


def deferral_check(name: str, net: Network, seeds: Sequence[int] = range(5), code_seed: int = 0) -> PropertyReport:
    """The transcript through measurement and correction does not depend on the selection"""
    service = ProtocolService()
    unit, code, program = service.prepare(net, None, code_seed)
    vector = haar_random_state(code.p ** code.rate, 0)
    report = PropertyReport(property="selection-deferral", instance=f"{name}, {len(seeds)} seeds")
    for seed in seeds:
        reference = None
        for selection in _selections(unit.targets, code.rate):
            result = service.execute(unit, code, program, vector, selection, seed=seed)
            prefix = result.transcript.prefix().to_jsonl()
            if reference is None:
                reference = prefix
            if prefix != reference or not prefix:
                report.fail(f"seed {seed}", selection=list(selection.targets),
                            permutation=[k + 1 for k in selection.permutation])
            else:
                report.passed()
    return report


def end_to_end_sweep(networks: Iterable[Tuple[str, Network]], seeds: Sequence[int] = range(20),
                     inputs: int = 5, workers: Optional[int] = None, code_seed: int = 0) -> PropertyReport:
    """
    Fidelity of the delivered state for every network, selection, seed and
    Haar-random input; cases run on a thread pool and aggregate in order
    """
    service = ProtocolService()
    cases = []
    names = []
    for name, net in networks:
        names.append(name)
        unit, code, program = service.prepare(net, None, code_seed)
        vectors = [haar_random_state(code.p ** code.rate, 1000 + i) for i in range(inputs)]
        for selection in _selections(unit.targets, code.rate):
            for seed in seeds:
                for i, vector in enumerate(vectors):
                    cases.append((name, unit, code, program, selection, seed, i, vector))

    def run_case(case):
        name, unit, code, program, selection, seed, i, vector = case
        return service.execute(unit, code, program, vector, selection, seed=seed).fidelity

    with ThreadPoolExecutor(max_workers=_workers(workers)) as executor:
        fidelities = list(executor.map(run_case, cases))

    report = PropertyReport(property="end-to-end-fidelity", instance=", ".join(names))
    for case, value in zip(cases, fidelities):
        name, _, _, _, selection, seed, i, _ = case
        report.observe_fidelity(value)
        if value < 1 - TOLERANCE:
            report.fail(f"{name} seed {seed} input {i}", fidelity=value, selection=list(selection.targets),
                        permutation=[k + 1 for k in selection.permutation])
        else:
            report.passed()
    logger.info(f"End-to-end sweep: {report.cases} runs, min fidelity {report.min_fidelity}")
    return report


def run_suite(workers: Optional[int] = None, quick: bool = False) -> List[PropertyReport]:
    """Every property check on the shipped fixtures, in a fixed order"""
    trials = 10 if quick else 50
    seeds = range(2) if quick else range(20)
    quantum = [(name, load_fixture(name)) for name in QUANTUM_FIXTURES]
    butterfly = load_fixture("butterfly")

    reports = [
        fourier_phase_check(n=4, p=2, trials=trials),
        fourier_phase_check(n=4, p=3, trials=trials),
        phase_correction_check(n=6, p=2, trials=2 * trials),
        phase_correction_check(n=6, p=3, trials=2 * trials),
        born_frequency_check(default_born_state(), 0, Basis.COMPUTATIONAL, trials=2_000 if quick else 10_000),
        born_frequency_check(default_born_state(), 0, Basis.FOURIER, trials=2_000 if quick else 10_000),
        classical_code_check([(name, load_fixture(name)) for name in CLASSICAL_FIXTURES]),
        cat_state_check("butterfly", butterfly),
        deferral_check("butterfly", butterfly, seeds=range(2) if quick else range(5)),
        end_to_end_sweep(quantum, seeds=seeds, inputs=1 if quick else 5, workers=workers),
    ]
    for report in reports:
        log = logger.info if report.ok else logger.error
        log(f"{report.property} [{report.instance}]: {report.cases} cases, {len(report.failures)} failures")
    return reports
