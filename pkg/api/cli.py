"""
Command-line handlers: check, code, run, demo-butterfly, verify, history
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from pydantic import ValidationError

from models.database import DATABASE_URL, make_session_factory
from models.errors import (
    CycleError,
    FieldSizeError,
    InfeasibleNetworkError,
    InputStateError,
    NetworkSchemaError,
    QuantumNetworkError,
    RunConfigError,
    SelectionError,
    UnknownNodeError,
)
from models.program import Op, source_role, target_role
from models.run_config import InputSpec, RunConfig
from services.coding_service import CodingService
from services.field_service import choose_field_size
from services.graph_service import expand_capacities, load_network, multicast_feasible
from services.oracle_service import FIXTURES_DIR, run_suite
from services.protocol_service import ProtocolService
from services.simulator_service import snapshot, snapshot_matches, snapshot_to_json
from services.storage_service import RunStorageService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

USAGE_ERRORS = (NetworkSchemaError, UnknownNodeError, CycleError, SelectionError, InputStateError,
                FieldSizeError, RunConfigError)

# Initialize services
storage_service = RunStorageService()


def _emit(args, text: str, payload) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


def _session(args):
    factory = make_session_factory(args.database or DATABASE_URL)
    return factory()


def handle_check(args) -> int:
    """Multicast feasibility with per-target max-flow"""
    net = load_network(args.network)
    result = multicast_feasible(expand_capacities(net))
    _emit(args, result.describe(), result.to_dict())
    return EXIT_OK if result.feasible else EXIT_FAILURE


def handle_code(args) -> int:
    """Construct a linear code; print it or write it with --out"""
    net = load_network(args.network)
    unit = expand_capacities(net)
    p = args.field if args.field is not None else choose_field_size(unit)
    code = CodingService().construct_linear_code(unit, p, args.seed)
    text = code.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote linear code to {args.out}")
        _emit(args, f"code over F_{p} for {code.network} written to {args.out} "
                    f"({code.attempts} attempt(s))", {"p": p, "attempts": code.attempts, "out": args.out})
    else:
        print(text)
    return EXIT_OK


def handle_run(args) -> int:
    """End-to-end protocol run; writes the transcript as JSON lines"""
    input_spec = InputSpec.parse(args.input)
    try:
        config = RunConfig(
            network_path=Path(args.network),
            field=args.field,
            code_seed=args.code_seed,
            seed=args.seed,
            select=args.select,
            perm=args.perm,
            input=input_spec,
            retire_early=True if args.retire_early else None,
        )
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors())
        raise RunConfigError(f"invalid run options: {problems}") from e
    net = load_network(config.network_path)
    service = ProtocolService()
    unit, code, program = service.prepare(net, config.field, config.code_seed, config.retire_early)
    selection = config.selection(unit.targets[:code.rate])
    vector = config.input.vector(code.p, code.rate)
    result = service.execute(unit, code, program, vector, selection, seed=config.seed)

    transcript_path = Path(args.transcript or f"{config.network_path.stem}.transcript.jsonl")
    transcript_path.write_text(result.transcript.to_jsonl(), encoding="utf-8")
    logger.info(f"Transcript written to {transcript_path}")

    if args.record:
        with _session(args) as db:
            record = storage_service.save_run(db, {
                "network": unit.name,
                "field_size": code.p,
                "targets": list(selection.targets),
                "permutation": [k + 1 for k in selection.permutation],
                "seed": config.seed,
                "code_seed": config.code_seed,
                "input_spec": config.input.describe(),
                "retire_early": program.retire_early,
                "fidelity": result.fidelity,
                "transmissions": result.transmissions,
                "transcript": result.transcript.to_jsonl(),
            })
            logger.info(f"Recorded run {record.id}")

    _emit(args, f"fidelity: {result.fidelity:.9f}, transmissions: {result.transmissions}", {
        "network": unit.name,
        "p": code.p,
        "fidelity": result.fidelity,
        "transmissions": result.transmissions,
        "targets": list(selection.targets),
        "permutation": [k + 1 for k in selection.permutation],
        "transcript": str(transcript_path),
    })
    return EXIT_OK if result.fidelity >= 1 - service.tolerance else EXIT_FAILURE


def _load_golden(name: str) -> Optional[dict]:
    path = FIXTURES_DIR / "golden" / f"{name}.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def butterfly_walkthrough(input_spec: str = "random:7", select: Optional[str] = None, perm: Optional[str] = None,
                          seed: int = 0) -> List[Dict]:
    """
    Run the butterfly over F_2 and capture the state after the sources fan
    out, after phase correction (two cat states), after distillation (two
    EPR pairs) and after teleportation

    Returns:
        One dict per stage: name, registers, snapshot, golden match (or None)
    """
    net = load_network(FIXTURES_DIR / "butterfly.json")
    service = ProtocolService()
    unit, code, program = service.prepare(net, 2, 0, retire_early=False)
    config = RunConfig(network_path=FIXTURES_DIR / "butterfly.json", select=select, perm=perm,
                       input=InputSpec.parse(input_spec), seed=seed)
    selection = config.selection(unit.targets[:code.rate])
    vector = config.input.vector(code.p, code.rate)
    h, n_targets = code.rate, len(unit.targets)

    last_source_step = max(i for i, ins in enumerate(program.instructions)
                           if ins.node in unit.sources and ins.op is not Op.FOURIER_MEASURE)
    fan_out_registers = []
    for k, source in enumerate(unit.sources, 1):
        fan_out_registers.append(source_role(k))
        fan_out_registers += [ins.registers[0] for ins in program.of(Op.TRANSMIT) if ins.node == source]
    cat_registers = [role for k in range(1, h + 1)
                     for role in [source_role(k)] + [target_role(j, k) for j in range(1, n_targets + 1)]]
    epr_registers = [role for k in range(1, h + 1) for role in (
        source_role(k), target_role(unit.targets.index(selection.target_for(k - 1)) + 1, k))]

    stages: List[Dict] = []

    def capture(name: str, state, registers: List[str]) -> None:
        entries = snapshot(state, [state.index_of(role) for role in registers])
        golden = _load_golden(f"butterfly_{name}")
        stages.append({
            "stage": name,
            "registers": registers,
            "amplitudes": snapshot_to_json(entries),
            "matches_golden": None if golden is None else snapshot_matches(entries, golden["amplitudes"]),
        })

    def on_step(index, instruction, state) -> None:
        if index == last_source_step:
            capture("fanout", state, fan_out_registers)

    def on_stage(name, state) -> None:
        if name == "correct":
            capture("cat", state, cat_registers)
        elif name == "distill":
            capture("epr", state, epr_registers)

    result = service.execute(unit, code, program, vector, selection, seed=seed, on_step=on_step, on_stage=on_stage)
    stages.append({
        "stage": "teleport",
        "registers": result.delivered,
        "fidelity": result.fidelity,
        "transmissions": result.transmissions,
    })
    return stages


def handle_demo_butterfly(args) -> int:
    """Print the butterfly walkthrough stage by stage"""
    stages = butterfly_walkthrough(args.input, args.select, args.perm, args.seed)
    if args.json:
        print(json.dumps(stages, indent=2))
    else:
        for stage in stages:
            print(f"== {stage['stage']}: {', '.join(stage['registers'])}")
            if "amplitudes" in stage:
                for index, re, im in stage["amplitudes"]:
                    print(f"   |{index}>  {re:+.6f}{im:+.6f}j")
                if stage["matches_golden"] is not None:
                    print(f"   golden: {'match' if stage['matches_golden'] else 'MISMATCH'}")
            else:
                print(f"   fidelity: {stage['fidelity']:.9f}, transmissions: {stage['transmissions']}")
    mismatched = [s["stage"] for s in stages if s.get("matches_golden") is False]
    if mismatched:
        logger.error(f"Snapshots differ from golden fixtures: {mismatched}")
        return EXIT_FAILURE
    return EXIT_OK


def handle_verify(args) -> int:
    """Run the property suite and print a summary table"""
    reports = run_suite(workers=args.workers, quick=args.quick)
    if args.record:
        with _session(args) as db:
            for report in reports:
                storage_service.save_report(db, report)
    if args.json:
        print(json.dumps([report.model_dump() for report in reports], indent=2))
    else:
        print(f"{'property':<22} {'instance':<36} {'cases':>7} {'failures':>8}")
        for report in reports:
            print(report.summary_row())
    return EXIT_OK if all(report.ok for report in reports) else EXIT_FAILURE


def handle_history(args) -> int:
    """List recorded runs, newest first"""
    with _session(args) as db:
        runs = storage_service.list_runs(db, limit=args.limit, network=args.network)
        rows = [{
            "id": run.id,
            "created_at": run.created_at.isoformat() if run.created_at else None,
            "network": run.network,
            "p": run.field_size,
            "targets": run.targets,
            "permutation": run.permutation,
            "seed": run.seed,
            "fidelity": run.fidelity,
            "transmissions": run.transmissions,
        } for run in runs]
        statistics = storage_service.run_statistics(db)
    if args.json:
        print(json.dumps({"runs": rows, "statistics": statistics}, indent=2))
    else:
        for row in rows:
            print(f"#{row['id']:<4} {row['network']:<20} F_{row['p']:<3} {row['targets']:<16} "
                  f"perm {row['permutation']:<8} seed {row['seed']:<5} fidelity {row['fidelity']:.9f} "
                  f"transmissions {row['transmissions']}")
        print(f"{statistics.get('total_runs', 0)} run(s) recorded")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnetcode", description="Quantum multicast network coding simulator")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--log-level", default=None, help="root logging level (default QNC_LOG_LEVEL or INFO)")
    parser.add_argument("--database", default=None, help="run history database URL (default QNC_DATABASE_URL)")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="max-flow feasibility of a network")
    check.add_argument("network")
    check.set_defaults(handler=handle_check)

    code = commands.add_parser("code", help="construct a linear network code")
    code.add_argument("network")
    code.add_argument("--field", type=int, default=None)
    code.add_argument("--seed", type=int, default=0)
    code.add_argument("--out", default=None)
    code.set_defaults(handler=handle_code)

    run = commands.add_parser("run", help="simulate the quantum multicast protocol")
    run.add_argument("network")
    run.add_argument("--select", default=None, help="comma separated targets T0")
    run.add_argument("--perm", default=None, help="1-based permutation of the selection")
    run.add_argument("--input", default="zero", help="zero, plus, random:<seed> or amplitudes a,b,...")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--code-seed", type=int, default=0)
    run.add_argument("--field", type=int, default=None)
    run.add_argument("--retire-early", action="store_true")
    run.add_argument("--transcript", default=None)
    run.add_argument("--record", action="store_true")
    run.set_defaults(handler=handle_run)

    demo = commands.add_parser("demo-butterfly", help="butterfly walkthrough with state snapshots")
    demo.add_argument("--input", default="random:7")
    demo.add_argument("--select", default=None)
    demo.add_argument("--perm", default=None)
    demo.add_argument("--seed", type=int, default=0)
    demo.set_defaults(handler=handle_demo_butterfly)

    verify = commands.add_parser("verify", help="run the property suite")
    verify.add_argument("--workers", type=int, default=None)
    verify.add_argument("--quick", action="store_true")
    verify.add_argument("--record", action="store_true")
    verify.set_defaults(handler=handle_verify)

    history = commands.add_parser("history", help="list recorded runs")
    history.add_argument("--limit", type=int, default=20)
    history.add_argument("--network", default=None)
    history.set_defaults(handler=handle_history)
    return parser


def dispatch(args, handler: Optional[Callable] = None) -> int:
    """Run a handler and map domain errors to exit codes"""
    handler = handler or args.handler
    try:
        return handler(args)
    except USAGE_ERRORS as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleNetworkError as e:
        logger.error(f"{args.command}: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_FAILURE
    except QuantumNetworkError as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
