"""Command-line interface: compile, compare, sweep, benchgen.

Exit codes: 0 success, 1 parse error (circuit, machine config or manifest),
2 circuit does not fit the machine, 3 I/O error, 4 some sweep circuits failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .benchgen import BenchSpec, Family, generate
from .circuit import Circuit, CircuitParseError, load_circuit, serialize_circuit
from .compiler import InfeasibleMachineError, compare, compile_circuit
from .machine import CapacityError, ConfigError, Machine, MachineState, load_machine
from .policy import DirectionPolicy, IonSelection, PolicyConfig, RebalancePolicy
from .report import (
    aggregate,
    comparison_row,
    dumps,
    format_aggregate_table,
    format_rows_table,
)

log = logging.getLogger("ionroute")

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_IO, EXIT_PARTIAL = 0, 1, 2, 3, 4

PRESETS = {"baseline": PolicyConfig.baseline, "optimized": PolicyConfig.optimized}


class ManifestError(ValueError):
    pass


def _on_off(value: str) -> bool:
    if value.lower() in ("on", "true", "1", "yes"):
        return True
    if value.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("policy (defaults: optimized configuration)")
    g.add_argument("--policy", choices=[d.value for d in DirectionPolicy], default="futureops")
    g.add_argument("--proximity", type=int, default=6)
    g.add_argument("--reorder", type=_on_off, default=True, metavar="{on,off}")
    g.add_argument("--rebalance", choices=[r.value for r in RebalancePolicy], default="nnf")
    g.add_argument("--ion-select", choices=[i.value for i in IonSelection], default="maxscore")
    g.add_argument("--fallback-flip", action="store_true",
                   help="move the other ion when the favourable destination is full")


def _add_machine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--machine", type=Path, help="machine config (INI); default: L6, capacity 17, comm 2")
    p.add_argument("--mapping", choices=["balanced", "fill"], default="balanced",
                   help="initial placement: balanced greedy (default) or fill traps in order")
    p.add_argument("--placement", help="initial ion placement, traps split by '/', ions by ',' (e.g. 0,1/2,3,4)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--omit-timing", action="store_true",
                   help="write compile_time_s as null so reports are byte-reproducible")


def policy_from_args(args: argparse.Namespace) -> PolicyConfig:
    return PolicyConfig(
        direction_policy=DirectionPolicy(args.policy),
        proximity_threshold=args.proximity,
        reorder_enabled=args.reorder,
        rebalance_policy=RebalancePolicy(args.rebalance),
        ion_selection=IonSelection(args.ion_select),
        fallback_flip=args.fallback_flip,
    )


def _machine(path: Path | None) -> Machine:
    return load_machine(path) if path else Machine()


def parse_placement(text: str | None, machine: Machine) -> MachineState | None:
    if text is None:
        return None
    try:
        chains = [[int(i) for i in part.split(",") if i.strip()] for part in text.split("/")]
        return MachineState(machine, chains)
    except CapacityError as exc:
        raise InfeasibleMachineError(f"--placement: {exc}") from exc
    except ValueError as exc:
        raise ManifestError(f"bad --placement {text!r}: {exc}") from exc


def _write(path: Path, text: str) -> None:
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_compile(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    machine = _machine(args.machine)
    config = policy_from_args(args)
    result = compile_circuit(circuit, machine, config, initial_state=parse_placement(args.placement, machine),
                             balanced_mapping=args.mapping == "balanced")
    report = result.report(args.omit_timing)
    report["benchmark"] = Path(args.circuit).stem
    report["seed"] = args.seed
    if args.json:
        _write(args.json, dumps(report))
    if args.trace:
        _write(args.trace, result.format_trace())
    timing = "-" if args.omit_timing else f"{result.compile_time:.4f}s"
    print(f"shuttles: {result.shuttle_count}  fidelity: {result.program_fidelity:.6g}  "
          f"makespan: {result.makespan:.6g}s  compile_time: {timing}")
    return EXIT_OK


def _bench_specs(args: argparse.Namespace) -> list[BenchSpec]:
    if not args.bench:
        return []
    family = Family(args.bench)
    sizes = args.qubits or [60]
    specs = []
    for n in sizes:
        if family is Family.RANDOM:
            specs += [BenchSpec(family, n, args.gates, seed=args.seed + i) for i in range(args.count)]
        else:
            specs.append(BenchSpec(family, n, rounds=args.rounds))
    return specs


def cmd_compare(args: argparse.Namespace) -> int:
    machine = _machine(args.machine)
    candidate = policy_from_args(args)
    against = PRESETS[args.against]()
    labels = [args.against, "candidate"]
    placement = parse_placement(args.placement, machine)
    sources = [(Path(p).stem, load_circuit(p), None, None) for p in args.circuits]
    for spec in _bench_specs(args):
        group = f"{spec.family.value}-q{spec.num_qubits}"
        sources.append((spec.name, generate(spec), spec.seed if spec.family is Family.RANDOM else None, group))
    if not sources:
        raise ManifestError("compare needs circuit files or --bench")
    rows = []
    for name, circuit, seed, group in sources:
        cmp = compare(circuit, machine, [against, candidate], labels, name=name, initial_state=placement,
                      balanced_mapping=args.mapping == "balanced")
        rows.append(comparison_row(cmp, circuit.num_qubits, circuit.num_two_qubit_gates,
                                   args.omit_timing, seed, group))
    print(format_rows_table(rows, labels), end="")
    agg = aggregate(rows, labels)
    if len(rows) > 1:
        print()
        print(format_aggregate_table(agg), end="")
    if args.json:
        _write(args.json, dumps({"rows": rows, "aggregate": agg}))
    return EXIT_OK


@dataclass
class RunManifest:
    """What a sweep compiles: circuit files and/or bench specs, under named policy configs."""

    inputs: list[str] = field(default_factory=list)
    bench: list[BenchSpec] = field(default_factory=list)
    configs: dict[str, PolicyConfig] = field(default_factory=dict)
    machine: str | None = None
    output_dir: str = "sweep-out"
    seed: int = 0
    balanced_mapping: bool = True

    def __post_init__(self):
        if not self.inputs and not self.bench:
            raise ManifestError("manifest needs at least one input or bench spec")
        if not self.configs:
            raise ManifestError("manifest needs at least one config")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "RunManifest":
        try:
            seed = int(data.get("seed", 0))
            bench = []
            for b in data.get("bench", []):
                family = Family(b["family"])
                sizes = b.get("sizes", [b.get("num_qubits", 60)])
                for n in sizes:
                    if family is Family.RANDOM:
                        seeds = b.get("seeds")
                        if seeds is None:
                            start = int(b.get("seed", seed))
                            seeds = range(start, start + int(b.get("count", 1)))
                        bench += [BenchSpec(family, int(n), int(b.get("num_2q_gates", 1438)), seed=int(s))
                                  for s in seeds]
                    else:
                        bench.append(BenchSpec(family, int(n), rounds=int(b.get("rounds", 1))))
            raw_configs = data.get("configs", {"baseline": "baseline", "optimized": "optimized"})
            configs = {}
            for name, c in raw_configs.items():
                configs[name] = PRESETS[c]() if isinstance(c, str) else PolicyConfig.from_dict(c)
            machine = data.get("machine")
            if machine is not None:
                machine = str((base_dir / machine))
            inputs = [str(base_dir / p) for p in data.get("inputs", [])]
            return cls(inputs=inputs, bench=bench, configs=configs, machine=machine,
                       output_dir=data.get("output_dir", "sweep-out"), seed=seed,
                       balanced_mapping=data.get("mapping", "balanced") == "balanced")
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad manifest: {exc}") from exc


def _sweep_job(job: tuple) -> dict:
    name, source, group, seed, machine, labels, configs, omit_timing, balanced = job
    try:
        circuit = source if isinstance(source, Circuit) else (
            generate(source) if isinstance(source, BenchSpec) else load_circuit(source))
        if len(configs) == 1:
            r = compile_circuit(circuit, machine, configs[0], balanced_mapping=balanced)
            rep = r.report(omit_timing)
            rep.update(benchmark=name, seed=seed)
            return {"benchmark": name, "group": group, "qubits": circuit.num_qubits,
                    "gates_2q": circuit.num_two_qubit_gates, "seed": seed,
                    "results": {labels[0]: rep}, "deltas": {}}
        cmp = compare(circuit, machine, configs, labels, name=name, balanced_mapping=balanced)
        return comparison_row(cmp, circuit.num_qubits, circuit.num_two_qubit_gates, omit_timing, seed, group)
    except Exception as exc:  # reported per circuit, sweep continues
        return {"benchmark": name, "group": group, "qubits": 0, "gates_2q": 0, "seed": seed,
                "results": {}, "error": f"{type(exc).__name__}: {exc}"}


def _workers() -> int:
    env = os.environ.get("IONROUTE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(manifest: RunManifest, omit_timing: bool = False) -> tuple[list[dict], dict]:
    machine = _machine(Path(manifest.machine) if manifest.machine else None)
    labels = list(manifest.configs)
    configs = [manifest.configs[k] for k in labels]
    jobs = []
    for path in manifest.inputs:
        jobs.append((Path(path).stem, path, Path(path).stem, None, machine, labels, configs,
                     omit_timing, manifest.balanced_mapping))
    for spec in manifest.bench:
        seed = spec.seed if spec.family is Family.RANDOM else None
        jobs.append((spec.name, spec, f"{spec.family.value}-q{spec.num_qubits}", seed, machine,
                     labels, configs, omit_timing, manifest.balanced_mapping))
    workers = min(_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    return rows, aggregate(rows, labels)


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.manifest:
        try:
            data = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
        manifest = RunManifest.from_dict(data, Path(args.manifest).parent)
        if args.out:
            manifest.output_dir = str(args.out)
    else:
        manifest = RunManifest.from_dict({
            "bench": [{"family": "random", "sizes": args.sizes, "count": args.count,
                       "num_2q_gates": args.gates, "seed": args.seed}],
            "seed": args.seed,
            "output_dir": str(args.out or "sweep-out"),
            "mapping": args.mapping,
        })
        if args.machine:
            manifest.machine = str(args.machine)
    rows, agg = run_sweep(manifest, args.omit_timing)
    out = Path(manifest.output_dir)
    _write(out / "rows.json", dumps(rows))
    _write(out / "aggregate.json", dumps(agg))
    table = format_aggregate_table(agg)
    _write(out / "table.txt", table)
    print(table, end="")
    failed = [r for r in rows if "error" in r]
    for r in failed:
        log.error("%s failed: %s", r["benchmark"], r["error"])
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_benchgen(args: argparse.Namespace) -> int:
    spec = BenchSpec(Family(args.family), args.qubits, args.gates, seed=args.seed, rounds=args.rounds)
    text = f"# {spec.name} seed={spec.seed}\n" + serialize_circuit(generate(spec))
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionroute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile one circuit and report shuttles/fidelity/timing")
    p.add_argument("circuit", type=Path)
    _add_machine_flags(p)
    _add_policy_flags(p)
    p.add_argument("--json", type=Path, help="write the JSON report here")
    p.add_argument("--trace", type=Path, help="write the primitive trace here")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("compare", help="compare a policy config against a preset")
    p.add_argument("circuits", nargs="*", type=Path)
    _add_machine_flags(p)
    _add_policy_flags(p)
    p.add_argument("--against", choices=sorted(PRESETS), default="baseline")
    p.add_argument("--bench", choices=[f.value for f in Family])
    p.add_argument("--qubits", type=int, nargs="+")
    p.add_argument("--gates", type=int, default=1438)
    p.add_argument("--count", type=int, default=1, help="random circuits per size (seeds seed..seed+count-1)")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--json", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="compile a benchmark suite under several configs")
    p.add_argument("--manifest", type=Path, help="JSON run manifest")
    p.add_argument("--sizes", type=int, nargs="+", default=[60, 65, 70, 75])
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--gates", type=int, default=1438)
    p.add_argument("--out", type=Path)
    _add_machine_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("benchgen", help="write a generated benchmark circuit")
    p.add_argument("--family", choices=[f.value for f in Family], default="random")
    p.add_argument("--qubits", type=int, default=60)
    p.add_argument("--gates", type=int, default=1438)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_benchgen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CircuitParseError, ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleMachineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
