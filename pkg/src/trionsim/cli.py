"""Command-line front end: simulations, tables and plot-ready data with a run manifest.

Exit codes: 0 success, 2 validation error, 3 numerical failure.  Errors are
printed to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, fit, ideal, metrics, protocol, scaling, tomography, trion, zpg
from .qcore import density_from_dict, density_to_dict, random_density

OUT_ENV = "TRIONSIM_OUT"
SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: list
    seed: int
    samples: dict
    out_dir: str
    version: str = __version__
    schema: int = SCHEMA_VERSION
    wall_clock_s: float = 0.0
    artifacts: dict = field(default_factory=dict)


class Run:
    """Collects artifacts for one command and writes them with checksums."""

    def __init__(self, args, argv):
        self.out = Path(args.out or os.environ.get(OUT_ENV) or "trionsim-out")
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(args.command, list(argv), [], args.seed, {}, str(self.out))
        self.t0 = time.perf_counter()

    def input(self, path) -> Path:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"input file not found: {path}")
        self.manifest.inputs.append({"path": str(p), "sha256": _sha(p.read_bytes())})
        return p

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.manifest.artifacts[name] = _sha(data)

    def finish(self) -> None:
        self.manifest.wall_clock_s = round(time.perf_counter() - self.t0, 3)
        (self.out / "manifest.json").write_text(json.dumps(asdict(self.manifest), indent=2, sort_keys=True) + "\n")


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def load_params(spec: str, run: Run | None = None) -> trion.TrionParams:
    named = {"fitted": trion.TrionParams.fitted,
             "ideal": trion.TrionParams.ideal, "near-term": scaling.near_term_params}
    if spec in named:
        return named[spec]()
    path = run.input(spec) if run else Path(spec)
    return trion.TrionParams.load(path)


def load_program(spec: str, run: Run, p: trion.TrionParams) -> protocol.PulseProgram:
    if spec in protocol.PRESETS:
        tau_pi = protocol.calibrated_pi_delay(p) if spec == "visibility-scan" else None
        return protocol.preset(spec, p.tau_ex, p.tau_osrp, tau_pi=tau_pi)
    return protocol.PulseProgram.load(run.input(spec))


# -- subcommands -----------------------------------------------------------------------

def cmd_simulate(args, run: Run) -> None:
    p = load_params(args.params, run)
    prog = load_program(args.program, run, p).with_herald(args.herald)
    if args.time is not None:
        prog = protocol.PulseProgram(prog.events, prog.herald_basis, prog.readout_basis,
                                     args.time * 1e-3, prog.name)
    run.manifest.samples["overhauser"] = args.samples
    js = protocol.overhauser_average(p, prog, args.samples, args.seed, args.osrp_mode)
    run.write("state.json", _json(density_to_dict(js.rho)))
    report = {"program": prog.to_doc(), "herald_probability": js.probability}
    try:
        rep = metrics.four_partite_fidelity(js, prog, p)
        report["fidelity"] = asdict(rep)
    except (ideal.SequenceError, metrics.MetricError, ValueError) as exc:
        report["fidelity"] = None
        report["note"] = f"no ideal target: {exc}"
    if js.n_photons >= 3:
        pairs = {}
        for ro in "RL":
            f2, c, prob = metrics.two_photon_fidelity(js, prog, ro)
            pairs[ro] = {"F2": f2, "C": c, "probability": prob}
        report["readout"] = pairs
    run.write("report.json", _json(report))


def _parse_gates(spec: str, run: Run) -> tuple[list, str]:
    if spec in ideal.PROTOCOL_GATES:
        return list(ideal.PROTOCOL_GATES[spec]), spec
    doc = yaml.safe_load(run.input(spec).read_text())
    gates = []
    for g in doc.get("gates", []):
        kind = g["kind"]
        if kind == "Es":
            gates.append(ideal.Es())
        elif kind in ("Ry", "Rz"):
            ang = float(g["angle_pi"]) * math.pi
            gates.append(ideal.Ry(ang) if kind == "Ry" else ideal.Rz(ang))
        elif kind in ("Z", "H"):
            gates.append(ideal.Z() if kind == "Z" else ideal.H())
        elif kind == "Zp":
            gates.append(ideal.Zp(int(g["index"])))
        else:
            raise UsageError(f"unknown gate kind {kind!r}")
    return gates, doc.get("name", "")


def cmd_ideal(args, run: Run) -> None:
    gates, name = _parse_gates(args.gates, run)
    init = "up" if args.herald == "R" else "down"
    ket = ideal.ideal_protocol_state(gates, init)
    doc = {"labels": list(ket.labels), "dims": list(ket.dims),
           "re": ket.amplitudes.real.tolist(), "im": ket.amplitudes.imag.tolist()}
    if name in ideal.PROTOCOL_GATES:
        try:
            doc["overlap_with_closed_form"] = ideal.overlap(ket, ideal.closed_form_state(name, init))
        except ideal.SequenceError:
            pass
    run.write("statevector.json", _json(doc))


def cmd_fidelity_table(args, run: Run) -> None:
    p = load_params(args.params, run)
    names = ("lc4", "ghz4", "rlc1", "rlc2") if args.preset == "all" else tuple(args.preset.split(","))
    run.manifest.samples.update(overhauser=args.samples, parameter_sets=args.param_samples)
    rows = metrics.fidelity_table(p, names, args.samples, args.seed, args.param_samples,
                                  args.param_overhauser)
    run.write("fidelity_table.csv", metrics.table_to_csv(rows))


def cmd_visibility_scan(args, run: Run) -> None:
    p = load_params(args.params, run)
    if args.points < 1:
        raise UsageError("--points must be positive")
    phis = np.linspace(0.0, args.max_phi_pi * math.pi, args.points)
    run.manifest.samples["overhauser"] = args.samples
    v = metrics.visibility_scan(p, phis, args.samples, args.seed)
    rows = [(float(a / math.pi), float(b)) for a, b in zip(phis, v)]
    run.write("visibility.csv", _csv(("phi2_pi", "V"), rows))
    if args.points >= 3:
        c0, amp, phase = metrics.fit_sinusoid(phis, v)
        run.write("visibility_fit.json", _json({"offset": c0, "amplitude": amp, "phase": phase}))


def _range(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise UsageError(f"range must be start:stop:step, got {spec!r}") from exc
    if step <= 0 or stop < start:
        raise UsageError("range needs step > 0 and stop >= start")
    return np.arange(start, stop + step / 2, step)


def cmd_sz_trace(args, run: Run) -> None:
    p = load_params(args.params, run)
    run.manifest.samples["overhauser"] = args.samples
    if args.osrp_scan:
        thetas = _range(args.osrp_scan) * math.pi
        sz = protocol.osrp_power_scan(p, args.delay * 1e-3, thetas, args.samples, args.seed)
        run.write("sz_osrp.csv", _csv(("theta_pi", "Sz"), [(float(t / math.pi), float(s))
                                                            for t, s in zip(thetas, sz)]))
        return
    delays = _range(args.delays) * 1e-3
    theta = None if args.osrp_theta is None else args.osrp_theta * math.pi
    sz = protocol.spin_sz_trace(p, delays, theta, args.samples, args.seed)
    run.write("sz_trace.csv", _csv(("delay_ps", "Sz"), [(float(d * 1e3), float(s))
                                                        for d, s in zip(delays, sz)]))


def cmd_fit(args, run: Run) -> None:
    if args.config:
        cfg = fit.FitConfig.load(run.input(args.config))
    else:
        truth = load_params(args.params, run)
        # by default the data come from the same Overhauser draws as the fit, so the
        # truth is an exact zero of the objective
        n_t = args.samples if args.target_samples is None else args.target_samples
        seed_t = args.seed if args.target_seed is None else args.target_seed
        targets = fit.synthetic_targets(truth, n_samples=n_t, seed=seed_t)
        free = [s.strip() for s in args.free.split(",")]
        start = truth
        cfg = fit.FitConfig(targets, fit.default_bounds(start, free), start, args.samples,
                            args.restarts, args.seed, subsets=args.subsets)
    run.manifest.samples.update(overhauser=cfg.n_samples, restarts=cfg.restarts)
    res = fit.fit_parameters(cfg)
    run.write("fit_result.json", _json(res.to_doc()))
    run.write("fit_table.csv", res.to_csv())


def cmd_tomo_roundtrip(args, run: Run) -> None:
    truth = None
    if args.counts:
        table = tomography.CountTable.from_csv(run.input(args.counts).read_text())
    else:
        if args.state:
            truth = density_from_dict(json.loads(run.input(args.state).read_text()))
        else:
            truth = random_density((2,) * args.qubits, np.random.default_rng(args.seed))
        n = len(truth.dims)
        shots = None if args.shots == 0 else args.shots
        table = tomography.simulate_counts(truth, tomography.complete_settings(n), shots, args.seed)
        run.manifest.samples["shots_per_setting"] = args.shots
        run.write("counts.csv", table.to_csv())
    rec = tomography.reconstruct(table)
    run.write("reconstructed.json", _json(density_to_dict(rec)))
    report = {"settings": len(table.settings()), "total_counts": float(table.total),
              "min_eigenvalue": float(np.linalg.eigvalsh(rec.entries).min())}
    if truth is not None:
        report["trace_distance"] = tomography.trace_distance(rec, truth)
        report["fidelity"] = metrics.uhlmann_fidelity(rec, truth)
    run.write("report.json", _json(report))


def cmd_scaling(args, run: Run) -> None:
    p = load_params(args.params, run)
    photons = list(range(2, args.max_photons + 1, args.step))
    run.manifest.samples["overhauser"] = args.samples
    rows, fits = [], {}
    for kind in args.kinds.split(","):
        f = scaling.scaling_curve(p, kind, photons, args.samples, args.seed)
        rows += [(kind, n, float(v)) for n, v in zip(photons, f)]
        lf = scaling.log_linear_fit(photons, f)
        fits[kind] = asdict(lf)
    run.write("scaling.csv", _csv(("kind", "photons", "fidelity"), rows))
    cat, err = scaling.chain_fidelity(p, scaling.caterpillar_kinds(scaling.CATERPILLAR_10),
                                      args.samples, args.seed)
    fits["caterpillar10"] = {"fidelity": cat, "stderr": err,
                             "pendants": list(scaling.CATERPILLAR_10)}
    run.write("scaling_fit.json", _json(fits))


def cmd_replay(args, run: Run) -> None:
    raise UsageError("replay is handled before dispatch")


COMMANDS = {
    "simulate": cmd_simulate, "ideal": cmd_ideal, "fidelity-table": cmd_fidelity_table,
    "visibility-scan": cmd_visibility_scan, "sz-trace": cmd_sz_trace, "fit": cmd_fit,
    "tomo-roundtrip": cmd_tomo_roundtrip, "scaling": cmd_scaling,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="trionsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./trionsim-out)")
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate a pulse program")
    s.add_argument("--program", default="lc4", help="preset name or program YAML")
    s.add_argument("--params", default="fitted")
    s.add_argument("--herald", choices=("R", "L"), default="R")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--time", type=float, help="evaluation time after the last pulse, ps")
    s.add_argument("--osrp-mode", choices=protocol.OSRP_MODES, default="post-selected")

    s = sub.add_parser("ideal", parents=[common], help="ideal statevector of a gate list")
    s.add_argument("--gates", default="lc4", help="lc4, ghz4, rlc1, rlc2 or gate YAML")
    s.add_argument("--herald", choices=("R", "L"), default="R")

    s = sub.add_parser("fidelity-table", parents=[common], help="two- and four-partite fidelities")
    s.add_argument("--params", default="fitted")
    s.add_argument("--preset", default="all")
    s.add_argument("--samples", type=int, default=300)
    s.add_argument("--param-samples", type=int, default=0)
    s.add_argument("--param-overhauser", type=int, default=100)

    s = sub.add_parser("visibility-scan", parents=[common], help="visibility versus phi2")
    s.add_argument("--params", default="fitted")
    s.add_argument("--points", type=int, default=31)
    s.add_argument("--max-phi-pi", type=float, default=3.0)
    s.add_argument("--samples", type=int, default=100)

    s = sub.add_parser("sz-trace", parents=[common], help="conditional S_z traces")
    s.add_argument("--params", default="fitted")
    s.add_argument("--delays", default="100:8000:50", help="start:stop:step in ps")
    s.add_argument("--osrp-theta", type=float, help="OSRP angle in units of pi at mid-delay")
    s.add_argument("--osrp-scan", help="start:stop:step of OSRP angles in units of pi")
    s.add_argument("--delay", type=float, default=600.0, help="pulse delay for --osrp-scan, ps")
    s.add_argument("--samples", type=int, default=100)

    s = sub.add_parser("fit", parents=[common], help="fit parameters to target states")
    s.add_argument("--config", help="FitConfig YAML; default fits synthetic targets")
    s.add_argument("--params", default="fitted", help="truth for synthetic targets")
    s.add_argument("--free", default="g_e,b_oh,lambda_osrp")
    s.add_argument("--samples", type=int, default=50)
    s.add_argument("--target-samples", type=int, help="Overhauser draws for synthetic data")
    s.add_argument("--target-seed", type=int, help="seed for synthetic data (default --seed)")
    s.add_argument("--restarts", type=int, default=3)
    s.add_argument("--subsets", choices=("leave-one-out", "none"), default="leave-one-out")

    s = sub.add_parser("tomo-roundtrip", parents=[common], help="counts -> reconstruction")
    s.add_argument("--counts", help="count CSV to reconstruct")
    s.add_argument("--state", help="density-matrix JSON to sample from")
    s.add_argument("--qubits", type=int, default=2)
    s.add_argument("--shots", type=int, default=100000, help="per setting; 0 = noiseless")

    s = sub.add_parser("scaling", parents=[common], help="fidelity versus photon number")
    s.add_argument("--params", default="near-term")
    s.add_argument("--kinds", default="ghz,lc")
    s.add_argument("--max-photons", type=int, default=30)
    s.add_argument("--step", type=int, default=2)
    s.add_argument("--samples", type=int, default=100)

    s = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    s.add_argument("manifest")
    return ap


def _error(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            doc = json.loads(Path(args.manifest).read_text())
            return main(doc["argv"])
        run = Run(args, argv)
        COMMANDS[args.command](args, run)
        run.finish()
        return EXIT_OK
    except (zpg.ZPGError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _error("numerical", exc, EXIT_NUMERICAL)
    except (ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        return _error("validation", exc, EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
