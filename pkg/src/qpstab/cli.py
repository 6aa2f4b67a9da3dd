"""Command-line pipeline: parse a system file, certify, validate, report.

Subcommands::

    qpstab analyze FILE        equilibrium, certificate, trajectory validation, verdict
    qpstab certificate FILE    certificate search on Q = B A only
    qpstab simulate FILE --t-final T --x0 X1 ... [--output traj.tsv]

Exit codes: 0 certified (stable or globally asymptotically stable),
2 inconclusive, 3 parse/validation error, 4 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .certificate import (
    CertificateConfig,
    Classification,
    search_certificate,
    symmetrized_form,
    thresholds,
    verify_certificate,
)
from .dynamics import (
    IntegratorConfig,
    MonitorConfig,
    conservation_check,
    integrate,
    monitor_liapunov,
)
from .equilibrium import EquilibriumConfig, find_equilibrium
from .errors import NonFiniteState, NumericalError, ParseError, QPError, StepSizeUnderflow, ValidationError
from .model import QPSystem, condition_diagnostics, interaction_matrix, validate_system

EXIT_CERTIFIED = 0
EXIT_INCONCLUSIVE = 2
EXIT_INPUT_ERROR = 3
EXIT_NUMERICAL_ERROR = 4

GAS = "globally asymptotically stable"
STABLE = "stable"
INCONCLUSIVE = "inconclusive"

_TOLERANCE_KEYS = {
    "rtol", "atol", "definite_tol", "semidefinite_tol", "t_final",
    "terminal_tol", "n_samples", "max_starts", "conservation_tol",
}


@dataclass(frozen=True)
class AnalysisOptions:
    seed: int = 0
    max_starts: int = 20
    definite_tol: float = 1e-8
    semidefinite_tol: float = 1e-7
    t_final: float = 200.0
    rtol: float = 1e-9
    atol: float = 1e-12
    n_samples: int = 256
    terminal_tol: float = 1e-6
    conservation_tol: float = 1e-8
    n_default_starts: int = 3
    x0_list: tuple | None = None

    def certificate_config(self):
        return CertificateConfig(seed=self.seed, max_starts=self.max_starts,
                                 definite_tol=self.definite_tol,
                                 semidefinite_tol=self.semidefinite_tol)

    def equilibrium_config(self):
        return EquilibriumConfig(seed=self.seed, max_starts=self.max_starts)

    def integrator_config(self):
        return IntegratorConfig(rtol=self.rtol, atol=self.atol, n_samples=self.n_samples)

    def monitor_config(self):
        return MonitorConfig(terminal_tol=self.terminal_tol,
                             conservation_tol=self.conservation_tol)


@dataclass
class AnalysisReport:
    system: dict
    equilibrium: dict
    certificate: dict
    trajectories: list
    verdict: str
    explanation: str
    seed: int
    diagnostics: dict = field(default_factory=dict)
    tool: str = "qpstab"
    version: str = __version__

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)


# ---------------------------------------------------------------- parsing


def _field(doc, name, path):
    if name not in doc:
        raise ParseError(f"{path}: missing required field '{name}'")
    return doc[name]


def _number_array(value, name, path, ndim):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: field '{name}' must contain only numbers") from None
    if arr.ndim != ndim:
        shape = "an array of arrays (row-major matrix)" if ndim == 2 else "a flat array"
        raise ParseError(f"{path}: field '{name}' must be {shape}, got shape {arr.shape}")
    return arr


def parse_document(doc, path="<input>"):
    """Turn a decoded JSON object into (QPSystem, AnalysisOptions)."""
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    lam = _number_array(_field(doc, "lambda", path), "lambda", path, 1)
    A = _number_array(_field(doc, "A", path), "A", path, 2)
    B = _number_array(_field(doc, "B", path), "B", path, 2)
    n = _field(doc, "n", path)
    m = _field(doc, "m", path)
    for name, v in (("n", n), ("m", m)):
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ParseError(f"{path}: field '{name}' must be a positive integer")
    if lam.shape[0] != n:
        raise ParseError(f"{path}: field 'lambda' has length {lam.shape[0]} but 'n' = {n}")
    if A.shape[1] != m:
        raise ParseError(f"{path}: field 'A' has {A.shape[1]} columns but 'm' = {m}")
    system = validate_system(lam, A, B)

    opts = {}
    if "seed" in doc:
        if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
            raise ParseError(f"{path}: field 'seed' must be an integer")
        opts["seed"] = doc["seed"]
    tol = doc.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ParseError(f"{path}: field 'tolerances' must be an object")
    unknown = set(tol) - _TOLERANCE_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown key(s) in 'tolerances': {sorted(unknown)}")
    for key, value in tol.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"{path}: 'tolerances.{key}' must be a number")
        opts[key] = int(value) if key in ("n_samples", "max_starts") else float(value)
    if "x0_list" in doc:
        x0s = _number_array(doc["x0_list"], "x0_list", path, 2)
        if x0s.shape[1] != n or not np.all(x0s > 0):
            raise ParseError(
                f"{path}: 'x0_list' entries must be strictly positive vectors of length {n}"
            )
        opts["x0_list"] = tuple(tuple(float(v) for v in row) for row in x0s)
    return system, AnalysisOptions(**opts)


def parse_input(path):
    """Read a UTF-8 JSON system file. Returns (QPSystem, AnalysisOptions)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: cannot read file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return parse_document(doc, str(path))


# ---------------------------------------------------------------- pipeline


def decide_verdict(classification, trajectories_ok):
    """Verdict from the certificate class and the trajectory validation outcome."""
    classification = Classification(classification)
    if not trajectories_ok or classification is Classification.INCONCLUSIVE:
        return INCONCLUSIVE
    if classification is Classification.NEGATIVE_DEFINITE:
        return GAS
    return STABLE


def exit_code_for(verdict):
    return EXIT_CERTIFIED if verdict in (GAS, STABLE) else EXIT_INCONCLUSIVE


def _floats(a):
    return [float(v) for v in np.ravel(a)] if np.ndim(a) == 1 else [_floats(r) for r in a]


def system_echo(sys: QPSystem):
    return {"n": sys.n, "m": sys.m, "lambda": _floats(sys.lam),
            "A": _floats(sys.A), "B": _floats(sys.B)}


def _default_starts(xstar, options):
    rng = np.random.default_rng(options.seed)
    return [tuple(xstar * np.exp(rng.uniform(-1.0, 1.0, xstar.size)))
            for _ in range(options.n_default_starts)]


def _is_conservative(Q, cert, cfg):
    M = symmetrized_form(Q, cert.scaling)
    _, tau_semi = thresholds(M, cfg)
    return float(np.max(np.abs(np.linalg.eigvalsh(M)))) <= tau_semi


def run_analysis(sys: QPSystem, options=None) -> AnalysisReport:
    """Full pipeline. Deterministic for a fixed ``options.seed``."""
    opts = options or AnalysisOptions()
    cert_cfg = opts.certificate_config()
    eq = find_equilibrium(sys, config=opts.equilibrium_config())
    Q = interaction_matrix(sys)
    cert = search_certificate(Q, cert_cfg)
    verification = verify_certificate(Q, cert, cert_cfg)
    conservative = (cert.classification is Classification.NEGATIVE_SEMIDEFINITE
                    and _is_conservative(Q, cert, cert_cfg))

    x0_list = opts.x0_list or _default_starts(eq.xstar, opts)
    trajectories = []
    all_ok = True
    for x0 in x0_list:
        entry = {"x0": [float(v) for v in x0], "t_final": opts.t_final}
        try:
            rec = integrate(sys, np.array(x0), opts.t_final, opts.integrator_config(),
                            scaling=cert.scaling, xstar=eq.xstar)
        except (StepSizeUnderflow, NonFiniteState) as exc:
            entry.update(ok=False, error=str(exc), monotonicity=None, conservation=None)
            trajectories.append(entry)
            all_ok = False
            continue
        mono = monitor_liapunov(sys, cert, eq.xstar, rec, opts.monitor_config())
        ok = mono.passed
        cons = None
        if conservative:
            cons = conservation_check(sys, cert.scaling, eq.xstar, rec, opts.monitor_config(),
                                      cert_cfg)
            ok = ok and cons.passed
        entry.update(
            ok=bool(ok), error=None,
            accepted_steps=rec.accepted_steps, rejected_steps=rec.rejected_steps,
            final_state=_floats(rec.final_state),
            monotonicity=asdict(mono),
            conservation=asdict(cons) if cons is not None else None,
        )
        trajectories.append(entry)
        all_ok = all_ok and ok

    # trajectory checks only gate a certificate; an inconclusive one stays so
    verdict = decide_verdict(cert.classification, all_ok)
    if cert.classification is Classification.INCONCLUSIVE:
        explanation = cert.note or (
            f"no positive diagonal C found with C Q + Q^T C negative semidefinite "
            f"(best lambda_max = {cert.lambda_max:.3e})")
    elif not all_ok:
        explanation = "certificate found but trajectory validation failed"
    elif verdict == GAS:
        explanation = "C Q + Q^T C negative definite: x* globally asymptotically stable in the open orthant"
    else:
        explanation = "C Q + Q^T C negative semidefinite: x* stable"
        if conservative:
            explanation += "; C Q + Q^T C = 0, W is conserved along trajectories"

    return AnalysisReport(
        system=system_echo(sys),
        equilibrium={"xstar": _floats(eq.xstar), "residual": eq.residual_norm,
                     "iterations": eq.iterations, "converged": eq.converged},
        certificate={"c": _floats(cert.scaling.c), "classification": cert.classification.value,
                     "lambda_max": cert.lambda_max, "margin": cert.margin, "note": cert.note,
                     "starts": cert.starts, "evaluations": cert.evaluations,
                     "verified": True,
                     "verified_lambda_max": verification.lambda_max,
                     "conservative": bool(conservative)},
        trajectories=trajectories,
        verdict=verdict,
        explanation=explanation,
        seed=opts.seed,
        diagnostics={**condition_diagnostics(sys), "kernel_backend": kernels.BACKEND},
    )


# ---------------------------------------------------------------- trajectory files


def export_trajectory(record, path, format="tsv"):
    """Write t, x1..xn, W, Wdot as tab-separated columns, 17 significant digits."""
    if format != "tsv":
        raise ValueError(f"unsupported trajectory format {format!r}; only 'tsv'")
    if record is None or len(record.times) == 0:
        raise ValueError("refusing to export an empty trajectory")
    n = record.states.shape[1]
    k = len(record.times)
    W = record.W_samples if record.W_samples.size == k else np.full(k, np.nan)
    Wd = record.Wdot_samples if record.Wdot_samples.size == k else np.full(k, np.nan)
    header = "\t".join(["t"] + [f"x{i + 1}" for i in range(n)] + ["W", "Wdot"])
    cols = np.column_stack([record.times, record.states, W, Wd])
    lines = [header] + ["\t".join(f"{v:.17g}" for v in row) for row in cols]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_trajectory(path):
    """Parse a file written by :func:`export_trajectory` into named columns."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    data = np.array([[float(v) for v in ln.split("\t")] for ln in lines[1:]])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------- presentation


def _text_report(report: AnalysisReport):
    rows = [
        ("system", f"n = {report.system['n']}, m = {report.system['m']}"),
        ("equilibrium x*", _fmt_vec(report.equilibrium["xstar"])),
        ("residual", f"{report.equilibrium['residual']:.3e}"),
        ("scaling c", _fmt_vec(report.certificate["c"])),
        ("classification", report.certificate["classification"]),
        ("lambda_max", f"{report.certificate['lambda_max']:.6e}"),
        ("margin", f"{report.certificate['margin']:.6e}"),
    ]
    for i, tr in enumerate(report.trajectories):
        if tr["error"]:
            rows.append((f"trajectory {i + 1}", f"FAILED: {tr['error']}"))
            continue
        mono = tr["monotonicity"]
        desc = f"{'ok' if tr['ok'] else 'FAILED'}, W {mono['W_initial']:.4e} -> {mono['W_final']:.4e}"
        if mono["terminal_checked"]:
            desc += f", |x(T) - x*| = {mono['terminal_distance']:.2e}"
        if tr["conservation"]:
            desc += f", drift {tr['conservation']['relative_drift']:.2e}"
        rows.append((f"trajectory {i + 1}", desc))
    rows += [("verdict", report.verdict), ("", report.explanation)]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _fmt_vec(v):
    return "(" + ", ".join(f"{x:.10g}" for x in v) + ")"


def _emit(payload, fmt, text):
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _apply_flags(options, args):
    changes = {}
    for flag, key in (("seed", "seed"), ("semidefinite_tol", "semidefinite_tol"),
                      ("definite_tol", "definite_tol"), ("max_starts", "max_starts")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    return replace(options, **changes)


def cmd_analyze(args):
    system, options = parse_input(args.file)
    options = _apply_flags(options, args)
    if args.t_final is not None:
        options = replace(options, t_final=args.t_final)
    report = run_analysis(system, options)
    if args.format == "json":
        print(report.to_json())
    else:
        print(_text_report(report))
    return exit_code_for(report.verdict)


def cmd_certificate(args):
    system, options = parse_input(args.file)
    options = _apply_flags(options, args)
    cfg = options.certificate_config()
    Q = interaction_matrix(system)
    cert = search_certificate(Q, cfg)
    ver = verify_certificate(Q, cert, cfg)
    payload = {
        "tool": "qpstab", "version": __version__, "seed": options.seed,
        "Q": _floats(Q), "c": _floats(cert.scaling.c),
        "classification": cert.classification.value, "lambda_max": cert.lambda_max,
        "margin": cert.margin, "note": cert.note, "verified": True,
        "verified_lambda_max": ver.lambda_max,
    }
    text = "\n".join([
        f"classification  {cert.classification.value}",
        f"scaling c       {_fmt_vec(cert.scaling.c)}",
        f"lambda_max      {cert.lambda_max:.6e}",
        f"margin          {cert.margin:.6e}",
    ] + ([f"note            {cert.note}"] if cert.note else []))
    _emit(payload, args.format, text)
    return EXIT_CERTIFIED if cert.certified else EXIT_INCONCLUSIVE


def cmd_simulate(args):
    system, options = parse_input(args.file)
    options = _apply_flags(options, args)
    if args.x0 is not None:
        x0 = np.array(args.x0, dtype=float)
    elif options.x0_list:
        x0 = np.array(options.x0_list[0])
    else:
        raise ParseError("simulate needs --x0 or an 'x0_list' entry in the file")
    if x0.shape != (system.n,) or not np.all(x0 > 0):
        raise ParseError(f"--x0 must be {system.n} strictly positive numbers")
    eq = find_equilibrium(system, config=options.equilibrium_config())
    cert = search_certificate(interaction_matrix(system), options.certificate_config())
    cfg = replace(options.integrator_config(), n_samples=args.samples or options.n_samples)
    try:
        rec = integrate(system, x0, args.t_final, cfg, scaling=cert.scaling, xstar=eq.xstar)
    except (StepSizeUnderflow, NonFiniteState) as exc:
        if args.output and exc.record is not None and len(exc.record.times):
            export_trajectory(exc.record, args.output)
        raise
    if args.output:
        export_trajectory(rec, args.output)
    payload = {
        "tool": "qpstab", "version": __version__, "seed": options.seed,
        "x0": _floats(x0), "t_final": args.t_final, "xstar": _floats(eq.xstar),
        "c": _floats(cert.scaling.c), "classification": cert.classification.value,
        "accepted_steps": rec.accepted_steps, "rejected_steps": rec.rejected_steps,
        "final_state": _floats(rec.final_state),
        "W_initial": float(rec.W_samples[0]), "W_final": float(rec.W_samples[-1]),
        "output": str(args.output) if args.output else None,
    }
    text = "\n".join([
        f"x(0)            {_fmt_vec(x0)}",
        f"x({args.t_final:g})".ljust(16) + f"{_fmt_vec(rec.final_state)}",
        f"x*              {_fmt_vec(eq.xstar)}",
        f"W               {rec.W_samples[0]:.6e} -> {rec.W_samples[-1]:.6e}",
        f"steps           {rec.accepted_steps} accepted, {rec.rejected_steps} rejected",
    ] + ([f"written         {args.output}"] if args.output else []))
    _emit(payload, args.format, text)
    return EXIT_CERTIFIED


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--semidefinite-tol", type=float, default=None)
    shared.add_argument("--definite-tol", type=float, default=None)
    shared.add_argument("--max-starts", type=int, default=None)
    shared.add_argument("--format", choices=["text", "json"], default="text")

    parser = argparse.ArgumentParser(
        prog="qpstab",
        description="Stability certificates for quasipolynomial ODE systems.",
    )
    parser.add_argument("--version", action="version", version=f"qpstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[shared], help="full stability analysis")
    p.add_argument("file", type=Path)
    p.add_argument("--t-final", type=float, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certificate", parents=[shared], help="diagonal scaling search only")
    p.add_argument("file", type=Path)
    p.set_defaults(func=cmd_certificate)

    p = sub.add_parser("simulate", parents=[shared], help="integrate one trajectory")
    p.add_argument("file", type=Path)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--x0", type=float, nargs="+", default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--output", type=Path, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"qpstab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (NumericalError, QPError, OSError) as exc:
        print(f"qpstab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
