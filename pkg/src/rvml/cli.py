"""Command line entry point: ``rvml <subcommand> ...``.

Exit codes: 0 success, 1 numerical failure (solver or divergence error),
2 an acceptance check failed (a JSON failure manifest is written next to the
outputs), 64 usage error, 78 bad configuration.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .compat import generate_sequence, preset_initial_data, smallness_check, validate_compatibility
from .config import load_settings
from .driver import MirrorConfig, mirror_equivalence_run, picard_iterate
from .errors import ConfigurationError, DivergenceError, InvalidArgumentError, ResolutionError, RVMLError
from .kernel import write_kernel_table
from .maxwell import EMField, constraint_residuals, field_energy, maxwell_step
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CHECK_FAILED = 2
EXIT_USAGE = 64
EXIT_CONFIG = 78
SCHEMA_VERSION = 1
COMPAT_PRESETS = {"small": False, "small-odd": True}
MIRROR_SHRINK = 3.5
CONTRACTION_LIMIT = 0.9
CONSTRAINT_LIMIT = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which collides with the check-failure code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(x):
    return repr(float(x))


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path, header, rows, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema_version: {SCHEMA_VERSION}\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


def _finish(command, out_dir, failures):
    """Write the failure manifest when any check failed; return the exit code."""
    if not failures:
        return EXIT_OK
    _write_json(Path(out_dir) / f"{command}-failures.json",
                {"command": command, "schema_version": SCHEMA_VERSION, "failures": failures})
    for f in failures:
        print(f"FAIL {f['check']}: {f['value']!r} (limit {f['limit']!r})", file=sys.stderr)
    return EXIT_CHECK_FAILED


def _settings(args):
    return load_settings(getattr(args, "config", None))


# ---- subcommands ------------------------------------------------------------

def cmd_verify(args):
    settings = _settings(args)
    out = Path(args.out) if args.out else Path(settings.directory) / f"verify-{args.suite}.json"
    checks = run_suite(args.suite, seed=args.seed)
    _write_json(out, {"suite": args.suite, "seed": args.seed, "schema_version": SCHEMA_VERSION,
                      "checks": [c.as_dict() for c in checks]})
    print(f"wrote {out}")
    failures = [{"check": c.name, "value": c.value, "limit": c.tolerance, "relation": c.relation}
                for c in checks if not c.passed]
    return _finish(f"verify-{args.suite}", out.parent, failures)


def cmd_kernel_table(args):
    if args.pmax <= 0 or args.n < 3:
        raise ConfigurationError("kernel-table needs --pmax > 0 and --n >= 3")
    write_kernel_table(args.out, args.pmax, args.n)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_compat_gen(args):
    settings = _settings(args)
    cfg = settings.iteration
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    space = cfg.space()
    f0, e0, b0 = preset_initial_data(space, amplitude=cfg.amplitude, odd_p3=COMPAT_PRESETS[args.preset])
    seq = generate_sequence(f0, e0, b0, args.m, space)
    n3 = cfg.x_shape[2]
    rep = validate_compatibility(seq, wall_nodes=[0, n3 // 2] if n3 % 2 == 0 else [0])
    for k in range(args.m + 1):
        np.save(out / f"f_{k}.npy", seq.f_seq[k].stack())
        np.save(out / f"e_{k}.npy", seq.e_seq[k])
        np.save(out / f"b_{k}.npy", seq.b_seq[k])
    small, ok = smallness_check(seq, cfg.r_list, cfg.theta, cfg.M, cfg.epsilon)
    report = {"preset": args.preset, "m": args.m, "schema_version": SCHEMA_VERSION,
              "residuals": rep.as_dict(), "smallness": small, "smallness_ok": ok}
    _write_json(out / "residuals.json", report)
    print(f"wrote {args.m + 1} entries to {out}")
    failures = []
    for k in range(args.m + 1):
        for name in ("div_b", "e_tangential", "b_normal"):
            v = getattr(rep, name)[k]
            if v is not None and v > 1e-10:
                failures.append({"check": f"{name}_k{k}", "value": v, "limit": 1e-10})
        if rep.srbc[k] > 1e-12:
            failures.append({"check": f"srbc_k{k}", "value": rep.srbc[k], "limit": 1e-12})
    if rep.gauss[0] > 1e-10:
        failures.append({"check": "gauss_k0", "value": rep.gauss[0], "limit": 1e-10})
    return _finish("compat-gen", out, failures)


def maxwell_history(torus, dt, t_end, source, seed):
    """Rows (t, energy, gauss residual, div B residual) of a periodic run.

    vacuum: a plane wave along x3.  oscillating: zero initial fields driven
    by j0(x) cos t with a seeded j0; the charge is integrated with the same
    Simpson weights RK4 applies to the source, so Gauss holds exactly.
    """
    x3 = torus.coords[..., 2]
    k = 2 * math.pi / torus.lengths[2]
    z = np.zeros_like(x3)
    if source == "vacuum":
        fields = EMField(np.stack([np.cos(k * x3), z, z], -1), np.stack([z, np.cos(k * x3), z], -1))
        j0 = np.zeros(torus.shape + (3,))
    else:
        j0 = torus.random_field(np.random.default_rng(seed))
        fields = EMField.zeros(torus)
    rho = np.zeros(torus.shape)
    div_j0 = torus.div(j0)
    steps = max(1, int(round(t_end / dt)))
    h = t_end / steps
    rows = []
    res = constraint_residuals(fields, rho, torus)
    rows.append((0.0, field_energy(fields, torus), res[0], res[1]))
    for n in range(steps):
        t = n * h
        fields = maxwell_step(fields, lambda s: j0 * math.cos(s), h, torus, t)
        rho = rho - h * div_j0 * (math.cos(t) + 4 * math.cos(t + 0.5 * h) + math.cos(t + h)) / 6.0
        res = constraint_residuals(fields, rho, torus)
        rows.append(((n + 1) * h, field_energy(fields, torus), res[0], res[1]))
    return rows


def cmd_maxwell_run(args):
    settings = _settings(args)
    cfg = settings.iteration
    space = cfg.space()
    rows = maxwell_history(space.torus, cfg.dt, cfg.T, settings.source, args.seed)
    out = Path(args.out) if args.out else Path(settings.directory) / "maxwell.csv"
    _write_csv(out, ["t", "energy", "div_E_residual", "div_B_residual"], rows,
               {"source": settings.source, "seed": args.seed})
    print(f"wrote {out}")
    worst = max(max(r[2], r[3]) for r in rows)
    failures = [] if worst <= 1e-10 else [{"check": "divergence_residual", "value": worst, "limit": 1e-10}]
    return _finish("maxwell-run", out.parent, failures)


def cmd_iterate(args):
    settings = _settings(args)
    cfg = settings.iteration
    space = cfg.space()
    # the small preset is seedless; the seed is recorded for provenance
    f0, e0, b0 = preset_initial_data(space, amplitude=cfg.amplitude)
    out = Path(args.out) if args.out else Path(settings.directory) / "iterate.csv"
    failures = []
    try:
        trace = picard_iterate(f0, e0, b0, cfg, space)
    except DivergenceError as exc:
        trace = exc.trace
        failures.append({"check": "bounded_functional", "value": trace.reports[-1].y_f,
                         "limit": cfg.divergence_factor * cfg.epsilon})
    ratios = [float("nan")] + trace.ratios
    rows = []
    for i, rep in enumerate(trace.reports):
        rows.append([i + 1, trace.diffs[i], trace.l2_diffs[i], ratios[i], trace.field_diffs[i],
                     trace.constraint_residuals[i], rep.e_f, rep.em_f, rep.h_f, rep.hm_f, rep.y_f])
    _write_csv(out, ["iterate", "diff_weighted", "diff_l2", "ratio", "field_diff", "constraint_residual",
                     "e_f", "em_f", "h_f", "hm_f", "y_f"], rows,
               {"preset": args.preset, "seed": args.seed, "slab": "x".join(map(str, cfg.x_shape)),
                "n_p": cfg.n_p, "p_max": cfg.p_max, "T": cfg.T, "dt": cfg.dt, "theta": cfg.theta})
    print(f"wrote {out}")
    worst = max(trace.constraint_residuals, default=0.0)
    if worst > CONSTRAINT_LIMIT:
        failures.append({"check": "constraint_residual", "value": worst, "limit": CONSTRAINT_LIMIT})
    # the first ratio compares against the move away from the initial guess
    for i, r in enumerate(trace.ratios[1:], start=2):
        if r > CONTRACTION_LIMIT:
            failures.append({"check": f"contraction_ratio_{i}", "value": r, "limit": CONTRACTION_LIMIT})
    return _finish("iterate", out.parent, failures)


def cmd_mirror_test(args):
    settings = _settings(args)
    out = Path(args.out) if args.out else Path(settings.directory) / "mirror.json"
    result = {"schema_version": SCHEMA_VERSION}
    failures = []
    for data in ("even", "odd"):
        coarse = MirrorConfig(n_x=args.n_x, data=data)
        gaps = [mirror_equivalence_run(c)[2] for c in (coarse, coarse.refined())]
        ratio = gaps[0] / gaps[1] if gaps[1] > 0 else math.inf
        result[data] = {"gap_coarse": gaps[0], "gap_fine": gaps[1], "ratio": ratio}
    _write_json(out, result)
    print(f"wrote {out}")
    if result["even"]["ratio"] < MIRROR_SHRINK:
        failures.append({"check": "even_gap_ratio", "value": result["even"]["ratio"], "limit": MIRROR_SHRINK})
    if result["odd"]["ratio"] >= MIRROR_SHRINK:
        failures.append({"check": "odd_control_ratio", "value": result["odd"]["ratio"], "limit": MIRROR_SHRINK})
    return _finish("mirror-test", out.parent, failures)


def build_parser():
    p = _Parser(prog="rvml", description="Relativistic Vlasov-Maxwell-Landau numerical toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    v = sub.add_parser("verify", help="run an identity battery and write a JSON report")
    v.add_argument("--suite", choices=SUITES, required=True)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--config")
    v.add_argument("--out")
    v.set_defaults(run=cmd_verify)

    k = sub.add_parser("kernel-table", help="tabulate sigma and kappa on a momentum grid")
    k.add_argument("--pmax", type=float, required=True)
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--out", required=True)
    k.set_defaults(run=cmd_kernel_table)

    c = sub.add_parser("compat-gen", help="generate the compatibility sequence")
    c.add_argument("--preset", choices=sorted(COMPAT_PRESETS), default="small")
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--config")
    c.add_argument("--out", required=True)
    c.set_defaults(run=cmd_compat_gen)

    mx = sub.add_parser("maxwell-run", help="periodic Maxwell run with per-step diagnostics")
    mx.add_argument("--config")
    mx.add_argument("--seed", type=int, default=0)
    mx.add_argument("--out")
    mx.set_defaults(run=cmd_maxwell_run)

    it = sub.add_parser("iterate", help="Picard iteration for the linearized system")
    it.add_argument("--preset", choices=["small"], default="small")
    it.add_argument("--seed", type=int, default=0)
    it.add_argument("--config")
    it.add_argument("--out")
    it.set_defaults(run=cmd_iterate)

    mi = sub.add_parser("mirror-test", help="slab versus doubled-domain refinement study")
    mi.add_argument("--n-x", type=int, default=MirrorConfig.n_x)
    mi.add_argument("--config")
    mi.add_argument("--out")
    mi.set_defaults(run=cmd_mirror_test)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.run(args)
    except (ConfigurationError, InvalidArgumentError, ResolutionError) as exc:
        print(f"rvml: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RVMLError as exc:
        print(f"rvml: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
