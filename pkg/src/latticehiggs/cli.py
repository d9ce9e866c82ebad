"""Command line front end: experiment orchestration, persistence, figures.

Subcommands: validate, mf-ratio, wilson-scan, phase-scan, currents, polymers.
Common flags: --config PATH, --seed U64, --out DIR, --quick.  Exit codes:
0 success, 1 invariant failure, 2 invalid input, 3 resource guard.
``LATTICEHIGGS_WORKERS`` selects the worker-pool size (default: all cores).

Configuration is one INI-style file (key = value under nested sections);
command line flags win over the file.  Unknown sections or keys are rejected
so a manifest always captures the complete, validated parameter set.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
import time
import numpy as np

from . import __version__, currents, dec, gibbs, oracle, polymers, validate
from .errors import ConfigError, GuardError

# -- configuration -------------------------------------------------------------


def _grid(text: str) -> list[float]:
    """Either 'start:stop:count' or a comma list."""
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(count))]
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _loops(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        w, h = item.strip().split("x")
        out.append((int(w), int(h)))
    return out


def _plane(text: str) -> tuple[int, int]:
    a, b = _int_list(text)
    return (a, b)


def _bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes", "on"):
        return True
    if text.lower() in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


def _a_m(text: str):
    return None if text.strip().lower() == "auto" else float(text)


SCHEMA = {
    "model": {
        "m": (int, 3),
        "N": (int, 2),
        "beta": (float, 0.2),
        "kappa": (float, 0.3),
        "k": (int, 1),
        "j": (int, 1),
    },
    "geometry": {
        "R": (int, 1),
        "T": (int, 1),
        "n": (_int_list, [1, 2]),
        "plane": (_plane, (0, 1)),
    },
    "sampler": {
        "sweeps": (int, 4000),
        "burn_in": (int, 500),
        "thin": (int, 1),
        "seed": (int, 12345),
        "proposal_width": (float, 1.0),
        "bins": (int, 32),
    },
    "enumeration": {
        "budget": (int, 10),
        "limit": (int, 8192),
        "complex": (str, "single-plaquette"),
    },
    "integrator": {
        "nodes": (int, 64),
        "mc_samples": (int, 200_000),
    },
    "scan": {
        "betas": (_grid, _grid("0.05:1.0:11")),
        "kappas": (_grid, _grid("0.0:1.0:11")),
        "loops": (_loops, [(1, 1), (1, 2), (1, 3), (2, 2)]),
        "js": (_int_list, [1, 2]),
        "margin": (int, 1),
        "a_m": (_a_m, None),
        "polymers": (int, 30),
        "polymer_max_size": (int, 3),
    },
    "output": {
        "dir": (str, "runs"),
        "figures": (_bool, True),
    },
}

COMPLEX_ALIASES = {
    "single-edge": "edge",
    "edge": "edge",
    "single-plaquette": "plaquette",
    "plaquette": "plaquette",
    "plaquette-pendant": "plaquette-pendant",
}


def load_config(path: str | None) -> dict:
    """Defaults, overlaid with the INI file; unknown keys are rejected."""
    cfg = {sec: {key: default for key, (_, default) in keys.items()}
           for sec, keys in SCHEMA.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case sensitive (N vs n)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown config key {key!r} in section [{sec}]")
            caster = SCHEMA[sec][key][0]
            try:
                cfg[sec][key] = caster(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for [{sec}] {key} = {raw!r}: {exc}") from exc
    return cfg


def flatten_config(cfg: dict) -> dict:
    out = {}
    for sec, keys in cfg.items():
        for key, value in keys.items():
            out[f"{sec}.{key}"] = value
    return out


# -- persistence ----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip representation
    return str(value)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


class RunDir:
    """Output directory with a manifest covering every emitted file."""

    def __init__(self, outdir: str, command: str, cfg: dict):
        self.dir = outdir
        os.makedirs(outdir, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.outputs: list[str] = []
        self.schemas: dict[str, str] = {}

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    def emit_csv(self, name: str, header: list[str], rows: list[list]) -> str:
        p = self.path(name)
        write_csv(p, header, rows)
        self.outputs.append(p)
        self.schemas[name] = ",".join(header)
        return p

    def emit_text(self, name: str, text: str) -> str:
        p = self.path(name)
        with open(p, "w") as fh:
            fh.write(text)
        self.outputs.append(p)
        return p

    def register(self, path: str) -> None:
        self.outputs.append(path)

    def finish(self) -> str:
        manifest = {
            "command": self.command,
            "version": __version__,
            "started": self.started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seed": self.cfg["sampler"]["seed"],
            "config": {k: _fmt(v) if isinstance(v, float) else str(v)
                       for k, v in flatten_config(self.cfg).items()},
            "csv_schemas": self.schemas,
            "outputs": [
                {"path": os.path.relpath(p, self.dir),
                 "sha256": _sha256(p),
                 "bytes": os.path.getsize(p)}
                for p in self.outputs
            ],
        }
        p = self.path("manifest.json")
        with open(p, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def workers() -> int:
    return max(1, int(os.environ.get("LATTICEHIGGS_WORKERS", os.cpu_count() or 1)))


def _warn_small_dimension(cfg: dict) -> None:
    if cfg["model"]["m"] < 4:
        print(
            f"note: m = {cfg['model']['m']} < 4; the phase structure probed here "
            "is only established for m >= 4, treat results as smoke-scale",
            file=sys.stderr,
        )


# -- subcommands -----------------------------------------------------------------


def cmd_validate(cfg: dict, args) -> int:
    quick = args.quick
    run = RunDir(args.out or cfg["output"]["dir"], "validate", cfg)
    if quick:
        instances = [
            i for i in oracle.default_suite(betas=(0.0, 0.3), kappas=(0.3,))
            if i.name != "plaquette-pendant"
        ]
        report = oracle.cross_validate(instances, budget=cfg["enumeration"]["budget"],
                                       compare_integrators=False)
    else:
        report = oracle.cross_validate(budget=cfg["enumeration"]["budget"])
    report.write_csv(run.path("cross_validation.csv"))
    run.register(run.path("cross_validation.csv"))
    run.schemas["cross_validation.csv"] = (
        "instance_id,method_a,method_b,value_a,value_b,tolerance,pass"
    )
    names = [n for n in validate.CHECKS
             if n not in ("oracle-currents-agreement", "oracle-two-integrators")]
    results = validate.run_checks(names, quick=quick)
    rows = [["cross-validation", int(report.all_pass),
             f"{len(report.rows)} comparisons", ""]]
    print(f"{'check':36s} {'status':6s} {'time':>8s}")
    status = "PASS" if report.all_pass else "FAIL"
    print(f"{'cross-validation':36s} {status:6s} {'':>8s}  ({len(report.rows)} rows)")
    failures = 0 if report.all_pass else 1
    for r in results:
        rows.append([r.name, int(r.passed), r.detail, f"{r.seconds:.2f}"])
        print(f"{r.name:36s} {'PASS' if r.passed else 'FAIL':6s} {r.seconds:7.2f}s  {r.detail}")
        failures += 0 if r.passed else 1
    run.emit_csv("checks.csv", ["check", "passed", "detail", "seconds"], rows)
    run.finish()
    print(f"{failures} failing check(s)" if failures else "all checks passed")
    return 1 if failures else 0


def cmd_mf_ratio(cfg: dict, args) -> int:
    _warn_small_dimension(cfg)
    model, geom, sampler = cfg["model"], cfg["geometry"], cfg["sampler"]
    cx = dec.build_box(model["m"], model["N"])
    params = gibbs.ModelParams(model["beta"], model["kappa"], model["k"], cx)
    scfg = gibbs.SamplerConfig(**sampler)
    if args.quick:
        scfg = gibbs.SamplerConfig(
            sweeps=max(scfg.bins * 4 + scfg.burn_in // 5 + 1, scfg.sweeps // 10),
            burn_in=scfg.burn_in // 5, thin=scfg.thin, seed=scfg.seed,
            proposal_width=scfg.proposal_width, bins=scfg.bins,
        )
    results = gibbs.mf_ratio_series(
        geom["R"], geom["T"], geom["n"], model["j"], params, scfg, geom["plane"]
    )
    rows, fig_rows = [], []
    for r in results:
        a_conf, bound = math.nan, math.nan
        if model["k"] >= 1 and model["j"] % model["k"] == 0 and model["j"] >= 1:
            rep = currents.confinement_lower_bound(
                model["beta"], model["kappa"], model["j"], model["k"],
                geom["R"], geom["T"], r.n, model["m"],
            )
            a_conf = rep.a
            bound = rep.lower_bound if rep.valid else math.nan
        den = r.denominator
        rows.append([
            r.n, r.R_n, r.T_n, r.num, r.num_err, den.mean, den.stderr,
            r.ratio, r.stderr, r.status, a_conf, bound,
        ])
        fig_rows.append({"n": r.n, "ratio": r.ratio, "ratio_err": r.stderr,
                         "status": r.status, "analytic_bound": bound})
        print(f"n={r.n}: ratio={r.ratio:.4g} +- {r.stderr:.2g} [{r.status}]")
    run = RunDir(args.out or cfg["output"]["dir"], "mf-ratio", cfg)
    run.emit_csv(
        "mf_ratio.csv",
        ["n", "Rn", "Tn", "num", "num_err", "den", "den_err",
         "ratio", "ratio_err", "status", "a_conf", "analytic_bound"],
        rows,
    )
    if cfg["output"]["figures"]:
        from . import plots

        plots.mf_ratio_figure(fig_rows, run.path("mf_ratio.png"))
        run.register(run.path("mf_ratio.png"))
    run.finish()
    return 0


def cmd_wilson_scan(cfg: dict, args) -> int:
    _warn_small_dimension(cfg)
    model, sampler, scan = cfg["model"], cfg["sampler"], cfg["scan"]
    cx = dec.build_box(model["m"], model["N"])
    params = gibbs.ModelParams(model["beta"], model["kappa"], model["k"], cx)
    scfg = gibbs.SamplerConfig(**sampler)
    if args.quick:
        scfg = gibbs.SamplerConfig(
            sweeps=max(scfg.bins * 4 + 1, scfg.sweeps // 10),
            burn_in=max(scfg.burn_in // 10, 20), thin=scfg.thin, seed=scfg.seed,
            proposal_width=scfg.proposal_width, bins=scfg.bins,
        )
    extents = []
    for extent in scan["loops"]:
        try:
            gibbs.loop_placements(cx, extent, scan["margin"])
            extents.append(extent)
        except GuardError:
            print(f"skipping {extent[0]}x{extent[1]}: does not fit the box with "
                  f"margin {scan['margin']}", file=sys.stderr)
    if not extents:
        raise GuardError("no requested loop shape fits the box")
    estimates = gibbs.wilson_loop_scan(
        params, scfg, extents, scan["js"], margin=scan["margin"]
    )
    loop_rows, fit_rows, per_j = [], [], {}
    for j in scan["js"]:
        loops, ests = [], []
        for extent in extents:
            est = estimates[(extent, j)]
            perim, area = 2 * (extent[0] + extent[1]), extent[0] * extent[1]
            loops.append((perim, area))
            ests.append(est)
            loop_rows.append([perim, area, est.mean, est.stderr, j,
                              f"{extent[0]}x{extent[1]}"])
        fit = None
        try:
            fit = gibbs.decay_fit(loops, ests)
            fit_rows.append([
                fit.perimeter_coefficient, fit.area_coefficient, fit.rms_residual,
                fit.perimeter_stderr, fit.area_stderr, j, len(fit.excluded),
            ])
            print(
                f"j={j}: c_perim={fit.perimeter_coefficient:.3f}+-{fit.perimeter_stderr:.3f} "
                f"c_area={fit.area_coefficient:.3f}+-{fit.area_stderr:.3f} "
                f"({len(fit.excluded)} loop(s) excluded)"
            )
        except (ConfigError, ValueError) as exc:
            print(f"j={j}: fit unavailable: {exc}", file=sys.stderr)
            fit_rows.append([math.nan, math.nan, math.nan, math.nan, math.nan, j, -1])
        per_j[j] = {"loops": loops, "estimates": ests, "fit": fit}
    run = RunDir(args.out or cfg["output"]["dir"], "wilson-scan", cfg)
    run.emit_csv("wilson_loops.csv",
                 ["perimeter", "area", "W", "W_err", "j", "shape"], loop_rows)
    run.emit_csv("wilson_fit.csv",
                 ["c_perim", "c_area", "residual", "c_perim_err", "c_area_err",
                  "j", "n_excluded"], fit_rows)
    if cfg["output"]["figures"]:
        from . import plots

        plots.wilson_scan_figure(per_j, run.path("wilson_scan.png"))
        run.register(run.path("wilson_scan.png"))
    run.finish()
    return 0


def _scan_point(task):
    beta, kappa, k, j, m, a_m = task
    g1 = polymers.g1_smallness(beta, kappa)
    a_conf = currents.confinement_smallness(beta, kappa, j, k, m)
    holder = polymers.holder_plaquette_factor(beta, kappa, a_m, 1, 0, 16)
    return (beta, kappa, g1, a_conf, holder)


def cmd_phase_scan(cfg: dict, args) -> int:
    model, scan = cfg["model"], cfg["scan"]
    betas, kappas = scan["betas"], scan["kappas"]
    if args.quick:
        betas, kappas = betas[::2], kappas[::2]
    a_m = scan["a_m"]
    if a_m is None:
        a_m = float(len(polymers.plaquette_partition(dec.build_box(min(model["m"], 4), 1))))
    k = max(model["k"], 1)
    j = model["j"] if model["j"] >= 1 and model["j"] % k == 0 else k
    tasks = [(b, kp, k, j, model["m"], a_m) for b in betas for kp in kappas]
    n_workers = workers()
    if n_workers > 1 and len(tasks) >= 64:
        import multiprocessing as mp

        with mp.Pool(n_workers) as pool:
            rows = pool.map(_scan_point, tasks)
    else:
        rows = [_scan_point(t) for t in tasks]
    report = polymers.SmallnessReport(list(betas), list(kappas), k, j, model["m"], a_m,
                                      rows=list(rows))
    run = RunDir(args.out or cfg["output"]["dir"], "phase-scan", cfg)
    run.emit_csv("phase_scan.csv",
                 ["beta", "kappa", "g1", "a_conf", "holder_factor"],
                 [list(r) for r in report.rows])
    if cfg["output"]["figures"]:
        from . import plots

        plots.phase_scan_figure(report, run.path("phase_scan.png"))
        run.register(run.path("phase_scan.png"))
    run.finish()
    print(f"phase scan: {len(report.rows)} grid points "
          f"(a_m = {a_m:g}, k = {k}, j = {j}, m = {model['m']})")
    return 0


def cmd_currents(cfg: dict, args) -> int:
    model, enum = cfg["model"], cfg["enumeration"]
    name = COMPLEX_ALIASES.get(enum["complex"])
    if name is None:
        raise ConfigError(
            f"unknown tiny complex {enum['complex']!r}; "
            f"choose from {sorted(set(COMPLEX_ALIASES))}"
        )
    cx, gamma = oracle.TINY_COMPLEXES[name]()
    beta, kappa, k, j = model["beta"], model["kappa"], model["k"], model["j"]
    budget = min(enum["budget"], 6) if args.quick else enum["budget"]
    lines = [f"complex: {name} ({len(cx.edges)} edges, {len(cx.plaquettes)} plaquettes)",
             f"parameters: beta={beta:g} kappa={kappa:g} k={k} j={j} budget={budget}"]
    if currents.divisibility_certificate(gamma, j, k, kappa):
        lines.append("numerator constraint set is EMPTY by divisibility: "
                     f"charge {k} does not divide {j} on an open path "
                     "(expectation is exactly 0 for every budget)")
        inter = None
    else:
        inter = currents.charged_interactions(cx, beta, kappa, k)
        by_level: dict[int, int] = {}
        for cur in currents.enumerate_currents(inter, gamma, j, budget, enum["limit"]):
            by_level[cur.total] = by_level.get(cur.total, 0) + 1
        lines.append("currents per total occupancy (numerator constraint set):")
        for level in sorted(by_level):
            lines.append(f"  occupancy {level:2d}: {by_level[level]} currents")
        num = currents.partition_sum(inter, gamma, j, budget, enum["limit"])
        den = currents.partition_sum(inter, None, 0, budget, enum["limit"])
        lines.append(f"numerator   = {num.value:.12g} (+ tail <= {num.tail_bound:.3g})")
        lines.append(f"denominator = {den.value:.12g} (+ tail <= {den.tail_bound:.3g})")
        r = currents.expectation_via_currents(cx, gamma, j, k, beta, kappa, budget,
                                              enum["limit"])
        lines.append(f"expectation in [{r.lo:.12g}, {r.hi:.12g}]")
    if k >= 1 and j >= 1 and j % k == 0 and kappa > 0:
        wit_inter = inter or currents.charged_interactions(cx, beta, kappa, k)
        wit = currents.line_witness(wit_inter, gamma, j)
        lines.append(f"line witness (weight {wit.weight():.6g}):")
        lines.append(currents.current_to_text(wit).rstrip() or "  (empty)")
    if gamma.is_loop and beta > 0:
        wit_inter = inter or currents.charged_interactions(cx, beta, kappa, k)
        swit = currents.surface_witness(wit_inter, gamma, max(j, 1))
        lines.append(f"surface witness (weight {swit.weight():.6g}):")
        lines.append(currents.current_to_text(swit).rstrip())
    text = "\n".join(lines) + "\n"
    print(text, end="")
    run = RunDir(args.out or cfg["output"]["dir"], "currents", cfg)
    run.emit_text("currents_report.txt", text)
    run.finish()
    return 0


def cmd_polymers(cfg: dict, args) -> int:
    model, scan, integ = cfg["model"], cfg["scan"], cfg["integrator"]
    cx = dec.build_box(min(model["m"], 3), 1)
    rng = np.random.default_rng(cfg["sampler"]["seed"])
    count = max(4, scan["polymers"] // 4) if args.quick else scan["polymers"]
    mc = integ["mc_samples"] // 4 if args.quick else integ["mc_samples"]
    a_m = scan["a_m"] or float(len(polymers.plaquette_partition(cx)))
    k = max(model["k"], 2)
    beta, kappa = model["beta"], model["kappa"]
    rows, fig_rows = [], []
    for i in range(count):
        size = int(rng.integers(1, scan["polymer_max_size"] + 1))
        if i % 2 == 0:
            poly = polymers.random_connected_plaquettes(cx, size, rng)
            w = polymers.polymer_weight_charge1(poly, None, 1, beta, kappa,
                                                mc_samples=mc, seed=i)
            hb = polymers.holder_bound_charge1(beta, kappa, a_m, 1, 0, len(poly))
            kind, psize, touched = "charge-1", len(poly), len(poly.touched_edges)
        else:
            poly = polymers.random_twisted_polymer(cx, size, k, rng)
            w = polymers.polymer_weight_charged(poly, None, k, beta, kappa,
                                                mc_samples=mc, seed=i)
            hb = polymers.holder_bound_charged(poly, None, k, beta, kappa, a_m)
            kind, psize, touched = "charge-k", poly.size, len(poly.touched_edges)
        ok = abs(w.value) - 3 * w.error <= hb.bound
        rows.append([i, kind, psize, touched, w.value, w.error, w.method,
                     hb.bound, int(ok)])
        fig_rows.append({"kind": kind, "phi": w.value, "holder_bound": hb.bound})
    violations = sum(1 for r in rows if not r[-1])
    run = RunDir(args.out or cfg["output"]["dir"], "polymers", cfg)
    run.emit_csv("polymers.csv",
                 ["polymer_id", "kind", "size", "touched", "phi", "phi_err",
                  "method", "holder_bound", "within_bound"], rows)
    if cfg["output"]["figures"]:
        from . import plots

        plots.polymer_figure(fig_rows, run.path("polymers.png"))
        run.register(run.path("polymers.png"))
    run.finish()
    print(f"{count} polymers sampled, {violations} bound violation(s)")
    return 1 if violations else 0


COMMANDS = {
    "validate": cmd_validate,
    "mf-ratio": cmd_mf_ratio,
    "wilson-scan": cmd_wilson_scan,
    "phase-scan": cmd_phase_scan,
    "currents": cmd_currents,
    "polymers": cmd_polymers,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticehiggs",
        description="Charged abelian lattice Higgs model: sampling, expansions, scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", default=None, help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, help="override sampler seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--quick", action="store_true", help="reduced smoke-scale run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["sampler"]["seed"] = args.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
