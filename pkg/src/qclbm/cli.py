"""Command-line experiment runner.

Usage::

    qclbm carleman-rmse --config cfg.json --out results/
    qclbm spectra       --config cfg.json --out results/ --cache .spectra
    qclbm hhl           --config cfg.json --out results/ --threads 4
    qclbm resources     --config cfg.json --out results/
    qclbm plot results/hhl.csv results/carleman_rmse.csv --out figures/

Every CSV starts with a ``# schema=<name>/<version>`` comment line followed
by a header row. On failure a JSON error record is printed to stderr and
the exit code is nonzero.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from ._validation import check_omega, check_positive, check_positive_int
from .carleman import carleman_trajectory, rmse
from .lattice import velocity_field, run_lbm
from .pipeline import USE_CASES, Problem, exact_spectrum, hhl_record
from .resources import cnot_bounds
from .spectra import DEFAULT_BIN_WIDTH, SpectrumCache, histogram, zeta

log = logging.getLogger("qclbm")

SCHEMAS = {
    "carleman_rmse": ("carleman_rmse", 1, ["use_case", "nx", "ny", "omega", "order", "t", "rmse"]),
    "velocity": ("velocity", 1, ["use_case", "nx", "ny", "omega", "t", "x", "y", "ux", "uy"]),
    "spectra": ("spectra", 1, ["use_case", "nx", "ny", "omega", "n_steps", "v_lid", "index", "eigenvalue"]),
    "histogram": ("histogram", 1, ["use_case", "nx", "ny", "omega", "n_steps", "v_lid", "bin_lo", "bin_hi", "count"]),
    "zeta": ("zeta", 1, ["use_case", "nx", "ny", "reference_nx", "omega", "n_steps", "v_lid", "zeta", "n_positive", "lambda_max", "lambda_min"]),
    "hhl": ("hhl", 1, [
        "use_case", "nx", "ny", "omega", "n_steps", "t0", "n_clock", "c_p", "v_lid", "spectrum_source",
        "status", "error", "re_derived", "fidelity_error", "eps_evolved_mean", "eps_evolved_median",
        "block_errors", "p_ancilla", "p_success", "lambda_max", "n_clock_min", "n_unresolved", "n_b",
        "generic_cnot", "local_cnot",
    ]),
    "resources": ("resources", 1, ["nx", "ny", "n_clock", "n_steps", "q_tilde", "generic_bound", "local_bound", "reinit_bound", "hamiltonian_qubits"]),
}


class ConfigError(ValueError):
    pass


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass
class RunConfig:
    use_case: List[str] = field(default_factory=lambda: ["bounceback"])
    nx: List[int] = field(default_factory=lambda: [8])
    ny: Optional[List[int]] = None
    omega: List[float] = field(default_factory=lambda: [1.1, 1.5])
    carleman_order: List[int] = field(default_factory=lambda: [1, 2])
    n_steps: List[int] = field(default_factory=lambda: [1, 3, 7])
    t0: List[int] = field(default_factory=lambda: [0, 20, 40])
    n_clock: List[int] = field(default_factory=lambda: [7])
    c_p: List[float] = field(default_factory=lambda: [1.0])
    v_lid: List[float] = field(default_factory=lambda: [0.075])
    spectrum_source: List[str] = field(default_factory=lambda: ["exact"])
    init: Dict[str, float] = field(default_factory=dict)
    rmse_steps: int = 500
    rmse_stride: int = 1
    reference_nx: int = 4
    bin_width: float = DEFAULT_BIN_WIDTH
    q_tilde: int = 4**4
    dump_velocity: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        list_keys = {"use_case", "nx", "ny", "omega", "carleman_order", "n_steps", "t0", "n_clock", "c_p", "v_lid", "spectrum_source"}
        kwargs = {k: (_as_list(v) if k in list_keys and v is not None else v) for k, v in data.items()}
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        try:
            for uc in self.use_case:
                if uc not in USE_CASES:
                    raise ConfigError(f"use_case {uc!r} not in {USE_CASES}")
            for n in self.nx + (self.ny or []):
                check_positive_int(n, "nx/ny", minimum=2)
            if self.ny is not None and len(self.ny) != len(self.nx):
                raise ConfigError("ny must list one entry per nx")
            for w in self.omega:
                check_omega(w)
            for o in self.carleman_order:
                if o not in (1, 2):
                    raise ConfigError("carleman_order entries must be 1 or 2")
            for n in self.n_steps:
                check_positive_int(n, "n_steps")
            for t in self.t0:
                check_positive_int(t, "t0", minimum=0)
            for n in self.n_clock:
                check_positive_int(n, "n_clock")
            for c in self.c_p:
                check_positive(c, "c_p")
            for v in self.v_lid:
                if not abs(v) < math.sqrt(1 / 3):
                    raise ConfigError("v_lid must be subsonic")
            for s in self.spectrum_source:
                if s != "exact" and not s.startswith("substituted"):
                    raise ConfigError(f"spectrum_source {s!r} must be 'exact' or 'substituted[:N]'")
            check_positive_int(self.rmse_steps, "rmse_steps")
            check_positive_int(self.rmse_stride, "rmse_stride")
            check_positive_int(self.reference_nx, "reference_nx", minimum=2)
            check_positive(self.bin_width, "bin_width")
            check_positive_int(self.q_tilde, "q_tilde")
            for key in self.init:
                if key not in ("A_x", "A_y", "k_x", "k_y"):
                    raise ConfigError(f"unknown init parameter {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sizes(self):
        ny = self.ny or self.nx
        return list(zip(self.nx, ny))

    def lid_values(self, use_case):
        return self.v_lid if use_case == "liddriven" else [0.0]

    def problems(self, n_steps=1, t0=0):
        """Problems over (use_case, size, omega, v_lid)."""
        init = tuple(sorted(self.init.items()))
        for uc, (nx, ny), w in itertools.product(self.use_case, self.sizes(), self.omega):
            for v in self.lid_values(uc):
                yield Problem(uc, nx, ny, w, n_steps, t0, v if uc == "liddriven" else 0.075, init)


# --- CSV helpers ---------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return "" if value is None else str(value)


def write_csv(path: Path, schema: str, rows: Sequence[dict]) -> Path:
    name, version, columns = SCHEMAS[schema]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={name}/{version}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


def read_csv(path) -> tuple:
    """Return ``(schema_name, rows)`` for a CSV written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema="):
            raise ValueError(f"{path}: missing schema comment line")
        schema = first.strip().split("=", 1)[1].split("/")[0]
        rows = list(csv.DictReader(fh))
    return schema, rows


def _parallel(tasks, threads):
    if threads <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


# --- subcommands ---------------------------------------------------------------

def cmd_carleman_rmse(cfg: RunConfig, out: Path, threads: int = 1, cache=None) -> List[Path]:
    tasks = []
    dumps = []
    for p in cfg.problems():
        def task(p=p):
            grid = p.grid()
            f0 = p.initial_field()
            lbm = run_lbm(f0, grid, p.omega, cfg.rmse_steps)
            rows = []
            for order in cfg.carleman_order:
                traj = carleman_trajectory(f0, grid, p.omega, order, cfg.rmse_steps)
                for t in range(0, cfg.rmse_steps + 1, cfg.rmse_stride):
                    rows.append({"use_case": p.use_case, "nx": p.nx, "ny": p.ny, "omega": float(p.omega),
                                 "order": order, "t": t, "rmse": rmse(traj[t], lbm[t].flat())})
            vel = []
            if cfg.dump_velocity:
                u = velocity_field(lbm[-1])
                for y in range(p.ny):
                    for x in range(p.nx):
                        vel.append({"use_case": p.use_case, "nx": p.nx, "ny": p.ny, "omega": float(p.omega),
                                    "t": cfg.rmse_steps, "x": x, "y": y, "ux": float(u[y, x, 0]), "uy": float(u[y, x, 1])})
            return rows, vel
        tasks.append(task)
    results = _parallel(tasks, threads)
    rows = sorted((r for res in results for r in res[0]), key=lambda r: (r["use_case"], r["nx"], r["ny"], r["omega"], r["order"], r["t"]))
    paths = [write_csv(out / "carleman_rmse.csv", "carleman_rmse", rows)]
    if cfg.dump_velocity:
        vel = sorted((r for res in results for r in res[1]), key=lambda r: (r["use_case"], r["nx"], r["ny"], r["omega"], r["y"], r["x"]))
        paths.append(write_csv(out / "velocity.csv", "velocity", vel))
    return paths


def cmd_spectra(cfg: RunConfig, out: Path, threads: int = 1, cache: Optional[SpectrumCache] = None) -> List[Path]:
    problems = []
    for nt in cfg.n_steps:
        for p in cfg.problems(n_steps=nt):
            problems.append(p)
            ref = Problem(p.use_case, cfg.reference_nx, cfg.reference_nx, p.omega, nt, 0, p.v_lid, p.init)
            problems.append(ref)
    unique = sorted(set(problems), key=lambda p: (p.use_case, p.omega, p.n_steps, p.v_lid, p.nx, p.ny))
    spectra = dict(zip(unique, _parallel([lambda p=p: exact_spectrum(p, cache) for p in unique], threads)))

    spec_rows, hist_rows, zeta_rows = [], [], []
    for p in unique:
        s = spectra[p]
        v = p.v_lid if p.use_case == "liddriven" else 0.0
        meta = {"use_case": p.use_case, "nx": p.nx, "ny": p.ny, "omega": float(p.omega), "n_steps": p.n_steps, "v_lid": float(v)}
        spec_rows += [dict(meta, index=i, eigenvalue=float(e)) for i, e in enumerate(s.eigenvalues)]
        h = histogram(s, cfg.bin_width)
        hist_rows += [dict(meta, bin_lo=k * h.bin_width, bin_hi=(k + 1) * h.bin_width, count=int(c)) for k, c in enumerate(h.counts)]
        ref = Problem(p.use_case, cfg.reference_nx, cfg.reference_nx, p.omega, p.n_steps, 0, p.v_lid, p.init)
        z = zeta(h, histogram(spectra[ref], cfg.bin_width))
        zeta_rows.append(dict(meta, reference_nx=cfg.reference_nx, zeta=z, n_positive=int(s.positive.size),
                              lambda_max=s.lambda_max, lambda_min=float(s.positive.min())))
    return [
        write_csv(out / "spectra.csv", "spectra", spec_rows),
        write_csv(out / "histograms.csv", "histogram", hist_rows),
        write_csv(out / "zeta.csv", "zeta", zeta_rows),
    ]


def cmd_hhl(cfg: RunConfig, out: Path, threads: int = 1, cache: Optional[SpectrumCache] = None) -> List[Path]:
    rows = []
    # one task per matrix; sweeps inside reuse the fitted eigenbasis
    groups = []
    for nt in cfg.n_steps:
        for base in cfg.problems(n_steps=nt):
            groups.append(base)

    def run_group(base: Problem):
        out_rows = []
        for t0, nc, cp, src in itertools.product(cfg.t0, cfg.n_clock, cfg.c_p, cfg.spectrum_source):
            p = Problem(base.use_case, base.nx, base.ny, base.omega, base.n_steps, t0, base.v_lid, base.init)
            out_rows.append(hhl_record(p, nc, cp, src, cache))
        return out_rows

    for res in _parallel([lambda b=b: run_group(b) for b in groups], threads):
        rows += res
    key = lambda r: (r["use_case"], r["nx"], r["ny"], r["omega"], r["n_steps"], r["t0"], r["n_clock"], r["c_p"], r["v_lid"], r["spectrum_source"])
    return [write_csv(out / "hhl.csv", "hhl", sorted(rows, key=key))]


def cmd_resources(cfg: RunConfig, out: Path, threads: int = 1, cache=None) -> List[Path]:
    rows = []
    for (nx, ny), nc, nt in itertools.product(cfg.sizes(), cfg.n_clock, cfg.n_steps):
        est = cnot_bounds(nc, nx * ny, 9, nt, cfg.q_tilde)
        rows.append(dict(nx=nx, ny=ny, n_clock=nc, n_steps=nt, **est.as_dict()))
    return [write_csv(out / "resources.csv", "resources", rows)]


def cmd_plot(paths: Sequence[str], out: Path) -> List[Path]:
    from .plotting import plot_csv

    written = []
    for p in paths:
        written += plot_csv(Path(p), out)
    return written


COMMANDS = {
    "carleman-rmse": cmd_carleman_rmse,
    "spectra": cmd_spectra,
    "hhl": cmd_hhl,
    "resources": cmd_resources,
}


def _manifest(cfg: RunConfig, command: str, outputs: List[Path], cache: Optional[SpectrumCache]) -> dict:
    keys = []
    if cache is not None:
        keys = sorted(p.stem for p in cache.directory.glob("*.spectrum"))
    resources = [
        dict(nx=nx, ny=ny, n_clock=nc, n_steps=nt, **cnot_bounds(nc, nx * ny, 9, nt, cfg.q_tilde).as_dict())
        for (nx, ny), nc, nt in itertools.product(cfg.sizes(), cfg.n_clock, cfg.n_steps)
    ]
    return {
        "command": command,
        "config": asdict(cfg),
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "spectrum_cache_keys": keys,
        "resources": resources,
        "outputs": [str(p) for p in outputs],
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qclbm", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON run configuration (defaults are used when omitted)")
        sp.add_argument("--out", type=Path, default=Path("results"))
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--cache", type=Path, help="directory for cached spectra")
    sp = sub.add_parser("plot")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("--out", type=Path, default=Path("figures"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "plot":
            for p in cmd_plot(args.csv, args.out):
                print(p)
            return 0
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cache = SpectrumCache(args.cache) if args.cache else None
        outputs = COMMANDS[args.command](cfg, args.out, args.threads, cache)
        manifest = _manifest(cfg, args.command, outputs, cache)
        with open(args.out / f"manifest_{args.command}.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        for p in outputs:
            print(p)
        return 0
    except Exception as exc:  # reported as a machine-readable record
        record = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(record), file=sys.stderr)
        log.debug("failure", exc_info=True)
        return 2 if isinstance(exc, (ConfigError, FileNotFoundError)) else 1


if __name__ == "__main__":
    sys.exit(main())
