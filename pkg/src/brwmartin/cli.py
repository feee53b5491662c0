"""Command line: simulations, verification suites and potential-theory lookups.

Config files are flat ``section.key = value`` lines with ``#`` comments::

    chain.kind = regular_tree
    chain.degree = 3
    offspring.family = table
    offspring.pmf = "0:0.25,2:0.75"
    run.generations = 20
    run.replicas = 2000
    run.seed = 7
    output.dir = runs/ks

Every run writes a RunRecord (JSON, ``schema = 1``) next to its CSV files.
"""
import argparse
import csv
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _backend
from .brw import Observers, SupercriticalityWarning, run_replicas
from .chains import DriftedLine, Lattice3D, RegularTree, green_exact, green_mc, parse_chain
from .errors import BRWError, ClosedFormUnavailable, ConfigError, DomainError, EncodingError
from .experiments import SUITES, SuiteConfig, default_config, run_suite, trajectory_table
from .offspring import FAMILY_KEYS, from_fields, offspring_fields
from .potential import (
    LATTICE_INFINITY,
    MINUS_INFINITY,
    PLUS_INFINITY,
    ConstantOne,
    CylinderExtension,
    FullBoundary,
    KernelFunction,
    TreeRay,
    cylinder,
    cylinder_family,
    harmonic_extension,
    harmonic_extension_mc,
    harmonic_measure,
    harmonic_measure_mc,
    martin_kernel,
    martin_kernel_mc,
)

SCHEMA = 1

INT_KEYS = ("generations", "replicas", "depth", "seed", "cap", "workers", "burn_in", "window",
            "start", "gw_replicas")
FLOAT_KEYS = ("tolerance", "flag_threshold")
RUN_KEYS = ("suite", "resolution", "ray") + INT_KEYS + FLOAT_KEYS
SECTIONS = {
    "chain": ("kind", "degree", "p"),
    "offspring": ("family", "pmf", "k", "n", "p", "lam", "tail"),
    "contrast": ("family", "pmf", "k", "n", "p", "lam", "tail"),
    "run": RUN_KEYS,
    "output": ("dir",),
}


# --------------------------------------------------------------------------
# config text


def _entries(text):
    """``{(section, key): (value, line)}`` from config text."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"expected 'section.key = value', got {line!r}", line=lineno)
        name = name.strip()
        value = value.strip()
        if value[:1] in "\"'" and value[-1:] == value[:1] and len(value) >= 2:
            value = value[1:-1]
        else:
            value = value.split(" #")[0].strip()
        section, dot, key = name.partition(".")
        if not dot or section not in SECTIONS or key not in SECTIONS[section]:
            raise ConfigError("unknown config key", key=name, line=lineno)
        if (section, key) in out:
            raise ConfigError("duplicate config key", key=name, line=lineno)
        out[(section, key)] = (value, lineno)
    return out


def _typed(value, kind, name, line):
    try:
        if kind == "int":
            if value.strip().lower() in ("true", "false"):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(Fraction(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"expected {kind}, got {value!r}", key=name, line=line) from None
    return value


def _chain_from(entries):
    kind, line = entries.get(("chain", "kind"), (None, None))
    if kind is None:
        extra = [k for (s, k) in entries if s == "chain"]
        if extra:
            raise ConfigError("chain.kind is required", key="chain.kind")
        return None
    present = {k: v for (s, k), v in entries.items() if s == "chain" and k != "kind"}
    allowed = {"regular_tree": {"degree"}, "drifted_line": {"p"}, "lattice3d": set()}
    if kind not in allowed:
        raise ConfigError(f"unknown chain kind {kind!r}", key="chain.kind", line=line)
    for k, (_, ln) in present.items():
        if k not in allowed[kind]:
            raise ConfigError(f"does not apply to chain kind {kind}", key=f"chain.{k}", line=ln)
    try:
        if kind == "regular_tree":
            value, ln = present.get("degree", (None, line))
            if value is None:
                raise ConfigError("regular_tree needs chain.degree", key="chain.degree", line=line)
            return RegularTree(_typed(value, "int", "chain.degree", ln))
        if kind == "drifted_line":
            value, ln = present.get("p", (None, line))
            if value is None:
                raise ConfigError("drifted_line needs chain.p", key="chain.p", line=line)
            return DriftedLine(_typed(value, "float", "chain.p", ln))
        return Lattice3D()
    except DomainError as exc:
        key = "chain.degree" if kind == "regular_tree" else "chain.p"
        raise ConfigError(str(exc), key=key, line=present.get(key.split(".")[1], (None, line))[1]) from None


def _offspring_from(entries, section):
    fields_ = {k: v for (s, k), (v, _) in entries.items() if s == section}
    if not fields_:
        return None
    lines = {k: ln for (s, k), (_, ln) in entries.items() if s == section}
    family = fields_.get("family", "table")
    needed = [k for k in FAMILY_KEYS.get(family, ()) if k != "tail"]
    for k in needed:
        if k not in fields_:
            raise ConfigError(f"{family} offspring needs {section}.{k}", key=f"{section}.{k}",
                              line=lines.get("family"))
    try:
        return from_fields(fields_)
    except (DomainError, ValueError, ZeroDivisionError) as exc:
        bad = next((k for k in fields_ if k != "family" and k not in FAMILY_KEYS.get(family, ())), None)
        key = bad or ("family" if family not in FAMILY_KEYS else needed[0] if needed else "family")
        raise ConfigError(str(exc), key=f"{section}.{key}", line=lines.get(key)) from None


def parse_config(text):
    """Validated :class:`SuiteConfig` from config text, defaults filled in.

    With ``run.suite`` set, unspecified fields take that suite's defaults.
    """
    entries = _entries(text)
    kw = {}
    chain = _chain_from(entries)
    if chain is not None:
        kw["chain"] = chain
    for section, name in (("offspring", "offspring"), ("contrast", "contrast")):
        mu = _offspring_from(entries, section)
        if mu is not None:
            kw[name] = mu
    for key in RUN_KEYS:
        if ("run", key) not in entries:
            continue
        value, line = entries[("run", key)]
        name = f"run.{key}"
        if key in INT_KEYS:
            kw[key] = _typed(value, "int", name, line)
        elif key in FLOAT_KEYS:
            kw[key] = _typed(value, "float", name, line)
        elif key == "resolution":
            kw[key] = None if value.lower() in ("none", "") else _typed(value, "int", name, line)
        elif key == "ray":
            try:
                kw[key] = tuple(int(a) for a in value.replace(",", ".").split(".") if a != "")
            except ValueError:
                raise ConfigError(f"ray must be a word like 0.1, got {value!r}", key=name, line=line) from None
        else:
            kw[key] = value or None
    suite = kw.pop("suite", None)
    try:
        if suite is not None:
            if suite not in SUITES:
                raise ConfigError(f"unknown suite {suite!r}", key="run.suite", line=entries[("run", "suite")][1])
            seed = kw.pop("seed", 7)
            return default_config(suite, seed=seed, **kw)
        return SuiteConfig(**kw)
    except ConfigError as exc:
        if exc.line is None and exc.key is not None:
            for (s, k), (_, line) in entries.items():
                if k == exc.key:
                    raise ConfigError(exc.message, key=f"{s}.{k}", line=line) from None
        raise
    except (DomainError, EncodingError) as exc:
        raise ConfigError(str(exc)) from None


def parse_output(text):
    entries = _entries(text)
    return {k: v for (s, k), (v, _) in entries.items() if s == "output"}


def format_config(cfg):
    """Config text that :func:`parse_config` reads back to an equal config."""
    lines = [f"# brwmartin config, schema {SCHEMA}"]
    chain = cfg.chain
    lines.append(f"chain.kind = {chain.kind}")
    if isinstance(chain, RegularTree):
        lines.append(f"chain.degree = {chain.degree}")
    elif isinstance(chain, DriftedLine):
        lines.append(f"chain.p = {chain.p!r}")
    for section, mu in (("offspring", cfg.offspring), ("contrast", cfg.contrast)):
        if mu is None:
            continue
        for k, v in offspring_fields(mu).items():
            lines.append(f'{section}.{k} = "{v}"' if k == "pmf" else f"{section}.{k} = {v}")
    if cfg.suite is not None:
        lines.append(f"run.suite = {cfg.suite}")
    for key in INT_KEYS:
        lines.append(f"run.{key} = {getattr(cfg, key)}")
    for key in FLOAT_KEYS:
        lines.append(f"run.{key} = {getattr(cfg, key)!r}")
    lines.append(f"run.resolution = {'none' if cfg.resolution is None else cfg.resolution}")
    lines.append("run.ray = " + ".".join(map(str, cfg.ray)))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    kind: str
    config: str
    seed: int
    digests: list
    verdict: dict = None
    runtime: float = 0.0
    oracles: dict = field(default_factory=dict)
    backend: str = ""
    schema: int = SCHEMA

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported run record schema {data.get('schema')!r}", key="schema")
        return cls(**data)

    def suite_config(self):
        return parse_config(self.config)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def simulation_observers(cfg):
    chain = cfg.chain
    if isinstance(chain, Lattice3D):
        fam = [FullBoundary()]
    else:
        fam = cylinder_family(chain, cfg.depth)
    harmonics = [ConstantOne()] + [CylinderExtension(C) for C in fam]
    if isinstance(chain, RegularTree) and cfg.resolution is None:
        harmonics.append(KernelFunction(TreeRay(cfg.ray)))
    elif isinstance(chain, DriftedLine):
        harmonics.append(KernelFunction(MINUS_INFINITY))
    return Observers(fam, harmonics)


def simulate(cfg, out_dir):
    t0 = time.perf_counter()
    S = run_replicas(cfg.chain, cfg.offspring, cfg.generations, cfg.replicas, cfg.seed,
                     simulation_observers(cfg), cap=cfg.cap, resolution=cfg.resolution, workers=cfg.workers)
    runtime = time.perf_counter() - t0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, rows = trajectory_table(S)
    write_csv(out / "simulation.csv", header, rows)
    rec = RunRecord("simulation", format_config(cfg), cfg.seed, [s.digest() for s in S], None, runtime,
                    {}, _backend.default_name())
    (out / "run_record.json").write_text(rec.to_json())
    return S, rec


def verify(cfg, out_dir):
    result = run_suite(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.suite
    (out / f"{name}_verdict.json").write_text(result.verdict.to_text())
    for table, (header, rows) in sorted(result.tables.items()):
        write_csv(out / f"{name}_{table}.csv", header, rows)
    rec = RunRecord("suite", format_config(cfg), cfg.seed, result.digests, result.verdict.as_dict(),
                    result.verdict.runtime, result.oracles, _backend.default_name())
    (out / f"{name}_record.json").write_text(rec.to_json())
    return result, rec


def replay(record):
    """Re-run a suite record; returns ``(same, new_verdict)``."""
    if record.kind != "suite":
        cfg = record.suite_config()
        S = run_replicas(cfg.chain, cfg.offspring, cfg.generations, cfg.replicas, cfg.seed,
                         simulation_observers(cfg), cap=cfg.cap, resolution=cfg.resolution, workers=cfg.workers)
        return [s.digest() for s in S] == record.digests, None
    result = run_suite(record.suite_config())
    same = result.verdict.as_dict() == record.verdict and result.digests == record.digests
    return same, result.verdict


# --------------------------------------------------------------------------
# potential lookups


def parse_state(chain, text):
    text = text.strip()
    if isinstance(chain, RegularTree):
        if text in ("root", "o", ""):
            return ()
        return chain.validate([int(a) for a in text.replace(",", ".").split(".") if a != ""])
    if isinstance(chain, DriftedLine):
        return chain.validate(int(text))
    return chain.validate([int(a) for a in text.split(",")])


def parse_target(chain, text):
    """A state, or a boundary point: ``ray:0.1`` (tree), ``+inf``/``-inf`` (line), ``inf`` (lattice)."""
    t = text.strip()
    if isinstance(chain, RegularTree) and t.startswith("ray"):
        body = t.partition(":")[2]
        return TreeRay(parse_state(chain, body) if body else ())
    if isinstance(chain, DriftedLine) and t in ("+inf", "inf", "-inf"):
        return MINUS_INFINITY if t == "-inf" else PLUS_INFINITY
    if isinstance(chain, Lattice3D) and t == "inf":
        return LATTICE_INFINITY
    return parse_state(chain, t)


def _fmt(v):
    return "n/a" if v is None else f"{v!r}"


def potential(args, stdout):
    chain = parse_chain(args.chain)
    if args.what == "green":
        x, y = parse_state(chain, args.x), parse_state(chain, args.y)
        exact = green_exact(chain, x, y)
        est, se = green_mc(chain, x, y, args.walks, args.horizon, args.seed)
        print(f"G(x, y) exact {_fmt(exact)}", file=stdout)
        print(f"G(x, y) monte-carlo {est!r} +/- {se!r} ({args.walks} walks, horizon {args.horizon})", file=stdout)
    elif args.what == "kernel":
        x, y = parse_state(chain, args.x), parse_target(chain, args.y)
        try:
            exact = martin_kernel(chain, x, y)
        except ClosedFormUnavailable:
            exact = None
        print(f"K(x, y) exact {_fmt(exact)}", file=stdout)
        if isinstance(y, (TreeRay, type(PLUS_INFINITY), type(LATTICE_INFINITY))):
            print("K(x, y) monte-carlo n/a (boundary target)", file=stdout)
        else:
            est, se = martin_kernel_mc(chain, x, y, args.walks, args.horizon, args.seed)
            print(f"K(x, y) monte-carlo {est!r} +/- {se!r} ({args.walks} walks, horizon {args.horizon})",
                  file=stdout)
    else:
        C = cylinder(chain, args.cylinder)
        if args.x in (None, "root", "o"):
            exact = harmonic_measure(chain, C)
            est, se = harmonic_measure_mc(chain, C, args.walks, args.horizon, args.seed)
        else:
            x = parse_state(chain, args.x)
            exact = harmonic_extension(chain, C, x)
            est, se = harmonic_extension_mc(chain, C, x, args.walks, args.horizon, args.seed)
        print(f"{C.label} exact {_fmt(exact)}", file=stdout)
        print(f"{C.label} monte-carlo {est!r} +/- {se!r} ({args.walks} walks, horizon {args.horizon})",
              file=stdout)


# --------------------------------------------------------------------------
# entry point


def _load_config(args, suite=None):
    if args.config:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
        out = parse_output(text).get("dir")
        if suite is not None:
            if cfg.suite not in (None, suite):
                raise ConfigError(f"config is for suite {cfg.suite!r}, not {suite!r}", key="run.suite")
            if cfg.suite is None:
                cfg = cfg.replace(suite=suite)
    else:
        cfg = default_config(suite) if suite is not None else SuiteConfig()
        out = None
    changes = {k: getattr(args, k) for k in ("seed", "generations", "replicas", "workers")
               if getattr(args, k, None) is not None}
    if changes:
        cfg = cfg.replace(**changes)
    return cfg, args.out or out or "runs"


def build_parser():
    p = argparse.ArgumentParser(prog="brwmartin", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--config", help="config file (section.key = value lines)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--generations", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("simulate", help="run replicas and write per-generation CSV plus a run record")
    run_flags(sp)
    sp = sub.add_parser("verify", help="run a verification suite; exit status 0 iff it passes")
    sp.add_argument("suite", choices=sorted(SUITES))
    run_flags(sp)
    sp = sub.add_parser("potential", help="exact and Monte-Carlo potential-theory quantities")
    sp.add_argument("what", choices=["green", "kernel", "measure"])
    sp.add_argument("--chain", required=True, help="regular_tree:3, drifted_line:2/3 or lattice3d")
    sp.add_argument("--x", default="root", help="state (tree word 0.1, line int, lattice 1,0,0)")
    sp.add_argument("--y", default="root", help="state or boundary point (ray:0.1, +inf, -inf, inf)")
    sp.add_argument("--cylinder", default="0", help="cylinder word, +inf/-inf or all")
    sp.add_argument("--walks", type=int, default=100_000)
    sp.add_argument("--horizon", type=int, default=400)
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("replay", help="re-run a run record and compare")
    sp.add_argument("record")
    return p


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SupercriticalityWarning)
            code = _dispatch(args, stdout)
        for w in caught:
            print(f"warning: {w.message}", file=stderr)
        return code
    except (BRWError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2


def _dispatch(args, stdout):
    if args.command == "simulate":
        cfg, out = _load_config(args)
        S, rec = simulate(cfg, out)
        W = np.array([s.W[-1] for s in S])
        print(f"simulated {len(S)} replicas x {cfg.generations} generations (seed {cfg.seed}); "
              f"mean W_{cfg.generations} = {W.mean():.6g}; wrote {out}", file=stdout)
        return 0
    if args.command == "verify":
        cfg, out = _load_config(args, args.suite)
        result, _ = verify(cfg, out)
        print(result.verdict.report(), file=stdout)
        print(f"seed {cfg.seed}; wrote {out}", file=stdout)
        return 0 if result.verdict.passed else 1
    if args.command == "potential":
        potential(args, stdout)
        return 0
    record = RunRecord.from_json(Path(args.record).read_text())
    same, verdict = replay(record)
    print("replay identical" if same else "replay DIFFERS", file=stdout)
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
