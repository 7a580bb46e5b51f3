"""Batch front end: config parsing, task dispatch and JSONL emission.

Config grammar (one ``key = value`` per line, ``[section]`` headers, ``#``
starts a comment)::

    task = estimate-nb
    seed = 7

    [system]
    ref = zoo:doubling          # or: space / maps / rule / weights
    [target]
    set = interval:0,0.5        # full | interval:a,b | cylinder:01 | grid:N:a,b | probe
    [schedule]
    eps = 0.1, 0.2
    n = 8..16                   # ranges a..b or a..b:step, or a comma list
    n_max = 16
    alpha_bracket = 0, 5
    delta = 0.1
    [measure]
    family = all                # or a comma list of family names
    count = 2000
    csv = path/to/measure.csv
    [verify]
    instances = 20
    trials = 1000
    kinds = interval, torus, shift
    [output]
    path = run.jsonl
    csv = table.csv
    mode = exact
    threads = 1

Every record carries ``schema_version``.  Run times go to a separate
``<out>.timing.jsonl`` side file so the main output is byte-identical
across runs with the same config and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, experiments, zoo
from .dynamics import MapSequence, parse_map, parse_space
from .errors import ConfigurationError, EntropyError
from .estimators import (
    TargetSet,
    bk_entropy,
    katok_entropy,
    nb_report,
    nwb_report,
)
from .measures import FiniteMeasure

SCHEMA_VERSION = 1
TASKS = ("estimate-nb", "estimate-nwb", "estimate-katok", "estimate-bk", "verify-sandwich",
         "verify-prop25", "verify-vitali", "verify-frostman", "verify-structural",
         "verify-katok-nb", "zoo-list")
SAMPLING = {"estimate-katok", "estimate-bk", "verify-sandwich", "verify-prop25",
            "verify-vitali", "verify-frostman", "verify-structural", "verify-katok-nb"}
NEEDS_SYSTEM = {"estimate-nb", "estimate-nwb", "estimate-katok", "estimate-bk",
                "verify-prop25", "verify-katok-nb"}
NEEDS_EPS = NEEDS_SYSTEM
NEEDS_N = NEEDS_SYSTEM
KEYS = {
    "": {"task", "seed"},
    "system": {"ref", "space", "maps", "rule", "weights", "system_seed"},
    "target": {"set"},
    "schedule": {"eps", "n", "n_max", "alpha_bracket", "delta", "neutralized"},
    "measure": {"family", "count", "csv"},
    "verify": {"instances", "trials", "kinds"},
    "output": {"path", "csv", "mode", "threads"},
}
EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class ConfigErrors(ConfigurationError):
    """All problems found in one config, each tagged with its line number."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("; ".join(f"line {ln}: {msg}" if ln else msg for ln, msg in errors))


@dataclass(frozen=True)
class RunConfig:
    task: str
    seed: int | None = None
    system: str | None = None        # zoo:<name> or an inline descriptor
    space: str | None = None
    maps: tuple[str, ...] = ()
    rule: str = "autonomous"
    weights: tuple[float, ...] | None = None
    system_seed: int = 0
    target: str = "probe"
    eps: tuple[float, ...] = ()
    n: tuple[int, ...] = ()
    n_max: int | None = None
    alpha_bracket: tuple[float, float] = (0.0, 5.0)
    delta: tuple[float, ...] = (0.1,)
    neutralized: bool = True
    family: tuple[str, ...] = ("all",)
    count: int = 2000
    measure_csv: str | None = None
    instances: int = 20
    trials: int = 1000
    kinds: tuple[str, ...] = ("interval", "torus", "shift")
    out: str | None = None
    csv: str | None = None
    mode: str = "exact"
    threads: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def build_system(self) -> MapSequence:
        if self.system is not None:
            return zoo.get(self.system).system
        return MapSequence(parse_space(self.space), tuple(parse_map(m) for m in self.maps),
                           self.rule, self.system_seed, self.weights or ())

    def build_target(self, system: MapSequence) -> TargetSet:
        text = self.target
        if text == "probe":
            if self.system is None:
                return TargetSet()
            return zoo.get(self.system).probe(max(self.eps), self.n_max or 16)
        if text.startswith("grid:"):
            _, count, span = text.split(":")
            a, b = (float(v) for v in span.split(","))
            k = int(count)
            return TargetSet("points", points=a + (b - a) * np.arange(k) / k)
        return TargetSet.parse(text)


# --------------------------------------------------------------------------
# parsing


def _floats(v: str) -> tuple[float, ...]:
    out = tuple(float(x) for x in v.replace(" ", "").split(",") if x)
    if not out:
        raise ValueError("empty list")
    return out


def _ints(v: str) -> tuple[int, ...]:
    v = v.replace(" ", "")
    if ".." in v:
        lo, _, rest = v.partition("..")
        hi, _, step = rest.partition(":")
        out = tuple(range(int(lo), int(hi) + 1, int(step or 1)))
    else:
        out = tuple(int(x) for x in v.split(",") if x)
    if not out:
        raise ValueError("empty schedule")
    return out


def _words(v: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _bool(v: str) -> bool:
    if v.lower() in ("true", "yes", "1"):
        return True
    if v.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_FIELDS = {
    "task": ("task", str), "seed": ("seed", int),
    "ref": ("system", str), "space": ("space", str),
    "maps": ("maps", lambda v: tuple(m.strip() for m in v.split(";") if m.strip())),
    "rule": ("rule", str), "weights": ("weights", _floats), "system_seed": ("system_seed", int),
    "set": ("target", str),
    "eps": ("eps", _floats), "n": ("n", _ints), "n_max": ("n_max", int),
    "alpha_bracket": ("alpha_bracket", _floats), "delta": ("delta", _floats),
    "neutralized": ("neutralized", _bool),
    "family": ("family", _words), "count": ("count", int),
    "instances": ("instances", int), "trials": ("trials", int), "kinds": ("kinds", _words),
    "path": ("out", str), "mode": ("mode", str), "threads": ("threads", int),
}


def parse_config(text: str, seed: int | None = None) -> RunConfig:
    """Parse and validate; raises ConfigErrors listing every problem found.

    A ``seed`` argument overrides the config value.
    """
    errors: list[tuple[int, str]] = []
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    section = ""
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in KEYS:
                errors.append((ln, f"unknown section {line}"))
                section = None
            else:
                section = line[1:-1].strip()
            continue
        if section is None:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            errors.append((ln, f"expected key = value, got {line!r}"))
            continue
        if key not in KEYS[section]:
            errors.append((ln, f"unknown key {key!r} in section [{section}]"))
            continue
        if section in ("measure", "output") and key == "csv":
            name, conv = ("measure_csv" if section == "measure" else "csv"), str
        else:
            name, conv = _FIELDS[key]
        if name in values:
            errors.append((ln, f"duplicate key {key!r}"))
            continue
        where[name] = ln
        try:
            values[name] = conv(value)
        except ValueError as exc:
            errors.append((ln, f"malformed value for {key!r}: {exc}"))
    if seed is not None:
        values["seed"] = seed
    errors += _validate(values, where)
    if errors:
        raise ConfigErrors(sorted(errors))
    return RunConfig(**values)


def _validate(v: dict, where: dict) -> list[tuple[int, str]]:
    errs = []
    # presence checks look at ``where`` so a malformed value is not also
    # reported as missing
    task = v.get("task")
    if task is None:
        return [] if "task" in where else [(0, "missing key 'task'")]
    if task not in TASKS:
        return [(where["task"], f"unknown task {task!r}")]
    if task in NEEDS_SYSTEM and "system" not in where and "space" not in where:
        errs.append((0, "missing key 'ref' (or 'space' and 'maps') in [system]"))
    if "space" in where and "maps" not in where:
        errs.append((where["space"], "inline system needs 'maps'"))
    if task in NEEDS_EPS and "eps" not in where:
        errs.append((0, "missing key 'eps' in [schedule]"))
    if task in NEEDS_N and "n" not in where:
        errs.append((0, "missing key 'n' in [schedule]"))
    if task in SAMPLING and "seed" not in v and "seed" not in where:
        errs.append((0, f"missing key 'seed' (task {task} samples)"))
    for key in ("eps", "delta"):
        if key in v and not all(0 < x for x in v[key]):
            errs.append((where[key], f"'{key}' entries must be positive"))
    if "delta" in v and not all(x < 1 for x in v["delta"]):
        errs.append((where["delta"], "'delta' entries must lie in (0, 1)"))
    if "n" in v and min(v["n"]) < 1:
        errs.append((where["n"], "'n' entries must be positive"))
    if "n" in v and "n_max" in v and max(v["n"]) > v["n_max"]:
        errs.append((where["n_max"], "'n_max' is below the largest scheduled order"))
    if "n" in v and "n_max" not in v:
        v["n_max"] = max(v["n"])
    if "alpha_bracket" in v and (len(v["alpha_bracket"]) != 2
                                 or not v["alpha_bracket"][0] < v["alpha_bracket"][1]):
        errs.append((where["alpha_bracket"], "'alpha_bracket' needs two increasing numbers"))
    if v.get("mode", "exact") not in ("exact", "greedy"):
        errs.append((where["mode"], "'mode' must be exact or greedy"))
    if v.get("threads", 1) < 1:
        errs.append((where["threads"], "'threads' must be positive"))
    for k in v.get("kinds", ()):
        if k not in ("interval", "torus", "shift"):
            errs.append((where["kinds"], f"unknown space kind {k!r}"))
    if "system" in v:
        try:
            zoo.get(v["system"])
        except KeyError as exc:
            errs.append((where["system"], str(exc.args[0])))
    elif "space" in v and "maps" in v:
        try:
            parse_space(v["space"])
            for m in v["maps"]:
                parse_map(m)
        except (ValueError, KeyError) as exc:
            errs.append((where["maps"], f"bad system descriptor: {exc}"))
    return errs


# --------------------------------------------------------------------------
# running


def _plain(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, default=_plain, allow_nan=False)


def _finite(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


@dataclass
class RunResult:
    records: list[dict]
    tables: list[dict] = field(default_factory=list)
    violated: bool = False


def _measures(cfg: RunConfig, system, target) -> list[tuple[str, FiniteMeasure]]:
    if cfg.measure_csv:
        text = Path(cfg.measure_csv).read_text()
        return [(Path(cfg.measure_csv).stem, FiniteMeasure.from_csv(system.space, text))]
    fam = experiments.measure_family(system, target, cfg.seed, cfg.count)
    if cfg.family != ("all",):
        known = {name for name, _ in fam}
        missing = [f for f in cfg.family if f not in known]
        if missing:
            raise ConfigurationError(f"unknown measure family {missing}; known: {sorted(known)}")
        fam = [(name, mu) for name, mu in fam if name in cfg.family]
    return fam


def _reference(cfg: RunConfig, eps: float) -> dict | None:
    if cfg.system is None:
        return None
    entry = zoo.get(cfg.system)
    if entry.reference is None:
        return None
    ref, note = entry.reference_exponent(eps)
    return {"alpha_ref": ref, "provenance": note}


def _pmap(cfg: RunConfig, fn, items):
    if cfg.threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(cfg.threads) as pool:
        return list(pool.map(fn, items))


def _estimate(cfg: RunConfig) -> RunResult:
    system = cfg.build_system()
    target = cfg.build_target(system)
    task = cfg.task
    records, tables = [], []
    if task in ("estimate-nb", "estimate-nwb"):
        def point(eps):
            if task == "estimate-nb":
                return nb_report(system, target, eps, cfg.n, cfg.n_max, cfg.neutralized,
                                 mode=cfg.mode, seed=cfg.seed or 0, bracket=cfg.alpha_bracket)
            return nwb_report(system, target, eps, cfg.n, cfg.n_max, cfg.neutralized,
                              bracket=cfg.alpha_bracket)

        reps = _pmap(cfg, point, cfg.eps)
        for eps, rep in zip(cfg.eps, reps):
            rec = {"kind": "point", "eps": eps, "report": rep.to_dict()}
            ref = _reference(cfg, eps)
            if ref:
                ref["relative_error"] = (rep.alpha - ref["alpha_ref"]) / ref["alpha_ref"]
                rec["oracle"] = ref
            records.append(rec)
            tables += [{"eps": eps, "order": m, "count": c} for m, c in rep.details["table"]]
        summary = {"kind": "summary", "exponents": {repr(e): r.alpha for e, r in zip(cfg.eps, reps)},
                   "slack": {repr(e): r.slack for e, r in zip(cfg.eps, reps)},
                   "target": target.descriptor()}
        return RunResult(records + [summary], tables)
    measures = _measures(cfg, system, target)
    if task == "estimate-katok":
        jobs = [(name, mu, eps) for name, mu in measures for eps in cfg.eps]
        reps = _pmap(cfg, lambda j: katok_entropy(system, j[1], j[2], cfg.delta, cfg.n,
                                                   cfg.n_max, cfg.neutralized, cfg.seed,
                                                   cfg.alpha_bracket), jobs)
        summary = {}
        for (name, _, eps), rep in zip(jobs, reps):
            for delta, r in sorted(rep.by_delta, reverse=True):
                records.append({"kind": "point", "measure": name, "eps": eps, "delta": delta,
                                "report": r.to_dict()})
                tables += [{"measure": name, "eps": eps, "delta": delta, "order": m, "count": c}
                           for m, c in r.details["table"]]
            summary[f"{name}@{eps!r}"] = {"value": rep.value.alpha, "slack": rep.value.slack,
                                          "trend": rep.trend()}
        return RunResult(records + [{"kind": "summary", "exponents": summary,
                                     "target": target.descriptor()}], tables)
    # estimate-bk
    window = (min(cfg.n), max(cfg.n))
    jobs = [(name, mu, eps) for name, mu in measures for eps in cfg.eps]
    reps = _pmap(cfg, lambda j: bk_entropy(j[1], system, j[2], window, cfg.neutralized), jobs)
    summary = {}
    for (name, _, eps), rep in zip(jobs, reps):
        records.append({"kind": "point", "measure": name, "eps": eps, "report": rep.to_dict()})
        tables += [{"measure": name, "eps": eps, "order": window[0] + i, "value": v}
                   for i, v in enumerate(rep.per_order)]
        summary[f"{name}@{eps!r}"] = {"value": rep.value, "window_term": rep.window_term}
    return RunResult(records + [{"kind": "summary", "values": summary,
                                 "target": target.descriptor()}], tables)


def _verify(cfg: RunConfig) -> RunResult:
    task, seed = cfg.task, cfg.seed
    if task == "verify-sandwich":
        rows = [p.to_dict() for p in experiments.sandwich_suite(seed, cfg.instances)]
        key = "holds"
    elif task == "verify-frostman":
        rows = experiments.frostman_suite(seed, cfg.instances)
        key = "passed"
    elif task == "verify-vitali":
        rows = _pmap(cfg, lambda k: experiments.vitali_suite(k, cfg.trials, seed), cfg.kinds)
        key = "holds"
    elif task == "verify-structural":
        rows = experiments.structural_suite(seed)
        key = "holds"
    else:
        system = cfg.build_system()
        target = cfg.build_target(system)
        name = cfg.system or system.descriptor()
        measures = _measures(cfg, system, target)
        rows = []
        for eps in cfg.eps:
            if task == "verify-prop25":
                rows += _pmap(cfg, lambda m: experiments.bk_katok_check(
                    name, system, m[0], m[1], eps, cfg.n, cfg.delta).to_dict(), measures)
            else:
                nb = nb_report(system, target, eps, cfg.n, cfg.n_max, cfg.neutralized,
                               mode=cfg.mode)
                rows += _pmap(cfg, lambda m: experiments.katok_nb_check(
                    name, system, target, m[0], m[1], eps, cfg.n, nb, cfg.delta).to_dict(),
                    measures)
        key = "holds"
    failed = sum(not r[key] for r in rows)
    records = [{"kind": "point", **r} for r in rows]
    records.append({"kind": "summary", "checked": len(rows), "violations": failed})
    return RunResult(records, rows, violated=failed > 0)


def run(cfg: RunConfig) -> RunResult:
    if cfg.task == "zoo-list":
        recs = []
        for name in zoo.list_entries():
            e = zoo.get(name)
            recs.append({"kind": "point", "name": name, "space": e.space.descriptor(),
                         "exploratory": e.exploratory, "provenance": e.provenance})
        return RunResult(recs + [{"kind": "summary", "entries": len(recs)}])
    if cfg.task.startswith("estimate-"):
        return _estimate(cfg)
    return _verify(cfg)


ECHO_SKIP = ("out", "csv", "threads")   # destinations and parallelism do not change results


def render(cfg: RunConfig, result: RunResult) -> str:
    echo = {k: v for k, v in cfg.to_dict().items() if k not in ECHO_SKIP}
    lines = []
    for rec in result.records:
        full = {"schema_version": SCHEMA_VERSION, "task": cfg.task, "version": __version__,
                **_finite(rec)}
        if rec["kind"] == "summary":
            full["config"] = echo
        lines.append(_dump(full))
    return "\n".join(lines) + "\n"


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    keys = sorted({k for r in rows for k in r})
    wr = csv.DictWriter(buf, keys, lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: json.dumps(v, default=_plain) if isinstance(v, (list, dict)) else v
                     for k, v in r.items()})
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="neutral-entropy",
                                 description="Neutralized entropy estimators and checks.")
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="JSONL output path (default: stdout)")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--mode", choices=("greedy", "exact"))
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text, seed=args.seed)
        over = {k: v for k, v in (("out", args.out), ("threads", args.threads),
                                  ("mode", args.mode)) if v is not None}
        cfg = replace(cfg, **over)
        if cfg.threads < 1:
            raise ConfigurationError("--threads must be positive")
        t0 = time.perf_counter()
        result = run(cfg)
        elapsed = int(round((time.perf_counter() - t0) * 1000))
        body = render(cfg, result)
        if cfg.out:
            Path(cfg.out).write_text(body)
            Path(cfg.out + ".timing.jsonl").write_text(
                _dump({"schema_version": SCHEMA_VERSION, "task": cfg.task,
                       "runtime_ms": elapsed}) + "\n")
        else:
            sys.stdout.write(body)
            print(f"runtime_ms {elapsed}", file=sys.stderr)
        if cfg.csv and result.tables:
            Path(cfg.csv).write_text(_csv_text(result.tables))
    except (EntropyError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_VIOLATION if result.violated else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
