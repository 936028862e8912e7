"""Command-line orchestration: ``spinmet run|validate|report``.

A run configuration is a JSON object::

    {
      "task": "met-scan" | "bond-sweep" | "param-sweep" | "haar-campaign" | "fit" | "bounds",
      "seed": 0,                     # mandatory
      "output_dir": "out/run1",      # relative paths resolve against the config file
      "parallelism": 1,              # optional, default: available cores
      "device": "device.json" | {...inline...} | {"table1": true},
      "n_qubits": 1,                 # optional override of the device file
      ...task blocks...
    }

Exit codes: 0 success (non-converged rows are flagged, not fatal),
1 internal error, 2 configuration error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import fits, gatebounds, haar, metscan
from .costs import CostFunction, HamiltonianFormatError, PauliSum, bundled_hamiltonian, \
    bundled_series
from .device import DeviceParams, as_ket, table_one
from .grape import OptimizerConfig

TASKS = ("met-scan", "bond-sweep", "param-sweep", "haar-campaign", "fit", "bounds")
EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3


class ConfigError(Exception):
    """Malformed or incomplete configuration (exit 2)."""


class ValidationFailure(Exception):
    """Well-formed input with physically invalid content (exit 3)."""


# -- configuration -------------------------------------------------------------

def _read_json(path: Path, what: str):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{what} {path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing required field {key!r}")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"field {key!r} has the wrong type ({type(value).__name__})")
    return value


class RunConfig:
    """Parsed and validated run configuration with resolved inputs."""

    def __init__(self, raw: dict, base: Path):
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        self.raw = raw
        self.base = base
        self.task = _require(raw, "task", str)
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r} (expected one of {', '.join(TASKS)})")
        seed = _require(raw, "seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        self.seed = seed
        self.output_dir = self.path(raw.get("output_dir", "spinmet-out"))
        par = raw.get("parallelism", os.cpu_count() or 1)
        if not isinstance(par, int) or par < 1:
            raise ConfigError("parallelism must be a positive integer")
        self.parallelism = par
        builder = getattr(self, "_build_" + self.task.replace("-", "_"))
        builder()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls(_read_json(path, "config"), path.resolve().parent)

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    # building blocks
    def device(self) -> DeviceParams:
        spec = self.raw.get("device", {"table1": True})
        n = self.raw.get("n_qubits")
        try:
            if isinstance(spec, str):
                data = _read_json(self.path(spec), "device file")
                if not isinstance(data, dict):
                    raise ConfigError(f"device file {spec}: expected a JSON object")
                return DeviceParams.from_dict(data, n_qubits=n)
            if isinstance(spec, dict) and spec.get("table1"):
                return table_one(n or 1)
            if isinstance(spec, dict):
                return DeviceParams.from_dict(spec, n_qubits=n)
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"device: {exc}") from exc
        except ValueError as exc:
            if "unknown device keys" in str(exc):
                raise ConfigError(f"device: {exc}") from exc
            raise ValidationFailure(f"device: {exc}") from exc
        raise ConfigError("device must be a file path or an object")

    def hamiltonian(self, spec) -> PauliSum:
        try:
            if isinstance(spec, str):
                return PauliSum.load(self.path(spec))
            if isinstance(spec, dict) and "bundled" in spec:
                return bundled_hamiltonian(spec["bundled"])
        except HamiltonianFormatError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError("hamiltonian must be a file path or {'bundled': name}")

    def series(self, spec) -> list:
        try:
            if isinstance(spec, dict) and "bundled" in spec:
                out = bundled_series(spec["bundled"])
            elif isinstance(spec, list):
                out = [self.hamiltonian(s) for s in spec]
            else:
                raise ConfigError("series must be a list of files or {'bundled': prefix}")
        except HamiltonianFormatError as exc:
            raise ConfigError(str(exc)) from exc
        if not out:
            raise ConfigError("hamiltonian series is empty")
        return out

    def state(self, spec, n: int) -> np.ndarray:
        if isinstance(spec, str):
            if len(spec) != n or set(spec) - {"0", "1"}:
                raise ConfigError(f"state {spec!r} is not a bitstring of length {n}")
            return as_ket(spec)
        if isinstance(spec, list):
            try:
                vec = np.array([complex(a) if not isinstance(a, list) else complex(a[0], a[1])
                                for a in spec])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"state amplitudes: {exc}") from exc
            if vec.shape != (2 ** n,):
                raise ConfigError(f"state needs {2 ** n} amplitudes, got {vec.size}")
            if abs(np.linalg.norm(vec) - 1) > 1e-12:
                raise ValidationFailure("state is not normalized")
            return vec
        raise ConfigError("state must be a bitstring or a list of amplitudes")

    def optimizer(self) -> OptimizerConfig:
        block = dict(self.raw.get("optimizer", {}))
        block["seed"] = self.seed
        try:
            return OptimizerConfig.from_dict(block)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"optimizer: {exc}") from exc

    def scan(self) -> metscan.MetScanConfig:
        try:
            return metscan.MetScanConfig.from_dict(_require(self.raw, "scan", dict))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scan: {exc}") from exc

    def cost_and_state(self, params: DeviceParams):
        """Either ``hamiltonian`` (HF initial state) or ``initial`` + ``target`` states."""
        if "hamiltonian" in self.raw:
            pauli = self.hamiltonian(self.raw["hamiltonian"])
            if pauli.n_qubits != params.n_qubits:
                raise ValidationFailure(
                    f"hamiltonian acts on {pauli.n_qubits} qubits, device has {params.n_qubits}")
            if pauli.hf_state is None:
                raise ConfigError("hamiltonian lacks hf_state metadata")
            return CostFunction.expectation(pauli), metscan.hf_state(pauli)
        if "target" in self.raw:
            n = params.n_qubits
            psi0 = self.state(self.raw.get("initial", "0" * n), n)
            return CostFunction.infidelity(self.state(self.raw["target"], n)), psi0
        raise ConfigError("need either 'hamiltonian' or 'target'")

    # task builders: resolve all inputs so validation happens before any work
    def _build_met_scan(self):
        self.params = self.device()
        self.cost, self.psi0 = self.cost_and_state(self.params)
        self.scan_config = self.scan()
        self.grape = self.optimizer()

    def _build_bond_sweep(self):
        self.params = self.device()
        self.series_list = self.series(_require(self.raw, "series"))
        for h in self.series_list:
            if h.n_qubits != self.params.n_qubits:
                raise ValidationFailure("series qubit count does not match the device")
        self.direction = self.raw.get("direction", "ascending")
        if self.direction not in ("ascending", "descending"):
            raise ConfigError("direction must be 'ascending' or 'descending'")
        self.scan_config = self.scan()
        self.grape = self.optimizer()

    def _build_param_sweep(self):
        self._build_met_scan()
        self.axis = _require(self.raw, "axis", str)
        if self.axis not in ("iq_max", "j_max", "delta_b"):
            raise ConfigError(f"unknown sweep axis {self.axis!r}")
        self.factors = _require(self.raw, "factors", list)
        if not self.factors or any(not isinstance(f, (int, float)) or not f > 0
                                   for f in self.factors):
            raise ConfigError("factors must be a nonempty list of positive numbers")

    def _build_haar_campaign(self):
        self.params = self.device()
        self.n_pairs = _require(self.raw, "n_pairs", int)
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1")
        self.t_grid = self._t_grid()
        self.n_segments = int(self.raw.get("n_segments", 40))
        self.threshold = float(self.raw.get("threshold", 1e-7))
        self.stop_after_failures = self.raw.get("stop_after_failures")
        self.grape = self.optimizer()
        self._bootstrap_block()
        self.fit_block = self.raw.get("fit", {"models": ["hi", "expansion"]})

    def _build_fit(self):
        src = _require(self.raw, "data", dict)
        self.d = int(src.get("d", 2 ** int(self.raw.get("n_qubits", 1))))
        if "campaign_dir" in src:
            self.fit_source = ("campaign", self.path(src["campaign_dir"]))
        elif "synthetic" in src:
            syn = src["synthetic"]
            comps = syn.get("components")
            if not isinstance(comps, list) or not comps:
                raise ConfigError("synthetic.components must be a list of {v, weight}")
            self.fit_source = ("synthetic", syn)
            self.t_grid = self._t_grid(src)
        else:
            raise ConfigError("data needs 'campaign_dir' or 'synthetic'")
        self._bootstrap_block()
        self.fit_block = self.raw.get("fit", {"models": ["hi", "expansion"]})

    def _build_bounds(self):
        b = self.raw.get("budget", {})
        try:
            self.budget = gatebounds.reference_bounds(b.get("pi_gate_time", 200.0),
                                                      b.get("swap_time", 0.5))
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from exc

    def _t_grid(self, block=None) -> list:
        block = self.raw if block is None else block
        if "t_grid" in block:
            grid = block["t_grid"]
        elif "t_range" in block:
            grid = metscan.time_grid(**block["t_range"])
        else:
            raise ConfigError("need 't_grid' or 't_range'")
        grid = [float(t) for t in grid]
        if any(b <= a for a, b in zip(grid, grid[1:])) or not grid:
            raise ConfigError("t_grid must be nonempty and strictly increasing")
        return grid

    def _bootstrap_block(self):
        b = self.raw.get("bootstrap", {})
        self.n_resamples = int(b.get("n_resamples", 100_000))
        self.confidence = float(b.get("confidence", 0.9999))


# -- execution -----------------------------------------------------------------

@contextmanager
def _mapper(parallelism: int):
    if parallelism <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        yield lambda fn, items: pool.map(fn, items, chunksize=1)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(value):
    """JSON-safe floats (NaN/inf become None)."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _run_met_scan(cfg: RunConfig, out: Path) -> dict:
    res = metscan.scan_met(cfg.params, cfg.cost, cfg.psi0, cfg.scan_config, cfg.grape)
    metscan.write_csv(out / "scan.csv", res.to_rows())
    metscan.write_csv(out / "met.csv", [{"met": res.met_estimate,
                                         "bracket_low": res.met_bracket[0],
                                         "bracket_high": res.met_bracket[1]}])
    _write_json(out / "result.json", _clean(res.to_dict(include_schedules=True)))
    flagged = sum(1 for r in res.records if r["source"] != "implied" and not r["converged"])
    return {"met_estimate": res.met_estimate, "met_bracket": list(res.met_bracket),
            "flagged_rows": flagged}


def _run_bond_sweep(cfg: RunConfig, out: Path) -> dict:
    with _mapper(cfg.parallelism) as map_fn:
        results = metscan.bond_distance_sweep(cfg.params, cfg.series_list, cfg.scan_config,
                                              cfg.grape, cfg.direction, map_fn)
    rows = [row for r in results for row in r.to_rows()]
    metscan.write_csv(out / "scan.csv", rows)
    metscan.write_csv(out / "dissociation.csv",
                      metscan.dissociation_table(cfg.series_list, results))
    mets = [{"bond_distance_angstrom": h.bond_distance, "met": r.met_estimate,
             "bracket_low": r.met_bracket[0], "bracket_high": r.met_bracket[1]}
            for h, r in zip(cfg.series_list, results)]
    metscan.write_csv(out / "mets.csv", mets)
    _write_json(out / "result.json", _clean({"mets": mets,
                                             "scans": [r.to_dict() for r in results]}))
    return {"mets": mets}


def _run_param_sweep(cfg: RunConfig, out: Path) -> dict:
    task = metscan.MetTask(cfg.cost, cfg.psi0, cfg.scan_config, cfg.grape)
    with _mapper(cfg.parallelism) as map_fn:
        sweep = metscan.parameter_sweep(cfg.params, cfg.axis, cfg.factors, task, map_fn)
    rows, table = [], []
    for factor, res in sweep:
        for r in res.records:
            rows.append({"axis": cfg.axis, "factor": factor, **r})
        table.append({"axis": cfg.axis, "factor": factor, "met": res.met_estimate,
                      "bracket_low": res.met_bracket[0], "bracket_high": res.met_bracket[1]})
    metscan.write_csv(out / "scan.csv", rows)
    metscan.write_csv(out / "sweep.csv", table)
    _write_json(out / "result.json", _clean({"sweep": table}))
    return {"sweep": table}


def _bootstrap_and_fit(cfg: RunConfig, est, d: int, out: Path) -> dict:
    est = haar.bootstrap_cdf(est, cfg.n_resamples, cfg.confidence, seed=cfg.seed)
    metscan.write_csv(out / "cdf.csv", est.to_rows())
    fit_out = {}
    models = cfg.fit_block.get("models", ["hi", "expansion"])
    for model in models:
        try:
            if model == "hi":
                fit_out["hi"] = fits.fit_hi(est, d).to_dict()
            elif model == "expansion":
                fit_out["expansion"] = fits.select_expansion(
                    est, d, int(cfg.fit_block.get("max_terms", 12))).to_dict()
            else:
                raise ConfigError(f"unknown fit model {model!r}")
        except ValueError as exc:
            fit_out[model] = {"error": str(exc)}
    _write_json(out / "fit.json", _clean(fit_out))
    return {"estimate": est, "fits": fit_out}


def _run_haar_campaign(cfg: RunConfig, out: Path) -> dict:
    sample = haar.sample_pairs(cfg.params.n_qubits, cfg.n_pairs, cfg.seed)
    with _mapper(cfg.parallelism) as map_fn:
        est = haar.estimate_cdf(sample, cfg.params, cfg.t_grid, cfg.n_segments, cfg.threshold,
                                cfg.grape, cfg.stop_after_failures, map_fn)
    metscan.write_csv(out / "pairs.csv", est.pair_rows())
    fitted = _bootstrap_and_fit(cfg, est, cfg.params.dim, out)
    est = fitted["estimate"]
    summary = {"max_met": _clean(est.max_met), "n_pairs": est.n_pairs,
               "excluded": est.excluded, "cdf_final": float(est.cdf_values[-1]),
               "max_ci_width": float(np.max(est.ci_high - est.ci_low)), "fits": fitted["fits"]}
    _write_json(out / "result.json", _clean({**summary, "cdf": est.to_dict()}))
    return summary


def _run_fit(cfg: RunConfig, out: Path) -> dict:
    kind, src = cfg.fit_source
    if kind == "campaign":
        data = _read_json(src / "result.json", "campaign result")
        cdf = data["cdf"]
        mets = [math.inf if m is None else m for m in cdf["pair_mets"]]
        est = haar.CdfEstimate(cdf["t_grid"], mets, cdf["threshold"])
    else:
        rng = np.random.default_rng(cfg.seed)
        comps = src["components"]
        n_pairs = int(src.get("n_pairs", 1024))
        weights = np.array([c.get("weight", 1.0) for c in comps], dtype=float)
        counts = np.floor(weights / weights.sum() * n_pairs).astype(int)
        counts[0] += n_pairs - counts.sum()
        mets = np.concatenate([fits.synthetic_hi_mets(float(c["v"]), cfg.d, k, rng)
                               for c, k in zip(comps, counts)])
        est = haar.CdfEstimate.from_mets(cfg.t_grid, mets)
    fitted = _bootstrap_and_fit(cfg, est, cfg.d, out)
    est = fitted["estimate"]
    summary = {"d": cfg.d, "n_pairs": est.n_pairs, "max_met": _clean(est.max_met),
               "max_ci_width": float(np.max(est.ci_high - est.ci_low)), "fits": fitted["fits"]}
    _write_json(out / "result.json", _clean(summary))
    return summary


def _run_bounds(cfg: RunConfig, out: Path) -> dict:
    b = cfg.budget.to_dict()
    metscan.write_csv(out / "bounds.csv", [b])
    _write_json(out / "result.json", b)
    print("one_qubit_max={one_qubit_max!r} two_qubit_max={two_qubit_max!r} "
          "two_qubit_from_01_max={two_qubit_from_01_max!r} "
          "two_qubit_min={two_qubit_min!r} (ns)".format(**b))
    return b


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"spinmet": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(config_path) -> int:
    cfg = RunConfig.load(config_path)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    summary = globals()["_run_" + cfg.task.replace("-", "_")](cfg, out)
    wall = time.time() - started
    canonical = json.dumps(cfg.raw, sort_keys=True).encode()
    files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    manifest = {
        "task": cfg.task, "seed": cfg.seed, "config_path": str(Path(config_path).resolve()),
        "config_sha256": hashlib.sha256(canonical).hexdigest(), "config": cfg.raw,
        "versions": _versions(), "parallelism": cfg.parallelism,
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_time_s": wall, "files": {name: _sha256(out / name) for name in files},
        "summary": _clean({k: v for k, v in summary.items() if k != "estimate"}),
    }
    _write_json(out / "manifest.json", manifest)
    print(f"{cfg.task}: wrote {len(files)} files to {out} in {wall:.1f} s")
    return EXIT_OK


def report(artifact_dir) -> str:
    """Human-readable summary of a run directory."""
    d = Path(artifact_dir)
    mpath = d / "manifest.json"
    if not mpath.is_file():
        raise ConfigError(f"{d}: no manifest.json (not a run directory)")
    m = _read_json(mpath, "manifest")
    s = m.get("summary", {})
    lines = [f"task: {m['task']}  seed: {m['seed']}  wall time: {m['wall_time_s']:.1f} s",
             f"config sha256: {m['config_sha256']}"]
    task = m["task"]
    if task == "met-scan":
        lines.append(f"MET: {s.get('met_estimate')} ns  bracket: {s.get('met_bracket')}"
                     f"  non-converged rows: {s.get('flagged_rows')}")
    elif task == "bond-sweep":
        for row in s.get("mets", []):
            lines.append(f"bond {row['bond_distance_angstrom']} A: MET {row['met']} ns")
    elif task == "param-sweep":
        for row in s.get("sweep", []):
            lines.append(f"{row['axis']} x {row['factor']}: MET {row['met']} ns")
    elif task in ("haar-campaign", "fit"):
        lines.append(f"pairs: {s.get('n_pairs')}  maximal MET: {s.get('max_met')} ns"
                     f"  max CI width: {s.get('max_ci_width'):.4g}")
        for name, f in s.get("fits", {}).items():
            if "error" in f:
                lines.append(f"fit {name}: failed ({f['error']})")
                continue
            speed = f["params"].get("v", f["params"].get("vt"))
            label = "v" if name == "hi" else "v~"
            lines.append(f"fit {name}: {label} = {speed:.6g} rad/ns  terms = {f['n_terms']}"
                         f"  chi2/N_DoF = {f['reduced_chi2']:.4g}")
            for step in f.get("trace", []):
                lines.append(f"    terms {step['terms']} (L={step['L']}): "
                             f"chi2/N_DoF = {step['reduced_chi2']:.4g}")
    elif task == "bounds":
        for k in ("one_qubit_max", "two_qubit_max", "two_qubit_from_01_max", "two_qubit_min"):
            lines.append(f"{k}: {s.get(k)} ns")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spinmet",
                                     description="Minimal-evolution-time campaigns for spin chains")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a run configuration")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("config")
    p_rep = sub.add_parser("report", help="summarize a run directory")
    p_rep.add_argument("artifact_dir")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config)
        if args.command == "validate":
            cfg = RunConfig.load(args.config)
            print(f"{args.config}: valid {cfg.task} configuration")
            return EXIT_OK
        print(report(args.artifact_dir))
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - top-level guard maps to exit 1
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
