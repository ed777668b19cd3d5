"""Experiment orchestration: configuration, deterministic seeding, parallel
ensemble execution, CSV persistence, and the command-line interface.

Determinism contract: (config, master_seed) fixes every numerical output
byte-exactly, independent of worker count.  Per-realization seeds come from
a splitmix-style mixer, realizations are evolved in fixed-width column
batches whose composition never depends on scheduling, and aggregation
always reduces in ascending realization order.  CSV floats are written with
repr() (shortest round-trip) and LF line endings, so re-running `analyze`
over stored series regenerates derived files byte-identically.

Artifact layout for a single run directory:

    run.cfg              config echo (key = value lines, lossless round-trip)
    echo_series.csv      realization_id, dt, log_deviation
    gw_curves.csv        dt, G, W, sigma_G2, g_stderr, w_stderr, s2_stderr
    phi.csv              lag, phi, stderr            (direct pipeline)
    stretch_summary.csv  direct-route scalars        (direct pipeline)
    summary.csv          one row per lattice, Table-1 style
    manifest.txt         config echo, seeds, energies, artifact hashes

`reproduce table1|fig2|fig4` nest one run directory per lattice (1d/, 2d/,
3d/) under --out and write the combined summary.csv at the top level;
`reproduce fig3` nests one directory per lattice size and collates
fig3_sweep.csv.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    WindowPolicy,
    aggregate,
    ergodization_report,
    fit_growth,
    variance_ratio_curve,
)
from .dynamics import ModelParams
from .echo import EchoProtocol, EchoRecord, run_echo_block
from .lattice import LatticeSpec
from .lyapunov import LyapunovSummary, lyapunov_summary, stretching_ensemble

ECHO_BATCH_WIDTH = 25
# realization index spaces: echo records at 0.., direct chains and the fit
# bootstrap get their own high bases so streams never collide
LYAPUNOV_SEED_BASE = 1 << 32
BOOTSTRAP_SEED_BASE = 1 << 33

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, realization_index: int) -> int:
    """Counter-based splittable seed: splitmix64 finalizer applied to
    master_seed advanced by (index + 1) Weyl increments.

    Statistically independent streams for consecutive indices, collision
    free over any contiguous index range (the Weyl step is odd, hence a
    bijection mod 2^64), and each flipped master bit avalanches to about
    half the output bits.
    """
    z = (master_seed + (realization_index + 1) * _GAMMA) & _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs: lattice, dynamics, echo protocol,
    ensemble and direct-run sizes, seeding, and execution knobs."""

    lattice: LatticeSpec = LatticeSpec(dims=2, extents=(10, 10))
    params: ModelParams = ModelParams(J=1.0, beta=0.01)
    protocol: EchoProtocol = EchoProtocol()
    ensemble_size: int = 200
    master_seed: int = 0
    lyapunov_enabled: bool = True
    lyapunov_T: float = 10000.0
    lyapunov_chains: int = 8
    lyapunov_dt_r: float = 0.1
    lyapunov_burn_in: float | None = None
    lyapunov_max_lag: int = 100
    out: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError(f"ensemble_size must be >= 1, got {self.ensemble_size}")
        if not 0 <= self.master_seed <= _MASK:
            raise ValueError("master_seed must fit in 64 bits")
        if self.lyapunov_chains < 1:
            raise ValueError(f"lyapunov_chains must be >= 1, got {self.lyapunov_chains}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def config_to_text(cfg: RunConfig) -> str:
    """Flat key = value echo of the config; parses back losslessly.

    Execution context (run.out, run.workers) is deliberately not written:
    stored run.cfg files stay byte-identical however and wherever the same
    experiment was executed.  The parser still accepts both keys.
    """
    burn = "auto" if cfg.lyapunov_burn_in is None else repr(cfg.lyapunov_burn_in)
    lines = [
        f"lattice.dims = {cfg.lattice.dims}",
        f"lattice.extents = {','.join(str(e) for e in cfg.lattice.extents)}",
        f"lattice.boundary = {cfg.lattice.boundary}",
        f"params.J = {cfg.params.J!r}",
        f"params.beta = {cfg.params.beta!r}",
        f"protocol.tau = {cfg.protocol.tau!r}",
        f"protocol.dt = {cfg.protocol.dt!r}",
        f"protocol.sample_every = {cfg.protocol.sample_every}",
        f"protocol.epsilon = {cfg.protocol.epsilon!r}",
        f"protocol.n0 = {cfg.protocol.n0!r}",
        f"ensemble.size = {cfg.ensemble_size}",
        f"ensemble.master_seed = {cfg.master_seed}",
        f"lyapunov.enabled = {'true' if cfg.lyapunov_enabled else 'false'}",
        f"lyapunov.T = {cfg.lyapunov_T!r}",
        f"lyapunov.chains = {cfg.lyapunov_chains}",
        f"lyapunov.dt_r = {cfg.lyapunov_dt_r!r}",
        f"lyapunov.burn_in = {burn}",
        f"lyapunov.max_lag = {cfg.lyapunov_max_lag}",
    ]
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> RunConfig:
    """Parse the flat format back; unknown keys are an error, missing keys
    fall back to the defaults."""
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()

    def take(key, default=None):
        return values.pop(key) if key in values else default

    dims = take("lattice.dims")
    extents = take("lattice.extents")
    boundary = take("lattice.boundary", "periodic")
    defaults = RunConfig()
    if dims is None or extents is None:
        lattice = defaults.lattice
    else:
        lattice = LatticeSpec(
            dims=int(dims),
            extents=tuple(int(tok) for tok in extents.split(",")),
            boundary=boundary,
        )
    params = ModelParams(
        J=float(take("params.J", defaults.params.J)),
        beta=float(take("params.beta", defaults.params.beta)),
    )
    protocol = EchoProtocol(
        tau=float(take("protocol.tau", defaults.protocol.tau)),
        dt=float(take("protocol.dt", defaults.protocol.dt)),
        sample_every=int(take("protocol.sample_every", defaults.protocol.sample_every)),
        epsilon=float(take("protocol.epsilon", defaults.protocol.epsilon)),
        n0=float(take("protocol.n0", defaults.protocol.n0)),
    )
    burn_raw = take("lyapunov.burn_in", "auto")
    enabled_raw = str(take("lyapunov.enabled", "true")).lower()
    if enabled_raw not in ("true", "false"):
        raise ValueError(f"lyapunov.enabled must be true or false, got {enabled_raw!r}")
    cfg = RunConfig(
        lattice=lattice,
        params=params,
        protocol=protocol,
        ensemble_size=int(take("ensemble.size", defaults.ensemble_size)),
        master_seed=int(take("ensemble.master_seed", defaults.master_seed)),
        lyapunov_enabled=enabled_raw == "true",
        lyapunov_T=float(take("lyapunov.T", defaults.lyapunov_T)),
        lyapunov_chains=int(take("lyapunov.chains", defaults.lyapunov_chains)),
        lyapunov_dt_r=float(take("lyapunov.dt_r", defaults.lyapunov_dt_r)),
        lyapunov_burn_in=None if burn_raw == "auto" else float(burn_raw),
        lyapunov_max_lag=int(take("lyapunov.max_lag", defaults.lyapunov_max_lag)),
        out=take("run.out", defaults.out),
        workers=int(take("run.workers", defaults.workers)),
    )
    if values:
        raise ValueError(f"unknown config keys: {sorted(values)}")
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return config_from_text(p.read_text())


@dataclass
class RunManifest:
    config_text: str
    seeds: list
    energies: list
    elapsed_seconds: float
    artifacts: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, manifest: RunManifest):
    names = sorted(manifest.artifacts)
    lines = [f"elapsed_seconds = {manifest.elapsed_seconds:.1f}", "", "[config]"]
    lines += ["  " + ln for ln in manifest.config_text.rstrip("\n").split("\n")]
    if manifest.seeds:
        lines += ["", "[seeds]"]
        lines += [f"  {i} = {s}" for i, s in enumerate(manifest.seeds)]
    if manifest.energies:
        lines += ["", "[realized_energy]"]
        lines += [f"  {i} = {repr(float(e))}" for i, e in enumerate(manifest.energies)]
    lines += ["", "[artifacts]"]
    lines += [f"  {name} sha256={manifest.artifacts[name]}" for name in names]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _echo_batch(args):
    spec, params, protocol, seeds = args
    return run_echo_block(spec, params, protocol, seeds)


def _isolate_failure(spec, params, protocol, seeds, err):
    """A batch failed; rerun its realizations one at a time so the error
    can name the exact offending seed (no silent dropouts: one bad
    realization aborts the whole run)."""
    for seed in seeds:
        try:
            run_echo_block(spec, params, protocol, [seed])
        except Exception as inner:
            raise RuntimeError(f"echo realization with seed {seed} failed: {inner}") from inner
    raise RuntimeError(f"echo batch {seeds[:3]}... failed collectively: {err}") from err


def _run_echo_records(cfg: RunConfig):
    """All echo realizations for the config, batched with a fixed width so
    column composition (and therefore floating-point reduction order) is
    identical for every worker count."""
    seeds = [derive_seed(cfg.master_seed, i) for i in range(cfg.ensemble_size)]
    if len(set(seeds)) != len(seeds):
        raise RuntimeError("derived seeds collide; master_seed unusable")
    batches = [
        (cfg.lattice, cfg.params, cfg.protocol, seeds[lo : lo + ECHO_BATCH_WIDTH])
        for lo in range(0, len(seeds), ECHO_BATCH_WIDTH)
    ]
    outputs = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            try:
                outputs = list(pool.map(_echo_batch, batches))
            except Exception as err:
                for batch in batches:
                    _isolate_failure(*batch, err)
                raise
    else:
        for batch in batches:
            try:
                outputs.append(_echo_batch(batch))
            except Exception as err:
                _isolate_failure(*batch, err)
    records = []
    energies = []
    index = 0
    for (dt_grid, log_dev, block_energy), batch in zip(outputs, batches):
        for j, seed in enumerate(batch[3]):
            records.append(EchoRecord(
                dt_grid=dt_grid,
                log_deviation=log_dev[j],
                realized_energy=float(block_energy[j]),
                seed=seed,
            ))
            energies.append(float(block_energy[j]))
            index += 1
    return records, seeds, energies


def write_echo_series(out_dir: Path, records):
    rows = []
    for i, rec in enumerate(records):
        for dt, value in zip(rec.dt_grid, rec.log_deviation):
            rows.append((i, dt, value))
    write_csv(out_dir / "echo_series.csv", ("realization_id", "dt", "log_deviation"), rows)


def read_echo_series(out_dir: Path):
    path = Path(out_dir) / "echo_series.csv"
    if not path.is_file():
        raise FileNotFoundError(f"echo series not found: {path}")
    by_id = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["realization_id", "dt", "log_deviation"]:
            raise ValueError(f"unexpected echo_series.csv header: {header}")
        for rid, dt, val in reader:
            by_id.setdefault(int(rid), []).append((float(dt), float(val)))
    records = []
    for rid in sorted(by_id):
        pairs = by_id[rid]
        records.append(EchoRecord(
            dt_grid=np.array([p[0] for p in pairs]),
            log_deviation=np.array([p[1] for p in pairs]),
            realized_energy=float("nan"),
            seed=rid,
        ))
    return records


def write_gw_curves(out_dir: Path, stats):
    write_csv(
        out_dir / "gw_curves.csv",
        ("dt", "G", "W", "sigma_G2", "g_stderr", "w_stderr", "s2_stderr"),
        zip(stats.dt_grid, stats.G, stats.W, stats.sigma_G2,
            stats.g_stderr, stats.w_stderr, stats.s2_stderr),
    )


def write_direct_outputs(out_dir: Path, summary: LyapunovSummary, n_chains, chain_T, burn_in_dropped):
    write_csv(
        out_dir / "phi.csv",
        ("lag", "phi", "stderr"),
        zip(range(len(summary.phi)), summary.phi, summary.phi_stderr),
    )
    write_csv(
        out_dir / "stretch_summary.csv",
        ("dt_r", "n_chains", "chain_T", "burn_in_dropped", "lambda_max",
         "lambda_stderr", "var_dlambda", "var_stderr", "tau_erg_eq4",
         "tau_stderr", "cutoff_lag"),
        [(summary.dt_r, n_chains, chain_T, burn_in_dropped, summary.lambda_max,
          summary.lambda_stderr, summary.var_dlambda, summary.var_stderr,
          summary.tau_erg_eq4, summary.tau_stderr, summary.tau_cutoff_lag)],
    )


def read_direct_outputs(out_dir: Path) -> LyapunovSummary:
    sp = Path(out_dir) / "stretch_summary.csv"
    pp = Path(out_dir) / "phi.csv"
    if not sp.is_file() or not pp.is_file():
        raise FileNotFoundError(f"direct-pipeline outputs missing in {out_dir}")
    with open(sp, newline="") as f:
        reader = csv.DictReader(f)
        row = next(reader)
    with open(pp, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        phi_rows = [(float(phi), float(err)) for _, phi, err in reader]
    phi = np.array([p for p, _ in phi_rows])
    stderr = np.array([e for _, e in phi_rows])
    return LyapunovSummary(
        dt_r=float(row["dt_r"]),
        lambda_max=float(row["lambda_max"]),
        lambda_stderr=float(row["lambda_stderr"]),
        var_dlambda=float(row["var_dlambda"]),
        var_stderr=float(row["var_stderr"]),
        phi=phi,
        phi_stderr=stderr,
        tau_erg_eq4=float(row["tau_erg_eq4"]),
        tau_stderr=float(row["tau_stderr"]),
        tau_cutoff_lag=int(row["cutoff_lag"]),
    )


SUMMARY_HEADER = ("lattice", "N_nn", "lambda_max", "Lambda", "var_direct",
                  "var_eq10", "tau_eq4", "tau_eq9", "tau_eq11", "verdict")


def summary_row(label, cfg: RunConfig, records, stats, direct: LyapunovSummary):
    """One Table-1-style row: direct exponent and variance, echo slopes,
    the three ergodization times, and the plateau verdict."""
    boot_seed = derive_seed(cfg.master_seed, BOOTSTRAP_SEED_BASE)
    fit_g = fit_growth(stats, "G", records=records, boot_seed=boot_seed)
    fit_w = fit_growth(stats, "W", records=records, boot_seed=boot_seed)
    ratio = variance_ratio_curve(stats)
    n_nn = 2 * cfg.lattice.dims
    report = ergodization_report(direct, fit_g, fit_w, n_nn, ratio)
    return (label, n_nn, report.lambda_max_direct, report.Lambda,
            report.var_dlambda_direct, report.var_dlambda_empirical,
            report.tau_erg_eq4, report.tau_erg_eq9, report.tau_erg_eq11,
            report.ergodic_verdict), report


def run_direct_pipeline(cfg: RunConfig, out_dir: Path) -> LyapunovSummary:
    """Direct tangent-space chains -> pooled phi, lambda_max, tau grids."""
    chain_T = cfg.lyapunov_T / cfg.lyapunov_chains
    chain_seeds = [
        derive_seed(cfg.master_seed, LYAPUNOV_SEED_BASE + j)
        for j in range(cfg.lyapunov_chains)
    ]
    chains = stretching_ensemble(
        cfg.lattice, cfg.params, chain_T, cfg.protocol.dt, cfg.lyapunov_dt_r,
        chain_seeds, burn_in=cfg.lyapunov_burn_in, n0=cfg.protocol.n0,
    )
    summary = lyapunov_summary(chains, max_lag=cfg.lyapunov_max_lag)
    write_direct_outputs(out_dir, summary, cfg.lyapunov_chains, chain_T,
                         chains[0].burn_in_dropped)
    return summary


def run_ensemble(cfg: RunConfig, label: str | None = None):
    """Execute the configured experiment into cfg.out and return
    (RunManifest, summary row or None).

    Echo ensemble always runs; the direct pipeline and the combined
    summary row are produced when lyapunov is enabled.
    """
    t0 = time.time()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.cfg").write_text(config_to_text(cfg))

    records, seeds, energies = _run_echo_records(cfg)
    write_echo_series(out_dir, records)
    stats = aggregate(records)
    write_gw_curves(out_dir, stats)

    row = None
    if cfg.lyapunov_enabled:
        direct = run_direct_pipeline(cfg, out_dir)
        row, _ = summary_row(label or f"{cfg.lattice.dims}d", cfg, records, stats, direct)
        write_csv(out_dir / "summary.csv", SUMMARY_HEADER, [row])

    manifest = RunManifest(
        config_text=config_to_text(cfg),
        seeds=seeds,
        energies=energies,
        elapsed_seconds=time.time() - t0,
        artifacts={
            p.name: _sha256(p)
            for p in sorted(out_dir.iterdir())
            if p.is_file() and p.name != "manifest.txt"
        },
    )
    write_manifest(out_dir, manifest)
    return manifest, row


def analyze(out_dir) -> Path:
    """Recompute derived statistics from the stored series in out_dir.

    Reads run.cfg and echo_series.csv, regenerates gw_curves.csv (and
    summary.csv when the direct outputs are present) byte-identically, and
    refreshes the manifest hashes."""
    out_dir = Path(out_dir)
    cfg_path = out_dir / "run.cfg"
    if not cfg_path.is_file():
        raise FileNotFoundError(f"run config not found: {cfg_path}")
    cfg = config_from_text(cfg_path.read_text())
    records = read_echo_series(out_dir)
    stats = aggregate(records)
    write_gw_curves(out_dir, stats)
    summary_path = out_dir / "summary.csv"
    if (out_dir / "stretch_summary.csv").is_file():
        direct = read_direct_outputs(out_dir)
        label = None
        if summary_path.is_file():
            with open(summary_path, newline="") as f:
                rows = list(csv.reader(f))
            if len(rows) > 1:
                label = rows[1][0]
        row, _ = summary_row(label or f"{cfg.lattice.dims}d", cfg, records, stats, direct)
        write_csv(summary_path, SUMMARY_HEADER, [row])
    manifest_path = out_dir / "manifest.txt"
    if manifest_path.is_file():
        text = manifest_path.read_text().splitlines()
        head = [ln for ln in text if not ln.startswith("  ") or " sha256=" not in ln]
        # drop the old artifact list and append the refreshed one
        head = head[: head.index("[artifacts]") + 1] if "[artifacts]" in head else head
        hashes = [
            f"  {p.name} sha256={_sha256(p)}"
            for p in sorted(out_dir.iterdir())
            if p.is_file() and p.name != "manifest.txt"
        ]
        manifest_path.write_text("\n".join(head + hashes) + "\n")
    return out_dir / "gw_curves.csv"


TABLE1_LATTICES = (
    ("1d", LatticeSpec(dims=1, extents=(100,))),
    ("2d", LatticeSpec(dims=2, extents=(10, 10))),
    ("3d", LatticeSpec(dims=3, extents=(4, 4, 4))),
)

FIG3_SWEEP = (
    ("1d-n25", LatticeSpec(dims=1, extents=(25,))),
    ("1d-n50", LatticeSpec(dims=1, extents=(50,))),
    ("1d-n100", LatticeSpec(dims=1, extents=(100,))),
    ("1d-n200", LatticeSpec(dims=1, extents=(200,))),
    ("2d-n25", LatticeSpec(dims=2, extents=(5, 5))),
    ("2d-n49", LatticeSpec(dims=2, extents=(7, 7))),
    ("2d-n100", LatticeSpec(dims=2, extents=(10, 10))),
    ("3d-n27", LatticeSpec(dims=3, extents=(3, 3, 3))),
    ("3d-n64", LatticeSpec(dims=3, extents=(4, 4, 4))),
)

FIG3_T = 2000.0


def reproduce(target: str, master_seed: int, out: str, workers: int) -> Path:
    """Preset pipelines behind `reproduce`.

    table1 and fig4 run the full echo + direct pipeline per lattice and
    write the combined summary.csv; fig2 runs echo-only ensembles (the
    G/W curves are the figure's content); fig3 sweeps lattice sizes with
    the direct pipeline and collates fig3_sweep.csv.
    """
    top = Path(out)
    top.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    artifacts = {}
    if target in ("table1", "fig2", "fig4"):
        rows = []
        for idx, (label, lattice) in enumerate(TABLE1_LATTICES):
            cfg = RunConfig(
                lattice=lattice,
                master_seed=master_seed + idx,
                lyapunov_enabled=target != "fig2",
                out=str(top / label),
                workers=workers,
            )
            _, row = run_ensemble(cfg, label=label)
            if row is not None:
                rows.append(row)
            print(f"{label}: done in {time.time() - t0:.0f}s cumulative", flush=True)
        if rows:
            write_csv(top / "summary.csv", SUMMARY_HEADER, rows)
            artifacts["summary.csv"] = _sha256(top / "summary.csv")
        result = top / "summary.csv" if rows else top
    elif target == "fig3":
        rows = []
        for idx, (label, lattice) in enumerate(FIG3_SWEEP):
            cfg = RunConfig(
                lattice=lattice,
                master_seed=master_seed + idx,
                lyapunov_T=FIG3_T,
                out=str(top / label),
                workers=workers,
            )
            sub = Path(cfg.out)
            sub.mkdir(parents=True, exist_ok=True)
            (sub / "run.cfg").write_text(config_to_text(cfg))
            direct = run_direct_pipeline(cfg, sub)
            rows.append((label, lattice.dims, lattice.n_sites, 2 * lattice.dims,
                         direct.lambda_max, direct.lambda_stderr,
                         direct.var_dlambda, direct.var_stderr))
            print(f"{label}: done in {time.time() - t0:.0f}s cumulative", flush=True)
        write_csv(
            top / "fig3_sweep.csv",
            ("label", "dims", "n_sites", "n_nn", "lambda_max", "lambda_stderr",
             "var_dlambda", "var_stderr"),
            rows,
        )
        artifacts["fig3_sweep.csv"] = _sha256(top / "fig3_sweep.csv")
        result = top / "fig3_sweep.csv"
    else:
        raise ValueError(f"unknown reproduction target: {target!r}")
    return result


def _resolve(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if args.workers is not None:
        updates["workers"] = args.workers
    elif os.environ.get("ERGOCHRON_WORKERS"):
        updates["workers"] = int(os.environ["ERGOCHRON_WORKERS"])
    return replace(cfg, **updates) if updates else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergochron",
        description="Loschmidt-echo and tangent-space ergodization analysis "
                    "of discrete Gross-Pitaevskii lattices.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (key = value lines)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--workers", type=int,
                        help="parallel workers (default: ERGOCHRON_WORKERS or config)")
    common.add_argument("--out", help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("echo", parents=[common],
                   help="run the echo ensemble for one configuration")
    sub.add_parser("lyapunov", parents=[common],
                   help="run the direct tangent-space pipeline for one configuration")
    sub.add_parser("analyze", parents=[common],
                   help="recompute derived CSVs from stored series in --out")
    rep = sub.add_parser("reproduce", parents=[common],
                         help="one-command reproduction presets")
    rep.add_argument("target", choices=["table1", "fig2", "fig3", "fig4"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            seed = args.seed if args.seed is not None else 0
            out = args.out if args.out is not None else f"out-{args.target}"
            if args.workers is not None:
                workers = args.workers
            elif os.environ.get("ERGOCHRON_WORKERS"):
                workers = int(os.environ["ERGOCHRON_WORKERS"])
            else:
                workers = 1
            result = reproduce(args.target, seed, out, workers)
            print(f"wrote {result}")
            return 0
        if args.command == "analyze":
            if args.out is None:
                raise ValueError("analyze requires --out pointing at a run directory")
            result = analyze(args.out)
            print(f"regenerated {result}")
            return 0
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _resolve(cfg, args)
        if args.command == "echo":
            cfg = replace(cfg, lyapunov_enabled=False)
            manifest, _ = run_ensemble(cfg)
            print(f"wrote {Path(cfg.out) / 'echo_series.csv'} "
                  f"({len(manifest.seeds)} realizations, {manifest.elapsed_seconds:.1f}s)")
            return 0
        if args.command == "lyapunov":
            out_dir = Path(cfg.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "run.cfg").write_text(config_to_text(cfg))
            summary = run_direct_pipeline(cfg, out_dir)
            print(f"lambda_max = {summary.lambda_max:.6f} +- {summary.lambda_stderr:.6f}, "
                  f"tau_erg = {summary.tau_erg_eq4:.4f}")
            return 0
        raise ValueError(f"unhandled command {args.command!r}")
    except BrokenPipeError:
        return 1
    except Exception as err:
        payload = {"error": type(err).__name__, "message": str(err)}
        print(f"error: {json.dumps(payload)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
