"""Command-line front end: config parsing, experiment orchestration, exports.

Exit codes: 0 success, 1 statistical assertion failure (with --assert),
2 usage or configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .harness import (
    CliqueStatistic,
    ExperimentPlan,
    MIN_TEST_SAMPLES,
    TreeStatistic,
    bootstrap_ci,
    ks_distance_normal,
    replicates_csv,
    run_block_replicates,
    run_replicates,
    samples_matrix,
    standardize,
    summary_document,
    wasserstein1_distance_normal,
)
from .model import (
    ModelParams,
    ParameterError,
    config_to_csv,
    derive_seed,
    sample_config,
)
from .theory import (
    RegimeError,
    clique_diff_moment_profile,
    gamma_diagnostics,
    sigma_palm,
    tree_root_moment_profile,
)
from .trees import TreeSpecError, cox_grimmett, lag_covariance_table, parse_tree_spec

__all__ = ["ConfigError", "RunConfig", "parse_config", "render_config", "run", "main"]

MODES = ("sample", "cliques", "trees", "clt", "sigma", "moments", "blocks")
DEFAULT_U_GRID = (0.3, 0.2, 0.1, 0.05, 0.02, 0.01)
KS_ALPHA = 0.01

_SECTION_KEYS = {
    "model": ("gamma", "beta", "n"),
    "experiment": ("mode", "k_list", "tree_file", "r", "n_list", "seed"),
    "output": ("directory", "formats"),
}

CONFIG_GRAMMAR = """\
configuration grammar
    The configuration is a flat key = value document split into sections:

        [model]
        gamma = 0.3          # weight exponent, in (0, 1)
        beta = 1.0           # connection range, > 0
        n = 1000             # torus circumference

        [experiment]
        mode = cliques       # sample|cliques|trees|clt|sigma|moments|blocks
        k_list = 2,3         # clique sizes (cliques/clt/sigma/moments)
        tree_file = w.tree   # directed tree spec (trees/clt/moments/blocks)
        r = 1000             # replicates, or the MC budget for sigma
        n_list = 250,500     # torus ladder for clt
        seed = 0             # 64-bit master seed

        [output]
        directory = out
        formats = csv,json

    Blank lines and lines starting with '#' or ';' are ignored.  Tree files
    use the line forms  m=<int>, root=<int>, edge=<i>-><j>.

regimes
    clt mode asserts normality only where it is proved: gamma < 1/2 for
    clique counts and gamma < 1/(2 * leaves) for tree counts.  Pass
    --override-regime to explore outside those ranges.

exit codes
    0 success; 1 statistical test failed under --assert; 2 usage or
    configuration error; 3 internal error.
"""


class ConfigError(ValueError):
    """Invalid configuration; carries the full list of problems."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description."""

    gamma: float
    beta: float
    n: float
    mode: str
    k_list: tuple[int, ...] = ()
    tree_file: str | None = None
    r: int = 1000
    n_list: tuple[float, ...] = ()
    seed: int = 0
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.gamma, self.beta, self.n)


def _suggest(key: str, options: tuple[str, ...]) -> str:
    close = difflib.get_close_matches(key, options, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def parse_config(text: str, override_regime: bool = False) -> RunConfig:
    """Parse and validate a configuration document.

    All problems are collected and reported together in a ConfigError, not
    just the first one.
    """
    errors: list[str] = []
    values: dict[str, str] = {}
    section: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                errors.append(
                    f"line {line_no}: unknown section [{section}]"
                    + _suggest(section, tuple(_SECTION_KEYS))
                )
                section = None
            continue
        if "=" not in line:
            errors.append(f"line {line_no}: expected key = value, got {line!r}")
            continue
        if section is None:
            errors.append(f"line {line_no}: key outside of any [section]")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SECTION_KEYS[section]:
            errors.append(
                f"line {line_no}: unknown key {key!r} in [{section}]"
                + _suggest(key, _SECTION_KEYS[section])
            )
            continue
        if key in values:
            errors.append(f"line {line_no}: duplicate key {key!r}")
            continue
        values[key] = value

    def take(key: str, conv, default=None, required=False):
        if key not in values:
            if required:
                errors.append(f"missing required key {key!r}")
            return default
        try:
            return conv(values[key])
        except (ValueError, ParameterError) as exc:
            errors.append(f"key {key!r}: {exc}")
            return default

    def int_list(text_value: str) -> tuple[int, ...]:
        return tuple(int(t.strip()) for t in text_value.split(",") if t.strip())

    def float_list(text_value: str) -> tuple[float, ...]:
        return tuple(float(t.strip()) for t in text_value.split(",") if t.strip())

    def formats_list(text_value: str) -> tuple[str, ...]:
        out = tuple(t.strip() for t in text_value.split(",") if t.strip())
        bad = [f for f in out if f not in ("csv", "json")]
        if bad:
            raise ValueError(f"unsupported formats {bad}; allowed: csv, json")
        if not out:
            raise ValueError("formats must not be empty")
        return out

    gamma = take("gamma", float, required=True)
    beta = take("beta", float, required=True)
    n = take("n", float, required=True)
    mode = take("mode", str, required=True)
    k_list = take("k_list", int_list, default=())
    tree_file = take("tree_file", str)
    r = take("r", int, default=1000)
    n_list = take("n_list", float_list, default=())
    seed = take("seed", int, default=0)
    directory = take("directory", str, default="out")
    formats = take("formats", formats_list, default=("csv", "json"))

    if mode is not None and mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)}; got {mode!r}" + _suggest(mode or "", MODES))
    if gamma is not None and not (0.0 < gamma < 1.0):
        errors.append(f"gamma must lie in (0, 1), got {gamma}")
    if beta is not None and not beta > 0.0:
        errors.append(f"beta must be positive, got {beta}")
    if n is not None and not n > 0.0:
        errors.append(f"n must be positive, got {n}")
    if r is not None and r < 1:
        errors.append(f"r must be >= 1, got {r}")
    if k_list and any(k < 1 for k in k_list):
        errors.append(f"k_list entries must be >= 1, got {k_list}")

    leaves: int | None = None
    if tree_file is not None:
        if not os.path.exists(tree_file):
            errors.append(f"tree_file {tree_file!r} does not exist")
        else:
            try:
                leaves = parse_tree_spec(open(tree_file, encoding="utf-8").read()).leaf_count
            except TreeSpecError as exc:
                errors.append(f"tree_file {tree_file!r}: {exc}")

    if mode in ("cliques",) and not k_list:
        errors.append("mode cliques requires k_list")
    if mode in ("trees", "blocks") and tree_file is None:
        errors.append(f"mode {mode} requires tree_file")
    if mode in ("clt", "moments") and bool(k_list) == bool(tree_file):
        errors.append(f"mode {mode} requires exactly one of k_list or tree_file")
    if mode == "sigma" and len(k_list) not in (1, 2):
        errors.append("mode sigma requires k_list with one or two entries")
    if mode == "clt" and not n_list:
        errors.append("mode clt requires n_list")

    if mode == "clt" and gamma is not None and not override_regime:
        if k_list and gamma >= 0.5:
            errors.append(
                f"clt mode with clique counts requires gamma < 1/2 (got {gamma}); "
                "pass --override-regime to explore anyway"
            )
        if leaves is not None and gamma >= 1.0 / (2.0 * max(leaves, 1)):
            errors.append(
                f"clt mode with this tree requires gamma < 1/(2*{leaves}) "
                f"(got {gamma}); pass --override-regime to explore anyway"
            )

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        gamma=gamma,
        beta=beta,
        n=n,
        mode=mode,
        k_list=k_list,
        tree_file=tree_file,
        r=r,
        n_list=n_list,
        seed=seed,
        directory=directory,
        formats=formats,
    )


def render_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(render_config(c)) == c."""
    lines = [
        "[model]",
        f"gamma = {cfg.gamma!r}",
        f"beta = {cfg.beta!r}",
        f"n = {cfg.n!r}",
        "",
        "[experiment]",
        f"mode = {cfg.mode}",
    ]
    if cfg.k_list:
        lines.append("k_list = " + ",".join(str(k) for k in cfg.k_list))
    if cfg.tree_file is not None:
        lines.append(f"tree_file = {cfg.tree_file}")
    lines.append(f"r = {cfg.r}")
    if cfg.n_list:
        lines.append("n_list = " + ",".join(repr(v) for v in cfg.n_list))
    lines.append(f"seed = {cfg.seed}")
    lines += [
        "",
        "[output]",
        f"directory = {cfg.directory}",
        "formats = " + ",".join(cfg.formats),
        "",
    ]
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()


# -- output helpers ----------------------------------------------------------


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _summary(cfg: RunConfig, **sections) -> dict:
    doc = summary_document(
        plan_fields={f.name: getattr(cfg, f.name) for f in fields(cfg)},
        estimates=sections.get("estimates", {}),
        std_errors=sections.get("std_errors", {}),
        test_statistics=sections.get("test_statistics", {}),
        p_values=sections.get("p_values", {}),
        seeds={"master": cfg.seed},
        wall_time=sections.get("wall_time", 0.0),
        config_hash=config_hash(cfg),
    )
    for key in ("files", "notes"):
        if key in sections:
            doc[key] = sections[key]
    return doc


def _emit(cfg: RunConfig, name: str, summary: dict, csv_files: dict[str, str]) -> None:
    out = cfg.directory
    preamble = (
        f"# schema_version={summary['schema_version']}\n"
        f"# master_seed={cfg.seed}\n"
        f"# config_hash={config_hash(cfg)}\n"
    )
    if "csv" in cfg.formats:
        for fname, text in csv_files.items():
            _write_atomic(os.path.join(out, fname), preamble + text)
            print(f"wrote {os.path.join(out, fname)}")
    if "json" in cfg.formats:
        path = os.path.join(out, f"{name}_summary.json")
        _write_atomic(path, _json_text(summary))
        print(f"wrote {path}")


# -- mode implementations ----------------------------------------------------


def _tree_spec(cfg: RunConfig):
    assert cfg.tree_file is not None
    spec = parse_tree_spec(open(cfg.tree_file, encoding="utf-8").read())
    if spec.root_degree_one:
        print(
            "note: the root has skeleton degree one; it is not counted as a leaf"
        )
    return spec


def _statistic(cfg: RunConfig):
    if cfg.k_list:
        return CliqueStatistic(k_list=cfg.k_list)
    return TreeStatistic(spec=_tree_spec(cfg))


def _mode_sample(cfg: RunConfig, threads: int, assert_mode: bool) -> int:
    config = sample_config(cfg.params, cfg.seed)
    buffer = io.StringIO()
    config_to_csv(config, buffer)
    summary = _summary(cfg, estimates={"point_count": len(config)},
                       files={"points": "sample_points.csv"})
    _emit(cfg, "sample", summary, {"sample_points.csv": buffer.getvalue()})
    return 0


def _mode_counts(cfg: RunConfig, threads: int, assert_mode: bool) -> int:
    statistic = _statistic(cfg)
    plan = ExperimentPlan(cfg.params, statistic, cfg.r, cfg.seed)
    results = run_replicates(plan, threads=threads)
    matrix = samples_matrix(results)
    estimates = {}
    std_errors = {}
    for j, label in enumerate(statistic.labels):
        col = matrix[:, j]
        estimates[label] = {
            "mean": float(col.mean()),
            "var_over_n": float(col.var(ddof=1) / cfg.n),
        }
        std_errors[label] = float(col.std(ddof=1) / np.sqrt(col.size))
    name = "cliques" if cfg.k_list else "trees"
    summary = _summary(
        cfg,
        estimates=estimates,
        std_errors=std_errors,
        files={"replicates": f"{name}_replicates.csv"},
    )
    _emit(cfg, name, summary, {f"{name}_replicates.csv": replicates_csv(results, statistic.labels)})
    return 0


def _mode_clt(cfg: RunConfig, threads: int, assert_mode: bool) -> int:
    statistic = _statistic(cfg)
    label = statistic.labels[-1]
    notes: list[str] = []
    estimates: dict = {"var_over_n": {}, "ci_lo": {}, "ci_hi": {}}
    test_statistics: dict = {"ks": {}, "w1": {}}
    p_values: dict = {"ks": {}}
    files: dict = {}
    csv_files: dict[str, str] = {}
    failed = False
    for n_index, n in enumerate(cfg.n_list):
        params = ModelParams(cfg.gamma, cfg.beta, n)
        plan = ExperimentPlan(
            params, statistic, cfg.r, master_seed=derive_seed(cfg.seed, 1, n_index)
        )
        results = run_replicates(plan, threads=threads)
        samples = samples_matrix(results)[:, -1]
        key = "%g" % n
        var_stat = lambda a, _n=n: float(np.var(a, ddof=1) / _n)
        estimates["var_over_n"][key] = var_stat(samples)
        if cfg.r >= MIN_TEST_SAMPLES:
            lo, hi = bootstrap_ci(samples, var_stat, seed=derive_seed(cfg.seed, 2, n_index))
            estimates["ci_lo"][key], estimates["ci_hi"][key] = lo, hi
            std = standardize(samples)
            ks_stat, ks_p = ks_distance_normal(std)
            test_statistics["ks"][key] = ks_stat
            test_statistics["w1"][key] = wasserstein1_distance_normal(std)
            p_values["ks"][key] = ks_p
            if ks_p <= KS_ALPHA:
                failed = True
        else:
            notes.append(f"insufficient samples for KS at n={key} (r={cfg.r})")
        fname = f"clt_replicates_n{key}.csv"
        files[f"replicates_n{key}"] = fname
        csv_files[fname] = replicates_csv(results, statistic.labels)
    summary = _summary(
        cfg,
        estimates=estimates,
        test_statistics=test_statistics,
        p_values=p_values,
        files=files,
        notes=notes,
    )
    summary["statistic_label"] = label
    _emit(cfg, "clt", summary, csv_files)
    if assert_mode and failed:
        print(f"assertion failed: KS p-value <= {KS_ALPHA}")
        return 1
    return 0


def _mode_sigma(cfg: RunConfig, threads: int, assert_mode: bool) -> int:
    k = cfg.k_list[0]
    l = cfg.k_list[1] if len(cfg.k_list) > 1 else k
    est = sigma_palm(cfg.params, k, l, mc_budget=cfg.r, seed=cfg.seed, threads=threads)
    summary = _summary(
        cfg,
        estimates={
            "sigma": est.value,
            "term_single": est.components[0],
            "term_joint": est.components[1],
            "details": est.details,
        },
        std_errors={"sigma": est.std_error},
    )
    _emit(cfg, "sigma", summary, {})
    if assert_mode and not est.value > 3.0 * est.std_error:
        print("assertion failed: sigma estimate not positive at 3 standard errors")
        return 1
    return 0


def _mode_moments(
    cfg: RunConfig, threads: int, assert_mode: bool, gamma_diag_eta: float | None = None
) -> int:
    if gamma_diag_eta is not None:
        diag = gamma_diagnostics(
            cfg.params, gamma_diag_eta, mc_budget=cfg.r, seed=cfg.seed,
            k0=max(cfg.k_list) if cfg.k_list else 3, threads=threads,
        )
        summary = _summary(
            cfg,
            estimates={
                "gamma1": diag.gamma1,
                "gamma2": diag.gamma2,
                "gamma3": diag.gamma3,
                "eta": diag.eta,
                "details": diag.details,
            },
            std_errors={"gamma1": diag.se1, "gamma2": diag.se2, "gamma3": diag.se3},
        )
        _emit(cfg, "gamma_diagnostics", summary, {})
        return 0
    u_grid = DEFAULT_U_GRID
    if cfg.k_list:
        profile = clique_diff_moment_profile(
            cfg.params, cfg.k_list[0], u_grid, replicates=cfg.r, power=2.0,
            seed=cfg.seed, threads=threads,
        )
        bound = 2.0 * cfg.gamma + 0.15
    else:
        spec = _tree_spec(cfg)
        profile = tree_root_moment_profile(
            cfg.params, spec, u_grid, replicates=cfg.r, power=1.0,
            seed=cfg.seed, threads=threads,
        )
        bound = spec.leaf_count * cfg.gamma + 0.15
    rows = ["u,moment,std_error"]
    for u, m, s in zip(profile.u_grid, profile.moments, profile.std_errors):
        rows.append("%.17g,%.17g,%.17g" % (u, m, s))
    summary = _summary(
        cfg,
        estimates={
            "slope": profile.slope,
            "slope_bound": bound,
            "power": profile.power,
            "u_grid": list(profile.u_grid),
        },
        files={"moments": "moments.csv"},
    )
    _emit(cfg, "moments", summary, {"moments.csv": "\n".join(rows) + "\n"})
    if assert_mode and profile.slope > bound:
        print(f"assertion failed: slope {profile.slope:.4f} above bound {bound:.4f}")
        return 1
    return 0


def _mode_blocks(cfg: RunConfig, threads: int, assert_mode: bool) -> int:
    spec = _tree_spec(cfg)
    reps = run_block_replicates(cfg.params, spec, cfg.r, cfg.seed, threads=threads)
    lags, covs, ses = lag_covariance_table(reps)
    cutoffs = [int(k) for k in range(1, min(11, len(lags) + 1))]
    u_values = {str(k): cox_grimmett(reps, k) for k in cutoffs}
    decay = [
        {"k": int(k), "covariance": float(c), "se": float(s)}
        for k, c, s in zip(lags, covs, ses)
    ]
    rows = ["k,covariance,se"] + [
        "%d,%.17g,%.17g" % (d["k"], d["covariance"], d["se"]) for d in decay
    ]
    summary = _summary(
        cfg,
        estimates={
            "lag_covariance": decay,
            "cox_grimmett": {k: {"value": v[0], "se": v[1]} for k, v in u_values.items()},
        },
        files={"decay": "blocks_decay.csv"},
    )
    _emit(cfg, "blocks", summary, {"blocks_decay.csv": "\n".join(rows) + "\n"})
    if assert_mode and any(c < -3.0 * s for c, s in zip(covs, ses)):
        print("assertion failed: a lag covariance is below -3 SE")
        return 1
    return 0


_MODE_RUNNERS = {
    "sample": _mode_sample,
    "cliques": _mode_counts,
    "trees": _mode_counts,
    "clt": _mode_clt,
    "sigma": _mode_sigma,
    "moments": _mode_moments,
    "blocks": _mode_blocks,
}


def run(
    cfg: RunConfig,
    threads: int = 1,
    assert_mode: bool = False,
    gamma_diag_eta: float | None = None,
) -> int:
    """Execute the configured experiment; returns the process exit code."""
    start = time.perf_counter()
    if cfg.mode == "moments":
        code = _mode_moments(cfg, threads, assert_mode, gamma_diag_eta)
    else:
        code = _MODE_RUNNERS[cfg.mode](cfg, threads, assert_mode)
    print(f"# time: {cfg.mode} {time.perf_counter() - start:.3f}s")
    return code


# -- plot-data export ---------------------------------------------------------


def export_plotdata(summary: dict, kind: str, results_dir: str, n: float | None = None) -> str:
    """Plot-ready CSV derived from a result summary.

    qq needs the replicate CSVs next to the summary; scaling and decay read
    the summary alone.  The summary's mode must match the requested kind.
    """
    mode = summary.get("plan", {}).get("mode")
    if kind == "qq":
        if mode != "clt":
            raise ParameterError(f"qq plot data needs a clt result, got mode {mode!r}")
        keys = sorted(summary["files"])
        if n is not None:
            want = f"replicates_n{'%g' % n}"
            if want not in summary["files"]:
                raise ParameterError(f"no replicates recorded for n={n}")
            keys = [want]
        fname = summary["files"][keys[-1]]
        with open(os.path.join(results_dir, fname), encoding="utf-8") as handle:
            rows = [l.strip() for l in handle if l.strip() and not l.startswith("#")]
        col = len(rows[0].split(",")) - 1
        values = [float(line.split(",")[col]) for line in rows[1:]]
        std = np.sort(standardize(np.asarray(values)))
        m = std.size
        quantiles = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
        rows = ["normal_quantile,sample_quantile"]
        rows += ["%.17g,%.17g" % (q, s) for q, s in zip(quantiles, std)]
        return "\n".join(rows) + "\n"
    if kind == "scaling":
        if mode != "clt":
            raise ParameterError(f"scaling plot data needs a clt result, got mode {mode!r}")
        table = summary["estimates"]["var_over_n"]
        ci_lo = summary["estimates"].get("ci_lo", {})
        ci_hi = summary["estimates"].get("ci_hi", {})
        rows = ["n,var_over_n,ci_lo,ci_hi"]
        for key in sorted(table, key=float):
            rows.append(
                "%.17g,%.17g,%s,%s"
                % (
                    float(key),
                    table[key],
                    "%.17g" % ci_lo[key] if key in ci_lo else "",
                    "%.17g" % ci_hi[key] if key in ci_hi else "",
                )
            )
        return "\n".join(rows) + "\n"
    if kind == "decay":
        if mode != "blocks":
            raise ParameterError(f"decay plot data needs a blocks result, got mode {mode!r}")
        rows = ["k,covariance,se"]
        for entry in sorted(summary["estimates"]["lag_covariance"], key=lambda d: d["k"]):
            rows.append("%d,%.17g,%.17g" % (entry["k"], entry["covariance"], entry["se"]))
        return "\n".join(rows) + "\n"
    raise ParameterError(f"unknown plot kind {kind!r}")


# -- argument parsing ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adrcm",
        description=(
            "Sample age-dependent random connection graphs on the 1-D torus "
            "and verify their subgraph-count limit behavior."
        ),
        epilog=CONFIG_GRAMMAR,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the configuration document")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("--assert", dest="assert_mode", action="store_true",
                        help="exit 1 when a statistical check fails")
    common.add_argument("--override-regime", action="store_true",
                        help="allow clt mode outside the proved gamma range")
    common.add_argument("--gamma", type=float, help="override model gamma")
    common.add_argument("--beta", type=float, help="override model beta")
    common.add_argument("--n", type=float, help="override the torus length")
    common.add_argument(
        "--gamma-diag", type=float, default=None, metavar="ETA",
        help="in moments mode, estimate the difference-moment integrals at this eta",
    )
    for mode in MODES:
        sub.add_parser(mode, parents=[common], help=f"run the {mode} experiment")
    plot = sub.add_parser("plotdata", help="emit plot-ready CSV from results")
    plot.add_argument("--kind", required=True, choices=("qq", "scaling", "decay"))
    plot.add_argument("--results", required=True, help="path to a *_summary.json")
    plot.add_argument("--n", type=float, help="torus length to select (qq)")
    plot.add_argument("--out", help="write here instead of stdout")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    if not args.config:
        raise ConfigError(["--config is required for this command"])
    with open(args.config, encoding="utf-8") as handle:
        text = handle.read()
    cfg = parse_config(text, override_regime=args.override_regime)
    updates: dict = {}
    if cfg.mode != args.command:
        updates["mode"] = args.command
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["directory"] = args.out
    for name in ("gamma", "beta", "n"):
        if getattr(args, name) is not None:
            updates[name] = getattr(args, name)
    if updates:
        merged = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
        merged.update(updates)
        cfg = RunConfig(**merged)
        # Re-validate after overrides so flags cannot bypass the gate.
        cfg = parse_config(render_config(cfg), override_regime=args.override_regime)
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "plotdata":
            with open(args.results, encoding="utf-8") as handle:
                summary = json.load(handle)
            text = export_plotdata(
                summary, args.kind, os.path.dirname(args.results) or ".", n=args.n
            )
            if args.out:
                _write_atomic(args.out, text)
                print(f"wrote {args.out}")
            else:
                sys.stdout.write(text)
            return 0
        cfg = _load_config(args)
        return run(
            cfg,
            threads=args.threads,
            assert_mode=args.assert_mode,
            gamma_diag_eta=args.gamma_diag,
        )
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (ParameterError, TreeSpecError, RegimeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostics
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
