"""Config-driven Monte Carlo experiments.

A config is a YAML mapping with a ``scenario`` key (``polar``, ``ungm``,
``reentry`` or ``weights-check``) plus scenario settings; see
:func:`describe_config` for the full schema and defaults. Runs write

* ``results.csv``  -- one row per (run, transform, score)
* ``summary.json`` -- per transform and score: mean and 2-sigma bootstrap spread
* ``plotdata/*.csv`` -- time series / grids for plotting
"""
from __future__ import annotations

import copy
import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .filtering import FilterError, run_filter
from .kernels import RbfParams
from .metrics import bootstrap_spread, inc_per_run, rmse, rmse_per_step, skl
from .models import (
    ReentryConstants,
    SimulationError,
    polar_input_covariances,
    polar_spiral_means,
    polar_to_cartesian,
    reentry_filter_model,
    reentry_truth_simulate,
    simulate_trajectory,
    ungm_model,
)
from .polybasis import gh_max_degree_basis, ut_basis
from .quadrature import gh_points, spherical_radial_points, ut_points
from .transforms import TransformError, apply_transform, bsq_weights, bsq_weights_agnostic, classical_weights

__all__ = [
    "ConfigError",
    "NumericalFailure",
    "ScenarioConfig",
    "load_config",
    "default_config",
    "describe_config",
    "build_transform",
    "run_seed",
    "run_experiment",
    "weights_check",
    "SCENARIOS",
]

log = logging.getLogger(__name__)

SCENARIOS = ("polar", "ungm", "reentry", "weights-check")
REENTRY_GROUPS = {"position": (0, 1), "velocity": (2, 3), "parameter": (4,)}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass
class ScenarioConfig:
    name: str
    seed: int = 0
    mc_runs: int = 1
    horizon: int = 1
    bootstrap_resamples: int = 10_000
    transforms: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}; expected one of {', '.join(SCENARIOS)}")
        if self.horizon < 1 or self.mc_runs < 1:
            raise ConfigError("horizon and mc_runs must be >= 1")


# --- configuration ---------------------------------------------------------


def default_config(scenario: str) -> dict:
    try:
        text = resources.files("bsqkf").joinpath("configs", f"{scenario}.yaml").read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown scenario {scenario!r}") from None
    return yaml.safe_load(text)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(source) -> ScenarioConfig:
    """Parse a config file path, YAML text or mapping; unspecified keys take scenario defaults."""
    if isinstance(source, dict):
        raw = source
    else:
        p = Path(source)
        try:
            text = p.read_text() if p.exists() else str(source)
            raw = yaml.safe_load(text)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(raw, dict) or "scenario" not in raw:
        raise ConfigError("config must be a mapping with a 'scenario' key")
    raw = _merge(default_config(str(raw["scenario"])), raw)
    known = {"scenario", "seed", "mc_runs", "horizon", "bootstrap_resamples", "transforms"}
    try:
        return ScenarioConfig(
            name=str(raw["scenario"]),
            seed=int(raw.get("seed", 0)),
            mc_runs=int(raw.get("mc_runs", 1)),
            horizon=int(raw.get("horizon", 1)),
            bootstrap_resamples=int(raw.get("bootstrap_resamples", 10_000)),
            transforms=list(raw.get("transforms") or []),
            params={k: v for k, v in raw.items() if k not in known},
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from None


def _kernel(entry, dim):
    if not isinstance(entry, dict) or "scale" not in entry or "lengthscales" not in entry:
        raise ConfigError("kernel needs 'scale' and 'lengthscales'")
    ell = np.atleast_1d(np.asarray(entry["lengthscales"], dtype=float))
    if ell.size == 1:
        ell = np.full(dim, ell[0])
    if ell.size != dim:
        raise ConfigError(f"kernel has {ell.size} lengthscales for a {dim}-dimensional input")
    return RbfParams(float(entry["scale"]), tuple(ell))


def build_transform(entry: dict, dim: int, role: str = "f"):
    """Build :class:`TransformWeights` from a transform entry of the config.

    ``role`` (``'f'`` or ``'h'``) selects the ``kernel_f``/``kernel_h`` and
    ``emv_f``/``emv_h`` overrides; plain ``kernel``/``emv`` apply to both.
    """
    rule = entry.get("points", "ut")
    method = entry.get("method", "classical")
    name = entry.get("name", f"{method}-{rule}")
    if rule == "ut":
        pts, basis = ut_points(dim, float(entry.get("kappa", 0.0))), ut_basis(dim)
    elif rule == "gh":
        order = int(entry.get("order", 3))
        pts, basis = gh_points(dim, order), gh_max_degree_basis(dim, order)
    elif rule == "sr":
        pts, basis = spherical_radial_points(dim), None
    else:
        raise ConfigError(f"unknown point set {rule!r}")
    if method == "classical":
        return classical_weights(pts, name=name)
    if basis is None:
        raise ConfigError(f"Bayes-Sard weights are not defined for point set {rule!r}")
    if method == "bsq":
        kentry = entry.get(f"kernel_{role}", entry.get("kernel"))
        if kentry is None:
            raise ConfigError(f"transform {name!r}: method 'bsq' needs a kernel")
        return bsq_weights(pts, basis, _kernel(kentry, dim), name=name)
    if method == "bsq-emv":
        emv = entry.get(f"emv_{role}", entry.get("emv"))
        if emv is None:
            raise ConfigError(f"transform {name!r}: method 'bsq-emv' needs 'emv' or 'emv_{role}'")
        return bsq_weights_agnostic(pts, basis, emv, name=name)
    raise ConfigError(f"unknown method {method!r}")


def run_seed(master_seed: int, run_id: int) -> int:
    """Seed of Monte Carlo run ``run_id``; independent of the number of runs."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(run_id),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# --- scenario: polar -------------------------------------------------------


def _polar(cfg: ScenarioConfig, jobs: int):
    grid = cfg.params.get("grid", {})
    n_means, n_covs = int(grid.get("n_means", 10)), int(grid.get("n_covs", 10))
    means = polar_spiral_means(n_means)
    covs = polar_input_covariances(n_covs, float(grid.get("sigma_r", 0.5)),
                                   tuple(grid.get("sigma_theta_deg", (6.0, 36.0))))
    n_mc = int(cfg.params.get("mc_samples", 10_000))
    tfs = [build_transform(t, 2) for t in cfg.transforms]
    rows, grid_rows = [], []
    scores = {t.name: {"skl": []} for t in tfs}
    for i, m in enumerate(means):
        for j, P in enumerate(covs):
            run_id = i * n_covs + j
            rng = np.random.default_rng(run_seed(cfg.seed, run_id))
            samples = polar_to_cartesian(rng.multivariate_normal(m, P, size=n_mc))
            mt, Pt = samples.mean(axis=0), np.cov(samples, rowvar=False)
            for tf in tfs:
                mom = apply_transform(tf, polar_to_cartesian, m, P, vectorized=True)
                val = skl(mom.mean, mom.cov, mt, Pt)
                scores[tf.name]["skl"].append(val)
                rows.append((run_id, tf.name, "skl", val))
                grid_rows.append((i, j, tf.name, val))
    plot = {"polar_skl_grid.csv": (("mean_index", "cov_index", "transform", "skl"), grid_rows)}
    return rows, scores, plot


# --- scenario: ungm --------------------------------------------------------


def _ungm_run(args):
    run_id, seed, horizon, transforms, model_params = args
    model = ungm_model(**model_params)
    x, y = simulate_trajectory(model, horizon, seed=seed)
    out = {}
    for entry in transforms:
        tf, th = build_transform(entry, 1, "f"), build_transform(entry, 1, "h")
        try:
            res = run_filter(model, tf, th, y)
        except FilterError as exc:
            raise NumericalFailure(f"run {run_id}, transform {tf.name}: {exc}") from None
        out[tf.name] = (res.means, res.covs)
    return x, out


def _ungm(cfg: ScenarioConfig, jobs: int):
    mp = cfg.params.get("model", {})
    model_params = {"q_var": float(mp.get("q_var", 10.0)), "r_var": float(mp.get("r_var", 1.0)),
                    "init_var": float(mp.get("init_var", 5.0))}
    tasks = [(r, run_seed(cfg.seed, r), cfg.horizon, cfg.transforms, model_params) for r in range(cfg.mc_runs)]
    results = _map(_ungm_run, tasks, jobs)
    truth = np.array([r[0] for r in results])
    names = [build_transform(t, 1).name for t in cfg.transforms]
    rows, scores = [], {}
    for name in names:
        est = np.array([r[1][name][0] for r in results])
        cov = np.array([r[1][name][1] for r in results])
        rm = [rmse(truth[r], est[r]) for r in range(cfg.mc_runs)]
        scores[name] = {"rmse": rm}
        if cfg.mc_runs >= 2:
            scores[name]["inc"] = list(inc_per_run(truth, est, cov)[0])
        for score, vals in scores[name].items():
            rows.extend((r, name, score, v) for r, v in enumerate(vals))
    return rows, scores, {}


# --- scenario: reentry -----------------------------------------------------


def _reentry_run(args):
    run_id, seed, horizon, transforms, radar = args
    model = reentry_filter_model(radar)
    states, meas = reentry_truth_simulate(seed, radar=radar)
    states, meas = states[:horizon], meas[:horizon]
    out = {}
    for entry in transforms:
        tf, th = build_transform(entry, 5, "f"), build_transform(entry, 5, "h")
        try:
            res = run_filter(model, tf, th, meas)
        except FilterError as exc:
            raise NumericalFailure(f"run {run_id}, transform {tf.name}: {exc}") from None
        out[tf.name] = (res.means, res.covs)
    return states, out


def _reentry(cfg: ScenarioConfig, jobs: int):
    radar = cfg.params.get("radar_position") or (0.0, 0.0)
    try:
        radar = tuple(float(v) for v in radar)
        assert len(radar) == 2
    except (TypeError, ValueError, AssertionError):
        raise ConfigError("radar_position must be a pair of numbers") from None
    horizon = min(cfg.horizon, int(round(ReentryConstants.duration / ReentryConstants.filter_dt)))
    tasks = [(r, run_seed(cfg.seed, r), horizon, cfg.transforms, radar) for r in range(cfg.mc_runs)]
    results = _map(_reentry_run, tasks, jobs)
    truth = np.array([r[0] for r in results])
    names = [build_transform(t, 5).name for t in cfg.transforms]
    rows, scores, ts_rows = [], {}, []
    series = {}
    for name in names:
        est = np.array([r[1][name][0] for r in results])
        cov = np.array([r[1][name][1] for r in results])
        scores[name] = {}
        for group, comps in REENTRY_GROUPS.items():
            scores[name][f"rmse_{group}"] = [rmse(truth[r], est[r], comps) for r in range(cfg.mc_runs)]
            series[(name, f"rmse_{group}")] = rmse_per_step(truth, est, comps)
            if cfg.mc_runs >= 2:
                per_run, _ = inc_per_run(truth, est, cov, comps)
                scores[name][f"inc_{group}"] = list(per_run)
                series[(name, f"inc_{group}")] = _inc_per_step(truth, est, cov, comps)
        for score, vals in scores[name].items():
            rows.extend((r, name, score, v) for r, v in enumerate(vals))
    kinds = ("rmse", "inc") if cfg.mc_runs >= 2 else ("rmse",)
    score_names = [f"{kind}_{g}" for kind in kinds for g in REENTRY_GROUPS]
    for name in names:
        for k in range(horizon):
            ts_rows.append((k + 1, round((k + 1) * ReentryConstants.filter_dt, 10), name,
                            *[series[(name, s)][k] for s in score_names]))
    plot = {"reentry_timeseries.csv": (("k", "time", "transform", *score_names), ts_rows)}
    return rows, scores, plot


def _inc_per_step(truth, est, cov, comps):
    """INC at every time step, averaged over runs (for time-series plots)."""
    idx = list(comps)
    e = (truth - est)[..., idx]
    P = cov[..., idx, :][..., :, idx]
    mse = np.mean(e[..., :, None] * e[..., None, :], axis=0)
    q1 = np.einsum("rki,rki->rk", e, np.linalg.solve(P, e[..., None])[..., 0])
    q2 = np.einsum("rki,rki->rk", e, np.linalg.solve(np.broadcast_to(mse, P.shape), e[..., None])[..., 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log10(q1 / q2)
    return 10.0 * np.mean(np.where(np.isfinite(r), r, 0.0), axis=0)


# --- scenario: weights-check -----------------------------------------------


def weights_check(tol_ut: float = 1e-12, tol_gh: float = 1e-9, ut_dims=(1, 2, 3, 5), kappas=(0.0, 1.0, 2.0),
                  gh_dims=(1, 2), gh_orders=(2, 3, 4, 5)) -> list:
    """Compare Bayes-Sard mean weights with the classical UT and GH weights.

    Returns a list of dicts with keys ``check, dim, param, max_abs_err, tol, passed``.
    """
    out = []
    for D in ut_dims:
        for kappa in kappas:
            if D + kappa <= 0:
                continue
            pts = ut_points(D, kappa)
            w = bsq_weights_agnostic(pts, ut_basis(D), 0.0).w_mean
            err = float(np.max(np.abs(w - pts.weights)))
            out.append({"check": "ut", "dim": D, "param": kappa, "max_abs_err": err, "tol": tol_ut,
                        "passed": err < tol_ut})
    for D in gh_dims:
        for p in gh_orders:
            pts = gh_points(D, p)
            w = bsq_weights_agnostic(pts, gh_max_degree_basis(D, p), 0.0).w_mean
            err = float(np.max(np.abs(w - pts.weights)))
            out.append({"check": "gh", "dim": D, "param": p, "max_abs_err": err, "tol": tol_gh,
                        "passed": err < tol_gh})
    return out


def _weights_check(cfg: ScenarioConfig, jobs: int):
    p = cfg.params
    checks = weights_check(float(p.get("tol_ut", 1e-12)), float(p.get("tol_gh", 1e-9)),
                           tuple(p.get("ut_dims", (1, 2, 3, 5))), tuple(p.get("kappas", (0.0, 1.0, 2.0))),
                           tuple(p.get("gh_dims", (1, 2))), tuple(p.get("gh_orders", (2, 3, 4, 5))))
    rows, scores = [], {}
    for i, c in enumerate(checks):
        name = f"{c['check']}-D{c['dim']}-{c['param']:g}"
        rows.append((i, name, "max_abs_err", c["max_abs_err"]))
        rows.append((i, name, "passed", float(c["passed"])))
        scores[name] = {"max_abs_err": [c["max_abs_err"]], "passed": [float(c["passed"])]}
    return rows, scores, {}


# --- driver ----------------------------------------------------------------


def _map(fn, tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


_RUNNERS = {"polar": _polar, "ungm": _ungm, "reentry": _reentry, "weights-check": _weights_check}


def _fmt(v) -> str:
    return repr(float(v))


def _cell(mean, spread) -> str:
    return f"{mean:.4g} ({spread:.2g})"


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue())


def run_experiment(config, output_dir, seed=None, jobs: int = 1) -> dict:
    """Run a scenario and write its result files; returns the summary mapping.

    Raises :class:`ConfigError` for bad configs and :class:`NumericalFailure`
    when a filter or transform breaks down.
    """
    cfg = config if isinstance(config, ScenarioConfig) else load_config(config)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running scenario %s with %d run(s), seed %d", cfg.name, cfg.mc_runs, cfg.seed)
    try:
        rows, scores, plot = _RUNNERS[cfg.name](cfg, jobs)
    except (TransformError, np.linalg.LinAlgError, FilterError, SimulationError) as exc:
        raise NumericalFailure(str(exc)) from exc
    _write_csv(out / "results.csv", ("run_id", "scenario", "transform", "score_name", "value"),
               [(r, cfg.name, t, s, float(v)) for r, t, s, v in rows])
    summary = {"scenario": cfg.name, "seed": cfg.seed, "mc_runs": cfg.mc_runs, "scores": {}}
    for name, per_score in scores.items():
        summary["scores"][name] = {}
        for score, vals in per_score.items():
            vals = np.asarray(vals, dtype=float)
            mean = float(np.mean(vals))
            spread = (bootstrap_spread(vals, cfg.bootstrap_resamples, seed=cfg.seed)
                      if vals.size > 1 else 0.0)
            summary["scores"][name][score] = {"mean": mean, "spread_2sd": spread, "n": int(vals.size),
                                              "cell": _cell(mean, spread)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if plot:
        (out / "plotdata").mkdir(exist_ok=True)
        for fname, (header, prow) in plot.items():
            _write_csv(out / "plotdata" / fname, header, prow)
    return summary


SCHEMA = """\
# Experiment configuration (YAML). Keys not given take the defaults below.
#
# Common keys
#   scenario: polar | ungm | reentry | weights-check
#   seed: master seed (int); run i uses an independent stream derived from (seed, i)
#   mc_runs: number of Monte Carlo runs
#   horizon: number of filter steps
#   bootstrap_resamples: resamples for the 2-sigma spread of averaged scores
#   transforms: list of transform entries
#
# Transform entry
#   name: label used in results.csv / summary.json
#   points: ut | sr | gh            (ut needs kappa, gh needs order)
#   method: classical | bsq | bsq-emv
#   kernel: {scale: alpha, lengthscales: [l_1, ...]}   for method bsq
#   kernel_f / kernel_h: per-model overrides (dynamics / measurement)
#   emv / emv_f / emv_h: expected model variance (scalar or per output) for bsq-emv
"""


def _num(v) -> str:
    return f"{float(v):g}"


def _transform_line(t: dict) -> str:
    parts = [f"points = {t.get('points', 'ut')}"]
    if "kappa" in t:
        parts.append(f"kappa = {_num(t['kappa'])}")
    if "order" in t:
        parts.append(f"order = {int(t['order'])}")
    parts.append(f"method = {t.get('method', 'classical')}")
    for key in ("kernel", "kernel_f", "kernel_h"):
        if key in t:
            ell = ", ".join(_num(v) for v in np.atleast_1d(t[key]["lengthscales"]))
            parts.append(f"{key} alpha = {_num(t[key]['scale'])}, lengthscales = ({ell})")
    for key in ("emv", "emv_f", "emv_h"):
        if key in t:
            parts.append(f"{key} = {_num(t[key])}")
    return f"#   {t.get('name', '?')}: " + "; ".join(parts)


def describe_config() -> str:
    """Schema text, a digest of default transform settings, then every default config."""
    parts = [SCHEMA, "# Default transform settings per scenario"]
    texts = {}
    for sc in SCENARIOS:
        texts[sc] = resources.files("bsqkf").joinpath("configs", f"{sc}.yaml").read_text()
        transforms = yaml.safe_load(texts[sc]).get("transforms") or []
        if transforms:
            parts.append(f"# {sc}:")
            parts.extend(_transform_line(t) for t in transforms)
    parts.append("")
    for sc in SCENARIOS:
        parts.append(f"# ---- default config: {sc} ----\n{texts[sc]}")
    return "\n".join(parts)
