"""Command-line front end.

JSON results go to stdout (or --out FILE); a short human-readable table goes
to stderr. Exit codes: 0 success, 2 parse error, 3 numeric failure,
4 non-convergence, 1 failed verification.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import click
import numpy as np

from .densities import IsotropicKind, shape_logdensity
from .errors import NumericError, ParseError, SeriesTruncationError, SvdShapeError
from .geometry import Mode, preprocess, svd_shape
from .inference import (OptimizerConfig, SampleOfShapes, evidence_grade,
                        fit_location, lr_test_equal_means)
from .io import ingest_landmarks, read_matrix
from .models import GeneratorKind, GeneratorSpec, ModelSpec
from .verify import mc_normalization, simulation_vs_density
from .zonal import SeriesControl

SCHEMA_VERSION = 1

EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_NONCONVERGENCE = 4


@dataclass(frozen=True)
class RunConfig:
    model: str = "gaussian"
    kotz_T: int = 2
    kotz_R: float = 0.5
    sigma2: float = 1.0
    theta_path: str | None = None
    mu_path: str | None = None
    mode: Mode = Mode.REFLECTION
    max_degree: int = 60
    rel_tol: float = 1e-12
    seed: int = 0
    out: str | None = None

    @property
    def ctrl(self) -> SeriesControl:
        return SeriesControl(max_degree=self.max_degree, rel_tol=self.rel_tol)

    @property
    def isotropic_kind(self) -> IsotropicKind:
        if self.model == "gaussian":
            return IsotropicKind.GAUSSIAN
        if self.kotz_T == 2:
            return IsotropicKind.KOTZ_T2
        if self.kotz_T == 3:
            return IsotropicKind.KOTZ_T3
        raise ParseError(
            f"inference commands support kotz T in {{2, 3}}, got {self.kotz_T}")


def _read_config_file(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=i)
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_CONFIG_CASTS = {
    "model": str, "kotz_T": int, "kotz_R": float, "sigma2": float,
    "theta": str, "mu": str, "mode": str, "max_degree": int,
    "tol": float, "seed": int, "out": str,
}


def common_options(fn):
    opts = [
        click.option("--model", type=click.Choice(["gaussian", "kotz"]), default=None),
        click.option("--kotz-T", "kotz_T", type=int, default=None),
        click.option("--kotz-R", "kotz_R", type=float, default=None),
        click.option("--sigma2", type=float, default=None),
        click.option("--theta", "theta", type=click.Path(exists=True), default=None,
                     help="K x K column covariance matrix file (default identity)"),
        click.option("--mu", "mu", type=click.Path(exists=True), default=None,
                     help="(N-1) x K location matrix file (default zero)"),
        click.option("--mode", type=click.Choice(["reflection", "no-reflection"]),
                     default=None),
        click.option("--max-degree", "max_degree", type=int, default=None),
        click.option("--tol", type=float, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--out", type=click.Path(), default=None),
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="flat key=value config file; flags win"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(config_path, **flags) -> RunConfig:
    values = {}
    if config_path:
        raw = _read_config_file(config_path)
        for key, text in raw.items():
            if key not in _CONFIG_CASTS:
                raise ParseError(f"unknown config key {key!r}")
            values[key] = _CONFIG_CASTS[key](text)
    for key, val in flags.items():
        if val is not None:
            values[key] = val
    values.setdefault("model", "gaussian")
    kwargs = dict(
        model=values.get("model", "gaussian"),
        kotz_T=values.get("kotz_T", 2),
        kotz_R=values.get("kotz_R", 0.5),
        sigma2=values.get("sigma2", 1.0),
        theta_path=values.get("theta"),
        mu_path=values.get("mu"),
        mode=Mode(values.get("mode", "reflection")),
        max_degree=values.get("max_degree", 60),
        rel_tol=values.get("tol", 1e-12),
        seed=values.get("seed", 0),
        out=values.get("out"),
    )
    return RunConfig(**kwargs)


def _emit(config: RunConfig, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2, default=_jsonify)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _table(lines: list[str]) -> None:
    for line in lines:
        click.echo(line, err=True)


def _run(fn):
    try:
        return fn()
    except ParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    except (SeriesTruncationError, NumericError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    except SvdShapeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PARSE)


def _load_sample(path: str, config: RunConfig, group_id: str) -> SampleOfShapes:
    specimens = ingest_landmarks(path)
    theta = read_matrix(config.theta_path) if config.theta_path else None
    items = []
    for sp in specimens:
        items.append((sp.id, svd_shape(preprocess(sp, theta), config.mode)))
    return SampleOfShapes(group_id, tuple(items))


def _build_model(config: RunConfig, Nm1: int, K: int) -> ModelSpec:
    kind = (GeneratorKind.GAUSSIAN if config.model == "gaussian"
            else GeneratorKind.KOTZ_TYPE_I)
    gen = GeneratorSpec(kind, M=Nm1 * K, T=config.kotz_T, R=config.kotz_R)
    theta = read_matrix(config.theta_path) if config.theta_path else np.eye(K)
    mu = (read_matrix(config.mu_path) if config.mu_path
          else np.zeros((Nm1, K)))
    return ModelSpec(gen, config.sigma2 * np.eye(Nm1), theta, mu)


@click.group()
def main():
    """Exact shape densities and likelihood inference for landmark data."""


@main.command("shape")
@common_options
@click.argument("input_file", type=click.Path(exists=True))
def cmd_shape(input_file, config_path, **flags):
    """Per-specimen SVD shape coordinates (r, W, u, Jacobian)."""
    def body():
        config = _build_config(config_path, **flags)
        sample = _load_sample(input_file, config, "input")
        records = []
        for sid, sc in sample.items:
            records.append({
                "id": sid, "r": sc.r, "W": sc.W, "u": sc.u,
                "jacobian": sc.jacobian, "mode": sc.mode.value,
            })
        _emit(config, {"command": "shape", "specimens": records})
        _table([f"{sid:>16}  r={rec['r']:.6g}  J={rec['jacobian']:.6g}"
                for sid, rec in ((r["id"], r) for r in records)])
    _run(body)


@main.command("density")
@common_options
@click.argument("input_file", type=click.Path(exists=True))
def cmd_density(input_file, config_path, **flags):
    """Per-specimen shape log-density under the configured model."""
    def body():
        config = _build_config(config_path, **flags)
        sample = _load_sample(input_file, config, "input")
        model = _build_model(config, sample.Nm1, sample.K)
        records = []
        for sid, sc in sample.items:
            dv = shape_logdensity(sc.u, model, config.mode, config.ctrl)
            records.append({
                "id": sid, "log_density": dv.log_density,
                "series_degrees_used": dv.degrees_used,
                "tail_bound": dv.tail_bound,
            })
        _emit(config, {"command": "density", "model": config.model,
                       "specimens": records})
        _table([f"{r['id']:>16}  log f = {r['log_density']:.10g}" for r in records])
    _run(body)


@main.command("fit")
@common_options
@click.argument("input_file", type=click.Path(exists=True))
def cmd_fit(input_file, config_path, **flags):
    """Maximum-likelihood location fit (sigma2 fixed by protocol)."""
    def body():
        config = _build_config(config_path, **flags)
        sample = _load_sample(input_file, config, "input")
        fit = fit_location(sample, config.isotropic_kind, config.sigma2,
                           OptimizerConfig(seed=config.seed), config.ctrl)
        _emit(config, {"command": "fit", "model": config.model,
                       "kind": config.isotropic_kind.value,
                       "mu_hat": fit.mu_hat, "sigma2": fit.sigma2,
                       "loglik": fit.loglik, "n_params": fit.n_params,
                       "bic_star": fit.bic_star, "converged": fit.converged,
                       "evaluations": fit.evaluations})
        _table([f"loglik = {fit.loglik:.6f}   BIC* = {fit.bic_star:.6f}   "
                f"converged = {fit.converged}"])
        if not fit.converged:
            sys.exit(EXIT_NONCONVERGENCE)
    _run(body)


_COMPARE_KINDS = (("gaussian", IsotropicKind.GAUSSIAN),
                  ("kotz-t2", IsotropicKind.KOTZ_T2),
                  ("kotz-t3", IsotropicKind.KOTZ_T3))


@main.command("compare")
@common_options
@click.argument("input_file", type=click.Path(exists=True))
def cmd_compare(input_file, config_path, **flags):
    """Fit Gaussian, Kotz T=2 and Kotz T=3; rank by modified BIC."""
    def body():
        config = _build_config(config_path, **flags)
        sample = _load_sample(input_file, config, "input")
        fits = {}
        for name, kind in _COMPARE_KINDS:
            fit = fit_location(sample, kind, config.sigma2,
                               OptimizerConfig(seed=config.seed), config.ctrl)
            fits[name] = fit
        ranked = sorted(fits, key=lambda k: fits[k].bic_star)
        pairwise = []
        for i, a in enumerate(ranked):
            for b in ranked[i + 1:]:
                delta = fits[b].bic_star - fits[a].bic_star
                pairwise.append({"preferred": a, "against": b,
                                 "delta_bic_star": delta,
                                 "grade": evidence_grade(delta).value})
        _emit(config, {
            "command": "compare",
            "models": {name: {"loglik": f.loglik, "bic_star": f.bic_star,
                              "mu_hat": f.mu_hat, "converged": f.converged}
                       for name, f in fits.items()},
            "ranking": ranked, "pairwise": pairwise})
        _table([f"{name:>10}  BIC* = {fits[name].bic_star:12.4f}" for name in ranked])
        if not all(f.converged for f in fits.values()):
            sys.exit(EXIT_NONCONVERGENCE)
    _run(body)


@main.command("test")
@common_options
@click.argument("group1_file", type=click.Path(exists=True))
@click.argument("group2_file", type=click.Path(exists=True))
def cmd_test(group1_file, group2_file, config_path, **flags):
    """Likelihood-ratio test of equal mean shapes across two groups."""
    def body():
        config = _build_config(config_path, **flags)
        s1 = _load_sample(group1_file, config, "group1")
        s2 = _load_sample(group2_file, config, "group2")
        res = lr_test_equal_means(s1, s2, config.isotropic_kind, config.sigma2,
                                  OptimizerConfig(seed=config.seed), config.ctrl)
        _emit(config, {"command": "test", "kind": config.isotropic_kind.value,
                       "statistic": res.statistic, "df": res.df,
                       "p_value": res.p_value,
                       "loglik_pooled": res.fit_pooled.loglik,
                       "loglik_group1": res.fit_group1.loglik,
                       "loglik_group2": res.fit_group2.loglik})
        _table([f"-2 log Lambda = {res.statistic:.4f}  df = {res.df}  "
                f"p = {res.p_value:.4f}"])
        if not (res.fit_pooled.converged and res.fit_group1.converged
                and res.fit_group2.converged):
            sys.exit(EXIT_NONCONVERGENCE)
    _run(body)


@main.command("verify")
@common_options
@click.option("--mc-samples", type=int, default=50000)
@click.option("--sim-count", type=int, default=20000)
@click.option("--landmarks", "n_landmarks", type=int, default=3,
              help="N for the built-in verification model")
@click.option("--dimension", "k_dim", type=int, default=2,
              help="K for the built-in verification model")
def cmd_verify(config_path, mc_samples, sim_count, n_landmarks, k_dim, **flags):
    """Run the Monte Carlo oracles (normalization mass, simulation match)."""
    def body():
        config = _build_config(config_path, **flags)
        model = _build_model(config, n_landmarks - 1, k_dim)
        mass, se = mc_normalization(model, config.mode, config.ctrl,
                                    mc_samples, config.seed)
        mass_ok = abs(mass - 1.0) < max(3.0 * se, 0.02)
        rep = simulation_vs_density(model, Mode.REFLECTION, config.ctrl,
                                    max(sim_count, 1000), config.seed)
        _emit(config, {
            "command": "verify",
            "normalization": {"mass": mass, "standard_error": se, "passed": mass_ok},
            "simulation": {
                "passed": rep.passed, "bins": rep.bins,
                "marginals": [{"angle_index": mr.angle_index, "chi2": mr.chi2,
                               "dof": mr.dof, "critical_99": mr.critical_99,
                               "passed": mr.passed} for mr in rep.marginals]}})
        _table([f"mass = {mass:.4f} +- {se:.4f}  ->  "
                f"{'pass' if mass_ok else 'FAIL'}",
                f"simulation match: {'pass' if rep.passed else 'FAIL'}"])
        if not (mass_ok and rep.passed):
            sys.exit(1)
    _run(body)


if __name__ == "__main__":
    main()
