"""Monte Carlo scenarios M1-M4 and acceptance-proportion studies.

Curves follow ``x_ijk(t) = alpha_i(t) + beta_j(t) + theta_ij(t)
+ gamma_k sin(pi t) + eps_ijk(t)`` on an equidistant grid, are smoothed onto
a cubic B-spline basis, and the three hypotheses are tested with Wilks'
lambda.  Replicate ``r`` of a study always uses the same random substream, so
a study is a pure function of its spec.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .basis import build_basis, fit_curves
from .design import HYPOTHESES, RMDataset
from .dmm import dmm_test
from .errors import InvalidConfigurationError
from .mmm import mmm_test
from .permutation import replicate_rng

__all__ = [
    "CATALOG",
    "CSV_COLUMNS",
    "ScenarioSpec",
    "StudyResult",
    "effect_function",
    "expand_grid",
    "generate_curves",
    "generate_dataset",
    "load_config",
    "run_studies",
    "run_study",
    "scenario",
    "write_csv",
]

_SIN4 = lambda t: np.abs(np.sin(4 * np.pi * t))  # noqa: E731
_SIN2SQ = lambda t: np.sin(2 * np.pi * t**2)  # noqa: E731

# Every function takes (t, i, j) with 1-based treatment level i and group level j.
CATALOG: dict[str, Callable] = {
    "M1.A1": lambda t, i, j: t * (1 - t),
    "M1.A2": lambda t, i, j: t ** (i / 5) * (1 - t) ** (6 - i / 5),
    "M1.A3": lambda t, i, j: t**i * (1 - t) ** (6 - i),
    "M1.B1": lambda t, i, j: 0.1 * _SIN4(t),
    "M1.B2": lambda t, i, j: 0.05 * j * _SIN4(t),
    "M1.B3": lambda t, i, j: 0.025 * j * _SIN4(t),
    "M1.I1": lambda t, i, j: _SIN2SQ(t) ** 5,
    "M1.I2": lambda t, i, j: _SIN2SQ(t) ** (5 + 2 * i * j),
    "M3.I1": lambda t, i, j: np.sin(np.pi * t) ** 13,
    "M3.I2": lambda t, i, j: np.sin(np.pi * t) ** (21 - 2 * i * j),
    "M4.B1": lambda t, i, j: _SIN2SQ(t) ** 5,
    "M4.B2": lambda t, i, j: _SIN2SQ(t) ** (3 + 2 * j),
    "M4.B3": lambda t, i, j: _SIN2SQ(t) ** (5 + 2 * j),
    "M4.I1": lambda t, i, j: 0.05 * _SIN4(t),
    "M4.I2": lambda t, i, j: 0.025 * i * j * _SIN4(t),
}

# Studies reuse the M1 catalog except where they replace a family.
_STUDY_SOURCES = {
    "M1": {"A": "M1", "B": "M1", "I": "M1"},
    "M2": {"A": "M1", "B": "M1", "I": "M1"},
    "M3": {"A": "M1", "B": "M1", "I": "M3"},
    "M4": {"A": "M1", "B": "M4", "I": "M4"},
}
_STUDY_ERRORS = {"M1": "iid_gaussian", "M2": "scaled_brownian",
                 "M3": "iid_gaussian", "M4": "iid_gaussian"}
ERROR_MODELS = ("iid_gaussian", "scaled_brownian")
CSV_COLUMNS = ("scenario", "n", "sigma", "method", "hypothesis", "acceptance",
               "replications", "seed")


def resolve_id(ident: str) -> str:
    """Canonical catalog key for `ident`, e.g. ``M2.B3 -> M1.B3``."""
    ident = ident.strip().upper()
    if ident in CATALOG:
        return ident
    try:
        study, fam = ident.split(".")
        key = f"{_STUDY_SOURCES[study][fam[0]]}.{fam}"
    except (ValueError, KeyError, IndexError):
        key = None
    if key not in CATALOG:
        raise InvalidConfigurationError(
            f"unknown effect function {ident!r}; catalog: {', '.join(CATALOG)} "
            f"(study prefixes {', '.join(_STUDY_SOURCES)} are accepted as aliases)")
    return key


def effect_function(ident: str) -> Callable:
    """Effect function ``f(t, i=1, j=1)`` for a catalog id such as ``M1.A2``."""
    fn = CATALOG[resolve_id(ident)]

    def effect(t, i: int = 1, j: int = 1):
        return fn(np.asarray(t, dtype=float), i, j)

    effect.__name__ = resolve_id(ident).replace(".", "_")
    return effect


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of a simulation study."""

    treatment_fn: str = "M1.A1"
    group_fn: str = "M1.B1"
    interaction_fn: str = "M1.I1"
    error_model: str = "iid_gaussian"
    sigma_eps: float = 0.10
    n_per_group: int = 50
    g: int = 2
    m: int = 3
    grid_points: int = 101
    basis_dim: int = 14
    replications: int = 200
    alpha: float = 0.05
    seed: int = 0
    subject_sd: float = 0.2
    subject_mean_max: float = 0.05
    name: str = ""

    def __post_init__(self):
        for attr in ("treatment_fn", "group_fn", "interaction_fn"):
            object.__setattr__(self, attr, resolve_id(getattr(self, attr)))
        if self.error_model not in ERROR_MODELS:
            raise InvalidConfigurationError(
                f"error_model must be one of {ERROR_MODELS}, got {self.error_model!r}")
        if self.sigma_eps < 0:
            raise InvalidConfigurationError(f"sigma_eps must be >= 0, got {self.sigma_eps}")
        if self.replications < 1:
            raise InvalidConfigurationError(f"replications must be >= 1, got {self.replications}")
        if self.n_per_group < 1 or self.g < 1 or self.m < 1:
            raise InvalidConfigurationError("n_per_group, g and m must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidConfigurationError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.name:
            ids = [self.treatment_fn, self.group_fn, self.interaction_fn]
            object.__setattr__(self, "name", ".".join([ids[0]] + [s.split(".")[1] for s in ids[1:]]))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_points)


def scenario(study: str, a: str = "A1", b: str = "B1", i: str = "I1", **kwargs) -> ScenarioSpec:
    """Spec for a cell of study ``M1``..``M4``; e.g. ``scenario("M2", "A1", "B1", "I1")``."""
    study = study.upper()
    if study not in _STUDY_SOURCES:
        raise InvalidConfigurationError(f"unknown study {study!r}; expected one of {list(_STUDY_SOURCES)}")
    kwargs.setdefault("error_model", _STUDY_ERRORS[study])
    kwargs.setdefault("name", f"{study}.{a}.{b}.{i}")
    return ScenarioSpec(f"{study}.{a}", f"{study}.{b}", f"{study}.{i}", **kwargs)


def mean_curves(spec: ScenarioSpec) -> np.ndarray:
    """Deterministic part of the curves, shape ``(g, m, grid_points)``."""
    t = spec.grid
    fa, fb, fi = (CATALOG[k] for k in (spec.treatment_fn, spec.group_fn, spec.interaction_fn))
    out = np.empty((spec.g, spec.m, t.size))
    for j in range(1, spec.g + 1):
        for i in range(1, spec.m + 1):
            out[j - 1, i - 1] = (np.broadcast_to(fa(t, i, j), t.shape)
                                 + np.broadcast_to(fb(t, i, j), t.shape)
                                 + np.broadcast_to(fi(t, i, j), t.shape))
    return out


def generate_errors(spec: ScenarioSpec, rng: np.random.Generator, shape) -> np.ndarray:
    """Error draws of shape ``shape + (grid_points,)``.

    ``iid_gaussian``: independent N(0, sigma_eps^2) per grid point.
    ``scaled_brownian``: ``sigma_eps / 20`` times a standard Brownian motion
    started at 0 and built from Gaussian increments over the grid.
    """
    r = spec.grid_points
    if spec.error_model == "iid_gaussian":
        return spec.sigma_eps * rng.standard_normal(tuple(shape) + (r,))
    dt = np.diff(spec.grid)
    inc = rng.standard_normal(tuple(shape) + (r - 1,)) * np.sqrt(dt)
    bm = np.concatenate([np.zeros(tuple(shape) + (1,)), np.cumsum(inc, axis=-1)], axis=-1)
    return spec.sigma_eps / 20.0 * bm


def generate_curves(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Discretized curves, shape ``(g*n_per_group, m, grid_points)``, group-major."""
    n = spec.g * spec.n_per_group
    t = spec.grid
    mu_k = rng.uniform(0.0, spec.subject_mean_max, size=n)
    gamma = mu_k + spec.subject_sd * rng.standard_normal(n)
    errors = generate_errors(spec, rng, (n, spec.m))
    means = mean_curves(spec)
    group = np.repeat(np.arange(spec.g), spec.n_per_group)
    return means[group] + gamma[:, None, None] * np.sin(np.pi * t) + errors


def generate_dataset(spec: ScenarioSpec, rng: np.random.Generator) -> RMDataset:
    """Simulated curves smoothed onto the cubic B-spline basis."""
    curves = generate_curves(spec, rng)
    n, m, r = curves.shape
    basis = build_basis((0.0, 1.0), spec.basis_dim, 4)
    coefs = fit_curves(basis, spec.grid, curves.reshape(n * m, r).T)
    return RMDataset(coefs.T.reshape(n, m, spec.basis_dim), (spec.n_per_group,) * spec.g)


@dataclass
class StudyResult:
    """Acceptance proportions of one scenario.

    ``acceptance`` maps ``(method, hypothesis)`` to the proportion of
    replications with Wilks p-value >= alpha; ``by_statistic`` holds the same
    for every statistic, keyed ``(method, hypothesis, kind)``.
    """

    spec: ScenarioSpec
    acceptance: dict[tuple[str, str], float]
    by_statistic: dict[tuple[str, str, str], float] = field(default_factory=dict)
    replications: int = 0
    runtime: float = 0.0
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for (method, hyp), acc in self.acceptance.items():
            out.append({"scenario": self.spec.name, "n": self.spec.n_per_group,
                        "sigma": f"{self.spec.sigma_eps:g}", "method": method,
                        "hypothesis": hyp, "acceptance": f"{acc:.3f}",
                        "replications": self.replications, "seed": self.spec.seed})
        return out

    def to_record(self) -> dict:
        return {"scenario": self.spec.name, "n": self.spec.n_per_group,
                "sigma": self.spec.sigma_eps, "error_model": self.spec.error_model,
                "replications": self.replications, "seed": self.spec.seed,
                "alpha": self.spec.alpha,
                "acceptance": {f"{m}/{h}": v for (m, h), v in self.acceptance.items()},
                "by_statistic": {f"{m}/{h}/{k}": v for (m, h, k), v in self.by_statistic.items()},
                "notes": list(self.notes)}


_HYP_ORDER = ("interaction", "treatment", "group")


def _feasible(method: str, spec: ScenarioSpec) -> bool:
    n = spec.g * spec.n_per_group
    if method == "DMM":
        return n > spec.basis_dim * spec.m
    return n * spec.m > spec.basis_dim


def _replicate(spec: ScenarioSpec, methods: Sequence[str], r: int):
    ds = generate_dataset(spec, replicate_rng(spec.seed, r))
    out = {}
    hyps = [h for h in _HYP_ORDER if h in HYPOTHESES and (spec.g > 1 or h == "treatment")]
    for method in methods:
        for hyp in hyps:
            if method == "DMM":
                rep = dmm_test(ds, hyp)
            else:
                rep = mmm_test(ds, hyp, adjust="none")
            out[(method, hyp)] = [s.p_value for s in rep.statistics]
    return out


def _run_chunk(args):
    spec, methods, indices = args
    return [_replicate(spec, methods, r) for r in indices]


def run_study(spec: ScenarioSpec, methods: Iterable[str] = ("DMM", "MMM"),
              n_jobs: int = 1) -> StudyResult:
    """Run all replications of `spec` and tabulate acceptance proportions."""
    start = time.perf_counter()
    methods = [m.upper() for m in methods]
    for m in methods:
        if m not in ("DMM", "MMM"):
            raise InvalidConfigurationError(f"unknown method {m!r}; expected DMM or MMM")
    notes = []
    usable = []
    for m in methods:
        if _feasible(m, spec):
            usable.append(m)
        else:
            notes.append(f"{m} skipped: dimension condition fails for n={spec.g * spec.n_per_group}, "
                         f"p={spec.basis_dim}, m={spec.m}")
    idx = list(range(spec.replications))
    if n_jobs > 1 and len(idx) > 1:
        chunks = [c.tolist() for c in np.array_split(idx, n_jobs)]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = [res for part in pool.map(_run_chunk, [(spec, usable, c) for c in chunks])
                       for res in part]
    else:
        results = _run_chunk((spec, usable, idx))

    kinds = ("W", "LH", "P", "R")
    acceptance, by_stat = {}, {}
    for key in (results[0] if results else {}):
        pv = np.array([res[key] for res in results])
        accept = pv >= spec.alpha
        for col, kind in enumerate(kinds):
            by_stat[key + (kind,)] = float(np.mean(accept[:, col]))
        acceptance[key] = by_stat[key + ("W",)]
    return StudyResult(spec, acceptance, by_stat, spec.replications,
                       time.perf_counter() - start, notes)


def expand_grid(study: str = "M1", treatments=("A1", "A2", "A3"), groups=("B1", "B2", "B3"),
                interactions=("I1", "I2"), ns=(50, 100), sigmas=(0.10, 0.20, 0.40),
                **kwargs) -> list[ScenarioSpec]:
    """All scenario cells of a study table (108 for the full M1 grid)."""
    specs = []
    for a, b, i, n, s in itertools.product(treatments, groups, interactions, ns, sigmas):
        specs.append(scenario(study, a, b, i, n_per_group=int(n), sigma_eps=float(s), **kwargs))
    return specs


def run_studies(specs: Iterable[ScenarioSpec], methods=("DMM", "MMM"), n_jobs: int = 1
                ) -> list[StudyResult]:
    return [run_study(s, methods, n_jobs) for s in specs]


def write_csv(results: Iterable[StudyResult], fh=None) -> str:
    """CSV rows mirroring the study tables; returns the text when `fh` is None."""
    buf = io.StringIO() if fh is None else fh
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for res in results:
        writer.writerows(res.rows())
    return buf.getvalue() if fh is None else ""


def write_records(results: Iterable[StudyResult], fh) -> None:
    """One JSON object per study (runtime excluded to keep output reproducible)."""
    for res in results:
        fh.write(json.dumps(res.to_record(), sort_keys=True) + "\n")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


_FAMILY_ALL = {"treatment": ("A1", "A2", "A3"), "group": ("B1", "B2", "B3"),
               "interaction": ("I1", "I2")}


def load_config(text: str) -> list[tuple[ScenarioSpec, tuple[str, ...]]]:
    """Parse a study configuration into ``(spec, methods)`` pairs.

    The format is INI-style: one section per study, ``key = value`` lines.
    Keys: ``study`` (M1..M4), ``treatment``, ``group``, ``interaction``
    (ids like ``A1`` or ``all``, comma lists allowed), ``n``, ``sigma``
    (comma lists allowed), ``methods``, ``replications``, ``seed``,
    ``alpha``, ``basis_dim``, ``grid_points``, ``error_model``.
    ``grid = full`` selects every A/B/I/n/sigma combination.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfigurationError(f"malformed configuration: {exc}") from exc
    known = {"study", "treatment", "group", "interaction", "n", "sigma", "methods",
             "replications", "seed", "alpha", "basis_dim", "grid_points", "error_model", "grid"}
    out = []
    if not parser.sections():
        raise InvalidConfigurationError("configuration defines no study sections")
    for name in parser.sections():
        sec = parser[name]
        unknown = set(sec) - known
        if unknown:
            raise InvalidConfigurationError(f"[{name}] unknown keys: {sorted(unknown)}")
        study = sec.get("study", "M1").upper()
        full = sec.get("grid", "").strip().lower() == "full"
        fams = {}
        for fam in ("treatment", "group", "interaction"):
            raw = sec.get(fam, "all" if full else _FAMILY_ALL[fam][0])
            fams[fam] = _FAMILY_ALL[fam] if raw.strip().lower() == "all" else [
                v.split(".")[-1] for v in _split(raw)]
        try:
            ns = [int(v) for v in _split(sec.get("n", "50,100" if full else "50"))]
            sigmas = [float(v) for v in _split(sec.get("sigma", "0.1,0.2,0.4" if full else "0.1"))]
            kwargs = {"replications": int(sec.get("replications", "200")),
                      "seed": int(sec.get("seed", "0")),
                      "alpha": float(sec.get("alpha", "0.05")),
                      "basis_dim": int(sec.get("basis_dim", "14")),
                      "grid_points": int(sec.get("grid_points", "101"))}
        except ValueError as exc:
            raise InvalidConfigurationError(f"[{name}] bad numeric value: {exc}") from exc
        if "error_model" in sec:
            kwargs["error_model"] = sec["error_model"].strip()
        methods = tuple(m.upper() for m in _split(sec.get("methods", "DMM,MMM")))
        specs = expand_grid(study, fams["treatment"], fams["group"], fams["interaction"],
                            ns, sigmas, **kwargs)
        out.extend((s, methods) for s in specs)
    return out
