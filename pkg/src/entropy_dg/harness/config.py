"""Experiment configuration: flat ``key = value`` text with one section per experiment.

Every experiment accepts the same keys.  Sweep keys hold comma separated
lists; the rest are scalars.  Unknown keys and sections are rejected with a
:class:`ConfigError` naming the offender.

Example::

    [entropy-wave]
    N = 1, 2, 3
    K = 8, 16, 32
    quad = gauss2
    flux = eclf
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..refelem import QUADRATURE_MODES
from ..solver import FLUX_MODES

EXPERIMENTS = (
    "ops-check",
    "flux-check",
    "entropy-wave",
    "pulse-1d",
    "sod",
    "sine-shock",
    "pulse-2d",
    "vortex",
    "riemann-2d",
    "projection-study",
    "burgers-equivalence",
)

SCALES = ("smoke", "full")

LIST_KEYS = ("N", "K", "K2d", "cfl", "quad", "flux", "log_eps")
INT_KEYS = ("N", "K", "K2d", "threads", "cadence", "trials", "seed")
FLOAT_KEYS = ("cfl", "log_eps", "T", "gamma")


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated settings of one experiment.

    ``K`` counts elements in 1D and quadrilaterals per direction in 2D
    (each split into two triangles).  ``K2d`` is the 2D sweep of the
    projection study, which covers both dimensions.
    """

    experiment: str
    N: tuple = (1,)
    K: tuple = (16,)
    K2d: tuple = ()
    cfl: tuple = (0.125,)
    quad: tuple = ("gauss2",)
    flux: tuple = ("eclf",)
    log_eps: tuple = (1e-4,)
    T: float = 1.0
    gamma: float = 1.4
    threads: int = 1
    cadence: int = 1
    trials: int = 100
    seed: int = 0
    scale: str = "smoke"
    out: str = "results"


KEYS = tuple(f.name for f in dataclasses.fields(ExperimentSpec) if f.name != "experiment")

_GLL_GQ = ("gll", "gauss2")

DEFAULTS = {
    "ops-check": dict(N=(1, 2, 3, 4, 5), quad=("gll", "gauss1", "gauss2", "tri2n")),
    "flux-check": dict(trials=1000),
    "entropy-wave": dict(N=(1, 2, 3, 4, 5), K=(4, 8, 16, 32, 64), quad=_GLL_GQ,
                         flux=("eclf", "ec"), T=0.7, cadence=1000000),
    "pulse-1d": dict(N=(4,), K=(16,), quad=("gauss2",), flux=("ec",),
                     cfl=(0.5, 0.25, 0.125, 0.0625), T=2.0, cadence=10),
    "sod": dict(N=(4,), K=(32,), quad=_GLL_GQ, T=0.2, cadence=50),
    "sine-shock": dict(N=(4,), K=(40,), quad=_GLL_GQ, cfl=(0.05,), T=1.8, cadence=200),
    "pulse-2d": dict(N=(4,), K=(8,), quad=("tri2n",), flux=("ec",),
                     cfl=(0.5, 0.25, 0.125, 0.0625),
                     T=2.0, cadence=10),
    "vortex": dict(N=(1, 2), K=(8, 16, 32, 64), quad=("tri2n",), T=5.0, cadence=1000000),
    "riemann-2d": dict(N=(3,), K=(32,), quad=("tri2n",), cfl=(0.0625,), T=0.25,
                       cadence=1000000),
    "projection-study": dict(N=(1, 2, 3, 4, 5), K=(8, 16, 32, 64, 128), K2d=(8, 16, 32, 64),
                             quad=("gauss2",)),
    "burgers-equivalence": dict(N=(1, 2, 3, 4, 5), K=(8,), quad=("gll", "gauss1")),
}

# riemann-2d at full scale (64 x 64 quads)
FULL_SCALE = {"riemann-2d": dict(K=(64,))}


def default_spec(experiment: str) -> ExperimentSpec:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}", key="experiment")
    return ExperimentSpec(experiment=experiment, **DEFAULTS[experiment])


def _convert(key, text):
    text = str(text).strip()
    if key in LIST_KEYS:
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items and key != "K2d":
            raise ConfigError(f"{key} must list at least one value", key=key)
        return tuple(_scalar(key, t) for t in items)
    return _scalar(key, text)


def _scalar(key, text):
    try:
        if key in INT_KEYS:
            return int(text)
        if key in FLOAT_KEYS:
            return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {text!r}", key=key) from None
    return text


def validate(spec: ExperimentSpec) -> ExperimentSpec:
    def bad(key, why):
        raise ConfigError(f"{key}: {why}", key=key)

    if spec.experiment not in EXPERIMENTS:
        bad("experiment", f"unknown experiment {spec.experiment!r}")
    for key in LIST_KEYS:
        if key != "K2d" and not getattr(spec, key):
            bad(key, "sweep is empty")
    if any(n < 1 for n in spec.N):
        bad("N", "degrees must be >= 1")
    if any(k < 1 for k in spec.K + spec.K2d):
        bad("K", "element counts must be >= 1")
    if any(not c > 0 for c in spec.cfl):
        bad("cfl", "CFL must be positive")
    if any(not 0 < e < 1 for e in spec.log_eps):
        bad("log_eps", "tolerance must lie in (0, 1)")
    for q in spec.quad:
        if q not in QUADRATURE_MODES:
            bad("quad", f"unknown quadrature {q!r}, expected one of {QUADRATURE_MODES}")
    for f in spec.flux:
        if f not in FLUX_MODES:
            bad("flux", f"unknown flux {f!r}, expected one of {FLUX_MODES}")
    if not spec.T >= 0:
        bad("T", "final time must be non-negative")
    if not spec.gamma > 1:
        bad("gamma", "gamma must exceed 1")
    if spec.threads < 1:
        bad("threads", "need at least one thread")
    if spec.cadence < 1:
        bad("cadence", "cadence must be >= 1")
    if spec.trials < 1:
        bad("trials", "need at least one trial")
    if spec.scale not in SCALES:
        bad("scale", f"expected one of {SCALES}")
    return spec


def apply_overrides(spec: ExperimentSpec, overrides: dict) -> ExperimentSpec:
    """Return a validated copy with raw string or typed values replaced."""
    changes = {}
    for key, val in overrides.items():
        if val is None:
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", key=key)
        if isinstance(val, str):
            val = _convert(key, val)
        elif key in LIST_KEYS and not isinstance(val, (tuple, list)):
            val = (val,)
        if key in LIST_KEYS:
            val = tuple(val)
        changes[key] = val
    if "scale" in changes and changes["scale"] == "full":
        for k, v in FULL_SCALE.get(spec.experiment, {}).items():
            changes.setdefault(k, v)
    return validate(dataclasses.replace(spec, **changes))


def parse_config(experiment: str, text: str = "", overrides: dict | None = None) -> ExperimentSpec:
    """Defaults for ``experiment``, then its config section, then ``overrides``.

    Sections other than ``[experiment]`` must still name known experiments,
    so one file can configure several of them.
    """
    spec = default_spec(experiment)
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", key=None) from None
    for name in parser.sections():
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment section [{name}]", key=name)
    section = dict(parser[experiment]) if parser.has_section(experiment) else {}
    spec = apply_overrides(spec, section)
    return apply_overrides(spec, overrides or {})


def load_config(experiment: str, path=None, overrides: dict | None = None) -> ExperimentSpec:
    text = ""
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}", key="config") from None
    return parse_config(experiment, text, overrides)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(spec: ExperimentSpec) -> str:
    """Canonical text form; ``parse_config`` of it gives back ``spec``."""
    lines = [f"[{spec.experiment}]"]
    for key in KEYS:
        val = getattr(spec, key)
        if key in LIST_KEYS:
            val = ", ".join(_fmt(v) for v in val)
        else:
            val = _fmt(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
