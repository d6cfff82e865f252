"""Flat, line-oriented experiment configuration.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#``
starts a comment.  Sections: scenario, run, output.  Values are scalars or
comma-separated lists; everything is validated when the scenario is built
(field families against the registry, H in (1/4, 1/2], power-of-two grid
for dyadic studies).
"""

import hashlib
from dataclasses import dataclass, field

from .fields import FIELD_FAMILIES, make_drift, make_sigma
from .filtering import Phi, Scenario
from .volterra import VolterraKernel

__all__ = ["ExperimentConfig", "parse_config", "load_config", "default_config_text"]


class ConfigError(ValueError):
    pass


def default_config_text() -> str:
    return """\
# roughfilter default experiment: linear-Gaussian benchmark at H = 1/2
[scenario]
kernel = brownian
H = 0.5
d_B = 1
d_Y = 1
d_X = 1
sigma_family = constant
sigma_scale = 0.6
b_family = linear
b_scale = 0.8
x0_law = gaussian
x0_mean = 1.0
x0_sd = 0.5
T = 1.0
grid_n = 64
inner_refine = 8
phi = coordinate
phi_index = 0

[run]
seed = 1
n_mc = 4000
n_paths = 100
t_eval = 0.5, 1.0
kappa = 0.5
refine_levels = 3
m_space = 257
n_draws = 5
p = 2.5
dims = 2
n_min = 5
n_max = 8

[output]
formats = csv
"""


def parse_config(text: str) -> dict:
    sections = {"scenario": {}, "run": {}, "output": {}}
    current = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in sections:
                raise ConfigError(f"line {ln}: unknown section [{current}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {raw!r}")
        if current is None:
            raise ConfigError(f"line {ln}: key outside any [section]")
        key, val = (part.strip() for part in line.split("=", 1))
        sections[current][key] = val
    return sections


def _get(sec, key, cast, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return cast(sec[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {sec[key]!r} ({exc})") from exc


def _floats(v):
    return tuple(float(x) for x in v.split(","))


@dataclass
class ExperimentConfig:
    scenario: Scenario
    run: dict
    output: dict = field(default_factory=dict)
    text: str = ""

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]


def _build_phi(sec) -> Phi:
    kind = sec.get("phi", "coordinate")
    if kind == "indicator":
        kind = "indicator_above"
    if kind not in ("coordinate", "indicator_above", "polynomial",
                    "bounded_smooth", "one"):
        raise ConfigError(f"unknown phi {kind!r}")
    return Phi(kind=kind,
               index=_get(sec, "phi_index", int, 0),
               threshold=_get(sec, "phi_threshold", float, 0.0),
               coeffs=_get(sec, "phi_coeffs", _floats, (0.0, 1.0)))


def build_scenario(sec: dict) -> Scenario:
    family = sec.get("kernel", "brownian")
    H = _get(sec, "H", float, 0.5)
    try:
        kernel = VolterraKernel(family, H=H,
                                quadrature_points=_get(sec, "quadrature_points", int, 64))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    d_b = _get(sec, "d_B", int, 1)
    d_y = _get(sec, "d_Y", int, 1)
    d_x = _get(sec, "d_X", int, 1)
    d_state = d_x + d_y
    sf = sec.get("sigma_family", "constant")
    bf = sec.get("b_family", "constant")
    for fam in (sf, bf):
        if fam not in FIELD_FAMILIES:
            raise ConfigError(f"unknown field family {fam!r} "
                              f"(registry: {FIELD_FAMILIES})")
    sigma = make_sigma(sf, d_x, d_b, d_state,
                       scale=_get(sec, "sigma_scale", float, 1.0),
                       offset=_get(sec, "sigma_offset", float, 0.0))
    bfield = make_drift(bf, d_y, d_state, d_x=d_x,
                        scale=_get(sec, "b_scale", float, 0.0),
                        offset=_get(sec, "b_offset", float, 0.0))
    law = sec.get("x0_law", "point")
    if law == "point":
        x0 = ("point", _get(sec, "x0_value", float, 0.0))
    elif law == "gaussian":
        x0 = ("gaussian", _get(sec, "x0_mean", float, 0.0),
              _get(sec, "x0_sd", float, 1.0))
    else:
        raise ConfigError(f"unknown x0 law {law!r}")
    grid_n = _get(sec, "grid_n", int, 128)
    if grid_n & (grid_n - 1):
        raise ConfigError("grid_n must be a power of two (dyadic studies)")
    try:
        return Scenario(kernel=kernel, d_B=d_b, d_Y=d_y, d_X=d_x, sigma=sigma,
                        b=bfield, x0_law=x0, T=_get(sec, "T", float, 1.0),
                        grid_n=grid_n,
                        inner_refine=_get(sec, "inner_refine", int, 8),
                        phi=_build_phi(sec))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(text: str) -> ExperimentConfig:
    sections = parse_config(text)
    scenario = build_scenario(sections["scenario"])
    run = sections["run"]
    parsed_run = {
        "seed": _get(run, "seed", int, 1),
        "n_mc": _get(run, "n_mc", int, 4000),
        "n_paths": _get(run, "n_paths", int, 100),
        "t_eval": _get(run, "t_eval", _floats, (scenario.T,)),
        "kappa": _get(run, "kappa", float, 0.5),
        "refine_levels": _get(run, "refine_levels", int, 3),
        "m_space": _get(run, "m_space", int, 257),
        "n_draws": _get(run, "n_draws", int, 5),
        "p": _get(run, "p", float, scenario.p_level[0]),
        "dims": _get(run, "dims", int, 2),
        "n_min": _get(run, "n_min", int, 5),
        "n_max": _get(run, "n_max", int, 8),
        "out_dir": run.get("out_dir", "out"),
    }
    return ExperimentConfig(scenario=scenario, run=parsed_run,
                            output=sections["output"], text=text)
