"""Run configuration: a YAML mapping validated into plain dataclasses.

Grammar (all keys optional except ``subcommand``)::

    subcommand: ode-liouville | ode-kvn | hje | schrodinger | resources
    problem: {name: <registry name>, params: {<key>: <number>}}
    method: fd | spectral-sim | splitting | nonunitary-split | spectral-qlsa-emulated
    order: lie | strang
    mesh: {M, dt, lam, omega_cells, kernel, eps, ell, horizon, steps}
    observables: [<name>, ...]
    sampling: {eps, confidence}
    resources: {d, eps, ell, alpha, observable, factors: {n_L, n_H, N_u0}, grid_d: [..], grid_eps: [..]}
    seed: 0
    output: <directory>
    plots: true
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ValidationError

SUBCOMMANDS = ("ode-liouville", "ode-kvn", "hje", "schrodinger", "resources")
METHODS = ("fd", "spectral-qlsa-emulated", "spectral-sim", "splitting", "nonunitary-split")
DEFAULT_METHOD = {"ode-liouville": "fd", "ode-kvn": "fd", "hje": "fd", "schrodinger": "splitting",
                  "resources": "fd"}
SUPPORTED = {
    "ode-liouville": ("fd", "nonunitary-split"),
    "ode-kvn": ("fd", "spectral-sim"),
    "hje": ("fd", "splitting"),
    "schrodinger": ("splitting",),
    "resources": ("fd",),
}
DEFAULT_OBSERVABLES = {"ode-liouville": ["mean"], "ode-kvn": ["mean"], "hje": ["density", "momentum"],
                       "schrodinger": ["density", "current", "energy"], "resources": []}


def _num(v, name, kind=float, allow_none=True, positive=False):
    if v is None:
        if allow_none:
            return None
        raise ValidationError("is required", name)
    if isinstance(v, bool):
        raise ValidationError(f"expected a number, got {v!r}", name)
    try:
        out = kind(v)
    except (TypeError, ValueError):
        raise ValidationError(f"expected {kind.__name__}, got {v!r}", name) from None
    if kind is int and out != v:
        raise ValidationError(f"expected an integer, got {v!r}", name)
    if positive and not out > 0:
        raise ValidationError(f"must be positive, got {v!r}", name)
    return out


def _reject_unknown(data: dict, allowed, where: str):
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key(s) {extra}; allowed: {sorted(allowed)}", where)


@dataclass
class MeshConfig:
    M: int | None = None
    dt: float | None = None
    lam: float | None = None
    omega_cells: int | None = None
    kernel: str = "hat"
    eps: float | None = None
    ell: float = 4.0
    horizon: float | None = None
    steps: int | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "MeshConfig":
        d = dict(d or {})
        _reject_unknown(d, [f.name for f in fields(cls)], "mesh")
        kernel = d.get("kernel", "hat")
        if kernel not in ("hat", "cosine"):
            raise ValidationError(f"unknown kernel {kernel!r}", "mesh.kernel")
        ell = _num(d.get("ell", 4.0), "mesh.ell")
        if not ell >= 1:
            raise ValidationError(f"must be >= 1, got {ell}", "mesh.ell")
        out = cls(
            M=_num(d.get("M"), "mesh.M", int, positive=True),
            dt=_num(d.get("dt"), "mesh.dt", positive=True),
            lam=_num(d.get("lam"), "mesh.lam", positive=True),
            omega_cells=_num(d.get("omega_cells"), "mesh.omega_cells", int, positive=True),
            kernel=kernel,
            eps=_num(d.get("eps"), "mesh.eps", positive=True),
            ell=ell,
            horizon=_num(d.get("horizon"), "mesh.horizon", positive=True),
            steps=_num(d.get("steps"), "mesh.steps", int, positive=True),
        )
        if out.M is not None and out.M & (out.M - 1):
            raise ValidationError(f"must be a power of two, got {out.M}", "mesh.M")
        if out.M is not None and out.eps is not None:
            raise ValidationError("give either an explicit M or a target eps, not both", "mesh")
        if out.eps is not None and not out.eps < 1:
            raise ValidationError(f"must lie in (0, 1), got {out.eps}", "mesh.eps")
        if out.dt is not None and out.lam is not None:
            raise ValidationError("give either dt or lam, not both", "mesh")
        return out


@dataclass
class SamplingConfig:
    eps: float = 0.05
    confidence: float = 0.9

    @classmethod
    def from_dict(cls, d: dict | None) -> "SamplingConfig | None":
        if d is None:
            return None
        _reject_unknown(d, ("eps", "confidence"), "sampling")
        eps = _num(d.get("eps", 0.05), "sampling.eps", positive=True)
        conf = _num(d.get("confidence", 0.9), "sampling.confidence", positive=True)
        if not conf < 1:
            raise ValidationError(f"must lie in (0, 1), got {conf}", "sampling.confidence")
        return cls(eps, conf)


@dataclass
class ResourcesConfig:
    d: int = 2
    eps: float = 0.1
    ell: float = 4.0
    alpha: float = 4.0
    observable: str = "density"
    factors: dict = field(default_factory=dict)
    grid_d: list = field(default_factory=lambda: [1, 2, 3])
    grid_eps: list = field(default_factory=lambda: [0.1, 0.01, 0.001, 0.0001])

    @classmethod
    def from_dict(cls, d: dict | None) -> "ResourcesConfig":
        d = dict(d or {})
        _reject_unknown(d, [f.name for f in fields(cls)], "resources")
        base = cls()
        factors = d.get("factors", {}) or {}
        if not isinstance(factors, dict):
            raise ValidationError("expected a mapping", "resources.factors")
        _reject_unknown(factors, ("n_L", "n_H", "N_u0"), "resources.factors")
        obs = d.get("observable", base.observable)
        if obs not in ("density", "current", "energy"):
            raise ValidationError(f"unknown observable {obs!r}", "resources.observable")
        grid_d = d.get("grid_d", base.grid_d)
        grid_eps = d.get("grid_eps", base.grid_eps)
        if not isinstance(grid_d, list) or not isinstance(grid_eps, list):
            raise ValidationError("grid_d and grid_eps must be lists", "resources")
        return cls(
            d=_num(d.get("d", base.d), "resources.d", int, positive=True),
            eps=_num(d.get("eps", base.eps), "resources.eps", positive=True),
            ell=_num(d.get("ell", base.ell), "resources.ell"),
            alpha=_num(d.get("alpha", base.alpha), "resources.alpha"),
            observable=obs,
            factors={k: _num(v, f"resources.factors.{k}") for k, v in factors.items()},
            grid_d=[_num(v, "resources.grid_d", int, positive=True) for v in grid_d],
            grid_eps=[_num(v, "resources.grid_eps", positive=True) for v in grid_eps],
        )


@dataclass
class RunConfig:
    subcommand: str
    problem: str | None = None
    params: dict = field(default_factory=dict)
    method: str = "fd"
    order: str = "lie"
    mesh: MeshConfig = field(default_factory=MeshConfig)
    observables: list = field(default_factory=list)
    sampling: SamplingConfig | None = None
    resources: ResourcesConfig = field(default_factory=ResourcesConfig)
    seed: int = 0
    output: str | None = None
    plots: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("config must be a mapping", "config")
        _reject_unknown(data, [f.name for f in fields(cls)], "config")
        sub = data.get("subcommand")
        if sub not in SUBCOMMANDS:
            raise ValidationError(f"expected one of {list(SUBCOMMANDS)}, got {sub!r}", "subcommand")
        method = data.get("method", DEFAULT_METHOD[sub])
        if method not in METHODS:
            raise ValidationError(f"expected one of {list(METHODS)}, got {method!r}", "method")
        if method not in SUPPORTED[sub]:
            raise ValidationError(f"{method!r} is not available for {sub}; choose from {list(SUPPORTED[sub])}",
                                  "method")
        order = data.get("order", "lie")
        if order not in ("lie", "strang"):
            raise ValidationError(f"expected lie or strang, got {order!r}", "order")
        prob = data.get("problem")
        params = {}
        if isinstance(prob, dict):
            _reject_unknown(prob, ("name", "params"), "problem")
            params = dict(prob.get("params") or {})
            prob = prob.get("name")
        if sub != "resources" and not isinstance(prob, str):
            raise ValidationError("a named problem is required", "problem.name")
        for k, v in params.items():
            _num(v, f"problem.params.{k}")
        obs = data.get("observables", list(DEFAULT_OBSERVABLES[sub]))
        if not isinstance(obs, list) or not all(isinstance(o, str) for o in obs):
            raise ValidationError("expected a list of observable names", "observables")
        plots = data.get("plots", True)
        if not isinstance(plots, bool):
            raise ValidationError(f"expected true or false, got {plots!r}", "plots")
        output = data.get("output")
        if output is not None and not isinstance(output, str):
            raise ValidationError("expected a path string", "output")
        return cls(
            subcommand=sub,
            problem=prob,
            params=params,
            method=method,
            order=order,
            mesh=MeshConfig.from_dict(data.get("mesh")),
            observables=list(obs),
            sampling=SamplingConfig.from_dict(data.get("sampling")),
            resources=ResourcesConfig.from_dict(data.get("resources")),
            seed=_num(data.get("seed", 0), "seed", int),
            output=output,
            plots=plots,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["problem"] = {"name": self.problem, "params": dict(self.params)}
        del out["params"]
        return out


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", "config") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed YAML: {exc}", "config") from None
    return RunConfig.from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
