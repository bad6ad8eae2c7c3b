"""Run configuration: validated dataclass, YAML loading, reference presets.

The configuration is a nested key-value document (YAML).  Unknown keys and
malformed values raise ConfigError naming the offending field path, so batch
runs fail fast with actionable messages.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

from .errors import ConfigError

DEFAULT_PERIOD = 2.0 * math.pi


def _require(mapping, key, path, typ=None):
    if key not in mapping:
        raise ConfigError(f"missing required field '{path}.{key}'")
    val = mapping[key]
    if typ is not None and not isinstance(val, typ):
        raise ConfigError(
            f"field '{path}.{key}' has type {type(val).__name__}, expected "
            f"{typ.__name__ if isinstance(typ, type) else typ}"
        )
    return val


def _check_keys(mapping, allowed, path):
    extra = set(mapping) - set(allowed)
    if extra:
        raise ConfigError(
            f"unknown field(s) {sorted(extra)} in '{path}' "
            f"(allowed: {sorted(allowed)})"
        )


@dataclass(frozen=True)
class SignalSpec:
    """Harmonic description of a T-periodic scalar signal."""

    period: float
    harmonics: tuple  # ((k, re, im), ...)

    def build(self, grid_size=256):
        from .signals import make_signal

        return make_signal(
            self.period, [list(h) for h in self.harmonics], grid_size=grid_size
        )

    @staticmethod
    def parse(data, path, period=None):
        if not isinstance(data, dict):
            raise ConfigError(f"'{path}' must be a mapping")
        _check_keys(data, {"period", "harmonics"}, path)
        if period is None:
            period = _require(data, "period", path, (int, float))
        else:
            period = data.get("period", period)
        if not (isinstance(period, (int, float)) and period > 0):
            raise ConfigError(f"'{path}.period' must be a positive number")
        rows = _require(data, "harmonics", path, list)
        harm = []
        for i, row in enumerate(rows):
            if not (isinstance(row, (list, tuple)) and len(row) == 3):
                raise ConfigError(
                    f"'{path}.harmonics[{i}]' must be [k, re, im], got {row!r}"
                )
            k, re, im = row
            if not isinstance(k, int):
                raise ConfigError(f"'{path}.harmonics[{i}]' index must be an integer")
            harm.append((int(k), float(re), float(im)))
        return SignalSpec(float(period), tuple(harm))


@dataclass(frozen=True)
class ExternalForceSpec:
    box: tuple  # (x0, x1, y0, y1)
    direction: tuple  # (d1, d2)
    signal: SignalSpec

    @staticmethod
    def parse(data, path, period):
        _check_keys(data, {"box", "direction", "harmonics", "period"}, path)
        box = _require(data, "box", path, list)
        if len(box) != 4:
            raise ConfigError(f"'{path}.box' must be [x0, x1, y0, y1]")
        direction = _require(data, "direction", path, list)
        if len(direction) != 2:
            raise ConfigError(f"'{path}.direction' must be [d1, d2]")
        sig_data = {k: v for k, v in data.items() if k in ("period", "harmonics")}
        sig = SignalSpec.parse(sig_data, path, period=period)
        return ExternalForceSpec(
            tuple(float(v) for v in box), tuple(float(v) for v in direction), sig
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one end-to-end solve."""

    half_length: float = 6.0
    body: tuple = (-0.5, 0.5, -0.3, 0.3)
    params: object = None  # PhysicalParams
    flowrate: SignalSpec = field(
        default_factory=lambda: SignalSpec(DEFAULT_PERIOD, ((1, 0.0, -0.5),))
    )
    cutoff_inner: float = 0.15
    cutoff_outer: float = 0.6
    tilde_f: ExternalForceSpec | None = None
    tilde_g: SignalSpec | None = None
    n_modes: int = 8
    n_steps: int = 2048
    mesh_h: float = 1.0 / 32.0
    profile_nodes: int = 257
    damping: float = 0.7
    fixed_point_tol: float = 1e-9
    max_iter: int = 50
    alphas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    resonance_factors: tuple = (0.8, 1.0, 1.2)
    seed: int = 0
    warn_only: bool = False
    output_dir: str = "out"

    def __post_init__(self):
        if self.params is None:
            from .geometry import PhysicalParams

            object.__setattr__(self, "params", PhysicalParams())
        for name in ("fixed_point_tol", "mesh_h", "damping"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"'{name}' must be positive")
        if self.n_modes < 1 or self.n_steps < 2 or self.max_iter < 1:
            raise ConfigError("'n_modes', 'n_steps' and 'max_iter' must be >= 1")
        if self.profile_nodes < 3 or self.profile_nodes % 2 == 0:
            raise ConfigError("'profile_nodes' must be an odd number >= 3")

    # --- builders used by the solve pipeline -----------------------------
    def build_geometry(self):
        from .geometry import build_geometry

        return build_geometry(self.half_length, self.body)

    def build_flowrate(self):
        return self.flowrate.build()

    def build_cutoff(self):
        from .carrier import CutoffParams

        return CutoffParams(inner=self.cutoff_inner, outer=self.cutoff_outer)

    def build_external_forces(self):
        from .carrier import ExternalBodyForce

        tf = None
        if self.tilde_f is not None:
            tf = ExternalBodyForce(
                box=self.tilde_f.box,
                direction=self.tilde_f.direction,
                signal=self.tilde_f.signal.build(),
            )
        tg = self.tilde_g.build() if self.tilde_g is not None else None
        return tf, tg

    def with_period(self, period):
        """Clone with the flow-rate (and external-force) period replaced."""
        fr = SignalSpec(float(period), self.flowrate.harmonics)
        tf = self.tilde_f
        if tf is not None:
            tf = ExternalForceSpec(
                tf.box, tf.direction, SignalSpec(float(period), tf.signal.harmonics)
            )
        tg = self.tilde_g
        if tg is not None:
            tg = SignalSpec(float(period), tg.harmonics)
        import dataclasses

        return dataclasses.replace(self, flowrate=fr, tilde_f=tf, tilde_g=tg)

    # --- identity ---------------------------------------------------------
    def to_json_dict(self):
        d = asdict(self)
        d["params"] = {
            "rho": self.params.rho,
            "mu": self.params.mu,
            "mass": self.params.mass,
            "stiffness": self.params.stiffness,
        }
        return d

    def config_hash(self):
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_TOP_KEYS = {
    "geometry",
    "params",
    "flowrate",
    "cutoff",
    "forces",
    "solver",
    "output",
    "seed",
    "warn_only",
}


def parse_config(data):
    """Build a RunConfig from a parsed YAML/JSON mapping."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    _check_keys(data, _TOP_KEYS, "<root>")
    kwargs = {}

    geo = data.get("geometry", {})
    _check_keys(geo, {"half_length", "body"}, "geometry")
    if "half_length" in geo:
        kwargs["half_length"] = float(geo["half_length"])
    if "body" in geo:
        body = geo["body"]
        if not (isinstance(body, list) and len(body) == 4):
            raise ConfigError("'geometry.body' must be [x0, x1, y0, y1]")
        kwargs["body"] = tuple(float(v) for v in body)

    par = data.get("params", {})
    _check_keys(par, {"rho", "mu", "mass", "stiffness"}, "params")
    from .geometry import PhysicalParams

    try:
        kwargs["params"] = PhysicalParams(
            rho=float(par.get("rho", 1.0)),
            mu=float(par.get("mu", 1.0)),
            mass=float(par.get("mass", 1.0)),
            stiffness=float(par.get("stiffness", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid 'params': {exc}") from exc

    if "flowrate" in data:
        kwargs["flowrate"] = SignalSpec.parse(data["flowrate"], "flowrate")
    period = kwargs.get(
        "flowrate", RunConfig.__dataclass_fields__["flowrate"].default_factory()
    ).period

    cut = data.get("cutoff", {})
    _check_keys(cut, {"inner", "outer"}, "cutoff")
    if "inner" in cut:
        kwargs["cutoff_inner"] = float(cut["inner"])
    if "outer" in cut:
        kwargs["cutoff_outer"] = float(cut["outer"])

    forces = data.get("forces", {})
    _check_keys(forces, {"tilde_f", "tilde_g"}, "forces")
    if forces.get("tilde_f") is not None:
        kwargs["tilde_f"] = ExternalForceSpec.parse(
            forces["tilde_f"], "forces.tilde_f", period
        )
    if forces.get("tilde_g") is not None:
        kwargs["tilde_g"] = SignalSpec.parse(
            forces["tilde_g"], "forces.tilde_g", period=period
        )

    sol = data.get("solver", {})
    _check_keys(
        sol,
        {
            "n_modes",
            "n_steps",
            "mesh_h",
            "profile_nodes",
            "damping",
            "tol",
            "max_iter",
            "alphas",
            "resonance_factors",
        },
        "solver",
    )
    for src, dst, cast in (
        ("n_modes", "n_modes", int),
        ("n_steps", "n_steps", int),
        ("mesh_h", "mesh_h", float),
        ("profile_nodes", "profile_nodes", int),
        ("damping", "damping", float),
        ("tol", "fixed_point_tol", float),
        ("max_iter", "max_iter", int),
    ):
        if src in sol:
            try:
                kwargs[dst] = cast(sol[src])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid 'solver.{src}': {exc}") from exc
    if "alphas" in sol:
        kwargs["alphas"] = tuple(float(a) for a in sol["alphas"])
    if "resonance_factors" in sol:
        kwargs["resonance_factors"] = tuple(float(a) for a in sol["resonance_factors"])

    out = data.get("output", {})
    _check_keys(out, {"dir"}, "output")
    if "dir" in out:
        kwargs["output_dir"] = str(out["dir"])

    if "seed" in data:
        if not isinstance(data["seed"], int) or data["seed"] < 0:
            raise ConfigError("'seed' must be a non-negative integer")
        kwargs["seed"] = data["seed"]
    if "warn_only" in data:
        if not isinstance(data["warn_only"], bool):
            raise ConfigError("'warn_only' must be a boolean")
        kwargs["warn_only"] = data["warn_only"]

    return RunConfig(**kwargs)


def load_config(path):
    """Load a RunConfig from a YAML file."""
    import yaml

    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data or {})


def reference_config(**overrides):
    """The small-data reference setup used throughout the test suite."""
    base = dict(
        half_length=6.0,
        body=(-0.5, 0.5, -0.3, 0.3),
        flowrate=SignalSpec(DEFAULT_PERIOD, ((1, 0.0, -0.5),)),
        cutoff_inner=0.15,
        cutoff_outer=0.6,
        n_modes=8,
        n_steps=2048,
        mesh_h=1.0 / 32.0,
        profile_nodes=257,
    )
    base.update(overrides)
    return RunConfig(**base)
