"""Vehicle and tire parameters, plus the key=value parameter file format.

All quantities are SI. The defaults below describe a mid-size front-wheel
drive passenger car and are the reference configuration shipped with the
package (see configs/vehicle.cfg); they can be overridden per run through a
parameter file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


@dataclass
class TireCoeffs:
    """Coefficients of the simplified combined-slip magic-formula tire.

    b_*/c_*/e_* are the stiffness, shape and curvature factors of the pure
    longitudinal (x) and lateral (y) force curves. gx_alpha and gy_tau set
    how strongly lateral slip weakens longitudinal force and vice versa
    (cosine weighting slopes).
    """

    b_x: float = 10.0
    c_x: float = 1.9
    e_x: float = 0.97
    b_y: float = 8.5
    c_y: float = 1.3
    e_y: float = -1.0
    gx_alpha: float = 8.0
    gy_tau: float = 6.0


@dataclass
class VehicleParams:
    """Physical parameters of the double-track vehicle model.

    mass        total vehicle mass [kg]
    i_x/i_y/i_z body inertia about roll/pitch/yaw axes [kg m^2]
    i_r         spin inertia of one wheel [kg m^2]
    l_f/l_r     CoG to front/rear axle distance [m]
    l_w         half track width [m]
    h_cg        CoG height [m]
    r_eff       effective wheel radius [m]
    k_s/d_s     suspension stiffness [N/m] and damping [N s/m] per corner
    rho_air     air mass density [kg/m^3]
    c_drag      aerodynamic drag coefficient [-]
    frontal_area  frontal area [m^2]
    mu          road friction coefficient [-]
    g           gravity [m/s^2]
    """

    mass: float = 1500.0
    i_x: float = 550.0
    i_y: float = 2000.0
    i_z: float = 2500.0
    i_r: float = 1.2
    l_f: float = 1.2
    l_r: float = 1.4
    l_w: float = 0.8
    h_cg: float = 0.5
    r_eff: float = 0.3
    k_s: float = 30000.0
    d_s: float = 3000.0
    rho_air: float = 1.225
    c_drag: float = 0.3
    frontal_area: float = 2.2
    mu: float = 1.0
    g: float = 9.81
    tire: TireCoeffs = field(default_factory=TireCoeffs)

    def __post_init__(self):
        positive = (
            "mass", "i_x", "i_y", "i_z", "i_r", "l_f", "l_r", "l_w",
            "h_cg", "r_eff", "k_s", "d_s", "g",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"parameter {name} must be strictly positive")
        if not 0.0 < self.mu <= 2.0:
            raise ConfigError("mu must lie in (0, 2]")
        if self.l_f + self.l_r <= 0.0:
            raise ConfigError("wheelbase l_f + l_r must be positive")

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    @property
    def fz_static_front(self) -> float:
        """Static normal load on one front wheel [N]."""
        return self.mass * self.g * self.l_r / (2.0 * self.wheelbase)

    @property
    def fz_static_rear(self) -> float:
        """Static normal load on one rear wheel [N]."""
        return self.mass * self.g * self.l_f / (2.0 * self.wheelbase)


_TIRE_PREFIX = "tire_"


def _flat_items(params: VehicleParams):
    for f in fields(VehicleParams):
        if f.name == "tire":
            continue
        yield f.name, getattr(params, f.name)
    for f in fields(TireCoeffs):
        yield _TIRE_PREFIX + f.name, getattr(params.tire, f.name)


def params_to_text(params: VehicleParams) -> str:
    """Serialize to the flat key=value file format (one parameter per line)."""
    lines = ["# vehicle parameters (SI units)"]
    lines += [f"{key}={value!r}" for key, value in _flat_items(params)]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> VehicleParams:
    """Parse a key=value parameter file. Unknown keys are rejected."""
    known = {key for key, _ in _flat_items(VehicleParams())}
    plain: dict[str, float] = {}
    tire: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown parameter {key!r}")
        try:
            num = float(value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad number for {key!r}") from exc
        if key.startswith(_TIRE_PREFIX):
            tire[key[len(_TIRE_PREFIX):]] = num
        else:
            plain[key] = num
    return VehicleParams(tire=TireCoeffs(**tire), **plain)


def load_params(path: str | None) -> VehicleParams:
    if path is None:
        return VehicleParams()
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_text(fh.read())


def params_hash(params: VehicleParams) -> bytes:
    """SHA-256 over the canonical serialization; identifies a configuration."""
    canon = "".join(f"{k}={v!r}\n" for k, v in sorted(_flat_items(params)))
    return hashlib.sha256(canon.encode("ascii")).digest()
