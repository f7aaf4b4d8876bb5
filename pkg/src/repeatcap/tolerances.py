"""Numeric tolerances shared by every routine, with environment overrides."""

import os
from dataclasses import dataclass, fields, replace

ENV_PREFIX = "REPEATCAP_TOL_"


@dataclass(frozen=True)
class Tolerances:
    """Tail-truncation, quadrature, maximizer and feasibility tolerances."""

    tail_rel: float = 1e-12
    quad_abs: float = 1e-11
    q_tol: float = 1e-8
    kkt_tol: float = 1e-8

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise ValueError(f"tolerance {f.name} must be positive, got {v}")

    @classmethod
    def from_env(cls, environ=None, **overrides):
        """Defaults, then ``REPEATCAP_TOL_*`` variables, then explicit overrides."""
        environ = os.environ if environ is None else environ
        vals = {}
        for f in fields(cls):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                vals[f.name] = float(raw)
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**vals)

    def with_(self, **kw):
        return replace(self, **kw)


DEFAULT = Tolerances()
