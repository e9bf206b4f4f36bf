"""Warping profiles and the config-driven profile factory."""

from __future__ import annotations

from collections.abc import Mapping
from typing import Any

from warpbench.errors import ConfigError
from warpbench.profiles.analytic import Euclidean, Hyperbolic, Perturbed, Scaled, SmoothedCone
from warpbench.profiles.base import WarpingProfile
from warpbench.profiles.tabulated import Tabulated, fit_power_tail

__all__ = [
    "WarpingProfile",
    "Euclidean",
    "Hyperbolic",
    "SmoothedCone",
    "Perturbed",
    "Scaled",
    "Tabulated",
    "build_profile",
    "fit_power_tail",
]


def _float(section: Mapping[str, Any], key: str, default: float) -> float:
    raw = section.get(key, default)
    try:
        return float(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[manifold] {key} must be a number, got {raw!r}") from e


def build_profile(section: Mapping[str, Any], tail: Mapping[str, Any] | None = None) -> WarpingProfile:
    """Build a profile from a [manifold] mapping, applying any [tail] override."""
    kind = str(section.get("kind", "euclidean")).strip().lower()

    if kind == "euclidean":
        profile: WarpingProfile = Euclidean()
    elif kind == "hyperbolic":
        profile = Hyperbolic(kappa=_float(section, "kappa", 1.0))
    elif kind == "cone":
        profile = SmoothedCone(
            slope=_float(section, "slope", 0.5), smoothing=_float(section, "smoothing", 1.0)
        )
    elif kind == "perturbed":
        base_kind = str(section.get("base", "euclidean")).strip().lower()
        if base_kind == "perturbed":
            raise ConfigError("A perturbed profile cannot use a perturbed base")
        base = build_profile({**section, "kind": base_kind})
        profile = Perturbed(
            base,
            amplitude=_float(section, "amplitude", 0.1),
            width=_float(section, "width", 1.0),
        )
    elif kind == "tabulated":
        path = section.get("samples")
        if not path:
            raise ConfigError("A tabulated profile needs [manifold] samples = <csv path>")
        tail = tail or {}
        return Tabulated.from_csv(
            path,
            tail_exponent=float(tail["p"]) if "p" in tail else None,
            tail_coefficient=float(tail["c"]) if "c" in tail else None,
        )
    else:
        raise ConfigError(
            f"Unknown profile kind '{kind}'. Use euclidean/hyperbolic/cone/perturbed/tabulated."
        )

    if tail:
        profile = profile.with_tail(
            p=float(tail["p"]) if "p" in tail else None,
            c=float(tail["c"]) if "c" in tail else None,
        )
    return profile
