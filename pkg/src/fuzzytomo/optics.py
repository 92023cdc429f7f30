"""Birefringent wave plates: dispersion curves, geometry and Jones unitaries.

All wavelengths are in micrometers, angles in radians. The plate unitary
follows the convention

    U(delta, alpha) = [[cos d - i sin d cos 2a,  -i sin d sin 2a],
                       [-i sin d sin 2a,          cos d + i sin d cos 2a]]

with delta = pi * h * |n_e - n_o| / lambda the optical thickness and alpha
the angle between the vertical and the fast axis. det U = 1 identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .states import Operator

#: dispersion-equation forms keyed by form_id; each maps (coefficients, lambda) -> n
_FORMS = {
    # n^2 = A + B l^2/(l^2 - C) + D l^2/(l^2 - E), l in um (two-pole Sellmeier-like fit)
    "two_pole": lambda c, l: np.sqrt(
        c[0] + c[1] * l**2 / (l**2 - c[2]) + c[3] * l**2 / (l**2 - c[4])
    ),
}


@dataclass(frozen=True, eq=False)
class DispersionModel:
    """Ordinary/extraordinary index curves of a birefringent crystal."""

    name: str
    form_id: str
    coefficients_o: tuple
    coefficients_e: tuple
    range_um: tuple

    def __post_init__(self):
        if self.form_id not in _FORMS:
            raise ValueError(f"unknown dispersion form {self.form_id!r}")
        object.__setattr__(self, "coefficients_o", tuple(float(x) for x in self.coefficients_o))
        object.__setattr__(self, "coefficients_e", tuple(float(x) for x in self.coefficients_e))
        lo, hi = self.range_um
        object.__setattr__(self, "range_um", (float(lo), float(hi)))

    def _check_range(self, lam):
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.range_um
        if np.any(lam < lo) or np.any(lam > hi):
            raise ValueError(
                f"wavelength {lam} um outside validity range [{lo}, {hi}] of {self.name!r}"
            )
        return lam

    def n_o(self, lam):
        lam = self._check_range(lam)
        return _FORMS[self.form_id](self.coefficients_o, lam)

    def n_e(self, lam):
        lam = self._check_range(lam)
        return _FORMS[self.form_id](self.coefficients_e, lam)


def birefringence(model: DispersionModel, lam):
    """|n_e - n_o| at wavelength lam (um)."""
    return np.abs(model.n_e(lam) - model.n_o(lam))


def load_dispersion(path) -> DispersionModel:
    """Load a dispersion model from its JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return DispersionModel(
        name=doc["name"],
        form_id=doc["form_id"],
        coefficients_o=tuple(doc["coefficients_o"]),
        coefficients_e=tuple(doc["coefficients_e"]),
        range_um=tuple(doc["range_um"]),
    )


def save_dispersion(model: DispersionModel, path) -> None:
    """Write a dispersion model back to JSON (floats round-trip exactly via repr)."""
    doc = {
        "name": model.name,
        "form_id": model.form_id,
        "coefficients_o": list(model.coefficients_o),
        "coefficients_e": list(model.coefficients_e),
        "range_um": list(model.range_um),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def quartz() -> DispersionModel:
    """Bundled alpha-quartz model (Ghosh 1999 coefficient fit)."""
    ref = resources.files("fuzzytomo.data").joinpath("quartz_ghosh1999.json")
    with resources.as_file(ref) as path:
        return load_dispersion(path)


_ORDER_FRACTION = {"half": 0.5, "quarter": 0.25}


def plate_thickness(kind: str, order: int, lambda0: float, model: DispersionModel) -> float:
    """Geometric thickness (um) giving the design retardance at lambda0.

    h = (k + 1/2) lambda0 / dn for a half-wave plate, (k + 1/4) for quarter-wave.
    """
    if kind not in _ORDER_FRACTION:
        raise ValueError(f"kind must be 'half' or 'quarter', got {kind!r}")
    if order < 0:
        raise ValueError("order must be >= 0")
    return (order + _ORDER_FRACTION[kind]) * lambda0 / float(birefringence(model, lambda0))


def optical_thickness(h: float, lam, model: DispersionModel):
    """Retardance delta = pi h |n_e - n_o| / lambda in radians."""
    if h <= 0:
        raise ValueError("thickness must be positive")
    lam = np.asarray(lam, dtype=float)
    return np.pi * h * birefringence(model, lam) / lam


@dataclass(frozen=True, eq=False)
class WavePlateSpec:
    """Physical plate: kind, order, thickness and the dispersion it obeys."""

    kind: str
    order: int
    design_wavelength: float
    dispersion: DispersionModel
    thickness: float = None

    def __post_init__(self):
        if self.thickness is None:
            h = plate_thickness(self.kind, self.order, self.design_wavelength, self.dispersion)
            object.__setattr__(self, "thickness", h)

    def retardance(self, lam):
        return optical_thickness(self.thickness, lam, self.dispersion)


@dataclass(frozen=True, eq=False)
class WavePlateSetting:
    """A plate together with its fast-axis angle, stored in (-pi/2, pi/2]."""

    plate: WavePlateSpec
    angle: float

    def __post_init__(self):
        a = (self.angle + np.pi / 2) % np.pi - np.pi / 2
        if a <= -np.pi / 2 + 1e-15:
            a += np.pi
        object.__setattr__(self, "angle", float(a))


def waveplate_matrices(delta, alpha) -> np.ndarray:
    """Batched plate unitaries; broadcasts delta against alpha, returns (..., 2, 2)."""
    delta = np.asarray(delta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    c, s = np.cos(delta), np.sin(delta)
    c2, s2 = np.cos(2 * alpha), np.sin(2 * alpha)
    shape = np.broadcast(delta, alpha).shape
    U = np.empty(shape + (2, 2), dtype=complex)
    U[..., 0, 0] = c - 1j * s * c2
    U[..., 0, 1] = -1j * s * s2
    U[..., 1, 0] = -1j * s * s2
    U[..., 1, 1] = c + 1j * s * c2
    return U


def waveplate_unitary(delta: float, alpha: float) -> Operator:
    """Single plate unitary as an Operator."""
    return Operator(waveplate_matrices(float(delta), float(alpha)))


def basis_unitary(hwp: WavePlateSetting, qwp: WavePlateSetting, lam: float) -> Operator:
    """Composite QWP(delta2, beta) * HWP(delta1, alpha) at wavelength lam.

    The half-wave plate is traversed first (rightmost factor).
    """
    d1 = hwp.plate.retardance(lam)
    d2 = qwp.plate.retardance(lam)
    return Operator(
        waveplate_matrices(d2, qwp.angle) @ waveplate_matrices(d1, hwp.angle)
    )


def idler_wavelength(lambda_s: float, lambda_p: float) -> float:
    """Idler wavelength fixed by energy conservation, 1/l_p = 1/l_s + 1/l_i."""
    if lambda_p <= 0 or lambda_s <= lambda_p:
        raise ValueError("need lambda_s > lambda_p > 0")
    return lambda_s * lambda_p / (lambda_s - lambda_p)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Discretized signal spectrum: points lambda_k with weights P(lambda_k)."""

    center: float
    width: float
    pump: float
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.shape != wts.shape or pts.ndim != 1:
            raise ValueError("points and weights must be matching 1-d arrays")
        if np.any(wts < 0) or abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        half = self.width / 2 + 1e-15
        if np.any(np.abs(pts - self.center) > half):
            raise ValueError("spectral points outside the stated band")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def monochromatic(self) -> bool:
        return self.points.size == 1 and self.width == 0.0

    def idler_points(self) -> np.ndarray:
        return np.array([idler_wavelength(l, self.pump) for l in self.points])


def spectral_grid(center: float, width: float, pump: float, n_points: int = 64) -> SpectralGrid:
    """Uniform spectrum over [center - width/2, center + width/2], midpoint sampled."""
    if width < 0:
        raise ValueError("width must be >= 0")
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if width == 0:
        if n_points != 1:
            raise ValueError("width 0 requires n_points = 1")
        pts, wts = np.array([center]), np.array([1.0])
    else:
        edges = np.linspace(center - width / 2, center + width / 2, n_points + 1)
        pts = 0.5 * (edges[:-1] + edges[1:])
        wts = np.full(n_points, 1.0 / n_points)
    return SpectralGrid(center=center, width=width, pump=pump, points=pts, weights=wts)
