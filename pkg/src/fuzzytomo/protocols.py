"""Tomography protocols: polyhedral direction sets, plate angles, ideal and fuzzy POVMs.

A measurement basis is one antipodal pair of Bloch directions +-n realized by a
half-wave plate at angle alpha followed by a quarter-wave plate at angle beta in
front of a polarizing beam splitter; the two PBS ports are the two outcomes.

Protocol geometry: measurement directions sit at the face normals of a regular
solid. The cube contributes 3 mutually orthogonal bases, the octahedron 4 bases
with mutual Bloch overlaps +-1/3. Each solid stands on a vertex: the cube's
triad lies on the magic-angle cone about the circular (sigma_y) pole at
azimuths {30, 150, 270} degrees, the octahedron's tetrad on the cone about the
V/H (sigma_z) pole at azimuths {0, 90, 180, 270} degrees. The orientation does
not affect monochromatic statistics but fixes the strength of the chromatic
blur; these orientations reproduce the reference loss statistics.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .optics import (
    DispersionModel,
    SpectralGrid,
    WavePlateSpec,
    idler_wavelength,
    quartz,
    spectral_grid,
    waveplate_matrices,
)

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_P_V = np.array([[1, 0], [0, 0]], dtype=complex)

OUTCOMES = {2: ("V", "H"), 4: ("VV", "VH", "HV", "HH")}

_MAGIC_COS = 1.0 / np.sqrt(3.0)
_MAGIC_SIN = np.sqrt(2.0 / 3.0)


def bloch_projector(direction) -> np.ndarray:
    """(I + n.sigma)/2 for a unit Bloch vector n."""
    n = np.asarray(direction, dtype=float)
    return 0.5 * (
        np.eye(2, dtype=complex) + n[0] * SIGMA["x"] + n[1] * SIGMA["y"] + n[2] * SIGMA["z"]
    )


def protocol_directions(symmetry: str) -> list[np.ndarray]:
    """Unit Bloch directions, one representative per measurement basis."""
    if symmetry == "cube":
        azimuths = np.pi / 6 + 2 * np.pi * np.arange(3) / 3
        return [
            np.array([_MAGIC_SIN * np.cos(p), _MAGIC_COS, _MAGIC_SIN * np.sin(p)])
            for p in azimuths
        ]
    if symmetry == "octahedron":
        azimuths = 2 * np.pi * np.arange(4) / 4
        return [
            np.array([_MAGIC_SIN * np.cos(p), _MAGIC_SIN * np.sin(p), _MAGIC_COS])
            for p in azimuths
        ]
    raise ValueError(f"symmetry must be 'cube' or 'octahedron', got {symmetry!r}")


@dataclass(frozen=True, eq=False)
class Arm:
    """One measurement channel: half-wave plate then quarter-wave plate."""

    hwp: WavePlateSpec
    qwp: WavePlateSpec

    @property
    def design_wavelength(self) -> float:
        return self.hwp.design_wavelength

    def unitaries(self, lams, alpha: float, beta: float) -> np.ndarray:
        """Composite QWP*HWP matrices at wavelengths lams, shape (..., 2, 2)."""
        lams = np.asarray(lams, dtype=float)
        d1 = self.hwp.retardance(lams)
        d2 = self.qwp.retardance(lams)
        return waveplate_matrices(d2, beta) @ waveplate_matrices(d1, alpha)


def make_arm(
    lambda0: float, order: int = 5, model: DispersionModel | None = None
) -> Arm:
    """Arm with half- and quarter-wave plates of the given order at lambda0."""
    model = model if model is not None else quartz()
    return Arm(
        hwp=WavePlateSpec("half", order, lambda0, model),
        qwp=WavePlateSpec("quarter", order, lambda0, model),
    )


def _wrap_angle(a: float) -> float:
    w = (a + np.pi / 2) % np.pi - np.pi / 2
    if w <= -np.pi / 2 + 1e-12:
        w += np.pi
    return float(w)


def _rotated_projector(arm: Arm, alpha: float, beta: float, lam: float) -> np.ndarray:
    U = arm.unitaries(lam, alpha, beta)
    return U.conj().T @ _P_V @ U


def _geometric_candidates(direction) -> list[tuple[float, float]]:
    """Closed-form (alpha, beta) candidates for exact half/quarter retardances.

    The QWP conjugation moves the V pole to q(beta) = (cs, s, c^2) with
    c = cos 2beta, s = sin 2beta; the HWP then reflects q through an axis in
    the x-z Bloch plane set by alpha. Solving the reflection for a target n
    forces sin 2beta = -n_y and leaves at most two alpha values per beta
    branch; when q = -n any alpha works (continuum) and 0 is used.
    """
    n = np.asarray(direction, dtype=float)
    s = float(np.clip(-n[1], -1.0, 1.0))
    base = np.arcsin(s)
    branches = {base} if abs(abs(s) - 1.0) < 1e-14 else {base, np.pi - base}
    cands = []
    for two_beta in branches:
        c = np.cos(two_beta)
        q = np.array([c * s, s, c * c])
        m = n + q
        if np.linalg.norm(m) < 1e-9:
            alphas = [0.0]
        else:
            m = m / np.linalg.norm(m)
            two_alpha = np.arctan2(m[0], m[2])
            alphas = [two_alpha / 2, two_alpha / 2 + np.pi / 2]
        for a in alphas:
            cands.append((_wrap_angle(a), _wrap_angle(two_beta / 2)))
    return cands


ANGLE_MATCH_TOL = 1e-8


def angles_for_direction(direction, arm: Arm, lambda0: float | None = None) -> tuple[float, float]:
    """Plate angles whose rotated V projector equals (I + n.sigma)/2 at lambda0.

    Among all solutions in (-pi/2, pi/2]^2 the one with the smallest
    |alpha| + |beta| is returned, ties broken by the smaller alpha.
    """
    lam0 = arm.design_wavelength if lambda0 is None else lambda0
    target = bloch_projector(direction)

    def residual(x):
        diff = _rotated_projector(arm, x[0], x[1], lam0) - target
        return np.concatenate([diff.real.ravel(), diff.imag.ravel()])

    verified = []

    def consider(a, b):
        a, b = _wrap_angle(a), _wrap_angle(b)
        if np.linalg.norm(residual([a, b])) <= ANGLE_MATCH_TOL:
            if not any(abs(a - a2) < 1e-7 and abs(b - b2) < 1e-7 for a2, b2 in verified):
                verified.append((a, b))

    for a, b in _geometric_candidates(direction):
        consider(a, b)
    if not verified:
        # custom retardances: fall back to multi-start root polishing
        grid = np.linspace(-np.pi / 2 + 0.05, np.pi / 2, 12)
        for a0 in grid:
            for b0 in grid:
                sol = least_squares(residual, [a0, b0], xtol=3e-16, ftol=3e-16, gtol=3e-16)
                if np.sum(sol.fun**2) <= ANGLE_MATCH_TOL**2:
                    consider(sol.x[0], sol.x[1])
    if not verified:
        raise RuntimeError(f"no plate angles found for direction {np.asarray(direction)}")
    verified.sort(key=lambda ab: (round(abs(ab[0]) + abs(ab[1]), 10), ab[0]))
    return verified[0]


@dataclass(frozen=True, eq=False)
class ProtocolSetting:
    """Plate angles per arm for one measurement setting."""

    label: str
    angles: tuple  # ((alpha, beta),) or ((alpha, beta), (gamma, theta))

    def __post_init__(self):
        wrapped = tuple(tuple(_wrap_angle(a) for a in pair) for pair in self.angles)
        object.__setattr__(self, "angles", wrapped)


@dataclass(frozen=True, eq=False)
class POVMElement:
    """Hermitian measurement operator with its outcome label."""

    matrix: np.ndarray
    label: str

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if np.max(np.abs(mat - mat.conj().T)) > 1e-12:
            raise ValueError(f"POVM element {self.label!r} is not Hermitian")
        eig = np.linalg.eigvalsh(mat)
        if eig.min() < -1e-10 or eig.max() > 1 + 1e-10:
            raise ValueError(f"POVM element {self.label!r} has eigenvalues outside [0, 1]")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)


def _element_set(matrices: np.ndarray, dim: int) -> list[POVMElement]:
    labels = OUTCOMES[dim]
    total = matrices.sum(axis=0)
    if np.max(np.abs(total - np.eye(dim))) > 1e-10:
        raise ValueError("operator set does not sum to the identity")
    return [POVMElement(matrices[j], labels[j]) for j in range(len(labels))]


def _arm_settings(setting: ProtocolSetting, arms: tuple) -> list[tuple[Arm, float, float]]:
    if len(setting.angles) != len(arms):
        raise ValueError("setting has a different number of arms than the apparatus")
    return [(arm, a, b) for arm, (a, b) in zip(arms, setting.angles)]


def _outcome_matrices(unitaries: np.ndarray, weights: np.ndarray, dim: int) -> np.ndarray:
    """sum_k w_k U_k^dag P_j U_k for each basis outcome j, from stacked U_k."""
    mats = np.empty((dim, dim, dim), dtype=complex)
    for j in range(dim):
        rows = unitaries[:, j, :]  # U_k^dag e_j = conj of the j-th row
        mats[j] = np.einsum("k,ka,kb->ab", weights, rows.conj(), rows)
    return mats


def ideal_projectors(
    setting: ProtocolSetting, arms: tuple, lambda0: float | None, dim: int
) -> list[POVMElement]:
    """Rank-1 projectors U^dag P_j U, each arm evaluated at its design point.

    lambda0 overrides the signal arm's wavelength; the idler arm always sits
    at its own design wavelength (the idler band center).
    """
    parts = _arm_settings(setting, arms)
    U = np.eye(1, dtype=complex)
    for idx, (arm, alpha, beta) in enumerate(parts):
        lam = arm.design_wavelength if (lambda0 is None or idx > 0) else lambda0
        U = np.kron(U, arm.unitaries(lam, alpha, beta))
    mats = _outcome_matrices(U[np.newaxis], np.array([1.0]), dim)
    return _element_set(mats, dim)


def fuzzy_povm(
    setting: ProtocolSetting, arms: tuple, spectral: SpectralGrid, dim: int
) -> list[POVMElement]:
    """Spectrum-averaged operators Lambda_j = sum_k U_k^dag P_j U_k P(lambda_k).

    The signal arm is evaluated on the grid points, the idler arm at the
    energy-conservation partner wavelength of each point.
    """
    parts = _arm_settings(setting, arms)
    lam_s = spectral.points
    stacks = []
    for idx, (arm, alpha, beta) in enumerate(parts):
        lams = lam_s if idx == 0 else spectral.idler_points()
        stacks.append(arm.unitaries(lams, alpha, beta))
    U = stacks[0]
    if len(stacks) == 2:
        K = U.shape[0]
        U = np.einsum("kab,kcd->kacbd", stacks[0], stacks[1]).reshape(K, 4, 4)
    mats = _outcome_matrices(U, spectral.weights, dim)
    return _element_set(mats, dim)


@dataclass(frozen=True, eq=False)
class MeasurementProtocol:
    """Full protocol: settings with their ideal and fuzzy operator sets."""

    dim: int
    symmetry: str
    settings: tuple
    arms: tuple
    spectral: SpectralGrid
    lambda0: float
    directions: tuple
    ideal: tuple = field(repr=False)   # tuple of lists of POVMElement
    fuzzy: tuple = field(repr=False)

    @property
    def n_settings(self) -> int:
        return len(self.settings)

    @property
    def n_outcomes(self) -> int:
        return self.dim

    def operator_stack(self, model: str) -> np.ndarray:
        """Operators as an array (n_settings, n_outcomes, dim, dim)."""
        source = {"standard": self.ideal, "fuzzy": self.fuzzy}[model]
        return np.array([[el.matrix for el in setting] for setting in source])

    def is_informationally_complete(self) -> bool:
        ops = self.operator_stack("standard").reshape(-1, self.dim * self.dim)
        gram = ops @ ops.conj().T
        return np.linalg.matrix_rank(gram, tol=1e-10) == self.dim**2


def build_protocol(
    symmetry: str,
    dim: int,
    arms: tuple | None = None,
    spectral: SpectralGrid | None = None,
    lambda0: float = 0.65,
    pump: float = 0.325,
    order: int = 5,
    model: DispersionModel | None = None,
) -> MeasurementProtocol:
    """Assemble a cube or octahedron protocol for one or two qubits.

    Two-qubit settings are the Cartesian product of the per-arm settings
    (3*3 = 9 for the cube, 4*4 = 16 for the octahedron). Both the ideal
    projector sets and the fuzzy operator sets are attached per setting.
    """
    if dim not in (2, 4):
        raise ValueError("dim must be 2 or 4")
    if arms is None:
        model = model if model is not None else quartz()
        signal = make_arm(lambda0, order, model)
        if dim == 4:
            idler = make_arm(idler_wavelength(lambda0, pump), order, model)
            arms = (signal, idler)
        else:
            arms = (signal,)
    if len(arms) != (2 if dim == 4 else 1):
        raise ValueError("apparatus arm count does not match dim")
    if spectral is None:
        spectral = spectral_grid(lambda0, 0.0, pump, 1)

    dirs = protocol_directions(symmetry)
    tag = symmetry[0].upper()
    arm_angles = []
    for arm in arms:
        arm_angles.append([angles_for_direction(d, arm) for d in dirs])

    settings = []
    if dim == 2:
        for i, ab in enumerate(arm_angles[0]):
            settings.append(ProtocolSetting(label=f"{tag}{i + 1}", angles=(ab,)))
    else:
        for i, ab in enumerate(arm_angles[0]):
            for j, gt in enumerate(arm_angles[1]):
                settings.append(
                    ProtocolSetting(label=f"{tag}{i + 1}*{tag}{j + 1}", angles=(ab, gt))
                )

    ideal = tuple(ideal_projectors(s, arms, lambda0, dim) for s in settings)
    fuzzy = tuple(fuzzy_povm(s, arms, spectral, dim) for s in settings)
    proto = MeasurementProtocol(
        dim=dim,
        symmetry=symmetry,
        settings=tuple(settings),
        arms=tuple(arms),
        spectral=spectral,
        lambda0=lambda0,
        directions=tuple(dirs),
        ideal=ideal,
        fuzzy=fuzzy,
    )
    if not proto.is_informationally_complete():
        raise ValueError("constructed protocol is not informationally complete")
    return proto


def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def protocol_to_json(protocol: MeasurementProtocol) -> str:
    """Serialize a protocol: angles at 12 significant digits, matrices as [re, im]."""
    doc = {
        "dim": protocol.dim,
        "symmetry": protocol.symmetry,
        "lambda0_um": float(protocol.lambda0),
        "apparatus": [
            {
                "hwp": {"kind": a.hwp.kind, "order": a.hwp.order,
                        "design_wavelength_um": a.hwp.design_wavelength,
                        "thickness_um": a.hwp.thickness,
                        "dispersion": a.hwp.dispersion.name},
                "qwp": {"kind": a.qwp.kind, "order": a.qwp.order,
                        "design_wavelength_um": a.qwp.design_wavelength,
                        "thickness_um": a.qwp.thickness,
                        "dispersion": a.qwp.dispersion.name},
            }
            for a in protocol.arms
        ],
        "spectral": {
            "center_um": protocol.spectral.center,
            "width_um": protocol.spectral.width,
            "pump_um": protocol.spectral.pump,
            "points_um": list(map(float, protocol.spectral.points)),
            "weights": list(map(float, protocol.spectral.weights)),
        },
        "settings": [
            {
                "label": s.label,
                "angles_rad": [[float(f"{a:.12g}") for a in pair] for pair in s.angles],
                "ideal": [_matrix_to_json(el.matrix) for el in protocol.ideal[i]],
                "fuzzy": [_matrix_to_json(el.matrix) for el in protocol.fuzzy[i]],
                "outcomes": list(OUTCOMES[protocol.dim]),
            }
            for i, s in enumerate(protocol.settings)
        ],
    }
    return json.dumps(doc, indent=2)


def protocol_operators_from_json(text: str) -> dict:
    """Parse a serialized protocol back into labelled operator stacks."""
    doc = json.loads(text)
    out = {
        "dim": doc["dim"],
        "symmetry": doc["symmetry"],
        "labels": [s["label"] for s in doc["settings"]],
        "angles": [s["angles_rad"] for s in doc["settings"]],
        "ideal": np.array([[_matrix_from_json(m) for m in s["ideal"]] for s in doc["settings"]]),
        "fuzzy": np.array([[_matrix_from_json(m) for m in s["fuzzy"]] for s in doc["settings"]]),
    }
    return out


def protocol_digest(protocol: MeasurementProtocol) -> str:
    """SHA-256 over the canonical JSON serialization."""
    return hashlib.sha256(protocol_to_json(protocol).encode("utf-8")).hexdigest()
