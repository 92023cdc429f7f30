"""Information matrices, loss/efficiency statistics and Monte Carlo campaigns.

A campaign draws Haar-random true states, simulates counts under the data
model (ideal projectors or fuzzy operators), reconstructs each run by
maximum likelihood under the reconstruction model and aggregates the loss
L = n_tot <1 - F> and the efficiency Eff = ((s - 1)/n_tot) / <1 - F>.
Per-run random streams are spawned from the campaign seed, so results are
bit-identical for any degree of parallelism.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .protocols import MeasurementProtocol, build_protocol
from .optics import spectral_grid
from .states import StateVector, fidelity_pure, haar_random_state
from .tomography import (
    CountData,
    chi_square_adequacy,
    mle_reconstruct,
    simulate_counts,
    split_exposures,
)

PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class InformationMatrix:
    """Fisher information projected on the 2s-2 dimensional state tangent space."""

    dim_params: int
    matrix: np.ndarray
    exposures: np.ndarray
    tangent_basis: np.ndarray = field(repr=False)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def _tangent_basis(psi: np.ndarray) -> np.ndarray:
    """Orthonormal complement of the normalization and global-phase directions."""
    x, y = psi.real, psi.imag
    t_norm = np.concatenate([x, y])
    t_norm = t_norm / np.linalg.norm(t_norm)
    t_phase = np.concatenate([-y, x])
    t_phase = t_phase / np.linalg.norm(t_phase)
    seed = np.column_stack([t_norm, t_phase, np.eye(psi.size * 2)])
    q = np.linalg.qr(seed)[0]
    return q[:, 2 : psi.size * 2]


def _operator_stack(operators) -> np.ndarray:
    if isinstance(operators, np.ndarray):
        return operators
    return np.array([[getattr(el, "matrix", el) for el in setting] for setting in operators])


def probability_gradients(psi: np.ndarray, flat_ops: np.ndarray):
    """p_m = <psi|L_m|psi> and its derivatives over (Re c, Im c).

    d p / d Re(c_a) = 2 Re (L psi)_a and d p / d Im(c_a) = 2 Im (L psi)_a.
    """
    v = flat_ops @ psi
    p = (v @ psi.conj()).real
    grad = np.concatenate([2 * v.real, 2 * v.imag], axis=1)
    return p, grad


def information_matrix(psi: StateVector, operators, exposures) -> InformationMatrix:
    """Multinomial Fisher information of the protocol at the pure state psi.

    `operators` is a (settings, outcomes, s, s) stack; `exposures` the
    per-setting sample sizes n_nu. The ambient information over the 2s real
    amplitude parameters is projected onto the tangent space orthogonal to
    the normalization and global-phase directions.
    """
    ops = _operator_stack(operators)
    S, J, d, _ = ops.shape
    exposures = np.asarray(exposures, dtype=float)
    if exposures.shape != (S,):
        raise ValueError("exposures must have one entry per setting")
    c = psi.amplitudes
    flat = ops.reshape(S * J, d, d)
    p, grad = probability_gradients(c, flat)
    p = np.maximum(p, PROB_FLOOR)
    weights = np.repeat(exposures, J) / p
    ambient = (grad * weights[:, None]).T @ grad
    basis = _tangent_basis(c)
    projected = basis.T @ ambient @ basis
    projected = (projected + projected.T) / 2
    return InformationMatrix(
        dim_params=2 * d - 2,
        matrix=projected,
        exposures=exposures.copy(),
        tangent_basis=basis,
    )


@dataclass(frozen=True, eq=False)
class InfidelityDistribution:
    """1 - F as the generalized chi-square sum d_j xi_j^2."""

    coefficients: np.ndarray
    predicted_mean: float
    samples: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)


def infidelity_distribution(
    info: InformationMatrix,
    calibration: float = 1.0,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
    n_bins: int = 60,
) -> InfidelityDistribution:
    """Asymptotic infidelity distribution from the information matrix.

    The coefficients are the eigenvalues of the inverse tangent-space
    information matrix scaled by `calibration` (1.0 for the maximum-likelihood
    estimator in this parametrization); the density is estimated by sampling.
    """
    eig = info.eigenvalues()
    if eig.min() <= 0:
        raise ValueError(
            "information matrix is singular on the tangent space; "
            "the protocol is not informationally complete"
        )
    d = calibration / eig
    rng = rng if rng is not None else np.random.default_rng(0)
    xi = rng.standard_normal((n_samples, d.size))
    samples = (xi**2) @ d
    hi = np.quantile(samples, 0.999)
    density, edges = np.histogram(samples, bins=n_bins, range=(0.0, hi), density=True)
    return InfidelityDistribution(
        coefficients=np.sort(d)[::-1],
        predicted_mean=float(d.sum()),
        samples=samples,
        bin_edges=edges,
        density=density,
    )


def loss(n_tot: int, infidelities) -> tuple[float, float]:
    """L = n_tot <1 - F> with its standard error."""
    inf = np.asarray(infidelities, dtype=float)
    if inf.size == 0:
        raise ValueError("need at least one infidelity")
    L = n_tot * float(inf.mean())
    stderr = 0.0 if inf.size < 2 else n_tot * float(inf.std(ddof=1)) / np.sqrt(inf.size)
    return L, stderr


def efficiency(mean_infidelity: float, s: int, n_tot: int) -> float:
    """Eff = <1 - F>_min / <1 - F> with <1 - F>_min = (s - 1)/n_tot."""
    if mean_infidelity <= 0:
        raise ValueError("mean infidelity must be positive")
    return ((s - 1) / n_tot) / mean_infidelity


_MODELS = ("standard", "fuzzy")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one Monte Carlo campaign."""

    dim: int
    symmetry: str
    delta_lambda_nm: float
    n_tot: int
    n_exp: int
    seed: int
    reconstruction_model: str = "standard"
    data_model: str = "standard"
    lambda_s_um: float = 0.65
    lambda_p_um: float = 0.325
    plate_order: int = 5
    spectral_points: int = 64

    def __post_init__(self):
        if self.dim not in (2, 4):
            raise ValueError("dim must be 2 or 4")
        if self.symmetry not in ("cube", "octahedron"):
            raise ValueError("symmetry must be 'cube' or 'octahedron'")
        if self.delta_lambda_nm < 0:
            raise ValueError("delta_lambda_nm must be >= 0")
        if self.n_tot < 1 or self.n_exp < 1:
            raise ValueError("n_tot and n_exp must be >= 1")
        if self.reconstruction_model not in _MODELS or self.data_model not in _MODELS:
            raise ValueError("models must be 'standard' or 'fuzzy'")
        if self.spectral_points < 1:
            raise ValueError("spectral_points must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(**doc)


def protocol_for(config: ExperimentConfig) -> MeasurementProtocol:
    """Build the measurement protocol described by a campaign config."""
    width = config.delta_lambda_nm * 1e-3
    n_pts = 1 if width == 0 else config.spectral_points
    grid = spectral_grid(config.lambda_s_um, width, config.lambda_p_um, n_pts)
    return build_protocol(
        config.symmetry,
        config.dim,
        spectral=grid,
        lambda0=config.lambda_s_um,
        pump=config.lambda_p_um,
        order=config.plate_order,
    )


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Per-run records plus campaign-level aggregates."""

    config: ExperimentConfig
    reconstruction_model: str
    fidelities: np.ndarray
    chi2_statistics: np.ndarray
    chi2_dofs: np.ndarray
    p_values: np.ndarray
    converged: np.ndarray
    runtime_s: float

    @property
    def infidelities(self) -> np.ndarray:
        return 1.0 - self.fidelities

    @property
    def mean_infidelity(self) -> float:
        return float(self.infidelities.mean())

    @property
    def L(self) -> float:
        return loss(self.config.n_tot, self.infidelities)[0]

    @property
    def L_stderr(self) -> float:
        return loss(self.config.n_tot, self.infidelities)[1]

    @property
    def Eff(self) -> float:
        return (self.config.dim - 1) / self.L

    @property
    def Eff_stderr(self) -> float:
        return self.Eff * self.L_stderr / self.L

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "reconstruction_model": self.reconstruction_model,
            "n_runs": int(self.fidelities.size),
            "n_converged": int(self.converged.sum()),
            "mean_infidelity": self.mean_infidelity,
            "L": self.L,
            "L_stderr": self.L_stderr,
            "Eff": self.Eff,
            "Eff_stderr": self.Eff_stderr,
            "runtime_s": self.runtime_s,
        }


@dataclass(frozen=True, eq=False)
class _CampaignContext:
    dim: int
    n_tot: int
    data_ops: np.ndarray
    recon_ops: dict  # model name -> operator stack


_WORKER_CTX = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _execute_run(ctx: _CampaignContext, seed_seq: np.random.SeedSequence):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    psi = haar_random_state(ctx.dim, rng)
    counts = simulate_counts(psi, ctx.data_ops, ctx.n_tot, rng)
    digest = hashlib.sha256(counts.counts.tobytes()).hexdigest()
    per_model = {}
    for name, ops in ctx.recon_ops.items():
        res = mle_reconstruct(counts, ops, rank=1)
        try:
            chi = chi_square_adequacy(counts, res.probabilities)
            chi_vals = (chi.statistic, chi.dof, chi.p_value)
        except ValueError:
            # pooling left no degrees of freedom for this draw; adequacy undefined
            chi_vals = (np.nan, 0, np.nan)
        per_model[name] = (
            fidelity_pure(res.estimate, psi),
            *chi_vals,
            res.converged,
        )
    return per_model, digest


def _run_one(args):
    index, seed_seq = args
    return index, _execute_run(_WORKER_CTX, seed_seq)


def _run_all(ctx: _CampaignContext, n_exp: int, seed: int, jobs: int):
    tasks = list(enumerate(np.random.SeedSequence(seed).spawn(n_exp)))
    if jobs <= 1:
        return [(i, _execute_run(ctx, ss)) for i, ss in tasks]
    chunk = max(1, n_exp // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as ex:
        out = list(ex.map(_run_one, tasks, chunksize=chunk))
    out.sort(key=lambda pair: pair[0])
    return out


def _collect(config, model, rows, runtime):
    recs = np.array([rows[i][model][:4] for i in range(len(rows))], dtype=float)
    conv = np.array([rows[i][model][4] for i in range(len(rows))], dtype=bool)
    return ExperimentResult(
        config=config,
        reconstruction_model=model,
        fidelities=recs[:, 0],
        chi2_statistics=recs[:, 1],
        chi2_dofs=recs[:, 2].astype(int),
        p_values=recs[:, 3],
        converged=conv,
        runtime_s=runtime,
    )


def run_campaign(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Simulate and reconstruct config.n_exp independent experiments."""
    protocol = protocol_for(config)
    ctx = _CampaignContext(
        dim=config.dim,
        n_tot=config.n_tot,
        data_ops=protocol.operator_stack(config.data_model),
        recon_ops={config.reconstruction_model: protocol.operator_stack(config.reconstruction_model)},
    )
    t0 = time.perf_counter()
    results = _run_all(ctx, config.n_exp, config.seed, jobs)
    runtime = time.perf_counter() - t0
    rows = [per_model for _, (per_model, _) in results]
    return _collect(config, config.reconstruction_model, rows, runtime)


@dataclass(frozen=True, eq=False)
class PairedComparison:
    """Standard vs fuzzy reconstruction on identical per-run count data."""

    standard: ExperimentResult
    fuzzy: ExperimentResult
    loss_ratio: float
    count_digests: tuple
    paired: bool  # both arms consumed byte-identical counts


def paired_model_comparison(config: ExperimentConfig, jobs: int = 1) -> PairedComparison:
    """Reconstruct every simulated data set with both operator models."""
    if config.data_model != "fuzzy":
        raise ValueError("paired comparison expects data_model = 'fuzzy'")
    protocol = protocol_for(config)
    ctx = _CampaignContext(
        dim=config.dim,
        n_tot=config.n_tot,
        data_ops=protocol.operator_stack("fuzzy"),
        recon_ops={
            "standard": protocol.operator_stack("standard"),
            "fuzzy": protocol.operator_stack("fuzzy"),
        },
    )
    t0 = time.perf_counter()
    results = _run_all(ctx, config.n_exp, config.seed, jobs)
    runtime = time.perf_counter() - t0
    rows = [per_model for _, (per_model, _) in results]
    digests = tuple(digest for _, (_, digest) in results)
    standard = _collect(config, "standard", rows, runtime)
    fuzzy = _collect(config, "fuzzy", rows, runtime)
    return PairedComparison(
        standard=standard,
        fuzzy=fuzzy,
        loss_ratio=standard.L / fuzzy.L,
        count_digests=digests,
        paired=True,
    )


def theory_infidelity_samples(
    config: ExperimentConfig,
    n_states: int | None = None,
    draws_per_state: int = 500,
    rng: np.random.Generator | None = None,
):
    """Figure-style averaged theoretical infidelity distribution.

    For each Haar-random state the inverse-information eigenvalues give the
    local generalized chi-square law; samples are pooled over states. Returns
    (per-state predicted means, pooled samples).
    """
    protocol = protocol_for(config)
    model = config.data_model
    ops = protocol.operator_stack(model)
    exposures = split_exposures(config.n_tot, protocol.n_settings)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_states = n_states if n_states is not None else config.n_exp
    means = np.empty(n_states)
    pools = []
    for i in range(n_states):
        psi = haar_random_state(config.dim, rng)
        info = information_matrix(psi, ops, exposures)
        d = 1.0 / info.eigenvalues()
        means[i] = d.sum()
        xi = rng.standard_normal((draws_per_state, d.size))
        pools.append((xi**2) @ d)
    return means, np.concatenate(pools)


@dataclass(frozen=True, eq=False)
class SweepSummary:
    """Per-spectral-width aggregates plus density histograms on a shared grid."""

    rows: tuple
    bin_edges: np.ndarray
    densities: tuple
    mean_infidelity_increasing: bool
    mode_height_decreasing: bool


def summarize(results, samples=None, n_bins: int = 60) -> SweepSummary:
    """Comparison table over a spectral-width sweep.

    `results` is a sequence of ExperimentResult sharing dim and symmetry,
    in any order; `samples` optionally overrides the per-result infidelity
    samples used for the histograms (e.g. theoretical pooled draws).
    """
    results = list(results)
    if not results:
        return SweepSummary((), np.array([]), (), True, True)
    dims = {r.config.dim for r in results}
    syms = {r.config.symmetry for r in results}
    if len(dims) != 1 or len(syms) != 1:
        raise ValueError("sweep results must share dim and symmetry")
    order = np.argsort([r.config.delta_lambda_nm for r in results])
    results = [results[i] for i in order]
    if samples is None:
        samples = [r.infidelities for r in results]
    else:
        samples = [np.asarray(samples[i]) for i in order]

    pooled = np.concatenate(samples)
    hi = np.quantile(pooled, 0.999)
    edges = np.linspace(0.0, hi, n_bins + 1)
    densities = []
    rows = []
    for res, smp in zip(results, samples):
        dens, _ = np.histogram(smp, bins=edges, density=True)
        densities.append(dens)
        rows.append(
            {
                "delta_lambda_nm": res.config.delta_lambda_nm,
                "mean_infidelity": res.mean_infidelity,
                "L": res.L,
                "L_stderr": res.L_stderr,
                "Eff": res.Eff,
                "Eff_stderr": res.Eff_stderr,
            }
        )
    means = [r["mean_infidelity"] for r in rows]
    modes = [float(d.max()) if d.size else 0.0 for d in densities]
    increasing = all(b > a for a, b in zip(means, means[1:]))
    decreasing = all(b < a for a, b in zip(modes, modes[1:]))
    return SweepSummary(
        rows=tuple(rows),
        bin_edges=edges,
        densities=tuple(densities),
        mean_infidelity_increasing=increasing,
        mode_height_decreasing=decreasing,
    )


def write_campaign_csv(path, result: ExperimentResult) -> None:
    """Per-run table: run_index, fidelity, infidelity, chi2, dof, p_value, converged."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run_index,fidelity,infidelity,chi2,dof,p_value,converged\n")
        for i in range(result.fidelities.size):
            fh.write(
                f"{i},{float(result.fidelities[i])!r},{float(result.infidelities[i])!r},"
                f"{float(result.chi2_statistics[i])!r},{int(result.chi2_dofs[i])},"
                f"{float(result.p_values[i])!r},{int(result.converged[i])}\n"
            )


def write_campaign_summary(path, result: ExperimentResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.summary_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_histogram_csv(path, edges, density) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_left,bin_right,density\n")
        for lo, hi, d in zip(edges[:-1], edges[1:], density):
            fh.write(f"{float(lo)!r},{float(hi)!r},{float(d)!r}\n")
