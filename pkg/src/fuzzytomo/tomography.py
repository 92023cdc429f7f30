"""Count statistics and maximum-likelihood state reconstruction.

The estimator is the multiplicative fixed point rho <- R rho R / Tr(...) with
R = sum_{setting, outcome} (n / p) Lambda; in rank-1 mode each step projects
onto the dominant eigenvector, which for a pure iterate reduces to
psi <- R psi / |R psi|. A damped fallback step keeps the log-likelihood
monotone when the raw update overshoots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .states import DensityMatrix, StateVector

PROB_FLOOR = 1e-12
LOGL_GAIN_TOL = 1e-10
MAX_ITERATIONS = 10_000
POOL_THRESHOLD = 5.0


@dataclass(frozen=True, eq=False)
class CountData:
    """Outcome counts per setting; rows sum to the per-setting exposure."""

    counts: np.ndarray  # (n_settings, n_outcomes) nonnegative ints

    def __post_init__(self):
        arr = np.array(self.counts, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError("counts must be a (settings, outcomes) table")
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def exposures(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def n_tot(self) -> int:
        return int(self.counts.sum())

    @property
    def n_settings(self) -> int:
        return self.counts.shape[0]


def split_exposures(n_tot: int, n_settings: int) -> np.ndarray:
    """n_tot split as evenly as possible, remainder on the first settings."""
    base, rem = divmod(int(n_tot), int(n_settings))
    out = np.full(n_settings, base, dtype=np.int64)
    out[:rem] += 1
    return out


def _operator_stack(operators) -> np.ndarray:
    """Accept a (S, J, d, d) array or nested lists of POVMElement."""
    if isinstance(operators, np.ndarray):
        return operators
    return np.array([[getattr(el, "matrix", el) for el in setting] for setting in operators])


def outcome_probabilities(rho, operators) -> np.ndarray:
    """Born probabilities Tr(rho Lambda_j) for one complete outcome set."""
    mats = np.array([getattr(el, "matrix", el) for el in operators])
    dim = mats.shape[-1]
    if np.max(np.abs(mats.sum(axis=0) - np.eye(dim))) > 1e-8:
        raise ValueError("operator set does not sum to the identity")
    if isinstance(rho, StateVector):
        rho = np.outer(rho.amplitudes, rho.amplitudes.conj())
    elif isinstance(rho, DensityMatrix):
        rho = rho.elements
    p = np.einsum("jab,ba->j", mats, rho).real
    return np.clip(p, 0.0, 1.0)


def sample_counts(probs, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial draw of n events over the outcome probabilities."""
    p = np.asarray(probs, dtype=float)
    if n < 0:
        raise ValueError("n must be >= 0")
    if np.any(p < -1e-9):
        raise ValueError("negative outcome probability")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities do not sum to 1")
    p = np.clip(p, 0.0, None)
    return rng.multinomial(n, p / p.sum())


def simulate_counts(psi: StateVector, operator_stack, n_tot: int, rng) -> CountData:
    """Exact probabilities from psi, then one multinomial draw per setting."""
    ops = _operator_stack(operator_stack)
    S = ops.shape[0]
    c = psi.amplitudes
    p = np.einsum("sjab,b,a->sj", ops, c, c.conj()).real
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    exposures = split_exposures(n_tot, S)
    return CountData(rng.multinomial(exposures, p))


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    estimate: object  # StateVector (rank 1) or DensityMatrix (full)
    log_likelihood: float
    iterations: int
    converged: bool
    regularized: bool
    probabilities: np.ndarray  # fitted (n_settings, n_outcomes)
    log_likelihood_trace: np.ndarray


def _loglik(n_flat, p_flat):
    mask = n_flat > 0
    return float(np.sum(n_flat[mask] * np.log(p_flat[mask])))


def mle_reconstruct(data, operators, rank=1, tol=LOGL_GAIN_TOL,
                    max_iterations=MAX_ITERATIONS) -> ReconstructionResult:
    """Maximum-likelihood estimate of the state behind the observed counts.

    Parameters
    ----------
    data : CountData or (settings, outcomes) array
    operators : operator stack matching the counts layout
    rank : 1 for a pure-state estimate, "full" for an unconstrained one
    """
    counts = data.counts if isinstance(data, CountData) else np.asarray(data)
    ops = _operator_stack(operators)
    S, J, d, _ = ops.shape
    if counts.shape != (S, J):
        raise ValueError(f"counts shape {counts.shape} does not match operators {(S, J)}")
    flat = np.ascontiguousarray(ops.reshape(S * J, d, d))
    n = counts.reshape(-1).astype(float)
    regularized = False

    def probs_pure(psi):
        v = flat @ psi
        return v, np.maximum((v @ psi.conj()).real, 0.0)

    def probs_full(rho):
        return None, np.maximum(np.einsum("mab,ba->m", flat, rho).real, 0.0)

    def guarded(p):
        nonlocal regularized
        used = p.copy()
        low = (n > 0) & (p < PROB_FLOOR)
        if np.any(low):
            regularized = True
            used[low] = PROB_FLOOR
        return used

    # start from the count-weighted mean operator's dominant mode
    A = np.einsum("m,mab->ab", n / n.sum(), flat)
    psi = np.linalg.eigh(A)[1][:, -1]
    rho = np.eye(d, dtype=complex) / d

    pure = rank == 1
    if not pure and rank != "full":
        raise ValueError("rank must be 1 or 'full'")

    if pure:
        v, p = probs_pure(psi)
    else:
        v, p = probs_full(rho)
    p_used = guarded(p)
    logl = _loglik(n, p_used)
    trace = [logl]
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        w = np.where(n > 0, n / p_used, 0.0)
        if pure:
            cand = w @ v
            cand = cand / np.linalg.norm(cand)
            v_c, p_c = probs_pure(cand)
        else:
            R = np.einsum("m,mab->ab", w, flat)
            cand = R @ rho @ R
            cand = (cand + cand.conj().T) / 2
            cand = cand / np.trace(cand).real
            v_c, p_c = probs_full(cand)
        p_c_used = guarded(p_c)
        logl_c = _loglik(n, p_c_used)

        if logl_c < logl - 1e-12 * (1 + abs(logl)):
            # damped ascent along the fixed-point direction, halving the step
            accepted = False
            t = 0.5
            while t >= 1e-6:
                if pure:
                    mix = psi + t * (cand - psi)
                    mix = mix / np.linalg.norm(mix)
                    v_c, p_c = probs_pure(mix)
                else:
                    mix = (1 - t) * rho + t * cand
                    v_c, p_c = probs_full(mix)
                p_c_used = guarded(p_c)
                logl_c = _loglik(n, p_c_used)
                if logl_c >= logl:
                    cand = mix
                    accepted = True
                    break
                t /= 2
            if not accepted:
                converged = True  # stationary point within step resolution
                break

        gain = logl_c - logl
        if pure:
            psi = cand
        else:
            rho = cand
        v, p_used, logl = v_c, p_c_used, logl_c
        trace.append(logl)
        if 0 <= gain < tol:
            converged = True
            break

    if pure:
        estimate = StateVector(psi / np.linalg.norm(psi))
    else:
        estimate = DensityMatrix(rho / np.trace(rho).real)
    fitted = p_used
    return ReconstructionResult(
        estimate=estimate,
        log_likelihood=logl,
        iterations=iterations,
        converged=converged,
        regularized=regularized,
        probabilities=fitted.reshape(S, J),
        log_likelihood_trace=np.array(trace),
    )


class ChiSquareResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def chi_square_adequacy(data, fitted_probs, n_params: int | None = None) -> ChiSquareResult:
    """Pearson goodness-of-fit of fitted probabilities to the observed counts.

    Cells with expected count below 5 are pooled within their setting; the
    degrees of freedom are (retained cells) - (settings) - n_params with
    n_params defaulting to the 2s - 2 free parameters of a pure state.
    """
    counts = data.counts if isinstance(data, CountData) else np.asarray(data)
    probs = np.asarray(fitted_probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and fitted probabilities must have matching shape")
    S, J = counts.shape
    if n_params is None:
        n_params = 2 * J - 2
    exposures = counts.sum(axis=1)

    statistic = 0.0
    retained_cells = 0
    for s in range(S):
        expected = exposures[s] * probs[s]
        observed = counts[s].astype(float)
        keep = expected >= POOL_THRESHOLD
        cells_obs = list(observed[keep])
        cells_exp = list(expected[keep])
        if np.any(~keep):
            pool_o, pool_e = observed[~keep].sum(), expected[~keep].sum()
            if pool_e >= POOL_THRESHOLD or not cells_exp:
                cells_obs.append(pool_o)
                cells_exp.append(pool_e)
            else:
                i_min = int(np.argmin(cells_exp))
                cells_obs[i_min] += pool_o
                cells_exp[i_min] += pool_e
        retained_cells += len(cells_exp)
        for o, e in zip(cells_obs, cells_exp):
            if e > 0:
                statistic += (o - e) ** 2 / e

    dof = retained_cells - S - n_params
    if dof <= 0:
        raise ValueError(f"chi-square test has no degrees of freedom (dof = {dof})")
    return ChiSquareResult(float(statistic), int(dof), float(chi2_dist.sf(statistic, dof)))


def write_counts(path, data: CountData, outcome_labels, header: dict) -> None:
    """CSV rows (setting_index, outcome_label, count) under a JSON header line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write("setting_index,outcome_label,count\n")
        for s in range(data.n_settings):
            for j, lab in enumerate(outcome_labels):
                fh.write(f"{s},{lab},{int(data.counts[s, j])}\n")


def read_counts(path):
    """Inverse of write_counts; returns (CountData, outcome_labels, header)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("missing JSON header line")
        header = json.loads(first[1:].strip())
        fh.readline()  # column names
        rows = [line.strip().split(",") for line in fh if line.strip()]
    settings = sorted({int(r[0]) for r in rows})
    labels = []
    for r in rows:
        if int(r[0]) == settings[0]:
            labels.append(r[1])
    table = np.zeros((len(settings), len(labels)), dtype=np.int64)
    index = {lab: j for j, lab in enumerate(labels)}
    for r in rows:
        table[int(r[0]), index[r[1]]] = int(r[2])
    return CountData(table), labels, header
