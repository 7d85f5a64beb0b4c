"""Eigenvalue analysis of harmonic state-space models.

Covers the spectrum of A - j*Omega, transfer-function evaluation,
assignment-based eigenvalue tracking along parameter sweeps, the
invariance classification of eigenvalues, truncation-artefact detection
and folding of the ladder spectrum to the fundamental strip.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, NumericalError, PoleProximityError, ShapeError
from .model import HssModel

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class EigenSolution:
    """Full spectrum of A - j*Omega with unit-norm right eigenvectors."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    labels: tuple[tuple[str, int], ...]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0


def eigen_decompose(model: HssModel) -> EigenSolution:
    """Spectrum and right eigenvectors of the shifted state matrix.

    Eigenvalues are reported in solver order; any ordering across
    parameter variations is the matcher's job.
    """
    m = model.shifted_state_matrix()
    if m.size == 0:
        return EigenSolution(np.zeros(0, complex), np.zeros((0, 0), complex), ())
    w, v = scipy.linalg.eig(m)
    norms = np.linalg.norm(v, axis=0)
    norms[norms == 0] = 1.0
    v = v / norms
    residual = np.linalg.norm(m @ v - v * w, axis=0)
    worst = float(residual.max())
    if worst > RESIDUAL_TOL:
        raise NumericalError(
            f"eigen decomposition residual {worst:.3e} exceeds {RESIDUAL_TOL:.0e} "
            f"(matrix 1-norm condition ~{np.linalg.cond(m, 1):.3e})"
        )
    return EigenSolution(w, v, model.state_labels())


def eigenvalues_only(model: HssModel) -> np.ndarray:
    m = model.shifted_state_matrix()
    if m.size == 0:
        return np.zeros(0, complex)
    return scipy.linalg.eigvals(m)


def evaluate_htf(
    model: HssModel, s: complex, ports: tuple[str, ...] | None = None
) -> np.ndarray:
    """Transfer matrix C*(s*I + j*Omega - A)^-1*E + F at the Laplace point s.

    ``ports`` selects and orders the disturbance columns (all ports by
    default).  Points too close to a pole are rejected.
    """
    names = model.ports if ports is None else ports
    e = model.stacked("e", names)
    f = model.stacked("f", names)
    m = s * np.eye(model.state_dim) - model.shifted_state_matrix()
    if m.size == 0:
        return f.copy()
    anorm = np.linalg.norm(m, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m)
    rcond, info = lapack.zgecon(lu, anorm)
    if info != 0 or rcond < 1e-12:
        eigs = eigenvalues_only(model)
        nearest = eigs[np.argmin(np.abs(eigs - s))] if eigs.size else None
        raise PoleProximityError(
            f"resolvent nearly singular at s={s} (rcond={rcond:.2e}); "
            f"nearest pole {nearest}",
            nearest_pole=nearest,
        )
    return model.c @ scipy.linalg.lu_solve((lu, piv), e) + f


def match_eigenvalues(lam: np.ndarray, lam_other: np.ndarray):
    """Minimum-total-distance bijection between two equally sized spectra.

    Returns ``(perm, total_cost)`` with ``lam[i]`` paired to
    ``lam_other[perm[i]]``.  Ties are broken deterministically by first
    sorting both sets lexicographically by (Re, Im).
    """
    lam = np.asarray(lam, complex)
    lam_other = np.asarray(lam_other, complex)
    if lam.shape != lam_other.shape or lam.ndim != 1:
        raise ShapeError(
            f"eigenvalue sets must be 1-D and equally sized, got "
            f"{lam.shape} and {lam_other.shape}"
        )
    n = lam.size
    if n == 0:
        return np.zeros(0, int), 0.0
    order_a = np.lexsort((lam.imag, lam.real))
    order_b = np.lexsort((lam_other.imag, lam_other.real))
    cost = np.abs(lam[order_a][:, None] - lam_other[order_b][None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=int)
    perm[order_a[rows]] = order_b[cols]
    total = float(cost[rows, cols].sum())
    return perm, total


@dataclass(frozen=True)
class FoldResult:
    """Spectrum folded to Im in (-pi*f1, +pi*f1], plus merged representatives."""

    folded: np.ndarray
    representatives: tuple[tuple[complex, int], ...]


def fold_to_strip(eigenvalues: np.ndarray, f1: float, merge_tol: float = 1e-9) -> FoldResult:
    """Translate each eigenvalue by an integer multiple of j*2*pi*f1 into the
    fundamental strip; the upper boundary is inclusive."""
    if not f1 > 0:
        raise ConfigurationError("f1 must be positive")
    lam = np.asarray(eigenvalues, complex)
    w1 = 2.0 * np.pi * f1
    half = np.pi * f1
    shifts = np.floor((half - lam.imag) / w1)
    folded = lam + 1j * w1 * shifts
    reps: list[list] = []
    for val in folded[np.lexsort((folded.imag, folded.real))]:
        if reps and abs(val - reps[-1][0]) <= merge_tol:
            reps[-1][1] += 1
        else:
            reps.append([val, 1])
    return FoldResult(folded, tuple((complex(v), int(c)) for v, c in reps))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    margin: float
    worst_eigenvalue: complex | None
    n_unstable: int


def stability_verdict(
    eigenvalues: np.ndarray, margin: float = 0.0, spurious: np.ndarray | None = None
) -> StabilityVerdict:
    """Unstable iff any non-spurious eigenvalue lies right of the margin."""
    lam = np.asarray(eigenvalues, complex)
    keep = np.ones(lam.shape, bool) if spurious is None else ~np.asarray(spurious, bool)
    lam = lam[keep]
    if lam.size == 0:
        return StabilityVerdict(True, margin, None, 0)
    worst = lam[np.argmax(lam.real)]
    n_bad = int(np.sum(lam.real > margin))
    return StabilityVerdict(n_bad == 0, margin, complex(worst), n_bad)


# ---------------------------------------------------------------------------
# scenario-driven operations (rebuild the model per parameter value)


def _rebuild_eigenvalues(scenario):
    """Eigenvalues of the analysis model of a scenario (no eigenvectors)."""
    from .pipeline import assemble_system

    return eigenvalues_only(assemble_system(scenario, state_only=True).model)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class EigenTrace:
    """Assignment-matched eigenvalue loci along one parameter sweep."""

    parameter_path: str
    values: tuple[float, ...]
    traces: np.ndarray  # (n_eigenvalues, n_values)
    step_costs: tuple[float, ...]
    unresolved: np.ndarray  # bool, (n_eigenvalues, n_values - 1)


def _step_threshold(costs: np.ndarray, scale: float) -> float:
    return max(10.0 * float(np.median(costs)), 1e-12 * scale)


def sweep_parameter(
    scenario,
    parameter_path: str,
    values,
    refine_on_crossing: bool = True,
    jobs: int = 1,
) -> EigenTrace:
    """Trace eigenvalue loci over a parameter sweep with assignment matching.

    Consecutive spectra are matched by the assignment solver; a step whose
    worst pair cost is far above the step median is re-matched through a
    bisected intermediate point, and pairs that stay ambiguous are marked
    unresolved rather than silently guessed.
    """
    values = [float(v) for v in values]
    if len(values) < 2:
        raise ConfigurationError("a sweep needs at least 2 parameter values")
    scenario.resolve_parameter(parameter_path)  # raises if not a numeric scalar

    spectra = _map_jobs(
        lambda v: _rebuild_eigenvalues(scenario.with_parameter(parameter_path, v)),
        values,
        jobs,
    )
    n = spectra[0].size
    scale = max(float(np.max(np.abs(s))) for s in spectra) if n else 1.0

    # trace identities follow the lexicographic order of the first spectrum
    order0 = np.lexsort((spectra[0].imag, spectra[0].real))
    traces = np.empty((n, len(values)), complex)
    traces[:, 0] = spectra[0][order0]
    unresolved = np.zeros((n, len(values) - 1), bool)
    step_costs = []

    current = traces[:, 0]
    for k in range(1, len(values)):
        nxt = spectra[k]
        perm, total = match_eigenvalues(current, nxt)
        pair = np.abs(current - nxt[perm])
        threshold = _step_threshold(pair, scale)
        if np.any(pair > threshold) and refine_on_crossing:
            mid_value = 0.5 * (values[k - 1] + values[k])
            mid = _rebuild_eigenvalues(scenario.with_parameter(parameter_path, mid_value))
            perm_a, _ = match_eigenvalues(current, mid)
            perm_b, _ = match_eigenvalues(mid[perm_a], nxt)
            perm = perm_b
            pair_a = np.abs(current - mid[perm_a])
            pair_b = np.abs(mid[perm_a] - nxt[perm_b])
            bad = (pair_a > _step_threshold(pair_a, scale)) | (
                pair_b > _step_threshold(pair_b, scale)
            )
            unresolved[:, k - 1] = bad
            pair = np.abs(current - nxt[perm])
            total = float(pair.sum())
        elif np.any(pair > threshold):
            unresolved[:, k - 1] = pair > threshold
        step_costs.append(float(total))
        current = nxt[perm]
        traces[:, k] = current

    return EigenTrace(
        parameter_path, tuple(values), traces, tuple(step_costs), unresolved
    )


CDV = "CDV"
CDI = "CDI"
DI = "DI"
UNRESOLVED = "unresolved"

#: relative perturbations applied to every classified parameter
DEFAULT_PERTURBATIONS = (-0.2, -0.1, 0.1, 0.2)


@dataclass(frozen=True)
class EigenClassification:
    """Invariance classification of the nominal spectrum.

    ``control_displacements`` and ``hardware_displacements`` hold the
    maximum matched displacement of each eigenvalue over all sweeps of
    the respective parameter group (NaN where a sweep failed).
    """

    eigenvalues: np.ndarray
    labels: tuple[str, ...]
    control_displacements: np.ndarray
    hardware_displacements: np.ndarray
    epsilon: float
    control_parameters: tuple[str, ...]
    hardware_parameters: tuple[str, ...]

    def relabel(self, epsilon: float) -> tuple[str, ...]:
        """Labels at a different displacement tolerance, same evidence."""
        return _labels_from_evidence(
            self.control_displacements, self.hardware_displacements, epsilon
        )


def _labels_from_evidence(ctl_disp, hw_disp, epsilon) -> tuple[str, ...]:
    labels = []
    for c, h in zip(ctl_disp, hw_disp):
        if not (np.isfinite(c) and np.isfinite(h)):
            labels.append(UNRESOLVED)
        elif c > epsilon:
            labels.append(CDV)
        elif h <= epsilon:
            labels.append(DI)
        else:
            labels.append(CDI)
    return tuple(labels)


def classify_eigenvalues(
    scenario,
    control_parameters,
    hardware_parameters,
    epsilon: float | None = None,
    perturbations=DEFAULT_PERTURBATIONS,
    jobs: int = 1,
) -> EigenClassification:
    """Classify eigenvalues by their displacement under parameter sweeps.

    Every parameter is perturbed on a relative grid around its nominal
    value; each perturbed spectrum is matched back to the nominal one and
    the per-eigenvalue displacement recorded.  An eigenvalue is
    control-design invariant when no control perturbation moves it beyond
    epsilon, and design invariant when the hardware sweeps stay below
    epsilon as well.
    """
    control_parameters = tuple(control_parameters)
    hardware_parameters = tuple(hardware_parameters)
    if not control_parameters or not hardware_parameters:
        raise ConfigurationError(
            "classification needs non-empty control and hardware parameter sets"
        )
    from .pipeline import assemble_system

    nominal = eigenvalues_only(assemble_system(scenario).model)
    order = np.lexsort((nominal.imag, nominal.real))
    nominal = nominal[order]
    n = nominal.size
    radius = float(np.max(np.abs(nominal))) if n else 1.0
    eps = 1e-6 * radius if epsilon is None else float(epsilon)

    def sweep_group(params):
        disp = np.zeros(n)
        tasks = []
        for path in params:
            base = scenario.resolve_parameter(path)
            for rel in perturbations:
                tasks.append(scenario.with_parameter(path, base * (1.0 + rel)))

        def one(sc):
            try:
                return _rebuild_eigenvalues(sc)
            except Exception:
                return None

        for lam in _map_jobs(one, tasks, jobs):
            if lam is None or lam.size != n:
                return np.full(n, np.nan)
            perm, _ = match_eigenvalues(nominal, lam)
            disp = np.maximum(disp, np.abs(nominal - lam[perm]))
        return disp

    ctl_disp = sweep_group(control_parameters)
    hw_disp = sweep_group(hardware_parameters)
    labels = _labels_from_evidence(ctl_disp, hw_disp, eps)
    return EigenClassification(
        nominal,
        labels,
        ctl_disp,
        hw_disp,
        eps,
        control_parameters,
        hardware_parameters,
    )


@dataclass(frozen=True)
class SpuriousReport:
    """Truncation-artefact detection by probing a finer harmonic grid."""

    eigenvalues: np.ndarray
    spurious: np.ndarray  # probe-convergence failures
    boundary_suspect: np.ndarray  # eigenvector energy concentrated at the rim
    probe_distance: np.ndarray
    delta: float
    hmax: int
    hmax_probe: int


def detect_spurious(
    scenario,
    hmax_probe: int | None = None,
    delta: float | None = None,
) -> SpuriousReport:
    """Flag eigenvalues that do not persist on a finer harmonic grid.

    The scenario is rebuilt at ``hmax_probe``; both spectra are folded to
    the fundamental strip, and eigenvalues whose nearest folded probe
    counterpart is farther than delta are flagged spurious.  Eigenvalues
    whose eigenvector energy sits mostly in the outermost two harmonic
    blocks are additionally flagged boundary-suspect.
    """
    from .pipeline import assemble_system

    hmax = scenario.hmax
    probe = hmax + 3 if hmax_probe is None else int(hmax_probe)
    if probe < hmax + 2:
        raise ConfigurationError(f"hmax_probe must be >= hmax + 2 = {hmax + 2}")

    system = assemble_system(scenario)
    sol = eigen_decompose(system.model)
    order = np.lexsort((sol.eigenvalues.imag, sol.eigenvalues.real))
    lam = sol.eigenvalues[order]
    vectors = sol.vectors[:, order]

    probe_lam = eigenvalues_only(assemble_system(scenario.with_hmax(probe)).model)
    f1 = system.model.index_set.f1
    folded = fold_to_strip(lam, f1).folded
    folded_probe = fold_to_strip(probe_lam, f1).folded

    radius = float(np.max(np.abs(lam))) if lam.size else 1.0
    tol = 1e-4 * radius if delta is None else float(delta)

    if folded_probe.size:
        dist = np.array([float(np.min(np.abs(folded_probe - x))) for x in folded])
    else:
        dist = np.full(lam.shape, np.inf)
    spurious = dist > tol

    count = system.model.index_set.count
    channels = system.model.state_channels
    energy = np.abs(vectors.reshape(count, channels, -1)) ** 2
    per_order = energy.sum(axis=1)  # (count, n_eigs)
    orders = np.abs(system.model.index_set.orders)
    rim = orders >= max(hmax - 1, 1)
    if rim.any() and hmax >= 1:
        boundary = per_order[rim].sum(axis=0) >= 0.5
    else:
        boundary = np.zeros(lam.shape, bool)

    return SpuriousReport(lam, spurious, boundary, dist, tol, hmax, probe)
