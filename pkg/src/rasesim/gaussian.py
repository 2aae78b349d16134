"""Two-mode Gaussian state algebra for amplified-emission / echo pairs.

The joint state of the directly emitted field (mode 1) and its delayed,
time-reversed echo (mode 2) is modelled as the minimal Gaussian structure
compatible with an inverted two-level gain medium: a two-mode-squeezed
emitter/atom pair whose atomic arm is read out through a beamsplitter of
transmissivity ``eta``, with optional classical excess noise added to the
echo quadratures.

Two unit conventions are used.  In the *intrinsic* convention the vacuum
covariance is the identity.  Heterodyne detection measures both quadratures
at once at the cost of one unit of vacuum noise, which maps the covariance
to ``(cov + I) / 2``; in this *measured* convention the detected vacuum
again has unit variance, so the separability bound on the weighted EPR
variance sum is exactly 2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ConventionError, InvalidStateError

__all__ = [
    "Convention",
    "RasePhysicsParams",
    "TwoModeGaussianState",
    "PhysicalityReport",
    "MAX_OPTICAL_DEPTH",
    "amplifier_gain",
    "ase_rase_state",
    "heterodyne_map",
    "inseparability_sum",
    "min_inseparability",
    "calibrate_eta",
    "sample_quadratures",
    "check_physicality",
]

#: Quadrature ordering used for every 4x4 covariance in this package.
QUADRATURE_ORDER = ("x1", "p1", "x2", "p2")

#: Guard against overflow of exp(alpha_l) in the gain model.
MAX_OPTICAL_DEPTH = 10.0

#: Eigenvalue tolerance for the physicality test cov + i*Omega >= 0.
PHYSICALITY_TOL = 1e-12

# Symplectic form over (x1, p1, x2, p2).
_OMEGA = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)


class Convention(enum.Enum):
    """Unit convention of a stored covariance matrix."""

    INTRINSIC = "intrinsic"
    MEASURED = "measured"


@dataclass(frozen=True)
class RasePhysicsParams:
    """Physical knobs of the emitter/echo pair.

    Parameters
    ----------
    alpha_l:
        Optical depth of the gain medium, >= 0.  Sets the intensity gain
        ``G = exp(alpha_l)``.
    eta:
        Recall efficiency of the stored collective excitation into the echo
        field, in [0, 1].
    excess:
        Non-negative classical noise variance added to each echo quadrature,
        quoted in measured units.
    """

    alpha_l: float
    eta: float
    excess: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha_l <= MAX_OPTICAL_DEPTH:
            raise ValueError(
                f"alpha_l must be in [0, {MAX_OPTICAL_DEPTH}], got {self.alpha_l}"
            )
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if self.excess < 0.0:
            raise ValueError(f"excess must be >= 0, got {self.excess}")


@dataclass(frozen=True)
class TwoModeGaussianState:
    """Zero-mean-capable Gaussian state of two optical modes.

    Attributes
    ----------
    cov:
        4x4 real symmetric covariance matrix over (x1, p1, x2, p2).
    mean:
        Length-4 mean vector (zero throughout this package).
    convention:
        Unit convention the covariance is expressed in.
    """

    cov: np.ndarray
    mean: np.ndarray
    convention: Convention

    def __post_init__(self) -> None:
        cov = np.array(self.cov, dtype=float)
        mean = np.array(self.mean, dtype=float)
        if cov.shape != (4, 4):
            raise ValueError(f"cov must be 4x4, got shape {cov.shape}")
        if mean.shape != (4,):
            raise ValueError(f"mean must have length 4, got shape {mean.shape}")
        if not np.array_equal(cov, cov.T):
            raise InvalidStateError("covariance matrix is not exactly symmetric")
        cov.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)

    def variances(self) -> np.ndarray:
        """Diagonal of the covariance, ordered (x1, p1, x2, p2)."""
        return np.diag(self.cov)


@dataclass(frozen=True)
class PhysicalityReport:
    """Result of the uncertainty-principle test on an intrinsic state."""

    physical: bool
    min_eigenvalue: float


def vacuum_state(convention: Convention = Convention.INTRINSIC) -> TwoModeGaussianState:
    """Two uncorrelated vacuum modes (identity covariance in either convention)."""
    return TwoModeGaussianState(np.eye(4), np.zeros(4), convention)


def amplifier_gain(alpha_l: float) -> float:
    """Intensity gain of an inverted medium of optical depth ``alpha_l``.

    Uses the standard inverted-two-level-medium law ``G = exp(alpha_l)``;
    monotone increasing with ``G(0) = 1``.
    """
    if not 0.0 <= alpha_l <= MAX_OPTICAL_DEPTH:
        raise ValueError(
            f"alpha_l must be in [0, {MAX_OPTICAL_DEPTH}], got {alpha_l}"
        )
    return float(np.exp(alpha_l))


def ase_rase_state(params: RasePhysicsParams) -> TwoModeGaussianState:
    """Joint intrinsic-convention state of the emitted field and its echo.

    With gain ``G = exp(alpha_l)`` the emitted mode carries thermal variance
    ``2G - 1`` per quadrature.  The collective atomic excitation left behind
    is read out into the echo mode through a beamsplitter of transmissivity
    ``eta``, giving echo variance ``1 + 2*eta*(G - 1) + 2*excess`` and a
    cross covariance of magnitude ``c = 2*sqrt(eta*G*(G - 1))``.

    The echo mode is referenced in its analysis orientation, i.e. after the
    time reversal and conjugation that pairs it with the directly emitted
    field.  In that orientation the x quadratures are anticorrelated and the
    p quadratures correlated (``Cov(x1,x2) = -c``, ``Cov(p1,p2) = +c``),
    which is the sign choice that makes the weighted EPR pair
    ``sqrt(b)*x1 + sqrt(1-b)*x2`` / ``sqrt(b)*p1 - sqrt(1-b)*p2`` squeezed.

    Raises
    ------
    InvalidStateError
        If the resulting covariance fails the physicality test (possible
        only through numerical abuse of the parameters).
    """
    gain = amplifier_gain(params.alpha_l)
    v_emit = 2.0 * gain - 1.0
    v_echo = 1.0 + 2.0 * params.eta * (gain - 1.0) + 2.0 * params.excess
    cross = 2.0 * np.sqrt(params.eta * gain * (gain - 1.0))

    cov = np.diag([v_emit, v_emit, v_echo, v_echo])
    cov[0, 2] = cov[2, 0] = -cross
    cov[1, 3] = cov[3, 1] = +cross

    state = TwoModeGaussianState(cov, np.zeros(4), Convention.INTRINSIC)
    report = check_physicality(state)
    if not report.physical:
        raise InvalidStateError(
            "parameters produce an unphysical covariance "
            f"(min eigenvalue of cov + i*Omega = {report.min_eigenvalue:.3e})"
        )
    return state


def heterodyne_map(state: TwoModeGaussianState) -> TwoModeGaussianState:
    """Map an intrinsic state to the statistics of its heterodyne record.

    Simultaneous detection of both quadratures adds one unit of vacuum noise
    and halves the scale: ``cov -> (cov + I) / 2``.  The measured vacuum is
    again the identity, so separability bounds keep their textbook form in
    measured units.  Means are halved in the matching amplitude convention
    (they are zero throughout this package).
    """
    if state.convention is not Convention.INTRINSIC:
        raise ConventionError("heterodyne_map expects an intrinsic-convention state")
    cov = (state.cov + np.eye(4)) / 2.0
    return TwoModeGaussianState(cov, state.mean / 2.0, Convention.MEASURED)


def _require_measured(state: TwoModeGaussianState, op: str) -> None:
    if state.convention is not Convention.MEASURED:
        raise ConventionError(f"{op} expects a measured-convention state")


def inseparability_sum(state: TwoModeGaussianState, b) -> float | np.ndarray:
    """Weighted EPR variance sum ``S(b) = Var(u) + Var(v)``.

    The joint operators are ``u = sqrt(b)*x1 + sqrt(1-b)*x2`` and
    ``v = sqrt(b)*p1 - sqrt(1-b)*p2`` with weight ``b`` in [0, 1].  Any
    separable state in the measured convention satisfies ``S(b) >= 2``.

    ``b`` may be a scalar or an array; the return matches its shape.
    """
    _require_measured(state, "inseparability_sum")
    b_arr = np.asarray(b, dtype=float)
    if np.any(b_arr < 0.0) or np.any(b_arr > 1.0):
        raise ValueError("weight b must lie in [0, 1]")
    c = state.cov
    w = np.sqrt(b_arr * (1.0 - b_arr))
    var_u = b_arr * c[0, 0] + (1.0 - b_arr) * c[2, 2] + 2.0 * w * c[0, 2]
    var_v = b_arr * c[1, 1] + (1.0 - b_arr) * c[3, 3] - 2.0 * w * c[1, 3]
    total = var_u + var_v
    if np.ndim(b) == 0:
        return float(total)
    return total


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section_min(fun, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    mid = 0.5 * (a + b)
    return mid, float(fun(mid))


def min_inseparability(
    state: TwoModeGaussianState,
    grid_step: float = 1e-3,
    refine_tol: float = 1e-4,
) -> tuple[float, float]:
    """Locate the minimum of ``S(b)`` over ``b`` in [0, 1].

    A dense grid scan (default step 1e-3) is refined by golden-section
    search to a weight resolution of ``refine_tol``.  Ties are broken
    toward smaller ``b``, so states whose cross terms vanish (``S`` linear
    in ``b``) return an endpoint, and the vacuum returns ``b = 0``.

    Returns
    -------
    (b_star, s_star):
        The minimizing weight and the minimum variance sum.
    """
    _require_measured(state, "min_inseparability")
    grid = np.arange(0.0, 1.0 + grid_step / 2.0, grid_step)
    grid[-1] = 1.0
    values = inseparability_sum(state, grid)
    i = int(np.argmin(values))

    lo = max(0.0, grid[i] - grid_step)
    hi = min(1.0, grid[i] + grid_step)
    b_ref, s_ref = _golden_section_min(
        lambda b: inseparability_sum(state, b), lo, hi, refine_tol
    )

    # Tie-break toward smaller b among endpoint and refined candidates.
    candidates = [
        (0.0, float(values[0])),
        (1.0, float(values[-1])),
        (float(grid[i]), float(values[i])),
        (b_ref, s_ref),
    ]
    s_min = min(s for _, s in candidates)
    b_star, s_star = min(
        (cand for cand in candidates if cand[1] <= s_min + 1e-12),
        key=lambda cand: cand[0],
    )
    return float(b_star), float(s_star)


def calibrate_eta(
    alpha_l: float,
    target_dip: float,
    excess: float = 0.0,
    tol: float = 1e-6,
) -> float:
    """Find the recall efficiency whose measured dip depth hits a target.

    Solves ``min_b S(b) = target_dip`` for ``eta`` in [0, 1] at fixed
    optical depth (and zero excess noise by default).  The dip deepens
    monotonically with ``eta``, so plain bisection converges to the unique
    root; iteration stops once the dip matches within ``tol``.

    Raises
    ------
    CalibrationError
        If ``target_dip`` is not strictly between the deepest attainable
        dip (at ``eta = 1``) and the separable bound 2.
    """
    if not 0.0 < alpha_l <= MAX_OPTICAL_DEPTH:
        raise ValueError(
            f"alpha_l must be in (0, {MAX_OPTICAL_DEPTH}], got {alpha_l}"
        )

    def dip(eta: float) -> float:
        params = RasePhysicsParams(alpha_l=alpha_l, eta=eta, excess=excess)
        measured = heterodyne_map(ase_rase_state(params))
        return min_inseparability(measured)[1]

    deepest = dip(1.0)
    if not deepest < target_dip < 2.0:
        raise CalibrationError(
            f"target dip {target_dip} unattainable at alpha_l={alpha_l}: "
            f"attainable range is ({deepest:.6f}, 2)"
        )

    lo, hi = 0.0, 1.0  # dip(0) = 2 > target, dip(1) < target
    eta = 0.5
    for _ in range(200):
        eta = 0.5 * (lo + hi)
        value = dip(eta)
        if abs(value - target_dip) <= tol:
            return eta
        if value > target_dip:
            lo = eta
        else:
            hi = eta
    return eta


def sample_quadratures(
    state: TwoModeGaussianState, n_shots: int, seed: int
) -> np.ndarray:
    """Draw i.i.d. heterodyne outcome quadruples from a measured state.

    Returns an ``(n_shots, 4)`` array with columns (x1, p1, x2, p2), drawn
    through the symmetric matrix square root of the covariance.  Output is
    a pure function of ``(state, n_shots, seed)``.
    """
    _require_measured(state, "sample_quadratures")
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    evals, evecs = np.linalg.eigh(state.cov)
    if evals.min() < -1e-10:
        raise InvalidStateError(
            f"covariance is not positive semidefinite (min eigenvalue {evals.min():.3e})"
        )
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_shots, 4)) @ root.T + state.mean


def check_physicality(state: TwoModeGaussianState) -> PhysicalityReport:
    """Test the bosonic uncertainty relation ``cov + i*Omega >= 0``.

    Valid only in the intrinsic convention, where the vacuum saturates the
    bound.  The eigenvalue tolerance of 1e-12 scales with the covariance
    norm so that states near the maximal optical depth (gain ~ 2e4) are not
    rejected for rounding at their natural scale.  The report carries the
    smallest eigenvalue of the Hermitian matrix ``cov + i*Omega``.
    """
    if state.convention is not Convention.INTRINSIC:
        raise ConventionError("check_physicality expects an intrinsic-convention state")
    herm = state.cov + 1j * _OMEGA
    min_eig = float(np.linalg.eigvalsh(herm).min())
    tol = PHYSICALITY_TOL * max(1.0, float(np.abs(state.cov).max()))
    return PhysicalityReport(physical=min_eig >= -tol, min_eigenvalue=min_eig)
