"""State reconstruction from probability queries along prescribed directions.

Step I measures the maximal-outcome probability at 4s+1 nodes whose
stereographic images lie on a line through the origin, on the unit circle,
or on a rigid shift of either.  On such a set the weighted probability is a
polynomial in the node coordinate, so a Vandermonde-type linear solve
recovers its coefficients.  The polynomial roots determine every zero of the
state's overlap polynomial only up to a reflection (line) or inversion
(circle) per zero, leaving up to 2^{2s} candidate states.  Step II removes
the ambiguity either by probing each putative zero direction (the
probability vanishes only at a true zero) or by a single measurement along a
generic direction where the candidates' predictions separate.

A direct alternative searches the sphere for the 2s directions where the
probability itself vanishes; rebuilding the state from those zeros is the
conceptually simplest reconstruction.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize

from .core import (
    INFINITY,
    Direction,
    PhasePoint,
    PureState,
    Spin,
    ZeroSet,
    chordal_distance,
    direction_to_point,
    expand_roots,
    fidelity,
    husimi,
    husimi_states,
    point_to_direction,
    polynomial_roots,
    random_state,
    sqrt_binomials,
    state_from_zeros,
    zeros_of,
)
from .measurement import MeasurementOracle

__all__ = [
    "AmbiguityStats",
    "CandidateSet",
    "CircleGeometry",
    "CoefficientVector",
    "DuplicateNodeError",
    "EquatorGeometry",
    "IllConditionedWarning",
    "InconclusiveProbeError",
    "InversionPair",
    "LineGeometry",
    "NodeSet",
    "ReconstructConfig",
    "ReconstructionReport",
    "RetriesExhaustedError",
    "RootPairingError",
    "ZeroPair",
    "ZeroSearchError",
    "ambiguity_experiment",
    "coefficient_roots",
    "default_line_nodes",
    "design_matrix",
    "disambiguate_single_probe",
    "disambiguate_zero_probe",
    "enumerate_candidates",
    "equator_pairs",
    "fibonacci_directions",
    "make_nodes",
    "reconstruct",
    "solve_coefficients",
    "vandermonde_det",
    "zero_search",
]

# Structural tolerances.
NODE_DISTINCT_TOL = 1e-9        # minimum pairwise chordal distance of nodes
REAL_ZERO_TOL = 1e-8            # |Im| below this always counts as a real zero
PAIR_MATCH_TOL = 1e-7           # conjugate / inverse partners matched within this
DEFICIENCY_TOL = 1e-9           # top coefficients below this (relative) vanish
ILL_CONDITION_LIMIT = 1e12      # condition estimate above this draws a warning
PROBE_EXCLUSION = 0.05          # keep probe directions this far from putative zeros
PERTURB_STEP = 0.1              # chordal step of a probe-direction perturbation
MAX_PROBE_ATTEMPTS = 50
EXACT_VANISH_THRESHOLD = 1e-9   # zero-probe vanishing cut, exact oracle
EXACT_SEPARATION = 1e-6         # single-probe prediction gap, exact oracle
MAX_TWOS = 20

_EPS = float(np.finfo(float).eps)


class DuplicateNodeError(ValueError):
    """Node points violate pairwise distinctness."""


class RootPairingError(RuntimeError):
    """Roots cannot be grouped into symmetry partners.

    Signals a noise level incompatible with the exact-arithmetic structure
    of the inversion (odd real multiplicities, unmatched partners, odd
    degree deficiency).
    """


class InconclusiveProbeError(RuntimeError):
    """A probed probability fell inside the dead band between the decision cuts."""


class RetriesExhaustedError(RuntimeError):
    """No probe direction separated the candidate predictions."""


class ZeroSearchError(RuntimeError):
    """The sphere scan found fewer basins than zeros and deflation failed."""


class IllConditionedWarning(UserWarning):
    """The design matrix condition estimate exceeds the trust limit."""


# ---------------------------------------------------------------------------
# node geometries


@dataclass(frozen=True)
class LineGeometry:
    """Nodes on a half line through the origin, rotated by phitilde."""

    phitilde: float = 0.0


@dataclass(frozen=True)
class EquatorGeometry:
    """Nodes on the unit circle; angles None means equally spaced."""

    angles: tuple[float, ...] | None = None


@dataclass(frozen=True)
class CircleGeometry:
    """A base node set displaced rigidly by a fixed complex shift."""

    base: LineGeometry | EquatorGeometry = EquatorGeometry()
    shift: complex = 0j


Geometry = LineGeometry | EquatorGeometry | CircleGeometry


def _frame(geometry: Geometry) -> tuple[str, complex, complex]:
    """Base kind plus the rigid map base -> plane: z = rot * base + shift."""
    if isinstance(geometry, LineGeometry):
        return "line", complex(math.cos(geometry.phitilde), math.sin(geometry.phitilde)), 0j
    if isinstance(geometry, EquatorGeometry):
        return "equator", 1.0 + 0j, 0j
    if isinstance(geometry, CircleGeometry):
        kind, rot, _ = _frame(geometry.base)
        return kind, rot, complex(geometry.shift)
    raise TypeError(f"unknown geometry {geometry!r}")


@dataclass(frozen=True, eq=False)
class NodeSet:
    """4s+1 distinct measurement points consistent with a node geometry."""

    spin: Spin
    geometry: Geometry
    points: tuple[PhasePoint, ...]

    def __post_init__(self) -> None:
        if self.spin.twos < 1:
            raise ValueError("node sets need twos >= 1")
        if self.spin.twos > MAX_TWOS:
            raise ValueError(f"twos above {MAX_TWOS} not supported")
        points = tuple(self.points)
        n = 2 * self.spin.twos + 1
        if len(points) != n:
            raise ValueError(f"expected {n} nodes, got {len(points)}")
        for p in points:
            if p.infinite:
                raise ValueError("node points must be finite")
        for i in range(n):
            for j in range(i + 1, n):
                if chordal_distance(points[i], points[j]) <= NODE_DISTINCT_TOL:
                    raise DuplicateNodeError(
                        f"nodes {i} and {j} coincide within {NODE_DISTINCT_TOL}"
                    )
        kind, rot, shift = _frame(self.geometry)
        base = [(p.z - shift) / rot for p in points]
        if kind == "line":
            for b in base:
                if abs(b.imag) > 1e-9 * max(1.0, abs(b)) or b.real <= 0.0:
                    raise ValueError(
                        f"node {b!r} is not on the positive half line of the geometry"
                    )
        else:
            for b in base:
                if abs(abs(b) - 1.0) > 1e-9:
                    raise ValueError(f"node {b!r} is not on the unit circle of the geometry")
        object.__setattr__(self, "points", points)

    @property
    def base_kind(self) -> str:
        return _frame(self.geometry)[0]

    def base_coordinates(self) -> np.ndarray:
        """Node coordinates in the base frame: positive reals or unit complexes."""
        kind, rot, shift = _frame(self.geometry)
        base = np.array([(p.z - shift) / rot for p in self.points])
        if kind == "line":
            return base.real.astype(float)
        return base / np.abs(base)


def default_line_nodes(spin: Spin) -> NodeSet:
    """The standard 4s+1 nodes x_nu = (nu+1)/(4s+1-nu) on the positive real axis."""
    return make_nodes(spin, LineGeometry(0.0))


def make_nodes(spin: Spin, geometry: Geometry) -> NodeSet:
    """Build the node set for a geometry (defaults for line spacing and angles)."""
    if spin.twos < 1:
        raise ValueError("node sets need twos >= 1")
    n = 2 * spin.twos + 1
    kind, rot, shift = _frame(geometry)
    if kind == "line":
        nu = np.arange(n)
        base = (nu + 1.0) / (n - nu)
    else:
        base_geo = geometry.base if isinstance(geometry, CircleGeometry) else geometry
        if base_geo.angles is None:
            angles = 2.0 * math.pi * np.arange(n) / n
        else:
            angles = np.asarray(base_geo.angles, dtype=float)
            if angles.shape != (n,):
                raise ValueError(f"expected {n} equator angles, got {angles.shape}")
        base = np.exp(1j * angles)
    points = tuple(PhasePoint(rot * complex(b) + shift) for b in base)
    return NodeSet(spin, geometry, points)


def design_matrix(nodes: NodeSet) -> np.ndarray:
    """Matrix mapping polynomial coefficients to node probabilities.

    Line: x^lam / (1+x^2)^{2s} with the base coordinates (real entries in
    (0, 1]).  Equator: 2^{-2s} e^{i lam phi}.  Shifted circle: w^lam /
    (1+|w|^2)^{2s} with the displaced points themselves; the solver works in
    the base frame instead (see solve_coefficients).
    """
    n = 2 * nodes.spin.twos + 1
    lam = np.arange(n)
    if isinstance(nodes.geometry, CircleGeometry) and nodes.geometry.shift != 0:
        w = np.array([p.z for p in nodes.points])
        return w[:, None] ** lam[None, :] / (1.0 + np.abs(w) ** 2)[:, None] ** nodes.spin.twos
    base = nodes.base_coordinates()
    if nodes.base_kind == "line":
        return base[:, None] ** lam[None, :] / (1.0 + base**2)[:, None] ** nodes.spin.twos
    return base[:, None] ** lam[None, :] / 2.0**nodes.spin.twos


def _effective_system(nodes: NodeSet) -> np.ndarray:
    """Matrix of the base-frame system actually solved: base^lam / (1+|w|^2)^{2s}."""
    n = 2 * nodes.spin.twos + 1
    lam = np.arange(n)
    base = nodes.base_coordinates()
    wabs2 = np.array([abs(p.z) ** 2 for p in nodes.points])
    mat = base[:, None] ** lam[None, :] / (1.0 + wabs2)[:, None] ** nodes.spin.twos
    if nodes.base_kind == "line":
        return mat.real.astype(float)
    return mat


def _vandermonde_closed(values: np.ndarray, twos: int) -> complex:
    """prod (1+|v|^2)^{-2s} * prod_{nu<nu'} (v_{nu'} - v_nu), overflow safe."""
    values = np.asarray(values, dtype=complex)
    logmag = -float(twos) * float(np.sum(np.log1p(np.abs(values) ** 2)))
    phase = 1.0 + 0j
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            diff = values[j] - values[i]
            if diff == 0:
                return 0j
            logmag += math.log(abs(diff))
            phase *= diff / abs(diff)
    return phase * math.exp(logmag)


def vandermonde_det(nodes: NodeSet):
    """Closed-form determinant of the design matrix (line or equator only)."""
    if isinstance(nodes.geometry, CircleGeometry) and nodes.geometry.shift != 0:
        raise ValueError("closed-form determinant applies to line or equator geometry")
    base = nodes.base_coordinates()
    det = _vandermonde_closed(base, nodes.spin.twos)
    if nodes.base_kind == "line":
        return float(det.real)
    return det


# ---------------------------------------------------------------------------
# Step I: linear inversion


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Coefficients of the weighted-probability polynomial at the nodes.

    ``basis`` is "line" (real coefficients, conjugation symmetry) or
    "equator" (complex coefficients, inversion symmetry).  The solved system
    and its inverse ride along for downstream error estimates.
    """

    spin: Spin
    values: np.ndarray
    basis: str
    nodes: NodeSet
    condition_estimate: float
    probs: np.ndarray
    rhs_error: np.ndarray
    matrix: np.ndarray
    inverse: np.ndarray


def _refined_solve(a: np.ndarray, b: np.ndarray, iters: int = 2) -> np.ndarray:
    """LU solve with iterative refinement, residuals in extended precision."""
    lu, piv = lu_factor(a)
    x = lu_solve((lu, piv), b)
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        al = a.astype(np.clongdouble)
        bl = b.astype(np.clongdouble)
        cast = complex
    else:
        al = a.astype(np.longdouble)
        bl = b.astype(np.longdouble)
        cast = float
    for _ in range(iters):
        r = np.asarray(bl - al @ x.astype(al.dtype), dtype=a.dtype)
        x = x + lu_solve((lu, piv), r)
    return x


def solve_coefficients(nodes: NodeSet, probs: np.ndarray,
                       rhs_error: np.ndarray | float | None = None) -> CoefficientVector:
    """Invert the node system for the polynomial coefficients.

    Uses the closed-form Fourier inverse for equally spaced equator angles
    and partial-pivoted elimination (with extended-precision refinement)
    otherwise.  Shifted circles are solved in the base frame by absorbing
    the displaced weights into the system, instead of reworking the
    coefficient basis.  ``rhs_error`` is the per-node uncertainty of the
    probabilities (shot noise); it seeds the downstream root-error
    estimates.  A condition estimate above 1e12 raises
    IllConditionedWarning but the result is still returned.
    """
    probs = np.asarray(probs, dtype=float)
    n = 2 * nodes.spin.twos + 1
    if probs.shape != (n,):
        raise ValueError(f"expected {n} probabilities, got shape {probs.shape}")
    if np.any(probs < -1e-9) or np.any(probs > 1.0 + 1e-9):
        raise ValueError("probabilities must lie in [0, 1]")
    mat = _effective_system(nodes)
    geometry = nodes.geometry
    fourier = (
        nodes.base_kind == "equator"
        and isinstance(geometry, EquatorGeometry)
        and geometry.angles is None
    )
    if fourier:
        # mat = 2^{-2s} F with F F^dag = n; the inverse is a scaled adjoint.
        inv = (2.0 ** (2 * nodes.spin.twos) / n) * mat.conj().T
        c = inv @ probs.astype(complex)
    else:
        inv = np.linalg.inv(mat)
        c = _refined_solve(mat, probs.astype(mat.dtype))
    cond = float(np.linalg.norm(mat, 1) * np.linalg.norm(inv, 1))
    if cond > ILL_CONDITION_LIMIT:
        warnings.warn(
            f"design matrix condition estimate {cond:.3e} exceeds {ILL_CONDITION_LIMIT:.0e}",
            IllConditionedWarning,
            stacklevel=2,
        )
    residual = float(np.max(np.abs(mat @ c - probs)))
    scale = float(np.max(np.abs(probs)))
    if scale > 0 and residual > 1e-8 * scale:
        warnings.warn(
            f"solve residual {residual:.3e} large relative to probabilities",
            IllConditionedWarning,
            stacklevel=2,
        )
    if rhs_error is None:
        err = np.zeros(n)
    elif np.isscalar(rhs_error):
        err = np.full(n, float(rhs_error))
    else:
        err = np.asarray(rhs_error, dtype=float)
    # Always include the floating-point floor of the forward computation.
    err = err + 16.0 * _EPS * (np.abs(mat) @ np.abs(c) + np.abs(probs))
    if nodes.base_kind == "line":
        values = np.asarray(c, dtype=float) if not np.iscomplexobj(c) else c.real.astype(float)
    else:
        values = np.asarray(c, dtype=complex)
    return CoefficientVector(
        spin=nodes.spin,
        values=values,
        basis=nodes.base_kind,
        nodes=nodes,
        condition_estimate=cond,
        probs=probs,
        rhs_error=err,
        matrix=mat,
        inverse=inv,
    )


def _root_noise(roots: np.ndarray, coeffs: np.ndarray, inverse: np.ndarray,
                rhs_error: np.ndarray) -> np.ndarray:
    """First-order displacement bound per root from the probability errors.

    d(root)/d(p_nu) = -(sum_lam inverse[lam, nu] root^lam) / poly'(root); the
    bound sums |d root / d p_nu| * err_nu and therefore adapts to the local
    conditioning of each root (it blows up near multiple roots, where the
    split of a cluster is genuinely unresolvable).
    """
    n = inverse.shape[0]
    deriv = coeffs[1:] * np.arange(1, len(coeffs))
    out = np.empty(len(roots))
    for i, r in enumerate(roots):
        powers = r ** np.arange(n)
        dp = np.polyval(deriv[::-1], r) if len(deriv) else 0.0
        g = powers @ inverse  # shape (n,): d poly(r) / d p_nu
        num = float(np.abs(g) @ rhs_error)
        out[i] = num / max(abs(dp), 1e-300)
    return out


@dataclass(frozen=True)
class ZeroPair:
    """A conjugate root pair of the line-frame polynomial.

    v_abs == 0 marks a real zero, which carries no sign ambiguity.
    multiplicity counts coincident pairs.  location_error is the first-order
    uncertainty of the pair location (plane units) propagated from the
    probability errors; it is 0 when negligible.
    """

    u: float
    v_abs: float
    multiplicity: int = 1
    location_error: float = 0.0

    @property
    def ambiguous(self) -> bool:
        return self.v_abs > 0.0

    def options(self) -> tuple[complex, ...]:
        if self.ambiguous:
            return (complex(self.u, self.v_abs), complex(self.u, -self.v_abs))
        return (complex(self.u, 0.0),)


@dataclass(frozen=True)
class InversionPair:
    """An inversion-partner root pair of the circle-frame polynomial.

    The representative zero has |z| <= 1; its partner is 1/conj(z) (infinity
    for a representative at the origin).  ambiguous is False for zeros on
    the unit circle, which are their own partners.
    """

    zero: PhasePoint
    multiplicity: int = 1
    ambiguous: bool = True
    location_error: float = 0.0

    def options(self) -> tuple[PhasePoint, ...]:
        if not self.ambiguous:
            return (self.zero,)
        return (self.zero, self.zero.inverse_conjugate())


def coefficient_roots(coeffs: CoefficientVector) -> tuple[list[ZeroPair], int]:
    """Group the line-frame polynomial roots into conjugate pairs.

    Top coefficients below 1e-9 of the largest are treated as exact zeros;
    every two missing degrees put one zero at infinity.  Real roots must
    occur with even multiplicity.  Tolerances for declaring a root real and
    for matching conjugate partners widen with the per-root first-order
    error bound propagated through the solve, so shot noise (or the rounding
    floor near a double root) does not masquerade as a sign ambiguity.
    """
    if coeffs.basis != "line":
        raise ValueError("conjugate-pair extraction needs line-basis coefficients")
    c = np.asarray(coeffs.values, dtype=float)
    n = len(c)
    cmax = float(np.max(np.abs(c)))
    if cmax <= 0.0:
        return [], coeffs.spin.twos  # identically zero data: treat as all at infinity
    deg = n - 1
    while deg > 0 and abs(c[deg]) < DEFICIENCY_TOL * cmax:
        deg -= 1
    deficiency = (n - 1) - deg
    if deficiency % 2:
        raise RootPairingError(
            f"odd degree deficiency {deficiency}: data inconsistent with a squared modulus"
        )
    inf_count = deficiency // 2
    trimmed = c[: deg + 1].astype(complex)
    if deg == 0:
        return [], inf_count
    roots = polynomial_roots(trimmed)
    sigma = _root_noise(roots, trimmed, coeffs.inverse, coeffs.rhs_error)

    # Every zero of the state contributes two roots: itself and its mirror
    # image across the real axis (a real zero contributes a double real
    # root).  Match roots in mirror pairs, most reliable first.
    pts = [PhasePoint(complex(r)) for r in roots]
    sig_ch = [float(s) / (1.0 + abs(r) ** 2) for s, r in zip(sigma, roots)]
    matched = _match_point_pairs(pts, sig_ch, lambda p: p.conjugate())

    raw_pairs: list[tuple[float, float, float]] = []
    for i, j in matched:
        wi = 1.0 / max(sigma[i], 1e-300) ** 2
        wj = 1.0 / max(sigma[j], 1e-300) ** 2
        est = (wi * roots[i] + wj * roots[j].conjugate()) / (wi + wj)
        sig = 1.0 / math.sqrt(wi + wj)
        u = float(est.real)
        v = float(abs(est.imag))
        if v <= max(REAL_ZERO_TOL, 3.0 * sig):
            v = 0.0
        raw_pairs.append((u, v, sig))

    # Merge coincident pairs into multiplicities.
    pairs: list[ZeroPair] = []
    raw_pairs.sort(key=lambda t: (t[0], t[1]))
    while raw_pairs:
        u, v, sig = raw_pairs.pop(0)
        bucket = [(u, v, sig)]
        k = 0
        while k < len(raw_pairs):
            u2, v2, sig2 = raw_pairs[k]
            if math.hypot(u2 - u, v2 - v) <= max(PAIR_MATCH_TOL, 6.0 * (sig + sig2)):
                bucket.append((u2, v2, sig2))
                raw_pairs.pop(k)
            else:
                k += 1
        vmean = float(np.mean([b[1] for b in bucket]))
        pairs.append(
            ZeroPair(
                u=float(np.mean([b[0] for b in bucket])),
                v_abs=0.0 if all(b[1] == 0.0 for b in bucket) else vmean,
                multiplicity=len(bucket),
                location_error=float(max(b[2] for b in bucket)),
            )
        )

    total = sum(p.multiplicity for p in pairs) + inf_count
    if total != coeffs.spin.twos:
        raise RootPairingError(
            f"recovered {total} zeros, expected {coeffs.spin.twos}"
        )
    pairs.sort(key=lambda p: (p.u, p.v_abs))
    return pairs, inf_count


def _match_point_pairs(points: list[PhasePoint], sig_ch: list[float],
                       mirror) -> list[tuple[int, int]]:
    """Group points into pairs (i, j) with points[j] close to mirror(points[i]).

    Greedy on the globally smallest normalized mismatch.  Distances are
    chordal: both mirrors of interest, conjugation and inversion across the
    unit circle, are isometries of that metric, so a point's uncertainty
    carries over to its mirror image unchanged (and infinity participates).
    """
    m = len(points)
    if m % 2:
        raise RootPairingError(f"odd root count {m} cannot form mirror pairs")
    mirrors = [mirror(p) for p in points]
    entries = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            d = chordal_distance(points[j], mirrors[i])
            tol = max(PAIR_MATCH_TOL, 6.0 * (sig_ch[i] + sig_ch[j]))
            entries.append((d / tol, i, j))
    entries.sort(key=lambda t: t[0])
    used = [False] * m
    matched: list[tuple[int, int]] = []
    for ratio, i, j in entries:
        if used[i] or used[j]:
            continue
        if ratio > 1.0:
            break
        used[i] = used[j] = True
        matched.append((i, j))
    if not all(used):
        bad = [str(points[i]) for i in range(m) if not used[i]]
        raise RootPairingError(
            f"roots without mirror partners within tolerance: {', '.join(bad)}"
        )
    return matched


def equator_pairs(coeffs: CoefficientVector) -> list[InversionPair]:
    """Group the circle-frame polynomial roots into inversion pairs.

    The solved coefficients determine the polynomial z^{2s} P (1+|z|^2)^{2s}
    on the unit circle, whose roots are the state zeros together with their
    images under z -> 1/conj(z).  Zeros at the origin pair with roots at
    infinity (degree deficiency), zeros on the circle are self-paired and
    must occur doubled.
    """
    if coeffs.basis != "equator":
        raise ValueError("inversion-pair extraction needs equator-basis coefficients")
    spin = coeffs.spin
    n = 2 * spin.twos + 1
    geometry = coeffs.nodes.geometry
    base_geo = geometry.base if isinstance(geometry, CircleGeometry) else geometry
    if base_geo.angles is None:
        # Equally spaced angles alias the Laurent exponents onto 0..4s by a
        # cyclic shift of the solved coefficients.
        q = np.array([coeffs.values[(lam + spin.twos + 1) % n] for lam in range(n)])
        inverse_q = np.array(
            [[coeffs.inverse[(lam + spin.twos + 1) % n, nu] for nu in range(n)] for lam in range(n)]
        )
    else:
        zeta = coeffs.nodes.base_coordinates()
        wabs2 = np.array([abs(p.z) ** 2 for p in coeffs.nodes.points])
        rhs = coeffs.probs * (1.0 + wabs2) ** spin.twos * zeta**spin.twos
        emat = zeta[:, None] ** np.arange(n)[None, :]
        q = _refined_solve(emat, rhs.astype(complex))
        inverse_q = np.linalg.inv(emat)
        # Rescale so the error bound sees the same rhs as the solve.
        inverse_q = inverse_q * ((1.0 + wabs2) ** spin.twos * np.abs(zeta) ** spin.twos)[None, :]
    qmax = float(np.max(np.abs(q)))
    if qmax <= 0.0:
        raise RootPairingError("circle polynomial identically zero")
    deg = n - 1
    while deg > 0 and abs(q[deg]) < DEFICIENCY_TOL * qmax:
        deg -= 1
    top_deficiency = (n - 1) - deg
    trimmed = q[: deg + 1]
    finite = polynomial_roots(trimmed) if deg > 0 else np.zeros(0, dtype=complex)
    sigma = _root_noise(finite, trimmed, inverse_q, coeffs.rhs_error)

    # Every zero of the state contributes two roots: itself and its image
    # under inversion across the unit circle (a vanishing top coefficient
    # is a root at infinity, the image of a root at the origin).
    points = [PhasePoint(complex(r)) for r in finite] + [INFINITY] * top_deficiency
    sig_ch = [float(s) / (1.0 + abs(r) ** 2) for s, r in zip(sigma, finite)]
    sig_ch += [0.0] * top_deficiency
    matched = _match_point_pairs(points, sig_ch, lambda p: p.inverse_conjugate())

    raw: list[tuple[PhasePoint, float]] = []
    for i, j in matched:
        estimates: list[tuple[PhasePoint, float]] = []
        if points[i].finite:
            estimates.append((points[i], sig_ch[i]))
        if points[j].finite:
            estimates.append((points[j].inverse_conjugate(), sig_ch[j]))
        if not estimates:
            raise RootPairingError("matched two roots at infinity")
        if len(estimates) == 1 or estimates[0][1] == 0.0:
            rep, sig = estimates[0]
        elif estimates[1][1] == 0.0:
            rep, sig = estimates[1]
        else:
            wa = 1.0 / estimates[0][1] ** 2
            wb = 1.0 / estimates[1][1] ** 2
            rep = PhasePoint((wa * estimates[0][0].z + wb * estimates[1][0].z) / (wa + wb))
            sig = 1.0 / math.sqrt(wa + wb)
        raw.append((rep, sig))

    pairs: list[InversionPair] = []
    # Merge coincident zero estimates into multiplicities, then classify.
    raw.sort(key=lambda t: (abs(t[0].z), t[0].z.real, t[0].z.imag))
    while raw:
        rep, sig = raw.pop(0)
        bucket = [(rep, sig)]
        k = 0
        while k < len(raw):
            rep2, sig2 = raw[k]
            if chordal_distance(rep2, rep) <= max(PAIR_MATCH_TOL, 6.0 * (sig + sig2)):
                bucket.append((rep2, sig2))
                raw.pop(k)
            else:
                k += 1
        mean = np.mean([b[0].z for b in bucket])
        sig_all = float(max(b[1] for b in bucket))
        err_plane = sig_all * (1.0 + abs(mean) ** 2)
        if abs(mean) > 0 and abs(abs(mean) - 1.0) <= max(REAL_ZERO_TOL, 3.0 * err_plane):
            pairs.append(
                InversionPair(
                    PhasePoint(complex(mean / abs(mean))),
                    multiplicity=len(bucket),
                    ambiguous=False,
                    location_error=err_plane,
                )
            )
        else:
            rep_in = PhasePoint(complex(mean))
            if abs(mean) > 1.0:
                rep_in = rep_in.inverse_conjugate()
            pairs.append(
                InversionPair(
                    rep_in,
                    multiplicity=len(bucket),
                    ambiguous=True,
                    location_error=err_plane,
                )
            )

    total = sum(p.multiplicity for p in pairs)
    if total != spin.twos:
        raise RootPairingError(f"recovered {total} zeros, expected {spin.twos}")
    return pairs


# ---------------------------------------------------------------------------
# candidate enumeration and Step II


@dataclass(frozen=True)
class AmbiguousBranch:
    """One unresolved pair: the two optional zero locations and their weight."""

    first: PhasePoint
    second: PhasePoint
    multiplicity: int
    location_error: float  # chordal units


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """All states compatible with the Step I data.

    pair_signs[i] lists, per ambiguous pair, how many of its copies sit on
    the first option; the generic case (all multiplicities one) makes these
    plain 0/1 sign choices and the candidate count 2^{number of pairs}.
    """

    spin: Spin
    candidates: tuple[PureState, ...]
    pair_signs: tuple[tuple[int, ...], ...]
    ambiguous_options: tuple[AmbiguousBranch, ...]
    fixed_zeros: tuple[PhasePoint, ...]
    fixed_zero_errors: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.candidates)

    @functools.cached_property
    def amplitude_matrix(self) -> np.ndarray:
        return np.stack([c.amplitudes for c in self.candidates])

    @functools.cached_property
    def signs_matrix(self) -> np.ndarray:
        return np.array(self.pair_signs, dtype=float).reshape(
            len(self.candidates), len(self.ambiguous_options)
        )

    def predictions(self, point: PhasePoint) -> np.ndarray:
        """Every candidate's probability at one phase point (vectorized)."""
        return husimi_states(self.amplitude_matrix, self.spin.twos, point)

    @property
    def putative_zeros(self) -> tuple[PhasePoint, ...]:
        opts: list[PhasePoint] = list(self.fixed_zeros)
        for branch in self.ambiguous_options:
            opts.extend((branch.first, branch.second))
        return tuple(opts)

    def candidate_zeros(self, index: int) -> tuple[tuple[PhasePoint, float], ...]:
        """Zeros of one candidate with their chordal location errors."""
        out: list[tuple[PhasePoint, float]] = list(
            zip(self.fixed_zeros, self.fixed_zero_errors or (0.0,) * len(self.fixed_zeros))
        )
        for branch, j in zip(self.ambiguous_options, self.pair_signs[index]):
            out.extend([(branch.first, branch.location_error)] * j)
            out.extend([(branch.second, branch.location_error)] * (branch.multiplicity - j))
        return tuple(out)


def _map_point(z: complex, rot: complex, shift: complex) -> PhasePoint:
    return PhasePoint(rot * z + shift)


def enumerate_candidates(pairs, infinity_count: int, spin: Spin,
                         geometry: Geometry) -> CandidateSet:
    """Expand every sign/inversion branch assignment into a candidate state.

    Line-family geometries branch each non-real pair over u +- i v; circle
    families branch each off-circle pair over z versus 1/conj(z) (the
    associated amplitude factors are absorbed by normalization).  Branching
    respects multiplicities: a pair of multiplicity m yields m+1 splits, not
    2^m, because permuting coincident zeros does not change the ray.
    """
    kind, rot, shift = _frame(geometry)

    def chordal_error(err: float, at: PhasePoint) -> float:
        if err <= 0.0:
            return 0.0
        if at.infinite:
            return err  # isometric image of the origin partner
        return err / (1.0 + abs(at.z) ** 2)

    fixed: list[PhasePoint] = [INFINITY] * infinity_count
    fixed_err: list[float] = [0.0] * infinity_count
    ambiguous: list[AmbiguousBranch] = []
    total = infinity_count
    for pair in pairs:
        total += pair.multiplicity
        if kind == "line":
            if not isinstance(pair, ZeroPair):
                raise ValueError("line geometry expects conjugate ZeroPairs")
            opts = pair.options()
            if pair.ambiguous:
                a = _map_point(opts[0], rot, shift)
                b = _map_point(opts[1], rot, shift)
                ambiguous.append(
                    AmbiguousBranch(a, b, pair.multiplicity,
                                    chordal_error(pair.location_error, a))
                )
            else:
                p = _map_point(opts[0], rot, shift)
                fixed.extend([p] * pair.multiplicity)
                fixed_err.extend([chordal_error(pair.location_error, p)] * pair.multiplicity)
        else:
            if not isinstance(pair, InversionPair):
                raise ValueError("circle geometry expects InversionPairs")
            if pair.ambiguous:
                a, b = pair.options()
                am = a if a.infinite else PhasePoint(a.z + shift)
                bm = b if b.infinite else PhasePoint(b.z + shift)
                err = chordal_error(pair.location_error, am if am.finite else bm)
                ambiguous.append(AmbiguousBranch(am, bm, pair.multiplicity, err))
            else:
                z = pair.zero
                p = z if z.infinite else PhasePoint(z.z + shift)
                fixed.extend([p] * pair.multiplicity)
                fixed_err.extend([chordal_error(pair.location_error, p)] * pair.multiplicity)
    if total != spin.twos:
        raise ValueError(f"pair multiplicities plus infinities give {total}, expected {spin.twos}")

    # Expand all branch assignments, sharing polynomial prefixes.
    fixed_poly = expand_roots([p.z for p in fixed if p.finite])
    polys: list[np.ndarray] = [fixed_poly]
    signs: list[tuple[int, ...]] = [()]
    for branch in ambiguous:
        m = branch.multiplicity
        option_polys = []
        for j in range(m, -1, -1):
            zs = [branch.first.z] * j if branch.first.finite else []
            zs += [branch.second.z] * (m - j) if branch.second.finite else []
            option_polys.append((j, expand_roots(zs)))
        polys, signs = (
            [np.convolve(poly, bp) for poly in polys for _, bp in option_polys],
            [s + (j,) for s in signs for j, _ in option_polys],
        )

    w = sqrt_binomials(spin.twos)
    amps = np.zeros((len(polys), spin.dim), dtype=complex)
    for row, poly in enumerate(polys):
        amps[row, : len(poly)] = poly.conj() / w[: len(poly)]
    mags = np.abs(amps)
    cut = 1e-3 * mags.max(axis=1)
    ref = np.argmax(mags >= cut[:, None], axis=1)
    rows = np.arange(len(polys))
    amps *= (mags[rows, ref] / amps[rows, ref])[:, None]
    amps /= np.linalg.norm(amps, axis=1)[:, None]
    candidates = tuple(PureState._trusted(spin, amps[row].copy()) for row in rows)
    return CandidateSet(
        spin=spin,
        candidates=candidates,
        pair_signs=tuple(signs),
        ambiguous_options=tuple(ambiguous),
        fixed_zeros=tuple(fixed),
        fixed_zero_errors=tuple(fixed_err),
    )


def _measurement_se(oracle: MeasurementOracle, p: float) -> float:
    if oracle.exact:
        return 0.0
    return max(math.sqrt(max(p * (1.0 - p), 0.0) / oracle.shots), 1.0 / oracle.shots)


def _prediction_sigmas(cands: CandidateSet, point: PhasePoint,
                       preds: np.ndarray) -> np.ndarray:
    """First-order uncertainty of each candidate's predicted probability.

    The predictions inherit the Step I zero-location errors: moving one zero
    by a chordal delta changes the probability by about 2 P delta / d(point,
    zero).  Measurement noise alone undersells this, so the separation rule
    must include it.
    """
    base = 0.0
    for zero, err in zip(cands.fixed_zeros, cands.fixed_zero_errors):
        if err > 0.0:
            base += err / max(chordal_distance(point, zero), 1e-3)
    if not cands.ambiguous_options:
        return 2.0 * np.asarray(preds) * base
    ea = np.empty(len(cands.ambiguous_options))
    eb = np.empty(len(cands.ambiguous_options))
    mult = np.empty(len(cands.ambiguous_options))
    for k, branch in enumerate(cands.ambiguous_options):
        mult[k] = branch.multiplicity
        if branch.location_error > 0.0:
            ea[k] = branch.location_error / max(chordal_distance(point, branch.first), 1e-3)
            eb[k] = branch.location_error / max(chordal_distance(point, branch.second), 1e-3)
        else:
            ea[k] = eb[k] = 0.0
    signs = cands.signs_matrix
    acc = base + signs @ ea + (mult[None, :] - signs) @ eb
    return 2.0 * np.asarray(preds) * acc


def _separated(oracle: MeasurementOracle, preds, sigmas) -> bool:
    return _separation_margin(oracle, preds, sigmas) >= 1.0


def _separation_margin(oracle: MeasurementOracle, preds, sigmas) -> float:
    """Worst pairwise ratio of prediction gap to the required separation.

    The required separation is subadditive along a chain of predictions, so
    the worst ratio is always attained by neighbours in sorted order; only
    those are checked.
    """
    p = np.asarray(preds, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if len(p) < 2:
        return math.inf
    order = np.argsort(p)
    p = p[order]
    s = s[order]
    if oracle.exact:
        se = np.zeros_like(p)
    else:
        se = np.maximum(np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / oracle.shots),
                        1.0 / oracle.shots)
    gap = np.diff(p)
    need = 5.0 * np.maximum(se[1:], se[:-1]) + 3.0 * (s[1:] + s[:-1])
    need = np.maximum(need, EXACT_SEPARATION)
    return float(np.min(gap / need))


def _probe_vanishes(oracle: MeasurementOracle, point: PhasePoint,
                    floor: float = 0.0) -> bool:
    """Query a putative zero direction and test whether the value vanishes.

    ``floor`` raises the vanishing cut above the level that the zero's own
    location error can produce at the probe (relevant under shot noise).
    """
    value = oracle.query(point_to_direction(point))
    if oracle.exact:
        return value < max(EXACT_VANISH_THRESHOLD, floor)
    thr = max(3.0 / oracle.shots, floor)
    if thr <= value < 10.0 * thr:
        raise InconclusiveProbeError(
            f"probe value {value:.3e} inside dead band [{thr:.1e}, {10*thr:.1e})"
        )
    return value < thr


def _select_by_prediction(cands: CandidateSet, indices, oracle: MeasurementOracle,
                          directions) -> PureState:
    """Query one direction where the given candidates' predictions separate."""
    indices = list(indices)
    for d in directions:
        point = direction_to_point(d)
        all_preds = cands.predictions(point)
        preds = all_preds[indices]
        sigmas = _prediction_sigmas(cands, point, all_preds)[indices]
        if _separated(oracle, preds, sigmas):
            measured = oracle.query(d)
            best = int(np.argmin(np.abs(preds - measured)))
            return cands.candidates[indices[best]]
    raise RetriesExhaustedError("no direction separated the candidate predictions")


def _vanish_floor(cands: CandidateSet, pair_index: int, at_first: bool) -> float:
    """Spurious probability the pair's own location error produces at its probe.

    Near the probed option the opposite-branch candidates take a value set by
    the local curvature; the same curvature times the squared location error
    bounds what noise alone can produce at the true zero.
    """
    branch = cands.ambiguous_options[pair_index]
    if branch.location_error <= 0.0:
        return 0.0
    probe = branch.first if at_first else branch.second
    other = branch.second if at_first else branch.first
    separation = chordal_distance(branch.first, branch.second)
    if separation <= 0.0:
        return 0.0
    # A candidate holding every copy on the opposite branch sees the probe at
    # distance `separation`; rescale its value to the location-error scale.
    want = 0 if at_first else branch.multiplicity
    ref = None
    for cand, signs in zip(cands.candidates, cands.pair_signs):
        if signs[pair_index] == want:
            ref = cand
            break
    if ref is None:
        return 0.0
    curvature = husimi(ref, probe) / separation ** (2 * branch.multiplicity)
    return 25.0 * curvature * branch.location_error ** (2 * branch.multiplicity)


def disambiguate_zero_probe(cands: CandidateSet, oracle: MeasurementOracle) -> PureState:
    """Pick the true branch of each pair by probing putative zero directions.

    The probability of the maximal outcome vanishes exactly at a zero of the
    state, so one query per ambiguous pair decides its branch (two for a
    coincident pair, which may also split between the branches).  Spends at
    most 2s extra queries.
    """
    if not cands.candidates:
        raise ValueError("empty candidate set")
    if len(cands.candidates) == 1:
        return cands.candidates[0]
    decided: list[int | None] = []
    for k, branch in enumerate(cands.ambiguous_options):
        van_a = _probe_vanishes(oracle, branch.first, _vanish_floor(cands, k, True))
        if branch.multiplicity == 1:
            decided.append(1 if van_a else 0)
            continue
        van_b = _probe_vanishes(oracle, branch.second, _vanish_floor(cands, k, False))
        if van_a and not van_b:
            decided.append(branch.multiplicity)
        elif van_b and not van_a:
            decided.append(0)
        elif van_a and van_b:
            decided.append(1 if branch.multiplicity == 2 else None)  # mixed split
        else:
            raise InconclusiveProbeError(
                "neither branch of a coincident pair vanishes"
            )
    undetermined = [k for k, j in enumerate(decided) if j is None]
    if not undetermined:
        key = tuple(decided)
        for cand, signs in zip(cands.candidates, cands.pair_signs):
            if signs == key:
                return cand
        raise RootPairingError("probe pattern matches no enumerated candidate")
    # Coincident pair split in an unknown proportion (multiplicity >= 3):
    # fall back to prediction matching among the remaining candidates.
    remaining = [
        i
        for i, signs in enumerate(cands.pair_signs)
        if all(
            (decided[k] is None
             and 1 <= signs[k] <= cands.ambiguous_options[k].multiplicity - 1)
            or signs[k] == decided[k]
            for k in range(len(decided))
        )
    ]
    if len(remaining) == 1:
        return cands.candidates[remaining[0]]
    directions = (
        d
        for d in fibonacci_directions(256)
        if min(
            (chordal_distance(direction_to_point(d), z) for z in cands.putative_zeros),
            default=1.0,
        )
        >= PROBE_EXCLUSION
    )
    return _select_by_prediction(cands, remaining, oracle, directions)


def _random_direction(rng) -> Direction:
    ct = 1.0 - 2.0 * rng.random()
    return Direction(math.acos(min(1.0, max(-1.0, ct))), 2.0 * math.pi * rng.random())


def _perturb_direction(d: Direction, step: float, rng) -> Direction:
    nx, ny, nz = d.unit_vector
    n = np.array([nx, ny, nz])
    helper = np.array([0.0, 0.0, 1.0]) if abs(nz) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    psi = 2.0 * math.pi * rng.random()
    alpha = 2.0 * math.asin(min(1.0, step))
    t = math.cos(psi) * e1 + math.sin(psi) * e2
    v = math.cos(alpha) * n + math.sin(alpha) * t
    theta = math.acos(min(1.0, max(-1.0, float(v[2]))))
    phi = math.atan2(float(v[1]), float(v[0])) % (2.0 * math.pi)
    return Direction(theta, phi)


def disambiguate_single_probe(cands: CandidateSet, oracle: MeasurementOracle,
                              rng) -> PureState:
    """Decide all branches with one measurement along a generic direction.

    Draws a random direction away from every putative zero, checks that the
    candidate predictions separate pairwise (the generic situation), then
    queries once and keeps the candidate nearest the measured value.
    Retries with perturbed or fresh directions are classical: only the final
    query costs a measurement.
    """
    if not cands.candidates:
        raise ValueError("empty candidate set")
    if len(cands.candidates) == 1:
        return cands.candidates[0]
    zeros = cands.putative_zeros
    current: Direction | None = None
    fallback: tuple[float, Direction, np.ndarray] | None = None
    for attempt in range(MAX_PROBE_ATTEMPTS):
        if attempt % 6 == 0 or current is None:
            current = _random_direction(rng)
        else:
            current = _perturb_direction(current, PERTURB_STEP, rng)
        point = direction_to_point(current)
        if zeros and min(chordal_distance(point, z) for z in zeros) < PROBE_EXCLUSION:
            continue
        preds = cands.predictions(point)
        sigmas = _prediction_sigmas(cands, point, preds)
        margin = _separation_margin(oracle, preds, sigmas)
        if margin >= 1.0:
            measured = oracle.query(current)
            best = int(np.argmin(np.abs(preds - measured)))
            return cands.candidates[best]
        if fallback is None or margin > fallback[0]:
            fallback = (margin, current, preds)
    if oracle.exact or fallback is None:
        raise RetriesExhaustedError(
            f"no separating probe direction found in {MAX_PROBE_ATTEMPTS} attempts"
        )
    # Under shot noise some candidate pairs may be indistinguishable at any
    # direction (their states differ below the Step I noise floor); measure
    # at the best-separated direction seen and keep the nearest prediction.
    # The fidelity penalty of a wrong choice is bounded by that same floor.
    _, direction, preds = fallback
    measured = oracle.query(direction)
    best = int(np.argmin(np.abs(preds - measured)))
    return cands.candidates[best]


# ---------------------------------------------------------------------------
# the full two-step procedure


@dataclass(frozen=True)
class ReconstructConfig:
    """Options for a reconstruction run."""

    nodes: NodeSet | None = None
    step_two: str = "zero-probe"  # "zero-probe" | "single-probe"
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    """Everything a reconstruction run produced."""

    chosen: PureState
    candidates_considered: int
    zero_pairs: tuple
    infinity_count: int
    node_set: NodeSet
    measurements_used: int
    condition_estimate: float
    method: str
    fidelity_vs_truth: float | None = None


def reconstruct(oracle: MeasurementOracle, spin: Spin,
                config: ReconstructConfig | None = None) -> ReconstructionReport:
    """Run Step I and the chosen Step II against a measurement oracle.

    Queries the 4s+1 node directions, inverts for the polynomial
    coefficients, extracts the zero pairs, enumerates the compatible states,
    and disambiguates.  The single-probe method falls back to zero probing
    when no separating direction exists.
    """
    if spin.twos < 1:
        raise ValueError("reconstruction needs twos >= 1")
    config = config or ReconstructConfig()
    if config.step_two not in ("zero-probe", "single-probe"):
        raise ValueError(f"unknown Step II method {config.step_two!r}")
    nodes = config.nodes if config.nodes is not None else default_line_nodes(spin)
    if nodes.spin != spin:
        raise ValueError("node set spin does not match")
    probs = np.array([oracle.query(point_to_direction(p)) for p in nodes.points])
    if oracle.exact:
        rhs_error = None
    else:
        rhs_error = np.sqrt(np.clip(probs * (1.0 - probs), 0.0, None) / oracle.shots)
        rhs_error = np.maximum(rhs_error, 1.0 / oracle.shots)
    coeffs = solve_coefficients(nodes, probs, rhs_error=rhs_error)
    if coeffs.basis == "line":
        pairs, inf_count = coefficient_roots(coeffs)
    else:
        pairs, inf_count = equator_pairs(coeffs), 0
    cands = enumerate_candidates(pairs, inf_count, spin, nodes.geometry)
    method = config.step_two
    if method == "single-probe":
        rng = np.random.default_rng([config.seed, 0x51])
        try:
            chosen = disambiguate_single_probe(cands, oracle, rng)
        except RetriesExhaustedError:
            chosen = disambiguate_zero_probe(cands, oracle)
            method = "zero-probe"
    else:
        chosen = disambiguate_zero_probe(cands, oracle)
    return ReconstructionReport(
        chosen=chosen,
        candidates_considered=len(cands),
        zero_pairs=tuple(pairs),
        infinity_count=inf_count,
        node_set=nodes,
        measurements_used=oracle.query_count,
        condition_estimate=coeffs.condition_estimate,
        method="stepII_zero_probe" if method == "zero-probe" else "stepII_single_probe",
    )


# ---------------------------------------------------------------------------
# direct zero search


def fibonacci_directions(n: int) -> list[Direction]:
    """n nearly uniform directions from the golden-angle spiral."""
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    out = []
    for i in range(n):
        z = 1.0 - (2.0 * i + 1.0) / n
        theta = math.acos(min(1.0, max(-1.0, z)))
        phi = (2.0 * math.pi * i / golden) % (2.0 * math.pi)
        out.append(Direction(theta, phi))
    return out


def _refine_minimum(oracle: MeasurementOracle, d: Direction) -> tuple[Direction, float]:
    """Derivative-free local refinement of a probability minimum."""

    def objective(x):
        return oracle.query(Direction(x[0], x[1]))

    res = minimize(
        objective,
        np.array([d.theta, d.phi]),
        method="Nelder-Mead",
        options={
            "xatol": 1e-12,
            "fatol": 1e-30,
            "maxiter": 600,
            "initial_simplex": np.array(
                [
                    [d.theta, d.phi],
                    [d.theta + 0.05, d.phi],
                    [d.theta, d.phi + 0.05],
                ]
            ),
        },
    )
    refined = Direction(float(res.x[0]), float(res.x[1]))
    return refined, float(res.fun)


def _midpoint_direction(a: PhasePoint, b: PhasePoint) -> Direction:
    """Spherical midpoint of two phase-plane points (assumed non-antipodal)."""
    va = np.array(_embed_point(a))
    vb = np.array(_embed_point(b))
    m = va + vb
    m /= np.linalg.norm(m)
    theta = math.acos(min(1.0, max(-1.0, float(m[2]))))
    phi = math.atan2(float(m[1]), float(m[0])) % (2.0 * math.pi)
    return Direction(theta, phi)


def _embed_point(p: PhasePoint) -> tuple[float, float, float]:
    d = point_to_direction(p)
    return d.unit_vector


def _compositions(total: int, parts: int):
    """All ways to write total as `parts` positive integers (ordered)."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def zero_search(oracle: MeasurementOracle, spin: Spin, *,
                grid_per_zero: int = 400) -> ZeroSet:
    """Locate the 2s zeros of the oracle's probability directly.

    Scans a golden-angle lattice (at least 400 points per zero), refines the
    best separated minima with Nelder-Mead, and resolves coincident zeros by
    deflation: candidate multiplicity assignments are expanded into states
    and checked against fresh oracle values.  Raises ZeroSearchError when
    fewer basins than zeros are found and no assignment survives the check.
    """
    if spin.twos < 1:
        raise ValueError("zero search needs twos >= 1")
    need = spin.twos
    value_tol = 1e-10 if oracle.exact else max(1e-10, 5.0 / oracle.shots)
    # The rebuilt-state check discriminates multiplicity assignments, whose
    # predictions differ at order one; zero-location noise (worst near
    # high-multiplicity zeros, where the evaluation floor limits resolution)
    # keeps the true assignment's residual well below this.
    check_tol = 1e-3 if oracle.exact else max(1e-3, 8.0 * math.sqrt(0.25 / oracle.shots))

    def attempt(n_grid: int) -> ZeroSet | None:
        dirs = fibonacci_directions(n_grid)
        vals = [oracle.query(d) for d in dirs]
        spacing = math.sqrt(4.0 * math.pi / n_grid)
        sep = math.sin(min(math.pi / 2, 1.5 * spacing) / 2.0)
        order = np.argsort(vals)
        seeds: list[Direction] = []
        for idx in order:
            p = direction_to_point(dirs[idx])
            if all(
                chordal_distance(p, direction_to_point(s)) > sep for s in seeds
            ):
                seeds.append(dirs[idx])
            if len(seeds) >= need + 4:
                break
        refined: list[tuple[PhasePoint, float]] = []
        for s in seeds:
            d, v = _refine_minimum(oracle, s)
            if v <= value_tol:
                refined.append((direction_to_point(d), v))

        # Cluster minima that converged to the same zero.  Near a zero of
        # multiplicity m the probability is d^{2m}-flat and bottoms out at
        # the evaluation noise floor, so converged locations scatter;
        # whether two minima share a zero is decided by measuring the
        # midpoint, which only stays at the floor inside one zero cluster.
        clusters: list[list[tuple[PhasePoint, float]]] = []
        for p, v in sorted(refined, key=lambda t: t[1]):
            home = None
            for cluster in clusters:
                q, vq = cluster[0]
                d = chordal_distance(p, q)
                if d <= 1e-9:
                    home = cluster
                    break
                if d <= 0.05:
                    mid = _midpoint_direction(p, q)
                    if oracle.query(mid) <= max(value_tol, 1e3 * max(v, vq)):
                        home = cluster
                        break
            if home is None:
                clusters.append([(p, v)])
            else:
                home.append((p, v))
        clusters = clusters[:need]
        if not clusters:
            return None

        # The scatter of a cluster is roughly symmetric about the true zero,
        # so the spherical centroid localizes it far better than any member.
        zeros: list[PhasePoint] = []
        for cluster in clusters:
            if len(cluster) == 1:
                zeros.append(cluster[0][0])
                continue
            vecs = np.array([_embed_point(p) for p, _ in cluster])
            m = vecs.mean(axis=0)
            m /= np.linalg.norm(m)
            theta = math.acos(min(1.0, max(-1.0, float(m[2]))))
            phi = math.atan2(float(m[1]), float(m[0])) % (2.0 * math.pi)
            centroid = direction_to_point(Direction(theta, phi))
            if oracle.query(Direction(theta, phi)) <= value_tol:
                zeros.append(centroid)
            else:
                zeros.append(cluster[0][0])
        k = len(zeros)
        assignments = [(1,) * need] if k == need else list(_compositions(need, k))
        if len(assignments) > 5000:
            return None
        check_dirs = [
            _random_direction(np.random.default_rng([479001599, i])) for i in range(2 * need + 5)
        ]
        check_vals = [oracle.query(d) for d in check_dirs]
        scored: list[tuple[float, tuple[int, ...]]] = []
        for mults in assignments:
            multiset = []
            for z, m in zip(zeros, mults):
                multiset.extend([z] * m)
            state = state_from_zeros(ZeroSet(spin, tuple(multiset)))
            resid = max(
                abs(husimi(state, direction_to_point(d)) - v)
                for d, v in zip(check_dirs, check_vals)
            )
            scored.append((resid, mults))
        scored.sort(key=lambda t: t[0])
        best_resid, best_mults = scored[0]
        dominated = len(scored) == 1 or scored[1][0] >= 10.0 * best_resid
        if best_resid > check_tol or not dominated:
            return None
        multiset = []
        for z, m in zip(zeros, best_mults):
            multiset.extend([z] * m)
        state = state_from_zeros(ZeroSet(spin, tuple(multiset)))
        return ZeroSet(spin, tuple(multiset), scale=float(abs(state.amplitudes[-1])))

    n_grid = max(grid_per_zero * need, 400)
    result = attempt(n_grid)
    if result is None:
        result = attempt(4 * n_grid)
    if result is None:
        raise ZeroSearchError(
            "could not account for all zeros: fewer basins than zeros and "
            "no multiplicity assignment matched the oracle"
        )
    return result


# ---------------------------------------------------------------------------
# node-ambiguity experiment


@dataclass(frozen=True)
class AmbiguityStats:
    """Outcome of the arbitrary-node ambiguity probe."""

    trials: int
    node_strategy: str
    consistent_counts: tuple[int, ...]
    unique_fraction: float | None
    mean_count: float | None


def ambiguity_experiment(spin: Spin, node_strategy: str, trials: int,
                         rng) -> AmbiguityStats:
    """Count how many reflection candidates survive at random node points.

    For each trial a random state and 4s+1 nodes are drawn; all 2^{2s}
    states obtained by conjugating subsets of the true zeros are tested for
    reproducing every node probability within 1e-8.  On the standard line
    nodes all of them do; the experiment probes whether arbitrary distinct
    points remove the ambiguity.  This is a diagnostic with no asserted
    outcome.
    """
    if node_strategy not in ("random_points", "line"):
        raise ValueError(f"unknown node strategy {node_strategy!r}")
    if spin.twos < 1:
        raise ValueError("the experiment needs twos >= 1")
    n = 2 * spin.twos + 1
    counts: list[int] = []
    for _ in range(max(0, trials)):
        state = random_state(spin, rng)
        if node_strategy == "line":
            points = [p for p in default_line_nodes(spin).points]
        else:
            points = []
            while len(points) < n:
                cand = direction_to_point(_random_direction(rng))
                if all(chordal_distance(cand, q) > NODE_DISTINCT_TOL for q in points):
                    points.append(cand)
        targets = [husimi(state, p) for p in points]
        zs = zeros_of(state)
        consistent: list[PureState] = []
        for mask in itertools.product((False, True), repeat=spin.twos):
            zeros = tuple(
                z.conjugate() if flip else z for z, flip in zip(zs.zeros, mask)
            )
            cand = state_from_zeros(ZeroSet(spin, zeros))
            if all(
                abs(husimi(cand, p) - t) <= 1e-8 for p, t in zip(points, targets)
            ):
                if all(fidelity(cand, other) < 1.0 - 1e-10 for other in consistent):
                    consistent.append(cand)
        counts.append(len(consistent))
    if not counts:
        return AmbiguityStats(0, node_strategy, (), None, None)
    return AmbiguityStats(
        trials=len(counts),
        node_strategy=node_strategy,
        consistent_counts=tuple(counts),
        unique_fraction=float(np.mean([c == 1 for c in counts])),
        mean_count=float(np.mean(counts)),
    )
