"""Spin states, coherent states, Husimi values, and the zero representation.

A pure state of a spin with magnitude s lives in a (2s+1)-dimensional space.
Amplitudes are stored highest projection first: entry k holds the component
along the projection value s-k, so entry 0 belongs to +s and entry 2s to -s.
Directions on the sphere map to points of the complex plane by stereographic
projection z = tan(theta/2) * exp(i*phi), with theta = pi sent to the point
at infinity.  The overlap of a state with the coherent-state family is a
polynomial of degree 2s in z, so every ray is equivalently described by the
multiset of its 2s polynomial roots (infinity allowed).
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Spin",
    "Direction",
    "PhasePoint",
    "INFINITY",
    "PureState",
    "SpinMatrices",
    "ZeroSet",
    "DegenerateStateError",
    "chordal_distance",
    "coherent_state",
    "coherent_state_by_rotation",
    "direction_to_point",
    "fidelity",
    "husimi",
    "husimi_grid",
    "overlap",
    "point_to_direction",
    "random_state",
    "spin_matrices",
    "sqrt_binomials",
    "state_from_zeros",
    "time_reverse",
    "zeros_of",
]

TWO_PI = 2.0 * math.pi

# Relative cutoff below which an amplitude does not qualify as the phase
# reference of the canonical form.  Dividing by the phase of an amplitude
# near the rounding floor would rotate the whole vector by garbage.
_CANONICAL_CUT = 1e-3

# Leading polynomial coefficients below this (relative to the largest one)
# are treated as exact zeros, i.e. roots at infinity.
_DEFICIENCY_CUT = 1e-10


class DegenerateStateError(ValueError):
    """All amplitudes numerically vanish; the input vector is corrupted."""


@dataclass(frozen=True, order=True)
class Spin:
    """Spin magnitude stored exactly as the integer 2s."""

    twos: int

    def __post_init__(self) -> None:
        if not isinstance(self.twos, (int, np.integer)) or self.twos < 0:
            raise ValueError(f"twos must be a non-negative integer, got {self.twos!r}")
        object.__setattr__(self, "twos", int(self.twos))

    @classmethod
    def from_s(cls, s: float) -> "Spin":
        twos = round(2 * s)
        if abs(2 * s - twos) > 1e-12:
            raise ValueError(f"spin magnitude must be a half-integer, got {s!r}")
        return cls(twos)

    @property
    def s(self) -> float:
        return self.twos / 2.0

    @property
    def dim(self) -> int:
        return self.twos + 1

    def __str__(self) -> str:
        return f"{self.twos}/2" if self.twos % 2 else str(self.twos // 2)


def _canonical_angles(theta: float, phi: float) -> tuple[float, float]:
    """Fold (theta, phi) into theta in [0, pi], phi in [0, 2*pi)."""
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta > math.pi:
        # Walk over the pole: the antipodal meridian continues the path.
        theta = TWO_PI - theta
        phi = phi + math.pi
    phi = math.fmod(phi, TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    if theta == 0.0 or theta == math.pi:
        phi = 0.0
    return theta, phi


@dataclass(frozen=True)
class Direction:
    """A point of the unit sphere, polar angle theta and azimuth phi."""

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta, phi = _canonical_angles(float(self.theta), float(self.phi))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @property
    def unit_vector(self) -> tuple[float, float, float]:
        st = math.sin(self.theta)
        return (st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta))


@dataclass(frozen=True)
class PhasePoint:
    """Point of the stereographic plane: a finite complex z or infinity."""

    z: complex = 0j
    infinite: bool = False

    def __post_init__(self) -> None:
        if self.infinite:
            object.__setattr__(self, "z", 0j)
        else:
            object.__setattr__(self, "z", complex(self.z))

    @property
    def finite(self) -> bool:
        return not self.infinite

    def inverse_conjugate(self) -> "PhasePoint":
        """Image under z -> 1/conj(z), the inversion across the unit circle."""
        if self.infinite:
            return PhasePoint(0j)
        if self.z == 0:
            return INFINITY
        return PhasePoint(1.0 / self.z.conjugate())

    def conjugate(self) -> "PhasePoint":
        if self.infinite:
            return INFINITY
        return PhasePoint(self.z.conjugate())

    def __str__(self) -> str:
        return "inf" if self.infinite else format(self.z, "g")


INFINITY = PhasePoint(infinite=True)


def _embed(p: PhasePoint) -> tuple[float, float, float]:
    """Unit-sphere embedding of a phase-plane point (overflow safe)."""
    if p.infinite:
        return (0.0, 0.0, -1.0)
    t = p.z.real * p.z.real + p.z.imag * p.z.imag
    if math.isinf(t):
        return (0.0, 0.0, -1.0)
    w = 1.0 + t
    return (2.0 * p.z.real / w, 2.0 * p.z.imag / w, -1.0 + 2.0 / w)


def chordal_distance(a: PhasePoint, b: PhasePoint) -> float:
    """Distance |a-b| / sqrt((1+|a|^2)(1+|b|^2)), finite at infinity.

    Equals sin(angle/2) for the corresponding sphere directions, so it ranges
    over [0, 1] with 1 for antipodal points.
    """
    xa, ya, za = _embed(a)
    xb, yb, zb = _embed(b)
    return 0.5 * math.sqrt((xa - xb) ** 2 + (ya - yb) ** 2 + (za - zb) ** 2)


def direction_to_point(d: Direction) -> PhasePoint:
    """Stereographic image z = tan(theta/2) e^{i phi}; the south pole maps to infinity."""
    if d.theta == math.pi:
        return INFINITY
    r = math.tan(0.5 * d.theta)
    return PhasePoint(r * cmath.exp(1j * d.phi))


def point_to_direction(p: PhasePoint) -> Direction:
    """Inverse stereographic map; infinity returns the south pole (pi, 0)."""
    if p.infinite:
        return Direction(math.pi, 0.0)
    return Direction(2.0 * math.atan(abs(p.z)), cmath.phase(p.z) % TWO_PI)


@functools.lru_cache(maxsize=64)
def sqrt_binomials(twos: int) -> np.ndarray:
    """Square roots of the binomial coefficients C(2s, k), k = 0..2s.

    The integer coefficients are exact (arbitrary precision), so the only
    rounding is the final square root.  Cached per dimension.
    """
    w = np.sqrt(np.array([math.comb(twos, k) for k in range(twos + 1)], dtype=float))
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized pure spin state; amplitudes[k] is the component along s-k."""

    spin: Spin
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).copy()
        if amps.shape != (self.spin.dim,):
            raise ValueError(
                f"expected {self.spin.dim} amplitudes for twos={self.spin.twos}, "
                f"got shape {amps.shape}"
            )
        norm = float(np.linalg.norm(amps))
        if not norm > 0.0 or not np.isfinite(norm):
            raise DegenerateStateError("state vector has no usable norm")
        amps /= norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, spin: Spin, amplitudes: np.ndarray) -> "PureState":
        """Wrap amplitudes already known to be normalized (no re-validation)."""
        state = object.__new__(cls)
        amplitudes.setflags(write=False)
        object.__setattr__(state, "spin", spin)
        object.__setattr__(state, "amplitudes", amplitudes)
        return state

    def canonical(self) -> "PureState":
        """Fix the global phase: first non-negligible amplitude real positive.

        Amplitudes below 1e-3 of the largest one are skipped as phase
        reference; their computed phase is dominated by rounding noise.
        """
        mags = np.abs(self.amplitudes)
        cut = _CANONICAL_CUT * float(mags.max())
        k = int(np.argmax(mags >= cut))
        phase = self.amplitudes[k] / mags[k]
        return PureState._trusted(self.spin, self.amplitudes / phase)


def fidelity(a: PureState, b: PureState) -> float:
    """Squared overlap |<a|b>|^2 of two states of the same spin."""
    if a.spin != b.spin:
        raise ValueError(f"spin mismatch: {a.spin} vs {b.spin}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def random_state(spin: Spin, rng: np.random.Generator) -> PureState:
    """Haar-uniform random ray: normalized complex-normal amplitudes."""
    re = rng.standard_normal(spin.dim)
    im = rng.standard_normal(spin.dim)
    return PureState(spin, re + 1j * im).canonical()


@dataclass(frozen=True, eq=False)
class SpinMatrices:
    """The three spin components as Hermitian matrices in the z basis."""

    spin: Spin
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin_matrices(spin: Spin) -> SpinMatrices:
    """Build sx, sy, sz from the ladder action on projection eigenstates.

    The raising operator sends the component at projection mu to mu+1 with
    weight sqrt(s(s+1) - mu(mu+1)); sx = (s+ + s-)/2, sy = (s+ - s-)/(2i).
    """
    s = spin.s
    mu = s - np.arange(spin.dim)
    sp = np.zeros((spin.dim, spin.dim), dtype=complex)
    if spin.dim > 1:
        coup = np.sqrt(s * (s + 1.0) - mu[1:] * (mu[1:] + 1.0))
        sp[np.arange(spin.dim - 1), np.arange(1, spin.dim)] = coup
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = (sp - sm) / 2j
    sz = np.diag(mu).astype(complex)
    for m in (sx, sy, sz):
        m.setflags(write=False)
    return SpinMatrices(spin, sx, sy, sz)


def coherent_state(spin: Spin, p: PhasePoint) -> PureState:
    """Maximal-projection state along the direction with stereographic image p.

    Amplitudes are proportional to sqrt(C(2s,k)) z^k; the point at infinity
    gives the lowest-projection basis state.
    """
    amps = np.zeros(spin.dim, dtype=complex)
    if p.infinite:
        amps[-1] = 1.0
        return PureState(spin, amps)
    z = p.z
    k = np.arange(spin.dim)
    w = sqrt_binomials(spin.twos)
    r = abs(z)
    if r <= 1.0:
        amps = w * z**k / (1.0 + r * r) ** spin.s
    else:
        # Scale out |z|^{2s} so large moduli neither overflow nor lose the tail.
        unit = z / r
        amps = w * unit**k * r ** (k.astype(float) - spin.twos)
        amps /= (1.0 + 1.0 / (r * r)) ** spin.s
    return PureState(spin, amps)


def coherent_state_by_rotation(spin: Spin, d: Direction) -> PureState:
    """Coherent state built by rotating the top basis state.

    Applies exp(-i theta (-sin(phi) sx + cos(phi) sy)) to the highest
    projection state, via eigendecomposition of the Hermitian generator.
    Agrees with coherent_state at the stereographic image of d.
    """
    mats = spin_matrices(spin)
    gen = -math.sin(d.phi) * mats.sx + math.cos(d.phi) * mats.sy
    w, v = np.linalg.eigh(gen)
    column = v.conj().T[:, 0]
    amps = v @ (np.exp(-1j * d.theta * w) * column)
    return PureState(spin, amps)


def _overlap_coefficients(state: PureState) -> np.ndarray:
    """Coefficients a_k of the overlap polynomial sum_k a_k z^k."""
    return sqrt_binomials(state.spin.twos) * state.amplitudes.conj()


def overlap(state: PureState, p: PhasePoint) -> complex:
    """Projection of the state onto the coherent state at p.

    For finite z this is (1+|z|^2)^{-s} sum_k sqrt(C(2s,k)) conj(psi_{s-k}) z^k.
    The point at infinity returns conj(psi_{-s}), the limiting value of the
    leading coefficient (the modulus limit; the phase is conventional).
    """
    if p.infinite:
        return complex(state.amplitudes[-1].conjugate())
    a = _overlap_coefficients(state)
    z = p.z
    r = abs(z)
    if r <= 1.0:
        acc = 0j
        for ak in a[::-1]:
            acc = acc * z + ak
        return complex(acc / (1.0 + r * r) ** state.spin.s)
    # Scale out |z|^{2s}: every term a_k (z/|z|)^k |z|^{k-2s} stays bounded.
    unit = z / r
    twos = state.spin.twos
    acc = sum(a[k] * unit**k * r ** float(k - twos) for k in range(twos + 1))
    return complex(acc / (1.0 + 1.0 / (r * r)) ** state.spin.s)


def husimi(state: PureState, p: PhasePoint) -> float:
    """Squared modulus of the coherent-state overlap; a value in [0, 1]."""
    return float(abs(overlap(state, p)) ** 2)


def husimi_grid(state: PureState, z: np.ndarray) -> np.ndarray:
    """Husimi values at an array of finite complex points (vectorized)."""
    z = np.asarray(z, dtype=complex)
    a = _overlap_coefficients(state)
    out = np.empty(z.shape, dtype=complex)
    r = np.abs(z)
    small = r <= 1.0
    s = state.spin.s
    twos = state.spin.twos
    if np.any(small):
        zs = z[small]
        acc = np.zeros(zs.shape, dtype=complex)
        for ak in a[::-1]:
            acc = acc * zs + ak
        out[small] = acc / (1.0 + np.abs(zs) ** 2) ** s
    if np.any(~small):
        zb = z[~small]
        rb = np.abs(zb)
        unit = zb / rb
        acc = np.zeros(zb.shape, dtype=complex)
        for k in range(twos + 1):
            acc += a[k] * unit**k * rb ** float(k - twos)
        out[~small] = acc / (1.0 + 1.0 / rb**2) ** s
    return np.abs(out) ** 2


def husimi_states(amplitudes: np.ndarray, twos: int, p: PhasePoint) -> np.ndarray:
    """Husimi values of many states (matrix rows) at one phase point."""
    amplitudes = np.asarray(amplitudes)
    if p.infinite:
        return np.abs(amplitudes[:, -1]) ** 2
    w = sqrt_binomials(twos)
    coeff = amplitudes.conj() * w[None, :]
    z = p.z
    r = abs(z)
    k = np.arange(twos + 1)
    if r <= 1.0:
        vals = coeff @ (z**k) / (1.0 + r * r) ** (twos / 2.0)
    else:
        unit = z / r
        vals = coeff @ (unit**k * r ** (k.astype(float) - twos))
        vals /= (1.0 + 1.0 / (r * r)) ** (twos / 2.0)
    return np.abs(vals) ** 2


def time_reverse(state: PureState) -> PureState:
    """Anti-unitary time reversal: component at -mu gets (-1)^{s-mu} conj(psi_mu).

    In index form: out[2s-k] = (-1)^k conj(in[k]).  Applying it twice returns
    (-1)^{2s} times the identity.
    """
    signs = np.where(np.arange(state.spin.dim) % 2 == 0, 1.0, -1.0)
    return PureState(state.spin, (signs * state.amplitudes.conj())[::-1])


@dataclass(frozen=True, eq=False)
class ZeroSet:
    """Multiset of the 2s overlap-polynomial roots of a state.

    scale keeps |psi_{-s}| for diagnostics; it is redundant once the state is
    normalized.  Zeros at infinity stand for vanishing top amplitudes.
    """

    spin: Spin
    zeros: tuple[PhasePoint, ...]
    scale: float = 0.0

    def __post_init__(self) -> None:
        zeros = tuple(self.zeros)
        if len(zeros) != self.spin.twos:
            raise ValueError(
                f"expected {self.spin.twos} zeros for twos={self.spin.twos}, "
                f"got {len(zeros)}"
            )
        object.__setattr__(self, "zeros", zeros)

    @property
    def infinity_count(self) -> int:
        return sum(1 for p in self.zeros if p.infinite)


def _polish_roots(coeffs: np.ndarray, roots: np.ndarray, steps: int = 2) -> np.ndarray:
    """Newton-polish roots of sum_k coeffs[k] z^k (ascending coefficients)."""
    deriv = coeffs[1:] * np.arange(1, len(coeffs))
    scale = float(np.max(np.abs(coeffs)))
    out = roots.copy()
    for i, r in enumerate(out):
        for _ in range(steps):
            pv = 0j
            for c in coeffs[::-1]:
                pv = pv * r + c
            dv = 0j
            for c in deriv[::-1]:
                dv = dv * r + c
            if abs(dv) <= 1e-30 * scale:
                break
            step = pv / dv
            if not (cmath.isfinite(step)):
                break
            r = r - step
        out[i] = r
    return out


def polynomial_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of sum_k coeffs[k] z^k via the companion matrix, Newton polished.

    Coefficients are ascending; the leading one must be nonzero.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if len(coeffs) <= 1:
        return np.zeros(0, dtype=complex)
    raw = np.roots(coeffs[::-1])
    return _polish_roots(coeffs, raw)


def zeros_of(state: PureState) -> ZeroSet:
    """Root multiset of the overlap polynomial, with infinity for missing degree.

    Top coefficients below 1e-10 of the largest are treated as exact zeros
    and produce roots at infinity.  For a root of multiplicity m the returned
    cluster spreads like eps^(1/m) around the true location (inherent to
    floating-point root finding); rebuilding the state from the cluster is
    still accurate because the spread averages out.
    """
    a = _overlap_coefficients(state)
    amax = float(np.max(np.abs(a)))
    if amax <= 0.0:
        raise DegenerateStateError("all overlap coefficients vanish")
    deg = state.spin.twos
    while deg > 0 and abs(a[deg]) < _DEFICIENCY_CUT * amax:
        deg -= 1
    if deg == 0 and abs(a[0]) < _DEFICIENCY_CUT * amax:
        raise DegenerateStateError("all overlap coefficients below threshold")
    inf_count = state.spin.twos - deg
    finite = polynomial_roots(a[: deg + 1])
    zeros = tuple(PhasePoint(r) for r in sorted(finite, key=lambda w: (w.real, w.imag)))
    zeros += (INFINITY,) * inf_count
    return ZeroSet(state.spin, zeros, scale=float(abs(state.amplitudes[-1])))


def state_from_zeros(zs: ZeroSet) -> PureState:
    """State whose overlap polynomial has exactly the given root multiset.

    Expands the product over finite zeros (each infinity lowers the degree),
    maps coefficients back to amplitudes, normalizes, and canonicalizes the
    phase.  Left inverse of zeros_of.
    """
    coeffs = expand_roots([p.z for p in zs.zeros if p.finite])
    amps = np.zeros(zs.spin.dim, dtype=complex)
    w = sqrt_binomials(zs.spin.twos)
    amps[: len(coeffs)] = coeffs.conj() / w[: len(coeffs)]
    mags = np.abs(amps)
    norm = float(np.linalg.norm(amps))
    if not norm > 0.0:
        raise DegenerateStateError("zero multiset produced a null vector")
    k = int(np.argmax(mags >= _CANONICAL_CUT * float(mags.max())))
    amps *= mags[k] / (amps[k] * norm)
    return PureState._trusted(zs.spin, amps)


def expand_roots(roots) -> np.ndarray:
    """Ascending coefficients of prod (z - r); rescaled if huge roots appear."""
    coeffs = np.array([1.0 + 0j])
    for root in roots:
        out = np.empty(len(coeffs) + 1, dtype=complex)
        out[0] = 0.0
        out[1:] = coeffs
        out[:-1] -= root * coeffs
        coeffs = out
        if abs(root) > 1e12:
            coeffs /= float(np.max(np.abs(coeffs)))
    return coeffs


def match_zero_sets(a: ZeroSet, b: ZeroSet) -> float:
    """Largest matched chordal distance under greedy minimal-cost pairing.

    Pairs each zero of a with a distinct zero of b, repeatedly taking the
    globally closest remaining pair; infinity compares through the chordal
    metric.  Returns the worst matched distance (0 for identical multisets).
    """
    if a.spin != b.spin:
        raise ValueError(f"spin mismatch: {a.spin} vs {b.spin}")
    left = list(a.zeros)
    right = list(b.zeros)
    worst = 0.0
    while left:
        best = None
        for i, p in enumerate(left):
            for j, q in enumerate(right):
                d = chordal_distance(p, q)
                if best is None or d < best[0]:
                    best = (d, i, j)
        d, i, j = best
        worst = max(worst, d)
        left.pop(i)
        right.pop(j)
    return worst
