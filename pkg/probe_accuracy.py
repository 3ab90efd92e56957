import sys

sys.path.insert(0, "src")
import numpy as np
from scipy.linalg import lu_factor, lu_solve

from importlib import util as _u

_spec = _u.spec_from_file_location("score", "src/spinrecon/core.py")
_m = _u.module_from_spec(_spec)
sys.modules["score"] = _m
_spec.loader.exec_module(_m)
PhasePoint = _m.PhasePoint
PureState = _m.PureState
Spin = _m.Spin
ZeroSet = _m.ZeroSet
fidelity = _m.fidelity
husimi = _m.husimi
polynomial_roots = _m.polynomial_roots
random_state = _m.random_state
state_from_zeros = _m.state_from_zeros
zeros_of = _m.zeros_of


def solve_plain(M, p):
    return np.linalg.solve(M, p)


def solve_refined(M, p, iters=2):
    lu, piv = lu_factor(M)
    x = lu_solve((lu, piv), p)
    Ml = M.astype(np.longdouble)
    pl = p.astype(np.longdouble)
    for _ in range(iters):
        r = (pl - Ml @ x.astype(np.longdouble)).astype(float)
        x = x + lu_solve((lu, piv), r)
    return x


def chain(state, solver):
    """Full line-geometry Step I + oracle-free 'pick right branch' Step II."""
    twos = state.spin.twos
    n = 2 * twos + 1
    nu = np.arange(n)
    x = (nu + 1) / (n - nu)
    M = np.array([[xv**lam / (1 + xv * xv) ** twos for lam in range(n)] for xv in x])
    p = np.array([husimi(state, PhasePoint(complex(xv))) for xv in x])
    c = solver(M, p)
    # roots of sum c_lam t^lam
    cmax = np.max(np.abs(c))
    deg = n - 1
    while deg > 0 and abs(c[deg]) < 1e-9 * cmax:
        deg -= 1
    roots = polynomial_roots(c[: deg + 1].astype(complex))
    # truth zeros for oracle-free branch pick
    truth = [z.z for z in zeros_of(state).zeros if z.finite]
    ninf = sum(1 for z in zeros_of(state).zeros if z.infinite)
    # pair roots: take those with Im > 0 and their conj partners; choose the
    # branch closer to a truth zero (ideal Step II)
    chosen = []
    used = np.zeros(len(roots), bool)
    rts = list(roots)
    # naive conjugate pairing
    pairs = []
    order = sorted(range(len(rts)), key=lambda i: (rts[i].real, abs(rts[i].imag)))
    rem = [rts[i] for i in order]
    while rem:
        r = rem.pop(0)
        if abs(r.imag) < 1e-8:
            # find nearest real partner
            j = min(range(len(rem)), key=lambda j: abs(rem[j] - r))
            rem.pop(j)
            pairs.append((r.real, 0.0))
        else:
            j = min(range(len(rem)), key=lambda j: abs(rem[j] - r.conjugate()))
            p2 = rem.pop(j)
            u = 0.5 * (r.real + p2.real)
            v = 0.5 * (abs(r.imag) + abs(p2.imag))
            pairs.append((u, v))
    for (u, v) in pairs:
        if v == 0.0:
            chosen.append(complex(u, 0.0))
        else:
            zp, zm = complex(u, v), complex(u, -v)
            dplus = min(abs(zp - t) for t in truth)
            dminus = min(abs(zm - t) for t in truth)
            chosen.append(zp if dplus <= dminus else zm)
    zs = tuple(PhasePoint(z) for z in chosen) + tuple(
        PhasePoint(infinite=True) for _ in range(ninf)
    )
    rec = state_from_zeros(ZeroSet(state.spin, zs))
    return fidelity(state, rec)


rng = np.random.default_rng(7)
for twos in (6, 8, 10):
    for name, solver in (("plain", solve_plain), ("refined", solve_refined)):
        worst = 1.0
        for _ in range(60):
            st = random_state(Spin(twos), rng)
            f = chain(st, solver)
            worst = min(worst, f)
        print(f"twos={twos} solver={name:8s} worst 1-F = {1-worst:.3e}")
