import sys

sys.path.insert(0, "src")
from importlib import util as _u

import numpy as np
from scipy.linalg import lu_factor, lu_solve

_spec = _u.spec_from_file_location("score", "src/spinrecon/core.py")
_m = _u.module_from_spec(_spec)
sys.modules["score"] = _m
_spec.loader.exec_module(_m)
PhasePoint = _m.PhasePoint
Spin = _m.Spin
ZeroSet = _m.ZeroSet
husimi = _m.husimi
polynomial_roots = _m.polynomial_roots
state_from_zeros = _m.state_from_zeros


def solve_refined(M, p, iters=2):
    lu, piv = lu_factor(M)
    x = lu_solve((lu, piv), p)
    Ml = M.astype(np.longdouble)
    pl = p.astype(np.longdouble)
    for _ in range(iters):
        r = (pl - Ml @ x.astype(np.longdouble)).astype(float)
        x = x + lu_solve((lu, piv), r)
    return x


rng = np.random.default_rng(3)
for twos in (2, 4, 6):
    n = 2 * twos + 1
    nu = np.arange(n)
    x = (nu + 1) / (n - nu)
    M = np.array([[xv**lam / (1 + xv * xv) ** twos for lam in range(n)] for xv in x])
    worst_split = 0.0
    worst_sigma_ratio = 0.0
    for trial in range(200):
        # one exactly real zero + generic complex zeros
        ureal = rng.uniform(-2.0, 2.0)
        zeros = [PhasePoint(complex(ureal, 0.0))]
        for _ in range(twos - 1):
            zeros.append(PhasePoint(complex(rng.uniform(-2, 2), rng.uniform(0.1, 2) * rng.choice([-1, 1]))))
        st = state_from_zeros(ZeroSet(Spin(twos), tuple(zeros)))
        p = np.array([husimi(st, PhasePoint(complex(xv))) for xv in x])
        c = solve_refined(M, p)
        roots = polynomial_roots(c.astype(complex))
        # find the roots nearest the real zero
        near = sorted(roots, key=lambda r: abs(r - ureal))[:2]
        split = max(abs(r.imag) for r in near)
        worst_split = max(worst_split, split)
        # per-root sigma estimate: eps_c * S(r) / |p'(r)|
        eps_c = np.linalg.norm(np.linalg.inv(M), 1) * 1e-14 * np.max(np.abs(p)) + \
            1e-16 * np.linalg.norm(M, 1) * np.linalg.norm(np.linalg.inv(M), 1) * np.max(np.abs(c))
        deriv = c[1:] * np.arange(1, n)
        r0 = near[0]
        S = sum(abs(r0) ** k for k in range(n))
        dp = abs(np.polyval(deriv[::-1], r0))
        sigma = eps_c * S / max(dp, 1e-300)
        if split > 0:
            worst_sigma_ratio = max(worst_sigma_ratio, split / max(3 * sigma, 1e-300))
    print(f"twos={twos}: worst |Im| split of true real zero = {worst_split:.3e}; "
          f"worst split/(3 sigma) = {worst_sigma_ratio:.3f}")
