"""Closed forms and direct implementations used as independent references."""

import math

import numpy as np


def couple_l1_norm(w0, w1, theta, p, a):
    """Interpolation norm of a scalar for two weighted copies of R.

    ``K(1, t, a) = |a| min(w0, t w1)``; splitting the integral at
    ``t = w0 / w1`` gives the closed form.
    """
    base = abs(a) * w0 ** (1.0 - theta) * w1**theta
    if math.isinf(p):
        return base
    return base * (1.0 / (theta * p) + 1.0 / ((1.0 - theta) * p)) ** (1.0 / p)


def triple_kernel_integral(th1, th2, p=1.0):
    """``int int min(1, t1, t2)^p (t1^th1 t2^th2)^(-p) dt1/t1 dt2/t2``.

    The three regions where 1, t1 or t2 attains the minimum integrate to
    products of exponentials.
    """
    a1, a2 = p * th1, p * th2
    a0 = p - a1 - a2
    return 1.0 / (a1 * a2) + 1.0 / (a2 * a0) + 1.0 / (a1 * a0)


def lorentz_qp(q, p, values, masses):
    """``||a||_{L^{q,p}}`` by a plain loop over the distribution function."""
    pairs = sorted(zip([abs(float(v)) for v in values], [float(m) for m in masses]), reverse=True)
    levels = []
    for v, m in pairs:
        if v == 0.0:
            continue
        if levels and levels[-1][0] == v:
            levels[-1][1] += m
        else:
            levels.append([v, m])
    if not levels:
        return 0.0
    acc = 0.0
    cum = 0.0
    best = 0.0
    for k, (v, m) in enumerate(levels):
        cum += m
        nxt = levels[k + 1][0] if k + 1 < len(levels) else 0.0
        if math.isinf(p):
            best = max(best, v * cum ** (1.0 / q))
        else:
            # int_nxt^v alpha^(p-1) dalpha * cum^(p/q)
            acc += cum ** (p / q) * (v**p - nxt**p) / p
    if math.isinf(p):
        return best
    return (q * acc) ** (1.0 / p)


def rearrangement_by_definition(a, masses, t):
    """``inf{alpha >= 0 : mu(|a| > alpha) <= t}`` over the candidate alphas."""
    v = np.abs(np.asarray(a, dtype=float))
    masses = np.asarray(masses, dtype=float)
    cands = np.concatenate([[0.0], np.sort(v)])
    for alpha in cands:
        if masses[v > alpha].sum() <= t:
            return float(alpha)
    return float(cands[-1])


def classical_besov(s, p, q, samples):
    """Besov norm with weights 2^(ks) from a dense DFT and the bump written out."""
    x = np.asarray(samples, dtype=complex)
    N = x.size
    n = np.arange(N)
    F = np.exp(-2j * np.pi * np.outer(n, n) / N) / N
    spec = F @ x
    xi = np.where(n < N // 2, n, n - N).astype(float)

    def step(y):
        return np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)

    def profile(y):
        r = np.abs(y)
        return step(2.0 - r) / (step(2.0 - r) + step(r - 1.0))

    J = int(round(math.log2(N))) - 1
    inv = np.conj(F.T) * N
    total = []
    for k in range(J + 1):
        win = profile(xi) if k == 0 else profile(xi / 2.0**k) - profile(xi / 2.0 ** (k - 1))
        piece = inv @ (win * spec)
        mag = np.abs(piece)
        block = mag.max() if math.isinf(p) else np.mean(mag**p) ** (1.0 / p)
        total.append(2.0 ** (k * s) * block)
    total = np.array(total)
    if math.isinf(q):
        return float(total.max())
    return float(np.sum(total**q) ** (1.0 / q))


def dense_dilation(log_phi, t, span=60.0, points=200001):
    """``sup_s phi(ts)/phi(s)`` on a dense log grid."""
    u = math.log(t)
    v = np.linspace(-span, span, points)
    return float(np.exp(np.max(log_phi(u + v) - log_phi(v))))


def k_linear_program(ps, weights, t, a):
    """K(t, a) for spaces with exponents in {1, inf}, solved as a linear program.

    Variables: the parts ``x_j`` (summing to ``a``) and one epigraph bound per
    coordinate (p = 1) or per space (p = inf).
    """
    from scipy.optimize import linprog

    a = np.asarray(a, dtype=float)
    m, d = len(ps), a.size
    n_x = m * d
    bound_sizes = [d if p == 1.0 else 1 for p in ps]
    offsets = np.concatenate([[0], np.cumsum(bound_sizes)]) + n_x
    n_var = int(offsets[-1])
    c = np.zeros(n_var)
    rows, rhs = [], []
    for j, (p, w) in enumerate(zip(ps, weights)):
        w = np.broadcast_to(np.asarray(w, dtype=float), (d,))
        for i in range(d):
            b = offsets[j] + (i if p == 1.0 else 0)
            for sign in (1.0, -1.0):
                row = np.zeros(n_var)
                row[j * d + i] = sign * w[i]
                row[b] = -1.0
                rows.append(row)
                rhs.append(0.0)
        c[offsets[j]:offsets[j + 1]] = t[j]
    eq = np.zeros((d, n_var))
    for j in range(m):
        eq[np.arange(d), j * d + np.arange(d)] = 1.0
    bounds = [(None, None)] * n_x + [(0, None)] * (n_var - n_x)
    res = linprog(c, A_ub=np.array(rows), b_ub=rhs, A_eq=eq, b_eq=a, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def k_l2_slsqp(weights, t, a):
    """K(t, a) for weighted l2 spaces via a smooth epigraph problem.

    Minimizes ``sum_j t_j s_j`` subject to ``s_j^2 >= ||w_j x_j||^2`` with the
    last part fixed by ``x_m = a - sum_{j<m} x_j``.
    """
    from scipy.optimize import minimize

    a = np.asarray(a, dtype=float)
    W = np.asarray(weights, dtype=float)
    m, d = W.shape

    def parts(z):
        x = z[: (m - 1) * d].reshape(m - 1, d)
        return np.vstack([x, a - x.sum(axis=0)])

    def objective(z):
        return float(np.dot(t, z[(m - 1) * d:]))

    def cons(z):
        s = z[(m - 1) * d:]
        return s**2 - np.sum((W * parts(z)) ** 2, axis=1)

    best = math.inf
    # start from each single-space decomposition and keep the best local solution
    for j in range(m):
        x0 = np.zeros((m, d))
        x0[j] = a
        s0 = np.linalg.norm(W * x0, axis=1) + 1e-3
        z0 = np.concatenate([x0[:-1].ravel(), s0])
        res = minimize(objective, z0, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": cons}],
                       bounds=[(None, None)] * ((m - 1) * d) + [(0, None)] * m,
                       options={"ftol": 1e-13, "maxiter": 2000})
        value = float(np.dot(t, np.linalg.norm(W * parts(res.x), axis=1)))
        best = min(best, value)
    return best
