"""Acceptance criteria 1-9.

Each test prints one ``CRITERION n: PASS|FAIL`` line with the measured
numbers (run with ``-s`` to see them) and asserts the criterion at its
stated tolerance and runtime.
"""

import time

import mpmath
import numpy as np
import pytest

from nohd import deriv, estim, gamecore, games, harness, optim
from nohd.gamecore import GameEval, decompose, evaluate
from nohd.games import DEFAULT_STARTS, AnalyticGame, Parametrization
from nohd.linalg import pt_inverse
from nohd.optim import Branch, NohdConfig

RAW = NohdConfig(eta=1.0, apply_eta_to_hamiltonian_branch=False)
ETAS = (0.1, 0.5, 1.0)


def report(n, ok, detail):
    print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {n}: {detail}"


def action_one(game, theta):
    return np.array([p[0] for p in game.probabilities(theta)])


# 1 ----------------------------------------------------------------------------


def test_criterion_1_linear_mp_one_step():
    t0 = time.perf_counter()
    game = games.matching_pennies(Parametrization.LINEAR)
    theta0 = game.theta_from_probabilities(([0.8, 0.2], [0.2, 0.8]))
    trace = optim.run(game, "nohd", theta0, 1, eta=1.0)
    err = float(np.max(np.abs(action_one(game, trace.final_theta) - 0.5)))
    elapsed = time.perf_counter() - t0
    ok = trace.n_updates == 1 and err <= 1e-9 and elapsed < 1.0
    report(1, ok, f"updates={trace.n_updates} max|p - 0.5|={err:.2e} "
                  f"branch={trace.records[0].update.branch.value} time={elapsed:.3f}s")


# 2 ----------------------------------------------------------------------------


def test_criterion_2_bilinear_closed_form():
    t0 = time.perf_counter()
    game = games.make_analytic("bilinear")
    rng = np.random.default_rng(2)
    worst = 0.0
    for theta in rng.normal(scale=5.0, size=(100, 2)):
        ev = evaluate(game, theta)
        step, _ = optim.newton_hamiltonian_step(decompose(ev), ev.sim_grad, RAW)
        worst = max(worst, float(np.linalg.norm(theta + step)))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-10 and elapsed < 1.0,
           f"100 starts, max ||theta_1|| = {worst:.2e}, time={elapsed:.3f}s")


# 3 ----------------------------------------------------------------------------


def test_criterion_3_quadratic_rate():
    eps = 0.05
    game = games.make_analytic("perturbed_hamiltonian", eps=eps)

    # independent oracle: 50-digit root of xi = (t2 + 3 eps t1^2, -t1 + 3 eps t2^2)
    with mpmath.workdps(50):
        e = mpmath.mpf(eps)
        xi = lambda a, b: [b + 3 * e * a ** 2, -a + 3 * e * b ** 2]
        root = mpmath.findroot(xi, (mpmath.mpf("0.05"), mpmath.mpf("-0.05")))
        assert max(abs(v) for v in xi(root[0], root[1])) < mpmath.mpf(10) ** -45
        star = np.array([float(root[0]), float(root[1])])

    theta = np.array([0.3, -0.2])
    errors = [float(np.linalg.norm(theta - star))]
    for _ in range(6):
        ev = evaluate(game, theta)
        step, _ = optim.newton_hamiltonian_step(decompose(ev), ev.sim_grad, RAW)
        theta = theta + step
        errors.append(float(np.linalg.norm(theta - star)))
        if errors[-1] <= 1e-10:
            break
    reached = errors[-1] <= 1e-10
    hit = len(errors) - 1
    e = np.array(errors[-4:])
    x, y = np.log(e[:-1]), np.log(e[1:])
    slope, log_c = np.polyfit(x, y, 1)
    resid = y - (slope * x + log_c)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    ok = reached and hit <= 6 and slope >= 1.9 and r2 >= 0.95
    report(3, ok, f"errors={['%.2e' % v for v in errors]} steps={hit} slope={slope:.3f} "
                  f"C={np.exp(log_c):.3f} R2={r2:.4f}")


# 4 ----------------------------------------------------------------------------


def test_criterion_4_boltzmann_exact():
    t0 = time.perf_counter()
    lines, ok = [], True
    for name in ("mp", "rps"):
        game = games.builtin_game(name)
        ref = games.nash_reference(game)
        theta0 = game.theta_from_probabilities(DEFAULT_STARTS[name])
        best = None
        for eta in ETAS:
            trace = optim.run(game, "nohd", theta0, 110, eta=eta)
            probs = [np.concatenate(game.probabilities(t)) for t in trace.thetas]
            converged, step = harness.convergence_check(probs, ref, 0.01, 10)
            if converged and (best is None or step < best[1]):
                best = (eta, step)
        passed = best is not None and best[1] <= 100
        ok &= passed
        lines.append(f"{name}: best eta={best[0] if best else None} steps={best[1] if best else None}")
    elapsed = time.perf_counter() - t0
    report(4, ok and elapsed < 10.0, "; ".join(lines) + f"; time={elapsed:.2f}s")


# 5 ----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_5_table1_ordering():
    t0 = time.perf_counter()
    cfg = harness.ExperimentConfig(games=("mp", "rps"), algorithms=optim.ALGORITHMS, etas=ETAS,
                                   init=harness.InitSpec("random", sigma=0.5, count=50),
                                   max_steps=300, seed=0)
    table = harness.table1_study(cfg)
    elapsed = time.perf_counter() - t0
    ok, lines = elapsed < 300, []
    for game in ("mp", "rps"):
        rows = {s.algorithm: s for s in table if s.game == game}
        nohd = rows["nohd"].mean_steps
        rivals = {a: s.mean_steps for a, s in rows.items() if a != "nohd"}
        best_rival = min(rivals, key=rivals.get)
        ok &= all(nohd < v for v in rivals.values())
        lines.append(f"{game}: " + " ".join(f"{a}={s.mean_steps:.1f}@{s.best_eta:g}"
                                            for a, s in rows.items())
                     + f" (nohd {'<' if nohd < rivals[best_rival] else '>='} {best_rival})")
    report(5, ok, "; ".join(lines) + f"; time={elapsed:.0f}s")


# 6 ----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_sampled_mp():
    t0 = time.perf_counter()
    game = games.matching_pennies()
    theta0 = game.theta_from_probabilities(DEFAULT_STARTS["mp"])
    counts = {}
    for eta in ETAS:
        both = first = 0
        for seed in range(20):
            evaluator = estim.sampled_evaluator(game, 300, 1, seed=seed)
            trace = optim.run(game, "nohd", theta0, 300, eta=eta, evaluator=evaluator)
            dev = np.abs(np.array([action_one(game, t) for t in trace.thetas[-50:]]) - 0.5)
            first += bool(np.all(dev[:, 0] < 0.05))
            both += bool(np.all(dev < 0.05))
        counts[eta] = (first, both)
    elapsed = time.perf_counter() - t0
    best = max(counts, key=lambda k: counts[k][0])
    ok = counts[best][0] >= 15 and elapsed < 300
    report(6, ok, "runs within 0.05 over the last 50 iterations (player 1, both players): "
           + " ".join(f"eta={k:g}:{v[0]}/20,{v[1]}/20" for k, v in counts.items())
           + f"; time={elapsed:.0f}s")


# 7 ----------------------------------------------------------------------------


def _exact_blocks(game, theta):
    """Full gradient and Hessian of every player's cost."""
    out = []
    for i in range(2):
        _, g, h = deriv.grad_hess(lambda x: game.values(x)[i], theta)
        out.append((g, h))
    return out


def _estimated_blocks(game, batch):
    sl = gamecore.block_slices(game.block_sizes)
    n = sum(game.block_sizes)
    out = []
    for i in range(2):
        g = np.concatenate([estim.grad_estimate(game, batch, i, k) for k in range(2)])
        h = np.zeros((n, n))
        for k in range(2):
            for j in range(2):
                h[sl[k], sl[j]] = (estim.diag_hess_estimate(game, batch, i, k) if k == j
                                   else estim.cross_hess_estimate(game, batch, i, k, j))
        out.append((g, h))
    return out


def _max_gap(a, b):
    return max(max(np.max(np.abs(ga - gb)), np.max(np.abs(ha - hb)))
               for (ga, ha), (gb, hb) in zip(a, b))


@pytest.mark.slow
def test_criterion_7_estimator_oracle():
    t0 = time.perf_counter()
    game = games.matching_pennies()
    env = estim.MatrixGameEnv(game)
    rng = np.random.default_rng(7)
    enum_gap = sample_gap = 0.0
    for k in range(20):
        theta = rng.normal(size=4)
        exact = _exact_blocks(game, theta)
        enum_gap = max(enum_gap, _max_gap(_estimated_blocks(game, estim.enumerate_batch(env, theta)),
                                          exact))
        batch = estim.sample_batch(env, theta, 100_000, 1, np.random.default_rng([7, k]))
        sample_gap = max(sample_gap, _max_gap(_estimated_blocks(game, batch), exact))
    elapsed = time.perf_counter() - t0
    ok = enum_gap <= 1e-10 and sample_gap <= 0.05 and elapsed < 120
    report(7, ok, f"enumeration max gap={enum_gap:.2e}, M=1e5 max gap={sample_gap:.4f}, "
                  f"time={elapsed:.1f}s")


# 8 ----------------------------------------------------------------------------

N_CASES = 1000


def _eval(jac, xi):
    n = len(xi)
    return GameEval(np.zeros(n), (n,), np.zeros(1), np.zeros((1, n)), np.asarray(xi, float),
                    np.asarray(jac, float))


def suite_decomposition(rng):
    bad = 0
    for _ in range(N_CASES):
        n = int(rng.integers(1, 11))
        jac = rng.normal(scale=10.0 ** rng.uniform(-3, 3), size=(n, n))
        xi = rng.normal(size=n)
        dec = decompose(_eval(jac, xi))
        scale = max(np.max(np.abs(jac)), 1e-300)
        bad += not (np.array_equal(dec.S, dec.S.T) and np.array_equal(dec.A, -dec.A.T)
                    and np.max(np.abs(dec.S + dec.A - jac)) <= 1e-15 * scale
                    and np.allclose(dec.ham_grad, dec.S @ xi + dec.A.T @ xi, rtol=1e-12,
                                    atol=1e-12 * scale)
                    and np.isclose(dec.ham_value, 0.5 * xi @ xi, rtol=1e-14))
    return bad


def suite_pt_inverse(rng):
    bad = 0
    for _ in range(N_CASES):
        n = int(rng.integers(1, 9))
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = rng.normal(size=n) * 10.0 ** rng.uniform(-4, 2, size=n)
        m = 10.0 ** rng.uniform(-3, 0)
        p = pt_inverse((q * lam) @ q.T, m)
        eigs = np.linalg.eigvalsh(p)
        bad += not (np.array_equal(p, p.T) and eigs.min() > 0 and eigs.max() <= (1 + 1e-9) / m)
    return bad


def _potential_sign(rng, negative):
    bad = mismatch = 0
    for _ in range(N_CASES):
        n = int(rng.integers(2, 7))
        r = int(rng.integers(1, n + 1))
        mm = rng.normal(size=(n, r))
        s = mm @ mm.T
        if negative:
            s = -s - 10.0 ** rng.uniform(-3, 0) * np.eye(n)
        b = rng.normal(size=(n, n))
        xi = rng.normal(size=n)
        ev = _eval(s + 0.5 * (b - b.T), xi)
        dec = decompose(ev)
        cos_s = optim.nohd_step(ev, dec, RAW).cos_s
        # second route: PT-inverse from LAPACK's eigendecomposition
        w, v = np.linalg.eigh(dec.S)
        u = (v / np.maximum(np.abs(w), RAW.m)) @ (v.T @ xi)
        g = ev.jacobian.T @ xi
        mismatch += not np.isclose(cos_s, u @ g / (np.linalg.norm(u) * np.linalg.norm(g)),
                                   atol=1e-9)
        bad += (cos_s >= 0) if negative else (cos_s < 0)
    return bad + mismatch, f"sign violations={bad}, route mismatches={mismatch}"


def suite_potential_sign_psd(rng):
    return _potential_sign(rng, negative=False)


def suite_potential_sign_nd(rng):
    return _potential_sign(rng, negative=True)


def suite_potential_game_branch(rng):
    bad = 0
    for _ in range(N_CASES):
        n = int(rng.integers(2, 7))
        q = rng.normal(size=(n, n))
        q = q + q.T
        c, w = rng.normal(size=n), rng.normal(size=n)
        u = rng.normal(size=(n, n))

        def phi(theta, q=q, c=c, w=w, u=u):
            return 0.5 * (theta @ (q @ theta)) + theta @ c + deriv.tanh(u @ theta) @ w

        k = int(rng.integers(1, n))
        game = AnalyticGame("potential", (k, n - k), lambda t, phi=phi: deriv.stack([phi(t), phi(t)]),
                            phi)
        ev = evaluate(game, rng.normal(size=n))
        step = optim.nohd_step(ev, decompose(ev), NohdConfig(eta=1.0))
        bad += not (step.branch is Branch.POTENTIAL and ev.sim_grad @ -step.direction > 0)
    return bad


def suite_hamiltonian_game_branch(rng):
    linear = [games.matching_pennies(Parametrization.LINEAR),
              games.rock_paper_scissors(Parametrization.LINEAR)]
    bad = 0
    for case in range(N_CASES):
        if case % 2:
            game = linear[case % 4 // 2]
            k = game.actions[0]
            theta = game.theta_from_probabilities([rng.dirichlet(np.full(k, 2.0)) for _ in range(2)])
        else:
            d = int(rng.integers(1, 4))
            game = games.make_analytic("bilinear", coupling=rng.normal(size=(d, d)) + 2 * np.eye(d),
                                       offsets=(rng.normal(size=d), rng.normal(size=d)))
            theta = rng.normal(size=2 * d)
        ev = evaluate(game, theta)
        dec = decompose(ev)
        xi = ev.sim_grad
        u_a, _ = optim.hamiltonian_direction(dec, xi)
        step = optim.nohd_step(ev, dec, RAW)
        bad += not (np.isclose(u_a @ dec.ham_grad, xi @ xi, rtol=1e-9, atol=1e-12)
                    and step.branch is Branch.HAMILTONIAN and xi @ xi > 0)
    return bad


def suite_zero_only_at_fixed_point(rng):
    pool = [games.matching_pennies(), games.rock_paper_scissors(), games.dilemma(),
            games.matching_pennies(Parametrization.LINEAR), games.random_game(6, seed=1),
            games.make_analytic("bilinear"), games.make_analytic("perturbed_hamiltonian"),
            games.make_analytic("quadratic_potential", Q=np.diag([1.0, 0.0]))]
    bad = 0
    for case in range(N_CASES):
        game = pool[case % len(pool)]
        if case % 10 == 0 and hasattr(game, "actions") and game.name != "dilemma":
            theta = game.theta_from_probabilities(games.nash_reference(game))
        elif getattr(game, "parametrization", None) is Parametrization.LINEAR:
            theta = game.theta_from_probabilities([rng.dirichlet([2.0, 2.0]) for _ in range(2)])
        else:
            theta = rng.normal(scale=2.0, size=sum(game.block_sizes))
        ev = evaluate(game, theta)
        cfg = NohdConfig(eta=float(rng.choice(ETAS)))
        step = optim.nohd_step(ev, decompose(ev), cfg)
        at_fp = np.linalg.norm(ev.sim_grad) <= cfg.fixed_point_tol
        zero = not np.any(step.direction)
        bad += zero != at_fp or (step.branch is Branch.FIXED_POINT) != at_fp
    return bad


SUITES = {
    "decomposition": suite_decomposition,
    "pt_inverse_spectrum": suite_pt_inverse,
    "potential_sign_psd": suite_potential_sign_psd,
    "potential_sign_negative_definite": suite_potential_sign_nd,
    "potential_game_branch": suite_potential_game_branch,
    "hamiltonian_game_branch": suite_hamiltonian_game_branch,
    "zero_only_at_fixed_point": suite_zero_only_at_fixed_point,
}


@pytest.mark.parametrize("suite", list(SUITES))
def test_criterion_8_property_suites(suite):
    t0 = time.perf_counter()
    result = SUITES[suite](np.random.default_rng(8))
    failures, note = result if isinstance(result, tuple) else (result, "")
    elapsed = time.perf_counter() - t0
    report(8, failures == 0 and elapsed < 60,
           f"{suite}: {failures} failures in {N_CASES} cases {note}, time={elapsed:.2f}s")


# 9 ----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_9_timing():
    t0 = time.perf_counter()
    rows = harness.timing_study(harness.TIMING_DIMS, optim.ALGORITHMS, reps=20, seed=0)
    elapsed = time.perf_counter() - t0
    last = rows[-1]
    ratio = last["nohd"] / last["sga"]
    ok = [r["dim"] for r in rows] == list(harness.TIMING_DIMS) and ratio < 5 and elapsed < 300
    report(9, ok, f"dim 144: nohd={last['nohd']:.1f}ms sga={last['sga']:.1f}ms "
                  f"ratio={ratio:.2f}; time={elapsed:.0f}s")
