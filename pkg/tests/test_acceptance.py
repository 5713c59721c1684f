"""Acceptance suite: one PASS/FAIL line per criterion, printed at the end of the module.

Run alone with ``pytest tests/test_acceptance.py`` (about a minute, most of it
the benchmark). A criterion that cannot be met is marked as a strict xfail so
it still prints FAIL while the rest of the run stays green.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate as sint

from gmmpef.bench import load_golden, run_bench
from gmmpef.divergences import (
    hyvarinen2_gaussians,
    hyvarinen2_gmm_ped,
    hyvarinen_alpha_numeric,
    jeffreys_heuristic,
    jeffreys_mc,
    select_order,
)
from gmmpef.estimators import sme_theta
from gmmpef.gmm import Gmm, pdf, random_gmm
from gmmpef.maxent import eta_to_theta, theta_to_eta_quadrature
from gmmpef.mef import (
    MefParam,
    maxent_entropy_bound,
    mef_F,
    mef_Fdual,
    mef_gradF,
    mef_kl,
    mef_kl_bregman,
    mef_kl_dual_bregman,
    mef_kl_legendre_fenchel,
)
from gmmpef.ped import MomentParam, PedNatural, log_partition, moments_numeric
from gmmpef.sampling import default_proposal, log_envelope, rejection_sample, theta_to_eta_mc

RESULTS = {}


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    tr = request.config.pluginmanager.getplugin("terminalreporter")
    write = tr.write_line if tr is not None else print
    write("")
    write("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        write(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


def normal_jeffreys(m1, s1, m2, s2):
    return ((s1**2 - s2**2) ** 2 + (m1 - m2) ** 2 * (s1**2 + s2**2)) / (2 * s1**2 * s2**2)


@pytest.fixture(scope="module")
def golden():
    return load_golden()


def test_01_golden_order8(golden):
    rel = []
    for m, key in ((golden["m1"], "theta1"), (golden["m2"], "theta2")):
        got = sme_theta(m, 8)
        want = np.asarray(golden["order8"][key])
        rel.extend(np.abs(got - want) / np.abs(want))
    t0 = time.perf_counter()
    jd = jeffreys_heuristic(golden["m1"], golden["m2"], 8).value
    elapsed = time.perf_counter() - t0
    ok = max(rel) <= 1e-6 and abs(jd - 0.2618412909) <= 1e-6 and elapsed < 0.05
    record(1, ok, f"max coef rel err {max(rel):.2e} over {len(rel)}, Delta_J={jd:.10f}, {1e3 * elapsed:.1f} ms")


def test_02_golden_order4(golden):
    jd = jeffreys_heuristic(golden["m1"], golden["m2"], 4).value
    err = abs(0.26324227 - jd) / 0.26324227
    ok = abs(jd - 0.2433048263) <= 1e-6 and abs(err - 0.0757) <= 0.002
    record(2, ok, f"Delta_J={jd:.10f}, relative error vs printed MC {err:.4f}")


def test_03_mc_crosscheck(golden):
    t0 = time.perf_counter()
    est = jeffreys_mc(golden["m1"], golden["m2"], np.random.default_rng(20240611), 1_000_000)
    elapsed = time.perf_counter() - t0
    ok = 0.253 <= est.value <= 0.273 and elapsed < 30
    record(3, ok, f"MC Jeffreys {est.value:.5f} +/- {est.stderr:.5f} in {elapsed:.2f} s")


def test_04_singleton_exactness():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        m1, s1, m2, s2 = rng.uniform(-10, 10), rng.uniform(0.3, 3), rng.uniform(-10, 10), rng.uniform(0.3, 3)
        got = jeffreys_heuristic(Gmm.single(m1, s1), Gmm.single(m2, s2)).value
        worst = max(worst, abs(got - normal_jeffreys(m1, s1, m2, s2)))
    record(4, worst <= 1e-9, f"max |heuristic - closed form| = {worst:.2e} over 100 pairs")


def test_05_table1_reproduction():
    t0 = time.perf_counter()
    summaries, _ = run_bench([2, 3, 4, 5], 200, mc_samples=100_000, master_seed=0)
    elapsed = time.perf_counter() - t0
    by_k = {s.k: s for s in summaries}
    e2, e5 = by_k[2].mean_error, by_k[5].mean_error
    speed = min(s.mean_speedup for s in summaries)
    ok = 0.05 <= e2 <= 0.25 and 0.02 <= e5 <= 0.15 and speed > 100 and elapsed < 900
    excluded = sum(s.excluded for s in summaries)
    record(
        5,
        ok,
        f"mean err k=2 {e2:.4f}, k=5 {e5:.4f}; min mean speed-up {speed:.0f}; "
        f"{excluded} excluded; {elapsed:.0f} s",
    )


def test_06_sme_direct_vs_hankel():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        m = random_gmm(int(rng.integers(1, 6)), rng)
        for D in (2, 4, 6, 8, 10):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                a = sme_theta(m, D, method="direct")
                b = sme_theta(m, D, method="hankel")
            # compare coefficients on the mixture's own scale, where they are commensurate
            s = m.std() ** np.arange(1, D + 1)
            worst = max(worst, np.linalg.norm((a - b) * s) / np.linalg.norm(a * s))
    record(6, worst <= 1e-8, f"max normwise relative gap {worst:.2e} over 200 mixtures x D in 2..10")


def test_07_stein_recurrence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in range(20):
        D = (2, 4, 6)[n % 3]
        theta = rng.normal(0.0, 0.5, D)
        theta[-1] = -rng.uniform(0.05, 0.5)
        p = PedNatural(theta)
        mu = moments_numeric(p, 2 * D)
        i = np.arange(1, D + 1)
        for j in range(D):
            # sum_i i theta_i mu_{i+j-1} + j mu_{j-1} = 0, where the j = 0 row has no second term
            lhs = float(np.sum(i * theta * mu[i + j - 1]))
            worst = max(worst, abs(lhs + (j * mu[j - 1] if j else 0.0)))
    record(7, worst < 1e-5, f"max recurrence residual {worst:.2e} on 20 PEDs")


@pytest.mark.xfail(strict=True, reason="displayed two-normal formula is half of the defining integral")
def test_08_hyvarinen():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(1, 4))
        w = rng.uniform(0.2, 1.0, k)
        m = Gmm(w / w.sum(), rng.uniform(-2, 2, k), rng.uniform(0.5, 1.5, k))
        p = PedNatural([rng.normal(), rng.normal(), rng.normal(0, 0.1), -rng.uniform(0.05, 0.3)])
        closed = hyvarinen2_gmm_ped(m, p)
        worst = max(worst, abs(closed - hyvarinen_alpha_numeric(m, p, 2.0)) / closed)
    gap = 0.0
    ratio = []
    for _ in range(20):
        m1, s1, m2, s2 = rng.uniform(-2, 2), rng.uniform(0.5, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2)
        closed = hyvarinen2_gmm_ped(Gmm.single(m1, s1), PedNatural.normal(m2, s2))
        shown = hyvarinen2_gaussians(m1, s1, m2, s2)
        gap = max(gap, abs(closed - shown) / shown)
        ratio.append(closed / shown)
    ok = worst <= 1e-6 and gap <= 1e-10
    record(
        8,
        ok,
        f"closed vs quadrature max rel {worst:.2e} on 50 pairs; two-normal case vs displayed formula "
        f"rel gap {gap:.2e} (ratio {min(ratio):.12f}..{max(ratio):.12f})",
    )


def test_09_ilsm():
    p, diag = eta_to_theta(MomentParam([0.0, 1.0]), PedNatural([0.3, -1.0]))
    err = float(np.max(np.abs(p.theta - [0.0, -0.5])))
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        a, b, c = rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5), rng.uniform(-1, 1)
        target = PedNatural([4 * a * c**3 + 2 * b * c, -6 * a * c**2 - b, 4 * a * c, -a])
        eta = theta_to_eta_quadrature(target)
        fit, _ = eta_to_theta(eta, PedNatural([0.0, -0.5, 0.0, -0.1]))
        worst = max(worst, float(np.max(np.abs(eta.eta - moments_numeric(fit, 4)[1:]))))
    ok = err <= 1e-6 and diag.iterations <= 20 and worst <= 1e-6
    record(9, ok, f"normal recovery err {err:.1e} in {diag.iterations} iterations; D=4 max residual {worst:.1e}")


def test_10_mef():
    thetas, orders = [-0.1, -0.5, -1.0, -3.0, -10.0], [2, 4, 6, 12]
    fy = max(
        abs(mef_F(MefParam(D, t)) + mef_Fdual(mef_gradF(MefParam(D, t)), D) - t * mef_gradF(MefParam(D, t)))
        for t in thetas
        for D in orders
    )
    spread = quad_gap = 0.0
    for D in (2, 4, 6):
        for t1, t2 in ((-0.3, -2.0), (-1.0, -0.5), (-4.0, -1.1)):
            forms = [f(t1, t2, D) for f in (mef_kl, mef_kl_bregman, mef_kl_dual_bregman, mef_kl_legendre_fenchel)]
            F1, F2 = mef_F(MefParam(D, t1)), mef_F(MefParam(D, t2))
            q = sint.quad(
                lambda x: math.exp(t1 * x**D - F1) * ((t1 - t2) * x**D - F1 + F2), -np.inf, np.inf, epsabs=1e-14
            )[0]
            spread = max(spread, max(forms) - min(forms))
            quad_gap = max(quad_gap, abs(forms[0] - q))
    rng = np.random.default_rng(10)
    slack = math.inf
    for _ in range(20):
        k = int(rng.integers(1, 5))
        w = rng.uniform(0.2, 1.0, k)
        m = Gmm(w / w.sum(), rng.uniform(-3, 3, k), rng.uniform(0.5, 1.5, k))
        lo, hi = float(np.min(m.mus - 14 * m.sigmas)), float(np.max(m.mus + 14 * m.sigmas))
        h = sint.quad(lambda x: -pdf(m, x) * math.log(pdf(m, x)) if pdf(m, x) > 0 else 0.0, lo, hi, limit=400)[0]
        for D in (2, 4):
            absm = sint.quad(lambda x: abs(x) ** D * pdf(m, x), lo, hi, limit=400)[0]
            slack = min(slack, maxent_entropy_bound(absm, D) - h)
    ok = fy < 1e-12 and spread <= 1e-8 and quad_gap <= 1e-8 and slack >= -1e-8
    record(
        10,
        ok,
        f"Fenchel-Young {fy:.1e}; KLD forms spread {spread:.1e}, vs quadrature {quad_gap:.1e}; "
        f"min entropy-bound slack {slack:.3f}",
    )


def test_11_sampling():
    target = PedNatural([0.0, 1.0, 0.0, -0.25])
    g = default_proposal(target)
    lc = log_envelope(target, g)
    res = rejection_sample(target, g, None, np.random.default_rng(11), 100_000, log_c=lc)
    expected = math.exp(log_partition(target) - lc)
    rate_z = abs(res.acceptance_rate - expected) / math.sqrt(expected * (1 - expected) / res.proposals)

    n = 100_000
    mu = moments_numeric(target, 8)
    eta = theta_to_eta_mc(target, None, np.random.default_rng(12), n).eta
    eta_z = max(abs(eta[i - 1] - mu[i]) / math.sqrt((mu[2 * i] - mu[i] ** 2) / n) for i in range(1, 5))
    ok = rate_z < 5 and eta_z < 4
    record(11, ok, f"acceptance rate {res.acceptance_rate:.4f} vs {expected:.4f} ({rate_z:.2f} SE); max moment gap {eta_z:.2f} SE")


def test_12_model_selection():
    bimodal = select_order(Gmm([0.5, 0.5], [-2.0, 2.0], [0.6, 0.6]), [2, 4])
    single = select_order(Gmm.single(0.3, 1.2), [2, 4])
    ok = bimodal.best_order == 4 and single.best_order == 2
    record(12, ok, f"bimodal -> D={bimodal.best_order}, single normal -> D={single.best_order}")


# direct execution prints the same report
if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
