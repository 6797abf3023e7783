"""Step maps, trajectory drivers and the iterated-integral oracle."""

import math

import numpy as np
import pytest

from spdeint import (
    DivergenceError,
    Integrator,
    MasterPath,
    NemytskiiPair,
    ProblemSpec,
    SchemeConfig,
    apply_semigroup,
    count_random_variables,
    field_from_spectral,
    iterated_integral_oracle,
    preset,
    run_scheme,
)


def _zero(x, y):
    return 0.0


def _one(x, y):
    return 1.0


def _ident(x, y):
    return y


def _cubic(x, y):
    return y * y * y


def _spectral_start(values):
    arr = np.asarray(values, dtype=float)

    def build(n):
        out = np.zeros(n)
        out[: arr.shape[0]] = arr[:n]
        return out

    return build


def make_problem(pair, *, kappa=0.01, linear=False, initial=(1.0, 0.5, 0.25)):
    return ProblemSpec(
        name="custom",
        dimension=1,
        kappa=kappa,
        horizon=1.0,
        pair=pair,
        noise_family="sine",
        noise_decay=2.0,
        initial_spectral=_spectral_start(initial),
        linear_multiplicative=linear,
    )


DETERMINISTIC = make_problem(NemytskiiPair(_zero, _zero, _zero))
LINEAR = make_problem(NemytskiiPair(_zero, _ident, _one), linear=True)
ADDITIVE = make_problem(NemytskiiPair(_zero, _one, _zero))
CUBIC = make_problem(NemytskiiPair(_cubic, _zero, _zero), initial=(1e30,))


def _config(scheme, problem, n, m, k, seed=0, amplitude=1.0, master_m=None):
    spec = problem.noise_spec(k, amplitude)
    path = MasterPath(
        seed=seed, steps=master_m or m, n_modes=spec.n_active, horizon=problem.horizon
    )
    return SchemeConfig(scheme, problem, n, m, k, path, noise_amplitude=amplitude)


# -- deterministic limits -------------------------------------------------


@pytest.mark.parametrize("scheme", ["milstein", "exponential_euler"])
def test_deterministic_heat_is_exact_semigroup(scheme):
    cfg = _config(scheme, DETERMINISTIC, 16, 256, 16)
    res = run_scheme(cfg, backend="numpy")
    start = DETERMINISTIC.initial_field(res.final.basis)
    expected = apply_semigroup(start, 1.0).spectral
    assert np.max(np.abs(res.final.spectral - expected)) <= 1e-12


def test_deterministic_implicit_euler_is_resolvent_power():
    n, m = 8, 64
    cfg = _config("implicit_euler", DETERMINISTIC, n, m, n)
    res = run_scheme(cfg, backend="numpy")
    basis = res.final.basis
    start = DETERMINISTIC.initial_field(basis).spectral
    expected = start / (1.0 + basis.eigenvalues / m) ** m
    assert np.allclose(res.final.spectral, expected, rtol=1e-12, atol=1e-13)


# -- single steps ----------------------------------------------------------


def test_milstein_one_step_from_zero_state_reacdiff():
    # at Y = 0 the reaction-diffusion coefficients give f = 1, b = 1 and
    # 0.5 b_y b = -1/2, so the grid update before the exponential factor is
    # h + dW - (dW^2 - quad)/2
    prob = preset("reacdiff1d")
    n = 8
    cfg = _config("milstein", prob, n, n**2, n, seed=42)
    integ = Integrator(cfg)
    h = 1.0 / n**2
    y0 = field_from_spectral(integ.basis, np.zeros(n))
    y1 = integ.milstein_step(y0, 0)
    dw = integ.noise_increment(0).grid
    quad = integ.quadrature().grid
    update = h + dw - 0.5 * (dw**2 - quad)
    expected = np.exp(-integ.basis.eigenvalues * h) * integ.basis.analyze(update)
    assert np.allclose(y1.spectral, expected, rtol=1e-13, atol=1e-16)


def test_single_mode_recursion_matches_scalar_oracle():
    # N = K = 1, b(x,y) = y, f = 0: the scheme collapses to a scalar recursion
    m = 8
    cfg = _config("milstein", LINEAR, 1, m, 1, seed=5)
    res = run_scheme(cfg, backend="numpy")
    h = 1.0 / m
    lam = LINEAR.kappa * math.pi**2
    dbeta = cfg.path.increments(m)[:, 0]
    g_sq = 2.0 * math.sin(math.pi / 2.0) ** 2
    quad = h * 1.0 * g_sq  # mu_1 = 1
    c = 1.0
    for i in range(m):
        dw = math.sqrt(2.0) * dbeta[i]  # sqrt(mu_1) g_1(1/2) dbeta
        c = math.exp(-lam * h) * c * (1.0 + dw + 0.5 * (dw * dw - quad))
    assert res.final.spectral[0] == pytest.approx(c, rel=1e-13)


def test_euler_milstein_gap_shrinks_under_refinement():
    gaps = []
    spec = LINEAR.noise_spec(1)
    path = MasterPath(seed=1, steps=64, n_modes=spec.n_active)
    for m in (4, 16, 64):
        mil = run_scheme(SchemeConfig("milstein", LINEAR, 1, m, 1, path), backend="numpy")
        eul = run_scheme(SchemeConfig("implicit_euler", LINEAR, 1, m, 1, path), backend="numpy")
        gaps.append(abs(mil.final.spectral[0] - eul.final.spectral[0]))
    assert gaps[0] > gaps[1] > gaps[2]


def test_exponential_euler_equals_milstein_without_diffusion():
    cfg_m = _config("milstein", DETERMINISTIC, 8, 16, 8, seed=2)
    cfg_e = _config("exponential_euler", DETERMINISTIC, 8, 16, 8, seed=2)
    a = run_scheme(cfg_m, backend="numpy").final.spectral
    b = run_scheme(cfg_e, backend="numpy").final.spectral
    assert np.array_equal(a, b)


def test_additive_noise_degenerates_milstein_to_exponential_euler():
    # b_y * b vanishes identically, so the correction is exactly zero
    cfg_m = _config("milstein", ADDITIVE, 8, 16, 8, seed=3)
    cfg_e = _config("exponential_euler", ADDITIVE, 8, 16, 8, seed=3)
    a = run_scheme(cfg_m, backend="numpy").final.spectral
    b = run_scheme(cfg_e, backend="numpy").final.spectral
    assert np.array_equal(a, b)


def test_milstein_minus_exponential_is_the_propagated_correction():
    from spdeint import eval_milstein_correction, to_spectral

    cfg = _config("milstein", LINEAR, 8, 16, 8, seed=7)
    integ = Integrator(cfg)
    y0 = integ.initial()
    mil = integ.milstein_step(y0, 0)
    exp = integ.exponential_euler_step(y0, 0)
    corr = eval_milstein_correction(
        LINEAR.pair, y0, integ.noise_increment(0), integ.quadrature()
    )
    propagated = apply_semigroup(to_spectral(corr), integ.h).spectral
    assert np.allclose(mil.spectral - exp.spectral, propagated, rtol=1e-10, atol=1e-15)


def test_burgers_exponential_euler_smoke():
    # seed-fixed: a third of the paths at this coarse resolution genuinely
    # blow up through the quadratic drift; seed 11 stays in the stable basin
    prob = preset("burgers")
    cfg = _config("exponential_euler", prob, 8, 8**3, 8, seed=11)
    res = run_scheme(cfg)
    assert np.all(np.isfinite(res.final.spectral))
    assert res.steps == 512


# -- splitting -------------------------------------------------------------


def test_splitting_with_silent_noise_is_pure_semigroup():
    cfg = _config("splitting", LINEAR, 8, 4, 8, amplitude=0.0)
    integ = Integrator(cfg)
    y0 = integ.initial()
    stepped = integ.splitting_step(y0, 0)
    expected = apply_semigroup(y0, integ.h).spectral
    assert np.allclose(stepped.spectral, expected, rtol=1e-13, atol=1e-16)


def test_splitting_taylor_expansion_bracket():
    # the pointwise exponential agrees with 1 + z + z^2/2 - q/2 up to the
    # dropped cross and higher-order terms |z q/2| + q^2/8 + |z - q/2|^3 e/6
    prob = preset("heat2d")
    cfg = _config("milstein", prob, 8, 64, 8, seed=6)
    integ = Integrator(cfg)
    z = integ.noise_increment(0).grid
    q = integ.quadrature().grid
    w = z - 0.5 * q
    exact = np.exp(w)
    bracket = 1.0 + z + 0.5 * z**2 - 0.5 * q
    bound = 0.5 * np.abs(z) * q + q**2 / 8.0 + np.abs(w) ** 3 * np.exp(np.abs(w)) / 6.0
    assert np.all(np.abs(exact - bracket) <= bound + 1e-16)


def test_splitting_one_step_martingale_mean():
    # with the linear part switched off (tiny kappa) one splitting step is
    # Y1 = exp(dW - quad/2) Y0; the ratio has unit mean
    samples = 100_000
    prob = make_problem(NemytskiiPair(_zero, _ident, _one), kappa=1e-12, linear=True)
    spec = prob.noise_spec(1)
    path = MasterPath(seed=88, steps=samples, n_modes=spec.n_active)
    cfg = SchemeConfig("splitting", prob, 1, samples, 1, path)
    integ = Integrator(cfg)
    dw = integ._noise_grid_all()[:, 0]  # independent one-step increments
    quad = integ.quadrature().grid[0]
    ratios = np.exp(dw - 0.5 * quad)
    mean = float(np.mean(ratios))
    sigma = float(np.std(ratios, ddof=1)) / math.sqrt(samples)
    assert abs(mean - 1.0) <= 3.0 * sigma
    # and an actual step call matches the pointwise formula
    y0 = field_from_spectral(integ.basis, np.array([2.0]))
    y1 = integ.splitting_step(y0, 17)
    semi = math.exp(-integ.basis.eigenvalues[0] * integ.h)
    expected = semi * (math.exp(dw[17] - 0.5 * quad) * y0.grid[0]) / math.sqrt(2.0)
    assert y1.spectral[0] == pytest.approx(expected, rel=1e-12)


def test_splitting_rejects_nonlinear_problems():
    prob = preset("reacdiff1d")
    with pytest.raises(ValueError, match="linear multiplicative"):
        _config("splitting", prob, 4, 16, 4)


def test_milstein_splitting_one_step_difference_is_cubic():
    # scaling the noise amplitude by s scales the one-step difference like
    # s^3 (the increment enters linearly, its compensator quadratically)
    prob = preset("heat2d")
    n = 8
    path = MasterPath(seed=5, steps=n**2, n_modes=n**2)
    diffs = []
    scales = (1.0, 0.5, 0.25)
    for s in scales:
        cfg = SchemeConfig("milstein", prob, n, n**2, n, path, noise_amplitude=s)
        integ = Integrator(cfg)
        y0 = integ.initial()
        d = integ.milstein_step(y0, 0).spectral - integ.splitting_step(y0, 0).spectral
        diffs.append(float(np.sqrt(np.sum(d**2))))
    slope = np.polyfit(np.log(scales), np.log(diffs), 1)[0]
    assert slope >= 2.5


# -- trajectory driver -----------------------------------------------------


def test_zero_steps_returns_projected_initial():
    prob = preset("burgers")
    cfg = _config("milstein", prob, 4, 0, 4, master_m=4)
    res = run_scheme(cfg)
    assert res.steps == 0 and res.random_variables == 0
    assert np.array_equal(res.final.spectral, [0.6, 0.6, 0.0, 0.0])


def test_run_is_bitwise_reproducible():
    prob = preset("reacdiff1d")
    for backend in ("numpy", "numba"):
        a = run_scheme(_config("milstein", prob, 8, 64, 8, seed=99), backend=backend)
        b = run_scheme(_config("milstein", prob, 8, 64, 8, seed=99), backend=backend)
        assert np.array_equal(a.final.spectral, b.final.spectral)


def test_run_draw_count_matches_closed_form():
    prob = preset("reacdiff1d")
    cfg = _config("milstein", prob, 2, 4, 2, seed=0)
    res = run_scheme(cfg)
    assert cfg.path.draws == res.random_variables
    assert res.random_variables == count_random_variables(4, prob.noise_spec(2))


@pytest.mark.parametrize(
    "problem_name,scheme,n,seed",
    [
        ("reacdiff1d", "milstein", 16, 2717),
        ("reacdiff1d", "implicit_euler", 8, 2717),
        ("reacdiff_cos", "milstein", 8, 2717),
        ("heat2d", "milstein", 6, 2717),
        ("heat2d", "splitting", 6, 2717),
        ("burgers", "exponential_euler", 8, 11),
    ],
)
def test_backend_agreement(problem_name, scheme, n, seed):
    prob = preset(problem_name)
    m = prob.steps_for(scheme if scheme != "splitting" else "milstein", n)
    cfg = _config(scheme, prob, n, m, n, seed=seed)
    ref = run_scheme(cfg, backend="numpy").final.spectral
    fast = run_scheme(cfg, backend="numba").final.spectral
    scale = max(1.0, float(np.max(np.abs(ref))))
    assert np.max(np.abs(ref - fast)) <= 1e-12 * scale


def test_divergence_raises_with_step_index():
    cfg = _config("exponential_euler", CUBIC, 1, 4, 1, seed=0)
    with pytest.raises(DivergenceError, match="step") as err:
        run_scheme(cfg, backend="numpy")
    assert 0 <= err.value.step < 4


def test_divergence_raises_in_compiled_kernel():
    prob = preset("burgers")
    cfg = _config("milstein", prob, 4, 16, 4, seed=1, amplitude=1e8)
    with pytest.raises(DivergenceError):
        run_scheme(cfg, backend="numba")


def test_snapshots_force_numpy_loop():
    prob = preset("reacdiff1d")
    cfg = _config("milstein", prob, 4, 8, 4, seed=12)
    res = run_scheme(cfg, snapshot_every=4)
    assert res.backend == "numpy"
    assert [m for m, _ in res.snapshots] == [0, 4, 8]
    assert np.array_equal(res.snapshots[-1][1].spectral, res.final.spectral)


def test_config_validation():
    prob = preset("reacdiff1d")
    spec = prob.noise_spec(4)
    path = MasterPath(seed=0, steps=16, n_modes=spec.n_active)
    with pytest.raises(ValueError, match="divide"):
        SchemeConfig("milstein", prob, 4, 3, 4, path)
    with pytest.raises(ValueError, match="modes"):
        SchemeConfig("milstein", prob, 4, 16, 9, path)
    with pytest.raises(ValueError, match="unknown scheme"):
        SchemeConfig("heun", prob, 4, 16, 4, path)
    bad_horizon = MasterPath(seed=0, steps=16, n_modes=4, horizon=2.0)
    with pytest.raises(ValueError, match="horizon"):
        SchemeConfig("milstein", prob, 4, 16, 4, bad_horizon)


def test_strong_error_monotone_under_spatial_refinement():
    # coupled-path errors against a finer reference are nonincreasing in N
    # for nearly every path
    prob = preset("reacdiff1d")
    ref_n = 32
    paths = 20
    monotone = 0
    for p in range(paths):
        path = MasterPath(seed=[314, p], steps=ref_n**2, n_modes=ref_n)
        ref = run_scheme(SchemeConfig("milstein", prob, ref_n, ref_n**2, ref_n, path))
        errs = []
        for n in (2, 4, 8, 16):
            res = run_scheme(SchemeConfig("milstein", prob, n, n**2, n, path))
            diff = ref.final.spectral.copy()
            diff[: n] -= res.final.spectral
            errs.append(float(np.sqrt(np.sum(diff**2))))
        if all(errs[i] >= errs[i + 1] for i in range(len(errs) - 1)):
            monotone += 1
    assert monotone >= 0.9 * paths


# -- iterated integral oracle ----------------------------------------------


def test_oracle_single_mode_is_exact_per_sample():
    prob = preset("reacdiff1d")
    basis = prob.basis(16)
    report = iterated_integral_oracle(
        v=prob.initial_field(basis),
        pair=prob.pair,
        spec=prob.noise_spec(1),
        basis=basis,
        h=0.05,
        substeps=50,
        samples=500,
        seed=1,
    )
    assert report.max_abs_difference <= 1e-12


def test_oracle_zero_for_state_independent_diffusion():
    pair = NemytskiiPair(_zero, _one, _zero)
    prob = preset("reacdiff1d")
    basis = prob.basis(8)
    report = iterated_integral_oracle(
        v=prob.initial_field(basis),
        pair=pair,
        spec=prob.noise_spec(3),
        basis=basis,
        h=0.05,
        substeps=10,
        samples=100,
        seed=2,
    )
    assert report.max_abs_difference == 0.0
    assert np.all(report.second_moment_simulated == 0.0)
    assert np.all(report.second_moment_closed == 0.0)
    assert report.max_second_moment_rel_error == 0.0


def test_oracle_validates_substeps():
    prob = preset("reacdiff1d")
    basis = prob.basis(4)
    with pytest.raises(ValueError, match="substeps"):
        iterated_integral_oracle(
            prob.initial_field(basis), prob.pair, prob.noise_spec(2), basis, 0.1, 1, 10
        )
