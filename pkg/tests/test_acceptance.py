"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints one PASS line with the measured quantity once its
assertions hold; a failing criterion shows up as a normal pytest failure.
"""

import time

import numpy as np

from helpers import direct_gpr_oracle, max_gradient_error
from surrkit.data import DataTensor, export_tensor, flatten, import_tensor, unflatten
from surrkit.gpr import KernelSpec, gpr_fit, gpr_predict, kernel_eval
from surrkit.metrics import r_squared, rmse, throughput_benchmark
from surrkit.mlp import MlpArchitecture, TrainConfig
from surrkit.modelstore import load_model, save_model
from surrkit.multifid import (
    FittedSurrogate,
    TensorLayout,
    train_mf,
    train_single_fidelity,
)
from surrkit.preprocess import (
    SplitSpec,
    fit_scaler,
    inverse_transform,
    split_data_cv,
    transform,
)
from surrkit.synthbench import (
    Sampler,
    forrester_pair,
    generate_pair_dataset,
    truth_evaluate,
)
from surrkit.tuner import (
    GprGrid,
    MlpGrid,
    SweepEntry,
    convergence_study,
    select_winner,
    tune_gpr,
)


def test_criterion_1_gpr_oracle_equivalence():
    """Cholesky-path mean, variance, and lml match direct inverse solves."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    kinds = [
        KernelSpec(kind="rbf", length_scale=0.8, noise=0.05),
        KernelSpec(kind="matern", nu=0.5, length_scale=1.2, noise=0.01),
        KernelSpec(kind="matern", nu=1.5, length_scale=0.6, noise=0.1),
        KernelSpec(kind="constant*matern", nu=2.5, signal_variance=2.0, noise=0.02),
        KernelSpec(kind="constant*rbf", signal_variance=0.5, length_scale=1.5, noise=0.05),
    ]
    for problem in range(50):
        n = int(rng.integers(2, 31))
        d = int(rng.integers(1, 5))
        q = int(rng.integers(1, 4))
        spec = kinds[problem % len(kinds)]
        X = rng.uniform(-1, 1, (n, d))
        Y = rng.standard_normal((n, q))
        Xq = rng.uniform(-1, 1, (12, d))

        model = gpr_fit(X, Y, spec)
        pred = gpr_predict(model, Xq)

        K = kernel_eval(spec, X, X) + spec.noise * np.eye(n)
        Ks = kernel_eval(spec, X, Xq)
        mean, var, lml = direct_gpr_oracle(K, Ks, np.full(12, spec.signal_variance), Y)

        assert np.allclose(pred.mean, mean, rtol=1e-8, atol=1e-10), f"mean, problem {problem}"
        assert np.allclose(
            pred.variance, np.maximum(var, 0.0), rtol=1e-8, atol=1e-10
        ), f"variance, problem {problem}"
        assert abs(model.lml - lml) <= 1e-8 * max(1.0, abs(lml)), f"lml, problem {problem}"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"ACCEPTANCE 1 PASS: 50 random GPR problems match the direct-solve "
          f"oracle within 1e-8 relative ({elapsed:.2f} s)")


def test_criterion_2_gpr_interpolation():
    """Noise-free GPR reproduces its training targets.

    Length scales are chosen so the kernel system stays well conditioned,
    the regime where exact interpolation is numerically meaningful.
    """
    rng = np.random.default_rng(7)
    worst_mean, worst_var = 0.0, 0.0
    for d, n, length_scale in ((1, 12, 0.08), (3, 25, 0.5)):
        X = rng.uniform(0, 1, (n, d))
        Y = rng.standard_normal((n, 2))
        model = gpr_fit(X, Y, KernelSpec(kind="rbf", length_scale=length_scale, noise=0.0))
        pred = gpr_predict(model, X)
        worst_mean = max(worst_mean, float(np.abs(pred.mean - Y).max()))
        worst_var = max(worst_var, float(pred.variance.max()))
    assert worst_mean < 1e-6
    assert worst_var <= 1e-8
    print(f"ACCEPTANCE 2 PASS: noise-free interpolation, max mean error "
          f"{worst_mean:.2e} (< 1e-6), max variance {worst_var:.2e} (<= 1e-8)")


def test_criterion_3_mlp_gradient_check():
    """Backprop equals central finite differences for tanh and relu, depths 1-3."""
    start = time.perf_counter()
    worst = 0.0
    for activation in ("tanh", "relu"):
        for depth in (1, 2, 3):
            arch = MlpArchitecture(3, (8,) * depth, 2, activation)
            err = max_gradient_error(arch, seed=depth, eps=1e-5)
            assert err < 1e-5, f"{activation} depth {depth}: {err:.2e}"
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    print(f"ACCEPTANCE 3 PASS: gradient check worst relative error {worst:.2e} "
          f"(< 1e-5) over tanh/relu x depths 1-3 ({elapsed:.2f} s)")


def test_criterion_4_scaler_and_splitter():
    rng = np.random.default_rng(11)
    M = rng.standard_normal((120, 6)) * rng.uniform(0.1, 50, 6) + rng.uniform(-5, 5, 6)
    scaler = fit_scaler(M)
    restored = inverse_transform(scaler, transform(scaler, M))
    inv_err = float(np.max(np.abs(restored - M) / np.maximum(1.0, np.abs(M))))
    assert inv_err < 1e-12

    scaled = transform(scaler, M)
    mean_err = float(np.abs(scaled.mean(axis=0)).max())
    std_err = float(np.abs(scaled.std(axis=0) - 1.0).max())
    assert mean_err <= 1e-10
    assert std_err <= 1e-10

    spec = SplitSpec(seed=5)
    a = split_data_cv(120, spec)
    b = split_data_cv(120, spec)
    for idx_a, idx_b in zip(a, b):
        np.testing.assert_array_equal(idx_a, idx_b)
    combined = np.concatenate(a)
    assert len(combined) == 120
    np.testing.assert_array_equal(np.sort(combined), np.arange(120))
    print(f"ACCEPTANCE 4 PASS: inverse-transform error {inv_err:.2e} (< 1e-12), "
          f"train mean {mean_err:.2e} / std deviation {std_err:.2e} (<= 1e-10), "
          f"splits disjoint, exhaustive, deterministic")


def test_criterion_5_multi_fidelity_benchmark():
    """Forrester chain: 50 LF + 8 HF points beat an HF-only model."""
    start = time.perf_counter()
    pair = forrester_pair()
    seed = 7
    lf, hf = generate_pair_dataset(pair, 50, 8, Sampler("uniform-grid", seed=seed))
    split = SplitSpec(seed=seed)
    grid = GprGrid(seed=seed)

    composite = train_mf(lf, hf, "gpr", "gpr", split, gpr_grid=grid)
    Xg = np.linspace(0.0, 1.0, 200)[:, None]
    truth = truth_evaluate(pair, Xg)
    mf_pred = composite.predict_raw(Xg)
    mf_r2 = r_squared(truth, mf_pred)
    mf_rmse = rmse(truth, mf_pred)

    hf_only, _ = train_single_fidelity(hf, "gpr", split, gpr_grid=grid)
    hf_rmse = rmse(truth, hf_only.predict_raw(Xg))

    elapsed = time.perf_counter() - start
    assert mf_r2 > 0.99, f"MF R^2 = {mf_r2}"
    assert mf_rmse < hf_rmse, f"MF {mf_rmse} vs HF-only {hf_rmse}"
    assert elapsed < 60.0
    print(f"ACCEPTANCE 5 PASS: Forrester MF R^2 = {mf_r2:.5f} (> 0.99), "
          f"MF RMSE {mf_rmse:.4f} < HF-only RMSE {hf_rmse:.4f} ({elapsed:.1f} s)")


def test_criterion_6_inference_rate():
    """400-point, 128-output GPR sustains > 1000 single-site predictions/s."""
    rng = np.random.default_rng(3)
    N, d, q = 400, 4, 128
    X = rng.uniform(0, 1, (N, d))
    Y = rng.standard_normal((N, q))
    model = gpr_fit(X, Y, KernelSpec(kind="rbf", length_scale=0.5, noise=1e-6))
    surrogate = FittedSurrogate(
        model,
        x_scaler=fit_scaler(X),
        y_scaler=fit_scaler(Y),
        y_layout=TensorLayout(tuple(f"y{i}" for i in range(q)), ("0",)),
    )
    sites = rng.uniform(0, 1, (50, d))
    rate = throughput_benchmark(surrogate, sites, repeats=20)
    assert rate > 1000.0, f"measured {rate:.0f}/s"
    print(f"ACCEPTANCE 6 PASS: measured rate {rate:.0f} single-site "
          f"predictions/second (>= 1000/s) at N=400, q=128")


def test_criterion_7_persistence_round_trips(tmp_path):
    seed = 13
    lf, hf = generate_pair_dataset(forrester_pair(), 40, 8, Sampler(seed=seed))
    split = SplitSpec(seed=seed)
    fast = GprGrid(kernels=(KernelSpec(kind="constant*rbf"),), restarts=1, seed=seed)
    quick_train = TrainConfig(learning_rate=1e-2, max_epochs=60, batch_size=64,
                              early_stop_patience=60, seed=seed)
    mlp_grid = MlpGrid(layer_counts=(1,), widths=(8,), train=quick_train)

    gpr_surr, _ = train_single_fidelity(lf, "gpr", split, gpr_grid=fast)
    mlp_surr, _ = train_single_fidelity(lf, "mlp", split, mlp_grid=mlp_grid)
    composite = train_mf(lf, hf, split=split, gpr_grid=fast)

    X = np.random.default_rng(seed).uniform(0, 1, (10, 1))
    worst = 0.0
    for name, obj in (("gpr", gpr_surr), ("mlp", mlp_surr), ("mf-composite", composite)):
        bundle = save_model(obj, tmp_path, name)
        loaded = load_model(bundle)
        diff = float(np.max(np.abs(loaded.predict_raw(X) - obj.predict_raw(X))))
        assert diff <= 1e-12, f"{name}: {diff:.2e}"
        worst = max(worst, diff)
    print(f"ACCEPTANCE 7 PASS: save/load prediction difference {worst:.2e} "
          f"(<= 1e-12) for gpr, mlp, and mf-composite bundles")


def test_criterion_8_tuner_contracts():
    seed = 17
    lf, _ = generate_pair_dataset(forrester_pair(), 120, 8, Sampler(seed=seed))
    from surrkit.preprocess import preprocess_data_pipeline

    prepared = preprocess_data_pipeline(lf, SplitSpec(seed=seed))
    grid = GprGrid(
        kernels=(
            KernelSpec(kind="constant*rbf"),
            KernelSpec(kind="constant*matern", nu=1.5),
            KernelSpec(kind="constant*matern", nu=2.5),
        ),
        restarts=2,
        seed=seed,
    )
    sweep = tune_gpr(prepared, grid)
    assert len(sweep.entries) == len(grid.kernels)  # exhaustive
    finite = [e for e in sweep.entries if np.isfinite(e.val_rmse)]
    best = min(e.val_rmse for e in finite)
    assert sweep.winner.val_rmse <= best + 1e-12  # argmin
    assert select_winner(sweep.entries) == sweep.selected  # pure re-selection

    tied = (
        SweepEntry(0, "big", {}, 0.5, 900, 0.0),
        SweepEntry(1, "small", {}, 0.5 + 1e-13, 30, 0.0),
    )
    assert select_winner(tied) == 1  # parsimony within tolerance

    curve = convergence_study(lf, "gpr", [8, 64], SplitSpec(seed=seed), restarts=2)
    assert set(curve.subset_indices[0]).issubset(set(curve.subset_indices[1]))
    rmse_8 = curve.points[0].test_rmse
    rmse_64 = curve.points[1].test_rmse
    assert rmse_64 <= rmse_8
    print(f"ACCEPTANCE 8 PASS: sweep exhaustive/argmin/parsimony hold; "
          f"convergence nested with RMSE {rmse_64:.2e} @64 <= {rmse_8:.2e} @8")


def test_criterion_9_data_standard_round_trips(tmp_path):
    rng = np.random.default_rng(21)
    count = 0
    for n in range(1, 17):
        for m in range(1, 17):
            for l in range(1, 17):
                tensor = DataTensor.from_values(rng.standard_normal((n, m, l)))
                back = unflatten(flatten(tensor), m, l)
                assert np.array_equal(back.values, tensor.values)
                count += 1
    assert count == 16**3

    text_checked = 0
    for _ in range(25):
        shape = tuple(rng.integers(1, 17, 3))
        values = rng.standard_normal(shape) * 10.0 ** rng.uniform(-14, 14, shape)
        tensor = DataTensor.from_values(values)
        path = export_tensor(tensor, tmp_path / f"t{text_checked}.txt")
        again = import_tensor(path)
        assert np.array_equal(again.values, tensor.values)
        text_checked += 1
    print(f"ACCEPTANCE 9 PASS: flatten/unflatten inverse on all {count} shapes "
          f"in [1,16]^3; {text_checked} tensor-text round trips bitwise stable")


def test_criterion_10_r_squared_unit_values():
    perfect = r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert abs(perfect - 1.0) <= 1e-12
    y = np.array([1.0, 2.0, 3.0, 10.0])
    mean_pred = r_squared(y, np.full(4, y.mean()))
    assert abs(mean_pred - 0.0) <= 1e-12
    worked = r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    assert abs(worked - 0.5) <= 1e-12
    print("ACCEPTANCE 10 PASS: R^2 = 1.0 (perfect), 0.0 (mean predictor), "
          "0.5 (worked case), each within 1e-12")
