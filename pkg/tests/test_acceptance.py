"""Acceptance gate: one test and one printed verdict line per criterion.

These pin the engine's headline guarantees at fixed tolerances; the unit
suites elsewhere cover the edges.  Criteria 9 and 10 share one trained
scenario, cached at module scope because training is the slow part.
"""

import time

import numpy as np

from stereonmf.audio_io import AudioBuffer
from stereonmf.evaluate import (
    benchmark_frame_time,
    shadow_interference_power,
    snr_db,
    standard_scenario,
)
from stereonmf.localize import (
    TdoaGrid,
    gcc_phat_frame,
    locate_offline,
    make_tdoa_grid,
)
from stereonmf.masking import MaskParams, binary_mask, phase_filter, \
    soft_mask, wiener_filter
from stereonmf.nmf import Dictionary, factorize, kl_divergence
from stereonmf.pipeline import Enhancer, EnhancerConfig, enhance_file
from stereonmf.stft import (
    StereoSpectrum,
    algorithmic_latency,
    asymmetric_windows,
    periodic_hann,
    symmetric_windows,
)

FS = 16000


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def identity_config(window, dtype, n_atoms=8, seed=0):
    rng = np.random.default_rng(seed)
    bins = window.frame_size // 2 + 1
    atoms = (rng.random((bins, n_atoms)) + 0.01).astype(np.float32)
    atoms /= atoms.sum(axis=0)
    return EnhancerConfig(
        dictionary=Dictionary(atoms=atoms, fs=FS,
                              frame_size=window.frame_size),
        window=window,
        grid=make_tdoa_grid(),
        fs=FS,
        mask=MaskParams(epsilon=2.5),  # window spans the whole grid
        dtype=dtype,
    )


def reconstruction_error(window, dtype, seconds=3.0, seed=0):
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal((2, int(seconds * FS))) * 0.3).astype(dtype)
    y = Enhancer(identity_config(window, dtype)).run(x)
    return float(np.sqrt(np.sum((y - x) ** 2) / np.sum(x**2)))


def run_reconstruction(capsys, name, window):
    t0 = time.perf_counter()
    rel64 = reconstruction_error(window, np.float64)
    rel32 = reconstruction_error(window, np.float32)
    elapsed = time.perf_counter() - t0
    ok = rel64 < 1e-10 and rel32 < 1e-5 and elapsed < 5.0
    report(
        capsys, name, ok,
        f"rel RMS f64 {rel64:.2e} (<1e-10), f32 {rel32:.2e} (<1e-5), "
        f"{elapsed:.2f}s (<5s)",
    )


def test_01_reconstruction_symmetric(capsys):
    run_reconstruction(
        capsys, "01 identity reconstruction, symmetric 1024/256",
        symmetric_windows(1024, hop=256),
    )


def test_02_reconstruction_asymmetric(capsys):
    run_reconstruction(
        capsys, "02 identity reconstruction, asymmetric 1024/M16/R8",
        asymmetric_windows(1024, 16, hop=8),
    )


def test_03_latency_accounting(capsys):
    sym = algorithmic_latency(symmetric_windows(1024, hop=256), fs=FS)
    asym = algorithmic_latency(asymmetric_windows(1024, 16, hop=16), fs=FS)
    ok = sym[1] == 80.0 and asym[1] == 3.0
    report(
        capsys, "03 latency accounting", ok,
        f"symmetric 1024/256 reports {sym[1]} ms (=80), "
        f"asymmetric 2M=32/R=16 reports {asym[1]} ms (=3)",
    )


def test_04_localization_oracle(capsys):
    grid = make_tdoa_grid()  # 8.6 cm pair
    frame_size, hop = 1024, 256
    window = periodic_hann(frame_size)
    rng = np.random.default_rng(2024)
    n = 4096
    hits = xcorr_hits = 0
    trials = 20
    max_lag = int(np.floor(grid.tau_max * FS))
    for _ in range(trials):
        k = int(rng.integers(-3, 4))
        left = rng.standard_normal(n)
        right = np.roll(left, k)  # exact circular delay
        pair = np.stack([left, right])
        angular = []
        for start in range(0, n - frame_size + 1, hop):
            seg = pair[:, start : start + frame_size] * window
            angular.append(
                gcc_phat_frame(
                    StereoSpectrum(np.fft.rfft(seg, axis=1)), grid, FS,
                    frame_size=frame_size,
                )
            )
        located = locate_offline(np.stack(angular))
        hits += located == grid.index_of(k / FS)
        # brute-force time-domain cross-correlation over the physical lags
        lags = np.arange(-max_lag, max_lag + 1)
        xc = [np.dot(np.roll(left, lag), right) for lag in lags]
        best = int(lags[np.argmax(xc)])
        xcorr_hits += located == grid.index_of(best / FS)
    ok = hits == trials and xcorr_hits == trials
    report(
        capsys, "04 localization oracle", ok,
        f"nearest grid point recovered {hits}/{trials}, "
        f"matches cross-correlation argmax {xcorr_hits}/{trials}",
    )


def test_05_factorization_monotonic(capsys):
    worst = -np.inf
    all_nonneg = True
    for seed in range(50):
        rng = np.random.default_rng(seed)
        v = rng.random((64, 200)) + 1e-3
        w, h, trace = factorize(v, 16, iterations=100, seed=seed,
                                return_divergence=True)
        rel_rise = np.max(np.diff(trace) / np.maximum(trace[:-1], 1e-300))
        worst = max(worst, float(rel_rise))
        all_nonneg &= bool(np.all(w >= 0) and np.all(h >= 0))
    ok = worst <= 1e-9 and all_nonneg
    report(
        capsys, "05 divergence never increases", ok,
        f"50 instances (64x200, D=16), 100 rounds: worst relative rise "
        f"{worst:.2e} (<=1e-9), nonnegative={all_nonneg}",
    )


def test_06_rank_one_recovery(capsys):
    rng = np.random.default_rng(7)
    v = np.outer(rng.random(64) + 0.1, rng.random(200) + 0.1)
    w, h = factorize(v, 1, iterations=200, seed=7)
    kl = kl_divergence(v, w, h)
    ok = kl < 1e-6
    report(
        capsys, "06 rank-1 recovery", ok,
        f"KL after 200 iterations {kl:.2e} (<1e-6)",
    )


def test_07_filter_equivalence(capsys):
    rng = np.random.default_rng(11)
    bins, n_atoms = 513, 32
    mismatches = 0
    for _ in range(100):
        atoms = rng.random((bins, n_atoms)) + 1e-3
        atoms /= atoms.sum(axis=0)
        mask = (rng.random(n_atoms) < 0.5).astype(np.float64)
        spec = StereoSpectrum(
            rng.standard_normal((2, bins)) + 1j * rng.standard_normal((2, bins))
        )
        via_wiener = wiener_filter(spec, atoms, np.ones((2, n_atoms)), mask)
        via_phase = phase_filter(spec, atoms, mask)
        mismatches += not np.array_equal(via_wiener.data, via_phase.data)
    ok = mismatches == 0
    report(
        capsys, "07 all-ones Wiener equals phase filter", ok,
        f"bit-for-bit on 100 random frames, {mismatches} mismatches",
    )


def test_08_soft_mask_binary_limit(capsys):
    grid = make_tdoa_grid()
    atom_tdoas = np.array(grid.values)  # one atom per grid point
    checked = mismatches = 0
    for epsilon in (1 / 64, 3 / 64, 1 / 4, 1 / 2, 1.0, 2.0):
        hard = MaskParams(epsilon=epsilon)
        soft = MaskParams(alpha=epsilon / 2, eta=0.0, beta=np.inf, mode="soft")
        for target in range(grid.n_tdoa):
            b = binary_mask(atom_tdoas, target, hard, grid)
            s = soft_mask(atom_tdoas, target, soft, grid)
            mismatches += not np.array_equal(b, s)
            checked += 1
    ok = mismatches == 0
    report(
        capsys, "08 soft mask collapses to binary", ok,
        f"eta=0, beta=inf, alpha=epsilon/2 over {checked} exhaustive "
        f"target/width cases, {mismatches} mismatches",
    )


_SCENARIO_CACHE = {}


def trained_scenario():
    """Standard scene + D=128 dictionary, built once for criteria 9 and 10."""
    if not _SCENARIO_CACHE:
        grid = make_tdoa_grid()
        window = symmetric_windows(1024, hop=256)
        scenario = standard_scenario(grid)
        dictionary = scenario.train_dictionary(window, n_atoms=128,
                                               iterations=100)
        _SCENARIO_CACHE.update(
            scenario=scenario, dictionary=dictionary, window=window
        )
    return (
        _SCENARIO_CACHE["scenario"],
        _SCENARIO_CACHE["dictionary"],
        _SCENARIO_CACHE["window"],
    )


def scenario_run(scenario, dictionary, window, epsilon):
    config = EnhancerConfig(
        dictionary=dictionary,
        window=window,
        grid=scenario.grid,
        fs=scenario.fs,
        mask=MaskParams(epsilon=epsilon),  # all-ones coefficients: phase path
        localizer_mode="offline",
    )
    buf = AudioBuffer(samples=scenario.mixture.astype(np.float32),
                      fs=scenario.fs)
    out, _ = enhance_file(config, buf)
    before = snr_db(scenario.target_ref, scenario.mixture)
    after = snr_db(scenario.target_ref, out.samples.astype(np.float64))
    return after - before, config


def test_09_enhancement_gain(capsys):
    t0 = time.perf_counter()
    scenario, dictionary, window = trained_scenario()
    narrow, _ = scenario_run(scenario, dictionary, window, epsilon=3 / 64)
    full, _ = scenario_run(scenario, dictionary, window, epsilon=1.0)
    elapsed = time.perf_counter() - t0
    ok = narrow >= 3.0 and -0.1 <= full <= 0.1 and elapsed < 30.0
    report(
        capsys, "09 enhancement on the standard scene", ok,
        f"improvement {narrow:+.2f} dB at eps=3/64 (>=+3), "
        f"{full:+.3f} dB at eps=1 (within +-0.1), {elapsed:.1f}s (<30s)",
    )


def test_10_interference_tradeoff(capsys):
    scenario, dictionary, window = trained_scenario()
    widths = [1.0, 1 / 2, 1 / 4, 3 / 64, 1 / 64]  # narrowing order
    powers = []
    for epsilon in widths:
        _, config = scenario_run(scenario, dictionary, window, epsilon)
        powers.append(
            shadow_interference_power(config, scenario.mixture,
                                      scenario.noise_ref)
        )
    ok = all(b <= a * (1 + 1e-12) for a, b in zip(powers, powers[1:]))
    detail = ", ".join(f"{p:.4g}" for p in powers)
    report(
        capsys, "10 residual interference narrows with the window", ok,
        f"power over eps 1 -> 1/64: {detail} (non-increasing)",
    )


def test_11_frame_time_grows_with_dictionary(capsys):
    window = symmetric_windows(1024, hop=256)
    grid = make_tdoa_grid()
    rng = np.random.default_rng(0)
    means = {}
    for d in (64, 256, 1024):
        atoms = (rng.random((513, d)) + 1e-3).astype(np.float32)
        atoms /= atoms.sum(axis=0)
        config = EnhancerConfig(
            dictionary=Dictionary(atoms=atoms, fs=FS, frame_size=1024),
            window=window,
            grid=grid,
            fs=FS,
        )
        means[d] = benchmark_frame_time(config, trials=200, warmup=10)["mean_ms"]
    ok = means[64] < means[256] < means[1024]
    report(
        capsys, "11 frame time grows with dictionary size", ok,
        f"mean ms D=64: {means[64]:.3f}, D=256: {means[256]:.3f}, "
        f"D=1024: {means[1024]:.3f} (strictly increasing)",
    )
