"""Synthetic test signals: ECG-like records, spike trains and similar stereo pairs."""

import numpy as np

# (relative time to R in s, amplitude in mV, width in s) for P, Q, R, S, T
_WAVES = (
    (-0.20, 0.12, 0.025),
    (-0.035, -0.12, 0.010),
    (0.0, 1.10, 0.012),
    (0.035, -0.25, 0.011),
    (0.26, 0.30, 0.045),
)


def synthetic_ecg(duration=60.0, fs=360.0, heart_rate=75.0, rr_jitter=0.06,
                  noise=0.01, wander=0.05, gain=200.0, seed=0):
    """ECG-like record in integer ADC units plus the true R-peak indices.

    Beats are sums of Gaussian P, Q, R, S and T waves with jittered RR
    intervals and amplitudes, small white noise and a 0.3 Hz baseline wander.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    rr0 = 60.0 / heart_rate
    r_times = []
    tr = 0.4 + 0.2 * rng.random()
    while tr < duration - 0.4:
        r_times.append(tr)
        tr += rr0 * (1 + rr_jitter * rng.standard_normal())
    x = np.zeros(n)
    for tr in r_times:
        scale = 1 + 0.05 * rng.standard_normal()
        for dt, amp, width in _WAVES:
            centre = tr + dt * (1 + 0.03 * rng.standard_normal())
            lo, hi = np.searchsorted(t, [centre - 5 * width, centre + 5 * width])
            x[lo:hi] += scale * amp * np.exp(-0.5 * ((t[lo:hi] - centre) / width) ** 2)
    x += wander * np.sin(2 * np.pi * 0.3 * t + rng.uniform(0, 2 * np.pi))
    x += noise * rng.standard_normal(n)
    adc = np.round(1024 + gain * x)
    peaks = np.round(np.array(r_times) * fs).astype(int)
    return adc, peaks


def spike_train(duration=10.0, fs=360.0, rate=1.0, width=0.012, amplitude=1.0,
                wander=0.0, offset=0.5):
    """Identical Gaussian spikes every 1/rate seconds; returns (signal, apexes)."""
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    apexes = np.arange(offset, duration - 0.25, 1.0 / rate)
    x = np.zeros(n)
    for a in apexes:
        x += amplitude * np.exp(-0.5 * ((t - a) / width) ** 2)
    if wander:
        x += wander * np.sin(2 * np.pi * 0.3 * t)
    return x, np.round(apexes * fs).astype(int)


def similar_stereo(n_samples, fs=44100.0, n_partials=12, gain_mismatch=0.05,
                   noise_db=-45.0, seed=0):
    """Stereo pair sharing its spectral support.

    The left channel is a sum of decaying partials at random (off-grid)
    frequencies with random onsets; the right channel is the left one with a
    small gain mismatch, a fraction of one partial changed and added white
    noise ``noise_db`` below the signal power.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / fs
    left = np.zeros(n_samples)
    right = np.zeros(n_samples)
    f0 = rng.uniform(110.0, 440.0)
    for _ in range(n_partials):
        freq = f0 * rng.integers(1, 16) * (1 + 0.01 * rng.standard_normal())
        amp = rng.uniform(0.2, 1.0) / (1 + 0.2 * rng.integers(0, 8))
        phase = rng.uniform(0, 2 * np.pi)
        onset = rng.uniform(0, 0.5) * t[-1]
        env = np.exp(-(t - onset).clip(0) * rng.uniform(2.0, 20.0)) * (t >= onset)
        part = amp * env * np.sin(2 * np.pi * freq * t + phase)
        left += part
        right += part * (1 + gain_mismatch * rng.standard_normal())
    power = np.mean(left ** 2) or 1.0
    right += np.sqrt(power * 10 ** (noise_db / 10)) * rng.standard_normal(n_samples)
    peak = max(np.abs(left).max(), np.abs(right).max(), 1e-12)
    return left / peak * 0.9, right / peak * 0.9
