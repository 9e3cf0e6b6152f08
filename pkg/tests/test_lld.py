import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spontser.audio_ingest import FrameSequence
from spontser.errors import BadConfig
from spontser.lld import LLDConfig, extract_llds, f0, mfcc, voice_prob, write_lld_csv, zcr

RATE = 16000


def tone(freq, n=400, rate=RATE, phase=0.0):
    return np.sin(2 * np.pi * freq * np.arange(n) / rate + phase)


# -- independent references ---------------------------------------------------


def ref_mfcc(frame, rate, n_mfcc=12, n_filters=26, floor=1e-10, pre=0.97):
    """Textbook MFCC from an explicit DFT sum; no shared code with the package."""
    x = [float(v) for v in frame]
    n = len(x)
    y = [x[0]] + [x[i] - pre * x[i - 1] for i in range(1, n)]
    y = [y[i] * (0.54 - 0.46 * math.cos(2 * math.pi * i / (n - 1))) for i in range(n)]
    idx = np.arange(n)
    mags = []
    for k in range(n // 2 + 1):
        ang = -2j * np.pi * k * idx / n
        mags.append(abs(np.sum(np.array(y) * np.exp(ang))))
    top = 2595 * math.log10(1 + (rate / 2) / 700)
    edges = [700 * (10 ** (top * i / (n_filters + 1) / 2595) - 1) for i in range(n_filters + 2)]
    logs = []
    for m in range(n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        e = 0.0
        for k, mag in enumerate(mags):
            f = k * rate / n
            if lo < f < hi:
                e += mag * ((f - lo) / (mid - lo) if f <= mid else (hi - f) / (hi - mid))
        logs.append(math.log(max(e, floor)))
    out = []
    for q in range(1, n_mfcc + 1):
        s = sum(logs[j] * math.cos(math.pi * q * (2 * j + 1) / (2 * n_filters)) for j in range(n_filters))
        out.append(math.sqrt(2.0 / n_filters) * s)
    return np.array(out)


def ref_sign_changes(frame):
    pos = [v >= 0 for v in frame]
    return sum(1 for a, b in zip(pos, pos[1:]) if a != b)


def ref_nccf_max(frame, rate, fmin=80.0, fmax=400.0):
    x = np.asarray(frame, dtype=float)
    x = x - x.mean()
    n = x.size
    best = 0.0
    for tau in range(math.ceil(rate / fmax), min(math.floor(rate / fmin), n - 2) + 1):
        a, b = x[: n - tau], x[tau:]
        den = math.sqrt(float(a @ a) * float(b @ b))
        if den > 0:
            best = max(best, float(a @ b) / den)
    return min(best, 1.0)


# -- MFCC ---------------------------------------------------------------------


def test_mfcc_matches_direct_dft_reference():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        frame = rng.uniform(-1, 1, 400) * rng.uniform(0.01, 1.0)
        worst = max(worst, np.max(np.abs(mfcc(frame, RATE) - ref_mfcc(frame, RATE))))
    assert worst < 1e-9


def test_mfcc_zero_frame_is_exactly_zero():
    out = mfcc(np.zeros(400), RATE)
    assert out.shape == (12,)
    assert np.all(out == 0.0)


def test_mfcc_deterministic_and_scale_invariant():
    frame = tone(220)
    assert np.array_equal(mfcc(frame, RATE), mfcc(frame.copy(), RATE))
    doubled = mfcc(2 * frame, RATE)
    assert np.max(np.abs(doubled - mfcc(frame, RATE))) < 1e-9
    assert np.max(np.abs(doubled - ref_mfcc(2 * frame, RATE))) < 1e-9


def test_lld_config_invariants():
    with pytest.raises(BadConfig):
        mfcc(tone(200), RATE, LLDConfig(n_mfcc=30))
    with pytest.raises(BadConfig):
        mfcc(tone(200), RATE, LLDConfig(fmax=9000.0))
    with pytest.raises(BadConfig):
        LLDConfig(f0_min=400, f0_max=80).validate()


# -- ZCR ----------------------------------------------------------------------


def test_zcr_constant_and_alternating():
    assert zcr(np.full(400, 0.5)) == 0.0
    assert zcr(np.tile([1.0, -1.0], 200)) == 1.0


def test_zcr_sine_matches_direct_count():
    frame = tone(100)
    assert ref_sign_changes(frame) == 4
    assert zcr(frame) == 4 / 399


def test_zcr_zero_counts_as_positive():
    assert zcr(np.array([0.0, 1.0, 0.0, 2.0])) == 0.0
    assert zcr(np.array([-1.0, 0.0, -1.0])) == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(2, 300), elements=st.floats(-1, 1)), st.floats(1e-3, 1e3))
def test_zcr_scale_invariant(frame, scale):
    assert zcr(frame * scale) == zcr(frame)
    assert zcr(frame) == ref_sign_changes(frame) / (frame.size - 1)


# -- voicing and pitch --------------------------------------------------------


def test_voice_prob_zero_frame():
    assert voice_prob(np.zeros(400), RATE) == 0.0
    assert f0(np.zeros(400), RATE) == 0.0


def test_voice_prob_tone():
    frame = tone(200)
    assert voice_prob(frame, RATE) >= 0.9
    assert voice_prob(frame, RATE) == pytest.approx(ref_nccf_max(frame, RATE), abs=1e-12)


def test_voice_prob_seeded_noise():
    noise = np.random.default_rng(0).uniform(-1, 1, 400)
    vp = voice_prob(noise, RATE)
    assert vp == pytest.approx(ref_nccf_max(noise, RATE), abs=1e-12)
    assert vp == pytest.approx(0.18673619108393386, abs=1e-12)
    assert vp < 0.5
    assert f0(noise, RATE) == 0.0


def test_short_frame_is_unvoiced():
    frame = tone(200, n=150)
    assert voice_prob(frame, RATE) == 0.0
    assert f0(frame, RATE) == 0.0


@pytest.mark.parametrize("freq", [95] + list(range(80, 401, 20)))
def test_f0_on_tone_grid(freq):
    frame = tone(freq, phase=0.3)
    est = f0(frame, RATE)
    assert abs(est - freq) <= 2.0


def test_f0_prefers_fundamental_over_subharmonic():
    # a tone with a strong second harmonic still reports the fundamental
    t = np.arange(400) / RATE
    frame = np.sin(2 * np.pi * 150 * t) + 0.8 * np.sin(2 * np.pi * 300 * t)
    assert abs(f0(frame, RATE) - 150) <= 2.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(2, 600), elements=st.floats(-1, 1)))
def test_voicing_ranges(frame):
    cfg = LLDConfig()
    vp = voice_prob(frame, RATE, cfg)
    pitch = f0(frame, RATE, cfg)
    assert 0.0 <= vp <= 1.0
    assert pitch == 0.0 or cfg.f0_min <= pitch <= cfg.f0_max


# -- matrix -------------------------------------------------------------------


def test_extract_zero_frames():
    llds = extract_llds(FrameSequence(np.zeros((3, 400)), 400, 160, RATE))
    assert llds.values.shape == (3, 15) and llds.k == 15
    assert np.all(llds.values == 0.0)
    assert llds.descriptor_names == tuple(f"mfcc{i}" for i in range(1, 13)) + ("zcr", "voiceprob", "f0")


def test_extract_tone_row(tmp_path):
    llds = extract_llds(FrameSequence(tone(200)[None, :], 400, 160, RATE))
    row = dict(zip(llds.descriptor_names, llds.values[0]))
    assert abs(row["f0"] - 200) <= 2 and row["voiceprob"] >= 0.9
    path = tmp_path / "lld.csv"
    write_lld_csv(path, llds)
    header, first = path.read_text().splitlines()
    assert header == "frame_index," + ",".join(llds.descriptor_names)
    assert first.startswith("0,")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0.0, 1.0))
def test_extract_fuzz_ranges(seed, n_frames, noise):
    rng = np.random.default_rng(seed)
    frames = np.clip(noise * rng.standard_normal((n_frames, 400)) + (1 - noise) * tone(rng.uniform(60, 500)), -1, 1)
    llds = extract_llds(FrameSequence(frames, 400, 160, RATE))
    vp, pitch = llds.values[:, 13], llds.values[:, 14]
    assert np.all(np.isfinite(llds.values))
    assert np.all((vp >= 0) & (vp <= 1))
    assert np.all((pitch == 0) | ((pitch >= 80) & (pitch <= 400)))
