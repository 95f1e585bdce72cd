import numpy as np
import pytest

from gmpfluid.roi import (
    GaussianFit, RoiRecord, RowProfile, brightest_row_profile, extract_roi, fit_gaussian_1d,
    gaussian_residual, row_mean_profile,
)
from gmpfluid.volume import Volume
from oracles import column_argmax_oracle, gaussian_grid_oracle


def _fit(mean):
    return GaussianFit(mean, 5.0, 1.0, 0.0)


def test_single_bright_row_profile():
    data = np.zeros((3, 10, 6))
    data[:, 4, :] = 1.0
    prof = brightest_row_profile(Volume(data))
    assert prof.total == 18
    assert prof.counts[4] == 18 and prof.counts.sum() == 18


def test_constant_volume_ties_to_row_zero():
    prof = brightest_row_profile(Volume(np.full((2, 7, 5), 0.5)))
    assert prof.counts[0] == 10 and prof.total == 10


def test_profile_matches_argmax_oracle(rng):
    vol = rng.random((3, 8, 8))
    assert np.array_equal(brightest_row_profile(Volume(vol)).counts, column_argmax_oracle(vol))


def test_row_mean_profile():
    data = np.zeros((2, 4, 3))
    data[:, 1, :] = 0.6
    prof = row_mean_profile(Volume(data))
    assert np.allclose(prof.counts, [0, 0.6, 0, 0])


def test_delta_profile_fit():
    counts = np.zeros(256)
    counts[100] = 40
    fit = fit_gaussian_1d(RowProfile(counts, 40))
    assert fit.mean == pytest.approx(100.0, abs=1e-6)
    assert fit.sigma >= 0.5


def test_exact_gaussian_recovered():
    x = np.arange(512.0)
    counts = 50 * np.exp(-((x - 120.0) ** 2) / (2 * 15.0**2))
    fit = fit_gaussian_1d(RowProfile(counts, counts.sum()))
    assert fit.mean == pytest.approx(120.0, abs=0.01)
    assert fit.sigma == pytest.approx(15.0, abs=0.05)


def test_noisy_gaussian_matches_grid_search(rng):
    x = np.arange(256.0)
    counts = 30 * np.exp(-((x - 140.3) ** 2) / (2 * 12.0**2)) + rng.uniform(0, 4, 256)
    fit = fit_gaussian_1d(RowProfile(counts, counts.sum()))
    _, mu, _ = gaussian_grid_oracle(counts, np.arange(120, 160, 0.25), np.arange(6, 40, 0.5))
    assert abs(fit.mean - mu) <= 1.0


def test_refinement_never_worse_than_moments(rng):
    x = np.arange(128.0)
    counts = rng.uniform(0, 1, 128) + 5 * (np.abs(x - 30) < 3) + 3 * (np.abs(x - 90) < 10)
    fit = fit_gaussian_1d(RowProfile(counts, counts.sum()))
    mass = counts.sum()
    mu0 = (x * counts).sum() / mass
    s0 = max(np.sqrt(((x - mu0) ** 2 * counts).sum() / mass), 0.5)
    assert fit.residual <= gaussian_residual(counts, counts.max(), mu0, s0) + 1e-9


def test_all_zero_profile_errors():
    with pytest.raises(ValueError):
        fit_gaussian_1d(RowProfile(np.zeros(10), 0.0))


def test_centred_crop():
    vol = Volume(np.zeros((1, 512, 256)))
    _, rec = extract_roi(vol, _fit(256.0), 256, 256)
    assert (rec.row_offset, rec.row_offset + rec.roi_height) == (128, 384)


def test_crop_clamps_near_top_and_bottom():
    vol = Volume(np.zeros((1, 512, 256)))
    assert extract_roi(vol, _fit(10.0))[1].row_offset == 0
    assert extract_roi(vol, _fit(505.0))[1].row_offset == 256


def test_roi_round_trip(rng):
    vol = Volume(rng.random((2, 40, 30)))
    roi, rec = extract_roi(vol, _fit(17.2), 16, 12)
    assert roi.shape == (2, 16, 12)
    for _ in range(50):
        s, r, c = rng.integers(2), rng.integers(16), rng.integers(12)
        sr, sc = rec.to_source(r, c)
        assert roi.data[s, r, c] == vol.data[s, sr, sc]
    pasted = rec.paste(roi.data)
    assert np.array_equal(pasted[:, rec.row_offset:rec.row_offset + 16, rec.col_offset:rec.col_offset + 12], roi.data)


def test_roi_larger_than_volume():
    with pytest.raises(ValueError):
        extract_roi(Volume(np.zeros((1, 10, 10))), _fit(5.0), 11, 10)


def test_record_dict_round_trip():
    rec = RoiRecord(3, 4, 5, 6, (20, 30))
    assert RoiRecord.from_dict(rec.to_dict()) == rec
    with pytest.raises(ValueError):
        RoiRecord(18, 0, 5, 6, (20, 30))
