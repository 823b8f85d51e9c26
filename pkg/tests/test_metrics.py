import math

import numpy as np

import pytest

from rsonerf.exceptions import ContractError, DimensionError
from rsonerf.metrics import MetricReport, MetricRow, build_report, luma, psnr, read_lpips_file, ssim


def reference_ssim(a, b, data_range=1.0):
    """
    Direct evaluation over every window that fits inside the image.
    """
    radius, sigma = 5, 1.5
    offsets = np.arange(-radius, radius + 1)
    profile = np.exp(-(offsets**2) / (2 * sigma**2))
    kernel = np.outer(profile, profile)
    kernel /= kernel.sum()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    scores = []
    for i in range(radius, a.shape[0] - radius):
        for j in range(radius, a.shape[1] - radius):
            wa = a[i - radius : i + radius + 1, j - radius : j + radius + 1]
            wb = b[i - radius : i + radius + 1, j - radius : j + radius + 1]
            mean_a, mean_b = (kernel * wa).sum(), (kernel * wb).sum()
            var_a = (kernel * wa * wa).sum() - mean_a**2
            var_b = (kernel * wb * wb).sum() - mean_b**2
            cov = (kernel * wa * wb).sum() - mean_a * mean_b
            scores.append(
                ((2 * mean_a * mean_b + c1) * (2 * cov + c2)) / ((mean_a**2 + mean_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(scores))


@pytest.fixture
def image(rng):
    return rng.uniform(size=(16, 20, 3))


class TestPsnr:
    def test_identical_images(self, image):
        assert psnr(image, image) == math.inf

    def test_black_against_white(self):
        assert psnr(np.zeros((4, 4, 3)), np.full((4, 4, 3), 255.0), max_value=255) == pytest.approx(0.0)

    def test_constant_offset(self, rng):
        a = rng.integers(0, 200, size=(8, 8, 3)).astype(np.float64)
        assert psnr(a, a + 16, max_value=255) == pytest.approx(24.0484, abs=1e-3)

    def test_symmetric(self, image, rng):
        other = rng.uniform(size=image.shape)
        assert psnr(image, other) == psnr(other, image)

    def test_decreases_with_noise(self, rng):
        base = rng.integers(0, 256, size=(12, 12, 3)).astype(np.float64)
        noise = rng.uniform(-1, 1, size=base.shape)
        values = [psnr(base, base + amplitude * noise, max_value=255) for amplitude in (4, 8, 16, 32)]
        assert values == sorted(values, reverse=True)
        assert len(set(values)) == 4

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))

    def test_mask(self, image, rng):
        other = image.copy()
        other[:, 10:] = rng.uniform(size=(16, 10, 3))
        mask = np.zeros((16, 20), dtype=bool)
        mask[:, :10] = True
        assert psnr(image, other, mask=mask) == math.inf
        assert psnr(image, other, mask=~mask) == pytest.approx(psnr(image[:, 10:], other[:, 10:]))

    def test_empty_mask(self, image):
        with pytest.raises(ContractError):
            psnr(image, image, mask=np.zeros((16, 20), dtype=bool))


class TestSsim:
    def test_identical_images(self, image):
        assert ssim(image, image) == pytest.approx(1.0)

    def test_constant_images(self):
        constant = np.full((12, 12), 0.3)
        assert ssim(constant, constant) == pytest.approx(1.0)

    def test_symmetric(self, image, rng):
        other = rng.uniform(size=image.shape)
        assert ssim(image, other) == pytest.approx(ssim(other, image), abs=1e-12)

    def test_range(self, image, rng):
        assert -1.0 <= ssim(image, rng.uniform(size=image.shape)) < 1.0

    def test_uses_luma(self, image, rng):
        other = rng.uniform(size=image.shape)
        assert ssim(image, other) == pytest.approx(ssim(luma(image), luma(other)), abs=1e-12)

    def test_matches_direct_evaluation(self, rng):
        for _ in range(20):
            a, b = rng.uniform(size=(24, 24)), rng.uniform(size=(24, 24))
            assert ssim(a, b) == pytest.approx(reference_ssim(a, b), abs=1e-6)

    def test_data_range(self, rng):
        a, b = rng.uniform(0, 255, size=(16, 16)), rng.uniform(0, 255, size=(16, 16))
        assert ssim(a, b, data_range=255) == pytest.approx(reference_ssim(a, b, data_range=255), abs=1e-6)

    def test_too_small(self):
        with pytest.raises(ContractError):
            ssim(np.zeros((10, 30)), np.zeros((10, 30)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            ssim(np.zeros((12, 12)), np.zeros((12, 13)))

    def test_full_mask_is_the_plain_score(self, image, rng):
        other = rng.uniform(size=image.shape)
        mask = np.ones(image.shape[:2], dtype=bool)
        assert ssim(image, other, mask=mask) == pytest.approx(ssim(image, other), abs=1e-12)

    def test_luma_weights(self):
        assert luma(np.array([[[1.0, 1.0, 1.0]]]))[0, 0] == pytest.approx(1.0)
        assert luma(np.array([[[0.0, 1.0, 0.0]]]))[0, 0] == pytest.approx(0.587)


class TestReport:
    def test_single_identical_pair(self, image):
        report = build_report([(image, image)])
        assert report.rows[0].psnr == math.inf
        assert report.rows[0].ssim == pytest.approx(1.0)
        assert not report.has_lpips
        assert report.mean_lpips is None

    def test_means(self, image, rng):
        pairs = [(image, rng.uniform(size=image.shape)), (image, image * 0.9)]
        report = build_report(pairs, view_ids=["front", "side"])
        assert [row.view_id for row in report.rows] == ["front", "side"]
        assert report.mean_psnr == pytest.approx((report.rows[0].psnr + report.rows[1].psnr) / 2, abs=1e-9)
        assert report.mean_ssim == pytest.approx((report.rows[0].ssim + report.rows[1].ssim) / 2, abs=1e-9)

    def test_empty(self):
        with pytest.raises(ContractError):
            build_report([])

    def test_view_id_count(self, image):
        with pytest.raises(ContractError):
            build_report([(image, image)], view_ids=["a", "b"])

    def test_text(self, image, rng):
        report = build_report([(image, rng.uniform(size=image.shape)), (image, image * 0.5)], max_value=1.0)
        text = report.to_text()
        lines = text.splitlines()
        assert lines[0].split() == ["view", "psnr_db", "ssim"]
        assert lines[-2].startswith("mean")
        assert lines[-1] == "max_value: 1"
        assert "lpips" not in text
        assert set(lines[1]) == {"-", " "}

    def test_records_round_trip(self, image, rng):
        report = build_report([(image, rng.uniform(size=image.shape)), (image, image)], external_lpips=[0.1, 0.0])
        again = MetricReport.from_records(report.to_records())
        assert again.rows == report.rows
        assert again.mean_ssim == report.mean_ssim
        assert again.mean_lpips == report.mean_lpips
        assert again.rows[1].psnr == math.inf

    def test_lpips_column(self, image):
        report = build_report([(image, image * 0.5)], external_lpips={"0": 0.081})
        assert report.has_lpips
        assert report.mean_lpips == pytest.approx(0.081)
        assert report.to_text().splitlines()[0].split() == ["view", "psnr_db", "ssim", "lpips"]
        assert "0.0810" in report.to_text()
        assert report.rows[0].as_record()["lpips"] == 0.081

    def test_missing_lpips_value(self, image):
        with pytest.raises(ContractError):
            build_report([(image, image)], external_lpips={"other": 0.1})

    def test_row_without_lpips(self):
        assert MetricRow("a", 20.0, 0.9).as_record() == {"view_id": "a", "psnr": 20.0, "ssim": 0.9}


class TestLpipsFile:
    def test_read(self, tmp_path):
        path = tmp_path / "lpips.txt"
        path.write_text("# view lpips\nview_000 0.12\n\nview_001 0.08  # second\n")
        assert read_lpips_file(str(path)) == {"view_000": 0.12, "view_001": 0.08}

    @pytest.mark.parametrize("content", ("view_000\n", "view_000 abc\n", "a b c\n"))
    def test_malformed(self, tmp_path, content):
        path = tmp_path / "lpips.txt"
        path.write_text(content)
        with pytest.raises(ContractError):
            read_lpips_file(str(path))
