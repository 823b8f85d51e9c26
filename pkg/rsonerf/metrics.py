"""
Image-quality metrics between rendered and ground-truth views, and the per-view report built from them.
"""
import json
import math
from dataclasses import dataclass, field as dataclass_field
from typing import List, Optional

import numpy as np
from skimage.metrics import structural_similarity

from .exceptions import ContractError, DimensionError


__all__ = ("psnr", "ssim", "luma", "MetricRow", "MetricReport", "build_report", "read_lpips_file", "SSIM_WINDOW")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

# Rec.601
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("metric", a.shape, b.shape)
    return a, b


def psnr(a, b, max_value=1.0, mask=None):
    """
    ``10 * log10(max_value^2 / MSE)`` in dB over all pixels and channels (or over ``mask`` pixels only).
    Identical images give ``inf``.
    """
    a, b = _pair(a, b)
    error = (a - b) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[: mask.ndim]:
            raise DimensionError("psnr mask", a.shape, mask.shape)
        if not mask.any():
            raise ContractError("psnr mask selects no pixels")
        error = error[mask]
    mse = float(error.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value**2 / mse)


def luma(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[-1] >= 3:
        return image[..., :3] @ LUMA_WEIGHTS
    raise ContractError("Expected an HxW or HxWxC image, got shape %s" % (image.shape,))


def ssim(a, b, data_range=1.0, mask=None):
    """
    Mean SSIM of the luma channels over an 11x11 Gaussian window (sigma 1.5), with
    ``C1 = (0.01 L)^2`` and ``C2 = (0.03 L)^2`` for dynamic range ``L``. Windows are only taken fully inside the
    image. With ``mask``, the mean runs over the window centres it selects.
    """
    a, b = _pair(a, b)
    ya, yb = luma(a), luma(b)
    if min(ya.shape) < SSIM_WINDOW:
        raise ContractError("SSIM needs images of at least %dx%d, got %s" % (SSIM_WINDOW, SSIM_WINDOW, ya.shape))
    score, full = structural_similarity(
        ya,
        yb,
        win_size=SSIM_WINDOW,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        data_range=data_range,
        full=True,
    )
    if mask is None:
        return float(score)
    pad = (SSIM_WINDOW - 1) // 2
    mask = np.asarray(mask, dtype=bool)[pad:-pad, pad:-pad]
    if not mask.any():
        raise ContractError("ssim mask selects no window centres")
    return float(full[pad:-pad, pad:-pad][mask].mean())


@dataclass
class MetricRow:
    view_id: str
    psnr: float
    ssim: float
    lpips: Optional[float] = None

    def as_record(self):
        record = {"view_id": self.view_id, "psnr": self.psnr, "ssim": self.ssim}
        if self.lpips is not None:
            record["lpips"] = self.lpips
        return record


@dataclass
class MetricReport:
    rows: List[MetricRow] = dataclass_field(default_factory=list)
    max_value: float = 1.0

    @property
    def has_lpips(self):
        return bool(self.rows) and all(row.lpips is not None for row in self.rows)

    def _mean(self, name):
        values = [getattr(row, name) for row in self.rows]
        return float(np.mean(values)) if values else math.nan

    @property
    def mean_psnr(self):
        return self._mean("psnr")

    @property
    def mean_ssim(self):
        return self._mean("ssim")

    @property
    def mean_lpips(self):
        return self._mean("lpips") if self.has_lpips else None

    def to_text(self):
        columns = ["view", "psnr_db", "ssim"] + (["lpips"] if self.has_lpips else [])
        body = [
            [row.view_id, "%.4f" % row.psnr, "%.4f" % row.ssim] + (["%.4f" % row.lpips] if self.has_lpips else [])
            for row in self.rows
        ]
        footer = ["mean", "%.4f" % self.mean_psnr, "%.4f" % self.mean_ssim]
        if self.has_lpips:
            footer.append("%.4f" % self.mean_lpips)
        table = [columns] + body + [footer]
        widths = [max(len(line[i]) for line in table) for i in range(len(columns))]
        lines = ["  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in table]
        lines.insert(1, "  ".join("-" * width for width in widths))
        lines.insert(-1, lines[1])
        lines.append("max_value: %g" % self.max_value)
        return "\n".join(lines) + "\n"

    def to_records(self):
        """
        One JSON object per line, one line per view.
        """
        return "".join(json.dumps(row.as_record()) + "\n" for row in self.rows)

    @classmethod
    def from_records(cls, text, max_value=1.0):
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            rows.append(MetricRow(str(record["view_id"]), record["psnr"], record["ssim"], record.get("lpips")))
        return cls(rows=rows, max_value=max_value)


def build_report(pairs, external_lpips=None, max_value=1.0, view_ids=None, mask=None):
    """
    ``pairs`` is a sequence of ``(rendered, ground_truth)`` images. ``external_lpips`` maps view id to a
    precomputed LPIPS value (or lists one value per pair).
    """
    pairs = list(pairs)
    if not pairs:
        raise ContractError("build_report needs at least one image pair")
    view_ids = [str(v) for v in view_ids] if view_ids is not None else [str(index) for index in range(len(pairs))]
    if len(view_ids) != len(pairs):
        raise ContractError("Got %d view ids for %d image pairs" % (len(view_ids), len(pairs)))
    if external_lpips is not None and not isinstance(external_lpips, dict):
        external_lpips = dict(zip(view_ids, external_lpips))
    rows = []
    for view_id, (rendered, truth) in zip(view_ids, pairs):
        lpips = None
        if external_lpips is not None:
            try:
                lpips = float(external_lpips[view_id])
            except KeyError:
                raise ContractError("No LPIPS value supplied for view %r" % view_id)
        rows.append(
            MetricRow(
                view_id,
                psnr(rendered, truth, max_value=max_value, mask=mask),
                ssim(rendered, truth, data_range=max_value, mask=mask),
                lpips,
            )
        )
    return MetricReport(rows=rows, max_value=max_value)


def read_lpips_file(path):
    """
    Reads ``view_id value`` pairs, one per line; blank lines and ``#`` comments are skipped.
    """
    values = {}
    with open(path, encoding="utf-8") as stream:
        for number, line in enumerate(stream, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ContractError("%s:%d: expected 'view_id value', got %r" % (path, number, line))
            try:
                values[parts[0]] = float(parts[1])
            except ValueError:
                raise ContractError("%s:%d: %r is not a number" % (path, number, parts[1]))
    return values
