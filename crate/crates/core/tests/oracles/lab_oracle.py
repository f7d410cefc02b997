#!/usr/bin/env python3
"""Standalone sRGB (D65) -> CIELAB reference used to freeze test values.

Reference white is the image of sRGB (1,1,1) under the conversion matrix,
so pure white lands on a = b = 0. Cross-check against scikit-image, which
uses the rounded CIE white point, agrees to about 5e-3 in a/b.
"""
import numpy as np

M = np.array([
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
])
WHITE = M.sum(axis=1)


def lab(rgb):
    c = np.asarray(rgb, dtype=float) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = M @ lin / WHITE
    d = 6 / 29
    f = np.where(xyz > d ** 3, np.cbrt(xyz), xyz / (3 * d * d) + 4 / 29)
    return 116 * f[1] - 16, 500 * (f[0] - f[1]), 200 * (f[1] - f[2])


if __name__ == "__main__":
    for rgb in [(255, 0, 0), (0, 255, 0), (0, 0, 255), (128, 64, 200), (10, 10, 10)]:
        print(rgb, ", ".join(f"{v:.10f}" for v in lab(rgb)))
