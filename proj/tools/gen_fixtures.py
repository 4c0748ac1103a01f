#!/usr/bin/env python3
"""Reference oracle for the preprocessing fixtures.

Implements the documented preprocessing arithmetic directly in numpy
(contraction-free f64, identical operation order) and freezes the results
under tests/fixtures/. The C++ tests compare their output to these files
bit for bit.
"""
import os
import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

RAW_W, RAW_H = 1241, 376
CROP_H = 224
NET_W, NET_H = 480, 128


def resize_bilinear(img, out_h, out_w):
    """img: [C,H,W] float64. Pixel centers at (i+0.5)*scale-0.5, edge clamp.

    Mirrors the library arithmetic exactly:
      v0 = p00*(1-wx) + p10*wx
      v1 = p01*(1-wx) + p11*wx
      out = v0*(1-wy) + v1*wy
    """
    c, h, w = img.shape
    sy = float(h) / out_h
    sx = float(w) / out_w
    out = np.empty((c, out_h, out_w), dtype=np.float64)

    fx = (np.arange(out_w, dtype=np.float64) + 0.5) * sx - 0.5
    fx = np.minimum(np.maximum(fx, 0.0), float(w - 1))
    x0 = np.floor(fx).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    wx = fx - x0

    for r in range(out_h):
        fy = (r + 0.5) * sy - 0.5
        fy = min(max(fy, 0.0), float(h - 1))
        y0 = int(np.floor(fy))
        y1 = min(y0 + 1, h - 1)
        wy = fy - y0
        for ch in range(c):
            p00 = img[ch, y0, x0]
            p10 = img[ch, y0, x1]
            p01 = img[ch, y1, x0]
            p11 = img[ch, y1, x1]
            v0 = p00 * (1.0 - wx) + p10 * wx
            v1 = p01 * (1.0 - wx) + p11 * wx
            out[ch, r] = v0 * (1.0 - wy) + v1 * wy
    return out


def preprocess(raw):
    img = raw
    if img.shape[1] != RAW_H or img.shape[2] != RAW_W:
        img = resize_bilinear(img, RAW_H, RAW_W)
    crop = img[:, RAW_H - CROP_H:, :]
    out = resize_bilinear(crop, NET_H, NET_W)
    return out / 255.0


def pattern(h, w):
    r = np.arange(h, dtype=np.float64)[None, :, None]
    c = np.arange(w, dtype=np.float64)[None, None, :]
    ch = np.arange(3, dtype=np.float64)[:, None, None]
    return np.mod(r * 7.0 + c * 13.0 + ch * 29.0, 256.0)


def imu_window_fixture():
    # Exact 100 Hz stream; values from pure rational arithmetic so the
    # library reproduces them bit for bit. Window around t_source = 10.0:
    # rows k = 11..30 of t_k = 9.8 + 0.01*k.
    rows = []
    for k in range(11, 31):
        w = [(k * 3.0 + j) / 7.0 for j in range(3)]
        a = [(k * 5.0 + 3.0 * j) / 11.0 for j in range(3)]
        rows.append(w + a)
    return np.asarray(rows, dtype=np.float64)


def main():
    os.makedirs(OUT, exist_ok=True)
    preprocess(pattern(RAW_H, RAW_W)).tofile(os.path.join(OUT, "preprocess_1241x376.bin"))
    preprocess(pattern(370, 1226)).tofile(os.path.join(OUT, "preprocess_1226x370.bin"))
    imu_window_fixture().tofile(os.path.join(OUT, "imu_window.bin"))
    print("fixtures written to", os.path.abspath(OUT))


if __name__ == "__main__":
    main()
