"""Generate the bundled contour colormap LUT.

Builds a 256-entry map along a dark-blue -> teal -> green -> yellow HSV path
with luma rising linearly, then nudges quantized entries so integer luma is
strictly increasing end to end. Writes src/soypheno/data/contour_lut.csv.
"""

from pathlib import Path

import numpy as np

LUMA = np.array([0.299, 0.587, 0.114])


def hsv_to_rgb_float(h_deg, s, v):
    h = (h_deg % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - abs(h % 2.0 - 1.0))
    m = v - c
    sector = int(h) % 6
    rgb = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)][sector]
    return np.array(rgb) + m


def build():
    n = 256
    entries = np.zeros((n, 3), dtype=np.int64)
    for i in range(n):
        t = i / (n - 1)
        hue = 260.0 - 200.0 * t
        sat = 0.85 - 0.30 * t
        target_luma = 0.035 + 0.885 * t
        unit = hsv_to_rgb_float(hue, sat, 1.0)
        unit_luma = float(unit @ LUMA)
        v = min(target_luma / unit_luma, 1.0)
        entries[i] = np.round(hsv_to_rgb_float(hue, sat, v) * 255.0).astype(np.int64)

    # Repair: bump the highest-weight channel until luma strictly increases.
    order = np.argsort(-LUMA)
    for i in range(1, n):
        while entries[i] @ LUMA <= entries[i - 1] @ LUMA:
            for ch in order:
                if entries[i, ch] < 255:
                    entries[i, ch] += 1
                    break
            else:
                raise RuntimeError(f"cannot make luma increase at entry {i}")
    return entries


def main():
    entries = build()
    luma = entries @ LUMA
    assert (np.diff(luma) > 0).all(), "luma not strictly increasing"
    assert entries.min() >= 0 and entries.max() <= 255
    out = Path(__file__).resolve().parents[1] / "src" / "soypheno" / "data" / "contour_lut.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as fh:
        for i, (r, g, b) in enumerate(entries):
            fh.write(f"{i},{r},{g},{b}\n")
    print(f"wrote {out} (luma {luma[0]:.1f} -> {luma[-1]:.1f})")


if __name__ == "__main__":
    main()
