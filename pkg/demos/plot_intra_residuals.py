"""
Intra-prediction residuals from an image
========================================

Predict each block from its top and left neighbours and keep the
difference. Residual statistics depend strongly on the mode.
"""

from pathlib import Path

import numpy as np

from saabkit import Plane, extract_residuals, load_plane

out = Path("demo_output")
out.mkdir(exist_ok=True)

# %%
# A smooth synthetic picture with a little texture, saved as binary PGM.
rng = np.random.default_rng(4)
r, c = np.mgrid[0:129, 0:129]
img = 0.5 + 0.3 * np.sin(r / 17.0) * np.cos(c / 23.0) + 0.02 * rng.standard_normal((129, 129))
img = np.clip(img, 0, 1)
raw = np.floor(img * 255 + 0.5).astype(np.uint8)
(out / "smooth.pgm").write_bytes(b"P5\n129 129\n255\n" + raw.tobytes())

plane = load_plane(out / "smooth.pgm")
print("plane:", plane.width, "x", plane.height)

# %%
# Blocks start at (1, 1) so every block has a reference border.
for mode in ("planar", "dc", "horizontal", "vertical"):
    res = extract_residuals(plane, 8, mode)
    print(f"{mode:10} blocks={len(res)}  mean energy={np.mean(res.blocks ** 2):.2e}")

# %%
# Content that matches the predictor leaves nothing behind.
rows = Plane(33, 33, np.tile(np.linspace(0, 1, 33)[:, None], (1, 33)))
print("row ramp, horizontal:", np.abs(extract_residuals(rows, 4, "horizontal").blocks).max())
