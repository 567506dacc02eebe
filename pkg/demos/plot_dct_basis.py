"""
The 2-D DCT as an affine kernel
===============================

Build the orthonormal block DCT, check it against the cosine formula and
render its basis functions as a PGM grid.
"""

from pathlib import Path

import numpy as np

from saabkit import basis_grid, dct_kernel, forward, inverse, orthonormality_error, save_pgm

out = Path("demo_output")
out.mkdir(exist_ok=True)

# %%
# Rows are basis functions, indexed p*n + q by frequency pair (p, q).
k = dct_kernel(4)
print("matrix shape:", k.matrix.shape)
print("DC row:", k.matrix[0])
print("||MM^T - I||_F =", orthonormality_error(k.matrix))

# %%
# A smooth ramp block puts almost everything into the first few coefficients.
x = np.add.outer(np.arange(4.0), np.arange(4.0)).ravel()
y = forward(k, x)
print("coefficients:", np.round(y.reshape(4, 4), 3))
print("reconstruction error:", np.abs(inverse(k, y) - x).max())

# %%
# Each tile is one basis function, stretched to 0..255 on its own.
for n in (4, 8):
    img = basis_grid(dct_kernel(n), columns=n)
    save_pgm(img, out / f"dct{n}_basis.pgm")
    print(f"dct{n}_basis.pgm: {img.width}x{img.height}")
