"""
Taylor features of the Gaussian kernel
======================================

Each Taylor feature is a scaled monomial damped by ``exp(-|x|^2 / 2 sigma^2)``.
Summing products of features up to order r recovers the kernel as r grows.
"""

import numpy as np

from mfga import gaussian_kernel, n_multi_indices, taylor_design, truncation_bound

rng = np.random.default_rng(0)
x, x2 = rng.normal(size=(2, 3)) * 0.6
sigma = 1.0
exact = gaussian_kernel(x, x2, sigma)[0, 0]

# columns are ordered by total degree, so the first n_multi_indices(d, r)
# columns of an order-8 design are exactly the order-r design
A = taylor_design(np.vstack([x, x2]), sigma, 8)
print(" r  features   estimate     |error|      bound")
for r in range(9):
    c = n_multi_indices(3, r)
    est = A[0, :c] @ A[1, :c]
    bound = truncation_bound(np.linalg.norm(x), np.linalg.norm(x2), sigma, r)
    print(f"{r:2d}  {c:8d}  {est:.8f}  {abs(est - exact):.2e}  {bound:.2e}")
print(f"kernel value {exact:.8f}")
