"""Counter-based random streams.

Every variate in the laboratory is a pure function of
(seed, stream tag, path index, step index): a splitmix64-style integer hash
turns the counter into a uniform, and Gaussians come from the inverse normal
CDF.  Disjoint (path, step) cells therefore come from disjoint streams,
regeneration with the same seed is bit-identical, and parallel workers cannot
perturb the draw order because there is no draw order.

This layer is deliberately plain numpy + scipy and is shared by both kernel
backends, so backends agree on the random inputs exactly.
"""

import numpy as np
from scipy.special import ndtri

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# Stream tags: one per independent source of randomness.  Arbitrary distinct
# odd constants; the driver stream feeds Brownian increments, the others feed
# auxiliary draws that must be independent of the driver.
STREAM_DRIVER = np.uint64(0x243F6A8885A308D3)
STREAM_THRESHOLD = np.uint64(0x13198A2E03707345)
STREAM_BRIDGE = np.uint64(0xA4093822299F31D0)
STREAM_JUMP = np.uint64(0x082EFA98EC4E6C89)
STREAM_ZERO = np.uint64(0x452821E638D01377)


def _mix(x):
    """splitmix64 finaliser on uint64 scalars or arrays (wrapping is the
    point, so overflow warnings are silenced here)."""
    x = np.uint64(x) if np.isscalar(x) else x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def stream_key(seed, stream):
    """Derive the 64-bit key for (seed, stream)."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        folded = _mix(s * _GOLDEN) ^ np.uint64(stream)
    return _mix(folded)


def _counters(path_lo, n_paths, n_steps):
    """uint64 counter grid: (path << 32) | step, paths are global indices."""
    if path_lo < 0 or n_paths < 1 or n_steps < 1:
        raise ValueError("need path_lo >= 0, n_paths >= 1, n_steps >= 1")
    if path_lo + n_paths > (1 << 32) or n_steps > (1 << 32):
        raise ValueError("path or step index exceeds the 32-bit counter field")
    paths = np.arange(path_lo, path_lo + n_paths, dtype=np.uint64)
    steps = np.arange(n_steps, dtype=np.uint64)
    return (paths[:, None] << np.uint64(32)) | steps[None, :]


def uniforms(seed, stream, path_lo, n_paths, n_steps):
    """Uniforms in (0, 1), shape (n_paths, n_steps).

    Cell (i, j) depends only on (seed, stream, path_lo + i, j).
    """
    key = stream_key(seed, stream)
    c = _counters(path_lo, n_paths, n_steps)
    with np.errstate(over="ignore"):
        h = _mix(key + (c + np.uint64(1)) * _GOLDEN)
    # 53-bit mantissa, offset by half a ulp: never exactly 0 or 1
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def standard_normals(seed, stream, path_lo, n_paths, n_steps):
    """Inverse-CDF Gaussians on the same counter layout as `uniforms`."""
    return ndtri(uniforms(seed, stream, path_lo, n_paths, n_steps))


def exponentials(seed, stream, path_lo, n_paths):
    """Unit-rate exponentials, one per path (step slot 0)."""
    return -np.log(uniforms(seed, stream, path_lo, n_paths, 1)[:, 0])
