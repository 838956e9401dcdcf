"""
Dense 3D tensor operations on Volumes.

Convolution is cross-correlation (no kernel flip). Every output voxel is an
accumulation over kernel offsets in a fixed (z, y, x) order, each offset
contributing one matrix product over input channels, so repeated calls on
identical inputs give bitwise identical results.
"""

from typing import Optional

import numpy as np

from ..errors import ShapeError
from .volume import Volume, check_divisible, check_volume


def conv_output_dim(dim: int, k: int, stride: int, padding: int) -> int:
    """Output length along one axis: floor((dim + 2*padding - k) / stride) + 1."""
    return (dim + 2 * padding - k) // stride + 1


def _check_conv_args(
    x: Volume,
    weight: np.ndarray,
    bias: Optional[np.ndarray],
    stride: int,
    padding: int,
) -> tuple[int, int, int, int]:
    check_volume(x, "conv3d input")
    if weight.ndim != 5:
        raise ShapeError(f"conv3d kernel must have rank 5 (out_c, in_c, k, k, k), got {weight.shape}")
    out_c, in_c, kd, kh, kw = weight.shape
    if not kd == kh == kw:
        raise ShapeError(f"conv3d kernel must be cubic, got spatial size {(kd, kh, kw)}")
    if in_c != x.shape[0]:
        raise ShapeError(f"conv3d kernel expects {in_c} input channels, input has {x.shape[0]}")
    if bias is not None and bias.shape != (out_c,):
        raise ShapeError(f"conv3d bias must have shape ({out_c},), got {bias.shape}")
    if stride < 1:
        raise ShapeError(f"conv3d stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"conv3d padding must be >= 0, got {padding}")
    out_dims = tuple(conv_output_dim(d, kd, stride, padding) for d in x.shape[1:])
    if any(d < 1 for d in out_dims):
        raise ShapeError(
            f"conv3d output would be empty: input {x.shape[1:]}, k={kd}, "
            f"stride={stride}, padding={padding}"
        )
    return kd, *out_dims


def _window(k_offset: tuple[int, int, int], out_dims: tuple[int, int, int], stride: int):
    kz, ky, kx = k_offset
    od, oh, ow = out_dims
    return (
        slice(None),
        slice(kz, kz + stride * (od - 1) + 1, stride),
        slice(ky, ky + stride * (oh - 1) + 1, stride),
        slice(kx, kx + stride * (ow - 1) + 1, stride),
    )


def _pad(x: Volume, padding: int) -> Volume:
    if padding == 0:
        return x
    p = padding
    return np.pad(x, ((0, 0), (p, p), (p, p), (p, p)))


def conv3d(
    x: Volume,
    weight: np.ndarray,
    bias: Optional[np.ndarray] = None,
    stride: int = 1,
    padding: int = 0,
) -> Volume:
    """
    3D cross-correlation.

    Args:
        x: Input Volume (in_c, D, H, W)
        weight: Kernel (out_c, in_c, k, k, k)
        bias: Optional bias vector (out_c,)
        stride: Stride along every spatial axis (>= 1)
        padding: Zero padding on every side (>= 0)

    Returns:
        Volume: (out_c, D', H', W') with D' = floor((D + 2p - k)/s) + 1

    Raises:
        ShapeError: On any shape or argument mismatch
        NumericalError: If the input contains NaN or Inf

    Example:
        >>> conv3d(np.full((1, 1, 1, 1), 2.0), np.full((1, 1, 1, 1, 1), 3.0), np.array([1.0]))
        array([[[[7.]]]])
    """
    k, od, oh, ow = _check_conv_args(x, weight, bias, stride, padding)
    out_c, in_c = weight.shape[:2]
    xp = _pad(x, padding)
    out = np.zeros((out_c, od * oh * ow), dtype=np.float64)
    for kz in range(k):
        for ky in range(k):
            for kx in range(k):
                patch = xp[_window((kz, ky, kx), (od, oh, ow), stride)].reshape(in_c, -1)
                out += weight[:, :, kz, ky, kx] @ patch
    if bias is not None:
        out += bias[:, None]
    return out.reshape(out_c, od, oh, ow)


def conv3d_backward(
    x: Volume,
    weight: np.ndarray,
    grad_out: Volume,
    stride: int = 1,
    padding: int = 0,
) -> tuple[Volume, np.ndarray, np.ndarray]:
    """
    Gradients of conv3d with respect to input, kernel and bias.

    Returns:
        tuple: (grad_x, grad_weight, grad_bias)
    """
    k, od, oh, ow = _check_conv_args(x, weight, None, stride, padding)
    out_c, in_c = weight.shape[:2]
    if grad_out.shape != (out_c, od, oh, ow):
        raise ShapeError(
            f"conv3d upstream gradient has shape {grad_out.shape}, expected {(out_c, od, oh, ow)}"
        )
    xp = _pad(x, padding)
    g = grad_out.reshape(out_c, -1)
    grad_xp = np.zeros_like(xp)
    grad_w = np.empty_like(weight)
    for kz in range(k):
        for ky in range(k):
            for kx in range(k):
                window = _window((kz, ky, kx), (od, oh, ow), stride)
                patch = xp[window].reshape(in_c, -1)
                grad_w[:, :, kz, ky, kx] = g @ patch.T
                grad_xp[window] += (weight[:, :, kz, ky, kx].T @ g).reshape(in_c, od, oh, ow)
    grad_b = g.sum(axis=1)
    p = padding
    _, d, h, w = x.shape
    grad_x = grad_xp[:, p:p + d, p:p + h, p:p + w]
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def _blocks(x: Volume, k: int, what: str) -> np.ndarray:
    check_volume(x, what)
    if k < 1:
        raise ShapeError(f"{what}: kernel size must be >= 1, got {k}")
    check_divisible(x.shape, k, what)
    c, d, h, w = x.shape
    return x.reshape(c, d // k, k, h // k, k, w // k, k)


def max_pool3d(x: Volume, k: int) -> Volume:
    """Non-overlapping k³ max pooling; spatial dims must be divisible by k."""
    return _blocks(x, k, "max_pool3d").max(axis=(2, 4, 6))


def avg_pool3d(x: Volume, k: int) -> Volume:
    """Non-overlapping k³ average pooling; spatial dims must be divisible by k."""
    return _blocks(x, k, "avg_pool3d").mean(axis=(2, 4, 6))


def avg_pool3d_backward(grad_out: Volume, k: int) -> Volume:
    """Spread each upstream gradient evenly over its k³ input window."""
    return _replicate(grad_out, k) / float(k ** 3)


def _replicate(x: np.ndarray, factor: int) -> np.ndarray:
    return x.repeat(factor, axis=1).repeat(factor, axis=2).repeat(factor, axis=3)


def upsample_nearest3d(x: Volume, factor: int) -> Volume:
    """
    Nearest-neighbour upsampling: every voxel replicated factor³ times.

    Raises:
        ShapeError: If factor < 1
    """
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    check_volume(x, "upsample_nearest3d input")
    if factor == 1:
        return x.copy()
    return _replicate(x, factor)


def upsample_nearest3d_backward(grad_out: Volume, factor: int) -> Volume:
    """Sum upstream gradients over each replicated factor³ block."""
    c, d, h, w = grad_out.shape
    f = factor
    return grad_out.reshape(c, d // f, f, h // f, f, w // f, f).sum(axis=(2, 4, 6))

