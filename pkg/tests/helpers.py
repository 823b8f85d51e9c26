import numpy as np

from rsonerf.autodiff import Tape, backward, columns, mse_loss
from rsonerf.renderer import CameraIntrinsics, Pose, RenderConfig, generate_rays, render_rays


def numeric_gradient(function, params, step=1e-5):
    """
    Central differences of ``function(params)`` with respect to every entry of every array in ``params``.
    """
    grads = {}
    for name, value in params.items():
        grad = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + step
            upper = function(params)
            value[index] = original - step
            lower = function(params)
            value[index] = original
            grad[index] = (upper - lower) / (2 * step)
        grads[name] = grad
    return grads


def relative_error(analytic, numeric):
    a = np.concatenate([np.ravel(analytic[name]) for name in sorted(numeric)])
    b = np.concatenate([np.ravel(numeric[name]) for name in sorted(numeric)])
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def camera_rays(count=4, width=6, height=5):
    """
    A few rays from a camera looking into the unit cube.
    """
    intr = CameraIntrinsics(fx=4.0, fy=4.0, cx=width / 2.0, cy=height / 2.0, width=width, height=height)
    pose = Pose.look_at((0.5, -0.6, 0.6), (0.5, 0.5, 0.5))
    pixels = [(1 + index, 1 + index % 3) for index in range(count)]
    return generate_rays(intr, pose, pixels)


def render_loss(field, params, rays, target, cfg=None, times=None):
    cfg = cfg or RenderConfig(samples_per_ray=8)
    origins, directions, near, far = rays
    out = render_rays(field, origins, directions, near, far, cfg, times=times, params=params)
    return mse_loss(columns(out, 0, 3), target)


def tape_gradient(field, rays, target, cfg=None, times=None):
    with Tape() as tape:
        leaves = {name: tape.watch(value) for name, value in field.params.items()}
        loss = render_loss(field, leaves, rays, target, cfg, times)
    grads = backward(tape, loss)
    return {name: grads[leaf.node_id].values for name, leaf in leaves.items()}
