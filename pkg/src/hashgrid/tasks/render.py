"""Sphere-traced, shaded views of a learned or analytic SDF."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIT_EPS = 1e-4
MAX_STEPS = 256
NORMAL_H = 1e-3
BACKGROUND = np.array([1.0, 1.0, 1.0])
ALBEDO = np.array([0.85, 0.75, 0.6])
LIGHT_DIR = np.array([0.4, 0.8, 0.45]) / np.linalg.norm([0.4, 0.8, 0.45])
AMBIENT, DIFFUSE, HEADLIGHT = 0.1, 0.55, 0.35


@dataclass(frozen=True)
class Camera:
    position: tuple = (1.7, 1.3, 2.1)
    target: tuple = (0.5, 0.5, 0.5)
    up: tuple = (0.0, 1.0, 0.0)
    fov_deg: float = 40.0

    def basis(self):
        pos = np.asarray(self.position, dtype=np.float64)
        fwd = np.asarray(self.target, dtype=np.float64) - pos
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")
        right /= np.linalg.norm(right)
        return pos, fwd, right, np.cross(right, fwd)

    def rays(self, width: int, height: int):
        """Origins (1, 3) and unit directions (H*W, 3) through pixel centres, row-major from the top."""
        pos, fwd, right, up = self.basis()
        half = np.tan(np.radians(self.fov_deg) / 2.0)
        aspect = width / height
        px = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * half * aspect
        py = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * half
        gx, gy = np.meshgrid(px, py)
        d = fwd + gx.reshape(-1, 1) * right + gy.reshape(-1, 1) * up
        return pos[None], d / np.linalg.norm(d, axis=1, keepdims=True)


def sdf_values(model, X) -> np.ndarray:
    """Evaluate a NeuralField or a plain callable on (N, 3) points, returning (N,)."""
    X = np.clip(X, 0.0, 1.0)
    out = model.predict(X) if hasattr(model, "predict") else model(X)
    return np.asarray(out, dtype=np.float64).reshape(len(X), -1)[:, 0]


def _unit_cube_span(o, d):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t0 = (0.0 - o) * inv
        t1 = (1.0 - o) * inv
    tmin = np.nanmax(np.minimum(t0, t1), axis=1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=1)
    return np.maximum(tmin, 0.0), tmax


def sphere_trace(model, origins, dirs, max_steps: int = MAX_STEPS, eps: float = HIT_EPS):
    """March each ray by the field value inside the unit cube.

    A ray hits once the value drops below ``eps``; that includes rays that
    start inside the surface, which hit immediately. Returns ``(hit, t)``.
    """
    o = np.broadcast_to(origins, dirs.shape).astype(np.float64)
    t, t_far = _unit_cube_span(o, dirs)
    active = t <= t_far
    hit = np.zeros(len(dirs), dtype=bool)
    for _ in range(max_steps):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        v = sdf_values(model, o[idx] + t[idx, None] * dirs[idx])
        done = v < eps
        hit[idx[done]] = True
        t[idx] += np.where(done, 0.0, v)
        gone = ~done & (t[idx] > t_far[idx])
        active[idx[done | gone]] = False
    return hit, t


def central_normals(model, P, h: float = NORMAL_H) -> np.ndarray:
    n = np.empty_like(P)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        n[:, i] = sdf_values(model, P + e) - sdf_values(model, P - e)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(norm > 0, norm, 1.0)


def shade(normals, view_dirs) -> np.ndarray:
    """Ambient + Lambertian key light + headlight, all scaled by a constant albedo."""
    key = np.clip(normals @ LIGHT_DIR, 0.0, None)
    head = np.clip(-np.einsum("ij,ij->i", normals, view_dirs), 0.0, None)
    return np.clip((AMBIENT + DIFFUSE * key + HEADLIGHT * head)[:, None] * ALBEDO, 0.0, 1.0)


def render_sdf_shaded(model, camera: Camera | None = None, width: int = 256, height: int = 256):
    """(H, W, 3) image in [0, 1]; pixels whose ray misses show the background."""
    camera = camera or Camera()
    o, d = camera.rays(width, height)
    hit, t = sphere_trace(model, o, d)
    img = np.tile(BACKGROUND, (len(d), 1))
    if np.any(hit):
        P = o + t[hit, None] * d[hit]
        img[hit] = shade(central_normals(model, P), d[hit])
    return img.reshape(height, width, 3)


def save_png(image, path):
    from PIL import Image

    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255).astype(np.uint8)).save(path)
