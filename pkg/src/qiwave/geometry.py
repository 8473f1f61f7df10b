"""Smooth parameterizations of the physical domain and their pull-backs.

A :class:`GeometryMap` carries vectorized evaluators for the map F, its
Jacobian and the Jacobian determinant on the parametric square.  Scalar
fields pull back with the determinant weight, vector fields with the
divergence-preserving Piola transform, so that the parametric divergence
of the pull-back equals the pull-back of the physical divergence.

All evaluators take broadcastable coordinate arrays (typically
``x1[:, None]`` against ``x2[None, :]`` for tensor grids) and return
arrays of the broadcast shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GeometryMap:
    """Parameterization F: [0,1]^2 -> Omega with derivative data.

    ``jacobian(X1, X2)`` returns the four entries (J11, J12, J21, J22)
    of DF as broadcast arrays; ``det(X1, X2)`` its determinant, positive
    everywhere on the closed square.
    """

    name: str
    map: Callable
    jacobian: Callable
    det: Callable
    is_identity: bool = False
    periodic_capable: bool = False


def unit_square() -> GeometryMap:
    """Identity map on the parametric square."""

    def fmap(x1, x2):
        x1, x2 = np.broadcast_arrays(x1, x2)
        return np.array(x1, dtype=float), np.array(x2, dtype=float)

    def jac(x1, x2):
        shape = np.broadcast(x1, x2).shape
        one = np.ones(shape)
        zero = np.zeros(shape)
        return one, zero, zero, one

    def det(x1, x2):
        return np.ones(np.broadcast(x1, x2).shape)

    return GeometryMap(name="square", map=fmap, jacobian=jac, det=det, is_identity=True)


def quarter_annulus(r_in: float = 1.0, r_out: float = 2.0) -> GeometryMap:
    """Exact polar map of the quarter ring between radii r_in and r_out.

    F(x1, x2) = (r(x1) cos(pi x2 / 2), r(x1) sin(pi x2 / 2)) with
    r(x1) = r_in + (r_out - r_in) x1.  The first direction is radial
    (Dirichlet arcs), the second angular (the two straight segments,
    which may be identified periodically).
    """
    if r_in <= 0 or r_out <= r_in:
        raise ValueError(f"need 0 < r_in < r_out, got ({r_in}, {r_out})")
    dr = r_out - r_in
    half_pi = 0.5 * np.pi

    def fmap(x1, x2):
        r = r_in + dr * np.asarray(x1, dtype=float)
        th = half_pi * np.asarray(x2, dtype=float)
        r, th = np.broadcast_arrays(r, th)
        return r * np.cos(th), r * np.sin(th)

    def jac(x1, x2):
        r = r_in + dr * np.asarray(x1, dtype=float)
        th = half_pi * np.asarray(x2, dtype=float)
        r, th = np.broadcast_arrays(r, th)
        c, s = np.cos(th), np.sin(th)
        return dr * c, -half_pi * r * s, dr * s, half_pi * r * c

    def det(x1, x2):
        r = r_in + dr * np.asarray(x1, dtype=float)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
        return np.broadcast_to(half_pi * dr * r, shape).copy()

    return GeometryMap(
        name="annulus", map=fmap, jacobian=jac, det=det, periodic_capable=True
    )


def pullback_scalar(geo: GeometryMap, f: Callable) -> Callable:
    """Parametric scalar field det(DF) * (f o F) of a physical field f."""

    def fhat(x1, x2):
        X, Y = geo.map(x1, x2)
        return geo.det(x1, x2) * f(X, Y)

    return fhat


def pullback_vector(geo: GeometryMap, v: Callable) -> Callable:
    """Piola pull-back det(DF) * DF^{-1} * (v o F) of a physical vector field.

    ``v(X, Y)`` must return the two physical components; the result
    returns the two parametric components.
    """

    def vhat(x1, x2):
        X, Y = geo.map(x1, x2)
        v1, v2 = v(X, Y)
        j11, j12, j21, j22 = geo.jacobian(x1, x2)
        # det * DF^{-1} = [[j22, -j12], [-j21, j11]] (adjugate)
        w1 = j22 * v1 - j12 * v2
        w2 = -j21 * v1 + j11 * v2
        return w1, w2

    return vhat


@dataclass(frozen=True)
class Coefficient:
    """Wave-speed coefficient c with its parametric pull-back.

    ``chat`` evaluates c o F on broadcastable parametric grids.
    ``chat_grad`` gives the parametric gradient DF^T (grad c o F); it is
    needed only by the Galerkin coupling assembly and falls back to
    central differences of ``chat`` when no physical gradient is known.
    """

    geo: GeometryMap
    c_phys: Callable
    grad_phys: Callable | None = None
    name: str = "c"

    def chat(self, x1, x2):
        X, Y = self.geo.map(x1, x2)
        return self.c_phys(X, Y)

    def chat_grad(self, x1, x2):
        if self.grad_phys is not None:
            X, Y = self.geo.map(x1, x2)
            gx, gy = self.grad_phys(X, Y)
            j11, j12, j21, j22 = self.geo.jacobian(x1, x2)
            return j11 * gx + j21 * gy, j12 * gx + j22 * gy
        step = 1e-6
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        d1 = (self.chat(x1 + step, x2) - self.chat(x1 - step, x2)) / (2 * step)
        d2 = (self.chat(x1, x2 + step) - self.chat(x1, x2 - step)) / (2 * step)
        return d1, d2


def constant_coefficient(geo: GeometryMap, value: float = 1.0) -> Coefficient:
    return Coefficient(
        geo=geo,
        c_phys=lambda X, Y: np.full(np.broadcast(X, Y).shape, float(value)),
        grad_phys=lambda X, Y: (
            np.zeros(np.broadcast(X, Y).shape),
            np.zeros(np.broadcast(X, Y).shape),
        ),
        name=f"const{value:g}",
    )


def sine_bump_coefficient(geo: GeometryMap) -> Coefficient:
    """The paper-replication coefficient sin(2 pi x1) sin(2 pi x2) + 2.

    Smooth, bounded away from zero, and periodic in value across the
    quarter-annulus seam.
    """
    two_pi = 2 * np.pi

    def c(X, Y):
        return np.sin(two_pi * X) * np.sin(two_pi * Y) + 2.0

    def grad(X, Y):
        return (
            two_pi * np.cos(two_pi * X) * np.sin(two_pi * Y),
            two_pi * np.sin(two_pi * X) * np.cos(two_pi * Y),
        )

    return Coefficient(geo=geo, c_phys=c, grad_phys=grad, name="sinebump")
