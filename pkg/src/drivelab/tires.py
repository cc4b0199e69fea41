"""Combined-slip tire model and axle-level slip/normal-force kinematics.

The force curves are simplified magic-formula shapes

    F_x0 = mu Fz sin(c_x atan(psi_x)),  psi_x = b_x tau - e_x (b_x tau - atan(b_x tau))
    F_y0 = mu Fz sin(c_y atan(psi_y)),  psi_y = b_y alpha - e_y (b_y alpha - atan(b_y alpha))

coupled by cosine weighting (longitudinal force shrinks with side slip and
vice versa) and finally projected onto the friction disk so that
sqrt(Fxp^2 + Fyp^2) <= mu Fz holds exactly.

Slip angles follow the sign convention alpha = (wheel pointing direction)
minus (wheel velocity direction): a positive alpha produces a positive
(leftward) tire force. Wheel order is fl, fr, rl, rr throughout.
"""

from __future__ import annotations

import numpy as np

from .params import TireCoeffs, VehicleParams

# Speed guard [m/s]: slip denominators are never taken below this value and
# states slower than this are outside the model's validity range.
EPS_SPEED = 0.5

# Per-wheel geometry helpers (fl, fr, rl, rr); left side is +y.
_Y_SIGN = np.array([1.0, -1.0, 1.0, -1.0])


def wheel_positions(params: VehicleParams) -> np.ndarray:
    """Contact point coordinates in the body frame, shape (4, 2)."""
    return np.array([
        [params.l_f, params.l_w],
        [params.l_f, -params.l_w],
        [-params.l_r, params.l_w],
        [-params.l_r, -params.l_w],
    ])


def slip_ratio(omega, v_xp, r_eff, eps=EPS_SPEED):
    """Longitudinal slip ratio with distinct traction/braking normalization.

    Traction (r_eff*omega >= v_xp) divides by r_eff*|omega|, braking by
    |v_xp|; denominators are floored at eps and the result is clamped to
    [-1, 1]. When both speeds are below eps the wheel is essentially at
    rest and the slip is defined as 0.
    """
    omega = np.asarray(omega, dtype=float)
    v_xp = np.asarray(v_xp, dtype=float)
    circ = r_eff * omega
    diff = circ - v_xp
    traction = circ >= v_xp
    denom = np.where(traction, np.abs(circ), np.abs(v_xp))
    tau = diff / np.maximum(denom, eps)
    tau = np.clip(tau, -1.0, 1.0)
    rest = (np.abs(circ) < eps) & (np.abs(v_xp) < eps)
    tau = np.where(rest, 0.0, tau)
    if tau.ndim == 0:
        return float(tau)
    return tau


def contact_velocities(vx, vy, psi_dot, params: VehicleParams):
    """Body-frame velocity of each wheel contact point.

    Returns (vcx, vcy) with trailing axis 4 (fl, fr, rl, rr). The
    longitudinal component is vx -/+ l_w*psi_dot for left/right wheels, the
    lateral one vy + l_f*psi_dot at the front and vy - l_r*psi_dot at the
    rear.
    """
    vx = np.asarray(vx, dtype=float)[..., None]
    vy = np.asarray(vy, dtype=float)[..., None]
    psi_dot = np.asarray(psi_dot, dtype=float)[..., None]
    pos = wheel_positions(params)
    vcx = vx - psi_dot * pos[:, 1]
    vcy = vy + psi_dot * pos[:, 0]
    return vcx, vcy


def slip_angles_from_velocities(vcx, vcy, delta_wheel, eps=EPS_SPEED):
    """alpha = delta - atan(vcy / vcx), denominator floored at eps."""
    return delta_wheel - np.arctan(vcy / np.maximum(vcx, eps))


def slip_angles(vx, vy, psi_dot, delta, params: VehicleParams) -> np.ndarray:
    """Side-slip angle of each wheel for a steered front axle, shape (..., 4)."""
    vcx, vcy = contact_velocities(vx, vy, psi_dot, params)
    delta_wheel = np.asarray(delta, dtype=float)[..., None] * np.array([1.0, 1.0, 0.0, 0.0])
    return slip_angles_from_velocities(vcx, vcy, delta_wheel)


def _suspension_fz(sin_t, cos_t, sin_p, cos_p, theta_dot, phi_dot,
                   params: VehicleParams) -> np.ndarray:
    """Normal forces from precomputed roll/pitch trig; trailing axis 4."""
    a = _Y_SIGN * params.l_w
    b = np.array([-params.l_f, -params.l_f, params.l_r, params.l_r])
    zeta = np.multiply.outer(sin_t, a) + np.multiply.outer(sin_p, b)
    zeta_dot = (np.multiply.outer(cos_t * theta_dot, a)
                + np.multiply.outer(cos_p * phi_dot, b))
    static = np.array([params.fz_static_front, params.fz_static_front,
                       params.fz_static_rear, params.fz_static_rear])
    zeta *= params.k_s
    zeta += params.d_s * zeta_dot
    return np.maximum(static - zeta, 0.0)


def suspension_normal_forces(theta, phi, theta_dot, phi_dot, params: VehicleParams) -> np.ndarray:
    """Per-wheel normal force: static load plus damped spring force, >= 0.

    Suspension travel convention (chosen so that both the roll and the
    pitch moments produced by the resulting load differences oppose the
    angle that created them):

        zeta_fl = +l_w sin(theta) - l_f sin(phi)    and mirrored/axled
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return _suspension_fz(np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi),
                          np.asarray(theta_dot, dtype=float),
                          np.asarray(phi_dot, dtype=float), params)


def _pure_force(slip, b, c, e, peak):
    arg = b * slip
    shaped = arg - e * (arg - np.arctan(arg))
    return peak * np.sin(c * np.arctan(shaped))


def tire_forces(tau_x, alpha, fz, mu, coeffs: TireCoeffs):
    """Tire-frame forces (F_xp, F_yp) for given slips and normal load.

    Pure-slip curves are weakened multiplicatively by the other slip
    channel and the resulting vector is capped at the friction disk
    boundary mu*Fz, which therefore holds exactly for every input.
    """
    tau_x = np.asarray(tau_x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    fz = np.maximum(np.asarray(fz, dtype=float), 0.0)
    peak = mu * fz
    fxp = _pure_force(tau_x, coeffs.b_x, coeffs.c_x, coeffs.e_x, peak)
    fyp = _pure_force(alpha, coeffs.b_y, coeffs.c_y, coeffs.e_y, peak)
    # cos(atan(x)) written as 1/sqrt(1+x^2)
    fxp = fxp / np.sqrt(1.0 + (coeffs.gx_alpha * alpha) ** 2)
    fyp = fyp / np.sqrt(1.0 + (coeffs.gy_tau * tau_x) ** 2)
    norm = np.sqrt(fxp * fxp + fyp * fyp)
    # scale is 1 inside the disk, peak/norm outside, 0 when peak is 0
    scale = peak / np.maximum(norm, np.maximum(peak, 1e-300))
    fxp = fxp * scale
    fyp = fyp * scale
    if fxp.ndim == 0:
        return float(fxp), float(fyp)
    return fxp, fyp


def _project_forces(fxp, fyp, fz, cos_d, sin_d, sin_t, cos_t, sin_p, cos_p):
    """Frame projection from precomputed trig; angle trig has one axis less
    than the per-wheel arrays."""
    if np.ndim(cos_d) > np.ndim(sin_t):
        sin_t, cos_t = np.expand_dims(sin_t, -1), np.expand_dims(cos_t, -1)
        sin_p, cos_p = np.expand_dims(sin_p, -1), np.expand_dims(cos_p, -1)
    planar_x = fxp * cos_d - fyp * sin_d
    planar_y = fyp * cos_d + fxp * sin_d
    fx = planar_x * cos_p - fz * sin_p
    fy = planar_x * (sin_t * sin_p) + planar_y * cos_t + fz * (sin_t * cos_p)
    return fx, fy


def forces_to_vehicle_frame(fxp, fyp, fz, delta_wheel, theta, phi):
    """Project tire-frame forces into the vehicle frame.

    F_x = (Fxp cos d - Fyp sin d) cos(phi) - Fz sin(phi)
    F_y = (Fxp cos d - Fyp sin d) sin(theta) sin(phi)
        + (Fyp cos d + Fxp sin d) cos(theta) + Fz sin(theta) cos(phi)
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return _project_forces(fxp, fyp, fz, np.cos(delta_wheel), np.sin(delta_wheel),
                           np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi))
