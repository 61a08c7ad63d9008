"""Pure-Python battery kernels.

Reference implementation of the hot discharge loop. `battcal._fastsim` is a
Cython twin of this module; both must produce bit-identical results, so every
arithmetic expression here is mirrored there operation for operation.
"""

import math

BACKEND = "python"

# Mole fractions are clamped away from 0/1 inside the Nernst log; depletion
# itself is reported separately through the underflow flag.
X_EPS = 1e-6


def step_kernel(q_sp, q_bp, q_bn, q_sn, v_o, v_ep, v_en,
                current, q_max, r_o,
                dt, v_s, k_diff, tau_o, tau_eta,
                i0_p, i0_n, u0_p, u0_n, nernst_coef, eta_coef,
                clamp):
    """Advance the seven-component state by one explicit-Euler step.

    Returns (q_sp, q_bp, q_bn, q_sn, v_o, v_ep, v_en, voltage, underflow)
    where underflow is 1 when a charge volume would have gone negative.
    In clamp mode the deficit is transferred back to the paired volume so
    total charge is still conserved and underflow stays 0.
    """
    vsq = v_s * q_max
    vbq = (1.0 - v_s) * q_max

    phi_p = (q_bp / vbq - q_sp / vsq) * k_diff
    phi_n = (q_bn / vbq - q_sn / vsq) * k_diff

    q_sp2 = q_sp + dt * (phi_p + current)
    q_bp2 = q_bp - dt * phi_p
    q_sn2 = q_sn + dt * (phi_n - current)
    q_bn2 = q_bn - dt * phi_n

    underflow = 0
    if q_sp2 < 0.0 or q_bp2 < 0.0 or q_sn2 < 0.0 or q_bn2 < 0.0:
        if not clamp:
            underflow = 1
        else:
            # Undo the overdraw along the path that caused it: bulk deficits
            # come from diffusion (paired surface), surface deficits from the
            # load transfer (opposite surface).
            if q_bn2 < 0.0:
                q_sn2 = q_sn2 + q_bn2
                q_bn2 = 0.0
            if q_bp2 < 0.0:
                q_sp2 = q_sp2 + q_bp2
                q_bp2 = 0.0
            if q_sn2 < 0.0:
                q_sp2 = q_sp2 + q_sn2
                q_sn2 = 0.0
            if q_sp2 < 0.0:
                q_bp2 = q_bp2 + q_sp2
                q_sp2 = 0.0

    v_o2 = v_o + (dt / tau_o) * (current * r_o - v_o)
    eta_p = eta_coef * math.asinh(current / (2.0 * i0_p))
    eta_n = eta_coef * math.asinh(current / (2.0 * i0_n))
    v_ep2 = v_ep + (dt / tau_eta) * (eta_p - v_ep)
    v_en2 = v_en + (dt / tau_eta) * (eta_n - v_en)

    x_sp = q_sp2 / vsq
    if x_sp < X_EPS:
        x_sp = X_EPS
    elif x_sp > 1.0 - X_EPS:
        x_sp = 1.0 - X_EPS
    x_sn = q_sn2 / vsq
    if x_sn < X_EPS:
        x_sn = X_EPS
    elif x_sn > 1.0 - X_EPS:
        x_sn = 1.0 - X_EPS

    v_up = u0_p + nernst_coef * math.log((1.0 - x_sp) / x_sp)
    v_un = u0_n + nernst_coef * math.log((1.0 - x_sn) / x_sn)
    voltage = v_up - v_un - v_o2 - v_ep2 - v_en2

    return (q_sp2, q_bp2, q_bn2, q_sn2, v_o2, v_ep2, v_en2, voltage, underflow)


def open_circuit_voltage(q_sp, q_sn, q_max, v_s, u0_p, u0_n, nernst_coef):
    """Voltage with all lagged drops at zero (used for the initial sample)."""
    vsq = v_s * q_max
    x_sp = q_sp / vsq
    if x_sp < X_EPS:
        x_sp = X_EPS
    elif x_sp > 1.0 - X_EPS:
        x_sp = 1.0 - X_EPS
    x_sn = q_sn / vsq
    if x_sn < X_EPS:
        x_sn = X_EPS
    elif x_sn > 1.0 - X_EPS:
        x_sn = 1.0 - X_EPS
    v_up = u0_p + nernst_coef * math.log((1.0 - x_sp) / x_sp)
    v_un = u0_n + nernst_coef * math.log((1.0 - x_sn) / x_sn)
    return v_up - v_un


def simulate_into(currents, states, voltages, q_max, r_o,
                  dt, v_s, k_diff, tau_o, tau_eta,
                  i0_p, i0_n, u0_p, u0_n, nernst_coef, eta_coef,
                  v_eod):
    """Run the discharge loop, filling preallocated arrays.

    `states` has shape (len(currents)+1, 7) with row 0 already holding the
    initial state; `voltages` has length len(currents)+1 with entry 0 filled.
    Stops at the first step whose voltage drops below v_eod or that would
    underflow a charge volume.

    Returns (last_index, eod_flag): rows 0..last_index are valid; eod_flag is
    1 when the run stopped because of the cutoff or an underflow.
    """
    n = currents.shape[0]
    q_sp = states[0, 0]
    q_bp = states[0, 1]
    q_bn = states[0, 2]
    q_sn = states[0, 3]
    v_o = states[0, 4]
    v_ep = states[0, 5]
    v_en = states[0, 6]

    last = 0
    eod = 0
    for t in range(n):
        out = step_kernel(q_sp, q_bp, q_bn, q_sn, v_o, v_ep, v_en,
                          currents[t], q_max, r_o,
                          dt, v_s, k_diff, tau_o, tau_eta,
                          i0_p, i0_n, u0_p, u0_n, nernst_coef, eta_coef,
                          0)
        if out[8]:
            eod = 1
            break
        q_sp, q_bp, q_bn, q_sn, v_o, v_ep, v_en = out[:7]
        voltage = out[7]
        last = t + 1
        states[last, 0] = q_sp
        states[last, 1] = q_bp
        states[last, 2] = q_bn
        states[last, 3] = q_sn
        states[last, 4] = v_o
        states[last, 5] = v_ep
        states[last, 6] = v_en
        voltages[last] = voltage
        if voltage < v_eod:
            eod = 1
            break
    return last, eod
