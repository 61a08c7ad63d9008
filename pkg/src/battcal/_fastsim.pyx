# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cython battery kernels.

Compiled twin of battcal._pysim. The arithmetic must stay operation-for-
operation identical to the pure-Python module so both backends produce
bit-identical trajectories.
"""

from libc.math cimport log, asinh

BACKEND = "cython"

cdef double X_EPS = 1e-6


cdef inline int _step(double* s, double current, double q_max, double r_o,
                      double dt, double v_s, double k_diff,
                      double tau_o, double tau_eta,
                      double i0_p, double i0_n, double u0_p, double u0_n,
                      double nernst_coef, double eta_coef,
                      int clamp, double* voltage) nogil:
    cdef double vsq = v_s * q_max
    cdef double vbq = (1.0 - v_s) * q_max

    cdef double phi_p = (s[1] / vbq - s[0] / vsq) * k_diff
    cdef double phi_n = (s[2] / vbq - s[3] / vsq) * k_diff

    cdef double q_sp2 = s[0] + dt * (phi_p + current)
    cdef double q_bp2 = s[1] - dt * phi_p
    cdef double q_sn2 = s[3] + dt * (phi_n - current)
    cdef double q_bn2 = s[2] - dt * phi_n

    if q_sp2 < 0.0 or q_bp2 < 0.0 or q_sn2 < 0.0 or q_bn2 < 0.0:
        if not clamp:
            return 1
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

    cdef double v_o2 = s[4] + (dt / tau_o) * (current * r_o - s[4])
    cdef double eta_p = eta_coef * asinh(current / (2.0 * i0_p))
    cdef double eta_n = eta_coef * asinh(current / (2.0 * i0_n))
    cdef double v_ep2 = s[5] + (dt / tau_eta) * (eta_p - s[5])
    cdef double v_en2 = s[6] + (dt / tau_eta) * (eta_n - s[6])

    cdef double x_sp = q_sp2 / vsq
    if x_sp < X_EPS:
        x_sp = X_EPS
    elif x_sp > 1.0 - X_EPS:
        x_sp = 1.0 - X_EPS
    cdef double x_sn = q_sn2 / vsq
    if x_sn < X_EPS:
        x_sn = X_EPS
    elif x_sn > 1.0 - X_EPS:
        x_sn = 1.0 - X_EPS

    cdef double v_up = u0_p + nernst_coef * log((1.0 - x_sp) / x_sp)
    cdef double v_un = u0_n + nernst_coef * log((1.0 - x_sn) / x_sn)

    s[0] = q_sp2
    s[1] = q_bp2
    s[2] = q_bn2
    s[3] = q_sn2
    s[4] = v_o2
    s[5] = v_ep2
    s[6] = v_en2
    voltage[0] = v_up - v_un - v_o2 - v_ep2 - v_en2
    return 0


def step_kernel(double q_sp, double q_bp, double q_bn, double q_sn,
                double v_o, double v_ep, double v_en,
                double current, double q_max, double r_o,
                double dt, double v_s, double k_diff,
                double tau_o, double tau_eta,
                double i0_p, double i0_n, double u0_p, double u0_n,
                double nernst_coef, double eta_coef,
                int clamp):
    cdef double s[7]
    cdef double voltage = 0.0
    s[0] = q_sp
    s[1] = q_bp
    s[2] = q_bn
    s[3] = q_sn
    s[4] = v_o
    s[5] = v_ep
    s[6] = v_en
    cdef int underflow = _step(s, current, q_max, r_o, dt, v_s, k_diff,
                               tau_o, tau_eta, i0_p, i0_n, u0_p, u0_n,
                               nernst_coef, eta_coef, clamp, &voltage)
    if underflow:
        return (q_sp, q_bp, q_bn, q_sn, v_o, v_ep, v_en, 0.0, 1)
    return (s[0], s[1], s[2], s[3], s[4], s[5], s[6], voltage, 0)


def open_circuit_voltage(double q_sp, double q_sn, double q_max, double v_s,
                         double u0_p, double u0_n, double nernst_coef):
    cdef double vsq = v_s * q_max
    cdef double x_sp = q_sp / vsq
    if x_sp < X_EPS:
        x_sp = X_EPS
    elif x_sp > 1.0 - X_EPS:
        x_sp = 1.0 - X_EPS
    cdef double x_sn = q_sn / vsq
    if x_sn < X_EPS:
        x_sn = X_EPS
    elif x_sn > 1.0 - X_EPS:
        x_sn = 1.0 - X_EPS
    cdef double v_up = u0_p + nernst_coef * log((1.0 - x_sp) / x_sp)
    cdef double v_un = u0_n + nernst_coef * log((1.0 - x_sn) / x_sn)
    return v_up - v_un


def simulate_into(double[::1] currents, double[:, ::1] states,
                  double[::1] voltages, double q_max, double r_o,
                  double dt, double v_s, double k_diff,
                  double tau_o, double tau_eta,
                  double i0_p, double i0_n, double u0_p, double u0_n,
                  double nernst_coef, double eta_coef,
                  double v_eod):
    cdef Py_ssize_t n = currents.shape[0]
    cdef double s[7]
    cdef double voltage = 0.0
    cdef Py_ssize_t t, last = 0
    cdef int eod = 0
    cdef int j

    for j in range(7):
        s[j] = states[0, j]

    with nogil:
        for t in range(n):
            if _step(s, currents[t], q_max, r_o, dt, v_s, k_diff,
                     tau_o, tau_eta, i0_p, i0_n, u0_p, u0_n,
                     nernst_coef, eta_coef, 0, &voltage):
                eod = 1
                break
            last = t + 1
            for j in range(7):
                states[last, j] = s[j]
            voltages[last] = voltage
            if voltage < v_eod:
                eod = 1
                break
    return last, eod
