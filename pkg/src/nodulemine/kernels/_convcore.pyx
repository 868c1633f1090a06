# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution core (direct loops, float64, NCHW).

Same contract as the numpy backend in ``_convpy.py``: callers hand in
pre-padded inputs and get padded input gradients back. Single threaded on
purpose so results are reproducible run to run.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, :, ::1] x_pad, double[:, :, :, ::1] kernels,
                   double[::1] bias, int stride):
    cdef Py_ssize_t n_batch = x_pad.shape[0]
    cdef Py_ssize_t c_in = x_pad.shape[1]
    cdef Py_ssize_t hp = x_pad.shape[2]
    cdef Py_ssize_t wp = x_pad.shape[3]
    cdef Py_ssize_t c_out = kernels.shape[0]
    cdef Py_ssize_t kh = kernels.shape[2]
    cdef Py_ssize_t kw = kernels.shape[3]
    cdef Py_ssize_t ho = (hp - kh) // stride + 1
    cdef Py_ssize_t wo = (wp - kw) // stride + 1

    out_arr = np.empty((n_batch, c_out, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr

    cdef Py_ssize_t n, co, ci, oh, ow, i, j, ih, iw0
    cdef double acc

    for n in range(n_batch):
        for co in range(c_out):
            for oh in range(ho):
                for ow in range(wo):
                    acc = bias[co]
                    iw0 = ow * stride
                    for ci in range(c_in):
                        for i in range(kh):
                            ih = oh * stride + i
                            for j in range(kw):
                                acc += x_pad[n, ci, ih, iw0 + j] * kernels[co, ci, i, j]
                    out[n, co, oh, ow] = acc
    return out_arr


def conv2d_backward(double[:, :, :, ::1] x_pad, double[:, :, :, ::1] kernels,
                    double[:, :, :, ::1] upstream, int stride):
    cdef Py_ssize_t n_batch = x_pad.shape[0]
    cdef Py_ssize_t c_in = x_pad.shape[1]
    cdef Py_ssize_t hp = x_pad.shape[2]
    cdef Py_ssize_t wp = x_pad.shape[3]
    cdef Py_ssize_t c_out = kernels.shape[0]
    cdef Py_ssize_t kh = kernels.shape[2]
    cdef Py_ssize_t kw = kernels.shape[3]
    cdef Py_ssize_t ho = upstream.shape[2]
    cdef Py_ssize_t wo = upstream.shape[3]

    gx_arr = np.zeros((n_batch, c_in, hp, wp), dtype=np.float64)
    gk_arr = np.zeros((c_out, c_in, kh, kw), dtype=np.float64)
    gb_arr = np.zeros(c_out, dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef double[::1] gb = gb_arr

    cdef Py_ssize_t n, co, ci, oh, ow, i, j, ih, iw0
    cdef double u

    for n in range(n_batch):
        for co in range(c_out):
            for oh in range(ho):
                for ow in range(wo):
                    u = upstream[n, co, oh, ow]
                    gb[co] += u
                    iw0 = ow * stride
                    for ci in range(c_in):
                        for i in range(kh):
                            ih = oh * stride + i
                            for j in range(kw):
                                gx[n, ci, ih, iw0 + j] += u * kernels[co, ci, i, j]
                                gk[co, ci, i, j] += u * x_pad[n, ci, ih, iw0 + j]
    return gx_arr, gk_arr, gb_arr
