# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled DCT-II / DCT-III row kernels (Makhoul reordering over a complex FFT)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()


DEF MAX_RADICES = 64
DEF GENERIC_MAX = 31  # largest prime handled by a direct DFT stage; beyond it Bluestein


cdef int _factor(Py_ssize_t n, int* radices) noexcept nogil:
    """Split n into radices 4, 2, then odd primes up to GENERIC_MAX; -1 if a larger prime remains."""
    cdef int count = 0
    cdef Py_ssize_t p
    while n % 4 == 0:
        radices[count] = 4; count += 1; n //= 4
    while n % 2 == 0:
        radices[count] = 2; count += 1; n //= 2
    p = 3
    while p <= GENERIC_MAX and n > 1:
        while n % p == 0:
            radices[count] = <int> p; count += 1; n //= p
        p += 2
    return count if n == 1 else -1


cdef bint _smooth(Py_ssize_t m) noexcept nogil:
    while m % 2 == 0:
        m //= 2
    while m % 3 == 0:
        m //= 3
    while m % 5 == 0:
        m //= 5
    return m == 1


cdef void _stockham(double* re, double* im, double* wr, double* wi, Py_ssize_t n,
                    const int* radices, int count, const double* twr, const double* twi) noexcept nogil:
    """Self-sorting mixed-radix forward FFT.

    ``twr/twi`` hold exp(-2 pi i j / n) for j < n and also serve the small
    odd-prime DFTs. The result ends in ``re/im``; ``wr/wi`` is scratch of
    length n.
    """
    cdef Py_ssize_t l = 1, big_j = n, small_j, k, j, q, c, idx, src_i, dst_i, out_stride, prime_stride
    cdef int s, p, half_p
    cdef double* ar = re
    cdef double* ai = im
    cdef double* br = wr
    cdef double* bi = wi
    cdef double* tr
    cdef double a_r[GENERIC_MAX]
    cdef double a_i[GENERIC_MAX]
    cdef double s_r[GENERIC_MAX]
    cdef double s_i[GENERIC_MAX]
    cdef double d_r[GENERIC_MAX]
    cdef double d_i[GENERIC_MAX]
    cdef double yr, yi, cs, sn
    cdef double xr, xi, t0r, t0i, t1r, t1i, t2r, t2i, t3r, t3i, ur, ui
    cdef double s3 = 0.86602540378443864676
    for s in range(count):
        p = radices[s]
        small_j = big_j // p
        out_stride = small_j * l
        prime_stride = n // p
        half_p = (p - 1) // 2
        for k in range(l):
            for j in range(small_j):
                for q in range(p):
                    src_i = j + small_j * q + big_j * k
                    xr = ar[src_i]; xi = ai[src_i]
                    if q and k:
                        idx = q * k * small_j
                        ur = twr[idx]; ui = twi[idx]
                        a_r[q] = xr * ur - xi * ui
                        a_i[q] = xr * ui + xi * ur
                    else:
                        a_r[q] = xr; a_i[q] = xi
                dst_i = j + small_j * k
                if p == 2:
                    br[dst_i] = a_r[0] + a_r[1]; bi[dst_i] = a_i[0] + a_i[1]
                    dst_i += small_j * l
                    br[dst_i] = a_r[0] - a_r[1]; bi[dst_i] = a_i[0] - a_i[1]
                elif p == 4:
                    t0r = a_r[0] + a_r[2]; t0i = a_i[0] + a_i[2]
                    t1r = a_r[0] - a_r[2]; t1i = a_i[0] - a_i[2]
                    t2r = a_r[1] + a_r[3]; t2i = a_i[1] + a_i[3]
                    # -i * (a1 - a3)
                    t3r = a_i[1] - a_i[3]; t3i = a_r[3] - a_r[1]
                    br[dst_i] = t0r + t2r; bi[dst_i] = t0i + t2i
                    dst_i += small_j * l
                    br[dst_i] = t1r + t3r; bi[dst_i] = t1i + t3i
                    dst_i += small_j * l
                    br[dst_i] = t0r - t2r; bi[dst_i] = t0i - t2i
                    dst_i += small_j * l
                    br[dst_i] = t1r - t3r; bi[dst_i] = t1i - t3i
                elif p == 3:
                    t1r = a_r[1] + a_r[2]; t1i = a_i[1] + a_i[2]
                    t0r = a_r[0] - 0.5 * t1r; t0i = a_i[0] - 0.5 * t1i
                    # -i * sin(2pi/3) * (a1 - a2)
                    t2r = s3 * (a_i[1] - a_i[2]); t2i = -s3 * (a_r[1] - a_r[2])
                    br[dst_i] = a_r[0] + t1r; bi[dst_i] = a_i[0] + t1i
                    dst_i += small_j * l
                    br[dst_i] = t0r + t2r; bi[dst_i] = t0i + t2i
                    dst_i += small_j * l
                    br[dst_i] = t0r - t2r; bi[dst_i] = t0i - t2i
                else:
                    # odd prime: pair q with p-q so each output pair shares the sums
                    xr = a_r[0]; xi = a_i[0]
                    for q in range(1, half_p + 1):
                        s_r[q] = a_r[q] + a_r[p - q]; s_i[q] = a_i[q] + a_i[p - q]
                        d_r[q] = a_r[q] - a_r[p - q]; d_i[q] = a_i[q] - a_i[p - q]
                        xr += s_r[q]; xi += s_i[q]
                    br[dst_i] = xr; bi[dst_i] = xi
                    for c in range(1, half_p + 1):
                        xr = a_r[0]; xi = a_i[0]; yr = 0.0; yi = 0.0
                        for q in range(1, half_p + 1):
                            idx = ((q * c) % p) * prime_stride
                            cs = twr[idx]; sn = -twi[idx]
                            xr += s_r[q] * cs; xi += s_i[q] * cs
                            yr += d_r[q] * sn; yi += d_i[q] * sn
                        br[dst_i + out_stride * c] = xr + yi
                        bi[dst_i + out_stride * c] = xi - yr
                        br[dst_i + out_stride * (p - c)] = xr - yi
                        bi[dst_i + out_stride * (p - c)] = xi + yr
        tr = ar; ar = br; br = tr
        tr = ai; ai = bi; bi = tr
        l *= p
        big_j = small_j
    if ar != re:
        for k in range(n):
            re[k] = ar[k]
            im[k] = ai[k]


cdef class _Plan:
    """Factorisation, twiddles, and (for large prime factors) Bluestein chirp for one length."""
    cdef Py_ssize_t n, m
    cdef bint direct
    cdef int count
    cdef int radices[MAX_RADICES]
    cdef double* twr
    cdef double* twi
    cdef double* wr
    cdef double* wi
    cdef double* chr_
    cdef double* chi
    cdef double* bre
    cdef double* bim
    cdef double* ar
    cdef double* ai

    def __cinit__(self, Py_ssize_t n):
        cdef Py_ssize_t k
        cdef long long kk
        cdef double ph
        self.n = n
        self.count = _factor(n, self.radices)
        self.direct = self.count >= 0
        self.m = n
        if not self.direct:
            # smallest 2/3/5-smooth length that holds the linear convolution
            self.m = 2 * n - 1
            while not _smooth(self.m):
                self.m += 1
            self.count = _factor(self.m, self.radices)
        self.twr = <double*> malloc(self.m * sizeof(double))
        self.twi = <double*> malloc(self.m * sizeof(double))
        self.wr = <double*> malloc(self.m * sizeof(double))
        self.wi = <double*> malloc(self.m * sizeof(double))
        self.chr_ = <double*> malloc(n * sizeof(double))
        self.chi = <double*> malloc(n * sizeof(double))
        self.bre = <double*> malloc(self.m * sizeof(double))
        self.bim = <double*> malloc(self.m * sizeof(double))
        self.ar = <double*> malloc(self.m * sizeof(double))
        self.ai = <double*> malloc(self.m * sizeof(double))
        if (not self.twr or not self.twi or not self.wr or not self.wi or not self.chr_ or not self.chi
                or not self.bre or not self.bim or not self.ar or not self.ai):
            raise MemoryError()
        for k in range(self.m):
            ph = -2.0 * M_PI * k / self.m
            self.twr[k] = cos(ph)
            self.twi[k] = sin(ph)
        if self.direct:
            return
        for k in range(n):
            kk = (<long long> k * k) % (2 * n)
            ph = -M_PI * kk / n
            self.chr_[k] = cos(ph)
            self.chi[k] = sin(ph)
        for k in range(self.m):
            self.bre[k] = 0.0
            self.bim[k] = 0.0
        for k in range(n):
            self.bre[k] = self.chr_[k]
            self.bim[k] = -self.chi[k]
        for k in range(1, n):
            self.bre[self.m - k] = self.chr_[k]
            self.bim[self.m - k] = -self.chi[k]
        self._fft_m(self.bre, self.bim)

    def __dealloc__(self):
        free(self.twr); free(self.twi); free(self.wr); free(self.wi); free(self.chr_); free(self.chi)
        free(self.bre); free(self.bim); free(self.ar); free(self.ai)

    cdef void _fft_m(self, double* re, double* im) noexcept nogil:
        _stockham(re, im, self.wr, self.wi, self.m, self.radices, self.count,
                  self.twr, self.twi)

    cdef void forward(self, double* re, double* im) noexcept nogil:
        """In-place forward FFT of length n."""
        cdef Py_ssize_t k, n = self.n, m = self.m
        cdef double xr, xi, yr, yi
        if self.direct:
            self._fft_m(re, im)
            return
        for k in range(m):
            self.ar[k] = 0.0
            self.ai[k] = 0.0
        for k in range(n):
            self.ar[k] = re[k] * self.chr_[k] - im[k] * self.chi[k]
            self.ai[k] = re[k] * self.chi[k] + im[k] * self.chr_[k]
        self._fft_m(self.ar, self.ai)
        # multiply by the filter spectrum, conjugated so the next forward FFT acts as an inverse
        for k in range(m):
            xr = self.ar[k]; xi = self.ai[k]
            yr = self.bre[k]; yi = self.bim[k]
            self.ar[k] = xr * yr - xi * yi
            self.ai[k] = -(xr * yi + xi * yr)
        self._fft_m(self.ar, self.ai)
        for k in range(n):
            xr = self.ar[k] / m
            xi = -self.ai[k] / m
            re[k] = xr * self.chr_[k] - xi * self.chi[k]
            im[k] = xr * self.chi[k] + xi * self.chr_[k]


def fft(z):
    """Forward complex FFT along the last axis (exposed for testing)."""
    arr = np.ascontiguousarray(z, dtype=np.complex128)
    shape = arr.shape
    rows2 = arr.reshape(-1, shape[len(shape) - 1])
    cdef Py_ssize_t rows = rows2.shape[0], n = rows2.shape[1], r
    re_arr = np.ascontiguousarray(rows2.real)
    im_arr = np.ascontiguousarray(rows2.imag)
    cdef double[:, ::1] re = re_arr
    cdef double[:, ::1] im = im_arr
    cdef _Plan plan = _Plan(n)
    with nogil:
        for r in range(rows):
            plan.forward(&re[r, 0], &im[r, 0])
    return (re_arr + 1j * im_arr).reshape(shape)


def dct2_rows(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef double[:, ::1] src = arr.reshape(-1, shape[len(shape) - 1])
    cdef Py_ssize_t rows = src.shape[0], n = src.shape[1], r, k, half
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef _Plan plan = _Plan(n)
    cdef double* re = <double*> malloc(n * sizeof(double))
    cdef double* im = <double*> malloc(n * sizeof(double))
    cdef double* cr = <double*> malloc(n * sizeof(double))
    cdef double* ci = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t r2, nk
    cdef double a0 = sqrt(1.0 / n), ak = sqrt(2.0 / n), ph, xr, xi
    if not re or not im or not cr or not ci:
        free(re); free(im); free(cr); free(ci)
        raise MemoryError()
    for k in range(n):
        ph = -M_PI * k / (2.0 * n)
        cr[k] = cos(ph) * (a0 if k == 0 else ak)
        ci[k] = sin(ph) * (a0 if k == 0 else ak)
    half = (n + 1) // 2
    with nogil:
        # two real rows share one complex FFT: row r in the real part, row r+1 in the imaginary part
        for r in range(0, rows, 2):
            r2 = r + 1 if r + 1 < rows else -1
            for k in range(half):
                re[k] = src[r, 2 * k]
                im[k] = src[r2, 2 * k] if r2 >= 0 else 0.0
            for k in range(n - half):
                re[n - 1 - k] = src[r, 2 * k + 1]
                im[n - 1 - k] = src[r2, 2 * k + 1] if r2 >= 0 else 0.0
            plan.forward(re, im)
            for k in range(n):
                nk = n - k if k else 0
                xr = 0.5 * (re[k] + re[nk])
                xi = 0.5 * (im[k] - im[nk])
                dst[r, k] = cr[k] * xr - ci[k] * xi
                if r2 >= 0:
                    xr = 0.5 * (im[k] + im[nk])
                    xi = -0.5 * (re[k] - re[nk])
                    dst[r2, k] = cr[k] * xr - ci[k] * xi
    free(re); free(im); free(cr); free(ci)
    return out.reshape(shape)


def dct3_rows(X):
    arr = np.ascontiguousarray(X, dtype=np.float64)
    shape = arr.shape
    cdef double[:, ::1] src = arr.reshape(-1, shape[len(shape) - 1])
    cdef Py_ssize_t rows = src.shape[0], n = src.shape[1], r, k, half
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef _Plan plan = _Plan(n)
    cdef double* re = <double*> malloc(n * sizeof(double))
    cdef double* im = <double*> malloc(n * sizeof(double))
    cdef double* cr = <double*> malloc(n * sizeof(double))
    cdef double* ci = <double*> malloc(n * sizeof(double))
    cdef double* inv_a = <double*> malloc(n * sizeof(double))
    cdef Py_ssize_t r2
    cdef double yr, yi, ph
    if not re or not im or not cr or not ci or not inv_a:
        free(re); free(im); free(cr); free(ci); free(inv_a)
        raise MemoryError()
    for k in range(n):
        ph = M_PI * k / (2.0 * n)
        cr[k] = cos(ph)
        ci[k] = sin(ph)
        inv_a[k] = sqrt(<double> n) if k == 0 else sqrt(n / 2.0)
    half = (n + 1) // 2
    with nogil:
        for r in range(0, rows, 2):
            # V_k = e^{i pi k / 2n} (y_k - i y_{n-k}); the conjugate goes through the forward FFT.
            # Both transforms are real, so row r+1 rides along times i.
            r2 = r + 1 if r + 1 < rows else -1
            for k in range(n):
                yr = src[r, k] * inv_a[k]
                yi = -src[r, n - k] * inv_a[n - k] if k > 0 else 0.0
                re[k] = cr[k] * yr - ci[k] * yi
                im[k] = -(cr[k] * yi + ci[k] * yr)
                if r2 >= 0:
                    yr = src[r2, k] * inv_a[k]
                    yi = -src[r2, n - k] * inv_a[n - k] if k > 0 else 0.0
                    # add i * conj(V2)
                    re[k] += cr[k] * yi + ci[k] * yr
                    im[k] += cr[k] * yr - ci[k] * yi
            plan.forward(re, im)
            for k in range(half):
                dst[r, 2 * k] = re[k] / n
            for k in range(n - half):
                dst[r, 2 * k + 1] = re[n - 1 - k] / n
            if r2 >= 0:
                for k in range(half):
                    dst[r2, 2 * k] = im[k] / n
                for k in range(n - half):
                    dst[r2, 2 * k + 1] = im[n - 1 - k] / n
    free(re); free(im); free(cr); free(ci); free(inv_a)
    return out.reshape(shape)
