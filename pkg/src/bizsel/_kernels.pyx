# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled run loops for the discrete procedure and the Brownian oracle.

Both loops draw straight from the numpy bit generators of the per-alternative
streams, in the same order as the Python fallback, and share one
implementation of the elimination / threshold state machine (``h_step``).
Arithmetic is written in the same operation order as the fallback.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport ceil, exp, sqrt, INFINITY
from libc.stdlib cimport free, malloc, realloc
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_normal,
    random_standard_uniform,
)

cdef enum:
    FAM_NORMAL = 0
    FAM_UNIFORM = 1
    FAM_EXPONENTIAL = 2
    FAM_BERNOULLI = 3

cdef enum:
    STATUS_OK = 0
    STATUS_CAP = 1
    STATUS_ZERO_VARIANCE = 2
    STATUS_NOMEM = 3


ctypedef void (*qfun_t)(void* ctx, int* active, int na, double* q) noexcept nogil


cdef struct HState:
    int* active
    int na
    double threshold
    double c
    double* q
    long long* el_stage
    long long* el_alt
    double* el_q
    int n_elim


cdef bint h_step(HState* h, qfun_t qf, void* ctx, long long stage) noexcept nogil:
    """One grid point of the selection map; returns True on termination."""
    cdef int i, j, imin
    cdef double qmax, qi
    qf(ctx, h.active, h.na, h.q)
    qmax = h.q[0]
    for i in range(1, h.na):
        if h.q[i] > qmax:
            qmax = h.q[i]
    if qmax >= h.threshold:
        return True
    while h.na > 1:
        imin = 0
        for i in range(1, h.na):
            if h.q[i] < h.q[imin]:
                imin = i
        qi = h.q[imin]
        if qi > h.c:
            break
        h.el_stage[h.n_elim] = stage
        h.el_alt[h.n_elim] = h.active[imin]
        h.el_q[h.n_elim] = qi
        h.n_elim += 1
        for j in range(imin, h.na - 1):
            h.active[j] = h.active[j + 1]
        h.na -= 1
        h.threshold = h.threshold / (1.0 - qi)
        qf(ctx, h.active, h.na, h.q)
    return False


cdef inline void softmax_inplace(double* e, int n, double* q) noexcept nogil:
    cdef int i
    cdef double emax = -INFINITY, tot = 0.0
    for i in range(n):
        if e[i] > emax:
            emax = e[i]
    for i in range(n):
        q[i] = exp(e[i] - emax)
        tot += q[i]
    for i in range(n):
        q[i] = q[i] / tot


cdef inline double draw(bitgen_t* bg, long long fam, double loc, double scale,
                        double p, double lo, double hi) noexcept nogil:
    if fam == FAM_NORMAL:
        return loc + scale * random_standard_normal(bg)
    elif fam == FAM_UNIFORM:
        return loc + scale * (2.0 * random_standard_uniform(bg) - 1.0)
    elif fam == FAM_EXPONENTIAL:
        return loc + scale * random_standard_exponential(bg)
    return hi if random_standard_uniform(bg) < p else lo


cdef bitgen_t** collect_bitgens(list gens) except NULL:
    cdef Py_ssize_t n = len(gens), i
    cdef bitgen_t** out = <bitgen_t**>malloc((n if n > 0 else 1) * sizeof(bitgen_t*))
    if out == NULL:
        raise MemoryError()
    for i in range(n):
        capsule = gens[i].capsule
        if not PyCapsule_IsValid(capsule, "BitGenerator"):
            free(out)
            raise ValueError("invalid bit generator capsule")
        out[i] = <bitgen_t*>PyCapsule_GetPointer(capsule, "BitGenerator")
    return out


# ---------------------------------------------------------------------------
# discrete procedure

cdef struct Disc:
    int k
    bitgen_t** bg
    long long* fam
    double* loc
    double* scale
    double* prob
    double* lo
    double* hi
    long long* counts
    double* sums
    double* m2
    double* var
    double* e
    double* buf
    long long bufcap
    double delta
    double floor
    bint known
    bint use_floor


cdef void q_discrete(void* ctx, int* active, int na, double* q) noexcept nogil:
    cdef Disc* d = <Disc*>ctx
    cdef int i, a
    cdef long long sum_n = 0
    cdef double sum_v = 0.0, beta
    for i in range(na):
        a = active[i]
        sum_n += d.counts[a]
        sum_v += d.var[a]
    beta = <double>sum_n / sum_v
    for i in range(na):
        a = active[i]
        d.e[i] = d.delta * beta * (d.sums[a] / <double>d.counts[a])
    softmax_inplace(d.e, na, q)


cdef int take(Disc* d, int x, long long m) noexcept nogil:
    cdef long long j, n_a = d.counts[x]
    cdef double v, s, bs = 0.0, bmean, bm2 = 0.0, dd
    cdef double* nb
    if m <= 0:
        return STATUS_OK
    if m > d.bufcap:
        nb = <double*>realloc(d.buf, m * sizeof(double))
        if nb == NULL:
            return STATUS_NOMEM
        d.buf = nb
        d.bufcap = m
    s = d.sums[x]
    for j in range(m):
        v = draw(d.bg[x], d.fam[x], d.loc[x], d.scale[x], d.prob[x], d.lo[x], d.hi[x])
        d.buf[j] = v
        s = s + v
        bs = bs + v
    bmean = bs / <double>m
    for j in range(m):
        dd = d.buf[j] - bmean
        bm2 = bm2 + dd * dd
    if n_a == 0:
        d.m2[x] = bm2
    else:
        dd = bmean - d.sums[x] / <double>n_a
        d.m2[x] = d.m2[x] + bm2 + dd * dd * <double>n_a * <double>m / <double>(n_a + m)
    d.sums[x] = s
    d.counts[x] = n_a + m
    return STATUS_OK


cdef int refresh_variances(Disc* d, int* active, int na) noexcept nogil:
    cdef int i, a
    cdef double v
    if d.known:
        return STATUS_OK
    for i in range(na):
        a = active[i]
        v = d.m2[a] / <double>(d.counts[a] - 1)
        if v <= 0.0:
            if not d.use_floor:
                return STATUS_ZERO_VARIANCE
            v = d.floor
        d.var[a] = v
    return STATUS_OK


cdef int select_z(Disc* d, int* active, int na, bint min_rule) noexcept nogil:
    cdef int i, best = 0
    cdef double key, best_key
    if not min_rule:
        best_key = d.var[active[0]]
        for i in range(1, na):
            if d.var[active[i]] > best_key:
                best_key = d.var[active[i]]
                best = i
    else:
        best_key = <double>d.counts[active[0]] / d.var[active[0]]
        for i in range(1, na):
            key = <double>d.counts[active[i]] / d.var[active[i]]
            if key < best_key:
                best_key = key
                best = i
    return active[best]


cdef int advance(Disc* d, int* active, int na, int z, long long* batch,
                 long long* target, long long* stage, long long cap) noexcept nogil:
    cdef int i, a, status
    cdef long long nz = d.counts[z] + batch[z], t, total = 0
    cdef double vz = d.var[z]
    for i in range(na):
        a = active[i]
        if a == z:
            t = nz
        else:
            t = <long long>ceil(d.var[a] * <double>nz / vz)
        target[i] = t if t > d.counts[a] else d.counts[a]
    for i in range(na):
        a = active[i]
        status = take(d, a, target[i] - d.counts[a])
        if status != STATUS_OK:
            return status
    stage[0] += 1
    for i in range(d.k):
        total += d.counts[i]
    if total > cap:
        return STATUS_CAP
    return refresh_variances(d, active, na)


def run_discrete(list gens, long long[::1] fam, double[::1] loc, double[::1] scale,
                 double[::1] prob, double[::1] lo, double[::1] hi, double[::1] known_var,
                 bint known, double p_star, double c, double delta, long long n0,
                 long long[::1] batch, bint min_rule, double floor, long long cap,
                 long long[::1] counts, double[::1] sums, double[::1] m2,
                 long long[::1] el_stage, long long[::1] el_alt, double[::1] el_q):
    """Run the discrete procedure once; returns (status, selected, stages, n_elim, threshold)."""
    cdef int k = counts.shape[0], i, a, z, status = STATUS_OK, sel
    cdef long long stage = 0
    cdef double best_ratio, ratio
    cdef bint done
    cdef Disc d
    cdef HState h
    cdef bitgen_t** bg = collect_bitgens(gens)
    cdef int* active = <int*>malloc(k * sizeof(int))
    cdef long long* target = <long long*>malloc(k * sizeof(long long))
    cdef double* var = <double*>malloc(k * sizeof(double))
    cdef double* e = <double*>malloc(k * sizeof(double))
    cdef double* q = <double*>malloc(k * sizeof(double))
    if active == NULL or target == NULL or var == NULL or e == NULL or q == NULL:
        free(active); free(target); free(var); free(e); free(q); free(bg)
        raise MemoryError()

    d.k = k
    d.bg = bg
    d.fam = &fam[0]
    d.loc = &loc[0]
    d.scale = &scale[0]
    d.prob = &prob[0]
    d.lo = &lo[0]
    d.hi = &hi[0]
    d.counts = &counts[0]
    d.sums = &sums[0]
    d.m2 = &m2[0]
    d.var = var
    d.e = e
    d.buf = NULL
    d.bufcap = 0
    d.delta = delta
    d.floor = floor
    d.use_floor = floor > 0.0
    d.known = known

    h.active = active
    h.na = k
    h.threshold = p_star
    h.c = c
    h.q = q
    h.el_stage = &el_stage[0]
    h.el_alt = &el_alt[0]
    h.el_q = &el_q[0]
    h.n_elim = 0

    with nogil:
        for i in range(k):
            active[i] = i
            var[i] = known_var[i]
        if n0 > 0:
            for i in range(k):
                status = take(&d, i, n0)
                if status != STATUS_OK:
                    break
            if status == STATUS_OK:
                status = refresh_variances(&d, active, k)
        if status == STATUS_OK:
            z = select_z(&d, active, k, min_rule)
            for i in range(k):
                if counts[i] == 0:
                    status = advance(&d, active, h.na, z, &batch[0], target, &stage, cap)
                    break
        while status == STATUS_OK:
            done = h_step(&h, q_discrete, &d, stage)
            if done:
                break
            if min_rule:
                z = select_z(&d, active, h.na, True)
            else:
                for i in range(h.na):
                    if active[i] == z:
                        break
                else:
                    z = select_z(&d, active, h.na, False)
            status = advance(&d, active, h.na, z, &batch[0], target, &stage, cap)

        sel = active[0]
        best_ratio = sums[sel] / <double>(counts[sel] if counts[sel] > 0 else 1)
        for i in range(1, h.na):
            a = active[i]
            ratio = sums[a] / <double>(counts[a] if counts[a] > 0 else 1)
            if ratio > best_ratio:
                best_ratio = ratio
                sel = a

    free(d.buf); free(active); free(target); free(var); free(e); free(q); free(bg)
    if status == STATUS_NOMEM:
        raise MemoryError()
    return status, sel, stage, h.n_elim, h.threshold


# ---------------------------------------------------------------------------
# Brownian oracle

cdef struct Cont:
    double* F
    double* drift
    double vol
    double vol2
    double t
    double* e


cdef void q_continuous(void* ctx, int* active, int na, double* q) noexcept nogil:
    cdef Cont* cc = <Cont*>ctx
    cdef int i, a
    for i in range(na):
        a = active[i]
        cc.e[i] = cc.F[a] / cc.vol + cc.t * cc.drift[a] / cc.vol2
    softmax_inplace(cc.e, na, q)


def run_continuous(list gens, double[::1] drift, double vol, double dt, double p_star,
                   double c, long long max_steps, double[::1] F,
                   long long[::1] el_stage, long long[::1] el_alt, double[::1] el_q):
    """Euler-grid oracle run; returns (status, selected, steps, n_elim, threshold)."""
    cdef int k = drift.shape[0], i, sel, status = STATUS_OK
    cdef long long step = 0
    cdef double sqdt = sqrt(dt), qbest
    cdef Cont cc
    cdef HState h
    cdef bitgen_t** bg = collect_bitgens(gens)
    cdef int* active = <int*>malloc(k * sizeof(int))
    cdef double* e = <double*>malloc(k * sizeof(double))
    cdef double* q = <double*>malloc(k * sizeof(double))
    if active == NULL or e == NULL or q == NULL:
        free(active); free(e); free(q); free(bg)
        raise MemoryError()

    cc.F = &F[0]
    cc.drift = &drift[0]
    cc.vol = vol
    cc.vol2 = vol * vol
    cc.e = e
    h.active = active
    h.na = k
    h.threshold = p_star
    h.c = c
    h.q = q
    h.el_stage = &el_stage[0]
    h.el_alt = &el_alt[0]
    h.el_q = &el_q[0]
    h.n_elim = 0

    with nogil:
        for i in range(k):
            active[i] = i
        while True:
            cc.t = <double>step * dt
            if h_step(&h, q_continuous, &cc, step):
                break
            if step >= max_steps:
                status = STATUS_CAP
                break
            for i in range(h.na):
                F[active[i]] = F[active[i]] + sqdt * random_standard_normal(bg[active[i]])
            step += 1
        sel = active[0]
        qbest = q[0]
        for i in range(1, h.na):
            if q[i] > qbest:
                qbest = q[i]
                sel = active[i]

    free(active); free(e); free(q); free(bg)
    return status, sel, step, h.n_elim, h.threshold


cdef struct Table:
    double* scores
    int k
    long long row
    double* e


cdef void q_table(void* ctx, int* active, int na, double* q) noexcept nogil:
    cdef Table* tb = <Table*>ctx
    cdef int i
    for i in range(na):
        tb.e[i] = tb.scores[tb.row * tb.k + active[i]]
    softmax_inplace(tb.e, na, q)


def replay_selection(double[:, ::1] scores, double p_star, double c,
                     long long[::1] el_stage, long long[::1] el_alt, double[::1] el_q):
    """Drive ``h_step`` with q = softmax(scores[row, active]) for row 0, 1, ...

    Returns (stopped_row or -1, active list, n_elim, threshold).
    """
    cdef int k = scores.shape[1], i
    cdef long long row, stopped = -1
    cdef Table tb
    cdef HState h
    cdef int* active = <int*>malloc(k * sizeof(int))
    cdef double* e = <double*>malloc(k * sizeof(double))
    cdef double* q = <double*>malloc(k * sizeof(double))
    if active == NULL or e == NULL or q == NULL:
        free(active); free(e); free(q)
        raise MemoryError()
    for i in range(k):
        active[i] = i
    tb.scores = &scores[0, 0]
    tb.k = k
    tb.e = e
    h.active = active
    h.na = k
    h.threshold = p_star
    h.c = c
    h.q = q
    h.el_stage = &el_stage[0]
    h.el_alt = &el_alt[0]
    h.el_q = &el_q[0]
    h.n_elim = 0
    for row in range(scores.shape[0]):
        tb.row = row
        if h_step(&h, q_table, &tb, row):
            stopped = row
            break
    result = [active[i] for i in range(h.na)]
    free(active); free(e); free(q)
    return stopped, result, h.n_elim, h.threshold
