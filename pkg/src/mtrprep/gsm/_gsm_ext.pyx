# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GSM 06.10 full-rate codec kernel.

Mirrors ``_gsm_py`` operation for operation; the test suite checks the two
backends produce identical parameters and samples.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memcpy, memset
from libc.stdint cimport int16_t, int32_t, int64_t, uint32_t

cnp.import_array()

ctypedef int16_t word
ctypedef int32_t longword

DEF MIN_WORD = -32768
DEF MAX_WORD = 32767
DEF MIN_LONG = -2147483648
DEF MAX_LONG = 2147483647

FRAME_SAMPLES = 160
PARAMS_PER_FRAME = 76

cdef word[8] LAR_A = [20480, 20480, 20480, 20480, 13964, 15360, 8534, 9036]
cdef word[8] LAR_B = [0, 0, 2048, -2560, 94, -1792, -341, -1144]
cdef word[8] LAR_MIC = [-32, -32, -16, -16, -8, -8, -4, -4]
cdef word[8] LAR_MAC = [31, 31, 15, 15, 7, 7, 3, 3]
cdef word[8] INVA = [13107, 13107, 13107, 13107, 19223, 17476, 31454, 29708]
cdef word[4] DLB = [6554, 16384, 26214, 32767]
cdef word[4] QLB = [3277, 11469, 21299, 32767]
cdef word[8] NRFAC = [29128, 26215, 23832, 21846, 20165, 18725, 17476, 16384]
cdef word[8] FAC = [18431, 20479, 22527, 24575, 26623, 28671, 30719, 32767]


cdef inline word sat(int64_t x) noexcept nogil:
    if x > MAX_WORD:
        return MAX_WORD
    if x < MIN_WORD:
        return MIN_WORD
    return <word>x


cdef inline longword lsat(int64_t x) noexcept nogil:
    if x > MAX_LONG:
        return MAX_LONG
    if x < MIN_LONG:
        return MIN_LONG
    return <longword>x


cdef inline word wrap16(int64_t x) noexcept nogil:
    return <word>(<uint32_t>x & 0xFFFF)


cdef inline longword wrap32(int64_t x) noexcept nogil:
    return <longword>(<uint32_t>x)


cdef inline word mult(word a, word b) noexcept nogil:
    if a == MIN_WORD and b == MIN_WORD:
        return MAX_WORD
    return <word>((<int32_t>a * <int32_t>b) >> 15)


cdef inline word mult_r(word a, word b) noexcept nogil:
    if a == MIN_WORD and b == MIN_WORD:
        return MAX_WORD
    return <word>((<int32_t>a * <int32_t>b + 16384) >> 15)


cdef inline word add(int64_t a, int64_t b) noexcept nogil:
    return sat(a + b)


cdef inline word sub(int64_t a, int64_t b) noexcept nogil:
    return sat(a - b)


cdef inline word gabs(word a) noexcept nogil:
    if a < 0:
        return MAX_WORD if a == MIN_WORD else -a
    return a


cdef inline int bit_length(uint32_t a) noexcept nogil:
    cdef int n = 0
    while a:
        a >>= 1
        n += 1
    return n


cdef inline int norm(longword a) noexcept nogil:
    if a < 0:
        if a <= -1073741824:
            return 0
        a = ~a
    return 31 - bit_length(<uint32_t>a)


cdef inline word gdiv(int32_t num, int32_t denum) noexcept nogil:
    cdef int out = 0, k
    if num == 0:
        return 0
    for k in range(15):
        out <<= 1
        num <<= 1
        if num >= denum:
            num -= denum
            out += 1
    return <word>out


cdef inline word asr(word a, int n) noexcept nogil:
    if n >= 16:
        return -1 if a < 0 else 0
    if n <= -16:
        return 0
    if n < 0:
        return wrap16(<int64_t>a << -n)
    return a >> n


cdef inline word asl(word a, int n) noexcept nogil:
    if n >= 16:
        return 0
    if n <= -16:
        return -1 if a < 0 else 0
    if n < 0:
        return asr(a, -n)
    return wrap16(<int64_t>a << n)


cdef struct gsm_state:
    word dp0[280]
    word e[50]
    word z1
    longword L_z2
    word mp
    word u[8]
    word LARpp[2][8]
    int j
    word nrp
    word v[9]
    word msr


cdef class CodecState:
    """Encoder and decoder history for one GSM stream; reset state is all zero."""

    cdef gsm_state st

    def __init__(self):
        self.reset()

    def reset(self):
        memset(&self.st, 0, sizeof(gsm_state))
        self.st.nrp = 40

    def copy(self):
        cdef CodecState other = CodecState()
        memcpy(&other.st, &self.st, sizeof(gsm_state))
        return other


cdef void preprocess(gsm_state* S, const word* s, word* so) noexcept nogil:
    cdef word z1 = S.z1, mp = S.mp, SO, s1, msp, lsp
    cdef longword L_z2 = S.L_z2, L_s2, L_temp
    cdef int k
    for k in range(160):
        SO = (s[k] >> 3) << 2
        s1 = SO - z1
        z1 = SO
        L_s2 = (<longword>s1) << 15
        msp = <word>(L_z2 >> 15)
        lsp = <word>(L_z2 - ((<longword>msp) << 15))
        L_s2 += (<int32_t>lsp * 32735 + 16384) >> 15
        L_z2 = lsat(<int64_t>msp * 32735 + L_s2)
        L_temp = lsat(<int64_t>L_z2 + 16384)
        msp = mult_r(mp, -28180)
        mp = <word>(L_temp >> 15)
        so[k] = add(mp, msp)
    S.z1 = z1
    S.L_z2 = L_z2
    S.mp = mp


cdef void autocorrelation(word* s, longword* acf) noexcept nogil:
    cdef word smax = 0, t, f
    cdef int k, i, scalauto
    cdef int64_t acc
    for k in range(160):
        t = gabs(s[k])
        if t > smax:
            smax = t
    scalauto = 0 if smax == 0 else 4 - norm((<longword>smax) << 16)
    if scalauto > 0:
        f = 16384 >> (scalauto - 1)
        for k in range(160):
            s[k] = mult_r(s[k], f)
    for k in range(9):
        acc = 0
        for i in range(k, 160):
            acc += <int32_t>s[i] * <int32_t>s[i - k]
        acf[k] = wrap32(<int64_t>wrap32(acc) << 1)
    if scalauto > 0:
        for k in range(160):
            s[k] = wrap16(<int64_t>s[k] << scalauto)


cdef void reflection_coefficients(longword* L_ACF, word* r) noexcept nogil:
    cdef word ACF[9]
    cdef word P[9]
    cdef word K[9]
    cdef int i, m, n, temp
    cdef word t, rn
    for i in range(8):
        r[i] = 0
    if L_ACF[0] == 0:
        return
    temp = norm(L_ACF[0])
    for i in range(9):
        ACF[i] = <word>(wrap32(<int64_t>L_ACF[i] << temp) >> 16)
    K[0] = 0
    K[8] = 0
    for i in range(1, 8):
        K[i] = ACF[i]
    for i in range(9):
        P[i] = ACF[i]
    for n in range(1, 9):
        t = gabs(P[1])
        if P[0] < t:
            return
        rn = gdiv(t, P[0])
        if P[1] > 0:
            rn = -rn
        r[n - 1] = rn
        if n == 8:
            return
        P[0] = add(P[0], mult_r(P[1], rn))
        for m in range(1, 9 - n):
            P[m] = add(P[m + 1], mult_r(K[m], rn))
            K[m] = add(K[m], mult_r(P[m + 1], rn))


cdef void to_lar_and_quantize(word* r, word* LARc) noexcept nogil:
    cdef int i
    cdef word t, x
    cdef int q
    for i in range(8):
        x = r[i]
        t = gabs(x)
        if t < 22118:
            t >>= 1
        elif t < 31130:
            t -= 11059
        else:
            t = (t - 26112) << 2
        if x < 0:
            t = -t
        q = mult(LAR_A[i], t)
        q = add(q, LAR_B[i])
        q = add(q, 256)
        q >>= 9
        if q > LAR_MAC[i]:
            LARc[i] = LAR_MAC[i] - LAR_MIC[i]
        elif q < LAR_MIC[i]:
            LARc[i] = 0
        else:
            LARc[i] = q - LAR_MIC[i]


cdef void decode_lar(const word* LARc, word* out) noexcept nogil:
    cdef int i
    cdef word t
    for i in range(8):
        t = <word>(<int32_t>add(LARc[i], LAR_MIC[i]) << 10)
        t = sub(t, <int32_t>LAR_B[i] << 1)
        t = mult_r(INVA[i], t)
        out[i] = add(t, t)


cdef void interp_rp(word* prev, word* cur, int seg, word* rp) noexcept nogil:
    cdef int i
    cdef word a, b, x, t
    for i in range(8):
        a = prev[i]
        b = cur[i]
        if seg == 0:
            x = add(add(a >> 2, b >> 2), a >> 1)
        elif seg == 1:
            x = add(a >> 1, b >> 1)
        elif seg == 2:
            x = add(add(a >> 2, b >> 2), b >> 1)
        else:
            x = b
        t = gabs(x)
        if t < 11059:
            t <<= 1
        elif t < 20070:
            t += 11059
        else:
            t = add(t >> 2, 26112)
        rp[i] = -t if x < 0 else t


cdef int[5] SEG_BOUNDS = [0, 13, 27, 40, 160]


cdef void short_term_analysis(gsm_state* S, const word* LARc, word* s) noexcept nogil:
    cdef word* cur = S.LARpp[S.j]
    cdef word* prev
    cdef word rp[8]
    cdef int seg, k, i
    cdef word di, sav, ui, rpi
    S.j ^= 1
    prev = S.LARpp[S.j]
    decode_lar(LARc, cur)
    for seg in range(4):
        interp_rp(prev, cur, seg, rp)
        for k in range(SEG_BOUNDS[seg], SEG_BOUNDS[seg + 1]):
            di = s[k]
            sav = di
            for i in range(8):
                ui = S.u[i]
                rpi = rp[i]
                S.u[i] = sav
                sav = add(ui, mult_r(rpi, di))
                di = add(di, mult_r(rpi, ui))
            s[k] = di


cdef void short_term_synthesis(gsm_state* S, const word* LARcr, word* wt, word* sr) noexcept nogil:
    cdef word* cur = S.LARpp[S.j]
    cdef word* prev
    cdef word rrp[8]
    cdef int seg, k, i
    cdef word sri
    S.j ^= 1
    prev = S.LARpp[S.j]
    decode_lar(LARcr, cur)
    for seg in range(4):
        interp_rp(prev, cur, seg, rrp)
        for k in range(SEG_BOUNDS[seg], SEG_BOUNDS[seg + 1]):
            sri = wt[k]
            for i in range(7, -1, -1):
                sri = sub(sri, mult_r(rrp[i], S.v[i]))
                S.v[i + 1] = add(S.v[i], mult_r(rrp[i], sri))
            S.v[0] = sri
            sr[k] = sri


cdef void ltp_parameters(const word* d, const word* dp0, int base, word* Nc_out, word* bc_out) noexcept nogil:
    cdef word dmax = 0, t, R, Sv
    cdef word wt[40]
    cdef int k, lam, off, temp, scal, bc
    cdef int64_t acc, L_max, L_power
    cdef word Nc
    for k in range(40):
        t = gabs(d[k])
        if t > dmax:
            dmax = t
    temp = 0 if dmax == 0 else norm((<longword>dmax) << 16)
    scal = 0 if temp > 6 else 6 - temp
    for k in range(40):
        wt[k] = d[k] >> scal
    L_max = 0
    Nc = 40
    for lam in range(40, 121):
        off = base - lam
        acc = 0
        for k in range(40):
            acc += <int32_t>wt[k] * <int32_t>dp0[off + k]
        if acc > L_max:
            Nc = lam
            L_max = acc
    L_max <<= 1
    L_max >>= 6 - scal
    L_power = 0
    off = base - Nc
    for k in range(40):
        t = dp0[off + k] >> 3
        L_power += <int32_t>t * <int32_t>t
    L_power <<= 1
    Nc_out[0] = Nc
    if L_max <= 0:
        bc_out[0] = 0
        return
    if L_max >= L_power:
        bc_out[0] = 3
        return
    temp = norm(<longword>L_power)
    R = <word>(wrap32(L_max << temp) >> 16)
    Sv = <word>(wrap32(L_power << temp) >> 16)
    bc = 0
    while bc <= 2:
        if R <= mult(Sv, DLB[bc]):
            break
        bc += 1
    bc_out[0] = bc


cdef int[9] H_IDX = [0, 1, 3, 4, 5, 6, 7, 9, 10]
cdef int[9] H_VAL = [-134, -374, 2054, 5741, 8192, 5741, 2054, -374, -134]


cdef inline void xmaxc_to_exp_mant(word xmaxc, word* exp_out, word* mant_out) noexcept nogil:
    cdef word exp = 0, mant
    if xmaxc > 15:
        exp = (xmaxc >> 3) - 1
    mant = xmaxc - (exp << 3)
    if mant == 0:
        exp = -4
        mant = 7
    else:
        while mant <= 7:
            mant = mant << 1 | 1
            exp -= 1
        mant -= 8
    exp_out[0] = exp
    mant_out[0] = mant


cdef void apcm_inverse(const word* xMc, word mant, word exp, word* xMp) noexcept nogil:
    cdef word temp1 = FAC[mant]
    cdef word temp2 = sub(6, exp)
    cdef word temp3 = asl(1, sub(temp2, 1))
    cdef word t
    cdef int i
    for i in range(13):
        t = <word>((((<int32_t>xMc[i]) << 1) - 7) << 12)
        t = mult_r(temp1, t)
        t = add(t, temp3)
        xMp[i] = asr(t, temp2)


cdef void rpe_encode(word* e, word* out) noexcept nogil:
    """e is the 50-word residual buffer; out receives Mc, xmaxc, xMc[13]."""
    cdef word x[40]
    cdef word xM[13]
    cdef word xMp[13]
    cdef int k, i, m, Mc, itest
    cdef int64_t acc, EM
    cdef word t, xmax, exp, mant, xmaxc, temp1, temp2, temp
    for k in range(40):
        acc = 4096
        for i in range(9):
            acc += <int32_t>e[k + H_IDX[i]] * H_VAL[i]
        acc >>= 13
        x[k] = sat(acc)
    Mc = 0
    EM = -1
    for m in range(4):
        acc = 0
        for i in range(13):
            t = x[m + 3 * i] >> 2
            acc += <int32_t>t * <int32_t>t
        acc <<= 1
        if acc > EM:
            Mc = m
            EM = acc
    for i in range(13):
        xM[i] = x[Mc + 3 * i]
    xmax = 0
    for i in range(13):
        t = gabs(xM[i])
        if t > xmax:
            xmax = t
    exp = 0
    temp = xmax >> 9
    itest = 0
    for i in range(6):
        itest |= temp <= 0
        temp >>= 1
        if not itest:
            exp += 1
    xmaxc = add(xmax >> (exp + 5), exp << 3)
    xmaxc_to_exp_mant(xmaxc, &exp, &mant)
    temp1 = 6 - exp
    temp2 = NRFAC[mant]
    out[0] = Mc
    out[1] = xmaxc
    for i in range(13):
        t = wrap16(<int64_t>xM[i] << temp1)
        t = mult(t, temp2)
        out[2 + i] = (t >> 12) + 4
    apcm_inverse(out + 2, mant, exp, xMp)
    for i in range(40):
        e[5 + i] = 0
    for i in range(13):
        e[5 + Mc + 3 * i] = xMp[i]


cdef void encode_one(gsm_state* S, const word* s, word* params) noexcept nogil:
    cdef word so[160]
    cdef longword acf[9]
    cdef word r[8]
    cdef word dpp[40]
    cdef word Nc, bc, bp
    cdef int k, i, base, off
    preprocess(S, s, so)
    autocorrelation(so, acf)
    reflection_coefficients(acf, r)
    to_lar_and_quantize(r, params)
    short_term_analysis(S, params, so)
    for k in range(4):
        base = 120 + k * 40
        ltp_parameters(so + k * 40, S.dp0, base, &Nc, &bc)
        bp = QLB[bc]
        off = base - Nc
        for i in range(40):
            dpp[i] = mult_r(bp, S.dp0[off + i])
            S.e[5 + i] = sub(so[k * 40 + i], dpp[i])
        params[8 + 17 * k] = Nc
        params[9 + 17 * k] = bc
        rpe_encode(S.e, params + 10 + 17 * k)
        for i in range(40):
            S.dp0[base + i] = add(S.e[5 + i], dpp[i])
    memcpy(S.dp0, S.dp0 + 160, 120 * sizeof(word))


cdef void decode_one(gsm_state* S, const word* p, word* s) noexcept nogil:
    cdef word wt[160]
    cdef word erp[40]
    cdef word xMp[13]
    cdef word Ncr, bcr, Mcr, xmaxcr, exp, mant, Nr, brp, drpp, msr
    cdef int j, k, i
    for j in range(4):
        Ncr = p[8 + 17 * j]
        bcr = p[9 + 17 * j]
        Mcr = p[10 + 17 * j]
        xmaxcr = p[11 + 17 * j]
        xmaxc_to_exp_mant(xmaxcr, &exp, &mant)
        apcm_inverse(p + 12 + 17 * j, mant, exp, xMp)
        for i in range(40):
            erp[i] = 0
        for i in range(13):
            erp[Mcr + 3 * i] = xMp[i]
        Nr = S.nrp if (Ncr < 40 or Ncr > 120) else Ncr
        S.nrp = Nr
        brp = QLB[bcr]
        for k in range(40):
            drpp = mult_r(brp, S.dp0[120 + k - Nr])
            S.dp0[120 + k] = add(erp[k], drpp)
        for k in range(120):
            S.dp0[k] = S.dp0[40 + k]
        for k in range(40):
            wt[j * 40 + k] = S.dp0[120 + k]
    short_term_synthesis(S, p, wt, s)
    msr = S.msr
    for k in range(160):
        msr = add(s[k], mult_r(msr, 28180))
        s[k] = wrap16(add(msr, msr) & 0xFFF8)
    S.msr = msr


def encode_frames(CodecState state, samples):
    cdef cnp.int16_t[:, ::1] pcm = np.ascontiguousarray(
        np.asarray(samples, dtype=np.int16).reshape(-1, 160))
    out = np.empty((pcm.shape[0], 76), dtype=np.int16)
    cdef cnp.int16_t[:, ::1] o = out
    cdef Py_ssize_t n
    with nogil:
        for n in range(pcm.shape[0]):
            encode_one(&state.st, &pcm[n, 0], &o[n, 0])
    return out


def decode_frames(CodecState state, params):
    cdef cnp.int16_t[:, ::1] prm = np.ascontiguousarray(
        np.asarray(params, dtype=np.int16).reshape(-1, 76))
    out = np.empty((prm.shape[0], 160), dtype=np.int16)
    cdef cnp.int16_t[:, ::1] o = out
    cdef Py_ssize_t n
    with nogil:
        for n in range(prm.shape[0]):
            decode_one(&state.st, &prm[n, 0], &o[n, 0])
    return out


def encode_frame(CodecState state, samples):
    return encode_frames(state, samples)[0].tolist()


def decode_frame(CodecState state, params):
    return decode_frames(state, params)[0].tolist()
