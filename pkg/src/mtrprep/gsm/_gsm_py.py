"""Pure-Python fixed-point GSM 06.10 full-rate (RPE-LTP) codec.

Bit-exact 16/32-bit saturating arithmetic on plain ints.  This is the
fallback used when the compiled ``_gsm_ext`` module is unavailable; both
backends take and return the same parameter layout (see ``PARAMS_PER_FRAME``).
"""

import numpy as np

from .tables import (
    DLB, FAC, INVA, LAR_A, LAR_B, LAR_MAC, LAR_MIC, NRFAC, QLB,
)

MIN_WORD = -32768
MAX_WORD = 32767
MIN_LONG = -2147483648
MAX_LONG = 2147483647

FRAME_SAMPLES = 160
PARAMS_PER_FRAME = 76  # 8 LARc + 4 * (Nc, bc, Mc, xmaxc, 13 * xMc)


def _sat(x):
    return MAX_WORD if x > MAX_WORD else MIN_WORD if x < MIN_WORD else x


def _lsat(x):
    return MAX_LONG if x > MAX_LONG else MIN_LONG if x < MIN_LONG else x


def _wrap16(x):
    return ((x + 32768) & 0xFFFF) - 32768


def _wrap32(x):
    return ((x + 0x80000000) & 0xFFFFFFFF) - 0x80000000


def mult(a, b):
    if a == MIN_WORD and b == MIN_WORD:
        return MAX_WORD
    return (a * b) >> 15


def mult_r(a, b):
    if a == MIN_WORD and b == MIN_WORD:
        return MAX_WORD
    return (a * b + 16384) >> 15


def add(a, b):
    return _sat(a + b)


def sub(a, b):
    return _sat(a - b)


def gabs(a):
    if a < 0:
        return MAX_WORD if a == MIN_WORD else -a
    return a


def norm(a):
    """Left shifts needed to normalise a nonzero 32-bit value."""
    if a < 0:
        if a <= -1073741824:
            return 0
        a = ~a
    return 31 - a.bit_length()


def div(num, denum):
    if num == 0:
        return 0
    out = 0
    for _ in range(15):
        out <<= 1
        num <<= 1
        if num >= denum:
            num -= denum
            out += 1
    return out


def asr(a, n):
    if n >= 16:
        return -(a < 0)
    if n <= -16:
        return 0
    if n < 0:
        return _wrap16(a << -n)
    return a >> n


def asl(a, n):
    if n >= 16:
        return 0
    if n <= -16:
        return -(a < 0)
    if n < 0:
        return asr(a, -n)
    return _wrap16(a << n)


class CodecState:
    """Encoder and decoder history for one GSM stream; reset state is all zero."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.dp0 = [0] * 280
        self.e = [0] * 50
        self.z1 = 0
        self.L_z2 = 0
        self.mp = 0
        self.u = [0] * 8
        self.LARpp = [[0] * 8, [0] * 8]
        self.j = 0
        self.nrp = 40
        self.v = [0] * 9
        self.msr = 0

    def copy(self):
        other = CodecState.__new__(CodecState)
        other.dp0 = list(self.dp0)
        other.e = list(self.e)
        other.z1, other.L_z2, other.mp = self.z1, self.L_z2, self.mp
        other.u = list(self.u)
        other.LARpp = [list(self.LARpp[0]), list(self.LARpp[1])]
        other.j, other.nrp, other.msr = self.j, self.nrp, self.msr
        other.v = list(self.v)
        return other


# -- encoder: preprocessing and LPC analysis ---------------------------------

def _preprocess(S, s):
    z1, L_z2, mp = S.z1, S.L_z2, S.mp
    so = [0] * 160
    for k in range(160):
        SO = (s[k] >> 3) << 2
        s1 = SO - z1
        z1 = SO
        L_s2 = s1 << 15
        msp = L_z2 >> 15
        lsp = L_z2 - (msp << 15)
        L_s2 += (lsp * 32735 + 16384) >> 15
        L_z2 = _lsat(msp * 32735 + L_s2)
        L_temp = _lsat(L_z2 + 16384)
        msp = mult_r(mp, -28180)
        mp = L_temp >> 15
        so[k] = add(mp, msp)
    S.z1, S.L_z2, S.mp = z1, L_z2, mp
    return so


def _autocorrelation(s):
    smax = 0
    for x in s:
        t = gabs(x)
        if t > smax:
            smax = t
    scalauto = 0 if smax == 0 else 4 - norm(smax << 16)
    if scalauto > 0:
        f = 16384 >> (scalauto - 1)
        for k in range(160):
            s[k] = mult_r(s[k], f)
    acf = [0] * 9
    for k in range(9):
        acc = 0
        for i in range(k, 160):
            acc += s[i] * s[i - k]
        # 32-bit wraparound, as in the reference C arithmetic
        acf[k] = _wrap32(_wrap32(acc) << 1)
    if scalauto > 0:
        for k in range(160):
            s[k] = _wrap16(s[k] << scalauto)
    return acf


def _reflection_coefficients(L_ACF):
    r = [0] * 8
    if L_ACF[0] == 0:
        return r
    temp = norm(L_ACF[0])
    ACF = [_wrap32(L_ACF[i] << temp) >> 16 for i in range(9)]
    K = [0] * 9
    for i in range(1, 8):
        K[i] = ACF[i]
    P = list(ACF)
    for n in range(1, 9):
        temp = gabs(P[1])
        if P[0] < temp:
            return r  # remaining coefficients stay zero
        rn = div(temp, P[0])
        if P[1] > 0:
            rn = -rn
        r[n - 1] = rn
        if n == 8:
            return r
        P[0] = add(P[0], mult_r(P[1], rn))
        for m in range(1, 9 - n):
            P[m] = add(P[m + 1], mult_r(K[m], rn))
            K[m] = add(K[m], mult_r(P[m + 1], rn))
    return r


def _to_lar(r):
    out = []
    for x in r:
        t = gabs(x)
        if t < 22118:
            t >>= 1
        elif t < 31130:
            t -= 11059
        else:
            t = (t - 26112) << 2
        out.append(-t if x < 0 else t)
    return out


def _quantize_lar(LAR):
    out = []
    for i in range(8):
        t = mult(LAR_A[i], LAR[i])
        t = add(t, LAR_B[i])
        t = add(t, 256)
        t >>= 9
        mac, mic = LAR_MAC[i], LAR_MIC[i]
        out.append(mac - mic if t > mac else (0 if t < mic else t - mic))
    return out


# -- short-term filtering -----------------------------------------------------

def _decode_lar(LARc):
    out = []
    for i in range(8):
        t = add(LARc[i], LAR_MIC[i]) << 10
        t = sub(t, LAR_B[i] << 1)
        t = mult_r(INVA[i], t)
        out.append(add(t, t))
    return out


def _interp(prev, cur, segment):
    if segment == 0:
        return [add(add(a >> 2, b >> 2), a >> 1) for a, b in zip(prev, cur)]
    if segment == 1:
        return [add(a >> 1, b >> 1) for a, b in zip(prev, cur)]
    if segment == 2:
        return [add(add(a >> 2, b >> 2), b >> 1) for a, b in zip(prev, cur)]
    return list(cur)


def _lar_to_rp(LARp):
    out = []
    for x in LARp:
        t = gabs(x)
        if t < 11059:
            t <<= 1
        elif t < 20070:
            t += 11059
        else:
            t = add(t >> 2, 26112)
        out.append(-t if x < 0 else t)
    return out


_SEGMENTS = ((0, 13), (13, 27), (27, 40), (40, 160))


def _short_term_analysis(S, LARc, s):
    cur = S.LARpp[S.j]
    S.j ^= 1
    prev = S.LARpp[S.j]
    cur[:] = _decode_lar(LARc)
    u = S.u
    for seg, (lo, hi) in enumerate(_SEGMENTS):
        rp = _lar_to_rp(_interp(prev, cur, seg))
        for k in range(lo, hi):
            di = sav = s[k]
            for i in range(8):
                ui = u[i]
                rpi = rp[i]
                u[i] = sav
                sav = add(ui, mult_r(rpi, di))
                di = add(di, mult_r(rpi, ui))
            s[k] = di


def _short_term_synthesis(S, LARcr, wt):
    cur = S.LARpp[S.j]
    S.j ^= 1
    prev = S.LARpp[S.j]
    cur[:] = _decode_lar(LARcr)
    v = S.v
    sr = [0] * 160
    for seg, (lo, hi) in enumerate(_SEGMENTS):
        rrp = _lar_to_rp(_interp(prev, cur, seg))
        for k in range(lo, hi):
            sri = wt[k]
            for i in range(7, -1, -1):
                sri = sub(sri, mult_r(rrp[i], v[i]))
                v[i + 1] = add(v[i], mult_r(rrp[i], sri))
            sr[k] = v[0] = sri
    return sr


# -- long-term prediction -----------------------------------------------------

def _ltp_parameters(d, dp0, base):
    """Lag and gain for subframe d; dp0[base + k] holds dp[k] for k in [-120, -1]."""
    dmax = 0
    for x in d:
        t = gabs(x)
        if t > dmax:
            dmax = t
    temp = 0 if dmax == 0 else norm(dmax << 16)
    scal = 0 if temp > 6 else 6 - temp
    wt = [x >> scal for x in d]

    L_max = 0
    Nc = 40
    for lam in range(40, 121):
        off = base - lam
        acc = 0
        for k in range(40):
            acc += wt[k] * dp0[off + k]
        if acc > L_max:
            Nc = lam
            L_max = acc
    L_max <<= 1
    L_max >>= 6 - scal

    L_power = 0
    off = base - Nc
    for k in range(40):
        t = dp0[off + k] >> 3
        L_power += t * t
    L_power <<= 1

    if L_max <= 0:
        return Nc, 0
    if L_max >= L_power:
        return Nc, 3
    temp = norm(L_power)
    R = _wrap32(L_max << temp) >> 16
    Sv = _wrap32(L_power << temp) >> 16
    bc = 0
    while bc <= 2:
        if R <= mult(Sv, DLB[bc]):
            break
        bc += 1
    return Nc, bc


# -- RPE encoding and decoding ------------------------------------------------

_H = ((0, -134), (1, -374), (3, 2054), (4, 5741), (5, 8192),
      (6, 5741), (7, 2054), (9, -374), (10, -134))


def _weighting_filter(e):
    """e holds 50 values: 5 zeros, the 40-sample residual, 5 zeros."""
    x = [0] * 40
    for k in range(40):
        acc = 4096
        for i, h in _H:
            acc += e[k + i] * h
        acc >>= 13
        x[k] = MIN_WORD if acc < MIN_WORD else MAX_WORD if acc > MAX_WORD else acc
    return x


def _grid_selection(x):
    Mc = 0
    EM = -1
    for m in range(4):
        acc = 0
        for i in range(13):
            t = x[m + 3 * i] >> 2
            acc += t * t
        acc <<= 1
        if acc > EM:
            Mc, EM = m, acc
    return Mc, [x[Mc + 3 * i] for i in range(13)]


def xmaxc_to_exp_mant(xmaxc):
    exp = 0
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
    return exp, mant


def _apcm_quantization(xM):
    xmax = 0
    for x in xM:
        t = gabs(x)
        if t > xmax:
            xmax = t
    exp = 0
    temp = xmax >> 9
    itest = 0
    for _ in range(6):
        itest |= temp <= 0
        temp >>= 1
        if not itest:
            exp += 1
    xmaxc = add(xmax >> (exp + 5), exp << 3)
    exp, mant = xmaxc_to_exp_mant(xmaxc)
    temp1 = 6 - exp
    temp2 = NRFAC[mant]
    xMc = []
    for x in xM:
        t = _wrap16(x << temp1)
        t = mult(t, temp2)
        xMc.append((t >> 12) + 4)
    return xmaxc, xMc, exp, mant


def _apcm_inverse(xMc, mant, exp):
    temp1 = FAC[mant]
    temp2 = sub(6, exp)
    temp3 = asl(1, sub(temp2, 1))
    out = []
    for c in xMc:
        t = ((c << 1) - 7) << 12
        t = mult_r(temp1, t)
        t = add(t, temp3)
        out.append(asr(t, temp2))
    return out


def _grid_position(Mc, xMp):
    ep = [0] * 40
    for i in range(13):
        ep[Mc + 3 * i] = xMp[i]
    return ep


# -- frame level ----------------------------------------------------------------

def encode_frame(S, samples):
    """Encode 160 int16 samples; returns 76 quantized parameters."""
    s = [int(x) for x in samples]
    so = _preprocess(S, s)
    L_ACF = _autocorrelation(so)
    LARc = _quantize_lar(_to_lar(_reflection_coefficients(L_ACF)))
    _short_term_analysis(S, LARc, so)

    params = list(LARc)
    dp0 = S.dp0
    e = S.e
    for k in range(4):
        d = so[k * 40:(k + 1) * 40]
        base = 120 + k * 40
        Nc, bc = _ltp_parameters(d, dp0, base)
        bp = QLB[bc]
        off = base - Nc
        dpp = [mult_r(bp, dp0[off + i]) for i in range(40)]
        for i in range(40):
            e[5 + i] = sub(d[i], dpp[i])
        x = _weighting_filter(e)
        Mc, xM = _grid_selection(x)
        xmaxc, xMc, exp, mant = _apcm_quantization(xM)
        ep = _grid_position(Mc, _apcm_inverse(xMc, mant, exp))
        for i in range(40):
            e[5 + i] = ep[i]
            dp0[base + i] = add(ep[i], dpp[i])
        params += [Nc, bc, Mc, xmaxc]
        params += xMc
    dp0[0:120] = dp0[160:280]
    return params


def decode_frame(S, params):
    """Decode 76 parameters into 160 int16 samples."""
    p = [int(x) for x in params]
    LARcr = p[:8]
    drp = S.dp0
    wt = [0] * 160
    for j in range(4):
        Ncr, bcr, Mcr, xmaxcr = p[8 + 17 * j: 12 + 17 * j]
        xMcr = p[12 + 17 * j: 25 + 17 * j]
        exp, mant = xmaxc_to_exp_mant(xmaxcr)
        erp = _grid_position(Mcr, _apcm_inverse(xMcr, mant, exp))
        Nr = S.nrp if (Ncr < 40 or Ncr > 120) else Ncr
        S.nrp = Nr
        brp = QLB[bcr]
        for k in range(40):
            drpp = mult_r(brp, drp[120 + k - Nr])
            drp[120 + k] = add(erp[k], drpp)
        drp[0:120] = drp[40:160]
        wt[j * 40:(j + 1) * 40] = drp[120:160]
    s = _short_term_synthesis(S, LARcr, wt)
    msr = S.msr
    for k in range(160):
        msr = add(s[k], mult_r(msr, 28180))
        s[k] = _wrap16(add(msr, msr) & 0xFFF8)
    S.msr = msr
    return s


def encode_frames(state, samples):
    pcm = np.asarray(samples, dtype=np.int16).reshape(-1, FRAME_SAMPLES)
    out = np.empty((pcm.shape[0], PARAMS_PER_FRAME), dtype=np.int16)
    for n in range(pcm.shape[0]):
        out[n] = encode_frame(state, pcm[n].tolist())
    return out


def decode_frames(state, params):
    prm = np.asarray(params, dtype=np.int16).reshape(-1, PARAMS_PER_FRAME)
    out = np.empty((prm.shape[0], FRAME_SAMPLES), dtype=np.int16)
    for n in range(prm.shape[0]):
        out[n] = decode_frame(state, prm[n].tolist())
    return out
