"""Quantization tables of the GSM 06.10 full-rate codec."""

# LAR quantization: slope, offset, largest and smallest coded value
LAR_A = (20480, 20480, 20480, 20480, 13964, 15360, 8534, 9036)
LAR_B = (0, 0, 2048, -2560, 94, -1792, -341, -1144)
LAR_MIC = (-32, -32, -16, -16, -8, -8, -4, -4)
LAR_MAC = (31, 31, 15, 15, 7, 7, 3, 3)
# round(32768 * 8 / LAR_A) in Q13
INVA = (13107, 13107, 13107, 13107, 19223, 17476, 31454, 29708)

# LTP gain decision levels and quantized gains
DLB = (6554, 16384, 26214, 32767)
QLB = (3277, 11469, 21299, 32767)

# inverse and direct RPE mantissa tables
NRFAC = (29128, 26215, 23832, 21846, 20165, 18725, 17476, 16384)
FAC = (18431, 20479, 22527, 24575, 26623, 28671, 30719, 32767)

# bits per parameter in transmission order, one frame
LAR_BITS = (6, 6, 5, 5, 4, 4, 3, 3)
SUBFRAME_BITS = (7, 2, 2, 6) + (3,) * 13
FRAME_FIELD_BITS = LAR_BITS + SUBFRAME_BITS * 4
assert sum(FRAME_FIELD_BITS) == 260
