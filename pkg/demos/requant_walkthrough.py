"""How a real rescale factor becomes an integer multiply and shift.

Run: python demos/requant_walkthrough.py
"""

import numpy as np

from tinymask.engine.kernels import conv2d_i8, requantize
from tinymask.quantizer import derive_requant

for s_in, s_w, s_out in [(0.5, 1.0, 1.0), (0.02, 0.004, 0.05), (0.5, 0.25, 0.25)]:
    rq = derive_requant(s_in, s_w, s_out)
    mult, shift = int(rq.multiplier), int(rq.shift)
    back = mult / 2**31 / 2.0**shift
    print(f"M = {s_in * s_w / s_out:.6g}  ->  multiplier {mult}, shift {shift}  (reconstructs {back:.10g})")

# an accumulator of 1000 scaled by M = 0.0016 lands on round(1.6) = 2
rq = derive_requant(0.02, 0.004, 0.05)
print("requantize(1000) =", requantize(np.array([1000]), rq.multiplier, rq.shift, zp_out=0))

# a 1x1 convolution with one input code of 4 and weight 2 at M = 0.5
x = np.array([[[[4]]]], np.int8)
w = np.array([[[[2]]]], np.int8)
rq = derive_requant(0.5, 1.0, 1.0)
out = conv2d_i8(x, w, np.zeros(1, np.int32), 0, 0, np.atleast_1d(rq.multiplier), np.atleast_1d(rq.shift))
print("toy conv output code:", int(out.reshape(-1)[0]))
