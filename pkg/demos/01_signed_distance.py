# signed distance fields of binary masks, and what thresholding them does
import numpy as np

from sdftopo.distance import edt, sdf, threshold_mask
from sdftopo.fixtures import gen_fixture
from sdftopo.metrics import betti_numbers

dot = np.zeros((3, 3), dtype=np.uint8)
dot[1, 1] = 1
print(edt(dot, "to-foreground"))   # 0 at the centre, 1 on edges, sqrt(2) in corners

ring = gen_fixture("broken-ring", 32)
f = sdf(ring)
print("inside >= 1:", f[ring == 1].min(), " outside <= -1:", f[ring == 0].max())

# thresholding at 0 gives the mask back; going lower grows the region
# until the 3 pixel gap closes
for tau in (0, -1, -2, -3):
    m = threshold_mask(f, tau)
    print(f"tau={tau:>2}  pixels={int(m.sum()):4d}  betti={betti_numbers(m)}")
