# segmentation metrics on a thin structure with a one pixel break
import numpy as np

from sdftopo.fixtures import gen_fixture
from sdftopo.metrics import evaluate, skeletonize

gt = gen_fixture("line", 16)
broken = gen_fixture("broken-line", 16)
print(evaluate(broken, gt))    # overlap scores stay high, Betti error is (1, 0)

blob = np.zeros((9, 9), dtype=np.uint8)
blob[2:7, 1:8] = 1
print(skeletonize(blob))
