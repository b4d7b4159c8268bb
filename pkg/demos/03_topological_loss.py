# Wasserstein and Betti matching losses between a prediction and a mask
import numpy as np

from sdftopo.distance import sdf
from sdftopo.fixtures import gen_fixture
from sdftopo.refine import AdapterParams, adapter_forward
from sdftopo.topo_loss import (LossConfig, betti_loss_grad, combined_loss,
                               wasserstein_loss_grad, wasserstein_matching)

# a single point vs an empty diagram: it goes to the diagonal
print(wasserstein_matching([[0.0, 1.0]], np.empty((0, 2)))[1], np.sqrt(0.5))

gt = gen_fixture("ring", 32)
pred = adapter_forward(sdf(gen_fixture("broken-ring", 32)), AdapterParams(1.0, -1.9))

for kind, topo in (("wasserstein", wasserstein_loss_grad), ("betti", betti_loss_grad)):
    cfg = LossConfig(alpha=0.9, loss_kind=kind)
    lg = combined_loss(pred, gt, cfg)
    print(kind, round(lg.value, 4), {k: v for k, v in lg.terms.items() if k != "dice_term"})
    # the Dice part touches every pixel; the topological part only critical vertices
    rows, cols = np.nonzero(topo(pred, gt, cfg).grad)
    print("  topological gradient on", len(rows), "pixels:",
          [(int(r), int(c)) for r, c in zip(rows, cols)][:6])
