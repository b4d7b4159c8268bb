# cubical persistence on a small image, checked against a brute-force sweep
import numpy as np

from sdftopo.cubical import betti_at, diagram_to_csv, persistence_diagram
from sdftopo.oracles import sweep_betti

img = np.array([[1, 1, 2],
                [2, 5, 2],
                [2, 1, 1]], dtype=float)
dgm = persistence_diagram(img)          # sublevel by default
print(diagram_to_csv(dgm))

for t in (1, 2, 5):
    print(t, betti_at(dgm, t), sweep_betti(img, t))   # the two columns agree

# superlevel diagrams of a likelihood map: birth >= death
like = np.random.default_rng(0).random((6, 6))
for p in persistence_diagram(like, "superlevel"):
    print(p.dim, round(p.birth, 3), round(p.death, 3) if not p.essential else "essential")
