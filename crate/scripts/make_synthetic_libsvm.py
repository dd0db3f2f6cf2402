"""Write the bundled 200-sample synthetic LIBSVM file (20 features, ~30% dense)."""
import random
import sys

rng = random.Random(20240611)
d, n = 20, 200
w = [rng.gauss(0, 1) for _ in range(d)]
lines = ["# synthetic binary classification sample, 200 rows, 20 features"]
for _ in range(n):
    feats = sorted(rng.sample(range(1, d + 1), rng.randint(1, 8)))
    row = [(j, round(rng.uniform(-1, 1), 4)) for j in feats]
    z = sum(w[j - 1] * v for j, v in row) + rng.gauss(0, 0.3)
    label = "+1" if z > 0 else "-1"
    lines.append(label + " " + " ".join(f"{j}:{v:g}" for j, v in row))
# make sure the last feature index is present so d is determined by the data
lines[-1] = lines[-1].split(" ")[0] + " 3:0.25 20:-0.5"
open(sys.argv[1], "w").write("\n".join(lines) + "\n")
