"""Check every analytic gradient against central finite differences.

The layers under test are the exact ones the training loop uses:
1-D convolution (both the K3/S1/P1 shape and the K1024/S512/P276
waveform framer at a reduced input size), max pooling, the two-layer
LSTM, the dense head, and the whole network through sigmoid + BCE.
"""

import sys
import time

sys.path.insert(0, "tests")
from test_nn_grad import run_full_gradient_audit  # noqa: E402

start = time.time()
results = run_full_gradient_audit()
elapsed = time.time() - start

print(f"{'check':24s}  worst relative error")
for name, err in results.items():
    print(f"{name:24s}  {err:.3e}")

worst = max(results.values())
print(f"\nworst overall: {worst:.3e}  (bound 1e-4)  in {elapsed:.1f}s")
assert worst < 1e-4
