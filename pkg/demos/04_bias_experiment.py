"""The whole experiment at demo scale: does gender-balanced sub-sampling
change who gets flagged?

Uses the CLI entry points directly so the on-disk layout matches what
`python -m fairdep ...` produces. Demo scale means a small corpus and
few epochs; the direction of the effect is only statistically reliable
at the full corpus size with several seeds (see the acceptance test for
that protocol).
"""

import json
from pathlib import Path

from fairdep.cli import main

out = Path("demo-out-bias")

run_off = "depaudionet_lam2_c1_gb-off_seed1"
run_on = "depaudionet_lam2_c1_gb-on_seed1"

steps = [
    ["synth", "--preset", "tiny", "--out", str(out), "--seed", "1"],
    ["features", "--out", str(out), "--kind", "mel"],
    ["train", "--out", str(out), "--epochs", "8", "--seed", "1",
     "--gender-balance", "off"],
    ["train", "--out", str(out), "--epochs", "8", "--seed", "1",
     "--gender-balance", "on"],
    ["eval", run_off, "--out", str(out)],
    ["eval", run_on, "--out", str(out)],
]
for argv in steps:
    print("$ fairdep " + " ".join(argv))
    code = main(argv)
    assert code == 0, f"step failed with exit {code}"
print("$ fairdep report " + f"{run_off} {run_on} --out {out}")
assert main(["report", run_off, run_on, "--out", str(out)]) == 0

print()
doc = json.loads((out / "report.json").read_text())
for run in doc["runs"]:
    tag = "balanced  " if run["gender_balance"] else "unbalanced"
    print(f"{tag}  spd {run['spd']:+.3f}  sufficiency gap {run['sufficiency_gap']:.3f}")
