"""Drive the command-line tool end to end: simulate, fit, predict, benchmark.

Run with ``python demos/03_cli_round_trip.py``. Works in a temporary directory
and takes a minute or two, mostly in the small benchmark at the end.
"""
# %%
import subprocess
import sys
import tempfile
from pathlib import Path


def gaqq(*args):
    cmd = [sys.executable, "-m", "gaqq", *args]
    print("$ gaqq", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True)
    print(out.stdout.strip() or out.stderr.strip(), f"[exit {out.returncode}]\n")
    return out


work = Path(tempfile.mkdtemp(prefix="gaqq-demo-"))

# %%
gaqq("simulate", "--precision-model", "M2", "--p", "15", "--sizes", "25,25",
     "--sparsity", "S1", "--seed", "11", "--out-dir", str(work / "sim"))
print((work / "sim" / "train.csv").read_text().splitlines()[0][:80], "...\n")

# %%
# the simulated tables have predictors x1..x14, the response y and a label column
gaqq("fit", "--data", str(work / "sim" / "train.csv"), "--label-col", "label",
     "--response-col", "y", "--tune", "--out-model", str(work / "model.json"))

# %%
gaqq("predict", "--model", str(work / "model.json"), "--data", str(work / "sim" / "test.csv"),
     "--truth-label-col", "label", "--truth-response-col", "y",
     "--out", str(work / "pred.csv"))
print("\n".join((work / "pred.csv").read_text().splitlines()[:4]), "\n")

# %%
# errors map to exit codes: 1 usage, 2 data, 3 numerical failure
gaqq("fit", "--data", str(work / "missing.csv"), "--tune", "--out-model", str(work / "x.json"))

# %%
gaqq("benchmark", "--scenario", "t1-m1-s2-p20", "--reps", "3", "--seed", "1",
     "--grid", "0.1,1,10", "--out", str(work / "bench"))
print((work / "bench" / "summary.csv").read_text())
